//! Monte Carlo false-alarm and missed-detection rates of the window test,
//! next to the Hoeffding bound.

use duopoly_contract::collusion::same_type_plan;
use duopoly_contract::detection::{
    hoeffding_false_alarm_bound, monte_carlo_error_rates, Behavior, DetectionConfig,
};
use duopoly_contract::equilibrium::CournotSolution;
use duopoly_contract::{AgentType, ContractParams, NoiseSpec};

fn main() -> duopoly_contract::Result<()> {
    let agent = AgentType::new(1.0)?;
    let types = [agent; 2];
    let noise = NoiseSpec::uniform(0.5)?;
    let contract = ContractParams::new(1.0)?;
    let solution = CournotSolution::at_lambda(&types, &noise, &contract);
    let plan = same_type_plan(&agent, &contract, 1.0)?;
    let trials = 10_000;
    println!(
        "{:>6} {:>7} {:>12} {:>10} {:>12}",
        "n", "eps", "false alarm", "bound", "missed"
    );
    for (n, eps) in [(25, 0.1), (100, 0.1), (400, 0.05), (1600, 0.025)] {
        let config = DetectionConfig::new(n, eps)?;
        let fa = monte_carlo_error_rates(
            &Behavior::Cournot,
            &types,
            &noise,
            &solution,
            &config,
            trials,
            1,
        )?;
        let md = monte_carlo_error_rates(
            &Behavior::Plan(plan),
            &types,
            &noise,
            &solution,
            &config,
            trials,
            2,
        )?;
        println!(
            "{n:>6} {eps:>7} {:>12.4} {:>10.4} {:>12.4}",
            fa.per_agent[0],
            hoeffding_false_alarm_bound(&agent, &noise, &config),
            md.per_agent[0]
        );
    }
    Ok(())
}
