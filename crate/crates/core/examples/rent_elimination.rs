//! Colluders' long-run average utility with and without detection,
//! against the honest Cournot utility, over many seeded episodes.

use duopoly_contract::collusion::same_type_plan;
use duopoly_contract::detection::DetectionConfig;
use duopoly_contract::equilibrium::lambda_star;
use duopoly_contract::sim::{AgentPolicy, ContractMode, Episode, Execution};
use duopoly_contract::{AgentType, NoiseSpec};

fn main() -> duopoly_contract::Result<()> {
    let agent = AgentType::new(1.0)?;
    let types = [agent; 2];
    let noise = NoiseSpec::uniform(0.1 * 3f64.sqrt())?;
    let solution = lambda_star(&types, &noise);
    let plan = same_type_plan(&agent, &solution.contract(), 1.0)?;
    let honest = solution.agent_utilities[0];
    let horizon = 10_000;
    let detection = DetectionConfig::new(100, 0.03)?;
    let episode = Episode::new(
        types,
        noise,
        [AgentPolicy::Colluding(plan), AgentPolicy::Colluding(plan)],
        detection,
        horizon,
    )?;

    println!("honest Cournot utility {honest:.5}");
    for mode in [ContractMode::Dynamic, ContractMode::Static] {
        let runs = episode
            .clone()
            .with_mode(mode)
            .run_many(1, 200, Execution::Parallel);
        let avgs: Vec<f64> = runs.iter().map(|s| s.average_utilities()[0]).collect();
        let mean = avgs.iter().sum::<f64>() / avgs.len() as f64;
        let below = avgs.iter().filter(|&&u| u < honest).count();
        println!("{mode:?}: mean colluder utility {mean:.5}, below honest in {below}/200 episodes");
    }
    Ok(())
}
