//! One episode of the repeated game: colluders are caught after the first
//! window and the contract drops to zero.

use duopoly_contract::collusion::same_type_plan;
use duopoly_contract::detection::DetectionConfig;
use duopoly_contract::sim::{long_run_average_utilities, run_episode, AgentPolicy};
use duopoly_contract::{AgentType, ContractParams, NoiseSpec};

fn main() -> duopoly_contract::Result<()> {
    let agent = AgentType::new(1.0)?;
    let types = [agent; 2];
    let noise = NoiseSpec::uniform(0.1)?;
    let plan = same_type_plan(&agent, &ContractParams::new(1.0)?, 1.0)?;
    let detection = DetectionConfig::new(50, 0.03)?;

    for (label, policy) in [
        ("honest", AgentPolicy::Honest),
        ("colluding", AgentPolicy::Colluding(plan)),
    ] {
        let trace = run_episode(types, noise, [policy.clone(), policy], detection, 1_000, 9)?;
        let s = &trace.summary;
        let avg = long_run_average_utilities(&trace);
        println!(
            "{label:<10} punished after round {:?}, final lambda {}, averages {:.4} {:.4} principal {:.4}",
            s.punished_at, s.final_lambda, avg[0], avg[1], avg[2]
        );
        for event in s.detection_events.iter().take(3) {
            println!("    round {:>4}: {:?}", event.round, event.hypotheses);
        }
    }
    Ok(())
}
