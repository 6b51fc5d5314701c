//! Monte Carlo behaviour of the detection test and the repeated game.

use duopoly_contract::collusion::same_type_plan;
use duopoly_contract::config::{ExperimentConfig, PolicyConfig};
use duopoly_contract::detection::{
    epsilon_for_false_alarm, monte_carlo_error_rates, Behavior, DetectionConfig,
};
use duopoly_contract::equilibrium::{lambda_star, CournotSolution};
use duopoly_contract::report::summarize_campaign;
use duopoly_contract::sim::{rent_crossover, AgentPolicy, Episode, Execution, Regime};
use duopoly_contract::{Agent, AgentType, ContractParams, NoiseSpec};

fn unit_pair() -> [AgentType; 2] {
    [AgentType::new(1.0).unwrap(); 2]
}

#[test]
fn honest_play_within_false_alarm_budget_is_not_punished() {
    let types = unit_pair();
    let noise = NoiseSpec::uniform(0.1).unwrap();
    let n = 100;
    let eps = epsilon_for_false_alarm(&types[0], &noise, n, 1e-3).unwrap();
    let detection = DetectionConfig::new(n, eps).unwrap();
    let episode = Episode::new(
        types,
        noise,
        [AgentPolicy::Honest, AgentPolicy::Honest],
        detection,
        50 * n,
    )
    .unwrap();
    let runs = episode.run_many(11, 1000, Execution::Parallel);
    let kept = runs.iter().filter(|s| s.punished_at.is_none()).count();
    assert!(kept >= 990, "{kept}");
    let lambda = lambda_star(&types, &noise).lambda_star;
    assert!(runs
        .iter()
        .filter(|s| s.punished_at.is_none())
        .all(|s| s.final_lambda == lambda));
}

#[test]
fn colluders_are_caught_in_the_first_window() {
    let mut cfg = ExperimentConfig::for_types(1.0, 1.0);
    cfg.noise.half_width = 0.1;
    cfg.detection.window = 500;
    cfg.detection.epsilon = Some(0.02);
    cfg.horizon = 5_000;
    cfg.trials = 300;
    cfg.policies = [PolicyConfig::Colluding, PolicyConfig::Colluding];
    let summary = summarize_campaign(&cfg).unwrap();
    assert!(
        summary.first_window_detection_fraction >= 0.99,
        "{summary:?}"
    );

    let trace = cfg.resolve().unwrap().episode().run(cfg.seed);
    let after = &trace.rounds[500..];
    assert!(after
        .iter()
        .all(|r| r.regime == Regime::Punished && r.payments == [0.0, 0.0]));
}

#[test]
fn false_alarms_fall_with_window_length() {
    let types = unit_pair();
    let noise = NoiseSpec::uniform(0.5).unwrap();
    let solution = lambda_star(&types, &noise);
    let rates: Vec<f64> = [10, 50, 100, 500]
        .iter()
        .map(|&n| {
            let config = DetectionConfig::new(n, 0.1).unwrap();
            // same seed for every n: common random numbers
            monte_carlo_error_rates(
                &Behavior::Cournot,
                &types,
                &noise,
                &solution,
                &config,
                5_000,
                4,
            )
            .unwrap()
            .per_agent[0]
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
    assert!(rates[0] > rates[3]);
}

#[test]
fn missed_detection_vanishes_with_window_length() {
    let types = unit_pair();
    let noise = NoiseSpec::uniform(0.3 * 3f64.sqrt()).unwrap();
    let c = ContractParams::new(1.0).unwrap();
    let solution = CournotSolution::at_lambda(&types, &noise, &c);
    let plan = same_type_plan(&types[0], &c, 1.0).unwrap();
    let rate = |n| {
        let config = DetectionConfig::new(n, 0.02).unwrap();
        monte_carlo_error_rates(
            &Behavior::Plan(plan),
            &types,
            &noise,
            &solution,
            &config,
            10_000,
            8,
        )
        .unwrap()
        .per_agent[0]
    };
    let (r25, r100, r4000) = (rate(25), rate(100), rate(4000));
    assert!(r4000 < r100 && r100 < r25, "{r25} {r100} {r4000}");
    assert!(r25 - r100 > 5.0 * (r25 * (1.0 - r25) / 1e4).sqrt());
}

#[test]
fn rent_disappears_after_an_empirical_horizon() {
    let types = unit_pair();
    let noise = NoiseSpec::uniform(0.1 * 3f64.sqrt()).unwrap();
    let solution = lambda_star(&types, &noise);
    let plan = same_type_plan(&types[0], &solution.contract(), 1.0).unwrap();
    let horizon = 100_000;
    let n = (horizon as f64).sqrt().ceil() as usize;
    let episode = Episode::new(
        types,
        noise,
        [AgentPolicy::Colluding(plan), AgentPolicy::Colluding(plan)],
        DetectionConfig::new(n, 0.03).unwrap(),
        horizon,
    )
    .unwrap();
    let honest = solution.agent_utilities[0];
    let crossings: Vec<usize> = (0..20)
        .map(|e| {
            rent_crossover(&episode.run_indexed(3, e), Agent::First, honest)
                .expect("rent eliminated")
        })
        .collect();
    let k0 = *crossings.iter().max().unwrap();
    println!("K0 over 20 episodes with n = {n}: max {k0}, all {crossings:?}");
    assert!(k0 <= 2 * n, "{crossings:?}");
}
