//! Sweeps: the same-type gain changes sign near 0.6404, and the missed
//! detection rate falls with the window length.

use duopoly_contract::config::{ExperimentConfig, PolicyConfig};
use duopoly_contract::sweep::{cmd_sweep, SweepAxis, SweepSpec};

fn main() -> duopoly_contract::Result<()> {
    let base = ExperimentConfig::for_types(1.0, 1.0);
    let spec = SweepSpec {
        axes: vec![SweepAxis::range("theta", 0.5, 0.8, 0.001)],
        outputs: vec!["same_type_gain".into()],
    };
    let table = cmd_sweep(&base, &spec)?;
    let crossing = table
        .rows
        .iter()
        .find(|r| r[1].as_f64().is_some_and(|g| g > 0.0))
        .and_then(|r| r[0].as_f64());
    println!("first theta with positive gain: {crossing:?}");

    let mut cfg = ExperimentConfig::for_types(1.0, 1.0);
    cfg.contract.lambda = Some(1.0);
    cfg.noise.half_width = 0.57 * 3f64.sqrt();
    cfg.trials = 4_000;
    cfg.policies = [PolicyConfig::Colluding, PolicyConfig::Colluding];
    let spec = SweepSpec {
        axes: vec![SweepAxis::values(
            "window",
            vec![25.0, 100.0, 400.0, 1600.0],
        )],
        outputs: vec!["missed_detection_rate".into(), "false_alarm_rate".into()],
    };
    cmd_sweep(&cfg, &spec)?
        .write_csv(std::io::stdout())
        .expect("stdout");
    Ok(())
}
