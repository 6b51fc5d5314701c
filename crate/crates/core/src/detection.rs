//! Windowed mean test for deviations from the Cournot equilibrium, its
//! Hoeffding false-alarm bound, and Monte Carlo error-rate estimators.
//!
//! Over a window of `n` outputs the principal accepts `H0` ("agent plays
//! Cournot") iff `|X̄_i − λ̂_i θ_i| < ε`, where `λ̂_i θ_i` is the agent's
//! equilibrium effort. Any other outcome, ties included, is `H1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collusion::CollusionPlan;
use crate::equilibrium::{coupling_denominator, CournotSolution};
use crate::model::{sample_output, Agent, AgentType, EffortProfile, NoiseSpec};
use crate::{Error, Result};

/// Window length `n` and test half-width `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionConfig {
    window: usize,
    epsilon: f64,
}

impl DetectionConfig {
    pub fn new(window: usize, epsilon: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("detection window", "must be at least 1"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(
                "detection epsilon",
                format!("{epsilon} must be finite and > 0"),
            ));
        }
        Ok(Self { window, epsilon })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Playing the Cournot equilibrium.
    H0,
    /// Deviating.
    H1,
}

impl Hypothesis {
    pub fn is_flag(self) -> bool {
        self == Hypothesis::H1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestCenter {
    /// `λ̂_i = λ* (θ_{−i} + 1) / D₀`.
    pub lambda_hat: f64,
    /// `λ̂_i θ_i`, equal to the equilibrium effort `a_i*`.
    pub center: f64,
}

pub fn test_center(types: &[AgentType; 2], solution: &CournotSolution, agent: Agent) -> TestCenter {
    let other = types[agent.other().index()].theta();
    let lambda_hat = solution.lambda_star * (other + 1.0) / coupling_denominator(types);
    TestCenter {
        lambda_hat,
        center: lambda_hat * types[agent.index()].theta(),
    }
}

pub fn run_test(
    samples: &[f64],
    center: &TestCenter,
    config: &DetectionConfig,
) -> Result<Hypothesis> {
    if samples.len() != config.window {
        return Err(Error::WindowLength {
            expected: config.window,
            actual: samples.len(),
        });
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(decide(mean, center.center, config.epsilon))
}

fn decide(mean: f64, center: f64, epsilon: f64) -> Hypothesis {
    if (mean - center).abs() < epsilon {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    }
}

/// Which support width enters the Hoeffding exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeConvention {
    /// `Q(θ_i)(η̄ − η̲)`, the support width of `X_i`.
    #[default]
    OutputSupport,
    /// `η̄ − η̲`, the raw noise support.
    NoiseSupport,
}

impl RangeConvention {
    pub fn width(self, agent: &AgentType, noise: &NoiseSpec) -> f64 {
        match self {
            RangeConvention::OutputSupport => agent.quality_scale() * noise.range(),
            RangeConvention::NoiseSupport => noise.range(),
        }
    }
}

/// `2 exp(−2 n ε² / (Q(θ)(η̄ − η̲))²)`, clipped to `[0, 1]`.
pub fn hoeffding_false_alarm_bound(
    agent: &AgentType,
    noise: &NoiseSpec,
    config: &DetectionConfig,
) -> f64 {
    hoeffding_bound(agent, noise, config, RangeConvention::OutputSupport)
}

pub fn hoeffding_bound(
    agent: &AgentType,
    noise: &NoiseSpec,
    config: &DetectionConfig,
    convention: RangeConvention,
) -> f64 {
    let width = convention.width(agent, noise);
    if width == 0.0 {
        return 0.0;
    }
    let exponent = -2.0 * config.window as f64 * config.epsilon.powi(2) / (width * width);
    (2.0 * exponent.exp()).min(1.0)
}

/// Half-width `ε` whose Hoeffding bound equals `budget` for an `n`-window:
/// `ε = Q(θ)(η̄ − η̲) √(ln(2 / budget) / (2n))`.
pub fn epsilon_for_false_alarm(
    agent: &AgentType,
    noise: &NoiseSpec,
    window: usize,
    budget: f64,
) -> Result<f64> {
    if window == 0 {
        return Err(Error::invalid("detection window", "must be at least 1"));
    }
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::invalid(
            "false-alarm budget",
            format!("{budget} must lie in (0, 1)"),
        ));
    }
    let width = RangeConvention::OutputSupport.width(agent, noise);
    Ok(width * ((2.0 / budget).ln() / (2.0 * window as f64)).sqrt())
}

/// What the agents actually play during the simulated windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Behavior {
    Cournot,
    Plan(CollusionPlan),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// Honest play flagged as `H1`.
    FalseAlarm,
    /// Collusion passed as `H0`.
    MissedDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRates {
    pub kind: ErrorKind,
    /// Per-agent error rate.
    pub per_agent: [f64; 2],
    /// Rate of the wrong joint decision: both flagged under Cournot play
    /// (false punishment), or not both flagged under collusion (no punishment).
    pub joint: f64,
    pub trials: usize,
}

impl ErrorRates {
    /// Binomial standard error of a per-agent rate.
    pub fn standard_error(&self, agent: Agent) -> f64 {
        let p = self.per_agent[agent.index()];
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// RNG for trial `index` of a campaign seeded with `seed`. Each trial owns an
/// independent ChaCha stream, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `trials` independent `n`-windows under `behavior` and reports
/// how often the test decides wrongly. Deterministic in `seed`.
pub fn monte_carlo_error_rates(
    behavior: &Behavior,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    solution: &CournotSolution,
    config: &DetectionConfig,
    trials: usize,
    seed: u64,
) -> Result<ErrorRates> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let (efforts, abstaining, kind) = match behavior {
        Behavior::Cournot => (solution.efforts, None, ErrorKind::FalseAlarm),
        Behavior::Plan(plan) => (plan.efforts, plan.abstaining(), ErrorKind::MissedDetection),
    };
    let centers = Agent::BOTH.map(|i| test_center(types, solution, i).center);
    let n = config.window;

    let decisions: Vec<[Hypothesis; 2]> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut sums = [0.0; 2];
            for _ in 0..n {
                for i in Agent::BOTH {
                    sums[i.index()] +=
                        window_output(i, &efforts, abstaining, types, noise, &mut rng);
                }
            }
            Agent::BOTH.map(|i| {
                decide(
                    sums[i.index()] / n as f64,
                    centers[i.index()],
                    config.epsilon,
                )
            })
        })
        .collect();

    let wrong = |h: Hypothesis| match kind {
        ErrorKind::FalseAlarm => h == Hypothesis::H1,
        ErrorKind::MissedDetection => h == Hypothesis::H0,
    };
    let mut per_agent = [0usize; 2];
    let mut joint = 0usize;
    for d in &decisions {
        for i in 0..2 {
            per_agent[i] += wrong(d[i]) as usize;
        }
        let both_flagged = d[0].is_flag() && d[1].is_flag();
        joint += match kind {
            ErrorKind::FalseAlarm => both_flagged,
            ErrorKind::MissedDetection => !both_flagged,
        } as usize;
    }
    let rate = |c: usize| c as f64 / trials as f64;
    Ok(ErrorRates {
        kind,
        per_agent: per_agent.map(rate),
        joint: rate(joint),
        trials,
    })
}

/// One output of `agent`; an idle delegation partner submits nothing (zero).
fn window_output(
    agent: Agent,
    efforts: &EffortProfile,
    abstaining: Option<Agent>,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> f64 {
    // draw regardless so both agents consume the stream identically
    let x = sample_output(efforts.get(agent), &types[agent.index()], noise, rng);
    if abstaining == Some(agent) {
        0.0
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::collusion::same_type_plan;
    use crate::equilibrium::lambda_star;
    use crate::model::ContractParams;

    fn pair(t1: f64, t2: f64) -> [AgentType; 2] {
        [AgentType::new(t1).unwrap(), AgentType::new(t2).unwrap()]
    }

    #[test]
    fn test_center_examples() {
        let types = pair(1.0, 1.0);
        let s = lambda_star(&types, &NoiseSpec::none());
        let c = test_center(&types, &s, Agent::First);
        assert_abs_diff_eq!(c.lambda_hat, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.center, 0.25, epsilon = 1e-15);

        let types = pair(2.0, 1.0);
        let s = lambda_star(&types, &NoiseSpec::none());
        assert_abs_diff_eq!(
            test_center(&types, &s, Agent::First).center,
            1.0 / 3.0,
            epsilon = 1e-15
        );

        let s = CournotSolution::at_lambda(&types, &NoiseSpec::none(), &ContractParams::PUNISHMENT);
        assert_eq!(test_center(&types, &s, Agent::Second).center, 0.0);
    }

    #[test]
    fn run_test_examples() {
        let center = TestCenter {
            lambda_hat: 0.25,
            center: 0.25,
        };
        let config = DetectionConfig::new(1, 0.01).unwrap();
        assert_eq!(
            run_test(&[0.251], &center, &config).unwrap(),
            Hypothesis::H0
        );
        assert_eq!(run_test(&[0.30], &center, &config).unwrap(), Hypothesis::H1);
        assert_eq!(run_test(&[0.26], &center, &config).unwrap(), Hypothesis::H1);
        // boundary goes to H1
        let center = TestCenter {
            lambda_hat: 0.5,
            center: 0.5,
        };
        let config = DetectionConfig::new(1, 0.25).unwrap();
        assert_eq!(run_test(&[0.75], &center, &config).unwrap(), Hypothesis::H1);
        assert_eq!(run_test(&[0.25], &center, &config).unwrap(), Hypothesis::H1);
        assert!(matches!(
            run_test(&[0.2, 0.3], &center, &config),
            Err(Error::WindowLength {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn hoeffding_examples() {
        let agent = AgentType::new(1.0).unwrap();
        let unit = NoiseSpec::uniform(0.5).unwrap();
        let b =
            hoeffding_false_alarm_bound(&agent, &unit, &DetectionConfig::new(100, 0.1).unwrap());
        assert_abs_diff_eq!(b, 2.0 * (-2f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.27067, epsilon = 1e-5);
        let b =
            hoeffding_false_alarm_bound(&agent, &unit, &DetectionConfig::new(100, 1e6).unwrap());
        assert_eq!(b, 0.0);
        let b = hoeffding_false_alarm_bound(&agent, &unit, &DetectionConfig::new(1, 1e-9).unwrap());
        assert_eq!(b, 1.0);
    }

    #[test]
    fn printed_and_scaled_ranges_differ_by_quality() {
        let agent = AgentType::new(2.0).unwrap();
        let noise = NoiseSpec::uniform(0.25).unwrap();
        let cfg = DetectionConfig::new(50, 0.2).unwrap();
        let scaled = hoeffding_bound(&agent, &noise, &cfg, RangeConvention::OutputSupport);
        let printed = hoeffding_bound(&agent, &noise, &cfg, RangeConvention::NoiseSupport);
        assert!(scaled > printed);
        assert_abs_diff_eq!(
            printed,
            2.0 * (-2.0 * 50.0 * 0.04f64 / 0.25).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bound_is_monotone() {
        let agent = AgentType::new(1.0).unwrap();
        let noise = NoiseSpec::uniform(0.5).unwrap();
        let mut last = f64::INFINITY;
        for n in [1, 5, 20, 80, 320] {
            let b =
                hoeffding_false_alarm_bound(&agent, &noise, &DetectionConfig::new(n, 0.1).unwrap());
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn epsilon_helper_inverts_bound() {
        let agent = AgentType::new(1.3).unwrap();
        let noise = NoiseSpec::uniform(0.2).unwrap();
        let eps = epsilon_for_false_alarm(&agent, &noise, 200, 1e-3).unwrap();
        let b =
            hoeffding_false_alarm_bound(&agent, &noise, &DetectionConfig::new(200, eps).unwrap());
        assert_abs_diff_eq!(b, 1e-3, epsilon = 1e-15);
        assert!(epsilon_for_false_alarm(&agent, &noise, 200, 0.0).is_err());
    }

    #[test]
    fn noiseless_cournot_never_alarms() {
        let types = pair(1.0, 1.0);
        let s = lambda_star(&types, &NoiseSpec::none());
        let cfg = DetectionConfig::new(10, 1e-9).unwrap();
        let r = monte_carlo_error_rates(
            &Behavior::Cournot,
            &types,
            &NoiseSpec::none(),
            &s,
            &cfg,
            100,
            1,
        )
        .unwrap();
        assert_eq!(r.per_agent, [0.0, 0.0]);
        assert_eq!(r.kind, ErrorKind::FalseAlarm);
    }

    #[test]
    fn large_window_catches_collusion() {
        let types = pair(1.0, 1.0);
        let noise = NoiseSpec::uniform(0.1).unwrap();
        let s = CournotSolution::at_lambda(&types, &noise, &ContractParams::new(1.0).unwrap());
        let plan = same_type_plan(&types[0], &s.contract(), 1.0).unwrap();
        let cfg = DetectionConfig::new(10_000, 0.02).unwrap();
        let r = monte_carlo_error_rates(&Behavior::Plan(plan), &types, &noise, &s, &cfg, 200, 9)
            .unwrap();
        assert!(r.per_agent[0] < 0.01 && r.joint < 0.01);
        assert_eq!(r.kind, ErrorKind::MissedDetection);
    }

    #[test]
    fn rates_are_seed_deterministic() {
        let types = pair(1.0, 2.0);
        let noise = NoiseSpec::uniform(0.5).unwrap();
        let s = lambda_star(&types, &noise);
        let cfg = DetectionConfig::new(20, 0.05).unwrap();
        let a =
            monte_carlo_error_rates(&Behavior::Cournot, &types, &noise, &s, &cfg, 500, 42).unwrap();
        let b =
            monte_carlo_error_rates(&Behavior::Cournot, &types, &noise, &s, &cfg, 500, 42).unwrap();
        assert_eq!(a, b);
        assert!(
            monte_carlo_error_rates(&Behavior::Cournot, &types, &noise, &s, &cfg, 0, 42).is_err()
        );
    }
}
