//! Primitive economic objects of the principal–duopoly game: agent types,
//! bounded output noise, the coupled payment contract and the expected
//! utilities of the agents and the principal.
//!
//! Outputs follow `X_i = a_i + Q(θ_i) η_i` with zero-mean i.i.d. noise, so
//! `E[X_i] = a_i` and `E[X_i²] = a_i² + Q(θ_i)² σ²`. The payment rule is
//! `w_i(X) = X_i (λ − X_1 − X_2)` and the effort cost is `a² / (2θ)`.

use rand::Rng;
use rand_distr::{Distribution, Triangular};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One of the two agents of the duopoly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Agent {
    First,
    Second,
}

impl Agent {
    pub const BOTH: [Agent; 2] = [Agent::First, Agent::Second];

    pub fn index(self) -> usize {
        match self {
            Agent::First => 0,
            Agent::Second => 1,
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::First => Agent::Second,
            Agent::Second => Agent::First,
        }
    }
}

/// Affine output-noise scale `Q(θ) = slope · θ + intercept`, strictly
/// increasing in the type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityScale {
    slope: f64,
    intercept: f64,
}

impl QualityScale {
    /// `Q(θ) = θ`.
    pub const PROPORTIONAL: QualityScale = QualityScale {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::invalid(
                "quality slope",
                format!("{slope} must be finite and > 0"),
            ));
        }
        if !(intercept.is_finite() && intercept >= 0.0) {
            return Err(Error::invalid(
                "quality intercept",
                format!("{intercept} must be finite and >= 0"),
            ));
        }
        Ok(Self { slope, intercept })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.slope * theta + self.intercept
    }
}

impl Default for QualityScale {
    fn default() -> Self {
        Self::PROPORTIONAL
    }
}

/// An agent's type `θ > 0` together with its output-noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentType {
    theta: f64,
    quality: QualityScale,
}

impl AgentType {
    /// Type with the default scale `Q(θ) = θ`.
    pub fn new(theta: f64) -> Result<Self> {
        Self::with_quality(theta, QualityScale::PROPORTIONAL)
    }

    pub fn with_quality(theta: f64, quality: QualityScale) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(
                "type theta",
                format!("{theta} must be finite and > 0"),
            ));
        }
        Ok(Self { theta, quality })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn quality(&self) -> QualityScale {
        self.quality
    }

    /// `Q(θ)` for this agent.
    pub fn quality_scale(&self) -> f64 {
        self.quality.eval(self.theta)
    }

    /// `Q(θ)² σ²`, the variance of this agent's output.
    pub fn output_variance(&self, noise: &NoiseSpec) -> f64 {
        self.quality_scale().powi(2) * noise.variance()
    }

    pub(crate) fn cost(&self, effort: f64) -> f64 {
        effort * effort / (2.0 * self.theta)
    }
}

/// Shape of the zero-mean noise law on `[−b, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    Uniform,
    SymmetricTriangular,
    /// `±b` with probability one half each.
    ScaledBernoulli,
}

impl NoiseDistribution {
    /// `σ² = b² / k`; returns `k`.
    fn variance_divisor(self) -> f64 {
        match self {
            NoiseDistribution::Uniform => 3.0,
            NoiseDistribution::SymmetricTriangular => 6.0,
            NoiseDistribution::ScaledBernoulli => 1.0,
        }
    }
}

/// Bounded, zero-mean i.i.d. noise `η ∈ [−b, b]` shared by both agents.
///
/// A half-width of zero is the degenerate (noise-free) law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    distribution: NoiseDistribution,
    half_width: f64,
}

impl NoiseSpec {
    pub fn new(distribution: NoiseDistribution, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width >= 0.0) {
            return Err(Error::invalid(
                "noise half-width",
                format!("{half_width} must be finite and >= 0"),
            ));
        }
        Ok(Self {
            distribution,
            half_width,
        })
    }

    /// Uniform noise on `[−b, b]`, the default law.
    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(NoiseDistribution::Uniform, half_width)
    }

    /// Picks the half-width so the law has variance `variance`.
    pub fn with_variance(distribution: NoiseDistribution, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(
                "noise variance",
                format!("{variance} must be finite and >= 0"),
            ));
        }
        Self::new(
            distribution,
            (variance * distribution.variance_divisor()).sqrt(),
        )
    }

    /// No noise: every output equals its effort.
    pub fn none() -> Self {
        Self {
            distribution: NoiseDistribution::Uniform,
            half_width: 0.0,
        }
    }

    pub fn distribution(&self) -> NoiseDistribution {
        self.distribution
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn lower(&self) -> f64 {
        -self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.half_width
    }

    /// `η̄ − η̲`.
    pub fn range(&self) -> f64 {
        2.0 * self.half_width
    }

    /// `σ²`.
    pub fn variance(&self) -> f64 {
        self.half_width * self.half_width / self.distribution.variance_divisor()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.half_width == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let b = self.half_width;
        if b == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::Uniform => rng.random_range(-b..=b),
            NoiseDistribution::SymmetricTriangular => Triangular::new(-b, b, 0.0)
                .expect("non-empty symmetric support")
                .sample(rng),
            NoiseDistribution::ScaledBernoulli => {
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            }
        }
    }
}

/// The payment scale `λ ≥ 0` of the contract `w_i = X_i (λ − X_1 − X_2)`.
/// `λ = 0` is the punishment contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractParams {
    lambda: f64,
}

impl ContractParams {
    pub const PUNISHMENT: ContractParams = ContractParams { lambda: 0.0 };

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(
                "contract lambda",
                format!("{lambda} must be finite and >= 0"),
            ));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_punishment(&self) -> bool {
        self.lambda == 0.0
    }

    /// Realized payment to `agent` for the output pair.
    pub fn payment(&self, agent: Agent, outputs: [f64; 2]) -> f64 {
        outputs[agent.index()] * (self.lambda - outputs[0] - outputs[1])
    }
}

/// Efforts `(a_1, a_2)`, both nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffortProfile {
    efforts: [f64; 2],
}

impl EffortProfile {
    pub const ZERO: EffortProfile = EffortProfile {
        efforts: [0.0, 0.0],
    };

    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        for a in [a1, a2] {
            check_effort(a)?;
        }
        Ok(Self { efforts: [a1, a2] })
    }

    /// Negative (or NaN) efforts are clamped to zero.
    pub fn clamped(a1: f64, a2: f64) -> Self {
        Self {
            efforts: [a1.max(0.0), a2.max(0.0)],
        }
    }

    pub fn get(&self, agent: Agent) -> f64 {
        self.efforts[agent.index()]
    }

    pub fn a1(&self) -> f64 {
        self.efforts[0]
    }

    pub fn a2(&self) -> f64 {
        self.efforts[1]
    }

    pub fn as_array(&self) -> [f64; 2] {
        self.efforts
    }

    pub fn total(&self) -> f64 {
        self.efforts[0] + self.efforts[1]
    }

    /// Same profile with `agent`'s effort replaced.
    pub fn with(&self, agent: Agent, effort: f64) -> Result<Self> {
        check_effort(effort)?;
        let mut efforts = self.efforts;
        efforts[agent.index()] = effort;
        Ok(Self { efforts })
    }
}

fn check_effort(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "effort",
            format!("{a} must be finite and >= 0"),
        ))
    }
}

/// `h(a, θ) = a² / (2θ)`.
pub fn effort_cost(effort: f64, agent: &AgentType) -> Result<f64> {
    check_effort(effort)?;
    Ok(agent.cost(effort))
}

/// `E[w_i] = a_i (λ − a_1 − a_2) − Q(θ_i)² σ²`.
pub fn expected_payment(
    agent: Agent,
    profile: &EffortProfile,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> f64 {
    let own = profile.get(agent);
    own * (contract.lambda() - profile.total()) - types[agent.index()].output_variance(noise)
}

/// `u_i = E[w_i] − h(a_i, θ_i)`.
pub fn agent_expected_utility(
    agent: Agent,
    profile: &EffortProfile,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> f64 {
    expected_payment(agent, profile, types, noise, contract)
        - types[agent.index()].cost(profile.get(agent))
}

/// `U = E[(X_1 + X_2) − (X_1 + X_2)(λ − X_1 − X_2)]`.
///
/// The principal's utility grows with output variance under this payment
/// rule: `E[S²] = S̄² + (Q_1² + Q_2²) σ²` enters with a positive sign.
pub fn principal_expected_utility(
    profile: &EffortProfile,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> f64 {
    let total = profile.total();
    let variance = types[0].output_variance(noise) + types[1].output_variance(noise);
    total * (1.0 - contract.lambda()) + total * total + variance
}

/// One draw of `X = a + Q(θ) η`.
pub fn sample_output<R: Rng + ?Sized>(
    effort: f64,
    agent: &AgentType,
    noise: &NoiseSpec,
    rng: &mut R,
) -> f64 {
    effort + agent.quality_scale() * noise.sample(rng)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn unit_pair() -> [AgentType; 2] {
        [AgentType::new(1.0).unwrap(), AgentType::new(1.0).unwrap()]
    }

    fn lam(l: f64) -> ContractParams {
        ContractParams::new(l).unwrap()
    }

    fn profile(a1: f64, a2: f64) -> EffortProfile {
        EffortProfile::new(a1, a2).unwrap()
    }

    #[test]
    fn effort_cost_values() {
        let one = AgentType::new(1.0).unwrap();
        let two = AgentType::new(2.0).unwrap();
        assert_eq!(effort_cost(0.0, &one).unwrap(), 0.0);
        assert_eq!(effort_cost(0.5, &one).unwrap(), 0.125);
        assert_eq!(effort_cost(0.25, &two).unwrap(), 0.015625);
        assert!(effort_cost(-0.1, &one).is_err());
        assert!(AgentType::new(0.0).is_err());
        assert!(AgentType::new(-1.0).is_err());
    }

    #[test]
    fn expected_payment_examples() {
        let types = unit_pair();
        let p = expected_payment(
            Agent::First,
            &profile(0.25, 0.25),
            &types,
            &NoiseSpec::none(),
            &lam(1.0),
        );
        assert_abs_diff_eq!(p, 0.125, epsilon = 1e-15);

        let noise = NoiseSpec::with_variance(NoiseDistribution::Uniform, 0.01).unwrap();
        let p = expected_payment(
            Agent::First,
            &EffortProfile::ZERO,
            &types,
            &noise,
            &lam(1.0),
        );
        assert_abs_diff_eq!(p, -0.01, epsilon = 1e-15);

        let p = expected_payment(
            Agent::First,
            &EffortProfile::ZERO,
            &types,
            &NoiseSpec::none(),
            &lam(0.0),
        );
        assert_eq!(p, 0.0);
    }

    #[test]
    fn agent_utility_examples() {
        let types = unit_pair();
        let none = NoiseSpec::none();
        let u =
            agent_expected_utility(Agent::First, &profile(0.25, 0.25), &types, &none, &lam(1.0));
        assert_abs_diff_eq!(u, 0.09375, epsilon = 1e-15);
        let u = agent_expected_utility(
            Agent::First,
            &profile(1.0 / 6.0, 1.0 / 6.0),
            &types,
            &none,
            &lam(1.0),
        );
        assert_abs_diff_eq!(u, 7.0 / 72.0, epsilon = 1e-15);
        assert!(u > 0.09375);
        let u =
            agent_expected_utility(Agent::First, &EffortProfile::ZERO, &types, &none, &lam(1.0));
        assert_eq!(u, 0.0);
    }

    #[test]
    fn principal_utility_examples() {
        let types = unit_pair();
        let u =
            principal_expected_utility(&profile(0.25, 0.25), &types, &NoiseSpec::none(), &lam(1.0));
        assert_abs_diff_eq!(u, 0.25, epsilon = 1e-15);
        let u =
            principal_expected_utility(&EffortProfile::ZERO, &types, &NoiseSpec::none(), &lam(1.0));
        assert_eq!(u, 0.0);
        let noise = NoiseSpec::with_variance(NoiseDistribution::Uniform, 0.04).unwrap();
        let u = principal_expected_utility(&profile(0.25, 0.25), &types, &noise, &lam(1.0));
        assert_abs_diff_eq!(u, 0.33, epsilon = 1e-14);
    }

    #[test]
    fn sample_output_support() {
        let agent = AgentType::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            sample_output(0.25, &agent, &NoiseSpec::none(), &mut rng),
            0.25
        );
        let noise = NoiseSpec::uniform(0.3).unwrap();
        for _ in 0..10_000 {
            let x = sample_output(0.25, &agent, &noise, &mut rng);
            assert!((-0.05..=0.55).contains(&x), "{x}");
        }
    }

    #[test]
    fn sample_mean_matches_effort() {
        let agent = AgentType::new(1.0).unwrap();
        let noise = NoiseSpec::with_variance(NoiseDistribution::Uniform, 0.03).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_output(0.25, &agent, &noise, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - 0.25).abs() < 3.0 * (0.03f64 / n as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn analytic_variance_matches_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dist in [
            NoiseDistribution::Uniform,
            NoiseDistribution::SymmetricTriangular,
            NoiseDistribution::ScaledBernoulli,
        ] {
            let noise = NoiseSpec::new(dist, 0.7).unwrap();
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
            assert!(draws
                .iter()
                .all(|x| (noise.lower()..=noise.upper()).contains(x)));
            let var = draws.iter().map(|x| x * x).sum::<f64>() / n as f64;
            assert!(
                (var - noise.variance()).abs() < 0.02 * noise.variance(),
                "{dist:?}: {var}"
            );
        }
        let n = NoiseSpec::with_variance(NoiseDistribution::Uniform, 0.03).unwrap();
        assert_abs_diff_eq!(n.half_width(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn budget_identity() {
        let types = [
            AgentType::with_quality(1.7, QualityScale::new(0.5, 0.2).unwrap()).unwrap(),
            AgentType::new(0.4).unwrap(),
        ];
        let noise = NoiseSpec::uniform(0.35).unwrap();
        let c = lam(1.3);
        let p = profile(0.21, 0.47);
        let paid: f64 = Agent::BOTH
            .iter()
            .map(|&i| expected_payment(i, &p, &types, &noise, &c))
            .sum();
        let total = paid + principal_expected_utility(&p, &types, &noise, &c);
        assert_abs_diff_eq!(total, p.total(), epsilon = 1e-14);
    }

    #[test]
    fn utility_is_concave_in_own_effort() {
        let types = [AgentType::new(0.8).unwrap(), AgentType::new(2.5).unwrap()];
        let noise = NoiseSpec::uniform(0.2).unwrap();
        let c = lam(1.5);
        let h = 0.01;
        for k in 1..200 {
            let a = k as f64 * h;
            let u =
                |x: f64| agent_expected_utility(Agent::First, &profile(x, 0.3), &types, &noise, &c);
            assert!(u(a + h) - 2.0 * u(a) + u(a - h) <= 1e-14);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_closed_forms() {
        let types = [AgentType::new(1.0).unwrap(), AgentType::new(2.0).unwrap()];
        let noise = NoiseSpec::new(NoiseDistribution::SymmetricTriangular, 0.4).unwrap();
        let c = lam(1.1);
        let p = profile(0.3, 0.35);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut w = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut principal = Vec::with_capacity(n);
        for _ in 0..n {
            let x = [
                sample_output(p.a1(), &types[0], &noise, &mut rng),
                sample_output(p.a2(), &types[1], &noise, &mut rng),
            ];
            let w1 = c.payment(Agent::First, x);
            let w2 = c.payment(Agent::Second, x);
            w[0].push(w1);
            w[1].push(w2);
            principal.push(x[0] + x[1] - w1 - w2);
        }
        let check = |xs: &[f64], expected: f64| {
            let m = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (m - expected).abs() < 4.0 * se,
                "mean {m} expected {expected} se {se}"
            );
        };
        for i in Agent::BOTH {
            check(&w[i.index()], expected_payment(i, &p, &types, &noise, &c));
        }
        check(
            &principal,
            principal_expected_utility(&p, &types, &noise, &c),
        );
    }

    #[test]
    fn zero_noise_payment_is_deterministic() {
        let types = unit_pair();
        let c = lam(0.9);
        let p = profile(0.2, 0.4);
        let det = c.payment(Agent::Second, [0.2, 0.4]);
        assert_eq!(
            expected_payment(Agent::Second, &p, &types, &NoiseSpec::none(), &c),
            det
        );
    }
}
