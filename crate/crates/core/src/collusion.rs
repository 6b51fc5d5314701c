//! Collusion strategies and their rationality.
//!
//! Colluding agents jointly mimic a monopolist. Agents of equal type split
//! the monopoly effort of some target type `θ̂` evenly without side payments;
//! agents of different types delegate the whole monopoly effort to the
//! higher type, who hands a fraction `α` of its expected payment to the idle
//! partner. A plan is rational when every agent strictly gains over the
//! Cournot equilibrium at the same contract.
//!
//! The idle partner of a delegation plan submits no output, so it bears no
//! output-variance term; the side-payment bounds below depend on this.

use serde::Serialize;

use crate::equilibrium::cournot_efforts;
use crate::model::{
    agent_expected_utility, expected_payment, Agent, AgentType, ContractParams, EffortProfile,
    NoiseSpec,
};
use crate::{Error, Result};

/// Off-equilibrium efforts plus the side payment that sustains them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollusionPlan {
    pub efforts: EffortProfile,
    /// Share of the payer's expected payment handed over, in `[0, 1]`.
    pub alpha: f64,
    /// Side payment `P ≥ 0` from `payer` to the other agent.
    pub transfer: f64,
    /// Type whose monopoly effort the pair reproduces.
    pub target_theta: f64,
    pub payer: Option<Agent>,
    /// Contract the plan was built for.
    pub lambda: f64,
}

impl CollusionPlan {
    pub fn contract(&self) -> ContractParams {
        ContractParams::new(self.lambda).expect("plan lambda is validated")
    }

    /// Receiver of a delegation plan; it exerts no effort and submits no output.
    pub fn abstaining(&self) -> Option<Agent> {
        self.payer.map(Agent::other)
    }

    /// Signed transfer seen by `agent`: `+P` for the receiver, `−P` for the payer.
    pub fn transfer_to(&self, agent: Agent) -> f64 {
        match self.payer {
            Some(p) if p == agent => -self.transfer,
            Some(_) => self.transfer,
            None => 0.0,
        }
    }
}

/// `a^M = λθ / (2θ + 1)`, the effort of an agent serving the principal alone.
pub fn monopoly_effort(agent: &AgentType, contract: &ContractParams) -> f64 {
    let theta = agent.theta();
    contract.lambda() * theta / (2.0 * theta + 1.0)
}

/// Equal split of the `θ̂`-monopoly effort, no side payment. With
/// `target_theta == θ` the pair mimics its own monopoly.
pub fn same_type_plan(
    agent: &AgentType,
    contract: &ContractParams,
    target_theta: f64,
) -> Result<CollusionPlan> {
    let target = AgentType::with_quality(target_theta, agent.quality()).map_err(|_| {
        Error::invalid(
            "target theta",
            format!("{target_theta} must be finite and > 0"),
        )
    })?;
    let half = 0.5 * monopoly_effort(&target, contract);
    Ok(CollusionPlan {
        efforts: EffortProfile::clamped(half, half),
        alpha: 0.0,
        transfer: 0.0,
        target_theta,
        payer: None,
        lambda: contract.lambda(),
    })
}

/// Delegation plan for agents of different types: the higher type exerts its
/// monopoly effort and pays `α E[w_h]` to the lower type, who stays idle.
pub fn delegation_plan(
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
    alpha: f64,
) -> Result<CollusionPlan> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(
            "side-payment fraction",
            format!("{alpha} must lie in [0, 1]"),
        ));
    }
    let high = match types[0].theta().partial_cmp(&types[1].theta()) {
        Some(std::cmp::Ordering::Greater) => Agent::First,
        Some(std::cmp::Ordering::Less) => Agent::Second,
        _ => {
            return Err(Error::invalid(
                "types",
                "delegation needs agents of different types",
            ))
        }
    };
    let effort = monopoly_effort(&types[high.index()], contract);
    let efforts = EffortProfile::ZERO.with(high, effort)?;
    let payer_payment = expected_payment(high, &efforts, types, noise, contract);
    Ok(CollusionPlan {
        efforts,
        alpha,
        transfer: alpha * payer_payment,
        target_theta: types[high.index()].theta(),
        payer: Some(high),
        lambda: contract.lambda(),
    })
}

/// Expected utility of each agent under the plan, side payment included.
pub fn plan_utilities(plan: &CollusionPlan, types: &[AgentType; 2], noise: &NoiseSpec) -> [f64; 2] {
    let contract = plan.contract();
    Agent::BOTH.map(|i| {
        let own = if plan.abstaining() == Some(i) {
            0.0
        } else {
            agent_expected_utility(i, &plan.efforts, types, noise, &contract)
        };
        own + plan.transfer_to(i)
    })
}

/// Cournot utilities at the plan's contract.
pub fn cournot_utilities(
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> [f64; 2] {
    let efforts = cournot_efforts(types, contract);
    Agent::BOTH.map(|i| agent_expected_utility(i, &efforts, types, noise, contract))
}

/// Strict Pareto improvement over Cournot play for both agents.
pub fn is_rational(plan: &CollusionPlan, types: &[AgentType; 2], noise: &NoiseSpec) -> bool {
    let colluding = plan_utilities(plan, types, noise);
    let cournot = cournot_utilities(types, noise, &plan.contract());
    colluding[0] > cournot[0] && colluding[1] > cournot[1]
}

/// `(1 + √17) / 8 ≈ 0.6404`: same-type collusion pays strictly above it.
pub fn same_type_threshold() -> f64 {
    (1.0 + 17f64.sqrt()) / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SameTypeVerdict {
    /// `4θ⁵ + 11θ⁴ + 8θ³ > 2θ² + 4θ + 1`.
    pub rational: bool,
    /// Per-agent utility under own-monopoly mimicry minus Cournot utility.
    pub gain: f64,
    pub collusion_utility: f64,
    pub cournot_utility: f64,
}

/// Whether two agents of the same type gain by splitting their own monopoly
/// effort. The verdict does not depend on `λ` or `σ`; the gain scales with `λ²`.
pub fn same_type_rational(
    agent: &AgentType,
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> SameTypeVerdict {
    let t = agent.theta();
    let lhs = 4.0 * t.powi(5) + 11.0 * t.powi(4) + 8.0 * t.powi(3);
    let rhs = 2.0 * t * t + 4.0 * t + 1.0;
    let types = [*agent, *agent];
    let plan = same_type_plan(agent, contract, t).expect("theta validated by AgentType");
    let collusion_utility = plan_utilities(&plan, &types, noise)[0];
    let cournot_utility = cournot_utilities(&types, noise, contract)[0];
    SameTypeVerdict {
        rational: lhs > rhs,
        gain: collusion_utility - cournot_utility,
        collusion_utility,
        cournot_utility,
    }
}

/// Per-agent utility when two agents of type `θ` split the `θ̂`-monopoly effort.
pub fn mimicry_utility(
    agent: &AgentType,
    noise: &NoiseSpec,
    contract: &ContractParams,
    target_theta: f64,
) -> Result<f64> {
    let plan = same_type_plan(agent, contract, target_theta)?;
    Ok(plan_utilities(&plan, &[*agent, *agent], noise)[0])
}

/// Targets `θ̂ ∈ (θ, θ(4θ + 3)]` for which mimicking the `θ̂`-monopoly beats
/// mimicking the agents' own; utilities tie at both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaHatRange {
    /// Excluded.
    pub lower: f64,
    /// Included.
    pub upper: f64,
}

impl ThetaHatRange {
    pub fn contains(&self, target_theta: f64) -> bool {
        self.lower < target_theta && target_theta <= self.upper
    }
}

pub fn theta_hat_range(agent: &AgentType) -> ThetaHatRange {
    let t = agent.theta();
    ThetaHatRange {
        lower: t,
        upper: t * (4.0 * t + 3.0),
    }
}

/// Side-payment fractions that make the delegation plan rational for both
/// agents: `lower < α < upper`, intersected with `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBounds {
    pub lower: f64,
    pub upper: f64,
    /// `D = 2 D₀²`.
    pub d: f64,
    /// `Q(θ_h)² σ² / (λ² θ_h)`.
    pub r_high: f64,
    /// `Q(θ_ℓ)² σ² / (λ² θ_h)`.
    pub r_low: f64,
}

impl AlphaBounds {
    /// The admissible α range clipped to `[0, 1]`, or `None` if empty.
    pub fn feasible(&self) -> Option<(f64, f64)> {
        if self.lower < self.upper && self.lower < 1.0 && self.upper > 0.0 {
            Some((self.lower.max(0.0), self.upper.min(1.0)))
        } else {
            None
        }
    }

    pub fn is_nonempty(&self) -> bool {
        self.feasible().is_some()
    }

    /// Midpoint of the feasible range.
    pub fn midpoint(&self) -> Option<f64> {
        self.feasible().map(|(lo, hi)| 0.5 * (lo + hi))
    }
}

pub fn alpha_bounds(
    high: &AgentType,
    low: &AgentType,
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> Result<AlphaBounds> {
    let (th, tl) = (high.theta(), low.theta());
    if th <= tl {
        return Err(Error::invalid(
            "types",
            format!("theta_h = {th} must exceed theta_l = {tl}"),
        ));
    }
    let lambda = contract.lambda();
    if lambda <= 0.0 {
        return Err(Error::invalid(
            "contract lambda",
            "side-payment bounds need lambda > 0",
        ));
    }
    let d0 = (2.0 * th + 1.0) * (2.0 * tl + 1.0) - th * tl;
    let d = 2.0 * d0 * d0;
    let scale = lambda * lambda * th;
    let r_high = high.output_variance(noise) / scale;
    let r_low = low.output_variance(noise) / scale;
    let sq = (2.0 * th + 1.0).powi(2);
    let denominator = (th + 1.0) - r_high * sq;
    if denominator <= 0.0 {
        return Err(Error::DegenerateAlphaBounds { denominator });
    }
    let upper = ((2.0 * th + 1.0) * d / 2.0 - (tl + 1.0).powi(2) * (2.0 * th + 1.0).powi(3))
        / (d * denominator);
    let lower =
        (tl * (th + 1.0).powi(2) * (2.0 * tl + 1.0) - d * th * r_low) * sq / (d * th * denominator);
    Ok(AlphaBounds {
        lower,
        upper,
        d,
        r_high,
        r_low,
    })
}

/// Threshold on `θ_h` in condition C2:
/// `(√((θ_ℓ + 1)(17θ_ℓ + 9)) + 3θ_ℓ + 1) / (2(θ_ℓ + 2))`.
pub fn c2_threshold(theta_low: f64) -> f64 {
    (((theta_low + 1.0) * (17.0 * theta_low + 9.0)).sqrt() + 3.0 * theta_low + 1.0)
        / (2.0 * (theta_low + 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeterogeneousVerdict {
    /// `θ_ℓ ≥ 1 + √2`.
    pub c1: bool,
    /// `θ_ℓ < 1 + √2` and `θ_h ≥` [`c2_threshold`].
    pub c2: bool,
    pub c2_threshold: f64,
}

impl HeterogeneousVerdict {
    pub fn rational(&self) -> bool {
        self.c1 || self.c2
    }
}

/// Sufficient conditions for a side payment to exist that makes delegation
/// rational for both agents.
pub fn different_type_rational(theta_high: f64, theta_low: f64) -> Result<HeterogeneousVerdict> {
    if !(theta_low.is_finite()
        && theta_low >= 0.0
        && theta_high.is_finite()
        && theta_high > theta_low)
    {
        return Err(Error::invalid(
            "types",
            format!("need theta_h > theta_l >= 0, got ({theta_high}, {theta_low})"),
        ));
    }
    let boundary = 1.0 + std::f64::consts::SQRT_2;
    let threshold = c2_threshold(theta_low);
    Ok(HeterogeneousVerdict {
        c1: theta_low >= boundary,
        c2: theta_low < boundary && theta_high >= threshold,
        c2_threshold: threshold,
    })
}
