//! Cournot equilibrium of the agents under the coupled payment rule and the
//! principal's optimal contract scale.
//!
//! Agent `i` best-responds with `a_i = θ_i (λ − a_{−i}) / (2θ_i + 1)`; solving
//! both conditions jointly gives
//! `a_i* = λ θ_i (θ_{−i} + 1) / D₀` with `D₀ = (2θ_1 + 1)(2θ_2 + 1) − θ_1 θ_2`.
//! The principal's utility at these efforts is concave in `λ` with maximizer
//! `D₀ / (2 (θ_1 + 1)(θ_2 + 1))`, raised to the individual-rationality floor
//! when output variance makes participation unprofitable.
//!
//! [`oracle`] holds independent numerical routes to the same quantities.

use serde::Serialize;

use crate::model::{
    agent_expected_utility, principal_expected_utility, Agent, AgentType, ContractParams,
    EffortProfile, NoiseSpec,
};

pub mod oracle;

/// Full solution of the principal's program at a given contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CournotSolution {
    pub lambda_star: f64,
    pub efforts: EffortProfile,
    pub lambda_floor: f64,
    pub floor_binding: bool,
    pub g_factor: f64,
    pub agent_utilities: [f64; 2],
    pub principal_utility: f64,
}

impl CournotSolution {
    /// Evaluates the equilibrium at a caller-chosen `λ` instead of the
    /// optimum. `floor_binding` is never set here.
    pub fn at_lambda(types: &[AgentType; 2], noise: &NoiseSpec, contract: &ContractParams) -> Self {
        Self::evaluate(types, noise, *contract, lambda_floor(types, noise), false)
    }

    pub fn contract(&self) -> ContractParams {
        ContractParams::new(self.lambda_star).expect("lambda_star is finite and nonnegative")
    }

    fn evaluate(
        types: &[AgentType; 2],
        noise: &NoiseSpec,
        contract: ContractParams,
        floor: f64,
        floor_binding: bool,
    ) -> Self {
        let efforts = cournot_efforts(types, &contract);
        let agent_utilities =
            Agent::BOTH.map(|i| agent_expected_utility(i, &efforts, types, noise, &contract));
        CournotSolution {
            lambda_star: contract.lambda(),
            efforts,
            lambda_floor: floor,
            floor_binding,
            g_factor: g_factor(types),
            agent_utilities,
            principal_utility: principal_expected_utility(&efforts, types, noise, &contract),
        }
    }
}

/// `D₀ = (2θ_1 + 1)(2θ_2 + 1) − θ_1 θ_2`.
pub fn coupling_denominator(types: &[AgentType; 2]) -> f64 {
    let (t1, t2) = (types[0].theta(), types[1].theta());
    (2.0 * t1 + 1.0) * (2.0 * t2 + 1.0) - t1 * t2
}

/// Utility-maximizing effort against a fixed opponent effort, clamped at zero.
pub fn best_response(agent: &AgentType, other_effort: f64, contract: &ContractParams) -> f64 {
    let theta = agent.theta();
    (theta * (contract.lambda() - other_effort) / (2.0 * theta + 1.0)).max(0.0)
}

/// Closed-form equilibrium efforts at the given contract.
pub fn cournot_efforts(types: &[AgentType; 2], contract: &ContractParams) -> EffortProfile {
    let d0 = coupling_denominator(types);
    let lambda = contract.lambda();
    let effort = |i: usize| lambda * types[i].theta() * (types[1 - i].theta() + 1.0) / d0;
    EffortProfile::clamped(effort(0), effort(1))
}

/// `g = (a_1* + a_2*) / λ`, independent of `λ`; lies in `(0, 1)`.
pub fn g_factor(types: &[AgentType; 2]) -> f64 {
    let (t1, t2) = (types[0].theta(), types[1].theta());
    (t1 * (t2 + 1.0) + t2 * (t1 + 1.0)) / coupling_denominator(types)
}

/// Maximizer of the principal's utility ignoring participation:
/// `D₀ / (2 (θ_1 + 1)(θ_2 + 1))`.
pub fn unconstrained_lambda(types: &[AgentType; 2]) -> f64 {
    coupling_denominator(types) / (2.0 * (types[0].theta() + 1.0) * (types[1].theta() + 1.0))
}

/// Agent `i`'s equilibrium utility written in closed form,
/// `λ² θ_i (θ_{−i} + 1)² (2θ_i + 1) / (2 D₀²) − Q(θ_i)² σ²`.
pub fn cournot_utility(
    agent: Agent,
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    contract: &ContractParams,
) -> f64 {
    let own = types[agent.index()];
    let other = types[agent.other().index()];
    let d0 = coupling_denominator(types);
    let t = own.theta();
    contract.lambda().powi(2) * t * (other.theta() + 1.0).powi(2) * (2.0 * t + 1.0)
        / (2.0 * d0 * d0)
        - own.output_variance(noise)
}

/// Smallest `λ` at which both agents' equilibrium utility is nonnegative:
/// the larger of the two per-agent zero crossings of [`cournot_utility`].
pub fn lambda_floor(types: &[AgentType; 2], noise: &NoiseSpec) -> f64 {
    let d0 = coupling_denominator(types);
    let sigma = noise.std_dev();
    Agent::BOTH
        .iter()
        .map(|&i| {
            let own = types[i.index()];
            let other = types[i.other().index()];
            let t = own.theta();
            std::f64::consts::SQRT_2 * own.quality_scale() * sigma * d0
                / ((other.theta() + 1.0) * (t * (2.0 * t + 1.0)).sqrt())
        })
        .fold(0.0, f64::max)
}

/// Whether agent `i` participates at the unconstrained optimum:
/// `Q(θ_i)² σ² ≤ θ_i (2θ_i + 1) / (8 (θ_i + 1)²)`.
pub fn ir_feasible_at_unconstrained(types: &[AgentType; 2], noise: &NoiseSpec) -> [bool; 2] {
    types.map(|agent| {
        let t = agent.theta();
        agent.output_variance(noise) <= t * (2.0 * t + 1.0) / (8.0 * (t + 1.0).powi(2))
    })
}

/// The principal's optimal contract `λ* = max(unconstrained optimum, λ̲)`
/// and the resulting equilibrium.
pub fn lambda_star(types: &[AgentType; 2], noise: &NoiseSpec) -> CournotSolution {
    let candidate = unconstrained_lambda(types);
    let floor = lambda_floor(types, noise);
    let (lambda, binding) = if floor > candidate {
        (floor, true)
    } else {
        (candidate, false)
    };
    let contract = ContractParams::new(lambda).expect("positive finite lambda");
    CournotSolution::evaluate(types, noise, contract, floor, binding)
}
