//! Numerical oracles for the closed forms in the parent module.
//!
//! None of these call the closed-form equilibrium expressions: the fixed point
//! iterates the first-order best-response map, the `λ` search maximizes the
//! principal's expected utility directly, and the floor search bisects on the
//! agents' expected utilities from the model.

use serde::Serialize;

use super::best_response;
use crate::model::{
    agent_expected_utility, principal_expected_utility, Agent, AgentType, ContractParams,
    EffortProfile, NoiseSpec,
};
use crate::numeric::{bisect, golden_section_max};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight on the new best response: `a ← (1 − d) a + d BR(a)`.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100_000,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub efforts: EffortProfile,
    pub iterations: usize,
    pub converged: bool,
}

/// Simultaneous best-response iteration from `start`. The map is affine with
/// spectral radius below one half for positive types, so it always converges.
pub fn fixed_point_efforts(
    types: &[AgentType; 2],
    contract: &ContractParams,
    start: EffortProfile,
    options: &FixedPointOptions,
) -> FixedPoint {
    let d = options.damping;
    let mut a = start.as_array();
    for iteration in 1..=options.max_iterations {
        let br = [
            best_response(&types[0], a[1], contract),
            best_response(&types[1], a[0], contract),
        ];
        let next = [(1.0 - d) * a[0] + d * br[0], (1.0 - d) * a[1] + d * br[1]];
        let step = (next[0] - a[0]).abs().max((next[1] - a[1]).abs());
        a = next;
        if step <= options.tolerance {
            return FixedPoint {
                efforts: EffortProfile::clamped(a[0], a[1]),
                iterations: iteration,
                converged: true,
            };
        }
    }
    FixedPoint {
        efforts: EffortProfile::clamped(a[0], a[1]),
        iterations: options.max_iterations,
        converged: false,
    }
}

fn equilibrium_by_iteration(types: &[AgentType; 2], contract: &ContractParams) -> EffortProfile {
    // iterate down to rounding level; efforts scale with lambda
    let options = FixedPointOptions {
        tolerance: 4.0 * f64::EPSILON * (1.0 + contract.lambda()),
        ..Default::default()
    };
    fixed_point_efforts(types, contract, EffortProfile::ZERO, &options).efforts
}

/// Principal's expected utility at the equilibrium the agents reach under `λ`.
pub fn principal_utility_at(types: &[AgentType; 2], noise: &NoiseSpec, lambda: f64) -> f64 {
    let contract = ContractParams::new(lambda.max(0.0)).expect("finite lambda");
    let efforts = equilibrium_by_iteration(types, &contract);
    principal_expected_utility(&efforts, types, noise, &contract)
}

/// Golden-section search for the principal's best `λ` on `[lo, hi]`,
/// ignoring participation constraints, polished by one parabolic step
/// through three nearby utility evaluations.
pub fn argmax_lambda(
    types: &[AgentType; 2],
    noise: &NoiseSpec,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> f64 {
    let f = |l: f64| principal_utility_at(types, noise, l);
    let x = golden_section_max(f, lo, hi, tolerance, 10_000);
    let h = 1e-3 * (hi - lo).abs().max(1e-6);
    if x - h < lo.min(hi) || x + h > lo.max(hi) {
        return x;
    }
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    let curvature = fp - 2.0 * f0 + fm;
    if curvature >= 0.0 {
        return x;
    }
    let vertex = x - h * (fp - fm) / (2.0 * curvature);
    if (vertex - x).abs() <= h {
        vertex
    } else {
        x
    }
}

/// Smallest `λ` at which the worse-off agent's equilibrium utility is
/// nonnegative, by bisection.
pub fn bisect_lambda_floor(types: &[AgentType; 2], noise: &NoiseSpec, tolerance: f64) -> f64 {
    let min_utility = |lambda: f64| {
        let contract = ContractParams::new(lambda).expect("finite lambda");
        let efforts = equilibrium_by_iteration(types, &contract);
        Agent::BOTH
            .iter()
            .map(|&i| agent_expected_utility(i, &efforts, types, noise, &contract))
            .fold(f64::INFINITY, f64::min)
    };
    if min_utility(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while min_utility(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(min_utility, 0.0, hi, tolerance, 400).expect("sign change is bracketed")
}
