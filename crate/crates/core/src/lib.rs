//! Principal–duopoly contract game with collusion detection.
//!
//! A principal pays two agents `w_i = X_i (λ − X_1 − X_2)` on noisy outputs
//! `X_i = a_i + Q(θ_i) η_i` and never sees their efforts. The crate provides
//!
//! - [`model`]: types, noise, payments and expected utilities;
//! - [`equilibrium`]: the closed-form Cournot equilibrium and optimal `λ*`,
//!   with numerical oracles in [`equilibrium::oracle`];
//! - [`collusion`]: monopoly-mimicking collusion plans and when they pay;
//! - [`detection`]: the windowed mean test, its Hoeffding false-alarm bound
//!   and Monte Carlo error rates;
//! - [`sim`]: the repeated game under the dynamic contract, which switches to
//!   `λ = 0` for good once both agents are flagged;
//! - [`config`], [`report`] and [`sweep`]: experiment configuration, the
//!   reports behind the `duopoly` binary and parameter sweeps.

pub mod collusion;
pub mod config;
pub mod detection;
pub mod equilibrium;
mod error;
pub mod model;
mod numeric;
pub mod report;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{
    Agent, AgentType, ContractParams, EffortProfile, NoiseDistribution, NoiseSpec, QualityScale,
};
pub use numeric::{bisect, golden_section_max};
