//! Experiment configuration: one TOML file describing types, noise,
//! detection, policies and (optionally) a parameter sweep.
//!
//! ```toml
//! seed = 7
//! trials = 1000
//! horizon = 10000
//! policies = ["colluding", "colluding"]
//!
//! [types]
//! theta = [1.0, 1.0]
//!
//! [noise]
//! distribution = "uniform"
//! half_width = 0.1
//!
//! [detection]
//! window = 100
//! epsilon = 0.03
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::collusion::{alpha_bounds, delegation_plan, same_type_plan, CollusionPlan};
use crate::detection::{epsilon_for_false_alarm, DetectionConfig};
use crate::equilibrium::oracle::FixedPointOptions;
use crate::equilibrium::{lambda_star, CournotSolution};
use crate::model::{AgentType, ContractParams, NoiseDistribution, NoiseSpec, QualityScale};
use crate::sim::{AgentPolicy, ContractMode, EffortSchedule, Episode};
use crate::sweep::SweepSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub policies: [PolicyConfig; 2],
    pub types: TypesSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub contract: ContractSection,
    #[serde(default)]
    pub collusion: CollusionSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_trials() -> usize {
    1000
}

fn default_horizon() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypesSection {
    pub theta: [f64; 2],
    #[serde(default)]
    pub quality: QualitySection,
}

/// `Q(θ) = slope · θ + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySection {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for QualitySection {
    fn default() -> Self {
        Self {
            slope: 1.0,
            intercept: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub distribution: NoiseDistribution,
    /// `b` in `η ∈ [−b, b]`; zero disables noise.
    pub half_width: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            distribution: NoiseDistribution::Uniform,
            half_width: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub window: usize,
    /// Test half-width; exclusive with `false_alarm_budget`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Per-agent Hoeffding false-alarm budget used to derive `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_alarm_budget: Option<f64>,
    #[serde(default)]
    pub mode: ContractMode,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            window: 100,
            epsilon: Some(0.02),
            false_alarm_budget: None,
            mode: ContractMode::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    /// Overrides the principal's optimal `λ*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollusionSection {
    /// Monopoly type mimicked by same-type colluders; defaults to their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_theta: Option<f64>,
    /// Side-payment fraction for different types; defaults to the midpoint
    /// of the feasible range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyConfig {
    #[default]
    Honest,
    Colluding,
    /// Scripted efforts, cycled.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// Numerical tolerances of the verification oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub fixed_point_max_iterations: usize,
    pub fixed_point_damping: f64,
    pub golden_section: f64,
    pub bisection: f64,
    /// The `λ` search runs over `[0, factor · candidate]`.
    pub lambda_window_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let fp = FixedPointOptions::default();
        Self {
            fixed_point: fp.tolerance,
            fixed_point_max_iterations: fp.max_iterations,
            fixed_point_damping: fp.damping,
            golden_section: 1e-10,
            bisection: 1e-12,
            lambda_window_factor: 10.0,
        }
    }
}

impl Tolerances {
    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tolerance: self.fixed_point,
            max_iterations: self.fixed_point_max_iterations,
            damping: self.fixed_point_damping,
        }
    }
}

impl ExperimentConfig {
    /// Minimal configuration for a pair of types; everything else defaulted.
    pub fn for_types(theta1: f64, theta2: f64) -> Self {
        Self {
            seed: 0,
            trials: default_trials(),
            horizon: default_horizon(),
            policies: Default::default(),
            types: TypesSection {
                theta: [theta1, theta2],
                quality: QualitySection::default(),
            },
            noise: NoiseSection::default(),
            detection: DetectionSection::default(),
            contract: ContractSection::default(),
            collusion: CollusionSection::default(),
            output: OutputSection::default(),
            tolerances: Tolerances::default(),
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn agent_types(&self) -> Result<[AgentType; 2]> {
        let q = self.types.quality;
        let quality = QualityScale::new(q.slope, q.intercept)?;
        Ok([
            AgentType::with_quality(self.types.theta[0], quality)?,
            AgentType::with_quality(self.types.theta[1], quality)?,
        ])
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise.distribution, self.noise.half_width)
    }

    /// Checks every precondition and builds the domain objects.
    pub fn resolve(&self) -> Result<Resolved> {
        let types = self.agent_types()?;
        let noise = self.noise_spec()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let t = self.tolerances;
        if !(t.fixed_point > 0.0 && t.golden_section > 0.0 && t.bisection > 0.0) {
            return Err(Error::invalid("tolerances", "must be positive"));
        }
        if !(t.fixed_point_damping > 0.0 && t.fixed_point_damping <= 1.0) {
            return Err(Error::invalid("fixed-point damping", "must lie in (0, 1]"));
        }
        if t.lambda_window_factor.is_nan() || t.lambda_window_factor <= 1.0 {
            return Err(Error::invalid("lambda window factor", "must exceed 1"));
        }
        let solution = match self.contract.lambda {
            Some(l) => CournotSolution::at_lambda(&types, &noise, &ContractParams::new(l)?),
            None => lambda_star(&types, &noise),
        };
        let contract = solution.contract();
        let detection = self.detection_config(&types, &noise)?;
        if self.horizon < detection.window() {
            return Err(Error::HorizonTooShort {
                horizon: self.horizon,
                window: detection.window(),
            });
        }
        let plan = self.collusion_plan(&types, &noise, &contract)?;
        let policies = [0, 1].map(|i| match &self.policies[i] {
            PolicyConfig::Honest => Ok(AgentPolicy::Honest),
            PolicyConfig::Colluding => plan.map(AgentPolicy::Colluding).ok_or_else(|| {
                Error::Config(
                    "no rational side payment exists for these types; set collusion.alpha".into(),
                )
            }),
            PolicyConfig::Custom(efforts) => {
                EffortSchedule::new(efforts.clone()).map(AgentPolicy::Custom)
            }
        });
        let [p1, p2] = policies;
        Ok(Resolved {
            types,
            noise,
            solution,
            detection,
            plan,
            policies: [p1?, p2?],
            mode: self.detection.mode,
            horizon: self.horizon,
            trials: self.trials,
            seed: self.seed,
            explicit_lambda: self.contract.lambda.is_some(),
        })
    }

    fn detection_config(
        &self,
        types: &[AgentType; 2],
        noise: &NoiseSpec,
    ) -> Result<DetectionConfig> {
        let d = &self.detection;
        let epsilon = match (d.epsilon, d.false_alarm_budget) {
            (Some(e), None) => e,
            (None, Some(budget)) => {
                // the wider of the two agents' half-widths keeps both within budget
                let per_agent = [
                    epsilon_for_false_alarm(&types[0], noise, d.window, budget)?,
                    epsilon_for_false_alarm(&types[1], noise, d.window, budget)?,
                ];
                per_agent[0].max(per_agent[1])
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "detection.epsilon and detection.false_alarm_budget are exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "set detection.epsilon or detection.false_alarm_budget".into(),
                ))
            }
        };
        DetectionConfig::new(d.window, epsilon)
    }

    /// The plan colluding agents follow, `None` if different types admit no
    /// rational side payment and none was configured.
    fn collusion_plan(
        &self,
        types: &[AgentType; 2],
        noise: &NoiseSpec,
        contract: &ContractParams,
    ) -> Result<Option<CollusionPlan>> {
        if types[0].theta() == types[1].theta() {
            let target = self.collusion.target_theta.unwrap_or(types[0].theta());
            return same_type_plan(&types[0], contract, target).map(Some);
        }
        if let Some(alpha) = self.collusion.alpha {
            return delegation_plan(types, noise, contract, alpha).map(Some);
        }
        if contract.is_punishment() {
            return Ok(None);
        }
        let (high, low) = if types[0].theta() > types[1].theta() {
            (&types[0], &types[1])
        } else {
            (&types[1], &types[0])
        };
        match alpha_bounds(high, low, noise, contract) {
            Ok(bounds) => match bounds.midpoint() {
                Some(alpha) => delegation_plan(types, noise, contract, alpha).map(Some),
                None => Ok(None),
            },
            Err(Error::DegenerateAlphaBounds { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// A validated configuration turned into domain objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub types: [AgentType; 2],
    pub noise: NoiseSpec,
    /// Equilibrium at the configured `λ` (or `λ*`).
    pub solution: CournotSolution,
    pub detection: DetectionConfig,
    pub plan: Option<CollusionPlan>,
    pub policies: [AgentPolicy; 2],
    pub mode: ContractMode,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub explicit_lambda: bool,
}

impl Resolved {
    pub fn contract(&self) -> ContractParams {
        self.solution.contract()
    }

    pub fn episode(&self) -> Episode {
        let mut episode = Episode::new(
            self.types,
            self.noise,
            self.policies.clone(),
            self.detection,
            self.horizon,
        )
        .expect("horizon checked during resolution")
        .with_mode(self.mode);
        if self.explicit_lambda {
            episode = episode.with_initial_contract(self.contract());
        }
        episode
    }
}
