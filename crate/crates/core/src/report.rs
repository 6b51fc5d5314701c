//! Command implementations behind the CLI: each returns a serializable
//! record and leaves formatting to the caller.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::collusion::{
    alpha_bounds, different_type_rational, is_rational, mimicry_utility, same_type_rational,
    same_type_threshold, theta_hat_range, AlphaBounds, CollusionPlan, HeterogeneousVerdict,
    SameTypeVerdict, ThetaHatRange,
};
use crate::config::{ExperimentConfig, OutputFormat};
use crate::equilibrium::oracle::{argmax_lambda, bisect_lambda_floor, fixed_point_efforts};
use crate::equilibrium::{ir_feasible_at_unconstrained, unconstrained_lambda, CournotSolution};
use crate::model::EffortProfile;
use crate::sim::{ContractMode, EpisodeTrace, Execution, RoundRecord};
use crate::sweep::{cmd_sweep, SweepTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub theta: [f64; 2],
    pub output_variance: [f64; 2],
    pub unconstrained_lambda: f64,
    pub ir_feasible_at_unconstrained: [bool; 2],
    pub solution: CournotSolution,
    pub oracle: OracleCheck,
}

/// Numerical re-derivation of the closed forms and the gaps to them.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub fixed_point_efforts: EffortProfile,
    pub fixed_point_iterations: usize,
    pub fixed_point_converged: bool,
    pub effort_gap: f64,
    pub argmax_lambda: f64,
    /// Gap between the unconstrained optimum and the numerical argmax.
    pub lambda_gap: f64,
    pub bisected_floor: f64,
    pub floor_gap: f64,
}

pub fn cmd_equilibrium(cfg: &ExperimentConfig) -> Result<EquilibriumReport> {
    let r = cfg.resolve()?;
    let tol = cfg.tolerances;
    let contract = r.contract();
    let fp = fixed_point_efforts(
        &r.types,
        &contract,
        EffortProfile::ZERO,
        &tol.fixed_point_options(),
    );
    let effort_gap = (fp.efforts.a1() - r.solution.efforts.a1())
        .abs()
        .max((fp.efforts.a2() - r.solution.efforts.a2()).abs());
    let candidate = unconstrained_lambda(&r.types);
    let argmax = argmax_lambda(
        &r.types,
        &r.noise,
        0.0,
        tol.lambda_window_factor * candidate,
        tol.golden_section,
    );
    let bisected = bisect_lambda_floor(&r.types, &r.noise, tol.bisection);
    Ok(EquilibriumReport {
        theta: r.types.map(|t| t.theta()),
        output_variance: r.types.map(|t| t.output_variance(&r.noise)),
        unconstrained_lambda: candidate,
        ir_feasible_at_unconstrained: ir_feasible_at_unconstrained(&r.types, &r.noise),
        solution: r.solution,
        oracle: OracleCheck {
            fixed_point_efforts: fp.efforts,
            fixed_point_iterations: fp.iterations,
            fixed_point_converged: fp.converged,
            effort_gap,
            argmax_lambda: argmax,
            lambda_gap: (argmax - candidate).abs(),
            bisected_floor: bisected,
            floor_gap: (bisected - r.solution.lambda_floor).abs(),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum CollusionReport {
    SameType {
        lambda: f64,
        theta: f64,
        threshold: f64,
        verdict: SameTypeVerdict,
        theta_hat_range: ThetaHatRange,
        target_theta: f64,
        target_in_range: bool,
        /// Per-agent utility when mimicking `target_theta`.
        target_utility: f64,
    },
    DifferentTypes {
        lambda: f64,
        theta_high: f64,
        theta_low: f64,
        verdict: HeterogeneousVerdict,
        alpha_bounds: Option<AlphaBounds>,
        /// Why the bounds are undefined, if they are.
        alpha_note: Option<String>,
        feasible_alpha: Option<(f64, f64)>,
        /// The plan at the configured or midpoint α.
        plan: Option<CollusionPlan>,
        plan_rational: Option<bool>,
    },
}

pub fn cmd_collusion_check(cfg: &ExperimentConfig) -> Result<CollusionReport> {
    let r = cfg.resolve()?;
    let contract = r.contract();
    let [t1, t2] = r.types;
    if t1.theta() == t2.theta() {
        let target = cfg.collusion.target_theta.unwrap_or(t1.theta());
        let range = theta_hat_range(&t1);
        return Ok(CollusionReport::SameType {
            lambda: contract.lambda(),
            theta: t1.theta(),
            threshold: same_type_threshold(),
            verdict: same_type_rational(&t1, &r.noise, &contract),
            theta_hat_range: range,
            target_theta: target,
            target_in_range: range.contains(target),
            target_utility: mimicry_utility(&t1, &r.noise, &contract, target)?,
        });
    }
    let (high, low) = if t1.theta() > t2.theta() {
        (t1, t2)
    } else {
        (t2, t1)
    };
    let (bounds, note) = match alpha_bounds(&high, &low, &r.noise, &contract) {
        Ok(b) => (Some(b), None),
        Err(e @ Error::DegenerateAlphaBounds { .. }) => (None, Some(e.to_string())),
        Err(e @ Error::InvalidParameter { .. }) if contract.is_punishment() => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(CollusionReport::DifferentTypes {
        lambda: contract.lambda(),
        theta_high: high.theta(),
        theta_low: low.theta(),
        verdict: different_type_rational(high.theta(), low.theta())?,
        alpha_bounds: bounds,
        alpha_note: note,
        feasible_alpha: bounds.and_then(|b| b.feasible()),
        plan: r.plan,
        plan_rational: r.plan.map(|p| is_rational(&p, &r.types, &r.noise)),
    })
}

/// Campaign-level results of `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub window: usize,
    pub epsilon: f64,
    pub mode: ContractMode,
    pub initial_lambda: f64,
    pub punished_episodes: usize,
    pub punished_fraction: f64,
    /// Window index that triggered punishment → episode count; unpunished
    /// episodes are counted under `"none"`.
    pub first_detection_window: BTreeMap<String, usize>,
    /// Fraction of episodes punished after the very first window.
    pub first_window_detection_fraction: f64,
    /// Long-run average utilities (agent 1, agent 2, principal), averaged
    /// over episodes.
    pub mean_average_utilities: [f64; 3],
    pub min_average_utilities: [f64; 3],
    pub max_average_utilities: [f64; 3],
    /// Average utilities of every episode, in trial order.
    pub episode_average_utilities: Vec<[f64; 3]>,
}

pub fn summarize_campaign(cfg: &ExperimentConfig) -> Result<SimulationSummary> {
    let r = cfg.resolve()?;
    let episode = r.episode();
    let summaries = episode.run_many(r.seed, r.trials, Execution::Parallel);
    let mut histogram = BTreeMap::new();
    for s in &summaries {
        let key = s
            .punishment_window()
            .map_or_else(|| "none".to_string(), |w| w.to_string());
        *histogram.entry(key).or_insert(0) += 1;
    }
    let averages: Vec<[f64; 3]> = summaries.iter().map(|s| s.average_utilities()).collect();
    let n = summaries.len() as f64;
    let fold = |init: f64, f: fn(f64, f64) -> f64| {
        [0, 1, 2].map(|j| averages.iter().fold(init, |acc, a| f(acc, a[j])))
    };
    let punished = summaries.iter().filter(|s| s.punished_at.is_some()).count();
    let first = summaries
        .iter()
        .filter(|s| s.punishment_window() == Some(1))
        .count();
    Ok(SimulationSummary {
        seed: r.seed,
        trials: r.trials,
        horizon: r.horizon,
        window: r.detection.window(),
        epsilon: r.detection.epsilon(),
        mode: r.mode,
        initial_lambda: episode.solution().lambda_star,
        punished_episodes: punished,
        punished_fraction: punished as f64 / n,
        first_detection_window: histogram,
        first_window_detection_fraction: first as f64 / n,
        mean_average_utilities: fold(0.0, |a, b| a + b).map(|s| s / n),
        min_average_utilities: fold(f64::INFINITY, f64::min),
        max_average_utilities: fold(f64::NEG_INFINITY, f64::max),
        episode_average_utilities: averages,
    })
}

pub const TRACE_COLUMNS: [&str; 14] = [
    "k",
    "lambda",
    "regime",
    "accepted1",
    "accepted2",
    "a1",
    "a2",
    "x1",
    "x2",
    "w1",
    "w2",
    "side_payment",
    "flag1",
    "flag2",
];

fn flag(f: Option<[crate::detection::Hypothesis; 2]>, i: usize) -> String {
    match f {
        Some(h) => format!("{:?}", h[i]),
        None => String::new(),
    }
}

fn trace_row(r: &RoundRecord) -> [String; 14] {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    [
        r.k.to_string(),
        r.lambda.to_string(),
        match r.regime {
            crate::sim::Regime::Normal => "normal".into(),
            crate::sim::Regime::Punished => "punished".into(),
        },
        r.accepted[0].to_string(),
        r.accepted[1].to_string(),
        r.efforts.a1().to_string(),
        r.efforts.a2().to_string(),
        opt(r.outputs[0]),
        opt(r.outputs[1]),
        r.payments[0].to_string(),
        r.payments[1].to_string(),
        r.side_payment.to_string(),
        flag(r.flags, 0),
        flag(r.flags, 1),
    ]
}

/// One row per round; outputs of agents that rejected and flags of rounds
/// that close no tested window are empty.
pub fn write_trace_csv<W: Write>(trace: &EpisodeTrace, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rounds {
        w.write_record(trace_row(r))?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Serialization {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Serialization {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_error(path))
}

/// Files written by [`cmd_simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutputs {
    pub trace: PathBuf,
    pub summary: PathBuf,
}

/// Writes the full trace of episode 0 (`trace.csv` or `trace.json`) and the
/// campaign summary (`summary.json`) under `out_dir`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(SimulationSummary, SimulationOutputs)> {
    let r = cfg.resolve()?;
    let summary = summarize_campaign(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let trace = r.episode().run_indexed(r.seed, 0);
    let trace_path = match format {
        OutputFormat::Csv => {
            let path = out_dir.join("trace.csv");
            write_trace_csv(&trace, create(&path)?).map_err(csv_error(&path))?;
            path
        }
        OutputFormat::Json => {
            let path = out_dir.join("trace.json");
            write_json(&path, &trace.rounds)?;
            path
        }
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok((
        summary,
        SimulationOutputs {
            trace: trace_path,
            summary: summary_path,
        },
    ))
}

/// Runs the configured sweep and writes `sweep.csv` or `sweep.json`.
pub fn cmd_sweep_to(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(SweepTable, PathBuf)> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("the configuration has no [sweep] section".into()))?;
    let table = cmd_sweep(cfg, spec)?;
    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let path = match format {
        OutputFormat::Csv => {
            let path = out_dir.join("sweep.csv");
            table.write_csv(create(&path)?).map_err(csv_error(&path))?;
            path
        }
        OutputFormat::Json => {
            let path = out_dir.join("sweep.json");
            write_json(&path, &table.to_json())?;
            path
        }
    };
    Ok((table, path))
}
