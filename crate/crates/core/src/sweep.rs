//! Grid sweeps over one or two scalar configuration parameters.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collusion::{alpha_bounds, different_type_rational, same_type_rational};
use crate::config::ExperimentConfig;
use crate::detection::{hoeffding_false_alarm_bound, monte_carlo_error_rates, Behavior};
use crate::model::{AgentType, NoiseSpec};
use crate::sim::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub outputs: Vec<String>,
}

/// One swept parameter: either an explicit `values` list or an inclusive
/// `start..=stop` range with `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl SweepAxis {
    pub fn range(param: &str, start: f64, stop: f64, step: f64) -> Self {
        Self {
            param: param.into(),
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
            values: None,
        }
    }

    pub fn values(param: &str, values: Vec<f64>) -> Self {
        Self {
            param: param.into(),
            start: None,
            stop: None,
            step: None,
            values: Some(values),
        }
    }

    /// Grid points; range points are computed as `start + i·step` so no
    /// rounding accumulates.
    pub fn points(&self) -> Result<Vec<f64>> {
        match (self.start, self.stop, self.step, &self.values) {
            (None, None, None, Some(v)) if !v.is_empty() => Ok(v.clone()),
            (Some(start), Some(stop), Some(step), None) => {
                if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
                    return Err(Error::Config(format!(
                        "axis {}: need finite start <= stop and step > 0",
                        self.param
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| start + i as f64 * step).collect())
            }
            _ => Err(Error::Config(format!(
                "axis {}: give either a nonempty values list or start, stop and step",
                self.param
            ))),
        }
    }
}

const SCALARS: &[&str] = &[
    "theta",
    "theta1",
    "theta2",
    "quality_slope",
    "quality_intercept",
    "half_width",
    "lambda",
    "window",
    "epsilon",
    "false_alarm_budget",
    "horizon",
    "trials",
    "seed",
    "alpha",
    "target_theta",
];

const NON_SCALARS: &[&str] = &[
    "types",
    "quality",
    "noise",
    "distribution",
    "detection",
    "mode",
    "contract",
    "collusion",
    "policies",
    "output",
    "format",
    "tolerances",
    "sweep",
];

pub const OUTPUTS: &[&str] = &[
    "lambda_star",
    "lambda_floor",
    "floor_binding",
    "a1",
    "a2",
    "u1",
    "u2",
    "principal_utility",
    "same_type_gain",
    "same_type_rational",
    "c1",
    "c2",
    "c1c2",
    "alpha_lo",
    "alpha_hi",
    "alpha_nonempty",
    "hoeffding_bound",
    "false_alarm_rate",
    "false_punishment_rate",
    "missed_detection_rate",
    "missed_punishment_rate",
    "avg_utility1",
    "avg_utility2",
    "avg_principal",
    "punished_fraction",
];

fn check_param(name: &str) -> Result<()> {
    if SCALARS.contains(&name) {
        Ok(())
    } else if NON_SCALARS.contains(&name) {
        Err(Error::NonScalarSweep(name.into()))
    } else {
        Err(Error::Config(format!("unknown sweep parameter {name}")))
    }
}

fn as_count(name: &str, value: f64) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e15 {
        Ok(value as usize)
    } else {
        Err(Error::invalid(
            "sweep value",
            format!("{name} = {value} is not a whole number"),
        ))
    }
}

/// Sets a scalar field of `cfg`.
pub fn apply(cfg: &mut ExperimentConfig, name: &str, value: f64) -> Result<()> {
    check_param(name)?;
    match name {
        "theta" => cfg.types.theta = [value; 2],
        "theta1" => cfg.types.theta[0] = value,
        "theta2" => cfg.types.theta[1] = value,
        "quality_slope" => cfg.types.quality.slope = value,
        "quality_intercept" => cfg.types.quality.intercept = value,
        "half_width" => cfg.noise.half_width = value,
        "lambda" => cfg.contract.lambda = Some(value),
        "window" => cfg.detection.window = as_count(name, value)?,
        "epsilon" => {
            cfg.detection.epsilon = Some(value);
            cfg.detection.false_alarm_budget = None;
        }
        "false_alarm_budget" => {
            cfg.detection.false_alarm_budget = Some(value);
            cfg.detection.epsilon = None;
        }
        "horizon" => cfg.horizon = as_count(name, value)?,
        "trials" => cfg.trials = as_count(name, value)?,
        "seed" => cfg.seed = as_count(name, value)? as u64,
        "alpha" => cfg.collusion.alpha = Some(value),
        "target_theta" => cfg.collusion.target_theta = Some(value),
        _ => unreachable!("checked above"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Flag(bool),
    /// The output is undefined at this grid point, e.g. a same-type
    /// verdict for different types.
    Missing,
}

impl Cell {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Cell::Flag(b) => Some(b),
            _ => None,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Number(x) => x.to_string(),
            Cell::Flag(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }
}

/// One row per grid point, in grid order: swept values then outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Array of `{column: value}` records.
    pub fn to_json(&self) -> serde_json::Value {
        let records = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), serde_json::to_value(v).expect("plain cell")))
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(records)
    }
}

/// Evaluates `spec.outputs` at every grid point of `spec.axes` (first axis
/// outermost). All grid points share the base seed.
pub fn cmd_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepTable> {
    if spec.axes.is_empty() || spec.axes.len() > 2 {
        return Err(Error::Config("a sweep takes one or two axes".into()));
    }
    if spec.outputs.is_empty() {
        return Err(Error::Config("a sweep needs at least one output".into()));
    }
    for axis in &spec.axes {
        check_param(&axis.param)?;
    }
    for out in &spec.outputs {
        if !OUTPUTS.contains(&out.as_str()) {
            return Err(Error::Config(format!("unknown sweep output {out}")));
        }
    }
    let grids = spec
        .axes
        .iter()
        .map(SweepAxis::points)
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = match grids.as_slice() {
        [a] => a.iter().map(|&x| vec![x]).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => unreachable!(),
    };

    let rows = points
        .par_iter()
        .map(|point| {
            let mut cfg = base.clone();
            cfg.sweep = None;
            for (axis, &value) in spec.axes.iter().zip(point) {
                apply(&mut cfg, &axis.param, value)?;
            }
            let outputs = evaluate(&cfg, &spec.outputs)?;
            Ok(point
                .iter()
                .map(|&x| Cell::Number(x))
                .chain(outputs)
                .collect())
        })
        .collect::<Result<Vec<Vec<Cell>>>>()?;

    let columns = spec
        .axes
        .iter()
        .map(|a| a.param.clone())
        .chain(spec.outputs.iter().cloned())
        .collect();
    Ok(SweepTable { columns, rows })
}

fn ordered(types: &[AgentType; 2]) -> Option<(AgentType, AgentType)> {
    let [a, b] = *types;
    if a.theta() > b.theta() {
        Some((a, b))
    } else if b.theta() > a.theta() {
        Some((b, a))
    } else {
        None
    }
}

fn evaluate(cfg: &ExperimentConfig, outputs: &[String]) -> Result<Vec<Cell>> {
    let r = cfg.resolve()?;
    let contract = r.contract();
    let noise: NoiseSpec = r.noise;
    let same = r.types[0].theta() == r.types[1].theta();
    let mut episodes = None;

    let mut row = Vec::with_capacity(outputs.len());
    for out in outputs {
        let cell = match out.as_str() {
            "lambda_star" => Cell::Number(r.solution.lambda_star),
            "lambda_floor" => Cell::Number(r.solution.lambda_floor),
            "floor_binding" => Cell::Flag(r.solution.floor_binding),
            "a1" => Cell::Number(r.solution.efforts.a1()),
            "a2" => Cell::Number(r.solution.efforts.a2()),
            "u1" => Cell::Number(r.solution.agent_utilities[0]),
            "u2" => Cell::Number(r.solution.agent_utilities[1]),
            "principal_utility" => Cell::Number(r.solution.principal_utility),
            "same_type_gain" | "same_type_rational" if same => {
                let v = same_type_rational(&r.types[0], &noise, &contract);
                if out == "same_type_gain" {
                    Cell::Number(v.gain)
                } else {
                    Cell::Flag(v.rational)
                }
            }
            "c1" | "c2" | "c1c2" => match ordered(&r.types) {
                Some((h, l)) => {
                    let v = different_type_rational(h.theta(), l.theta())?;
                    Cell::Flag(match out.as_str() {
                        "c1" => v.c1,
                        "c2" => v.c2,
                        _ => v.rational(),
                    })
                }
                None => Cell::Missing,
            },
            "alpha_lo" | "alpha_hi" | "alpha_nonempty" => match ordered(&r.types) {
                Some((h, l)) => match alpha_bounds(&h, &l, &noise, &contract) {
                    Ok(b) => match out.as_str() {
                        "alpha_lo" => Cell::Number(b.lower),
                        "alpha_hi" => Cell::Number(b.upper),
                        _ => Cell::Flag(b.is_nonempty()),
                    },
                    Err(Error::DegenerateAlphaBounds { .. }) => Cell::Missing,
                    Err(e) => return Err(e),
                },
                None => Cell::Missing,
            },
            "hoeffding_bound" => Cell::Number(hoeffding_false_alarm_bound(
                &r.types[0],
                &noise,
                &r.detection,
            )),
            "false_alarm_rate" | "false_punishment_rate" => {
                let rates = monte_carlo_error_rates(
                    &Behavior::Cournot,
                    &r.types,
                    &noise,
                    &r.solution,
                    &r.detection,
                    r.trials,
                    r.seed,
                )?;
                Cell::Number(if out == "false_alarm_rate" {
                    rates.per_agent[0]
                } else {
                    rates.joint
                })
            }
            "missed_detection_rate" | "missed_punishment_rate" => match r.plan {
                Some(plan) => {
                    let rates = monte_carlo_error_rates(
                        &Behavior::Plan(plan),
                        &r.types,
                        &noise,
                        &r.solution,
                        &r.detection,
                        r.trials,
                        r.seed,
                    )?;
                    Cell::Number(if out == "missed_detection_rate" {
                        rates.per_agent[0]
                    } else {
                        rates.joint
                    })
                }
                None => Cell::Missing,
            },
            "avg_utility1" | "avg_utility2" | "avg_principal" | "punished_fraction" => {
                let summaries = episodes.get_or_insert_with(|| {
                    r.episode().run_many(r.seed, r.trials, Execution::Parallel)
                });
                let n = summaries.len() as f64;
                let value = match out.as_str() {
                    "punished_fraction" => {
                        summaries.iter().filter(|s| s.punished_at.is_some()).count() as f64 / n
                    }
                    other => {
                        let j = match other {
                            "avg_utility1" => 0,
                            "avg_utility2" => 1,
                            _ => 2,
                        };
                        summaries
                            .iter()
                            .map(|s| s.average_utilities()[j])
                            .sum::<f64>()
                            / n
                    }
                };
                Cell::Number(value)
            }
            _ => Cell::Missing,
        };
        row.push(cell);
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_points_are_inclusive() {
        let p = SweepAxis::range("theta", 0.5, 0.8, 0.001).points().unwrap();
        assert_eq!(p.len(), 301);
        assert!((p[300] - 0.8).abs() < 1e-12);
        assert!(SweepAxis::range("theta", 1.0, 0.0, 0.1).points().is_err());
    }

    #[test]
    fn rejects_non_scalar_params() {
        let cfg = ExperimentConfig::for_types(1.0, 1.0);
        let spec = SweepSpec {
            axes: vec![SweepAxis::values("distribution", vec![1.0])],
            outputs: vec!["lambda_star".into()],
        };
        assert!(matches!(
            cmd_sweep(&cfg, &spec),
            Err(Error::NonScalarSweep(_))
        ));
        let spec = SweepSpec {
            axes: vec![SweepAxis::values("colour", vec![1.0])],
            outputs: vec!["lambda_star".into()],
        };
        assert!(matches!(cmd_sweep(&cfg, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn same_type_gain_changes_sign_at_threshold() {
        let cfg = ExperimentConfig::for_types(1.0, 1.0);
        let spec = SweepSpec {
            axes: vec![SweepAxis::range("theta", 0.5, 0.8, 0.001)],
            outputs: vec!["same_type_gain".into(), "same_type_rational".into()],
        };
        let t = cmd_sweep(&cfg, &spec).unwrap();
        assert_eq!(t.rows.len(), 301);
        let theta = t.column("theta").unwrap();
        let gain = t.column("same_type_gain").unwrap();
        let first = gain.iter().position(|g| g.as_f64().unwrap() > 0.0).unwrap();
        let crossing = theta[first].as_f64().unwrap();
        assert!((crossing - 0.6404).abs() <= 0.001, "{crossing}");
        let rational = t.column("same_type_rational").unwrap();
        assert!(rational
            .iter()
            .zip(&gain)
            .all(|(r, g)| r.as_bool().unwrap() == (g.as_f64().unwrap() > 0.0)));
    }

    #[test]
    fn two_axis_grid_is_row_major() {
        let cfg = ExperimentConfig::for_types(2.0, 1.0);
        let spec = SweepSpec {
            axes: vec![
                SweepAxis::values("theta1", vec![2.0, 3.0]),
                SweepAxis::values("theta2", vec![0.5, 1.0, 1.5]),
            ],
            outputs: vec!["c1c2".into()],
        };
        let t = cmd_sweep(&cfg, &spec).unwrap();
        assert_eq!(t.columns, ["theta1", "theta2", "c1c2"]);
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[1][1], Cell::Number(1.0));
        assert_eq!(t.rows[3][0], Cell::Number(3.0));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }
}
