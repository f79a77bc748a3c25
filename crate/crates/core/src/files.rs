//! JSON and CSV file formats for models, ARX coefficients, MPC configs,
//! scenarios and simulation output. Every number written goes through
//! [`round_sig9`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::round_sig9;
use crate::model::{discretize_exact, ArxModel, ContinuousStateSpace, DiscreteStateSpace};
use crate::mpc::{MpcConfig, QpStatus, ReferenceSignal, UNBOUNDED};
use crate::sim::{
    ComparisonReport, ControllerKind, ControllerParams, NoiseSpec, Scenario, SimResult,
    NOISE_GENERATOR,
};
use crate::transforms::{DEFAULT_MAX_ORDER, DEFAULT_TRUNC_TOL};
use crate::{Error, Result};

type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter()
        .map(|r| r.iter().map(|&v| round_sig9(v)).collect())
        .collect()
}

fn from_rows(rows: &Rows, what: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::InvalidModel(format!(
            "{what} must be a non-empty rectangular array"
        )));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn round_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|&x| round_sig9(x)).collect()
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    pub dt: f64,
    #[serde(default)]
    pub continuous: bool,
}

/// A model as read from disk, before any discretization.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedModel {
    Continuous(ContinuousStateSpace, f64),
    Discrete(DiscreteStateSpace),
}

impl ModelFile {
    pub fn from_discrete(dss: &DiscreteStateSpace) -> Self {
        Self {
            a: to_rows(dss.a()),
            b: to_rows(dss.b()),
            c: to_rows(dss.c()),
            dt: round_sig9(dss.dt()),
            continuous: false,
        }
    }

    pub fn from_continuous(css: &ContinuousStateSpace, dt: f64) -> Self {
        Self {
            a: to_rows(css.a()),
            b: to_rows(css.b()),
            c: to_rows(css.c()),
            dt: round_sig9(dt),
            continuous: true,
        }
    }

    pub fn parse(&self) -> Result<LoadedModel> {
        let a = from_rows(&self.a, "A")?;
        let b = from_rows(&self.b, "B")?;
        let c = from_rows(&self.c, "C")?;
        if self.continuous {
            Ok(LoadedModel::Continuous(ContinuousStateSpace::new(a, b, c)?, self.dt))
        } else {
            Ok(LoadedModel::Discrete(DiscreteStateSpace::new(a, b, c, self.dt)?))
        }
    }

    /// Discrete model, discretizing continuous files with their own `dt`.
    pub fn to_discrete(&self) -> Result<DiscreteStateSpace> {
        match self.parse()? {
            LoadedModel::Continuous(css, dt) => discretize_exact(&css, dt),
            LoadedModel::Discrete(dss) => Ok(dss),
        }
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    read_json(path)
}

pub fn load_discrete_model(path: &Path) -> Result<DiscreteStateSpace> {
    read_model(path)?.to_discrete()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArxFile {
    pub p: usize,
    #[serde(rename = "A_bar")]
    pub a_bar: Vec<Rows>,
    #[serde(rename = "B_bar")]
    pub b_bar: Vec<Rows>,
}

impl ArxFile {
    pub fn from_model(arx: &ArxModel) -> Self {
        Self {
            p: arx.order(),
            a_bar: arx.a_bar().iter().map(to_rows).collect(),
            b_bar: arx.b_bar().iter().map(to_rows).collect(),
        }
    }

    pub fn to_model(&self) -> Result<ArxModel> {
        if self.a_bar.len() != self.p || self.b_bar.len() != self.p {
            return Err(Error::InvalidModel(format!(
                "p = {} but the file has {} output and {} input lags",
                self.p,
                self.a_bar.len(),
                self.b_bar.len()
            )));
        }
        let a = self
            .a_bar
            .iter()
            .map(|m| from_rows(m, "A_bar"))
            .collect::<Result<Vec<_>>>()?;
        let b = self
            .b_bar
            .iter()
            .map(|m| from_rows(m, "B_bar"))
            .collect::<Result<Vec<_>>>()?;
        ArxModel::new(a, b)
    }
}

pub fn load_arx(path: &Path) -> Result<ArxModel> {
    read_json::<ArxFile>(path)?.to_model()
}

/// MPC config file. Missing bounds are unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcConfigFile {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "Wy")]
    pub w_y: Vec<f64>,
    #[serde(rename = "Wdu")]
    pub w_du: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ymin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ymax: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub umin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub umax: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dumin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dumax: Option<Vec<f64>>,
}

impl MpcConfigFile {
    pub fn to_config(&self) -> Result<MpcConfig> {
        let bound = |v: &Option<Vec<f64>>, len: usize, default: f64| {
            v.as_ref().map_or(DVector::from_element(len, default), |v| {
                DVector::from_column_slice(v)
            })
        };
        let (m, q) = (self.w_y.len(), self.w_du.len());
        MpcConfig::new(
            self.horizon,
            DVector::from_column_slice(&self.w_y),
            DVector::from_column_slice(&self.w_du),
            (bound(&self.ymin, m, -UNBOUNDED), bound(&self.ymax, m, UNBOUNDED)),
            (bound(&self.umin, q, -UNBOUNDED), bound(&self.umax, q, UNBOUNDED)),
            (bound(&self.dumin, q, -UNBOUNDED), bound(&self.dumax, q, UNBOUNDED)),
        )
    }

    pub fn from_config(cfg: &MpcConfig) -> Self {
        let bound = |v: &DVector<f64>| (v.amax() < UNBOUNDED).then(|| round_vec(v));
        Self {
            horizon: cfg.horizon,
            w_y: round_vec(&cfg.w_y),
            w_du: round_vec(&cfg.w_du),
            ymin: bound(&cfg.y_min),
            ymax: bound(&cfg.y_max),
            umin: bound(&cfg.u_min),
            umax: bound(&cfg.u_max),
            dumin: bound(&cfg.du_min),
            dumax: bound(&cfg.du_max),
        }
    }
}

pub fn load_mpc_config(path: &Path) -> Result<MpcConfig> {
    read_json::<MpcConfigFile>(path)?.to_config()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub level: f64,
    pub fall_at: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Step on the second output, zero elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_step: Option<StepSpec>,
    /// Explicit samples `r_0, r_1, ...`; must cover `steps + T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

impl ReferenceSpec {
    pub fn build(&self, n_outputs: usize, len: usize) -> Result<ReferenceSignal> {
        match (&self.r2_step, &self.samples) {
            (Some(step), None) => {
                if n_outputs < 2 {
                    return Err(Error::InvalidArgument(
                        "r2_step needs a model with at least two outputs".into(),
                    ));
                }
                let r = (0..len)
                    .map(|t| {
                        let mut v = DVector::zeros(n_outputs);
                        if t < step.fall_at {
                            v[1] = step.level;
                        }
                        v
                    })
                    .collect();
                ReferenceSignal::new(r)
            }
            (None, Some(samples)) => {
                ReferenceSignal::new(samples.iter().map(|s| DVector::from_column_slice(s)).collect())
            }
            _ => Err(Error::InvalidArgument(
                "reference needs exactly one of r2_step or samples".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KfNoiseSpec {
    pub q: f64,
    pub r: f64,
}

/// Scenario file. Paths are relative to the scenario file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: PathBuf,
    pub config: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arx: Option<PathBuf>,
    pub controller: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub poles: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Kalman design magnitudes, if different from the simulated noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kf: Option<KfNoiseSpec>,
    pub noise: NoiseSpec,
    pub steps: usize,
    pub reference: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ScenarioFile {
    pub fn to_scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let plant = load_discrete_model(&base_dir.join(&self.model))?;
        let cfg = load_mpc_config(&base_dir.join(&self.config))?;
        let controller = ControllerKind::parse(&self.controller)?;
        let arx = self
            .arx
            .as_ref()
            .map(|p| load_arx(&base_dir.join(p)))
            .transpose()?;
        if controller == ControllerKind::ArxOt && arx.is_none() && self.poles.is_empty() {
            return Err(Error::InvalidArgument(
                "arx-ot scenario needs observer poles".into(),
            ));
        }
        let params = ControllerParams {
            poles: self.poles.clone(),
            trunc_tol: self.trunc_tol.unwrap_or(DEFAULT_TRUNC_TOL),
            max_order: self.max_order.unwrap_or(DEFAULT_MAX_ORDER),
            fixed_order: self.order,
            kf_noise: self.kf.as_ref().map(|k| (k.q, k.r)),
            arx,
        };
        let reference = self
            .reference
            .build(plant.n_outputs(), self.steps + cfg.horizon)?;
        let x0 = match &self.x0 {
            Some(x) => DVector::from_column_slice(x),
            None => DVector::zeros(plant.n_states()),
        };
        let scenario = Scenario {
            name: self.name.clone().unwrap_or_else(|| controller.as_str().to_string()),
            plant,
            controller,
            params,
            cfg,
            reference,
            steps: self.steps,
            noise: self.noise,
            x0,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let file: ScenarioFile = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.to_scenario(base)
}

fn fmt_num(x: f64) -> String {
    let v = round_sig9(x);
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Trajectory CSV: `step, y.., r.. (non-zero references only), u.., du..,
/// per_step_cost`.
pub fn trajectory_csv(res: &SimResult) -> String {
    let m = res.y_traj.first().map_or(0, |v| v.len());
    let q = res.u_traj.first().map_or(0, |v| v.len());
    let r_cols: Vec<usize> = (0..m)
        .filter(|&i| res.r_traj.iter().any(|r| r[i] != 0.0))
        .collect();
    let mut header = vec!["step".to_string()];
    header.extend((1..=m).map(|i| format!("y{i}")));
    header.extend(r_cols.iter().map(|i| format!("r{}", i + 1)));
    header.extend((1..=q).map(|i| format!("u{i}")));
    header.extend((1..=q).map(|i| format!("du{i}")));
    header.push("per_step_cost".into());
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..res.len() {
        let mut row = vec![t.to_string()];
        row.extend(res.y_traj[t].iter().map(|&v| fmt_num(v)));
        row.extend(r_cols.iter().map(|&i| fmt_num(res.r_traj[t][i])));
        row.extend(res.u_traj[t].iter().map(|&v| fmt_num(v)));
        row.extend(res.du_traj[t].iter().map(|&v| fmt_num(v)));
        row.push(fmt_num(res.per_step_cost[t]));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solved: usize,
    pub max_iterations: usize,
    pub infeasible: usize,
    pub mean_iterations: f64,
    pub peak_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub q: f64,
    pub r: f64,
    pub seed: u64,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub name: String,
    pub controller: String,
    pub arx_order: Option<usize>,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub avg_tracking_cost: f64,
    pub diverged: bool,
    pub max_abs_input: f64,
    pub noise: NoiseSummary,
    pub solver: SolverStats,
}

impl SimSummary {
    pub fn new(scenario: &Scenario, res: &SimResult) -> Self {
        let iters = &res.solver_iterations;
        Self {
            name: scenario.name.clone(),
            controller: res.controller.as_str().to_string(),
            arx_order: res.arx_order,
            steps_requested: scenario.steps,
            steps_completed: res.len(),
            avg_tracking_cost: round_sig9(res.avg_tracking_cost),
            diverged: res.diverged,
            max_abs_input: round_sig9(res.u_traj.iter().map(|u| u.amax()).fold(0.0, f64::max)),
            noise: NoiseSummary {
                q: round_sig9(scenario.noise.q),
                r: round_sig9(scenario.noise.r),
                seed: scenario.noise.seed,
                generator: NOISE_GENERATOR.to_string(),
            },
            solver: SolverStats {
                solved: res.count_status(QpStatus::Solved),
                max_iterations: res.count_status(QpStatus::MaxIterations),
                infeasible: res.count_status(QpStatus::Infeasible),
                mean_iterations: if iters.is_empty() {
                    0.0
                } else {
                    round_sig9(iters.iter().sum::<usize>() as f64 / iters.len() as f64)
                },
                peak_iterations: iters.iter().copied().max().unwrap_or(0),
            },
        }
    }
}

/// Comparison report with every float rounded.
pub fn comparison_json(report: &ComparisonReport) -> Result<String> {
    let mut value = serde_json::to_value(report)?;
    round_json(&mut value);
    to_json_pretty(&value)
}

fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig9(x))) {
                *n = x;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}
