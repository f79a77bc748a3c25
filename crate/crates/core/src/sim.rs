//! Seeded closed-loop experiments: a noisy state-space plant driven by one
//! of the MPC controller variants.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mpc::{
    kalman_filter_step, mpc_step_arx, mpc_step_ss, shift_plan, weighted_sq, EstimatorState,
    MpcConfig, QpStatus, ReferenceSignal,
};
use crate::model::{ArxModel, DiscreteStateSpace, IoHistory};
use crate::transforms::{
    place_observer_poles, ss_to_arx_ch, ss_to_arx_ot, ss_to_arx_with_gain, KalmanDesign,
    ObserverGain, DEFAULT_MAX_ORDER, DEFAULT_TRUNC_TOL,
};
use crate::{Error, Result};

/// Identity of the noise generator. Changing the sampling scheme must bump it.
pub const NOISE_GENERATOR: &str = "chacha8-boxmuller-v1";

/// A run stops as soon as the measured output exceeds this norm.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Standard deviations of the process noise `w_t` and measurement noise
/// `v_t` (entrywise), plus the generator seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub q: f64,
    pub r: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(q: f64, r: f64, seed: u64) -> Result<Self> {
        let spec = Self { q, r, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise_free() -> Self {
        Self {
            q: 0.0,
            r: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0 && self.q.is_finite() && self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise magnitudes must be finite and >= 0, got q={} r={}",
                self.q, self.r
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    #[serde(rename = "ss-kf")]
    SsKf,
    #[serde(rename = "arx-ch")]
    ArxCh,
    #[serde(rename = "arx-ot")]
    ArxOt,
    #[serde(rename = "arx-kf")]
    ArxKf,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [Self::SsKf, Self::ArxCh, Self::ArxOt, Self::ArxKf];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SsKf => "ss-kf",
            Self::ArxCh => "arx-ch",
            Self::ArxOt => "arx-ot",
            Self::ArxKf => "arx-kf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s) || k.as_str().replace('-', "_").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown controller kind '{s}'")))
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Design knobs for the controller variants. Fields a variant does not use
/// are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerParams {
    /// Observer poles for `ArxOt`.
    pub poles: Vec<f64>,
    pub trunc_tol: f64,
    pub max_order: usize,
    /// Skips order selection for `ArxOt` / `ArxKf`.
    pub fixed_order: Option<usize>,
    /// Kalman design noise std-devs; defaults to the scenario noise.
    /// When both scenario magnitudes are zero the design falls back to
    /// `q = r = 1` (the gain depends only on their ratio).
    pub kf_noise: Option<(f64, f64)>,
    /// Use this ARX model instead of deriving one from the plant.
    pub arx: Option<ArxModel>,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            poles: Vec::new(),
            trunc_tol: DEFAULT_TRUNC_TOL,
            max_order: DEFAULT_MAX_ORDER,
            fixed_order: None,
            kf_noise: None,
            arx: None,
        }
    }
}

impl ControllerParams {
    pub fn with_poles(poles: &[f64]) -> Self {
        Self {
            poles: poles.to_vec(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: DiscreteStateSpace,
    pub controller: ControllerKind,
    pub params: ControllerParams,
    pub cfg: MpcConfig,
    pub reference: ReferenceSignal,
    pub steps: usize,
    pub noise: NoiseSpec,
    pub x0: DVector<f64>,
}

impl Scenario {
    /// Scenario starting from rest with default controller parameters.
    pub fn new(
        plant: DiscreteStateSpace,
        controller: ControllerKind,
        cfg: MpcConfig,
        reference: ReferenceSignal,
        steps: usize,
        noise: NoiseSpec,
    ) -> Self {
        let x0 = DVector::zeros(plant.n_states());
        Self {
            name: controller.as_str().to_string(),
            plant,
            controller,
            params: ControllerParams::default(),
            cfg,
            reference,
            steps,
            noise,
            x0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.noise.validate()?;
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if self.reference.len() < self.steps + self.cfg.horizon {
            return Err(Error::InvalidArgument(format!(
                "reference has {} samples, needs steps + horizon = {}",
                self.reference.len(),
                self.steps + self.cfg.horizon
            )));
        }
        let p = &self.plant;
        if self.cfg.n_outputs() != p.n_outputs() || self.cfg.n_inputs() != p.n_inputs() {
            return Err(Error::InvalidArgument(
                "MPC config dimensions disagree with the plant".into(),
            ));
        }
        if self.reference.at(0).len() != p.n_outputs() {
            return Err(Error::InvalidArgument(
                "reference dimension disagrees with the plant outputs".into(),
            ));
        }
        if self.x0.len() != p.n_states() {
            return Err(Error::InvalidArgument(
                "initial state dimension disagrees with the plant".into(),
            ));
        }
        Ok(())
    }
}

/// Trajectories of one run, indexed by control step `t = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub controller: ControllerKind,
    /// ARX order used by the controller (`None` for `SsKf`).
    pub arx_order: Option<usize>,
    /// Measured outputs `y_t = C x_t + v_t`.
    pub y_traj: Vec<DVector<f64>>,
    pub r_traj: Vec<DVector<f64>>,
    pub u_traj: Vec<DVector<f64>>,
    pub du_traj: Vec<DVector<f64>>,
    /// Plant state `x_t` (truth).
    pub x_traj: Vec<DVector<f64>>,
    pub per_step_cost: Vec<f64>,
    pub avg_tracking_cost: f64,
    pub solver_statuses: Vec<QpStatus>,
    pub solver_iterations: Vec<usize>,
    /// Set when the run stopped early on the divergence guard; the
    /// trajectories then hold fewer than `steps` samples.
    pub diverged: bool,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.y_traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_traj.is_empty()
    }

    pub fn count_status(&self, status: QpStatus) -> usize {
        self.solver_statuses.iter().filter(|s| **s == status).count()
    }
}

/// `(1/N) Σ_t ‖y_t - r_t‖²_{W_y} + ‖Δu_t‖²_{W_Δu}` over the stored samples.
pub fn average_tracking_cost(result: &SimResult, cfg: &MpcConfig) -> f64 {
    if result.is_empty() {
        return 0.0;
    }
    let total: f64 = result
        .y_traj
        .iter()
        .zip(&result.r_traj)
        .zip(&result.du_traj)
        .map(|((y, r), du)| cfg.stage_cost(&(y - r), du))
        .sum();
    total / result.len() as f64
}

/// Gaussian sampler: ChaCha8 with the 53 high bits of each word mapped to
/// `[0, 1)`, Box–Muller pairs, second value cached.
struct Normal {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Normal {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    fn vector(&mut self, len: usize, std_dev: f64) -> DVector<f64> {
        DVector::from_fn(len, |_, _| std_dev * self.sample())
    }
}

const STREAM_PROCESS: u64 = 0;
const STREAM_MEASUREMENT: u64 = 1;
const STREAM_BOOT_PROCESS: u64 = 2;
const STREAM_BOOT_MEASUREMENT: u64 = 3;

/// Noisy plant. Process and measurement noise come from separate streams,
/// and the ARX bootstrap draws from its own pair, so every controller sees
/// the same control-phase noise for a given seed.
struct Plant<'a> {
    model: &'a DiscreteStateSpace,
    x: DVector<f64>,
    q: f64,
    r: f64,
    w: Normal,
    v: Normal,
}

impl<'a> Plant<'a> {
    fn new(model: &'a DiscreteStateSpace, x0: DVector<f64>, noise: &NoiseSpec, boot: bool) -> Self {
        let (sw, sv) = if boot {
            (STREAM_BOOT_PROCESS, STREAM_BOOT_MEASUREMENT)
        } else {
            (STREAM_PROCESS, STREAM_MEASUREMENT)
        };
        Self {
            model,
            x: x0,
            q: noise.q,
            r: noise.r,
            w: Normal::new(noise.seed, sw),
            v: Normal::new(noise.seed, sv),
        }
    }

    fn measure(&mut self) -> DVector<f64> {
        self.model.c() * &self.x + self.v.vector(self.model.n_outputs(), self.r)
    }

    fn advance(&mut self, u: &DVector<f64>) {
        let w = self.w.vector(self.model.n_states(), self.q);
        self.x = self.model.a() * &self.x + self.model.b() * u + w;
    }
}

/// A controller ready to run: either SS-MPC with a steady-state Kalman
/// predictor, or ARX-MPC with a fixed ARX model.
#[derive(Clone, Debug)]
pub enum Controller {
    Ss { k: DMatrix<f64> },
    Arx { model: ArxModel },
}

impl Controller {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        let plant = &scenario.plant;
        let params = &scenario.params;
        if let (Some(arx), true) = (&params.arx, scenario.controller != ControllerKind::SsKf) {
            if arx.n_outputs() != plant.n_outputs() || arx.n_inputs() != plant.n_inputs() {
                return Err(Error::InvalidArgument(
                    "supplied ARX model does not match the plant dimensions".into(),
                ));
            }
            return Ok(Self::Arx { model: arx.clone() });
        }
        let kalman = || -> Result<KalmanDesign> {
            let (q, r) = params.kf_noise.unwrap_or(match (scenario.noise.q, scenario.noise.r) {
                (q, r) if q == 0.0 && r == 0.0 => (1.0, 1.0),
                qr => qr,
            });
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(
                    "Kalman design needs a positive measurement-noise magnitude".into(),
                ));
            }
            KalmanDesign::from_std_devs(plant, q, r)
        };
        let with_gain = |gain: ObserverGain| -> Result<ArxModel> {
            match params.fixed_order {
                Some(order) => ss_to_arx_with_gain(plant, &gain, order),
                None => ss_to_arx_ot(plant, &gain, params.trunc_tol, params.max_order),
            }
        };
        Ok(match scenario.controller {
            ControllerKind::SsKf => Self::Ss { k: kalman()?.k },
            ControllerKind::ArxCh => Self::Arx {
                model: ss_to_arx_ch(plant)?,
            },
            ControllerKind::ArxOt => Self::Arx {
                model: with_gain(place_observer_poles(plant, &params.poles)?)?,
            },
            ControllerKind::ArxKf => Self::Arx {
                model: with_gain(kalman()?.gain(plant)?)?,
            },
        })
    }

    pub fn arx_order(&self) -> Option<usize> {
        match self {
            Self::Ss { .. } => None,
            Self::Arx { model } => Some(model.order()),
        }
    }
}

/// Runs one seeded closed-loop experiment.
///
/// Per control step `t`: measure `y_t`, compute `u_t` by MPC over
/// `r_{t+1..t+T}`, advance the plant. `SsKf` solves from the predicted
/// estimate `x̂_t` (matched to `x_0` at start) and then applies the Kalman
/// update with `(u_t, y_t)`. ARX controllers are first given a history by
/// running the plant open-loop at `u = 0` for `p` samples. A QP that is not
/// solved keeps the previous input.
pub fn run_closed_loop(scenario: &Scenario) -> Result<SimResult> {
    scenario.validate()?;
    let controller = Controller::build(scenario)?;
    run_with(scenario, &controller, scenario.noise.seed)
}

pub fn run_with(scenario: &Scenario, controller: &Controller, seed: u64) -> Result<SimResult> {
    let model = &scenario.plant;
    let cfg = &scenario.cfg;
    let (m, q) = (model.n_outputs(), model.n_inputs());
    let noise = NoiseSpec { seed, ..scenario.noise };

    let mut x0 = scenario.x0.clone();
    let mut history = match controller {
        Controller::Arx { model: arx } => {
            let p = arx.order();
            let mut hist = IoHistory::zeros(p, m, q);
            let mut boot = Plant::new(model, x0, &noise, true);
            let zero = DVector::zeros(q);
            for _ in 0..p {
                hist.push_output(boot.measure());
                hist.push_input(zero.clone());
                boot.advance(&zero);
            }
            x0 = boot.x;
            Some(hist)
        }
        Controller::Ss { .. } => None,
    };
    let mut estimate = EstimatorState { x_hat: x0.clone() };
    let mut plant = Plant::new(model, x0, &noise, false);

    let n = scenario.steps;
    let mut res = SimResult {
        controller: scenario.controller,
        arx_order: controller.arx_order(),
        y_traj: Vec::with_capacity(n),
        r_traj: Vec::with_capacity(n),
        u_traj: Vec::with_capacity(n),
        du_traj: Vec::with_capacity(n),
        x_traj: Vec::with_capacity(n),
        per_step_cost: Vec::with_capacity(n),
        avg_tracking_cost: 0.0,
        solver_statuses: Vec::with_capacity(n),
        solver_iterations: Vec::with_capacity(n),
        diverged: false,
    };
    let mut u_prev = DVector::zeros(q);
    let mut warm: Option<DVector<f64>> = None;

    for t in 0..n {
        let y = plant.measure();
        if !(y.norm() <= DIVERGENCE_LIMIT) {
            res.diverged = true;
            break;
        }
        let refs = scenario.reference.window(t, cfg.horizon)?;
        let step = match (controller, history.as_mut()) {
            (Controller::Arx { model: arx }, Some(hist)) => {
                hist.push_output(y.clone());
                mpc_step_arx(arx, hist, &u_prev, refs, cfg, warm.as_ref())?
            }
            _ => mpc_step_ss(model, &estimate.x_hat, &u_prev, refs, cfg, warm.as_ref())?,
        };
        let status = step.diagnostics.status;
        let (u, du) = if status == QpStatus::Solved {
            warm = Some(shift_plan(&step.plan, q));
            (step.u, step.du)
        } else {
            warm = None;
            (u_prev.clone(), DVector::zeros(q))
        };

        if let Controller::Ss { k } = controller {
            estimate = kalman_filter_step(model, k, &estimate, &u, &y)?;
        }
        if let Some(hist) = history.as_mut() {
            hist.push_input(u.clone());
        }

        let r = scenario.reference.at(t).clone();
        res.per_step_cost
            .push(weighted_sq(&(&y - &r), &cfg.w_y) + weighted_sq(&du, &cfg.w_du));
        res.x_traj.push(plant.x.clone());
        res.y_traj.push(y);
        res.r_traj.push(r);
        res.solver_statuses.push(status);
        res.solver_iterations.push(step.diagnostics.iterations);
        plant.advance(&u);
        res.u_traj.push(u.clone());
        res.du_traj.push(du);
        u_prev = u;
    }
    if !res.per_step_cost.is_empty() {
        res.avg_tracking_cost =
            res.per_step_cost.iter().sum::<f64>() / res.per_step_cost.len() as f64;
    }
    Ok(res)
}

/// Outcome of one (scenario, seed) run inside a comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellOutcome {
    pub seed: u64,
    pub avg_tracking_cost: Option<f64>,
    pub diverged: bool,
    pub error: Option<String>,
    pub unsolved_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControllerSummary {
    pub name: String,
    pub controller: String,
    pub arx_order: Option<usize>,
    /// Mean and sample std-dev over the runs that completed.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
    pub failed: usize,
    pub cells: Vec<CellOutcome>,
}

impl ControllerSummary {
    pub fn std_error(&self) -> Option<f64> {
        match (self.std, self.completed) {
            (Some(s), n) if n > 0 => Some(s / (n as f64).sqrt()),
            _ => None,
        }
    }
}

/// `mean(a) - mean(b)` with the combined standard error of the two means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseOrdering {
    pub a: usize,
    pub b: usize,
    pub mean_diff: Option<f64>,
    pub std_error: Option<f64>,
    /// "a", "b", "tie" (within two standard errors) or "undetermined".
    pub better: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub controllers: Vec<ControllerSummary>,
    pub pairwise: Vec<PairwiseOrdering>,
}

impl ComparisonReport {
    /// Fixed-width text table of the per-controller results.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>6} {:>16} {:>14} {:>9}\n",
            "controller", "order", "mean cost", "std", "diverged"
        );
        for c in &self.controllers {
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.6e}"),
                None => "diverged".to_string(),
            };
            out += &format!(
                "{:<16} {:>6} {:>16} {:>14} {:>9}\n",
                c.name,
                c.arx_order.map_or("-".to_string(), |p| p.to_string()),
                fmt(c.mean),
                c.std.map_or("-".to_string(), |s| format!("{s:.3e}")),
                format!("{}/{}", c.diverged, c.cells.len()),
            );
        }
        for p in &self.pairwise {
            let label = match p.better.as_str() {
                "a" => format!("{} < {}", self.controllers[p.a].name, self.controllers[p.b].name),
                "b" => format!("{} < {}", self.controllers[p.b].name, self.controllers[p.a].name),
                "tie" => format!("{} ~ {}", self.controllers[p.a].name, self.controllers[p.b].name),
                _ => format!("{} ? {}", self.controllers[p.a].name, self.controllers[p.b].name),
            };
            out += &format!("{label}\n");
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

fn run_cells(jobs: &[(usize, u64)], scenarios: &[Scenario], ctrls: &[Controller]) -> Vec<CellOutcome> {
    let run = |&(i, seed): &(usize, u64)| match run_with(&scenarios[i], &ctrls[i], seed) {
        Ok(res) => CellOutcome {
            seed,
            avg_tracking_cost: (!res.diverged).then_some(res.avg_tracking_cost),
            diverged: res.diverged,
            error: None,
            unsolved_steps: res.len() - res.count_status(QpStatus::Solved),
        },
        Err(e) => CellOutcome {
            seed,
            avg_tracking_cost: None,
            diverged: false,
            error: Some(e.to_string()),
            unsolved_steps: 0,
        },
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(run).collect()
    }
}

/// Runs every (scenario, seed) pair, overriding each scenario's seed.
/// Controller construction errors are fatal; per-run errors and divergence
/// are recorded in the cell.
pub fn compare_controllers(scenarios: &[Scenario], seeds: &[u64]) -> Result<ComparisonReport> {
    if scenarios.len() < 2 {
        return Err(Error::InvalidArgument(
            "comparison needs at least two scenarios".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("comparison needs at least one seed".into()));
    }
    let ctrls = scenarios
        .iter()
        .map(|s| {
            s.validate()?;
            Controller::build(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..scenarios.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut cells = run_cells(&jobs, scenarios, &ctrls).into_iter();

    let controllers: Vec<ControllerSummary> = scenarios
        .iter()
        .zip(&ctrls)
        .map(|(s, c)| {
            let cells: Vec<CellOutcome> = cells.by_ref().take(seeds.len()).collect();
            let costs: Vec<f64> = cells.iter().filter_map(|c| c.avg_tracking_cost).collect();
            let (mean, std) = mean_std(&costs);
            ControllerSummary {
                name: s.name.clone(),
                controller: s.controller.as_str().to_string(),
                arx_order: c.arx_order(),
                mean,
                std,
                completed: costs.len(),
                diverged: cells.iter().filter(|c| c.diverged).count(),
                failed: cells.iter().filter(|c| c.error.is_some()).count(),
                cells,
            }
        })
        .collect();

    let mut pairwise = Vec::new();
    for a in 0..controllers.len() {
        for b in a + 1..controllers.len() {
            let (ca, cb) = (&controllers[a], &controllers[b]);
            let mean_diff = ca.mean.zip(cb.mean).map(|(x, y)| x - y);
            let std_error = ca
                .std_error()
                .zip(cb.std_error())
                .map(|(x, y)| x.hypot(y));
            let better = match (mean_diff, std_error) {
                (Some(d), Some(se)) if d.abs() <= 2.0 * se => "tie",
                (Some(d), _) if d < 0.0 => "a",
                (Some(_), _) => "b",
                // A controller that never completed loses to one that did.
                (None, _) if ca.mean.is_some() => "a",
                (None, _) if cb.mean.is_some() => "b",
                _ => "undetermined",
            };
            pairwise.push(PairwiseOrdering {
                a,
                b,
                mean_diff,
                std_error,
                better: better.to_string(),
            });
        }
    }
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        controllers,
        pairwise,
    })
}
