//! Condensed MPC tracking problems in the input increments
//! `z = [Δu_0; ...; Δu_{T-1}]`.
//!
//! Both the SS-based and the ARX-based problem share the cost
//! `Σ_{t=0}^{T-1} ‖y_{t+1} - r_{t+1}‖²_{W_y} + ‖Δu_t‖²_{W_Δu}` and the box
//! constraints on `Δu`, `u` and `y`; they differ only in how the predicted
//! outputs `Y = Y_free + Ψ z` are formed.

mod qp;

use nalgebra::{DMatrix, DVector};

pub use qp::{solve_qp, solve_qp_with, QpProblem, QpSettings, QpSolution, QpStatus};

use crate::model::{ArxModel, DiscreteStateSpace, IoHistory};
use crate::{Error, Result};

/// Magnitude used for a missing bound.
pub const UNBOUNDED: f64 = 1e20;

#[derive(Clone, Debug, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Diagonal of `W_y`.
    pub w_y: DVector<f64>,
    /// Diagonal of `W_Δu`.
    pub w_du: DVector<f64>,
    pub y_min: DVector<f64>,
    pub y_max: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub du_min: DVector<f64>,
    pub du_max: DVector<f64>,
}

type Bounds = (DVector<f64>, DVector<f64>);

impl MpcConfig {
    pub fn new(
        horizon: usize,
        w_y: DVector<f64>,
        w_du: DVector<f64>,
        y_bounds: Bounds,
        u_bounds: Bounds,
        du_bounds: Bounds,
    ) -> Result<Self> {
        let cfg = Self {
            horizon,
            w_y,
            w_du,
            y_min: y_bounds.0,
            y_max: y_bounds.1,
            u_min: u_bounds.0,
            u_max: u_bounds.1,
            du_min: du_bounds.0,
            du_max: du_bounds.1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `(-UNBOUNDED, UNBOUNDED)` in every component.
    pub fn unbounded(len: usize) -> Bounds {
        (
            DVector::from_element(len, -UNBOUNDED),
            DVector::from_element(len, UNBOUNDED),
        )
    }

    pub fn n_outputs(&self) -> usize {
        self.w_y.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.w_du.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.w_y.len();
        let q = self.w_du.len();
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if [&self.y_min, &self.y_max].iter().any(|v| v.len() != m)
            || [&self.u_min, &self.u_max, &self.du_min, &self.du_max]
                .iter()
                .any(|v| v.len() != q)
        {
            return Err(Error::InvalidArgument(
                "bound dimensions disagree with the weights".into(),
            ));
        }
        if !self.w_y.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidArgument("output weights must be >= 0".into()));
        }
        if !self.w_du.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::InvalidArgument(
                "input-increment weights must be > 0".into(),
            ));
        }
        for (lo, hi, what) in [
            (&self.y_min, &self.y_max, "y"),
            (&self.u_min, &self.u_max, "u"),
            (&self.du_min, &self.du_max, "du"),
        ] {
            if lo.iter().zip(hi.iter()).any(|(l, h)| l.is_nan() || h.is_nan() || l > h) {
                return Err(Error::InvalidArgument(format!("{what} bounds are inverted")));
            }
        }
        Ok(())
    }

    fn check_model(&self, m: usize, q: usize) -> Result<()> {
        if m != self.n_outputs() || q != self.n_inputs() {
            return Err(Error::InvalidArgument(format!(
                "config is for {} outputs / {} inputs, model has {m} / {q}",
                self.n_outputs(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    /// `‖e‖²_{W_y} + ‖Δu‖²_{W_Δu}`.
    pub fn stage_cost(&self, tracking_error: &DVector<f64>, du: &DVector<f64>) -> f64 {
        weighted_sq(tracking_error, &self.w_y) + weighted_sq(du, &self.w_du)
    }
}

pub(crate) fn weighted_sq(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    v.iter().zip(w.iter()).map(|(x, w)| w * x * x).sum()
}

/// Output references indexed by absolute sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSignal {
    r: Vec<DVector<f64>>,
}

impl ReferenceSignal {
    pub fn new(r: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = r.first() else {
            return Err(Error::InvalidArgument("empty reference".into()));
        };
        let m = first.len();
        if r.iter().any(|v| v.len() != m || !v.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument(
                "reference samples must be finite and equally sized".into(),
            ));
        }
        Ok(Self { r })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn at(&self, t: usize) -> &DVector<f64> {
        &self.r[t]
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.r
    }

    /// `r_{t+1}, ..., r_{t+horizon}`.
    pub fn window(&self, t: usize, horizon: usize) -> Result<&[DVector<f64>]> {
        self.r.get(t + 1..t + 1 + horizon).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "reference of length {} does not cover step {} + horizon {horizon}",
                self.r.len(),
                t
            ))
        })
    }
}

/// `Y = free + forced * z` over the horizon, outputs stacked `[y_1; ...; y_T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub free: DVector<f64>,
    pub forced: DMatrix<f64>,
}

/// Lower block-triangular step-response matrix from `s_1..s_T`, where `s_k`
/// is the response of `y_{t+k}` to a unit step in `u` applied at time `t`.
fn forced_from_steps(step: &[DMatrix<f64>], m: usize, q: usize) -> DMatrix<f64> {
    let t_h = step.len();
    let mut psi = DMatrix::zeros(m * t_h, q * t_h);
    for j in 0..t_h {
        for i in 0..=j {
            psi.view_mut((j * m, i * q), (m, q)).copy_from(&step[j - i]);
        }
    }
    psi
}

fn cumulative(markov: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut acc = DMatrix::zeros(markov[0].nrows(), markov[0].ncols());
    markov
        .iter()
        .map(|h| {
            acc += h;
            acc.clone()
        })
        .collect()
}

pub fn predict_ss(
    dss: &DiscreteStateSpace,
    x0: &DVector<f64>,
    u_prev: &DVector<f64>,
    horizon: usize,
) -> Result<Prediction> {
    let (n, q, m) = (dss.n_states(), dss.n_inputs(), dss.n_outputs());
    if x0.len() != n || u_prev.len() != q {
        return Err(Error::InvalidArgument(format!(
            "expected state of length {n} and input of length {q}"
        )));
    }
    let mut free = DVector::zeros(m * horizon);
    let mut x = x0.clone();
    let bu = dss.b() * u_prev;
    for j in 0..horizon {
        x = dss.a() * x + &bu;
        free.rows_mut(j * m, m).copy_from(&(dss.c() * &x));
    }
    let steps = cumulative(&dss.markov_parameters(horizon));
    Ok(Prediction {
        free,
        forced: forced_from_steps(&steps, m, q),
    })
}

pub fn predict_arx(
    arx: &ArxModel,
    history: &IoHistory,
    u_prev: &DVector<f64>,
    horizon: usize,
) -> Result<Prediction> {
    arx.check_history(history)?;
    let (m, q) = (arx.n_outputs(), arx.n_inputs());
    if u_prev.len() != q {
        return Err(Error::InvalidArgument(format!(
            "previous input has {} entries, expected {q}",
            u_prev.len()
        )));
    }
    // Free response: inputs held at u_prev.
    let mut free = DVector::zeros(m * horizon);
    let mut hist = history.clone();
    for j in 0..horizon {
        let y = arx.predict_next(&hist, u_prev);
        free.rows_mut(j * m, m).copy_from(&y);
        hist.push(y, u_prev.clone());
    }
    let steps = cumulative(&arx.markov_parameters(horizon));
    Ok(Prediction {
        free,
        forced: forced_from_steps(&steps, m, q),
    })
}

fn tile(v: &DVector<f64>, times: usize) -> DVector<f64> {
    DVector::from_fn(v.len() * times, |i, _| v[i % v.len()])
}

fn shift_bound(bound: f64, offset: f64) -> f64 {
    if bound.abs() >= UNBOUNDED {
        bound
    } else {
        bound - offset
    }
}

/// Assembles `H = 2(Ψ'WΨ + W_Δu)`, `g = 2Ψ'W(Y_free - R)` and the constraint
/// rows `[Δu; u; y]`.
pub fn assemble_qp(
    pred: &Prediction,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
) -> Result<QpProblem> {
    let t_h = cfg.horizon;
    let (m, q) = (cfg.n_outputs(), cfg.n_inputs());
    if refs.len() != t_h || refs.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument(format!(
            "need {t_h} reference vectors of length {m}"
        )));
    }
    if pred.free.len() != m * t_h || pred.forced.shape() != (m * t_h, q * t_h) {
        return Err(Error::InvalidArgument("prediction does not match the config".into()));
    }
    let nv = q * t_h;
    let wy = tile(&cfg.w_y, t_h);
    let wdu = tile(&cfg.w_du, t_h);
    let r = DVector::from_fn(m * t_h, |i, _| refs[i / m][i % m]);

    let w_psi = DMatrix::from_diagonal(&wy) * &pred.forced;
    let mut h = pred.forced.tr_mul(&w_psi) * 2.0;
    for i in 0..nv {
        h[(i, i)] += 2.0 * wdu[i];
    }
    let h = crate::linalg::symmetrize(&h);
    let g = w_psi.tr_mul(&(&pred.free - &r)) * 2.0;

    // Cumulative-sum operator: u_j = u_prev + Σ_{i<=j} Δu_i.
    let mut sum_op = DMatrix::zeros(nv, nv);
    for j in 0..t_h {
        for i in 0..=j {
            sum_op.view_mut((j * q, i * q), (q, q)).fill_with_identity();
        }
    }
    let nc = 2 * nv + m * t_h;
    let mut rows = DMatrix::zeros(nc, nv);
    rows.view_mut((0, 0), (nv, nv)).fill_with_identity();
    rows.view_mut((nv, 0), (nv, nv)).copy_from(&sum_op);
    rows.view_mut((2 * nv, 0), (m * t_h, nv)).copy_from(&pred.forced);

    let mut lo = DVector::zeros(nc);
    let mut hi = DVector::zeros(nc);
    for k in 0..nv {
        let i = k % q;
        lo[k] = cfg.du_min[i];
        hi[k] = cfg.du_max[i];
        lo[nv + k] = shift_bound(cfg.u_min[i], u_prev[i]);
        hi[nv + k] = shift_bound(cfg.u_max[i], u_prev[i]);
    }
    for k in 0..m * t_h {
        let i = k % m;
        lo[2 * nv + k] = shift_bound(cfg.y_min[i], pred.free[k]);
        hi[2 * nv + k] = shift_bound(cfg.y_max[i], pred.free[k]);
    }
    // Holding u_prev may already violate a bound; keep lo <= hi for the solver.
    for k in 0..nc {
        if lo[k] > hi[k] {
            return Err(Error::InvalidArgument(format!(
                "constraint row {k} has empty range"
            )));
        }
    }
    QpProblem::new(h, g, rows, lo, hi)
}

pub fn build_ss_mpc_qp(
    dss: &DiscreteStateSpace,
    x_hat0: &DVector<f64>,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
) -> Result<QpProblem> {
    cfg.check_model(dss.n_outputs(), dss.n_inputs())?;
    let pred = predict_ss(dss, x_hat0, u_prev, cfg.horizon)?;
    assemble_qp(&pred, u_prev, refs, cfg)
}

pub fn build_arx_mpc_qp(
    arx: &ArxModel,
    history: &IoHistory,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
) -> Result<QpProblem> {
    cfg.check_model(arx.n_outputs(), arx.n_inputs())?;
    let pred = predict_arx(arx, history, u_prev, cfg.horizon)?;
    assemble_qp(&pred, u_prev, refs, cfg)
}

/// Current state estimate `x̂_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
}

/// Predictor-form observer update `x̂⁺ = A x̂ + B u + K (y - C x̂)`.
pub fn kalman_filter_step(
    dss: &DiscreteStateSpace,
    k: &DMatrix<f64>,
    est: &EstimatorState,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<EstimatorState> {
    let (n, q, m) = (dss.n_states(), dss.n_inputs(), dss.n_outputs());
    if k.shape() != (n, m) || est.x_hat.len() != n || u.len() != q || y.len() != m {
        return Err(Error::InvalidArgument(
            "estimator dimensions disagree with the model".into(),
        ));
    }
    let innovation = y - dss.c() * &est.x_hat;
    Ok(EstimatorState {
        x_hat: dss.a() * &est.x_hat + dss.b() * u + k * innovation,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    /// Optimal value of the horizon cost, constant terms included.
    pub predicted_cost: f64,
    /// Predicted `‖y_{t+1} - r_{t+1}‖²_{W_y} + ‖Δu_t‖²_{W_Δu}`.
    pub stage_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub u: DVector<f64>,
    pub du: DVector<f64>,
    /// Full increment plan `z*`, useful as the next warm start.
    pub plan: DVector<f64>,
    pub predicted_outputs: DVector<f64>,
    pub diagnostics: StepDiagnostics,
}

fn finish_step(
    pred: &Prediction,
    qp: &QpProblem,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
    warm: Option<&DVector<f64>>,
) -> Result<StepOutput> {
    let sol = solve_qp(qp, warm)?;
    let (m, q) = (cfg.n_outputs(), cfg.n_inputs());
    let du = sol.z.rows(0, q).into_owned();
    let y_pred = &pred.free + &pred.forced * &sol.z;
    let r = DVector::from_fn(m * cfg.horizon, |i, _| refs[i / m][i % m]);
    let err = &y_pred - &r;
    let predicted_cost = weighted_sq(&err, &tile(&cfg.w_y, cfg.horizon))
        + weighted_sq(&sol.z, &tile(&cfg.w_du, cfg.horizon));
    let stage_cost = cfg.stage_cost(&err.rows(0, m).into_owned(), &du);
    Ok(StepOutput {
        u: u_prev + &du,
        du,
        plan: sol.z,
        predicted_outputs: y_pred,
        diagnostics: StepDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            polished: sol.polished,
            predicted_cost,
            stage_cost,
        },
    })
}

/// One receding-horizon step of ARX-based MPC.
pub fn mpc_step_arx(
    arx: &ArxModel,
    history: &IoHistory,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
    warm: Option<&DVector<f64>>,
) -> Result<StepOutput> {
    cfg.check_model(arx.n_outputs(), arx.n_inputs())?;
    let pred = predict_arx(arx, history, u_prev, cfg.horizon)?;
    let qp = assemble_qp(&pred, u_prev, refs, cfg)?;
    finish_step(&pred, &qp, u_prev, refs, cfg, warm)
}

/// One receding-horizon step of SS-based MPC from the state (or estimate) `x0`.
pub fn mpc_step_ss(
    dss: &DiscreteStateSpace,
    x0: &DVector<f64>,
    u_prev: &DVector<f64>,
    refs: &[DVector<f64>],
    cfg: &MpcConfig,
    warm: Option<&DVector<f64>>,
) -> Result<StepOutput> {
    cfg.check_model(dss.n_outputs(), dss.n_inputs())?;
    let pred = predict_ss(dss, x0, u_prev, cfg.horizon)?;
    let qp = assemble_qp(&pred, u_prev, refs, cfg)?;
    finish_step(&pred, &qp, u_prev, refs, cfg, warm)
}

/// Shifts a plan one step forward, repeating a zero increment at the end.
pub fn shift_plan(plan: &DVector<f64>, n_inputs: usize) -> DVector<f64> {
    let len = plan.len();
    DVector::from_fn(len, |i, _| {
        if i + n_inputs < len {
            plan[i + n_inputs]
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afti16;
    use nalgebra::{dmatrix, dvector};

    fn scalar_cfg(horizon: usize, wy: f64, wdu: f64) -> MpcConfig {
        MpcConfig::new(
            horizon,
            dvector![wy],
            dvector![wdu],
            MpcConfig::unbounded(1),
            MpcConfig::unbounded(1),
            MpcConfig::unbounded(1),
        )
        .unwrap()
    }

    fn scalar_dss() -> DiscreteStateSpace {
        DiscreteStateSpace::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], 1.0).unwrap()
    }

    #[test]
    fn one_step_scalar_qp() {
        let rho = 0.25;
        let cfg = scalar_cfg(1, 1.0, rho);
        let qp = build_ss_mpc_qp(&scalar_dss(), &dvector![0.0], &dvector![0.0], &[dvector![1.0]], &cfg)
            .unwrap();
        assert!((qp.h[(0, 0)] - 2.0 * (1.0 + rho)).abs() < 1e-14);
        assert!((qp.g[0] + 2.0).abs() < 1e-14);
        let sol = solve_qp(&qp, None).unwrap();
        assert!((sol.z[0] - 1.0 / (1.0 + rho)).abs() < 1e-9);
    }

    #[test]
    fn zero_output_weight_means_no_moves() {
        let mut cfg = scalar_cfg(3, 0.0, 1.0);
        cfg.du_min = dvector![-1.0];
        cfg.du_max = dvector![1.0];
        let refs = vec![dvector![5.0]; 3];
        let qp = build_ss_mpc_qp(&scalar_dss(), &dvector![2.0], &dvector![1.0], &refs, &cfg).unwrap();
        assert_eq!(qp.g.amax(), 0.0);
        let sol = solve_qp(&qp, None).unwrap();
        assert!(sol.z.amax() < 1e-9);
    }

    #[test]
    fn afti16_qp_dimensions() {
        let dss = afti16::discrete_model();
        let cfg = afti16::mpc_config();
        let refs = afti16::default_reference();
        let qp = build_ss_mpc_qp(
            &dss,
            &DVector::zeros(4),
            &DVector::zeros(2),
            refs.window(0, cfg.horizon).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(qp.n_vars(), 20);
        assert_eq!(qp.n_constraints(), 60);
        assert!((&qp.h - qp.h.transpose()).amax() < 1e-10);
        assert!(qp.h.clone().cholesky().is_some());
    }

    #[test]
    fn arx_prediction_matrix_by_hand() {
        // y_t = 0.5 y_{t-1} + u_{t-1}: step response 1, 1.5
        let arx = ArxModel::new(vec![dmatrix![0.5]], vec![dmatrix![1.0]]).unwrap();
        let hist = IoHistory::zeros(1, 1, 1);
        let pred = predict_arx(&arx, &hist, &dvector![0.0], 2).unwrap();
        assert_eq!(pred.forced, dmatrix![1.0, 0.0; 1.5, 1.0]);
        assert_eq!(pred.free, dvector![0.0, 0.0]);
    }

    #[test]
    fn arx_zero_history_zero_reference() {
        let dss = afti16::discrete_model();
        let arx = crate::ss_to_arx_ch(&dss).unwrap();
        let cfg = afti16::mpc_config();
        let refs = vec![DVector::zeros(2); cfg.horizon];
        let hist = IoHistory::zeros(4, 2, 2);
        let qp = build_arx_mpc_qp(&arx, &hist, &DVector::zeros(2), &refs, &cfg).unwrap();
        assert_eq!(qp.g.amax(), 0.0);
        let step = mpc_step_arx(&arx, &hist, &DVector::zeros(2), &refs, &cfg, None).unwrap();
        assert!(step.u.amax() < 1e-9);
    }

    #[test]
    fn ch_arx_qp_equals_ss_qp() {
        let dss = afti16::discrete_model();
        let arx = crate::ss_to_arx_ch(&dss).unwrap();
        let cfg = afti16::mpc_config();
        // Drive the plant with a few inputs to get a non-trivial state.
        let inputs: Vec<_> = (0..8)
            .map(|k| dvector![(k as f64 * 0.7).sin(), (k as f64 * 0.3).cos()])
            .collect();
        let tr = crate::simulate_ss(&dss, &DVector::zeros(4), &inputs, None).unwrap();
        let y_past: Vec<_> = (0..4).map(|i| tr.outputs[8 - i].clone()).collect();
        let u_past: Vec<_> = (0..4).map(|i| inputs[7 - i].clone()).collect();
        let hist = IoHistory::new(y_past, u_past).unwrap();
        let u_prev = inputs[7].clone();
        let refs = vec![dvector![0.0, 10.0]; cfg.horizon];
        let ss = build_ss_mpc_qp(&dss, &tr.states[8], &u_prev, &refs, &cfg).unwrap();
        let ax = build_arx_mpc_qp(&arx, &hist, &u_prev, &refs, &cfg).unwrap();
        assert!((&ss.h - &ax.h).amax() <= 1e-6 * ss.h.amax());
        assert!((&ss.g - &ax.g).amax() <= 1e-6 * ss.g.amax());
    }

    #[test]
    fn kalman_step_by_hand() {
        let dss = DiscreteStateSpace::new(dmatrix![1.0], dmatrix![0.0], dmatrix![1.0], 1.0).unwrap();
        let est = EstimatorState { x_hat: dvector![0.0] };
        let next = kalman_filter_step(&dss, &dmatrix![0.5], &est, &dvector![3.0], &dvector![2.0]).unwrap();
        assert_eq!(next.x_hat, dvector![1.0]);
    }

    #[test]
    fn kalman_step_zero_innovation_is_prediction() {
        let dss = afti16::discrete_model();
        let x = dvector![1.0, 0.1, -0.2, 0.3];
        let u = dvector![0.5, -1.0];
        let y = dss.c() * &x;
        let k = DMatrix::from_element(4, 2, 0.3);
        let next = kalman_filter_step(&dss, &k, &EstimatorState { x_hat: x.clone() }, &u, &y).unwrap();
        assert!((next.x_hat - (dss.a() * x + dss.b() * u)).amax() < 1e-14);
    }

    #[test]
    fn first_step_saturates_on_large_pitch_reference() {
        let dss = afti16::discrete_model();
        let cfg = afti16::mpc_config();
        let refs = vec![dvector![0.0, 100.0]; cfg.horizon];
        let step = mpc_step_ss(&dss, &DVector::zeros(4), &DVector::zeros(2), &refs, &cfg, None).unwrap();
        assert_eq!(step.diagnostics.status, QpStatus::Solved);
        let u_max = step.u.amax();
        assert!((u_max - 25.0).abs() < 1e-6, "u = {}", step.u);
    }

    #[test]
    fn config_validation() {
        let bad = MpcConfig::new(
            2,
            dvector![1.0],
            dvector![0.0],
            MpcConfig::unbounded(1),
            MpcConfig::unbounded(1),
            MpcConfig::unbounded(1),
        );
        assert!(bad.is_err());
        let inverted = MpcConfig::new(
            2,
            dvector![1.0],
            dvector![1.0],
            (dvector![1.0], dvector![0.0]),
            MpcConfig::unbounded(1),
            MpcConfig::unbounded(1),
        );
        assert!(inverted.is_err());
    }

    #[test]
    fn shift_plan_drops_first_move() {
        let plan = dvector![1.0, 2.0, 3.0, 4.0];
        assert_eq!(shift_plan(&plan, 2), dvector![3.0, 4.0, 0.0, 0.0]);
    }
}
