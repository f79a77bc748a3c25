//! State-space and ARX model types, exact discretization, characteristic
//! polynomials, and open-loop simulation.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::linalg::all_finite;
use crate::{Error, Result};

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidModel(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidModel("state dimension is zero".into()));
    }
    if b.nrows() != n || b.ncols() == 0 {
        return Err(Error::InvalidModel(format!(
            "B must have {n} rows and at least one column, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if c.ncols() != n || c.nrows() == 0 {
        return Err(Error::InvalidModel(format!(
            "C must have {n} columns and at least one row, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if !(all_finite(a) && all_finite(b) && all_finite(c)) {
        return Err(Error::InvalidModel("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Continuous-time model `dx/dt = A_c x + B_c u`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl ContinuousStateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_dims(&a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
}

/// Discrete-time model `x_{t+1} = A x_t + B u_t`, `y_t = C x_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    dt: f64,
}

impl DiscreteStateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        check_dims(&a, &b, &c)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sample time must be positive, got {dt}"
            )));
        }
        Ok(Self { a, b, c, dt })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// State dimension n.
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension q.
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension m.
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Markov parameters `C A^{j-1} B` for `j = 1..=count`.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut ab = self.b.clone();
        for _ in 0..count {
            out.push(&self.c * &ab);
            ab = &self.a * ab;
        }
        out
    }
}

/// Zero-order-hold discretization through the exponential of the augmented
/// matrix `[[A_c, B_c], [0, 0]] * dt`.
pub fn discretize_exact(css: &ContinuousStateSpace, dt: f64) -> Result<DiscreteStateSpace> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample time must be positive, got {dt}"
        )));
    }
    let n = css.a.nrows();
    let q = css.b.ncols();
    let mut aug = DMatrix::zeros(n + q, n + q);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&css.a * dt));
    aug.view_mut((0, n), (n, q)).copy_from(&(&css.b * dt));
    let e = aug.exp();
    if !all_finite(&e) {
        return Err(Error::InvalidModel(
            "matrix exponential overflowed".into(),
        ));
    }
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, q)).into_owned();
    DiscreteStateSpace::new(a, b, css.c.clone(), dt)
}

/// Coefficients `[c_1, ..., c_n]` of `det(λI - A) = λ^n + c_1 λ^{n-1} + ... + c_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPolyCoefficients(pub Vec<f64>);

impl CharPolyCoefficients {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// Evaluates `A^n + c_1 A^{n-1} + ... + c_n I` by Horner's scheme.
    pub fn eval_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut acc = DMatrix::identity(n, n);
        for &c in &self.0 {
            acc = a * acc + DMatrix::identity(n, n) * c;
        }
        acc
    }
}

/// Faddeev–LeVerrier recurrence: `M_k = A M_{k-1} + c_{k-1} I`,
/// `c_k = -tr(A M_k) / k`.
pub fn char_poly(a: &DMatrix<f64>) -> Result<CharPolyCoefficients> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "characteristic polynomial needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !all_finite(a) {
        return Err(Error::InvalidModel("non-finite matrix entry".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut coeffs = Vec::with_capacity(n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut prev = 1.0;
    for k in 1..=n {
        m = a * &m + &eye * prev;
        let ck = -(a * &m).trace() / k as f64;
        coeffs.push(ck);
        prev = ck;
    }
    Ok(CharPolyCoefficients(coeffs))
}

/// ARX model `y_t = Σ_{i=1}^{p} (Ā_i y_{t-i} + B̄_i u_{t-i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArxModel {
    a_bar: Vec<DMatrix<f64>>,
    b_bar: Vec<DMatrix<f64>>,
}

impl ArxModel {
    pub fn new(a_bar: Vec<DMatrix<f64>>, b_bar: Vec<DMatrix<f64>>) -> Result<Self> {
        if a_bar.is_empty() {
            return Err(Error::InvalidModel("ARX order must be positive".into()));
        }
        if a_bar.len() != b_bar.len() {
            return Err(Error::InvalidModel(format!(
                "{} output lags but {} input lags",
                a_bar.len(),
                b_bar.len()
            )));
        }
        let m = a_bar[0].nrows();
        let q = b_bar[0].ncols();
        if m == 0 || q == 0 {
            return Err(Error::InvalidModel("empty ARX coefficient".into()));
        }
        for (i, (a, b)) in a_bar.iter().zip(&b_bar).enumerate() {
            if a.shape() != (m, m) || b.shape() != (m, q) {
                return Err(Error::InvalidModel(format!(
                    "lag {} has shapes {:?} and {:?}, expected ({m}, {m}) and ({m}, {q})",
                    i + 1,
                    a.shape(),
                    b.shape()
                )));
            }
            if !(all_finite(a) && all_finite(b)) {
                return Err(Error::InvalidModel(format!(
                    "non-finite coefficient at lag {}",
                    i + 1
                )));
            }
        }
        Ok(Self { a_bar, b_bar })
    }

    pub fn order(&self) -> usize {
        self.a_bar.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.a_bar[0].nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_bar[0].ncols()
    }

    /// Output coefficients, index 0 holds lag 1.
    pub fn a_bar(&self) -> &[DMatrix<f64>] {
        &self.a_bar
    }

    /// Input coefficients, index 0 holds lag 1.
    pub fn b_bar(&self) -> &[DMatrix<f64>] {
        &self.b_bar
    }

    /// One-step prediction of `y_{t+1}` from the history and the input `u_t`.
    pub fn predict_next(&self, history: &IoHistory, u: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.b_bar[0] * u;
        for (i, a) in self.a_bar.iter().enumerate() {
            y += a * &history.y_past[i];
        }
        for (i, b) in self.b_bar.iter().enumerate().skip(1) {
            y += b * &history.u_past[i - 1];
        }
        y
    }

    /// Impulse-response (Markov) parameters `h_1..h_count` of the recursion:
    /// `h_k = B̄_k + Σ_{i<k} Ā_i h_{k-i}`.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let p = self.order();
        let mut h: Vec<DMatrix<f64>> = Vec::with_capacity(count);
        for k in 1..=count {
            let mut hk = if k <= p {
                self.b_bar[k - 1].clone()
            } else {
                DMatrix::zeros(self.n_outputs(), self.n_inputs())
            };
            for i in 1..k.min(p + 1) {
                hk += &self.a_bar[i - 1] * &h[k - i - 1];
            }
            h.push(hk);
        }
        h
    }

    pub(crate) fn check_history(&self, history: &IoHistory) -> Result<()> {
        let p = self.order();
        let available = history.len();
        if available < p {
            return Err(Error::InsufficientHistory {
                needed: p,
                available,
            });
        }
        let m = self.n_outputs();
        let q = self.n_inputs();
        if history.y_past.iter().any(|y| y.len() != m) || history.u_past.iter().any(|u| u.len() != q)
        {
            return Err(Error::InvalidArgument(format!(
                "history vectors must have {m} outputs and {q} inputs"
            )));
        }
        Ok(())
    }
}

/// Rolling buffer of past outputs `[y_t, y_{t-1}, ...]` and past inputs
/// `[u_{t-1}, u_{t-2}, ...]`, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct IoHistory {
    y_past: VecDeque<DVector<f64>>,
    u_past: VecDeque<DVector<f64>>,
}

impl IoHistory {
    /// Both lists newest first. Their lengths fix the buffer capacity.
    pub fn new(y_past: Vec<DVector<f64>>, u_past: Vec<DVector<f64>>) -> Result<Self> {
        if y_past.is_empty() || u_past.is_empty() {
            return Err(Error::InvalidArgument("history must not be empty".into()));
        }
        let m = y_past[0].len();
        let q = u_past[0].len();
        if y_past.iter().any(|y| y.len() != m) || u_past.iter().any(|u| u.len() != q) {
            return Err(Error::InvalidArgument(
                "history vectors have inconsistent dimensions".into(),
            ));
        }
        Ok(Self {
            y_past: y_past.into(),
            u_past: u_past.into(),
        })
    }

    /// All-zero history of length `len`.
    pub fn zeros(len: usize, n_outputs: usize, n_inputs: usize) -> Self {
        Self {
            y_past: vec![DVector::zeros(n_outputs); len].into(),
            u_past: vec![DVector::zeros(n_inputs); len].into(),
        }
    }

    pub fn len(&self) -> usize {
        self.y_past.len().min(self.u_past.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y_past(&self) -> &VecDeque<DVector<f64>> {
        &self.y_past
    }

    pub fn u_past(&self) -> &VecDeque<DVector<f64>> {
        &self.u_past
    }

    /// Records a new measurement as `y_t`, dropping the oldest output.
    pub fn push_output(&mut self, y: DVector<f64>) {
        self.y_past.push_front(y);
        self.y_past.pop_back();
    }

    /// Records the input just applied as `u_{t-1}` of the next step.
    pub fn push_input(&mut self, u: DVector<f64>) {
        self.u_past.push_front(u);
        self.u_past.pop_back();
    }

    /// Advances one sample: `u` was applied and produced `y`.
    pub fn push(&mut self, y: DVector<f64>, u: DVector<f64>) {
        self.push_output(y);
        self.push_input(u);
    }
}

/// State and output trajectories; `outputs[k] = C states[k] (+ v_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SsTrajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Simulates `N = inputs.len()` steps. Returns `N + 1` states and outputs
/// (the initial sample included). Process noise needs `N` entries and
/// measurement noise `N + 1`.
pub fn simulate_ss(
    dss: &DiscreteStateSpace,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    noise: Option<(&[DVector<f64>], &[DVector<f64>])>,
) -> Result<SsTrajectory> {
    let (n, q, m) = (dss.n_states(), dss.n_inputs(), dss.n_outputs());
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs to simulate".into()));
    }
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, expected {n}",
            x0.len()
        )));
    }
    if let Some(bad) = inputs.iter().position(|u| u.len() != q) {
        return Err(Error::InvalidArgument(format!(
            "input {bad} has {} entries, expected {q}",
            inputs[bad].len()
        )));
    }
    if let Some((w, v)) = noise {
        if w.len() != inputs.len() || w.iter().any(|w| w.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "process noise must hold {} vectors of length {n}",
                inputs.len()
            )));
        }
        if v.len() != inputs.len() + 1 || v.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidArgument(format!(
                "measurement noise must hold {} vectors of length {m}",
                inputs.len() + 1
            )));
        }
    }

    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut outputs = Vec::with_capacity(inputs.len() + 1);
    let mut x = x0.clone();
    for (k, u) in inputs.iter().enumerate() {
        let mut y = dss.c() * &x;
        let mut next = dss.a() * &x + dss.b() * u;
        if let Some((w, v)) = noise {
            y += &v[k];
            next += &w[k];
        }
        outputs.push(y);
        states.push(std::mem::replace(&mut x, next));
    }
    let mut y = dss.c() * &x;
    if let Some((_, v)) = noise {
        y += &v[inputs.len()];
    }
    outputs.push(y);
    states.push(x);
    Ok(SsTrajectory { states, outputs })
}

/// Runs the ARX recursion over `inputs`, starting from a copy of `history`.
/// Returns one output per input: the response `y_{t+1}` to `u_t`.
pub fn simulate_arx(
    arx: &ArxModel,
    history: &IoHistory,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    arx.check_history(history)?;
    if let Some(bad) = inputs.iter().position(|u| u.len() != arx.n_inputs()) {
        return Err(Error::InvalidArgument(format!(
            "input {bad} has {} entries, expected {}",
            inputs[bad].len(),
            arx.n_inputs()
        )));
    }
    let mut hist = history.clone();
    let mut out = Vec::with_capacity(inputs.len());
    for u in inputs {
        let y = arx.predict_next(&hist, u);
        hist.push(y.clone(), u.clone());
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(a: f64, b: f64, c: f64) -> DiscreteStateSpace {
        DiscreteStateSpace::new(dmatrix![a], dmatrix![b], dmatrix![c], 1.0).unwrap()
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = DiscreteStateSpace::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            0.1,
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let err = ContinuousStateSpace::new(dmatrix![f64::NAN], dmatrix![1.0], dmatrix![1.0]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        assert!(DiscreteStateSpace::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], 0.0).is_err());
    }

    #[test]
    fn zero_dynamics_discretize_to_integrator() {
        let b = dmatrix![1.0, -2.0; 0.5, 3.0; 0.0, 1.0];
        let css = ContinuousStateSpace::new(DMatrix::zeros(3, 3), b.clone(), DMatrix::identity(1, 3))
            .unwrap();
        let dss = discretize_exact(&css, 0.2).unwrap();
        assert!((dss.a() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert!((dss.b() - b * 0.2).amax() < 1e-15);
    }

    #[test]
    fn scalar_decay_discretization() {
        let css = ContinuousStateSpace::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let dss = discretize_exact(&css, 0.1).unwrap();
        let e = (-0.1f64).exp();
        assert!((dss.a()[(0, 0)] - e).abs() < 1e-14);
        assert!((dss.b()[(0, 0)] - (1.0 - e)).abs() < 1e-14);
        assert!(matches!(
            discretize_exact(&css, -0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn char_poly_of_identity() {
        let c = char_poly(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(c.as_slice(), &[-2.0, 1.0]);
    }

    #[test]
    fn char_poly_from_known_roots() {
        // (λ-2)(λ+1)(λ-0.5) = λ^3 - 1.5λ^2 - 1.5λ + 1
        let t = dmatrix![1.0, 2.0, 0.0; 0.0, 1.0, 1.0; 1.0, 0.0, 1.0];
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.5]));
        let a = &t * d * t.clone().try_inverse().unwrap();
        let c = char_poly(&a).unwrap();
        for (got, want) in c.as_slice().iter().zip([-1.5, -1.5, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn char_poly_rejects_rectangular() {
        assert!(char_poly(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_equilibrium_stays_zero() {
        let dss = crate::afti16::discrete_model();
        let inputs = vec![DVector::zeros(2); 10];
        let tr = simulate_ss(&dss, &DVector::zeros(4), &inputs, None).unwrap();
        assert_eq!(tr.outputs.len(), 11);
        assert!(tr.states.iter().chain(&tr.outputs).all(|v| v.amax() == 0.0));
    }

    #[test]
    fn scalar_hand_recursion() {
        let dss = scalar(0.5, 1.0, 1.0);
        let inputs = [dvec(1.0), dvec(0.0)];
        let tr = simulate_ss(&dss, &dvec(0.0), &inputs, None).unwrap();
        let ys: Vec<f64> = tr.outputs.iter().map(|y| y[0]).collect();
        assert_eq!(ys, vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn simulate_ss_checks_noise_lengths() {
        let dss = scalar(0.5, 1.0, 1.0);
        let inputs = [dvec(1.0), dvec(0.0)];
        let w = [dvec(0.0), dvec(0.0)];
        let v = [dvec(0.0), dvec(0.0)];
        assert!(matches!(
            simulate_ss(&dss, &dvec(0.0), &inputs, Some((&w, &v))),
            Err(Error::InvalidArgument(_))
        ));
        assert!(simulate_ss(&dss, &dvec(0.0), &[], None).is_err());
        assert!(simulate_ss(&dss, &DVector::zeros(2), &inputs, None).is_err());
    }

    #[test]
    fn simulate_ss_adds_noise() {
        let dss = scalar(0.5, 1.0, 1.0);
        let inputs = [dvec(0.0)];
        let w = [dvec(1.0)];
        let v = [dvec(0.25), dvec(-0.25)];
        let tr = simulate_ss(&dss, &dvec(0.0), &inputs, Some((&w, &v))).unwrap();
        assert_eq!(tr.states[1][0], 1.0);
        assert_eq!(tr.outputs[0][0], 0.25);
        assert_eq!(tr.outputs[1][0], 0.75);
    }

    fn dvec(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn arx_one_step() {
        let arx = ArxModel::new(vec![dmatrix![0.5]], vec![dmatrix![1.0]]).unwrap();
        let hist = IoHistory::new(vec![dvec(2.0)], vec![dvec(0.0)]).unwrap();
        let out = simulate_arx(&arx, &hist, &[dvec(0.0)]).unwrap();
        assert_eq!(out, vec![dvec(1.0)]);
    }

    #[test]
    fn arx_zero_in_zero_out() {
        let arx = crate::ss_to_arx_ch(&crate::afti16::discrete_model()).unwrap();
        let hist = IoHistory::zeros(4, 2, 2);
        let out = simulate_arx(&arx, &hist, &vec![DVector::zeros(2); 20]).unwrap();
        assert!(out.iter().all(|y| y.amax() == 0.0));
    }

    #[test]
    fn arx_needs_enough_history() {
        let arx = crate::ss_to_arx_ch(&crate::afti16::discrete_model()).unwrap();
        let hist = IoHistory::zeros(3, 2, 2);
        assert!(matches!(
            simulate_arx(&arx, &hist, &[DVector::zeros(2)]),
            Err(Error::InsufficientHistory {
                needed: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn arx_rejects_ragged_coefficients() {
        assert!(ArxModel::new(vec![], vec![]).is_err());
        assert!(ArxModel::new(vec![dmatrix![1.0]], vec![]).is_err());
        assert!(ArxModel::new(
            vec![dmatrix![1.0], DMatrix::identity(2, 2)],
            vec![dmatrix![1.0], dmatrix![1.0]]
        )
        .is_err());
    }

    #[test]
    fn history_push_discards_oldest() {
        let mut h = IoHistory::new(vec![dvec(1.0), dvec(2.0)], vec![dvec(3.0), dvec(4.0)]).unwrap();
        h.push(dvec(0.0), dvec(5.0));
        assert_eq!(h.y_past().iter().map(|v| v[0]).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(h.u_past().iter().map(|v| v[0]).collect::<Vec<_>>(), vec![5.0, 3.0]);
    }

    #[test]
    fn arx_markov_parameters_unroll_recursion() {
        // y_t = 0.5 y_{t-1} + u_{t-1}: impulse response 1, 0.5, 0.25
        let arx = ArxModel::new(vec![dmatrix![0.5]], vec![dmatrix![1.0]]).unwrap();
        let h: Vec<f64> = arx.markov_parameters(3).iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(h, vec![1.0, 0.5, 0.25]);
    }
}
