//! State-space to ARX transformations.
//!
//! * Cayley–Hamilton: exact, order `n`, output coefficients `-c_i I`.
//! * Observer gain `L`: `Ā_i = C (A-LC)^{i-1} L`, `B̄_i = C (A-LC)^{i-1} B`,
//!   truncated once `(A-LC)^k` is negligible.
//! * Steady-state Kalman gain: the observer route with `L = K` from the
//!   filter Riccati equation.

use nalgebra::DMatrix;

use crate::linalg::{
    all_finite, eigenvalues, inverse, inverse_condition, observability, rank, solve,
    spectral_radius, symmetrize,
};
use crate::model::{char_poly, ArxModel, DiscreteStateSpace};
use crate::{Error, Result};

/// Relative Frobenius threshold on `(A-LC)^k` used to pick the ARX order.
pub const DEFAULT_TRUNC_TOL: f64 = 5e-4;
pub const DEFAULT_MAX_ORDER: usize = 50;

const PLACEMENT_RETRIES: usize = 3;
const PLACEMENT_EIG_TOL: f64 = 1e-8;
const DARE_MAX_DOUBLINGS: usize = 200;
const DARE_STEP_TOL: f64 = 1e-12;
const DARE_RESIDUAL_TOL: f64 = 1e-10;

/// Cayley–Hamilton transform. Exact for every trajectory of the model once
/// the ARX history holds `n` true samples.
pub fn ss_to_arx_ch(dss: &DiscreteStateSpace) -> Result<ArxModel> {
    let n = dss.n_states();
    let m = dss.n_outputs();
    let coeffs = char_poly(dss.a())?;
    let c = coeffs.as_slice();
    let markov = dss.markov_parameters(n);

    let a_bar = c.iter().map(|&ci| DMatrix::identity(m, m) * -ci).collect();
    // Θ_k = C A^{k-1} B + Σ_{j=1}^{k-1} c_j C A^{k-1-j} B
    let b_bar = (1..=n)
        .map(|k| {
            let mut theta = markov[k - 1].clone();
            for j in 1..k {
                theta += &markov[k - 1 - j] * c[j - 1];
            }
            theta
        })
        .collect();
    ArxModel::new(a_bar, b_bar)
}

/// Output-injection gain with `ρ(A - LC) < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverGain {
    l: DMatrix<f64>,
}

impl ObserverGain {
    pub fn new(dss: &DiscreteStateSpace, l: DMatrix<f64>) -> Result<Self> {
        if l.shape() != (dss.n_states(), dss.n_outputs()) {
            return Err(Error::InvalidArgument(format!(
                "gain must be {}x{}, got {:?}",
                dss.n_states(),
                dss.n_outputs(),
                l.shape()
            )));
        }
        if !all_finite(&l) {
            return Err(Error::InvalidArgument("non-finite gain entry".into()));
        }
        let rho = spectral_radius(&(dss.a() - &l * dss.c()));
        if rho >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "A - LC is not stable (spectral radius {rho})"
            )));
        }
        Ok(Self { l })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `A - LC`, the estimation-error dynamics.
    pub fn error_dynamics(&self, dss: &DiscreteStateSpace) -> DMatrix<f64> {
        dss.a() - &self.l * dss.c()
    }
}

fn seed_matrix(m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |i, j| if j % m == i { 1.0 } else { 0.0 })
}

/// Places the eigenvalues of `A - LC` at `poles` (real, distinct, inside the
/// unit disk) by solving the dual Sylvester equation `A'X - XF = C'G` with
/// `F = diag(poles)` and setting `L = (G X^{-1})'`.
///
/// The gain is not unique; this routine is deterministic for a given input.
pub fn place_observer_poles(dss: &DiscreteStateSpace, poles: &[f64]) -> Result<ObserverGain> {
    let n = dss.n_states();
    let m = dss.n_outputs();
    if poles.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} poles, got {}",
            poles.len()
        )));
    }
    if let Some(p) = poles.iter().find(|p| !(p.is_finite() && p.abs() < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "pole {p} is outside (-1, 1)"
        )));
    }
    let mut sorted = poles.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-12) {
        return Err(Error::InvalidArgument(
            "repeated poles are not supported".into(),
        ));
    }
    let obs_rank = rank(&observability(dss.a(), dss.c()), 1e-12);
    if obs_rank < n {
        return Err(Error::Unobservable { rank: obs_rank, n });
    }

    let at = dss.a().transpose();
    let ct = dss.c().transpose();
    let mut g = seed_matrix(m, n);
    let mut last_issue = String::new();
    for attempt in 0..=PLACEMENT_RETRIES {
        if attempt > 0 {
            for i in 0..m {
                for j in 0..n {
                    g[(i, j)] += 0.1 * (i + 1) as f64;
                }
            }
        }
        let rhs = &ct * &g;
        // F is diagonal, so the Sylvester equation splits column by column.
        let mut x = DMatrix::zeros(n, n);
        let mut solved = true;
        for (j, &pole) in poles.iter().enumerate() {
            let shifted = &at - DMatrix::identity(n, n) * pole;
            match solve(&shifted, &rhs.columns(j, 1).into_owned(), "A' - pole I") {
                Ok(col) => x.set_column(j, &col.column(0)),
                Err(_) => {
                    solved = false;
                    last_issue = format!("pole {pole} coincides with an eigenvalue of A");
                    break;
                }
            }
        }
        if !solved {
            continue;
        }
        if inverse_condition(&x) < 1e-14 {
            last_issue = "Sylvester solution is singular".into();
            continue;
        }
        let Ok(x_inv) = inverse(&x, "Sylvester solution") else {
            last_issue = "Sylvester solution is singular".into();
            continue;
        };
        let l = (&g * x_inv).transpose();
        let achieved = eigenvalues(&(dss.a() - &l * dss.c()));
        let err = pole_mismatch(&achieved, &sorted);
        if err <= PLACEMENT_EIG_TOL {
            return ObserverGain::new(dss, l);
        }
        last_issue = format!("achieved poles off by {err:.3e}");
    }
    Err(Error::PlacementFailure(last_issue))
}

fn pole_mismatch(achieved: &[nalgebra::Complex<f64>], sorted_target: &[f64]) -> f64 {
    let mut got: Vec<_> = achieved.to_vec();
    got.sort_by(|a, b| a.re.total_cmp(&b.re));
    got.iter()
        .zip(sorted_target)
        .map(|(z, &p)| (z.re - p).abs().max(z.im.abs()))
        .fold(0.0, f64::max)
}

/// Smallest `k >= 1` with `‖M^k‖_F <= tol ‖M‖_F`, plus the achieved ratio.
pub fn truncation_order(m: &DMatrix<f64>, tol: f64, max_order: usize) -> Result<(usize, f64)> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "truncation tolerance must be positive, got {tol}"
        )));
    }
    if max_order == 0 {
        return Err(Error::InvalidArgument("max order must be positive".into()));
    }
    let base = m.norm();
    if base == 0.0 {
        return Ok((1, 0.0));
    }
    let mut power = m.clone();
    let mut ratio = 1.0;
    for k in 1..=max_order {
        ratio = power.norm() / base;
        if ratio <= tol {
            return Ok((k, ratio));
        }
        power = &power * m;
    }
    Err(Error::OrderOverflow {
        max_order,
        achieved: ratio,
    })
}

/// ARX coefficients of a fixed order from an observer gain.
pub fn ss_to_arx_with_gain(
    dss: &DiscreteStateSpace,
    gain: &ObserverGain,
    order: usize,
) -> Result<ArxModel> {
    if order == 0 {
        return Err(Error::InvalidArgument("ARX order must be positive".into()));
    }
    let acl = gain.error_dynamics(dss);
    let mut a_bar = Vec::with_capacity(order);
    let mut b_bar = Vec::with_capacity(order);
    // C (A-LC)^{i-1}, advanced one power per lag.
    let mut c_pow = dss.c().clone();
    for _ in 0..order {
        a_bar.push(&c_pow * gain.matrix());
        b_bar.push(&c_pow * dss.b());
        c_pow = &c_pow * &acl;
    }
    ArxModel::new(a_bar, b_bar)
}

/// Observer-theory transform with order picked by [`truncation_order`].
pub fn ss_to_arx_ot(
    dss: &DiscreteStateSpace,
    gain: &ObserverGain,
    trunc_tol: f64,
    max_order: usize,
) -> Result<ArxModel> {
    let (order, _) = truncation_order(&gain.error_dynamics(dss), trunc_tol, max_order)?;
    ss_to_arx_with_gain(dss, gain, order)
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = 1.0 + m.amax();
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
    }
    Ok(())
}

/// `‖P - (APA' - APC'(CPC'+R)^{-1}CPA' + Q)‖_F`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let apc = a * p * c.transpose();
    let sigma = c * p * c.transpose() + r;
    let Some(sigma_inv) = sigma.try_inverse() else {
        return f64::INFINITY;
    };
    let rhs = a * p * a.transpose() - &apc * sigma_inv * apc.transpose() + q;
    (p - rhs).norm()
}

/// Stabilizing solution of the filter Riccati equation
/// `P = APA' - APC'(CPC'+R)^{-1}CPA' + Q` by structure-preserving doubling.
pub fn solve_dare(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || c.ncols() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::InvalidArgument(format!(
            "inconsistent Riccati data: A {:?}, C {:?}, Q {:?}, R {:?}",
            a.shape(),
            c.shape(),
            q.shape(),
            r.shape()
        )));
    }
    if ![a, c, q, r].iter().all(|x| all_finite(x)) {
        return Err(Error::InvalidArgument("non-finite Riccati data".into()));
    }
    check_symmetric(q, "Q")?;
    check_symmetric(r, "R")?;
    if symmetrize(q).symmetric_eigenvalues().min() < -1e-12 * (1.0 + q.amax()) {
        return Err(Error::InvalidArgument("Q is not positive semidefinite".into()));
    }
    let r_chol = symmetrize(r)
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("R is not positive definite".into()))?;

    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.transpose();
    let mut gk = c.transpose() * r_chol.solve(c);
    let mut hk = symmetrize(q);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < DARE_MAX_DOUBLINGS {
        iterations += 1;
        let w = &eye + &gk * &hk;
        let w_a = solve(&w, &ak, "doubling step")
            .map_err(|_| Error::DareFailure { iterations, residual: f64::NAN })?;
        let w_g = solve(&w, &gk, "doubling step")
            .map_err(|_| Error::DareFailure { iterations, residual: f64::NAN })?;
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w_a));
        let g_next = symmetrize(&(&gk + &ak * w_g * ak.transpose()));
        let a_next = &ak * w_a;
        let step = (&h_next - &hk).norm();
        let scale = hk.norm();
        hk = h_next;
        gk = g_next;
        ak = a_next;
        if !all_finite(&hk) {
            break;
        }
        if step <= DARE_STEP_TOL * scale {
            converged = true;
            break;
        }
    }
    let p = hk;
    let residual = dare_residual(a, c, q, r, &p);
    if !converged || !(residual <= DARE_RESIDUAL_TOL * (1.0 + p.norm())) {
        return Err(Error::DareFailure {
            iterations,
            residual,
        });
    }
    Ok(p)
}

/// `Σ = CPC' + R`, `K = APC'Σ^{-1}`; fails unless `A - KC` is stable.
pub fn kalman_gain(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    p: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sigma = c * p * c.transpose() + r;
    let sigma_inv = inverse(&sigma, "innovation covariance")?;
    let k = a * p * c.transpose() * sigma_inv;
    let rho = spectral_radius(&(a - &k * c));
    if rho >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "A - KC is not stable (spectral radius {rho})"
        )));
    }
    Ok((k, sigma))
}

/// Steady-state Kalman filter design for `w ~ (0, Q)`, `v ~ (0, R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanDesign {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl KalmanDesign {
    pub fn new(dss: &DiscreteStateSpace, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let p = solve_dare(dss.a(), dss.c(), &q, &r)?;
        let (k, sigma) = kalman_gain(dss.a(), dss.c(), &p, &r)?;
        Ok(Self { q, r, p, k, sigma })
    }

    /// Design with `Q = q² I`, `R = r² I` from noise standard deviations.
    pub fn from_std_devs(dss: &DiscreteStateSpace, q_std: f64, r_std: f64) -> Result<Self> {
        let n = dss.n_states();
        let m = dss.n_outputs();
        Self::new(
            dss,
            DMatrix::identity(n, n) * (q_std * q_std),
            DMatrix::identity(m, m) * (r_std * r_std),
        )
    }

    pub fn gain(&self, dss: &DiscreteStateSpace) -> Result<ObserverGain> {
        ObserverGain::new(dss, self.k.clone())
    }
}

/// Kalman-filter transform: Riccati solve, gain, then the observer route.
pub fn ss_to_arx_kf(
    dss: &DiscreteStateSpace,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    trunc_tol: f64,
    max_order: usize,
) -> Result<ArxModel> {
    let design = KalmanDesign::new(dss, q.clone(), r.clone())?;
    ss_to_arx_ot(dss, &design.gain(dss)?, trunc_tol, max_order)
}
