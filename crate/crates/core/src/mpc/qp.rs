//! Dense convex QP solver for `min ½ z'Hz + g'z  s.t.  lo <= Gz <= hi`.
//!
//! Operator splitting (ADMM) in the form popularised by OSQP, followed by an
//! active-set polish: the active constraints guessed from the ADMM iterate
//! define an equality-constrained KKT system whose solution is accepted
//! only if it passes the full optimality check.

use nalgebra::{DMatrix, DVector};

use super::UNBOUNDED;
use crate::linalg::{all_finite, inf_norm};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        constraints: DMatrix<f64>,
        lo: DVector<f64>,
        hi: DVector<f64>,
    ) -> Result<Self> {
        let qp = Self {
            h,
            g,
            constraints,
            lo,
            hi,
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n_vars(&self) -> usize {
        self.g.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.lo.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// Largest bound violation of `Gz`.
    pub fn violation(&self, z: &DVector<f64>) -> f64 {
        let gz = &self.constraints * z;
        gz.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.g.len();
        let nc = self.lo.len();
        if self.h.shape() != (nv, nv)
            || self.constraints.shape() != (nc, nv)
            || self.hi.len() != nc
        {
            return Err(Error::InvalidArgument(format!(
                "QP shapes disagree: H {:?}, g {}, G {:?}, lo {}, hi {}",
                self.h.shape(),
                nv,
                self.constraints.shape(),
                nc,
                self.hi.len()
            )));
        }
        if !(all_finite(&self.h)
            && all_finite(&self.constraints)
            && self.g.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite QP data".into()));
        }
        if self.lo.iter().chain(self.hi.iter()).any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN constraint bound".into()));
        }
        if self.lo.iter().zip(self.hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument("lower bound exceeds upper bound".into()));
        }
        let scale = 1.0 + self.h.amax();
        if (&self.h - self.h.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidArgument("Hessian is not symmetric".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub max_iter: usize,
    pub check_every: usize,
    pub polish: bool,
    /// Ruiz equilibration passes (0 disables scaling).
    pub scaling_passes: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_infeasible: 1e-6,
            max_iter: 20_000,
            check_every: 10,
            polish: true,
            scaling_passes: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Solved => "solved",
            QpStatus::MaxIterations => "max_iterations",
            QpStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Constraint multipliers; positive on active upper bounds.
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

pub fn solve_qp(qp: &QpProblem, warm_start: Option<&DVector<f64>>) -> Result<QpSolution> {
    solve_qp_with(qp, &QpSettings::default(), warm_start)
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

fn is_lower_finite(v: f64) -> bool {
    v > -UNBOUNDED * 0.1
}

fn is_upper_finite(v: f64) -> bool {
    v < UNBOUNDED * 0.1
}

struct Residuals {
    primal: f64,
    dual: f64,
    eps_primal: f64,
    eps_dual: f64,
    primal_scale: f64,
    dual_scale: f64,
}

impl Residuals {
    fn converged(&self) -> bool {
        self.primal <= self.eps_primal && self.dual <= self.eps_dual
    }

    /// Close enough that the active set is worth a polish attempt.
    fn near(&self) -> bool {
        self.primal <= 1e-4 * (1.0 + self.primal_scale) && self.dual <= 1e-4 * (1.0 + self.dual_scale)
    }
}

fn residuals(
    qp: &QpProblem,
    s: &QpSettings,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> Residuals {
    let ax = &qp.constraints * x;
    let hx = &qp.h * x;
    let aty = qp.constraints.tr_mul(y);
    let primal = if ax.is_empty() { 0.0 } else { inf_norm(&(&ax - z)) };
    let dual = inf_norm(&(&hx + &qp.g + &aty));
    let prim_scale = if ax.is_empty() {
        0.0
    } else {
        inf_norm(&ax).max(inf_norm(z))
    };
    let dual_scale = inf_norm(&hx).max(inf_norm(&aty)).max(inf_norm(&qp.g));
    Residuals {
        primal,
        dual,
        eps_primal: s.eps_abs + s.eps_rel * prim_scale,
        eps_dual: s.eps_abs + s.eps_rel * dual_scale,
        primal_scale: prim_scale,
        dual_scale,
    }
}

/// Ruiz equilibration: `H̃ = c D H D`, `g̃ = c D g`, `G̃ = E G D`,
/// bounds scaled by `E`. Unscaling: `z = D z̃`, `y = E ỹ / c`.
struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

impl Scaling {
    fn compute(qp: &QpProblem, passes: usize) -> (QpProblem, Self) {
        let nv = qp.n_vars();
        let nc = qp.n_constraints();
        let mut h = qp.h.clone();
        let mut g = qp.g.clone();
        let mut a = qp.constraints.clone();
        let mut d = DVector::from_element(nv, 1.0);
        let mut e = DVector::from_element(nc, 1.0);
        let inv_sqrt = |n: f64| if n < 1e-4 { 1.0 } else { 1.0 / n.min(1e4).sqrt() };
        for _ in 0..passes {
            let dd = DVector::from_fn(nv, |j, _| {
                let hcol = h.column(j).amax();
                let acol = if nc > 0 { a.column(j).amax() } else { 0.0 };
                inv_sqrt(hcol.max(acol))
            });
            let de = DVector::from_fn(nc, |i, _| inv_sqrt(a.row(i).amax()));
            for j in 0..nv {
                for i in 0..nv {
                    h[(i, j)] *= dd[i] * dd[j];
                }
                for i in 0..nc {
                    a[(i, j)] *= de[i] * dd[j];
                }
            }
            g.component_mul_assign(&dd);
            d.component_mul_assign(&dd);
            e.component_mul_assign(&de);
        }
        let mean_col = (0..nv).map(|j| h.column(j).amax()).sum::<f64>() / nv.max(1) as f64;
        let cost = mean_col.max(g.amax());
        let c = if cost < 1e-4 { 1.0 } else { 1.0 / cost.min(1e4) };
        h *= c;
        g *= c;
        let scale_bound = |v: f64, ei: f64| {
            if is_lower_finite(v) && is_upper_finite(v) {
                v * ei
            } else {
                v
            }
        };
        let lo = DVector::from_fn(nc, |i, _| scale_bound(qp.lo[i], e[i]));
        let hi = DVector::from_fn(nc, |i, _| scale_bound(qp.hi[i], e[i]));
        let scaled = QpProblem {
            h: crate::linalg::symmetrize(&h),
            g,
            constraints: a,
            lo,
            hi,
        };
        (scaled, Self { d, e, c })
    }

    fn unscale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.d)
    }

    fn scale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.d)
    }

    fn unscale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.e) / self.c
    }
}

pub fn solve_qp_with(
    qp: &QpProblem,
    s: &QpSettings,
    warm_start: Option<&DVector<f64>>,
) -> Result<QpSolution> {
    qp.validate()?;
    if qp.h.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("Hessian is not positive definite".into()));
    }
    let nv = qp.n_vars();
    let nc = qp.n_constraints();
    let (sc_qp, scaling) = Scaling::compute(qp, s.scaling_passes);
    let a = &sc_qp.constraints;

    // Equality rows get a stiffer penalty, rows without finite bounds a
    // negligible one.
    let row_scale: Vec<f64> = (0..nc)
        .map(|i| {
            let (lo, hi) = (qp.lo[i], qp.hi[i]);
            if lo == hi {
                1e3
            } else if !is_lower_finite(lo) && !is_upper_finite(hi) {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let mut rho_bar = s.rho;
    let make_rho = |rho_bar: f64| {
        DVector::from_fn(nc, |i, _| {
            if row_scale[i] == 0.0 {
                RHO_MIN
            } else {
                (row_scale[i] * rho_bar).clamp(RHO_MIN, RHO_MAX)
            }
        })
    };
    let factor = |rho: &DVector<f64>| {
        let mut kkt = &sc_qp.h + DMatrix::identity(nv, nv) * s.sigma;
        kkt += a.transpose() * DMatrix::from_diagonal(rho) * a;
        kkt.cholesky()
            .ok_or_else(|| Error::InvalidArgument("ADMM system is not positive definite".into()))
    };
    let mut rho = make_rho(rho_bar);
    let mut chol = factor(&rho)?;

    let mut x = match warm_start {
        Some(z0) if z0.len() == nv => scaling.scale_x(z0),
        Some(z0) => {
            return Err(Error::InvalidArgument(format!(
                "warm start has {} entries, expected {nv}",
                z0.len()
            )))
        }
        None => DVector::zeros(nv),
    };
    let mut z = clip(&(a * &x), &sc_qp.lo, &sc_qp.hi);
    let mut y = DVector::zeros(nc);
    let mut last_active: Option<Vec<i8>> = None;

    for iter in 1..=s.max_iter {
        let y_prev = y.clone();
        let rhs = &x * s.sigma - &sc_qp.g + a.tr_mul(&(rho.component_mul(&z) - &y));
        let x_tilde = chol.solve(&rhs);
        let z_tilde = a * &x_tilde;
        x = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
        let z_relax = &z_tilde * s.alpha + &z * (1.0 - s.alpha);
        let z_new = clip(&(&z_relax + y.component_div(&rho)), &sc_qp.lo, &sc_qp.hi);
        y += rho.component_mul(&(&z_relax - &z_new));
        z = z_new;

        if iter % s.check_every != 0 && iter != s.max_iter {
            continue;
        }
        let x_un = scaling.unscale_x(&x);
        let y_un = scaling.unscale_y(&y);
        let z_un = clip(&(&qp.constraints * &x_un), &qp.lo, &qp.hi);
        let res = residuals(qp, s, &x_un, &z_un, &y_un);
        let converged = res.converged();

        if s.polish && (res.near() || converged) {
            let active = active_set(&sc_qp, &z, &y);
            if last_active.as_ref() != Some(&active) || converged {
                if let Some(sol) = polish(qp, s, &active, iter) {
                    return Ok(sol);
                }
                last_active = Some(active);
            }
        }
        if converged {
            return Ok(QpSolution {
                z: x_un,
                y: y_un,
                status: QpStatus::Solved,
                iterations: iter,
                polished: false,
                primal_residual: res.primal,
                dual_residual: res.dual,
            });
        }
        let dy = scaling.unscale_y(&(&y - &y_prev));
        if res.primal > res.eps_primal && certifies_infeasibility(qp, s, &dy) {
            return Ok(QpSolution {
                z: x_un,
                y: y_un,
                status: QpStatus::Infeasible,
                iterations: iter,
                polished: false,
                primal_residual: res.primal,
                dual_residual: res.dual,
            });
        }
        // Rebalance primal and dual progress in the scaled problem.
        let sres = residuals(&sc_qp, s, &x, &z, &y);
        let ratio = (sres.primal / (sres.primal_scale + 1e-30))
            / (sres.dual / (sres.dual_scale + 1e-30) + 1e-30);
        let candidate = (rho_bar * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
        if candidate.is_finite() && (candidate > 5.0 * rho_bar || candidate < 0.2 * rho_bar) {
            rho_bar = candidate;
            rho = make_rho(rho_bar);
            chol = factor(&rho)?;
        }
    }
    let x_un = scaling.unscale_x(&x);
    let y_un = scaling.unscale_y(&y);
    let z_un = clip(&(&qp.constraints * &x_un), &qp.lo, &qp.hi);
    let res = residuals(qp, s, &x_un, &z_un, &y_un);
    Ok(QpSolution {
        z: x_un,
        y: y_un,
        status: QpStatus::MaxIterations,
        iterations: s.max_iter,
        polished: false,
        primal_residual: res.primal,
        dual_residual: res.dual,
    })
}

fn clip(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].max(lo[i]).min(hi[i]))
}

/// -1 lower active, +1 upper active, 0 inactive.
fn active_set(qp: &QpProblem, z: &DVector<f64>, y: &DVector<f64>) -> Vec<i8> {
    (0..qp.n_constraints())
        .map(|i| {
            let (lo, hi) = (qp.lo[i], qp.hi[i]);
            if is_lower_finite(lo) && z[i] - lo < -y[i] {
                -1
            } else if is_upper_finite(hi) && hi - z[i] < y[i] {
                1
            } else {
                0
            }
        })
        .collect()
}

fn polish(qp: &QpProblem, s: &QpSettings, active: &[i8], iter: usize) -> Option<QpSolution> {
    let nv = qp.n_vars();
    let rows: Vec<usize> = (0..active.len()).filter(|&i| active[i] != 0).collect();
    let na = rows.len();
    if na > nv {
        return None;
    }
    let dim = nv + na;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&qp.h);
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, nv).copy_from(&(-&qp.g));
    for (k, &i) in rows.iter().enumerate() {
        let row = qp.constraints.row(i);
        kkt.view_mut((nv + k, 0), (1, nv)).copy_from(&row);
        kkt.view_mut((0, nv + k), (nv, 1)).copy_from(&row.transpose());
        rhs[nv + k] = if active[i] < 0 { qp.lo[i] } else { qp.hi[i] };
    }
    // Quasi-definite regularization, then refinement against the exact system.
    let delta = 1e-10 * (1.0 + qp.h.amax());
    let mut reg = kkt.clone();
    for i in 0..dim {
        reg[(i, i)] += if i < nv { delta } else { -delta };
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &kkt * &sol;
        sol += lu.solve(&r)?;
    }
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, nv).into_owned();
    let mut y = DVector::zeros(qp.n_constraints());
    for (k, &i) in rows.iter().enumerate() {
        y[i] = sol[nv + k];
    }
    // Dual sign check on the active rows.
    let y_scale = 1.0 + inf_norm(&y);
    for &i in &rows {
        let sign_ok = if qp.lo[i] == qp.hi[i] {
            true
        } else if active[i] > 0 {
            y[i] >= -s.eps_rel * y_scale
        } else {
            y[i] <= s.eps_rel * y_scale
        };
        if !sign_ok {
            return None;
        }
    }
    let z = clip(&(&qp.constraints * &x), &qp.lo, &qp.hi);
    let res = residuals(qp, s, &x, &z, &y);
    if !res.converged() {
        return None;
    }
    Some(QpSolution {
        z: x,
        y,
        status: QpStatus::Solved,
        iterations: iter,
        polished: true,
        primal_residual: res.primal,
        dual_residual: res.dual,
    })
}

fn certifies_infeasibility(qp: &QpProblem, s: &QpSettings, dy: &DVector<f64>) -> bool {
    // Project onto the polar of the recession cone of [lo, hi].
    let dy = DVector::from_fn(dy.len(), |i, _| {
        let mut v = dy[i];
        if !is_upper_finite(qp.hi[i]) {
            v = v.min(0.0);
        }
        if !is_lower_finite(qp.lo[i]) {
            v = v.max(0.0);
        }
        v
    });
    let norm = inf_norm(&dy);
    if norm <= s.eps_infeasible {
        return false;
    }
    let aty = qp.constraints.tr_mul(&dy);
    if inf_norm(&aty) > s.eps_infeasible * norm {
        return false;
    }
    let support: f64 = (0..dy.len())
        .map(|i| {
            if dy[i] > 0.0 {
                qp.hi[i] * dy[i]
            } else if dy[i] < 0.0 {
                qp.lo[i] * dy[i]
            } else {
                0.0
            }
        })
        .sum();
    support < -s.eps_infeasible * norm
}
