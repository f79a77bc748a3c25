//! Small dense helpers shared by the model, transform and MPC modules.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Numerical rank from the singular values, relative to the largest one.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Ratio of smallest to largest singular value (0 for singular matrices).
pub fn inverse_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .filter(all_finite)
        .ok_or_else(|| Error::InvalidArgument(format!("{what} is singular")))
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .filter(all_finite)
        .ok_or_else(|| Error::InvalidArgument(format!("{what} is singular")))
}

/// Observability matrix [C; CA; ...; CA^{n-1}].
pub fn observability(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = c.nrows();
    let mut obs = DMatrix::zeros(m * n, n);
    let mut block = c.clone();
    for i in 0..n {
        obs.view_mut((i * m, 0), (m, n)).copy_from(&block);
        block = &block * a;
    }
    obs
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Round to nine significant digits. Used for every number written to disk.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}
