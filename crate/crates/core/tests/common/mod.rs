#![allow(dead_code)]

use arxmpc::mpc::UNBOUNDED;
use arxmpc::{DiscreteStateSpace, QpProblem};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
}

/// Random system with spectral radius scaled to `radius`.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, q: usize, radius: f64) -> DiscreteStateSpace {
    let mut a = random_matrix(rng, n, n, 1.0);
    let rho = arxmpc::linalg::spectral_radius(&a);
    if rho > 1e-9 {
        a *= radius / rho;
    }
    DiscreteStateSpace::new(a, random_matrix(rng, n, q, 1.0), random_matrix(rng, m, n, 1.0), 1.0)
        .unwrap()
}

/// `n` distinct poles from a grid on (-0.9, 0.9) with spacing 0.1.
pub fn random_poles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..19).map(|i| -0.9 + 0.1 * i as f64).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..grid.len());
        out.push(grid.swap_remove(k));
    }
    out
}

/// Largest distance from each requested pole to its nearest eigenvalue,
/// after greedy matching.
pub fn pole_error(m: &DMatrix<f64>, poles: &[f64]) -> f64 {
    let mut eig: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    let mut worst: f64 = 0.0;
    for &p in poles {
        let (k, d) = eig
            .iter()
            .enumerate()
            .map(|(k, z)| (k, (z - Complex::new(p, 0.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(d);
        eig.swap_remove(k);
    }
    worst
}

/// Random strictly convex QP that is feasible by construction. Some bounds
/// are one-sided and some rows are equalities.
pub fn random_qp(rng: &mut ChaCha8Rng, nv: usize, nc: usize) -> QpProblem {
    let m = random_matrix(rng, nv, nv, 1.0);
    let h = &m * m.transpose() + DMatrix::identity(nv, nv) * 0.1;
    let h = (&h + h.transpose()) * 0.5;
    let g = DVector::from_fn(nv, |_, _| 4.0 * (rng.random::<f64>() * 2.0 - 1.0));
    let a = random_matrix(rng, nc, nv, 1.0);
    let z0 = DVector::from_fn(nv, |_, _| rng.random::<f64>() - 0.5);
    let az = &a * z0;
    let mut lo = DVector::zeros(nc);
    let mut hi = DVector::zeros(nc);
    for i in 0..nc {
        let kind = rng.random_range(0..10);
        let below = rng.random::<f64>() * 0.5;
        let above = rng.random::<f64>() * 0.5;
        (lo[i], hi[i]) = match kind {
            0 => (az[i], az[i]),
            1 => (-UNBOUNDED, az[i] + above),
            2 => (az[i] - below, UNBOUNDED),
            _ => (az[i] - below, az[i] + above),
        };
    }
    QpProblem::new(h, g, a, lo, hi).unwrap()
}

/// Exact minimiser by enumerating every assignment of each constraint to
/// {inactive, at lower, at upper}, solving the equality-constrained KKT
/// system and keeping the feasible candidate of least objective.
pub fn enumerate_qp(qp: &QpProblem) -> DVector<f64> {
    let nv = qp.n_vars();
    let nc = qp.n_constraints();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let total = 3usize.pow(nc as u32);
    for code in 0..total {
        let mut rows = Vec::new();
        let mut rhs_b = Vec::new();
        let mut c = code;
        let mut valid = true;
        for i in 0..nc {
            let choice = c % 3;
            c /= 3;
            match choice {
                1 if qp.lo[i] > -UNBOUNDED => {
                    rows.push(i);
                    rhs_b.push(qp.lo[i]);
                }
                2 if qp.hi[i] < UNBOUNDED => {
                    // An equality row is covered by choice 1.
                    if qp.lo[i] == qp.hi[i] {
                        valid = false;
                    }
                    rows.push(i);
                    rhs_b.push(qp.hi[i]);
                }
                0 => {}
                _ => valid = false,
            }
        }
        if !valid || rows.len() > nv {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(nv + k, nv + k);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&qp.h);
        let mut rhs = DVector::zeros(nv + k);
        rhs.rows_mut(0, nv).copy_from(&(-&qp.g));
        for (j, &i) in rows.iter().enumerate() {
            let row = qp.constraints.row(i);
            kkt.view_mut((nv + j, 0), (1, nv)).copy_from(&row);
            kkt.view_mut((0, nv + j), (nv, 1)).copy_from(&row.transpose());
            rhs[nv + j] = rhs_b[j];
        }
        let Some(sol) = kkt.full_piv_lu().solve(&rhs) else {
            continue;
        };
        let z = sol.rows(0, nv).into_owned();
        if qp.violation(&z) > 1e-9 {
            continue;
        }
        let f = qp.objective(&z);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, z));
        }
    }
    best.expect("feasible by construction").1
}
