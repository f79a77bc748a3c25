//! Linearized AFTI-16 aircraft benchmark: two inputs (elevator, flaperon),
//! two outputs (attack angle, pitch angle), four states.
//!
//! The discrete model is always produced by exact discretization of the
//! continuous one. Printed tables of the discrete model in the literature
//! carry typos (A(1,1) listed as 0.0093 instead of ~0.9993, B(2,2) listed
//! as "-00143"), so they are not used as data.

use nalgebra::{dmatrix, DVector};

use crate::model::{discretize_exact, ContinuousStateSpace, DiscreteStateSpace};
use crate::mpc::{MpcConfig, ReferenceSignal};

pub const SAMPLE_TIME: f64 = 0.05;

/// Observer poles of the faster ARX-OT variant.
pub const POLES_OT1: [f64; 4] = [0.01, 0.02, 0.03, 0.04];
/// Observer poles of the slower, more noise-robust ARX-OT variant.
pub const POLES_OT2: [f64; 4] = [0.04, 0.08, 0.12, 0.16];

pub fn continuous_model() -> ContinuousStateSpace {
    let a = dmatrix![
        -0.0151, -60.5651, 0.0, -32.174;
        -0.0001, -1.3411, 0.9929, 0.0;
        0.00018, 43.2541, -0.86939, 0.0;
        0.0, 0.0, 1.0, 0.0
    ];
    let b = dmatrix![
        -2.516, -13.136;
        -0.1689, -0.2514;
        -17.251, -1.5766;
        0.0, 0.0
    ];
    let c = dmatrix![
        0.0, 1.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 1.0
    ];
    ContinuousStateSpace::new(a, b, c).expect("benchmark model is well formed")
}

pub fn discrete_model() -> DiscreteStateSpace {
    discretize_exact(&continuous_model(), SAMPLE_TIME).expect("benchmark model discretizes")
}

/// Horizon 10, `W_y = diag(10, 10)`, `W_Δu = diag(0.1, 0.1)`, `|u_i| <= 25`,
/// `|y_1| <= 0.5`, `|y_2| <= 100`, no rate limits.
pub fn mpc_config() -> MpcConfig {
    MpcConfig::new(
        10,
        DVector::from_vec(vec![10.0, 10.0]),
        DVector::from_vec(vec![0.1, 0.1]),
        (DVector::from_vec(vec![-0.5, -100.0]), DVector::from_vec(vec![0.5, 100.0])),
        (DVector::from_element(2, -25.0), DVector::from_element(2, 25.0)),
        MpcConfig::unbounded(2),
    )
    .expect("benchmark config is consistent")
}

/// Pitch reference: `r_2 = 10` deg for the first `fall_at` steps, then 0;
/// `r_1 = 0` throughout.
pub fn pitch_step_reference(level: f64, fall_at: usize, len: usize) -> ReferenceSignal {
    let r = (0..len)
        .map(|t| DVector::from_vec(vec![0.0, if t < fall_at { level } else { 0.0 }]))
        .collect();
    ReferenceSignal::new(r).expect("finite reference")
}

/// The shipped 200-step scenario reference, padded by the horizon.
pub fn default_reference() -> ReferenceSignal {
    pitch_step_reference(10.0, 100, 200 + 10)
}

pub fn initial_state() -> DVector<f64> {
    DVector::zeros(4)
}

#[cfg(test)]
pub(crate) fn printed_ch_output_coefficients() -> [f64; 4] {
    [3.9944, -5.8834, 3.7837, -0.8947]
}

#[cfg(test)]
pub(crate) fn printed_ch_input_coefficients() -> [nalgebra::DMatrix<f64>; 4] {
    [
        dmatrix![-0.0291, -0.0143; -0.0216, -0.0022],
        dmatrix![0.0461, 0.0386; 0.0199, 0.0012],
        dmatrix![-0.0049, -0.0343; 0.0213, 0.0026],
        dmatrix![-0.0121, 0.0100; -0.0196, -0.0016],
    ]
}
