//! Browser bindings for the AFTI-16 demo page.
//!
//! Each exported function takes plain numbers and strings and returns a JSON
//! string; the `*_json` twins do the work and are what the native tests call.

use arxmpc::transforms::truncation_order;
use arxmpc::{
    afti16, char_poly, discretize_exact, place_observer_poles, run_closed_loop, ss_to_arx_ch,
    ss_to_arx_with_gain, ControllerKind, DiscreteStateSpace, KalmanDesign, NoiseSpec,
    ObserverGain, Scenario, DEFAULT_MAX_ORDER,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MARKOV_LAGS: usize = 30;
const MAX_STEPS: usize = 1000;

fn parse_poles(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("bad pole '{s}': {e}")))
        .collect()
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ModelView {
    dt: f64,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    /// Characteristic polynomial coefficients `c_1..c_n`.
    char_poly: Vec<f64>,
    /// Moduli of the open-loop eigenvalues.
    pole_moduli: Vec<f64>,
}

pub fn discretize_json(dt: f64) -> Result<String, String> {
    let dss = discretize_exact(&afti16::continuous_model(), dt).map_err(|e| e.to_string())?;
    let cp = char_poly(dss.a()).map_err(|e| e.to_string())?;
    let mut moduli: Vec<f64> = dss.a().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    to_json(&ModelView {
        dt,
        a: rows(dss.a()),
        b: rows(dss.b()),
        char_poly: cp.as_slice().to_vec(),
        pole_moduli: moduli,
    })
}

#[derive(Serialize)]
struct TransformView {
    method: String,
    order: usize,
    truncation_norm: f64,
    /// `‖(A-LC)^k‖_F / ‖A-LC‖_F` for `k = 1..=len`; empty for `ch`.
    decay: Vec<f64>,
    /// Largest Markov-parameter error of the ARX model, relative to the
    /// plant's Markov parameter at the same lag.
    markov_error: f64,
    a_bar: Vec<Vec<Vec<f64>>>,
    b_bar: Vec<Vec<Vec<f64>>>,
}

fn gain_for(
    dss: &DiscreteStateSpace,
    method: &str,
    poles: &str,
    q: f64,
    r: f64,
) -> Result<Option<ObserverGain>, String> {
    let gain = match method {
        "ch" => return Ok(None),
        "ot" => place_observer_poles(dss, &parse_poles(poles)?),
        "kf" => KalmanDesign::from_std_devs(dss, q, r).and_then(|d| d.gain(dss)),
        other => return Err(format!("unknown method '{other}'")),
    };
    gain.map(Some).map_err(|e| e.to_string())
}

/// `order == 0` selects the order from `tol`.
pub fn transform_json(method: &str, poles: &str, q: f64, r: f64, tol: f64, order: usize) -> Result<String, String> {
    let dss = afti16::discrete_model();
    let (arx, truncation_norm, decay) = match gain_for(&dss, method, poles, q, r)? {
        None => (ss_to_arx_ch(&dss).map_err(|e| e.to_string())?, 0.0, Vec::new()),
        Some(gain) => {
            let acl = gain.error_dynamics(&dss);
            let base = acl.norm();
            let (k, ratio) = if order > 0 {
                (order, acl.pow(order as u32).norm() / base)
            } else {
                truncation_order(&acl, tol, DEFAULT_MAX_ORDER).map_err(|e| e.to_string())?
            };
            let mut decay = Vec::new();
            let mut pow = acl.clone();
            for _ in 0..k.max(12) {
                decay.push(pow.norm() / base);
                pow = &pow * &acl;
            }
            (ss_to_arx_with_gain(&dss, &gain, k).map_err(|e| e.to_string())?, ratio, decay)
        }
    };
    let markov_error = dss
        .markov_parameters(MARKOV_LAGS)
        .iter()
        .zip(arx.markov_parameters(MARKOV_LAGS))
        .map(|(a, b)| (a - &b).amax() / a.amax().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    to_json(&TransformView {
        method: method.to_string(),
        order: arx.order(),
        truncation_norm,
        decay,
        markov_error,
        a_bar: arx.a_bar().iter().map(rows).collect(),
        b_bar: arx.b_bar().iter().map(rows).collect(),
    })
}

#[derive(Serialize)]
struct SimView {
    controller: String,
    arx_order: Option<usize>,
    steps_completed: usize,
    diverged: bool,
    avg_tracking_cost: f64,
    unsolved_steps: usize,
    y1: Vec<f64>,
    y2: Vec<f64>,
    r2: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

/// Pitch step of 10 deg that falls back to zero halfway through.
pub fn simulate_json(controller: &str, poles: &str, q: f64, r: f64, seed: u64, steps: usize) -> Result<String, String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}"));
    }
    let kind = ControllerKind::parse(controller).map_err(|e| e.to_string())?;
    let cfg = afti16::mpc_config();
    let reference = afti16::pitch_step_reference(10.0, steps / 2, steps + cfg.horizon);
    let noise = NoiseSpec::new(q, r, seed).map_err(|e| e.to_string())?;
    let mut scenario = Scenario::new(afti16::discrete_model(), kind, cfg, reference, steps, noise);
    scenario.params.poles = parse_poles(poles)?;
    if kind == ControllerKind::ArxKf {
        // The Kalman error dynamics of this plant decay slowly; cap the order.
        scenario.params.fixed_order = Some(30);
    }
    let res = run_closed_loop(&scenario).map_err(|e| e.to_string())?;
    let col = |v: &[nalgebra::DVector<f64>], i: usize| v.iter().map(|x| x[i]).collect::<Vec<_>>();
    to_json(&SimView {
        controller: kind.as_str().to_string(),
        arx_order: res.arx_order,
        steps_completed: res.len(),
        diverged: res.diverged,
        avg_tracking_cost: res.avg_tracking_cost,
        unsolved_steps: res.len() - res.count_status(arxmpc::QpStatus::Solved),
        y1: col(&res.y_traj, 0),
        y2: col(&res.y_traj, 1),
        r2: col(&res.r_traj, 1),
        u1: col(&res.u_traj, 0),
        u2: col(&res.u_traj, 1),
    })
}

#[wasm_bindgen]
pub fn discretize(dt: f64) -> Result<String, JsError> {
    discretize_json(dt).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn transform(method: &str, poles: &str, q: f64, r: f64, tol: f64, order: usize) -> Result<String, JsError> {
    transform_json(method, poles, q, r, tol, order).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(controller: &str, poles: &str, q: f64, r: f64, seed: u32, steps: usize) -> Result<String, JsError> {
    simulate_json(controller, poles, q, r, u64::from(seed), steps).map_err(|e| JsError::new(&e))
}
