use arxmpc_web::{discretize_json, simulate_json, transform_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn discretize_reports_unstable_open_loop() {
    let v = parse(&discretize_json(0.05).unwrap());
    assert_eq!(floats(&v["char_poly"]).len(), 4);
    let moduli = floats(&v["pole_moduli"]);
    assert!(moduli[0] > 1.0);
    assert!(moduli.windows(2).all(|w| w[0] >= w[1]));
    assert!(discretize_json(-1.0).is_err());
}

#[test]
fn transform_matches_expected_orders() {
    let ch = parse(&transform_json("ch", "", 0.0, 0.0, 5e-4, 0).unwrap());
    assert_eq!(ch["order"], 4);
    assert!(ch["markov_error"].as_f64().unwrap() < 1e-8);
    assert!(floats(&ch["decay"]).is_empty());

    let ot = parse(&transform_json("ot", "0.04, 0.08, 0.12, 0.16", 0.0, 0.0, 5e-4, 0).unwrap());
    assert_eq!(ot["order"], 6);
    let decay = floats(&ot["decay"]);
    assert_eq!(decay.len(), 12);
    assert!((decay[0] - 1.0).abs() < 1e-12);
    assert!(decay[5] <= 5e-4 && decay[4] > 5e-4);

    let kf = parse(&transform_json("kf", "", 0.05, 0.05, 5e-4, 8).unwrap());
    assert_eq!(kf["order"], 8);
    assert_eq!(kf["a_bar"].as_array().unwrap().len(), 8);
}

#[test]
fn transform_errors_are_messages() {
    assert!(transform_json("xyz", "", 0.0, 0.0, 5e-4, 0).is_err());
    assert!(transform_json("ot", "0.1,abc", 0.0, 0.0, 5e-4, 0).is_err());
    assert!(transform_json("kf", "", 0.05, 0.05, 5e-4, 0).unwrap_err().contains("order"));
}

#[test]
fn simulate_noise_free_ch_and_ss_agree() {
    let ss = parse(&simulate_json("ss-kf", "", 0.0, 0.0, 0, 60).unwrap());
    let ch = parse(&simulate_json("arx-ch", "", 0.0, 0.0, 0, 60).unwrap());
    assert_eq!(ss["steps_completed"], 60);
    let (a, b) = (floats(&ss["y2"]), floats(&ch["y2"]));
    assert_eq!(a.len(), 60);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-6));
    assert!(floats(&ss["u1"]).iter().all(|u| u.abs() <= 25.0 + 1e-9));
    assert_eq!(floats(&ss["r2"])[0], 10.0);
}

#[test]
fn simulate_rejects_bad_input() {
    assert!(simulate_json("pid", "", 0.0, 0.0, 0, 10).is_err());
    assert!(simulate_json("ss-kf", "", -1.0, 0.0, 0, 10).is_err());
    assert!(simulate_json("ss-kf", "", 0.0, 0.0, 0, 0).is_err());
    assert!(simulate_json("arx-ot", "", 0.0, 0.0, 0, 10).is_err());
}
