//! `arxmpc` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arxmpc::files::{
    comparison_json, load_scenario, read_model, to_json_pretty, trajectory_csv, ArxFile,
    LoadedModel, ModelFile, SimSummary,
};
use arxmpc::transforms::truncation_order;
use arxmpc::{
    compare_controllers, discretize_exact, place_observer_poles, run_closed_loop, ss_to_arx_ch,
    ss_to_arx_with_gain, KalmanDesign, DEFAULT_MAX_ORDER, DEFAULT_TRUNC_TOL,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "arxmpc", version, about = "State-space to ARX transformations and MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ch,
    Ot,
    Kf,
}

#[derive(Subcommand)]
enum Command {
    /// Exact zero-order-hold discretization of a continuous model file.
    Discretize {
        #[arg(long)]
        model: PathBuf,
        /// Sample time; defaults to the file's `dt`.
        #[arg(long, allow_negative_numbers = true)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a state-space model into an ARX model.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Observer poles for `ot`, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        poles: Option<Vec<f64>>,
        /// Process-noise std-dev for `kf` (Q = q² I).
        #[arg(long)]
        q: Option<f64>,
        /// Measurement-noise std-dev for `kf` (R = r² I).
        #[arg(long)]
        r: Option<f64>,
        /// Relative truncation tolerance on ‖(A-LC)^k‖_F.
        #[arg(long, default_value_t = DEFAULT_TRUNC_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
        max_order: usize,
        /// Fixed ARX order, skipping the truncation rule.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one closed-loop scenario; writes trajectory.csv and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run several scenarios over a list of seeds and rank the controllers.
    Compare {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Seeds, e.g. `1,2,7` or `1-20`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|e| format!("bad seed '{a}': {e}"))?;
                let b: u64 = b.trim().parse().map_err(|e| format!("bad seed '{b}': {e}"))?;
                if a > b {
                    return Err(format!("empty seed range {part}"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|e| format!("bad seed '{part}': {e}"))?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn numerical(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: message.to_string(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load_model_file(path: &Path) -> Result<ModelFile, Failure> {
    read_model(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn discretize(model: &Path, dt: Option<f64>, out: &Path) -> Result<(), Failure> {
    let file = load_model_file(model)?;
    let parsed = file.parse().map_err(|e| usage(format!("{}: {e}", model.display())))?;
    let LoadedModel::Continuous(css, file_dt) = parsed else {
        return Err(usage(format!(
            "{} is already a discrete model (\"continuous\": false)",
            model.display()
        )));
    };
    let dt = dt.unwrap_or(file_dt);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(usage(format!("sample time must be positive, got {dt}")));
    }
    let dss = discretize_exact(&css, dt).map_err(numerical)?;
    write(out, &to_json_pretty(&ModelFile::from_discrete(&dss)).map_err(numerical)?)?;
    println!("wrote discrete model (dt = {dt}) to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn transform(
    model: &Path,
    method: Method,
    poles: Option<Vec<f64>>,
    q: Option<f64>,
    r: Option<f64>,
    tol: f64,
    max_order: usize,
    order: Option<usize>,
    out: &Path,
) -> Result<(), Failure> {
    match method {
        Method::Ch if poles.is_some() || q.is_some() || r.is_some() || order.is_some() => {
            return Err(usage("--method ch takes no --poles, --q, --r or --order"))
        }
        Method::Ot if poles.is_none() => return Err(usage("--method ot requires --poles")),
        Method::Ot if q.is_some() || r.is_some() => {
            return Err(usage("--q/--r apply to --method kf only"))
        }
        Method::Kf if q.is_none() || r.is_none() => {
            return Err(usage("--method kf requires --q and --r"))
        }
        Method::Kf if poles.is_some() => return Err(usage("--poles applies to --method ot only")),
        _ => {}
    }
    if !(tol > 0.0 && tol.is_finite()) || max_order == 0 || order == Some(0) {
        return Err(usage("--tol, --max-order and --order must be positive"));
    }
    let dss = load_model_file(model)?
        .to_discrete()
        .map_err(|e| usage(format!("{}: {e}", model.display())))?;
    if let Some(poles) = &poles {
        if poles.len() != dss.n_states() {
            return Err(usage(format!(
                "--poles needs {} values for this model, got {}",
                dss.n_states(),
                poles.len()
            )));
        }
    }

    let (arx, ratio) = match method {
        Method::Ch => (ss_to_arx_ch(&dss).map_err(numerical)?, 0.0),
        Method::Ot | Method::Kf => {
            let gain = match method {
                Method::Ot => place_observer_poles(&dss, &poles.unwrap_or_default()),
                _ => KalmanDesign::from_std_devs(&dss, q.unwrap_or(0.0), r.unwrap_or(0.0))
                    .and_then(|d| d.gain(&dss)),
            }
            .map_err(numerical)?;
            let acl = gain.error_dynamics(&dss);
            let (k, ratio) = match order {
                Some(k) => {
                    let base = acl.norm();
                    let ratio = if base == 0.0 { 0.0 } else { acl.pow(k as u32).norm() / base };
                    (k, ratio)
                }
                None => truncation_order(&acl, tol, max_order).map_err(numerical)?,
            };
            (ss_to_arx_with_gain(&dss, &gain, k).map_err(numerical)?, ratio)
        }
    };
    write(out, &to_json_pretty(&ArxFile::from_model(&arx)).map_err(numerical)?)?;
    println!("order: {}", arx.order());
    println!("truncation norm: {:.8e}", ratio);
    Ok(())
}

fn simulate(scenario: &Path, out_dir: &Path) -> Result<(), Failure> {
    let s = load_scenario(scenario).map_err(|e| usage(format!("{}: {e}", scenario.display())))?;
    let res = run_closed_loop(&s).map_err(numerical)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", out_dir.display())))?;
    write(&out_dir.join("trajectory.csv"), &trajectory_csv(&res))?;
    let summary = SimSummary::new(&s, &res);
    write(&out_dir.join("summary.json"), &to_json_pretty(&summary).map_err(numerical)?)?;
    println!(
        "{}: {} of {} steps, average tracking cost {}{}",
        summary.name,
        summary.steps_completed,
        summary.steps_requested,
        summary.avg_tracking_cost,
        if res.diverged { " (diverged)" } else { "" }
    );
    Ok(())
}

fn compare(scenarios: &[PathBuf], seeds: &[u64], out: &Path) -> Result<(), Failure> {
    if scenarios.len() < 2 {
        return Err(usage("compare needs at least two scenario files"));
    }
    let loaded = scenarios
        .iter()
        .map(|p| load_scenario(p).map_err(|e| usage(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compare_controllers(&loaded, seeds).map_err(numerical)?;
    write(out, &comparison_json(&report).map_err(numerical)?)?;
    print!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Discretize { model, dt, out } => discretize(&model, dt, &out),
        Command::Transform {
            model,
            method,
            poles,
            q,
            r,
            tol,
            max_order,
            order,
            out,
        } => transform(&model, method, poles, q, r, tol, max_order, order, &out),
        Command::Simulate { scenario, out_dir } => simulate(&scenario, &out_dir),
        Command::Compare {
            scenarios,
            seeds,
            out,
        } => compare(&scenarios, &seeds.0, &out),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
