//! Experiment runs and their output files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::bounds::{bound_curve, exit_bound, BoundSample, Horizon};
use crate::error::{Error, Result};
use crate::lp::{lp_brute_force, lp_solve, random_instance, LpStatus};
use crate::mc::{tally_paths, McSummary};
use crate::model::{check_barrier_derivatives, Scenario, StateVector};
use crate::sim::{simulate_path, Trajectory};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "mc_summary.json";
pub const ECHO_FILE: &str = "config_echo.json";

/// Contents of `mc_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(flatten)]
    pub mc: McSummary,
    pub simulated_horizon: f64,
    /// Bounds at `t = 0` from the first step's certificate; null on fallback.
    pub bound_finite_t0: Option<f64>,
    pub bound_infinite_t0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub barrier_values: Vec<f64>,
    pub bound_finite: Vec<Option<f64>>,
    pub bound_infinite: Vec<Option<f64>>,
    pub summary: Option<RunSummary>,
    pub files: Vec<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Header `t,x1..,u1..,a,b,status,barrier,bound_finite,bound_infinite`.
pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.extend(
        [
            "a",
            "b",
            "status",
            "barrier",
            "bound_finite",
            "bound_infinite",
        ]
        .map(String::from),
    );
    h
}

pub fn write_trajectory_csv(path: &Path, report: &RunReport) -> Result<()> {
    let tr = &report.trajectory;
    let n = tr.states.first().map_or(0, |s| s.len());
    let m = tr.controls.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(trajectory_header(n, m))
        .map_err(csv_err(path))?;
    for i in 0..tr.len() {
        let mut rec = vec![num(tr.times[i])];
        rec.extend(tr.states[i].iter().map(|v| num(*v)));
        rec.extend(tr.controls[i].iter().map(|v| num(*v)));
        rec.push(opt(tr.certs[i].map(|c| c.a)));
        rec.push(opt(tr.certs[i].map(|c| c.b)));
        rec.push(tr.status(i).to_string());
        rec.push(num(report.barrier_values[i]));
        rec.push(opt(report.bound_finite[i]));
        rec.push(opt(report.bound_infinite[i]));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Simulates the representative path (seed = `master_seed`), evaluates the
/// bound curves along it, runs the Monte Carlo batch when `n_paths > 0`, and
/// writes all artifacts into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let spec = cfg.build_spec()?;
    let x0 = cfg.x0_vector();
    let horizon = cfg.simulated_horizon();

    let trajectory = simulate_path(model.as_ref(), &spec, &x0, cfg.dt, horizon, cfg.master_seed)?;
    let barrier_values: Vec<f64> = trajectory
        .states
        .iter()
        .map(|x| spec.barrier.value(x))
        .collect();
    let samples: Vec<BoundSample> = trajectory
        .times
        .iter()
        .zip(&barrier_values)
        .zip(&trajectory.certs)
        .map(|((t, v), c)| BoundSample::new(*t, *v, c.as_ref()))
        .collect();
    let bound_finite: Vec<Option<f64>> =
        bound_curve(spec.variant, &samples, Horizon::Finite(horizon))?
            .into_iter()
            .map(|(_, b)| b)
            .collect();
    let bound_infinite: Vec<Option<f64>> = bound_curve(spec.variant, &samples, Horizon::Infinite)?
        .into_iter()
        .map(|(_, b)| b)
        .collect();

    let summary = if cfg.n_paths > 0 {
        log::info!("simulating {} paths to t = {horizon}", cfg.n_paths);
        let tally = tally_paths(
            model.as_ref(),
            &spec,
            &x0,
            cfg.dt,
            horizon,
            cfg.n_paths,
            cfg.master_seed,
        )?;
        let v0 = spec.barrier.value(&x0);
        let t0 = |h: Horizon| -> Result<Option<f64>> {
            trajectory.certs[0]
                .map(|c| exit_bound(spec.variant, v0, c.a, c.b, h))
                .transpose()
        };
        Some(RunSummary {
            mc: McSummary::from_tally(tally, cfg.z, cfg.master_seed)?,
            simulated_horizon: horizon,
            bound_finite_t0: t0(Horizon::Finite(horizon))?,
            bound_infinite_t0: t0(Horizon::Infinite)?,
        })
    } else {
        None
    };

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut report = RunReport {
        trajectory,
        barrier_values,
        bound_finite,
        bound_infinite,
        summary,
        files: Vec::new(),
    };
    let traj_path = out_dir.join(TRAJECTORY_FILE);
    write_trajectory_csv(&traj_path, &report)?;
    report.files.push(traj_path);
    if let Some(s) = &report.summary {
        let p = out_dir.join(SUMMARY_FILE);
        write_json(&p, s)?;
        report.files.push(p);
    }
    let echo = out_dir.join(ECHO_FILE);
    write_json(&echo, cfg)?;
    report.files.push(echo);
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

/// Finite-difference checks of the built-in barriers at random states and
/// simplex-vs-enumeration agreement on random LPs.
pub fn selftest(seed: u64, states: usize, instances: usize) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = Uniform::new(-20.0, 30.0).expect("valid range");
    let mut lines = Vec::new();
    let mut passed = true;

    for scenario in [Scenario::Headway, Scenario::Annulus, Scenario::Disk] {
        let bf = scenario.barrier();
        let mut worst = 0.0f64;
        let mut ok = true;
        for _ in 0..states {
            let x = StateVector::from_fn(2, |_, _| coord.sample(&mut rng));
            let r = check_barrier_derivatives(&bf, &x, 1e-5);
            worst = worst.max(r.max_gradient_error).max(r.max_hessian_error);
            ok &= r.passed;
        }
        passed &= ok;
        lines.push(format!(
            "{} barrier {}: {states} states, worst relative error {worst:.3e}",
            if ok { "PASS" } else { "FAIL" },
            scenario.id()
        ));
    }

    let mut mismatches = 0;
    for _ in 0..instances {
        let p = random_instance(&mut rng);
        let agree = match (lp_solve(&p), lp_brute_force(&p)) {
            (Ok(s), Ok(o)) => {
                s.status == o.status
                    && (s.status != LpStatus::Optimal
                        || (s.objective_value - o.objective_value).abs()
                            <= 1e-8 * (1.0 + o.objective_value.abs()))
            }
            _ => false,
        };
        if !agree {
            mismatches += 1;
        }
    }
    passed &= mismatches == 0;
    lines.push(format!(
        "{} lp oracle: {instances} random instances, {mismatches} disagreements",
        if mismatches == 0 { "PASS" } else { "FAIL" }
    ));
    SelftestReport { lines, passed }
}
