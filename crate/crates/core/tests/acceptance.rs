//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safe_exit::bounds::{
    exit_bound_finite_i, exit_bound_finite_ii, exit_bound_infinite_i, exit_bound_infinite_ii,
    exit_bound_zero_b,
};
use safe_exit::cli::{load_scenario, parse_scenario, run_scenario, ScenarioConfig};
use safe_exit::lp::{lp_brute_force, lp_solve, random_instance, LpStatus};
use safe_exit::mc::{estimate_exit_probability, estimate_exit_probability_z};
use safe_exit::model::{
    check_barrier_derivatives, AccModel, Barrier, LinearModel, QuadraticBarrier, Scenario,
    StateVector,
};
use safe_exit::sim::{path_seed, simulate_outcome, simulate_path, ExitKind};
use safe_exit::synthesis::{synthesize_control, ProblemSpec, ProblemVariant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sv(v: &[f64]) -> StateVector {
    StateVector::from_row_slice(v)
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn shipped(name: &str) -> ScenarioConfig {
    load_scenario(&scenarios_dir().join(name)).expect("shipped config loads")
}

fn lp_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut optimal = 0;
    for i in 0..200 {
        let p = random_instance(&mut rng);
        ensure(p.dim() <= 5 && p.rows.len() <= 8, || {
            format!("instance {i} too large")
        })?;
        let s = lp_solve(&p).map_err(|e| format!("instance {i}: {e}"))?;
        let o = lp_brute_force(&p).map_err(|e| format!("instance {i}: {e}"))?;
        ensure(s.status == o.status, || {
            format!("instance {i}: {:?} vs oracle {:?}", s.status, o.status)
        })?;
        if s.status == LpStatus::Optimal {
            optimal += 1;
            let gap = (s.objective_value - o.objective_value).abs();
            ensure(gap <= 1e-8, || {
                format!("instance {i}: objective gap {gap:e}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 instances ({optimal} optimal) agree, {elapsed:.2?}"
    ))
}

fn bound_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut checks = 0u64;
    for _ in 0..2000 {
        let a: f64 = rng.random_range(1e-3..20.0);
        let b = a * rng.random_range(0.0..0.999);
        let h0: f64 = rng.random_range(0.0..=1.0);
        let t: f64 = rng.random_range(1e-3..10.0);

        let one = exit_bound_finite_i(1.0, a, b, t).unwrap();
        ensure(one == 1.0, || {
            format!("h0 = 1 gives {one} at a={a} b={b} T={t}")
        })?;
        let l2 = exit_bound_infinite_i(h0, a, 0.0).unwrap();
        ensure(l2 == h0 && exit_bound_zero_b(h0).unwrap() == h0, || {
            format!("b = 0 gives {l2} for h0 = {h0}")
        })?;

        let mut last = 0.0;
        for k in 1..=20 {
            let v = exit_bound_finite_i(h0, a, b, t * k as f64).unwrap();
            ensure(v >= last, || {
                format!("not nondecreasing in T at a={a} b={b} h0={h0}")
            })?;
            last = v;
        }
        let far = exit_bound_finite_i(h0, a, b, 50.0 / a).unwrap();
        let inf = exit_bound_infinite_i(h0, a, b).unwrap();
        ensure((far - inf).abs() < 1e-9, || {
            format!("aT = 50 gap {:e}", (far - inf).abs())
        })?;

        let g0: f64 = rng.random_range(-3.0..=1.0);
        let bn: f64 = rng.random_range(-10.0..-1e-3);
        let near = exit_bound_finite_ii(g0, 1e-8, bn, t).unwrap();
        let zero = exit_bound_finite_ii(g0, 0.0, bn, t).unwrap();
        ensure((near - zero).abs() < 1e-5, || {
            format!("branch jump {:e} at g0={g0} b={bn}", (near - zero).abs())
        })?;
        ensure(exit_bound_infinite_ii(g0, 0.0, bn).unwrap() == 1.0, || {
            "a = 0 infinite bound is not 1".into()
        })?;
        checks += 1;
    }

    for &h0 in &[0.3, 0.6, 0.9] {
        for &t in &[0.5, 2.0] {
            for &b in &[0.0, 0.1, 0.2] {
                let mut last = 0.0;
                for a in (1..=40).map(|i| 0.25 * i as f64).filter(|a| *a > b) {
                    let v = exit_bound_finite_i(h0, a, b, t).unwrap();
                    if v > 0.0 {
                        ensure(v >= last, || {
                            format!("not increasing in a at h0={h0} T={t} b={b} a={a}")
                        })?;
                        last = v;
                    }
                }
            }
            for &a in &[1.0, 4.0] {
                let mut last = f64::INFINITY;
                for b in (0..30).map(|i| i as f64 * a / 31.0) {
                    let v = exit_bound_finite_i(h0, a, b, t).unwrap();
                    if v > 0.0 {
                        ensure(v <= last, || {
                            format!("not decreasing in b at h0={h0} T={t} a={a} b={b}")
                        })?;
                        last = v;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checks} random cases plus monotonicity grid, {elapsed:.2?}"
    ))
}

/// Closed forms for scenario 1 at `x0 = (-0.5, 1.5)`. The control enters only
/// through `c = -0.45 / M`, so `u = -1` makes the generator as large as
/// possible; call that maximum `kappa`. With `h = 0.6` the program is then
/// `max a - w b` over `0.6 a - b <= kappa`, `0 <= b <= a - eps`, `a <= 10`.
fn synthesis_point() -> Outcome {
    let acc = AccModel::default();
    let m = acc.mass();
    let drag = 0.1 + 5.0 * -0.5 + 0.25 * 0.25;
    let c0 = -0.45 * (-drag / m) + 0.25 * (0.5 - -0.5);
    let kappa = c0 + 0.45 / m;
    let h0 = 0.6;
    let x0 = sv(&[-0.5, 1.5]);
    let barrier: Arc<dyn Barrier> = Arc::new(Scenario::Headway.barrier());

    let stated_a = kappa / h0;
    ensure((stated_a - 0.4160587).abs() < 1e-6, || {
        format!("closed form b = 0 corner a = {stated_a}")
    })?;

    let high = ProblemSpec::new(ProblemVariant::ProblemI, barrier.clone(), 1e12, 10.0).unwrap();
    let r = synthesize_control(&acc, &high, &x0).map_err(|e| e.to_string())?;
    let c = r.certificate.ok_or("w = 1e12 program fell back")?;
    ensure(r.u[0] == -1.0, || format!("w = 1e12: u = {}", r.u[0]))?;
    ensure(c.b.abs() < 1e-8, || format!("w = 1e12: b = {}", c.b))?;
    ensure((c.a - 0.4160587).abs() < 1e-6, || {
        format!("w = 1e12: a = {}", c.a)
    })?;

    let unit = ProblemSpec::new(ProblemVariant::ProblemI, barrier, 1.0, 10.0).unwrap();
    let r1 = synthesize_control(&acc, &unit, &x0).map_err(|e| e.to_string())?;
    let c1 = r1.certificate.ok_or("w = 1 program fell back")?;
    let (a_opt, b_opt) = (10.0, 10.0 * h0 - kappa);
    ensure(r1.u[0] == -1.0, || format!("w = 1: u = {}", r1.u[0]))?;
    ensure(
        (c1.a - a_opt).abs() < 1e-6 && (c1.b - b_opt).abs() < 1e-6,
        || {
            format!(
                "w = 1: (a, b) = ({}, {}), closed form ({a_opt}, {b_opt})",
                c1.a, c1.b
            )
        },
    )?;
    let stated_obj = stated_a;
    let opt_obj = a_opt - b_opt;
    ensure(opt_obj > stated_obj + 1.0, || {
        "stated corner is not dominated at w = 1".into()
    })?;
    Ok(format!(
        "(u, a, b) = (-1, {:.7}, {:.1e}) at w = 1e12; at w = 1 the optimum is (-1, {:.7}, {:.7}) with objective {:.4} > {:.4} at the b = 0 corner",
        c.a, c.b, c1.a, c1.b, opt_obj, stated_obj
    ))
}

fn deterministic_simulation() -> Outcome {
    let model = LinearModel::deterministic_1d(1.0).unwrap();
    let barrier: Arc<dyn Barrier> = Arc::new(QuadraticBarrier::affine(sv(&[1.0]), 0.0).unwrap());
    let spec = ProblemSpec::new(ProblemVariant::ProblemI, barrier, 1.0, 10.0).unwrap();
    let tr = simulate_path(&model, &spec, &sv(&[0.9]), 0.01, 1.0, 3).map_err(|e| e.to_string())?;
    ensure(tr.outcome.kind == ExitKind::ExitedTarget, || {
        format!("outcome {:?}", tr.outcome.kind)
    })?;
    let t = tr.outcome.exit_time.unwrap();
    ensure(t == 0.1 && tr.times[10] == t, || format!("exit time {t}"))?;
    let s = estimate_exit_probability(&model, &spec, &sv(&[0.9]), 0.01, 1.0, 100, 9)
        .map_err(|e| e.to_string())?;
    ensure(s.estimate == 1.0, || format!("estimate {}", s.estimate))?;
    Ok(format!(
        "exit at t = {t} on the grid, estimate {} over 100 paths",
        s.estimate
    ))
}

fn bound_validity() -> Outcome {
    let mut lines = Vec::new();
    let start = Instant::now();
    for name in [
        "scenario1_w1.json",
        "scenario1_whigh.json",
        "scenario2_w1.json",
        "scenario2_whigh.json",
        "scenario3_w1.json",
        "scenario3_whigh.json",
    ] {
        let cfg = shipped(name);
        ensure(
            cfg.n_paths == 10_000 && cfg.dt == 1e-3 && cfg.simulated_horizon() == 2.0,
            || format!("{name}: unexpected settings"),
        )?;
        let model = cfg.build_model().unwrap();
        let spec = cfg.build_spec().unwrap();
        let x0 = cfg.x0_vector();
        let first = synthesize_control(model.as_ref(), &spec, &x0).unwrap();
        let c = first
            .certificate
            .ok_or_else(|| format!("{name}: first step fell back"))?;
        let v0 = spec.barrier.value(&x0);
        let bound = match cfg.variant {
            ProblemVariant::ProblemI => exit_bound_finite_i(v0, c.a, c.b, 2.0),
            ProblemVariant::ProblemII => exit_bound_finite_ii(v0, c.a, c.b, 2.0),
        }
        .unwrap();
        let s = estimate_exit_probability_z(
            model.as_ref(),
            &spec,
            &x0,
            cfg.dt,
            2.0,
            cfg.n_paths,
            cfg.master_seed,
            3.0,
        )
        .map_err(|e| e.to_string())?;
        let slack = s.half_width();
        ensure(s.estimate >= bound - slack, || {
            format!("{name}: estimate {} < bound {bound} - {slack}", s.estimate)
        })?;
        lines.push(format!(
            "{}: {:.4} >= {:.4}",
            name.trim_end_matches(".json"),
            s.estimate,
            bound
        ));
    }
    Ok(format!("{} ({:.0?})", lines.join(", "), start.elapsed()))
}

fn horizon_monotonicity() -> Outcome {
    let cfg = shipped("scenario1_w1.json");
    let model = cfg.build_model().unwrap();
    let spec = cfg.build_spec().unwrap();
    let x0 = cfg.x0_vector();
    let mut estimates = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let s = estimate_exit_probability(
            model.as_ref(),
            &spec,
            &x0,
            cfg.dt,
            t,
            10_000,
            cfg.master_seed,
        )
        .map_err(|e| e.to_string())?;
        estimates.push(s.estimate);
    }
    ensure(estimates.windows(2).all(|w| w[0] <= w[1]), || {
        format!("estimates {estimates:?}")
    })?;
    for i in 0..200 {
        let seed = path_seed(cfg.master_seed, i);
        let hits: Vec<bool> = [0.5, 1.0, 2.0]
            .iter()
            .map(|t| {
                simulate_outcome(model.as_ref(), &spec, &x0, cfg.dt, *t, seed)
                    .unwrap()
                    .kind
                    == ExitKind::ExitedTarget
            })
            .collect();
        ensure(hits.windows(2).all(|w| !w[0] || w[1]), || {
            format!("path {i} loses its target hit")
        })?;
    }
    Ok(format!("estimates at T = 0.5, 1, 2: {estimates:?}"))
}

fn nonpositive_a_branch() -> Outcome {
    let text = serde_json::json!({
        "model": {"kind": "linear", "params": {
            "a": [[0.0]], "c": [0.75], "b": [[0.0]], "sigma": [[1.0]], "u_lo": [-1.0], "u_hi": [1.0]
        }},
        "barrier": {"quadratic": {"q": [[0.0]], "linear": [1.0], "constant": 0.0}},
        "variant": "problem_ii",
        "x0": [0.5],
        "horizon": 2.0,
        "dt": 0.01,
        "w": 10.0,
        "delta": 1.0,
        "n_paths": 200,
        "master_seed": 5
    })
    .to_string();
    let cfg = parse_scenario(&text).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let c = report.trajectory.certs[0].ok_or("first step fell back")?;
    ensure(c.a <= 0.0, || format!("a = {} is not <= 0", c.a))?;
    let (g0, t) = (0.5, 2.0);
    let hand = (1.0 - (g0 - 1.0) / ((c.b - c.a) * t)).max(0.0);
    let finite = report.bound_finite[0].unwrap();
    let infinite = report.bound_infinite[0].unwrap();
    ensure((finite - hand).abs() < 1e-12, || {
        format!("finite bound {finite} vs hand {hand}")
    })?;
    ensure(infinite == 1.0, || format!("infinite bound {infinite}"))?;
    let s = report.summary.as_ref().unwrap();
    ensure(s.bound_infinite_t0 == Some(1.0), || {
        "summary infinite bound is not 1".into()
    })?;
    ensure(
        s.bound_finite_t0.is_some_and(|b| (b - hand).abs() < 1e-12),
        || "summary finite bound".into(),
    )?;
    Ok(format!(
        "(a, b) = ({}, {}), finite bound {finite} = hand {hand}, infinite bound {infinite}",
        c.a, c.b
    ))
}

fn frozen_and_deterministic() -> Outcome {
    let acc = AccModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exited = 0;
    for i in 0..1000u64 {
        let id = 1 + (i % 3) as u8;
        let (variant, x0) = match id {
            1 => (
                ProblemVariant::ProblemI,
                sv(&[rng.random_range(-1.5..0.0), rng.random_range(0.6..2.5)]),
            ),
            2 => (
                ProblemVariant::ProblemI,
                sv(&[rng.random_range(1.2..2.2), rng.random_range(-1.0..1.0)]),
            ),
            _ => (
                ProblemVariant::ProblemII,
                sv(&[rng.random_range(6.0..14.0), rng.random_range(6.0..14.0)]),
            ),
        };
        let w = if i % 2 == 0 { 1.0 } else { 1e12 };
        let barrier: Arc<dyn Barrier> = Arc::new(Scenario::from_id(id).unwrap().barrier());
        let spec = ProblemSpec::new(variant, barrier, w, 10.0).unwrap();
        if spec.barrier.value(&x0) >= 1.0
            || (variant == ProblemVariant::ProblemI && spec.barrier.value(&x0) <= 0.0)
        {
            continue;
        }
        let tr =
            simulate_path(&acc, &spec, &x0, 1e-2, 2.0, rng.random()).map_err(|e| e.to_string())?;
        if let Some(k) = tr.exit_index() {
            exited += 1;
            ensure(
                tr.states[k..].iter().all(|s| *s == tr.outcome.final_state),
                || format!("path {i} moved after exit"),
            )?;
        }
    }

    for name in ["scenario1_w1.json", "scenario3_whigh.json"] {
        let mut cfg = shipped(name);
        cfg.n_paths = 0;
        cfg.dt = 1e-2;
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_scenario(&cfg, d1.path()).map_err(|e| e.to_string())?;
        run_scenario(&cfg, d2.path()).map_err(|e| e.to_string())?;
        let a = std::fs::read(d1.path().join("trajectory.csv")).unwrap();
        let b = std::fs::read(d2.path().join("trajectory.csv")).unwrap();
        ensure(a == b, || {
            format!("{name}: trajectory.csv differs between runs")
        })?;
    }
    Ok(format!(
        "1000 paths ({exited} exited) frozen after exit; trajectory CSVs byte-identical"
    ))
}

fn derivative_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for scenario in [Scenario::Headway, Scenario::Annulus, Scenario::Disk] {
        let bf = scenario.barrier();
        for _ in 0..100 {
            let x = sv(&[rng.random_range(-20.0..30.0), rng.random_range(-20.0..30.0)]);
            let r = check_barrier_derivatives(&bf, &x, 1e-5);
            worst = worst.max(r.max_gradient_error).max(r.max_hessian_error);
            ensure(r.passed, || {
                format!("barrier {} fails at {:?}", scenario.id(), x.as_slice())
            })?;
        }
    }
    Ok(format!(
        "3 barriers x 100 states, worst relative error {worst:.2e}"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 lp oracle equivalence", lp_oracle_equivalence),
        ("2 bound identities", bound_identities),
        ("3 synthesis point", synthesis_point),
        ("4 deterministic simulation", deterministic_simulation),
        ("5 bound validity", bound_validity),
        ("6 horizon monotonicity", horizon_monotonicity),
        ("7 nonpositive-a branch", nonpositive_a_branch),
        ("8 freeze and determinism", frozen_and_deterministic),
        ("9 derivative checks", derivative_checks),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{:.2?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
