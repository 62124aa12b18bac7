//! Euler–Maruyama simulation of the closed-loop stopped process.
//!
//! The controller is re-synthesized at every grid point and held over the
//! following step. Boundary hits are detected after each step with closed
//! conditions, so overshoot counts as a hit; the exit time is the grid time of
//! the first state found on or past a boundary.
//!
//! Noise for a path comes from a ChaCha8 stream seeded with the path seed;
//! each step draws `noise_dim` standard normals (Ziggurat, via `rand_distr`)
//! in order and scales them by `sqrt(dt)`. A path's noise prefix therefore
//! does not depend on the horizon.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{check_model_at, Barrier, ControlVector, SdeModel, StateVector};
use crate::synthesis::{
    synthesize_control, Certificate, ProblemSpec, ProblemVariant, SynthesisResult, SynthesisStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Interior,
    HitTarget,
    HitUnsafe,
}

pub fn classify_value(variant: ProblemVariant, value: f64) -> PointClass {
    match variant {
        ProblemVariant::ProblemI if value >= 1.0 => PointClass::HitTarget,
        ProblemVariant::ProblemI if value <= 0.0 => PointClass::HitUnsafe,
        ProblemVariant::ProblemII if value >= 1.0 => PointClass::HitTarget,
        _ if value.is_nan() => PointClass::HitUnsafe,
        _ => PointClass::Interior,
    }
}

pub fn classify_state(variant: ProblemVariant, bf: &dyn Barrier, x: &StateVector) -> PointClass {
    classify_value(variant, bf.value(x))
}

/// One explicit step `x + (f1 + f2 u) dt + sigma dW`; `dw` is already scaled.
pub fn euler_maruyama_step(
    model: &dyn SdeModel,
    x: &StateVector,
    u: &ControlVector,
    dt: f64,
    dw: &DVector<f64>,
) -> Result<StateVector> {
    if u.len() != model.control_dim() {
        return Err(Error::shape("control", model.control_dim(), u.len()));
    }
    if dw.len() != model.noise_dim() {
        return Err(Error::shape("noise increment", model.noise_dim(), dw.len()));
    }
    let mut next = x + (model.drift(x) + model.control_matrix(x) * u) * dt;
    next += model.diffusion(x) * dw;
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Numerical(format!(
            "state left the finite range after a step from {:?}",
            x.as_slice()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitKind {
    ExitedTarget,
    ExitedUnsafe,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitOutcome {
    pub kind: ExitKind,
    /// Grid time of the hit; `None` on timeout.
    pub exit_time: Option<f64>,
    pub final_state: StateVector,
    /// Set when the path was stopped because a step produced a non-finite
    /// state; such paths are reported as `ExitedUnsafe`.
    pub diverged: bool,
}

/// One stored path on the full grid `0, dt, .., N dt`.
///
/// Rows after an exit repeat the exit state together with the last control
/// and certificate computed inside the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub controls: Vec<ControlVector>,
    pub certs: Vec<Option<Certificate>>,
    pub outcome: ExitOutcome,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn status(&self, i: usize) -> SynthesisStatus {
        match self.certs[i] {
            Some(_) => SynthesisStatus::Feasible,
            None => SynthesisStatus::Fallback,
        }
    }

    /// Row index of the exit, if the path exited.
    pub fn exit_index(&self) -> Option<usize> {
        let t = self.outcome.exit_time?;
        self.times.iter().position(|s| *s == t)
    }
}

/// Number of steps for horizon `t`: `ceil(t / dt)`, ignoring float dust.
pub fn step_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(0.0) as usize
}

pub fn time_grid(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 * dt).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `index` under `master`; distinct indices give distinct seeds.
pub fn path_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03)))
}

fn check_inputs(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Parameter(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    if spec.barrier.dim() != model.state_dim() {
        return Err(Error::shape(
            "barrier dimension",
            model.state_dim(),
            spec.barrier.dim(),
        ));
    }
    check_model_at(model, x0)?;
    match classify_state(spec.variant, spec.barrier.as_ref(), x0) {
        PointClass::Interior => Ok(()),
        class => Err(Error::Precondition(format!(
            "initial state {:?} is not interior ({class:?}, barrier value {})",
            x0.as_slice(),
            spec.barrier.value(x0)
        ))),
    }
}

struct Walk {
    outcome: ExitOutcome,
    /// Steps taken before stopping.
    steps: usize,
}

/// Runs the closed loop for at most `steps` steps, calling `visit` with every
/// interior state that gets stepped from.
fn walk(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    steps: usize,
    seed: u64,
    mut visit: impl FnMut(&StateVector, &SynthesisResult),
) -> Result<Walk> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = dt.sqrt();
    let mut dw = DVector::zeros(model.noise_dim());
    let mut x = x0.clone();
    for i in 0..steps {
        let syn = synthesize_control(model, spec, &x)?;
        visit(&x, &syn);
        for w in dw.iter_mut() {
            *w = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        }
        let t = (i + 1) as f64 * dt;
        let next = match euler_maruyama_step(model, &x, &syn.u, dt, &dw) {
            Ok(next) => next,
            Err(e) => {
                log::debug!("path with seed {seed} diverged at t = {t}: {e}");
                return Ok(Walk {
                    outcome: ExitOutcome {
                        kind: ExitKind::ExitedUnsafe,
                        exit_time: Some(t),
                        final_state: x,
                        diverged: true,
                    },
                    steps: i + 1,
                });
            }
        };
        x = next;
        let kind = match classify_state(spec.variant, spec.barrier.as_ref(), &x) {
            PointClass::Interior => continue,
            PointClass::HitTarget => ExitKind::ExitedTarget,
            PointClass::HitUnsafe => ExitKind::ExitedUnsafe,
        };
        return Ok(Walk {
            outcome: ExitOutcome {
                kind,
                exit_time: Some(t),
                final_state: x,
                diverged: false,
            },
            steps: i + 1,
        });
    }
    Ok(Walk {
        outcome: ExitOutcome {
            kind: ExitKind::Timeout,
            exit_time: None,
            final_state: x,
            diverged: false,
        },
        steps,
    })
}

pub fn simulate_path(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
    path_seed: u64,
) -> Result<Trajectory> {
    check_inputs(model, spec, x0, dt, horizon)?;
    let n = step_count(dt, horizon);
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n + 1);
    let mut certs = Vec::with_capacity(n + 1);
    let walk = walk(model, spec, x0, dt, n, path_seed, |x, syn| {
        states.push(x.clone());
        controls.push(syn.u.clone());
        certs.push(syn.certificate);
    })?;

    let last = &walk.outcome.final_state;
    let (u, cert) = match walk.outcome.kind {
        ExitKind::Timeout => {
            let syn = synthesize_control(model, spec, last)?;
            (syn.u, syn.certificate)
        }
        _ => (controls[walk.steps - 1].clone(), certs[walk.steps - 1]),
    };
    while states.len() <= n {
        states.push(last.clone());
        controls.push(u.clone());
        certs.push(cert);
    }
    Ok(Trajectory {
        times: time_grid(dt, n),
        states,
        controls,
        certs,
        outcome: walk.outcome,
    })
}

/// Same path as [`simulate_path`] without storing it.
pub fn simulate_outcome(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
    path_seed: u64,
) -> Result<ExitOutcome> {
    check_inputs(model, spec, x0, dt, horizon)?;
    Ok(walk(
        model,
        spec,
        x0,
        dt,
        step_count(dt, horizon),
        path_seed,
        |_, _| {},
    )?
    .outcome)
}
