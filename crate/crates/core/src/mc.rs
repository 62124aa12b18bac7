//! Monte Carlo estimation of the exit probability of the stopped process.
//!
//! Path `i` uses the seed `path_seed(master_seed, i)`, so a summary depends
//! only on its inputs; tallies are integer sums and combine in any order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SdeModel, StateVector};
use crate::sim::{path_seed, simulate_outcome, ExitKind};
use crate::synthesis::ProblemSpec;

pub const DEFAULT_Z: f64 = 3.0;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 || successes > n {
        return Err(Error::Parameter(format!(
            "need 0 <= successes <= n and n >= 1, got {successes} of {n}"
        )));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Parameter(format!(
            "z must be finite and > 0, got {z}"
        )));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let hi = if successes == n {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub target: u64,
    pub unsafe_: u64,
    pub timeout: u64,
    pub diverged: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            target: self.target + o.target,
            unsafe_: self.unsafe_ + o.unsafe_,
            timeout: self.timeout + o.timeout,
            diverged: self.diverged + o.diverged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n_paths: u64,
    pub n_target: u64,
    pub n_unsafe: u64,
    pub n_timeout: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub z: f64,
    pub master_seed: u64,
}

impl McSummary {
    pub fn from_tally(tally: Tally, z: f64, master_seed: u64) -> Result<Self> {
        let n = tally.target + tally.unsafe_ + tally.timeout;
        let (ci_lo, ci_hi) = wilson_interval(tally.target, n, z)?;
        Ok(Self {
            n_paths: n,
            n_target: tally.target,
            n_unsafe: tally.unsafe_,
            n_timeout: tally.timeout,
            estimate: tally.target as f64 / n as f64,
            ci_lo,
            ci_hi,
            z,
            master_seed,
        })
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

/// Simulates paths `0..n_paths` in parallel and counts their outcomes.
pub fn tally_paths(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
    n_paths: u64,
    master_seed: u64,
) -> Result<Tally> {
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    let tally = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let out = simulate_outcome(model, spec, x0, dt, horizon, path_seed(master_seed, i))?;
            let mut t = Tally::default();
            match out.kind {
                ExitKind::ExitedTarget => t.target = 1,
                ExitKind::ExitedUnsafe => t.unsafe_ = 1,
                ExitKind::Timeout => t.timeout = 1,
            }
            t.diverged = u64::from(out.diverged);
            Ok(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a + b))?;
    if tally.diverged > 0 {
        log::warn!(
            "{} of {n_paths} paths diverged numerically and were counted as unsafe",
            tally.diverged
        );
    }
    Ok(tally)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_exit_probability_z(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
    n_paths: u64,
    master_seed: u64,
    z: f64,
) -> Result<McSummary> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Parameter(format!(
            "z must be finite and > 0, got {z}"
        )));
    }
    let tally = tally_paths(model, spec, x0, dt, horizon, n_paths, master_seed)?;
    McSummary::from_tally(tally, z, master_seed)
}

pub fn estimate_exit_probability(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x0: &StateVector,
    dt: f64,
    horizon: f64,
    n_paths: u64,
    master_seed: u64,
) -> Result<McSummary> {
    estimate_exit_probability_z(
        model,
        spec,
        x0,
        dt,
        horizon,
        n_paths,
        master_seed,
        DEFAULT_Z,
    )
}
