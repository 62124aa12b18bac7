//! Closed-form lower bounds on exit probabilities from a certificate `(a, b)`.
//!
//! With `r = b / a` and `v0` the barrier value at the start, the finite-horizon
//! bound `(e^{aT}(v0 - r) + r - 1) / ((1 - r)(e^{aT} - 1))` is evaluated in the
//! algebraically equivalent form
//!
//! ```text
//! (v0 - r) / (1 - r)  -  (1 - v0) / ((1 - r) * expm1(a T))
//! ```
//!
//! which needs no special casing for large `aT` (the second term underflows
//! to zero) and stays accurate for small `aT`. All results are clamped to
//! `[0, 1]`.

use crate::error::{Error, Result};
use crate::synthesis::{Certificate, ProblemVariant};

/// `a` at or below this value uses the `a <= 0` branch for Problem II.
pub const A_SWITCH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn require(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(what()))
    }
}

fn check_finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        require(v.is_finite(), || format!("{name} = {v} is not finite"))?;
    }
    Ok(())
}

fn check_problem_i(h0: f64, a: f64, b: f64) -> Result<()> {
    check_finite(&[("h0", h0), ("a", a), ("b", b)])?;
    require(a > b, || format!("need a > b, got a = {a}, b = {b}"))?;
    require(b >= 0.0, || format!("need b >= 0, got {b}"))?;
    require((0.0..=1.0).contains(&h0), || {
        format!("need h0 in [0, 1], got {h0}")
    })
}

fn check_problem_ii(g0: f64, a: f64, b: f64) -> Result<()> {
    check_finite(&[("g0", g0), ("a", a), ("b", b)])?;
    require(a > b, || format!("need a > b, got a = {a}, b = {b}"))?;
    require(g0 <= 1.0, || format!("need g0 <= 1, got {g0}"))
}

fn check_horizon(t: f64) -> Result<()> {
    require(t > 0.0 && !t.is_nan(), || {
        format!("need a positive horizon, got {t}")
    })
}

/// Shared exponential form; requires `a > 0`.
fn exponential_bound(v0: f64, a: f64, b: f64, horizon: f64) -> f64 {
    let r = b / a;
    let tail = (1.0 - v0) / ((1.0 - r) * (a * horizon).exp_m1());
    clamp01((v0 - r) / (1.0 - r) - tail)
}

fn stationary_bound(v0: f64, a: f64, b: f64) -> f64 {
    clamp01((v0 - b / a) / (1.0 - b / a))
}

pub fn exit_bound_finite_i(h0: f64, a: f64, b: f64, horizon: f64) -> Result<f64> {
    check_problem_i(h0, a, b)?;
    check_horizon(horizon)?;
    Ok(exponential_bound(h0, a, b, horizon))
}

pub fn exit_bound_infinite_i(h0: f64, a: f64, b: f64) -> Result<f64> {
    check_problem_i(h0, a, b)?;
    Ok(stationary_bound(h0, a, b))
}

/// The `b = 0` special case: the bound is the barrier value itself.
pub fn exit_bound_zero_b(h0: f64) -> Result<f64> {
    require((0.0..=1.0).contains(&h0), || {
        format!("need h0 in [0, 1], got {h0}")
    })?;
    Ok(h0)
}

pub fn exit_bound_finite_ii(g0: f64, a: f64, b: f64, horizon: f64) -> Result<f64> {
    check_problem_ii(g0, a, b)?;
    check_horizon(horizon)?;
    if a > A_SWITCH_EPS {
        Ok(exponential_bound(g0, a, b, horizon))
    } else {
        Ok(clamp01(1.0 - (g0 - 1.0) / ((b - a) * horizon)))
    }
}

pub fn exit_bound_infinite_ii(g0: f64, a: f64, b: f64) -> Result<f64> {
    check_problem_ii(g0, a, b)?;
    if a > A_SWITCH_EPS {
        Ok(stationary_bound(g0, a, b))
    } else {
        Ok(1.0)
    }
}

pub fn exit_bound(
    variant: ProblemVariant,
    v0: f64,
    a: f64,
    b: f64,
    horizon: Horizon,
) -> Result<f64> {
    match (variant, horizon) {
        (ProblemVariant::ProblemI, Horizon::Finite(t)) => exit_bound_finite_i(v0, a, b, t),
        (ProblemVariant::ProblemI, Horizon::Infinite) => exit_bound_infinite_i(v0, a, b),
        (ProblemVariant::ProblemII, Horizon::Finite(t)) => exit_bound_finite_ii(v0, a, b, t),
        (ProblemVariant::ProblemII, Horizon::Infinite) => exit_bound_infinite_ii(v0, a, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub t: f64,
    pub barrier_value: f64,
    /// `None` for steps where synthesis fell back.
    pub certificate: Option<(f64, f64)>,
}

impl BoundSample {
    pub fn new(t: f64, barrier_value: f64, certificate: Option<&Certificate>) -> Self {
        Self {
            t,
            barrier_value,
            certificate: certificate.map(|c| (c.a, c.b)),
        }
    }
}

/// Bound on exiting within the remaining horizon, evaluated along a path.
///
/// Barrier values that overshoot a boundary (as happens on the frozen tail of
/// a stopped path) are clamped into the formula's domain first, so a path
/// already at its target reports 1. With no time left the bound is the
/// indicator of having reached the target.
pub fn bound_curve(
    variant: ProblemVariant,
    samples: &[BoundSample],
    horizon: Horizon,
) -> Result<Vec<(f64, Option<f64>)>> {
    samples
        .iter()
        .map(|s| {
            let v = match variant {
                ProblemVariant::ProblemI => s.barrier_value.clamp(0.0, 1.0),
                ProblemVariant::ProblemII => s.barrier_value.min(1.0),
            };
            let bound = match (s.certificate, horizon) {
                (None, _) => None,
                (Some((a, b)), Horizon::Infinite) => {
                    Some(exit_bound(variant, v, a, b, Horizon::Infinite)?)
                }
                (Some((a, b)), Horizon::Finite(total)) => {
                    if s.t > total + 1e-12 {
                        return Err(Error::Domain(format!(
                            "sample time {} exceeds the horizon {total}",
                            s.t
                        )));
                    }
                    let remaining = total - s.t;
                    if remaining <= 0.0 {
                        Some(if v >= 1.0 { 1.0 } else { 0.0 })
                    } else {
                        Some(exit_bound(variant, v, a, b, Horizon::Finite(remaining))?)
                    }
                }
            };
            Ok((s.t, bound))
        })
        .collect()
}
