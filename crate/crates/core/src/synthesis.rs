//! Per-state linear programs that define the exit controller implicitly.
//!
//! Decision variables are `z = (u_1, .., u_m, a, b)`. Both variants maximize
//! `a - w b` subject to the generator condition `L v(x) >= a v(x) - b`, i.e.
//! `a v(x) - b - c.u <= c0`, and the strict ordering `a > b`, realized as
//! `b - a <= -eps`. Problem I additionally keeps `b >= 0` and `a <= delta`
//! (`a` has no lower bound); Problem II boxes both `a` and `b` in
//! `[-delta, delta]`.
//!
//! The program is solved at the current state only. Nothing here certifies
//! the condition over the whole uncomfortable set.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{generator_decompose, GeneratorDecomposition};
use crate::lp::{lp_solve, LpProblem, LpStatus, VarBound};
use crate::model::{Barrier, ControlBox, ControlVector, SdeModel, StateVector};

pub const DEFAULT_STRICT_MARGIN: f64 = 1e-6;
pub const DEFAULT_LEXICOGRAPHIC_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemVariant {
    /// Safe-set boundary is part of the uncomfortable-set boundary: target
    /// `{h = 1}`, failure `{h = 0}`.
    #[serde(rename = "problem_i")]
    ProblemI,
    /// Boundaries are disjoint: the whole boundary `{g = 1}` is the target.
    #[serde(rename = "problem_ii")]
    ProblemII,
}

impl fmt::Display for ProblemVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemVariant::ProblemI => write!(f, "problem_i"),
            ProblemVariant::ProblemII => write!(f, "problem_ii"),
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub variant: ProblemVariant,
    pub barrier: Arc<dyn Barrier>,
    pub weight: f64,
    pub delta: f64,
    pub strict_margin_eps: f64,
    pub lexicographic_threshold: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("variant", &self.variant)
            .field("weight", &self.weight)
            .field("delta", &self.delta)
            .field("strict_margin_eps", &self.strict_margin_eps)
            .field("lexicographic_threshold", &self.lexicographic_threshold)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        variant: ProblemVariant,
        barrier: Arc<dyn Barrier>,
        weight: f64,
        delta: f64,
    ) -> Result<Self> {
        let spec = Self {
            variant,
            barrier,
            weight,
            delta,
            strict_margin_eps: DEFAULT_STRICT_MARGIN,
            lexicographic_threshold: DEFAULT_LEXICOGRAPHIC_THRESHOLD,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_strict_margin(mut self, eps: f64) -> Result<Self> {
        self.strict_margin_eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lexicographic_threshold(mut self, threshold: f64) -> Result<Self> {
        self.lexicographic_threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    /// `eps` is not required to be smaller than `delta`; a contradictory pair
    /// just makes every program infeasible.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::Parameter(format!(
                "weight w must be finite and >= 0, got {}",
                self.weight
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Parameter(format!(
                "delta must be finite and > 0, got {}",
                self.delta
            )));
        }
        if !(self.strict_margin_eps.is_finite() && self.strict_margin_eps > 0.0) {
            return Err(Error::Parameter(format!(
                "strict margin must be finite and > 0, got {}",
                self.strict_margin_eps
            )));
        }
        if self.lexicographic_threshold.is_nan() || self.lexicographic_threshold <= 0.0 {
            return Err(Error::Parameter(
                "lexicographic threshold must be > 0".into(),
            ));
        }
        Ok(())
    }

    fn lexicographic(&self) -> bool {
        self.weight >= self.lexicographic_threshold
    }
}

/// `(a, b)` with `L v >= a v - b` at the state it was computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub a: f64,
    pub b: f64,
    /// `a - w b` at the returned point.
    pub lp_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisStatus {
    Feasible,
    Fallback,
}

impl fmt::Display for SynthesisStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthesisStatus::Feasible => write!(f, "feasible"),
            SynthesisStatus::Fallback => write!(f, "fallback"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub u: ControlVector,
    /// `None` when the program was infeasible and the fallback control was used.
    pub certificate: Option<Certificate>,
}

impl SynthesisResult {
    pub fn status(&self) -> SynthesisStatus {
        match self.certificate {
            Some(_) => SynthesisStatus::Feasible,
            None => SynthesisStatus::Fallback,
        }
    }
}

fn build_lp(
    decomp: &GeneratorDecomposition,
    barrier_value: f64,
    spec: &ProblemSpec,
    control_box: &ControlBox,
    a_bound: VarBound,
    b_bound: VarBound,
) -> LpProblem {
    let m = control_box.dim();
    let (ia, ib) = (m, m + 1);

    let mut objective = vec![0.0; m + 2];
    objective[ia] = 1.0;
    objective[ib] = -spec.weight;

    let mut generator_row: Vec<f64> = decomp.c.iter().map(|c| -c).collect();
    generator_row.extend([barrier_value, -1.0]);

    let mut order_row = vec![0.0; m + 2];
    order_row[ia] = -1.0;
    order_row[ib] = 1.0;

    let mut p = LpProblem::maximize(objective)
        .with_row(generator_row, decomp.c0)
        .with_row(order_row, -spec.strict_margin_eps);
    for (j, (lo, hi)) in control_box.lo().iter().zip(control_box.hi()).enumerate() {
        p = p.with_bound(j, VarBound::between(*lo, *hi));
    }
    p.with_bound(ia, a_bound).with_bound(ib, b_bound)
}

pub fn build_lp_problem_i(
    decomp: &GeneratorDecomposition,
    h_value: f64,
    spec: &ProblemSpec,
    control_box: &ControlBox,
) -> LpProblem {
    if !(h_value > 0.0 && h_value < 1.0) {
        log::warn!("problem I program built at h = {h_value}, outside the open interval (0, 1)");
    }
    build_lp(
        decomp,
        h_value,
        spec,
        control_box,
        VarBound::at_most(spec.delta),
        VarBound::nonnegative(),
    )
}

pub fn build_lp_problem_ii(
    decomp: &GeneratorDecomposition,
    g_value: f64,
    spec: &ProblemSpec,
    control_box: &ControlBox,
) -> LpProblem {
    if g_value.is_nan() || g_value >= 1.0 {
        log::warn!("problem II program built at g = {g_value}, not below 1");
    }
    let ab = VarBound::between(-spec.delta, spec.delta);
    build_lp(decomp, g_value, spec, control_box, ab, ab)
}

/// Bang-bang control maximizing `c.u` over the box; ties go to the lower edge.
pub fn fallback_control(
    decomp: &GeneratorDecomposition,
    control_box: &ControlBox,
) -> ControlVector {
    ControlVector::from_iterator(
        control_box.dim(),
        decomp
            .c
            .iter()
            .zip(control_box.lo().iter().zip(control_box.hi()))
            .map(|(c, (lo, hi))| if *c > 0.0 { *hi } else { *lo }),
    )
}

/// Solves the program, lexicographically when the weight is huge: first
/// minimize `b`, then maximize `a` with `b` held at its optimum. Returns
/// `None` when infeasible.
fn solve_program(p: &LpProblem, spec: &ProblemSpec) -> Result<Option<Vec<f64>>> {
    let d = p.dim();
    let (ia, ib) = (d - 2, d - 1);
    if !spec.lexicographic() {
        let s = lp_solve(p)?;
        return Ok(match s.status {
            LpStatus::Optimal => Some(s.z),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => {
                return Err(Error::Numerical(
                    "synthesis program reported unbounded".into(),
                ))
            }
        });
    }

    let mut stage = p.clone();
    stage.objective = vec![0.0; d];
    stage.objective[ib] = -1.0;
    let first = lp_solve(&stage)?;
    match first.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => {
            return Err(Error::Numerical("b is unbounded below in stage one".into()))
        }
    }
    let b_star = first.z[ib];
    stage.bounds[ib].hi = stage.bounds[ib].hi.min(b_star);
    stage.objective[ib] = 0.0;
    stage.objective[ia] = 1.0;
    let second = lp_solve(&stage)?;
    Ok(match second.status {
        LpStatus::Optimal => Some(second.z),
        // Stage one's point stays feasible for stage two.
        _ => Some(first.z),
    })
}

pub fn synthesize_control(
    model: &dyn SdeModel,
    spec: &ProblemSpec,
    x: &StateVector,
) -> Result<SynthesisResult> {
    let decomp = generator_decompose(model, spec.barrier.as_ref(), x)?;
    let value = spec.barrier.value(x);
    Ok(synthesize_from_parts(
        &decomp,
        value,
        spec,
        model.control_box(),
    ))
}

/// LP failures other than infeasibility (pivot budget, unboundedness from
/// bad data) also fall back rather than abort a path.
pub fn synthesize_from_parts(
    decomp: &GeneratorDecomposition,
    barrier_value: f64,
    spec: &ProblemSpec,
    control_box: &ControlBox,
) -> SynthesisResult {
    let p = match spec.variant {
        ProblemVariant::ProblemI => build_lp_problem_i(decomp, barrier_value, spec, control_box),
        ProblemVariant::ProblemII => build_lp_problem_ii(decomp, barrier_value, spec, control_box),
    };
    let m = control_box.dim();
    match solve_program(&p, spec) {
        Ok(Some(z)) => {
            let u = control_box.clamp(&ControlVector::from_row_slice(&z[..m]));
            let (a, b) = (z[m], z[m + 1]);
            SynthesisResult {
                u,
                certificate: Some(Certificate {
                    a,
                    b,
                    lp_objective: a - spec.weight * b,
                }),
            }
        }
        Ok(None) => SynthesisResult {
            u: fallback_control(decomp, control_box),
            certificate: None,
        },
        Err(e) => {
            log::warn!("synthesis LP failed ({e}); using fallback control");
            SynthesisResult {
                u: fallback_control(decomp, control_box),
                certificate: None,
            }
        }
    }
}
