//! Small dense linear programs: `maximize c.z` subject to `A z <= b` and
//! per-variable bounds.
//!
//! [`lp_solve`] is a two-phase tableau simplex with Bland's rule. It is meant
//! for the handful of variables the synthesis programs use, not for sparse or
//! large instances. [`lp_brute_force`] enumerates vertices and serves as the
//! reference the simplex is tested against.

mod brute;
mod random;
mod simplex;

pub use brute::lp_brute_force;
pub use random::random_instance;
pub use simplex::lp_solve;

use crate::error::{Error, Result};

/// Absolute slack used when checking a reported optimum against its rows.
pub const POST_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBound {
    pub lo: f64,
    pub hi: f64,
}

impl VarBound {
    pub const FREE: VarBound = VarBound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn between(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn at_least(lo: f64) -> Self {
        Self {
            lo,
            hi: f64::INFINITY,
        }
    }

    pub fn at_most(hi: f64) -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn nonnegative() -> Self {
        Self::at_least(0.0)
    }

    pub fn finite_count(&self) -> usize {
        self.lo.is_finite() as usize + self.hi.is_finite() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBound>,
}

impl LpProblem {
    /// A problem over `objective.len()` free variables with no rows.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let d = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![VarBound::FREE; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    /// Adds `coeffs . z <= rhs`.
    pub fn with_row(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self
    }

    pub fn with_bound(mut self, var: usize, bound: VarBound) -> Self {
        self.bounds[var] = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Parameter("LP needs at least one variable".into()));
        }
        if self.bounds.len() != d {
            return Err(Error::shape("LP bounds", d, self.bounds.len()));
        }
        if self.rows.len() != self.rhs.len() {
            return Err(Error::shape(
                "LP right-hand side",
                self.rows.len(),
                self.rhs.len(),
            ));
        }
        for row in &self.rows {
            if row.len() != d {
                return Err(Error::shape("LP row", d, row.len()));
            }
        }
        let entries = self
            .objective
            .iter()
            .chain(self.rhs.iter())
            .chain(self.rows.iter().flatten());
        if entries.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("LP coefficients must be finite".into()));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lo.is_nan() || b.hi.is_nan() || b.lo == f64::INFINITY || b.hi == f64::NEG_INFINITY
            {
                return Err(Error::Parameter(format!(
                    "variable {j} has an invalid bound"
                )));
            }
            if b.lo > b.hi {
                return Err(Error::Parameter(format!(
                    "variable {j}: lo {} exceeds hi {}",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `z` (zero when feasible).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let rows = self.rows.iter().zip(&self.rhs).map(|(row, b)| {
            let lhs: f64 = row.iter().zip(z).map(|(a, v)| a * v).sum();
            lhs - b
        });
        let bounds = self
            .bounds
            .iter()
            .zip(z)
            .flat_map(|(b, v)| [b.lo - v, v - b.hi]);
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `z` and `objective_value` are meaningful only when `status` is `Optimal`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, d: usize) -> Self {
        Self {
            status,
            z: vec![f64::NAN; d],
            objective_value: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
