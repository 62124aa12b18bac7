//! Safe exit controllers for control-affine stochastic differential equations.
//!
//! The controller is implicit: at every visited state a small linear program
//! over `(u, a, b)` is solved so that the infinitesimal generator of a barrier
//! function `v` satisfies `L v(x) >= a v(x) - b`. The certificate `(a, b)`
//! feeds closed-form lower bounds on the probability of leaving the
//! uncomfortable set through its target boundary, and those bounds are checked
//! against Monte Carlo estimates of the stopped process.
//!
//! Module map:
//!
//! - [`model`]: SDE models (ACC, linear) and quadratic barrier functions.
//! - [`generator`]: the generator split into a control-free part and a
//!   control coefficient vector.
//! - [`lp`]: dense two-phase simplex plus a vertex-enumeration oracle.
//! - [`synthesis`]: the per-state programs for both problem variants.
//! - [`bounds`]: analytic exit-probability lower bounds.
//! - [`sim`]: Euler–Maruyama simulation of the stopped closed-loop process.
//! - [`mc`]: parallel, reproducible Monte Carlo estimation.
//! - [`cli`]: scenario configs, experiment runs and file outputs.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod generator;
pub mod lp;
pub mod mc;
pub mod model;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
