//! Infinitesimal generator of a barrier along the controlled SDE.
//!
//! For a twice-differentiable `v`,
//! `L v(x) = grad v . (f1 + f2 u) + 1/2 tr(sigma^T H_v sigma)`, which is affine
//! in `u`. The decomposition keeps the control-free part `c0` and the
//! coefficient row `c = grad v^T f2` separate so the synthesis LP can treat
//! `u` as a decision variable.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{check_state, Barrier, ControlVector, SdeModel, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorDecomposition {
    pub c0: f64,
    pub c: DVector<f64>,
}

impl GeneratorDecomposition {
    pub fn value(&self, u: &ControlVector) -> Result<f64> {
        if u.len() != self.c.len() {
            return Err(Error::shape("control vector", self.c.len(), u.len()));
        }
        Ok(self.c0 + self.c.dot(u))
    }
}

pub fn generator_decompose(
    model: &dyn SdeModel,
    bf: &dyn Barrier,
    x: &StateVector,
) -> Result<GeneratorDecomposition> {
    let n = model.state_dim();
    if bf.dim() != n {
        return Err(Error::shape("barrier dimension", n, bf.dim()));
    }
    check_state(x, n)?;

    let grad = bf.gradient(x);
    let hess = bf.hessian(x);
    let sigma = model.diffusion(x);
    let f1 = model.drift(x);
    let f2 = model.control_matrix(x);

    let trace = (sigma.transpose() * hess * &sigma).trace();
    let c0 = grad.dot(&f1) + 0.5 * trace;
    let c = f2.tr_mul(&grad);
    Ok(GeneratorDecomposition { c0, c })
}

pub fn generator_value(decomp: &GeneratorDecomposition, u: &ControlVector) -> Result<f64> {
    decomp.value(u)
}
