//! Controlled SDE models `dx = (f1(x) + f2(x) u) dt + sigma(x) dW` and the
//! twice-differentiable barrier functions that carve out the safe and
//! uncomfortable sets.
//!
//! Models and barriers are immutable after construction and every evaluator
//! is a pure function of the state, so a single instance is shared by all
//! simulation workers. Local Lipschitz continuity of the coefficients is
//! assumed, not checked.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type StateVector = DVector<f64>;
pub type ControlVector = DVector<f64>;

/// Admissible input set: a box `lo <= u <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ControlBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::shape("control box", lo.len(), hi.len()));
        }
        if lo.is_empty() {
            return Err(Error::Parameter(
                "control box must have at least one input".into(),
            ));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::Parameter(format!(
                    "control box bound {i} is not finite"
                )));
            }
            if l > h {
                return Err(Error::Parameter(format!(
                    "control box bound {i}: lo {l} exceeds hi {h}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![-radius; dim], vec![radius; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, u: &ControlVector, tol: f64) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    pub fn clamp(&self, u: &ControlVector) -> ControlVector {
        ControlVector::from_iterator(
            u.len(),
            u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(v, (l, h))| v.clamp(*l, *h)),
        )
    }
}

/// Coefficients of a control-affine SDE with `n` states, `m` inputs and a
/// `k`-dimensional Wiener process.
pub trait SdeModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn control_box(&self) -> &ControlBox;

    fn control_dim(&self) -> usize {
        self.control_box().dim()
    }

    /// `f1(x)`, length `n`.
    fn drift(&self, x: &StateVector) -> StateVector;

    /// `f2(x)`, shape `n x m`.
    fn control_matrix(&self, x: &StateVector) -> DMatrix<f64>;

    /// `sigma(x)`, shape `n x k`.
    fn diffusion(&self, x: &StateVector) -> DMatrix<f64>;
}

pub(crate) fn check_state(x: &StateVector, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::shape("state vector", n, x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("state has non-finite coordinates".into()));
    }
    Ok(())
}

pub fn evaluate_drift(model: &dyn SdeModel, x: &StateVector) -> Result<StateVector> {
    check_state(x, model.state_dim())?;
    Ok(model.drift(x))
}

/// Smoke-evaluates every coefficient at `x` and checks declared shapes and
/// finiteness.
pub fn check_model_at(model: &dyn SdeModel, x: &StateVector) -> Result<()> {
    let (n, m, k) = (model.state_dim(), model.control_dim(), model.noise_dim());
    check_state(x, n)?;
    let f1 = model.drift(x);
    if f1.len() != n {
        return Err(Error::shape("drift", n, f1.len()));
    }
    let f2 = model.control_matrix(x);
    if f2.nrows() != n {
        return Err(Error::shape("control matrix rows", n, f2.nrows()));
    }
    if f2.ncols() != m {
        return Err(Error::shape("control matrix columns", m, f2.ncols()));
    }
    let sigma = model.diffusion(x);
    if sigma.nrows() != n {
        return Err(Error::shape("diffusion rows", n, sigma.nrows()));
    }
    if sigma.ncols() != k {
        return Err(Error::shape("diffusion columns", k, sigma.ncols()));
    }
    let finite = f1
        .iter()
        .chain(f2.iter())
        .chain(sigma.iter())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numerical("model coefficients are not finite".into()));
    }
    Ok(())
}

/// Reduced adaptive-cruise-control model with state `(v_follow, distance)`.
///
/// The leading vehicle moves at a constant velocity, so its state drops out:
/// `dv = (-F_r(v) + u) / M dt + dW1` and `dd = (v_lead - v) dt + dW2`, with
/// aerodynamic drag `F_r(v) = f0 + f1 v + f2 v^2`.
#[derive(Debug, Clone)]
pub struct AccModel {
    drag: [f64; 3],
    mass: f64,
    lead_velocity: f64,
    control_box: ControlBox,
}

impl AccModel {
    pub fn drag_force(&self, velocity: f64) -> f64 {
        let [f0, f1, f2] = self.drag;
        f0 + f1 * velocity + f2 * velocity * velocity
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn lead_velocity(&self) -> f64 {
        self.lead_velocity
    }
}

impl Default for AccModel {
    fn default() -> Self {
        acc_model(0.1, 5.0, 0.25, 1650.0, 0.5, -1.0, 1.0).expect("default ACC parameters are valid")
    }
}

pub fn acc_model(
    f0: f64,
    f1: f64,
    f2: f64,
    mass: f64,
    lead_velocity: f64,
    u_lo: f64,
    u_hi: f64,
) -> Result<AccModel> {
    for (name, v) in [
        ("f0", f0),
        ("f1", f1),
        ("f2", f2),
        ("lead_velocity", lead_velocity),
    ] {
        if !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be finite")));
        }
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Parameter(format!(
            "mass must be positive, got {mass}"
        )));
    }
    Ok(AccModel {
        drag: [f0, f1, f2],
        mass,
        lead_velocity,
        control_box: ControlBox::new(vec![u_lo], vec![u_hi])?,
    })
}

impl SdeModel for AccModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn control_box(&self) -> &ControlBox {
        &self.control_box
    }

    fn drift(&self, x: &StateVector) -> StateVector {
        StateVector::from_vec(vec![
            -self.drag_force(x[0]) / self.mass,
            self.lead_velocity - x[0],
        ])
    }

    fn control_matrix(&self, _x: &StateVector) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[1.0 / self.mass, 0.0])
    }

    fn diffusion(&self, _x: &StateVector) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

/// Model with affine drift and constant control and diffusion matrices:
/// `dx = (A x + c + B u) dt + S dW`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    drift_matrix: DMatrix<f64>,
    drift_offset: DVector<f64>,
    control_matrix: DMatrix<f64>,
    diffusion: DMatrix<f64>,
    control_box: ControlBox,
}

impl LinearModel {
    pub fn new(
        drift_matrix: DMatrix<f64>,
        drift_offset: DVector<f64>,
        control_matrix: DMatrix<f64>,
        diffusion: DMatrix<f64>,
        control_box: ControlBox,
    ) -> Result<Self> {
        let n = drift_offset.len();
        if n == 0 {
            return Err(Error::Parameter(
                "linear model needs at least one state".into(),
            ));
        }
        if drift_matrix.nrows() != n || drift_matrix.ncols() != n {
            return Err(Error::shape(
                "drift matrix",
                n,
                drift_matrix.nrows().max(drift_matrix.ncols()),
            ));
        }
        if control_matrix.nrows() != n {
            return Err(Error::shape(
                "control matrix rows",
                n,
                control_matrix.nrows(),
            ));
        }
        if control_matrix.ncols() != control_box.dim() {
            return Err(Error::shape(
                "control matrix columns",
                control_box.dim(),
                control_matrix.ncols(),
            ));
        }
        if diffusion.nrows() != n || diffusion.ncols() == 0 {
            return Err(Error::shape("diffusion rows", n, diffusion.nrows()));
        }
        let all = drift_matrix
            .iter()
            .chain(drift_offset.iter())
            .chain(control_matrix.iter())
            .chain(diffusion.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "linear model coefficients must be finite".into(),
            ));
        }
        Ok(Self {
            drift_matrix,
            drift_offset,
            control_matrix,
            diffusion,
            control_box,
        })
    }

    /// One-dimensional `dx = rate dt` with no noise and an input that has no
    /// effect. Useful for checking exit timing against closed forms.
    pub fn deterministic_1d(rate: f64) -> Result<Self> {
        Self::new(
            DMatrix::zeros(1, 1),
            DVector::from_element(1, rate),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            ControlBox::symmetric(1, 1.0)?,
        )
    }
}

impl SdeModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.drift_offset.len()
    }

    fn noise_dim(&self) -> usize {
        self.diffusion.ncols()
    }

    fn control_box(&self) -> &ControlBox {
        &self.control_box
    }

    fn drift(&self, x: &StateVector) -> StateVector {
        &self.drift_matrix * x + &self.drift_offset
    }

    fn control_matrix(&self, _x: &StateVector) -> DMatrix<f64> {
        self.control_matrix.clone()
    }

    fn diffusion(&self, _x: &StateVector) -> DMatrix<f64> {
        self.diffusion.clone()
    }
}

/// Scalar field `v(x)` with analytic first and second derivatives.
pub trait Barrier: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &StateVector) -> f64;

    fn gradient(&self, x: &StateVector) -> DVector<f64>;

    fn hessian(&self, x: &StateVector) -> DMatrix<f64>;
}

/// `v(x) = x^T Q x + l . x + c`, with `Q` stored symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBarrier {
    quad: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl QuadraticBarrier {
    pub fn new(quad: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Result<Self> {
        let n = linear.len();
        if n == 0 {
            return Err(Error::Parameter(
                "barrier needs at least one coordinate".into(),
            ));
        }
        if quad.nrows() != n || quad.ncols() != n {
            return Err(Error::shape(
                "barrier quadratic form",
                n,
                quad.nrows().max(quad.ncols()),
            ));
        }
        if !constant.is_finite() || quad.iter().chain(linear.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "barrier coefficients must be finite".into(),
            ));
        }
        let quad = (&quad + quad.transpose()) * 0.5;
        Ok(Self {
            quad,
            linear,
            constant,
        })
    }

    pub fn affine(linear: DVector<f64>, constant: f64) -> Result<Self> {
        let n = linear.len();
        Self::new(DMatrix::zeros(n, n), linear, constant)
    }

    pub fn quad(&self) -> &DMatrix<f64> {
        &self.quad
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

impl Barrier for QuadraticBarrier {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &StateVector) -> f64 {
        x.dot(&(&self.quad * x)) + self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &StateVector) -> DVector<f64> {
        &self.quad * x * 2.0 + &self.linear
    }

    fn hessian(&self, _x: &StateVector) -> DMatrix<f64> {
        &self.quad * 2.0
    }
}

/// The three ACC scenarios. Scenarios 1 and 2 share their zero level set with
/// the safe-set boundary; scenario 3 is a disk strictly inside the safe set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `h = (x3 - 1.8 x1) / 4`
    Headway,
    /// `h = (x1^2 + x3^2 - 1) / 8`
    Annulus,
    /// `g = ((x1 - 10)^2 + (x3 - 10)^2) / 64`
    Disk,
}

impl Scenario {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Scenario::Headway),
            2 => Ok(Scenario::Annulus),
            3 => Ok(Scenario::Disk),
            other => Err(Error::Parameter(format!(
                "unknown scenario {other}, expected 1, 2 or 3"
            ))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Scenario::Headway => 1,
            Scenario::Annulus => 2,
            Scenario::Disk => 3,
        }
    }

    pub fn barrier(self) -> QuadraticBarrier {
        let built = match self {
            Scenario::Headway => {
                QuadraticBarrier::affine(DVector::from_vec(vec![-0.45, 0.25]), 0.0)
            }
            Scenario::Annulus => {
                QuadraticBarrier::new(DMatrix::identity(2, 2) / 8.0, DVector::zeros(2), -1.0 / 8.0)
            }
            Scenario::Disk => QuadraticBarrier::new(
                DMatrix::identity(2, 2) / 64.0,
                DVector::from_vec(vec![-20.0 / 64.0, -20.0 / 64.0]),
                200.0 / 64.0,
            ),
        };
        built.expect("scenario coefficients are valid")
    }
}

pub fn scenario_barrier(id: u8) -> Result<QuadraticBarrier> {
    Scenario::from_id(id).map(Scenario::barrier)
}

/// Analytic-vs-finite-difference comparison at one state.
///
/// Errors are `|analytic - fd| / max(1, |fd|)`; Hessian entries are compared
/// against central differences of the analytic gradient.
#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub gradient_errors: Vec<f64>,
    pub hessian_errors: DMatrix<f64>,
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
    pub max_asymmetry: f64,
    pub tol: f64,
    pub passed: bool,
}

pub const FD_STEP: f64 = 1e-5;

pub fn check_barrier_derivatives(bf: &dyn Barrier, x: &StateVector, tol: f64) -> DerivativeReport {
    let n = bf.dim();
    let grad = bf.gradient(x);
    let hess = bf.hessian(x);
    let rel = |analytic: f64, fd: f64| (analytic - fd).abs() / fd.abs().max(1.0);

    let mut gradient_errors = vec![0.0; n];
    let mut hessian_errors = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += FD_STEP;
        xm[j] -= FD_STEP;
        let fd = (bf.value(&xp) - bf.value(&xm)) / (2.0 * FD_STEP);
        gradient_errors[j] = rel(grad[j], fd);

        let dgrad = (bf.gradient(&xp) - bf.gradient(&xm)) / (2.0 * FD_STEP);
        for i in 0..n {
            hessian_errors[(i, j)] = rel(hess[(i, j)], dgrad[i]);
        }
    }
    let max_gradient_error = gradient_errors.iter().cloned().fold(0.0, f64::max);
    let max_hessian_error = hessian_errors.iter().cloned().fold(0.0, f64::max);
    let max_asymmetry = (&hess - hess.transpose()).amax();
    let passed = gradient_errors
        .iter()
        .chain(hessian_errors.iter())
        .all(|e| *e < tol)
        && max_asymmetry < 1e-12;
    DerivativeReport {
        gradient_errors,
        hessian_errors,
        max_gradient_error,
        max_hessian_error,
        max_asymmetry,
        tol,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::from_row_slice(v)
    }

    #[test]
    fn acc_drift_hand_values() {
        let acc = AccModel::default();
        let d = evaluate_drift(&acc, &sv(&[0.0, 10.0])).unwrap();
        assert!((d[0] - (-0.1 / 1650.0)).abs() < 1e-15);
        assert!((d[0] - -6.0606e-5).abs() < 1e-9);
        assert_eq!(d[1], 0.5);

        let d = evaluate_drift(&acc, &sv(&[-0.5, 1.5])).unwrap();
        assert!((d[0] - 2.3375 / 1650.0).abs() < 1e-15);
        assert!((d[0] - 1.41667e-3).abs() < 1e-8);
        assert_eq!(d[1], 1.0);
    }

    #[test]
    fn zero_drift_model() {
        let m = LinearModel::new(
            DMatrix::zeros(3, 3),
            DVector::zeros(3),
            DMatrix::zeros(3, 1),
            DMatrix::identity(3, 3),
            ControlBox::symmetric(1, 1.0).unwrap(),
        )
        .unwrap();
        let d = evaluate_drift(&m, &sv(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(d, DVector::zeros(3));
    }

    #[test]
    fn drift_rejects_wrong_dimension() {
        let acc = AccModel::default();
        assert!(matches!(
            evaluate_drift(&acc, &sv(&[1.0, 2.0, 3.0])),
            Err(Error::Shape {
                expected: 2,
                got: 3,
                ..
            })
        ));
    }

    #[test]
    fn acc_defaults_and_shapes() {
        let acc = AccModel::default();
        assert_eq!(
            (acc.state_dim(), acc.control_dim(), acc.noise_dim()),
            (2, 1, 2)
        );
        assert_eq!(acc.control_box().lo(), &[-1.0]);
        assert_eq!(acc.control_box().hi(), &[1.0]);
        let x = sv(&[3.0, -7.0]);
        let f2 = acc.control_matrix(&x);
        assert_eq!(f2.shape(), (2, 1));
        assert_eq!(f2[(0, 0)], 1.0 / 1650.0);
        assert_eq!(f2[(1, 0)], 0.0);
        assert_eq!(acc.diffusion(&x), DMatrix::identity(2, 2));
        check_model_at(&acc, &x).unwrap();
    }

    #[test]
    fn acc_rejects_bad_mass() {
        assert!(matches!(
            acc_model(0.1, 5.0, 0.25, 0.0, 0.5, -1.0, 1.0),
            Err(Error::Parameter(_))
        ));
        assert!(acc_model(0.1, 5.0, 0.25, -3.0, 0.5, -1.0, 1.0).is_err());
        assert!(acc_model(0.1, 5.0, 0.25, 1650.0, 0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn scenario_barrier_hand_values() {
        let h1 = scenario_barrier(1).unwrap();
        let x = sv(&[-0.5, 1.5]);
        assert!((h1.value(&x) - 0.6).abs() < 1e-15);
        assert_eq!(h1.gradient(&x), DVector::from_vec(vec![-0.45, 0.25]));
        assert_eq!(h1.hessian(&x), DMatrix::zeros(2, 2));

        let g3 = scenario_barrier(3).unwrap();
        let c = sv(&[10.0, 10.0]);
        assert_eq!(g3.value(&c), 0.0);
        assert_eq!(g3.gradient(&c), DVector::zeros(2));
        assert_eq!(
            g3.hessian(&c),
            DMatrix::from_diagonal_element(2, 2, 1.0 / 32.0)
        );

        let h2 = scenario_barrier(2).unwrap();
        assert_eq!(h2.value(&sv(&[0.0, 1.0])), 0.0);

        assert!(matches!(scenario_barrier(4), Err(Error::Parameter(_))));
        assert!(scenario_barrier(0).is_err());
    }

    #[test]
    fn derivative_checks_pass_on_builtins() {
        assert!(
            check_barrier_derivatives(&scenario_barrier(1).unwrap(), &sv(&[1.0, 1.0]), 1e-5).passed
        );
        assert!(
            check_barrier_derivatives(&scenario_barrier(3).unwrap(), &sv(&[12.0, 8.0]), 1e-5)
                .passed
        );
    }

    struct OffsetGradient(QuadraticBarrier);

    impl Barrier for OffsetGradient {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &StateVector) -> f64 {
            self.0.value(x)
        }
        fn gradient(&self, x: &StateVector) -> DVector<f64> {
            self.0.gradient(x).add_scalar(1.0)
        }
        fn hessian(&self, x: &StateVector) -> DMatrix<f64> {
            self.0.hessian(x)
        }
    }

    #[test]
    fn derivative_check_catches_wrong_gradient() {
        let bad = OffsetGradient(scenario_barrier(1).unwrap());
        let report = check_barrier_derivatives(&bad, &sv(&[1.0, 1.0]), 1e-5);
        assert!(!report.passed);
        assert!((report.max_gradient_error - 1.0).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_quadratic_form_is_symmetrized() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = QuadraticBarrier::new(q.clone(), DVector::zeros(2), 0.0).unwrap();
        let x = sv(&[0.7, -1.3]);
        assert!((b.value(&x) - x.dot(&(&q * &x))).abs() < 1e-14);
        let h = b.hessian(&x);
        assert_eq!(h, h.transpose());
    }

    proptest! {
        #[test]
        fn builtin_barriers_match_finite_differences(id in 1u8..=3, x1 in -20.0f64..20.0, x3 in -20.0f64..20.0) {
            let bf = scenario_barrier(id).unwrap();
            let report = check_barrier_derivatives(&bf, &sv(&[x1, x3]), 1e-5);
            prop_assert!(report.passed, "{:?}", report);
            prop_assert!(report.max_asymmetry < 1e-12);
        }

        #[test]
        fn acc_distance_drift_is_exact(x1 in -50.0f64..50.0, x3 in -50.0f64..50.0) {
            let acc = AccModel::default();
            let d = acc.drift(&sv(&[x1, x3]));
            prop_assert_eq!(d[1], acc.lead_velocity() - x1);
        }
    }
}
