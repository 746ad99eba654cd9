//! Constitutive laws for the two viscosity families and the quantities
//! derived from them.
//!
//! Both families share the shape
//!
//! ```text
//! phi = w * (lambda + I)^(-1/2) + s(I, ...)
//! ```
//!
//! where `I` is the shear rate invariant. In the isothermal-style family
//! (PHI1) the weight `w = b(|E|, mu, tau)` and the shear part
//! `s = psi(I, |E|, mu, tau)` depend on the particle alignment factor `mu`;
//! in the other family (PHI2) the weight `w = e(|E|, tau, x)` and
//! `s = psi1(I, |E|, tau, x)` depend on position instead. The admissibility
//! conditions on the closures (bounds, monotonicity, derivative growth) are
//! checked numerically by [`check::model_condition_check`].

pub mod check;
pub mod closures;

use crate::error::{Error, Result};
use std::sync::Arc;

pub use check::{model_condition_check, ConditionReport, ConditionRow};

/// Which viscosity family a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Alignment-dependent family: b and psi.
    Phi1,
    /// Position-dependent family: e and psi1.
    Phi2,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Phi1 => "phi1",
            Variant::Phi2 => "phi2",
        }
    }
}

/// Arguments a closure may look at. Closures ignore the fields outside
/// their family (e.g. `mu` for the PHI2 closures, `x` for PHI1).
#[derive(Debug, Clone, Copy)]
pub struct ClosureArgs {
    /// Shear rate invariant I, non-negative. For the weight closures this
    /// is irrelevant and set to whatever the caller had at hand.
    pub invariant: f64,
    /// Electric field magnitude |E|.
    pub e_mag: f64,
    /// Alignment factor, in [0, 1].
    pub mu: f64,
    /// Temperature.
    pub tau: f64,
    /// Position.
    pub x: [f64; 2],
}

/// A scalar material closure. `eval` must be defined for every argument
/// combination the solver can produce; whether the result satisfies the
/// admissibility inequalities is checked separately by sampling.
pub trait Closure: Send + Sync {
    fn eval(&self, args: &ClosureArgs) -> f64;

    /// Analytic derivative with respect to the invariant, if the closure
    /// has one. The checker falls back to central differences otherwise.
    fn d_invariant(&self, _args: &ClosureArgs) -> Option<f64> {
        None
    }

    /// Display name, as written in configuration files.
    fn name(&self) -> String;
}

/// Derivative of a closure with respect to the invariant: analytic when
/// available, otherwise a central difference with the step clamped so the
/// invariant never goes negative.
pub fn closure_d_invariant(c: &dyn Closure, args: &ClosureArgs) -> f64 {
    if let Some(d) = c.d_invariant(args) {
        return d;
    }
    let i = args.invariant;
    let h = (1e-6 * i.abs()).max(1e-6);
    let lo = (i - h).max(0.0);
    let hi = i + h;
    let mut a_lo = *args;
    a_lo.invariant = lo;
    let mut a_hi = *args;
    a_hi.invariant = hi;
    (c.eval(&a_hi) - c.eval(&a_lo)) / (hi - lo)
}

/// Material model: the viscosity family, its closures, and the constants
/// entering the equations and the admissibility conditions.
#[derive(Clone)]
pub struct MaterialModel {
    pub variant: Variant,
    /// Regularization shift in (lambda + I)^(-1/2); strictly positive.
    pub lambda: f64,
    /// Thermal conductivity chi.
    pub chi: f64,
    /// Dissipation coupling factor (the epsilon in front of the heat
    /// source).
    pub eps_heat: f64,
    /// Upper bound for the weight closures e and b.
    pub a0: f64,
    /// Lower bound for the shear closures psi1 and psi.
    pub a1: f64,
    /// Upper bound for the shear closures.
    pub a2: f64,
    /// Monotonicity constant: s + 2 I ds/dI >= a3.
    pub a3: f64,
    /// Derivative growth bound: |ds/dI| I <= a4.
    pub a4: f64,
    /// Regularization of the alignment factor at u + u_frame = 0.
    pub alpha: f64,
    /// Frame velocity entering the alignment factor.
    pub u_frame: [f64; 2],
    pub closure_e: Arc<dyn Closure>,
    pub closure_psi1: Arc<dyn Closure>,
    pub closure_b: Arc<dyn Closure>,
    pub closure_psi: Arc<dyn Closure>,
}

impl std::fmt::Debug for MaterialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaterialModel")
            .field("variant", &self.variant)
            .field("lambda", &self.lambda)
            .field("chi", &self.chi)
            .field("eps_heat", &self.eps_heat)
            .field("a", &[self.a0, self.a1, self.a2, self.a3, self.a4])
            .field("alpha", &self.alpha)
            .field("u_frame", &self.u_frame)
            .field("e", &self.closure_e.name())
            .field("psi1", &self.closure_psi1.name())
            .field("b", &self.closure_b.name())
            .field("psi", &self.closure_psi.name())
            .finish()
    }
}

/// Everything `MaterialModel::new` needs besides the closures.
#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    pub variant: Variant,
    pub lambda: f64,
    pub chi: f64,
    pub eps_heat: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub alpha: f64,
    pub u_frame: [f64; 2],
}

impl Default for ModelConstants {
    fn default() -> Self {
        ModelConstants {
            variant: Variant::Phi2,
            lambda: 1.0,
            chi: 1.0,
            eps_heat: 1.0,
            a0: 1.0,
            a1: 0.5,
            a2: 2.0,
            a3: 0.5,
            a4: 0.5,
            alpha: 1e-8,
            u_frame: [0.0, 0.0],
        }
    }
}

impl MaterialModel {
    pub fn new(
        c: ModelConstants,
        closure_e: Arc<dyn Closure>,
        closure_psi1: Arc<dyn Closure>,
        closure_b: Arc<dyn Closure>,
        closure_psi: Arc<dyn Closure>,
    ) -> Result<Self> {
        let all = [c.lambda, c.chi, c.eps_heat, c.a0, c.a1, c.a2, c.a3, c.a4, c.alpha];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model constants must be finite".into()));
        }
        if c.lambda <= 0.0 {
            return Err(Error::InvalidInput("lambda must be strictly positive".into()));
        }
        if c.chi <= 0.0 || c.eps_heat <= 0.0 {
            return Err(Error::InvalidInput(
                "chi and the dissipation factor must be strictly positive".into(),
            ));
        }
        if c.a0 < 0.0 {
            return Err(Error::InvalidInput("a0 must be non-negative".into()));
        }
        if !(c.a1 > 0.0 && c.a2 >= c.a1) {
            return Err(Error::InvalidInput("need 0 < a1 <= a2".into()));
        }
        if c.a3 <= 0.0 {
            return Err(Error::InvalidInput("a3 must be strictly positive".into()));
        }
        if c.a4 < 0.0 {
            return Err(Error::InvalidInput("a4 must be non-negative".into()));
        }
        if c.alpha <= 0.0 {
            return Err(Error::InvalidInput("alpha must be strictly positive".into()));
        }
        if !c.u_frame[0].is_finite() || !c.u_frame[1].is_finite() {
            return Err(Error::InvalidInput("frame velocity must be finite".into()));
        }
        Ok(MaterialModel {
            variant: c.variant,
            lambda: c.lambda,
            chi: c.chi,
            eps_heat: c.eps_heat,
            a0: c.a0,
            a1: c.a1,
            a2: c.a2,
            a3: c.a3,
            a4: c.a4,
            alpha: c.alpha,
            u_frame: c.u_frame,
            closure_e,
            closure_psi1,
            closure_b,
            closure_psi,
        })
    }

    pub fn constants(&self) -> ModelConstants {
        ModelConstants {
            variant: self.variant,
            lambda: self.lambda,
            chi: self.chi,
            eps_heat: self.eps_heat,
            a0: self.a0,
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
            a4: self.a4,
            alpha: self.alpha,
            u_frame: self.u_frame,
        }
    }
}

/// Symmetric velocity gradient and its invariant.
#[derive(Debug, Clone, Copy)]
pub struct StrainState {
    pub eps: [[f64; 2]; 2],
    /// I = sum of squared strain components.
    pub invariant: f64,
}

/// Symmetrizes a velocity gradient (`grad[i][j]` = d u_i / d x_j) and
/// computes the invariant I = sum_ij eps_ij^2.
pub fn strain_rate(grad: [[f64; 2]; 2]) -> StrainState {
    let e01 = 0.5 * (grad[0][1] + grad[1][0]);
    let eps = [[grad[0][0], e01], [e01, grad[1][1]]];
    let invariant =
        eps[0][0] * eps[0][0] + 2.0 * eps[0][1] * eps[0][1] + eps[1][1] * eps[1][1];
    StrainState { eps, invariant }
}

/// Alignment factor
///
/// ```text
/// mu = ( (alpha * (1,1) + u + u_frame) / (alpha * sqrt(2) + |u + u_frame|) . E/|E| )^2
/// ```
///
/// Always in [0, 1]; errors when |E| = 0 because the direction E/|E| is
/// undefined there (the weight closures must not depend on mu in that case,
/// and the assembly passes mu = 0 without calling this).
pub fn alignment_mu(u: [f64; 2], e_field: [f64; 2], model: &MaterialModel) -> Result<f64> {
    let e_mag = (e_field[0] * e_field[0] + e_field[1] * e_field[1]).sqrt();
    if e_mag <= 0.0 {
        return Err(Error::InvalidInput(
            "alignment factor is undefined for a vanishing electric field".into(),
        ));
    }
    let w = [u[0] + model.u_frame[0], u[1] + model.u_frame[1]];
    let w_mag = (w[0] * w[0] + w[1] * w[1]).sqrt();
    let num = [model.alpha + w[0], model.alpha + w[1]];
    let den = model.alpha * std::f64::consts::SQRT_2 + w_mag;
    let dir = [e_field[0] / e_mag, e_field[1] / e_mag];
    let proj = (num[0] * dir[0] + num[1] * dir[1]) / den;
    // |alpha*(1,1) + w| <= alpha*sqrt(2) + |w| puts proj in [-1, 1]; round-off
    // can still push the square a hair over one.
    Ok((proj * proj).min(1.0))
}

/// Viscosity of the position-dependent family:
/// `e(|E|, tau, x) (lambda + I)^(-1/2) + psi1(I, |E|, tau, x)`.
pub fn viscosity_phi2(
    invariant: f64,
    e_mag: f64,
    tau: f64,
    x: [f64; 2],
    model: &MaterialModel,
) -> Result<f64> {
    if !(invariant >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "shear invariant must be non-negative, got {invariant}"
        )));
    }
    let args = ClosureArgs { invariant, e_mag, mu: 0.0, tau, x };
    let w = model.closure_e.eval(&args);
    let s = model.closure_psi1.eval(&args);
    Ok(w / (model.lambda + invariant).sqrt() + s)
}

/// Viscosity of the alignment-dependent family:
/// `b(|E|, mu, tau) (lambda + I)^(-1/2) + psi(I, |E|, mu, tau)`.
pub fn viscosity_phi1(
    invariant: f64,
    e_mag: f64,
    mu: f64,
    tau: f64,
    model: &MaterialModel,
) -> Result<f64> {
    if !(invariant >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "shear invariant must be non-negative, got {invariant}"
        )));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidInput(format!(
            "alignment factor must lie in [0, 1], got {mu}"
        )));
    }
    let args = ClosureArgs { invariant, e_mag, mu, tau, x: [0.0, 0.0] };
    let w = model.closure_b.eval(&args);
    let s = model.closure_psi.eval(&args);
    Ok(w / (model.lambda + invariant).sqrt() + s)
}

/// Truncation used by the Galerkin scheme for the alignment family: the
/// viscosity is kept below the cap `b1`, blended to zero between `b1` and
/// `b2` with the cubic smoothstep, and cut off above `b2`. Continuous in
/// the invariant, with values in [0, phi1].
pub fn truncate_phi3(i_reg: f64, b1: f64, b2: f64, phi1: f64) -> Result<f64> {
    if !(0.0 <= b1 && b1 < b2) {
        return Err(Error::InvalidInput(format!(
            "truncation caps must satisfy 0 <= b1 < b2, got ({b1}, {b2})"
        )));
    }
    if !(i_reg >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularized invariant must be non-negative, got {i_reg}"
        )));
    }
    if i_reg <= b1 {
        Ok(phi1)
    } else if i_reg >= b2 {
        Ok(0.0)
    } else {
        let t = (i_reg - b1) / (b2 - b1);
        Ok(phi1 * (1.0 - t * t * (3.0 - 2.0 * t)))
    }
}

/// Cauchy stress: sigma_ij = -p delta_ij + 2 phi eps_ij.
pub fn stress(p: f64, strain: &StrainState, phi: f64) -> [[f64; 2]; 2] {
    [
        [-p + 2.0 * phi * strain.eps[0][0], 2.0 * phi * strain.eps[0][1]],
        [2.0 * phi * strain.eps[1][0], -p + 2.0 * phi * strain.eps[1][1]],
    ]
}

/// Constants of the monotonicity and coercivity estimates for the weak flow
/// operator, computed from the admissibility constants:
///
/// ```text
/// mu1 = 2 a2 + 4 (a4 + a0 lambda^(-1/2))      (Lipschitz-type bound)
/// mu2 = min(2 a1, 2 a3)                       (strong monotonicity)
/// mu3 = 2 a1                                  (coercivity of the v-part)
/// mu4 = 2 (a0 lambda^(-1/2) + a2) (int I(lift))^(1/2)   (lift offset)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MonotoneConstants {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

/// `i_lift_integral` is the integral of the shear invariant of the velocity
/// lift over the domain, so `mu4` vanishes for a zero lift.
pub fn monotone_constants(model: &MaterialModel, i_lift_integral: f64) -> Result<MonotoneConstants> {
    if !(i_lift_integral >= 0.0) {
        return Err(Error::InvalidInput(
            "the lift invariant integral must be non-negative".into(),
        ));
    }
    let root_lambda_inv = 1.0 / model.lambda.sqrt();
    Ok(MonotoneConstants {
        mu1: 2.0 * model.a2 + 4.0 * (model.a4 + model.a0 * root_lambda_inv),
        mu2: (2.0 * model.a1).min(2.0 * model.a3),
        mu3: 2.0 * model.a1,
        mu4: 2.0 * (model.a0 * root_lambda_inv + model.a2) * i_lift_integral.sqrt(),
    })
}

/// A model with the default constants, a saturating field weight and the
/// shear-thinning interpolation law. The config layer starts from these
/// choices, and tests use them as a representative admissible model.
pub fn default_model(variant: Variant) -> Result<MaterialModel> {
    let c = ModelConstants { variant, ..ModelConstants::default() };
    MaterialModel::new(
        c,
        closures::make_weight("saturating:0.3", &c)?,
        closures::make_shear("carreau", &c)?,
        closures::make_weight("saturating_aligned:0.3,0.5", &c)?,
        closures::make_shear("carreau", &c)?,
    )
}
