//! Named closures for the viscosity laws, as selected in configuration
//! files.
//!
//! Weight closures (the `e` and `b` slots):
//! - `zero`: identically 0.
//! - `const:c`: constant c.
//! - `saturating:c_tau`: `a0 * |E|^2/(1+|E|^2) * min(exp(-c_tau*tau), 1)`,
//!   which stays in [0, a0] for any temperature.
//! - `saturating_aligned:c_tau,kappa`: the same times `(1 - kappa*mu)` with
//!   kappa in [0, 1); vanishes with the field, so the zero-field viscosity
//!   cannot see the alignment factor.
//!
//! Shear closures (the `psi1` and `psi` slots):
//! - `const:c`: constant c (admissible when a1 <= c <= a2 and a3 <= c).
//! - `carreau`: `a1 + (a2-a1)(1+I)^(-1/2)`, a shear-thinning profile that
//!   satisfies the monotonicity condition with a3 = a1 and the derivative
//!   bound with a4 >= (a2-a1)/3^(3/2) (the maximum of I(1+I)^(-3/2) is
//!   2/3^(3/2), and the derivative carries a factor 1/2).

use super::{Closure, ClosureArgs, ModelConstants};
use crate::error::{Error, Result};
use std::sync::Arc;

struct ZeroClosure;

impl Closure for ZeroClosure {
    fn eval(&self, _: &ClosureArgs) -> f64 {
        0.0
    }
    fn d_invariant(&self, _: &ClosureArgs) -> Option<f64> {
        Some(0.0)
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

struct ConstClosure {
    value: f64,
}

impl Closure for ConstClosure {
    fn eval(&self, _: &ClosureArgs) -> f64 {
        self.value
    }
    fn d_invariant(&self, _: &ClosureArgs) -> Option<f64> {
        Some(0.0)
    }
    fn name(&self) -> String {
        format!("const:{}", self.value)
    }
}

struct SaturatingWeight {
    a0: f64,
    c_tau: f64,
    /// 0 for the plain variant; in [0, 1) for the alignment-sensitive one.
    kappa: f64,
    aligned: bool,
}

impl Closure for SaturatingWeight {
    fn eval(&self, a: &ClosureArgs) -> f64 {
        let e2 = a.e_mag * a.e_mag;
        let field = e2 / (1.0 + e2);
        let heat = (-self.c_tau * a.tau).exp().clamp(0.0, 1.0);
        let align = if self.aligned { 1.0 - self.kappa * a.mu } else { 1.0 };
        self.a0 * field * heat * align
    }
    fn d_invariant(&self, _: &ClosureArgs) -> Option<f64> {
        Some(0.0)
    }
    fn name(&self) -> String {
        if self.aligned {
            format!("saturating_aligned:{},{}", self.c_tau, self.kappa)
        } else {
            format!("saturating:{}", self.c_tau)
        }
    }
}

struct CarreauShear {
    a1: f64,
    a2: f64,
}

impl Closure for CarreauShear {
    fn eval(&self, a: &ClosureArgs) -> f64 {
        self.a1 + (self.a2 - self.a1) / (1.0 + a.invariant).sqrt()
    }
    fn d_invariant(&self, a: &ClosureArgs) -> Option<f64> {
        Some(-0.5 * (self.a2 - self.a1) * (1.0 + a.invariant).powf(-1.5))
    }
    fn name(&self) -> String {
        "carreau".into()
    }
}

fn split_spec(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once(':') {
        Some((name, params)) => (name.trim(), Some(params.trim())),
        None => (spec.trim(), None),
    }
}

fn parse_params(spec: &str, params: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let params = params.ok_or_else(|| {
        Error::Config(format!("closure `{spec}` needs {n} numeric parameter(s)"))
    })?;
    let vals: Vec<f64> = params
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("closure `{spec}`: parameters must be numbers")))?;
    if vals.len() != n || vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!(
            "closure `{spec}` needs exactly {n} finite parameter(s)"
        )));
    }
    Ok(vals)
}

/// Builds a weight closure (the `e` or `b` slot) from its config spelling.
pub fn make_weight(spec: &str, c: &ModelConstants) -> Result<Arc<dyn Closure>> {
    let (name, params) = split_spec(spec);
    match name {
        "zero" => Ok(Arc::new(ZeroClosure)),
        "const" => {
            let v = parse_params(spec, params, 1)?;
            if v[0] < 0.0 || v[0] > c.a0 {
                return Err(Error::Config(format!(
                    "constant weight {} falls outside [0, a0] = [0, {}]",
                    v[0], c.a0
                )));
            }
            Ok(Arc::new(ConstClosure { value: v[0] }))
        }
        "saturating" => {
            let v = parse_params(spec, params, 1)?;
            if v[0] < 0.0 {
                return Err(Error::Config("saturating: c_tau must be non-negative".into()));
            }
            Ok(Arc::new(SaturatingWeight { a0: c.a0, c_tau: v[0], kappa: 0.0, aligned: false }))
        }
        "saturating_aligned" => {
            let v = parse_params(spec, params, 2)?;
            if v[0] < 0.0 {
                return Err(Error::Config(
                    "saturating_aligned: c_tau must be non-negative".into(),
                ));
            }
            if !(0.0..1.0).contains(&v[1]) {
                return Err(Error::Config(
                    "saturating_aligned: kappa must lie in [0, 1)".into(),
                ));
            }
            Ok(Arc::new(SaturatingWeight { a0: c.a0, c_tau: v[0], kappa: v[1], aligned: true }))
        }
        other => Err(Error::Config(format!("unknown weight closure `{other}`"))),
    }
}

/// Builds a shear closure (the `psi1` or `psi` slot) from its config
/// spelling.
pub fn make_shear(spec: &str, c: &ModelConstants) -> Result<Arc<dyn Closure>> {
    let (name, params) = split_spec(spec);
    match name {
        "const" => {
            let v = parse_params(spec, params, 1)?;
            if v[0] < c.a1 || v[0] > c.a2 {
                return Err(Error::Config(format!(
                    "constant shear viscosity {} falls outside [a1, a2] = [{}, {}]",
                    v[0], c.a1, c.a2
                )));
            }
            Ok(Arc::new(ConstClosure { value: v[0] }))
        }
        "carreau" => {
            // The profile needs a3 <= a1 and a4 >= (a2-a1)/3^1.5 to pass
            // the admissibility conditions; reject early with the reason.
            if c.a3 > c.a1 {
                return Err(Error::Config(format!(
                    "carreau needs a3 <= a1 (its monotonicity margin is a1), got a3 = {} > a1 = {}",
                    c.a3, c.a1
                )));
            }
            let need = (c.a2 - c.a1) / 3.0_f64.powf(1.5);
            if c.a4 < need * (1.0 - 1e-12) {
                return Err(Error::Config(format!(
                    "carreau needs a4 >= (a2-a1)/3^1.5 = {need:.6}, got a4 = {}",
                    c.a4
                )));
            }
            Ok(Arc::new(CarreauShear { a1: c.a1, a2: c.a2 }))
        }
        other => Err(Error::Config(format!("unknown shear closure `{other}`"))),
    }
}
