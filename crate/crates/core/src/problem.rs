//! Problem data: the electric field, body force, surface traction and
//! boundary values that drive a run. Fields are small trait objects; the
//! named constructors here back the config-file syntax.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_01;
use std::sync::{Arc, OnceLock};

pub trait VectorField: Send + Sync {
    fn eval(&self, x: [f64; 2]) -> [f64; 2];
}

pub trait ScalarField: Send + Sync {
    fn eval(&self, x: [f64; 2]) -> f64;
}

/// Prescribed stress on the natural part of the boundary. Receives the
/// outward unit normal so normal loads can be expressed directly.
pub trait TractionField: Send + Sync {
    fn eval(&self, x: [f64; 2], normal: [f64; 2]) -> [f64; 2];
}

/// Everything outside the material model that defines a concrete flow.
#[derive(Clone)]
pub struct ProblemData {
    pub e_field: Arc<dyn VectorField>,
    pub body_force: Arc<dyn VectorField>,
    pub traction: Arc<dyn TractionField>,
    pub boundary_velocity: Arc<dyn VectorField>,
    pub boundary_temperature: Arc<dyn ScalarField>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ProblemData {..}")
    }
}

impl Default for ProblemData {
    fn default() -> Self {
        ProblemData {
            e_field: Arc::new(Uniform([0.0, 0.0])),
            body_force: Arc::new(Uniform([0.0, 0.0])),
            traction: Arc::new(ZeroTraction),
            boundary_velocity: Arc::new(Uniform([0.0, 0.0])),
            boundary_temperature: Arc::new(ConstScalar(0.0)),
        }
    }
}

pub struct Uniform(pub [f64; 2]);

impl VectorField for Uniform {
    fn eval(&self, _x: [f64; 2]) -> [f64; 2] {
        self.0
    }
}

/// Affine field A x + b, row-major coefficients.
pub struct Affine {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl VectorField for Affine {
    fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1],
        ]
    }
}

/// Plane channel profile (4 u0 y (1 - y), 0): the classic unidirectional
/// flow on the unit square, zero on the walls y = 0 and y = 1.
pub struct ChannelProfile {
    pub u0: f64,
}

impl VectorField for ChannelProfile {
    fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        [4.0 * self.u0 * x[1] * (1.0 - x[1]), 0.0]
    }
}

pub struct FnVector<F: Fn([f64; 2]) -> [f64; 2] + Send + Sync>(pub F);

impl<F: Fn([f64; 2]) -> [f64; 2] + Send + Sync> VectorField for FnVector<F> {
    fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        (self.0)(x)
    }
}

pub struct ConstScalar(pub f64);

impl ScalarField for ConstScalar {
    fn eval(&self, _x: [f64; 2]) -> f64 {
        self.0
    }
}

/// a x + b y + c.
pub struct AffineScalar(pub f64, pub f64, pub f64);

impl ScalarField for AffineScalar {
    fn eval(&self, x: [f64; 2]) -> f64 {
        self.0 * x[0] + self.1 * x[1] + self.2
    }
}

pub struct FnScalar<F: Fn([f64; 2]) -> f64 + Send + Sync>(pub F);

impl<F: Fn([f64; 2]) -> f64 + Send + Sync> ScalarField for FnScalar<F> {
    fn eval(&self, x: [f64; 2]) -> f64 {
        (self.0)(x)
    }
}

pub struct ZeroTraction;

impl TractionField for ZeroTraction {
    fn eval(&self, _x: [f64; 2], _n: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

pub struct ConstTraction(pub [f64; 2]);

impl TractionField for ConstTraction {
    fn eval(&self, _x: [f64; 2], _n: [f64; 2]) -> [f64; 2] {
        self.0
    }
}

/// Pressure-like load: magnitude times the outward normal.
pub struct NormalTraction(pub f64);

impl TractionField for NormalTraction {
    fn eval(&self, _x: [f64; 2], n: [f64; 2]) -> [f64; 2] {
        [self.0 * n[0], self.0 * n[1]]
    }
}

/// Temperature of the stationary channel flow that the profile
/// `ChannelProfile` dissipates, with the same smoothing that the solver
/// applies to the dissipation argument.
///
/// The flow u = (U(y), 0), U = 4 u0 y (1 - y), heated by its own friction
/// at constant viscosity w and zero wall temperature, satisfies the
/// two-point problem
///
///   chi T'' = -eps w (PU')^2,   T(0) = T(1) = 0,
///
/// where PU' is the smoothed shear rate: the convolution of U' (extended
/// by zero, matching the frozen wall values of the smoothed velocity)
/// with the marginal of the planar bump kernel of the given radius. The
/// squared-strain invariant of the unidirectional field is (U')^2 / 2 and
/// carries the factor 2 of the heat source.
///
/// Evaluation solves the two-point problem once on first use, on a fine
/// grid with the Green-function quadrature, and interpolates afterwards.
pub struct ChannelHeat {
    pub u0: f64,
    pub viscosity: f64,
    pub chi: f64,
    pub eps_heat: f64,
    pub radius: f64,
    profile: OnceLock<Vec<f64>>,
}

const CHANNEL_HEAT_GRID: usize = 4001;

impl ChannelHeat {
    pub fn new(u0: f64, viscosity: f64, chi: f64, eps_heat: f64, radius: f64) -> Result<Self> {
        if !(chi > 0.0) || !(eps_heat > 0.0) || !(viscosity >= 0.0) {
            return Err(Error::InvalidInput(
                "channel heat profile needs chi > 0, heating factor > 0 and viscosity >= 0".into(),
            ));
        }
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidInput(
                "channel heat smoothing radius must lie in (0, 0.5)".into(),
            ));
        }
        if !(u0.is_finite()) {
            return Err(Error::InvalidInput("channel heat u0 must be finite".into()));
        }
        Ok(ChannelHeat {
            u0,
            viscosity,
            chi,
            eps_heat,
            radius,
            profile: OnceLock::new(),
        })
    }

    /// Smoothed shear rate at height y. The smoothing convolves the
    /// velocity values, and outside the channel the extension freezes the
    /// wall value, so the shear it differentiates is U' inside [0, 1] and
    /// zero beyond.
    fn smoothed_shear(&self, y: f64, nodes: &[(f64, f64)]) -> f64 {
        let du = |z: f64| {
            if (0.0..=1.0).contains(&z) {
                4.0 * self.u0 * (1.0 - 2.0 * z)
            } else {
                0.0
            }
        };
        nodes.iter().map(|&(s, w)| w * du(y - s)).sum()
    }

    /// Quadrature nodes (s, weight * marginal(s)) for the convolution over
    /// [-a, a].
    fn marginal_nodes(&self) -> Vec<(f64, f64)> {
        let a = self.radius;
        let bump = |r: f64| {
            let t = r / a;
            if t.abs() < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        };
        // Normalizer of the planar kernel: 2 pi int_0^a bump(r) r dr = 1/C.
        let (gn, gw) = gauss_legendre_01(64);
        let mass: f64 = gn
            .iter()
            .zip(&gw)
            .map(|(&t, &w)| {
                let r = a * t;
                w * a * bump(r) * r
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        let c = 1.0 / mass;
        // Marginal at s: integral of the planar bump across the chord.
        let marginal = |s: f64| -> f64 {
            let half = (a * a - s * s).max(0.0).sqrt();
            if half == 0.0 {
                return 0.0;
            }
            gn.iter()
                .zip(&gw)
                .map(|(&t, &w)| {
                    let u = half * (2.0 * t - 1.0);
                    w * 2.0 * half * c * bump((s * s + u * u).sqrt())
                })
                .sum()
        };
        gn.iter()
            .zip(&gw)
            .map(|(&t, &w)| {
                let s = a * (2.0 * t - 1.0);
                (s, w * 2.0 * a * marginal(s))
            })
            .collect()
    }

    fn compute_profile(&self) -> Vec<f64> {
        let n = CHANNEL_HEAT_GRID;
        let h = 1.0 / (n - 1) as f64;
        let nodes = self.marginal_nodes();
        // Source of -T'' = q: q(y) = (eps w / chi) (PU')^2.
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let y = i as f64 * h;
                let s = self.smoothed_shear(y, &nodes);
                self.eps_heat * self.viscosity / self.chi * s * s
            })
            .collect();
        // T(y) = (1-y) int_0^y s q ds + y int_y^1 (1-s) q ds, by cumulative
        // trapezoids.
        let mut lower = vec![0.0; n];
        for i in 1..n {
            let a = (i - 1) as f64 * h * q[i - 1];
            let b = i as f64 * h * q[i];
            lower[i] = lower[i - 1] + 0.5 * h * (a + b);
        }
        let mut upper = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let a = (1.0 - i as f64 * h) * q[i];
            let b = (1.0 - (i + 1) as f64 * h) * q[i + 1];
            upper[i] = upper[i + 1] + 0.5 * h * (a + b);
        }
        (0..n)
            .map(|i| {
                let y = i as f64 * h;
                (1.0 - y) * lower[i] + y * upper[i]
            })
            .collect()
    }
}

impl ScalarField for ChannelHeat {
    fn eval(&self, x: [f64; 2]) -> f64 {
        let tau = self.profile.get_or_init(|| self.compute_profile());
        let n = tau.len();
        let y = x[1].clamp(0.0, 1.0);
        let t = y * (n - 1) as f64;
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        tau[i] * (1.0 - f) + tau[i + 1] * f
    }
}

fn split_spec(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once(':') {
        Some((name, rest)) => (name.trim(), Some(rest.trim())),
        None => (spec.trim(), None),
    }
}

fn parse_params(what: &str, rest: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let rest = rest.ok_or_else(|| {
        Error::Config(format!("{what}: expected {n} numeric parameter(s) after ':'"))
    })?;
    let vals: Vec<f64> = rest
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: bad number {:?}", s.trim())))
        })
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(Error::Config(format!(
            "{what}: expected {n} parameter(s), got {}",
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: parameters must be finite")));
    }
    Ok(vals)
}

/// Vector field from a config spec: `zero`, `uniform:ax,ay`,
/// `affine:a11,a12,a21,a22,b1,b2` or `channel:u0`.
pub fn make_vector_field(spec: &str) -> Result<Arc<dyn VectorField>> {
    let (name, rest) = split_spec(spec);
    match name {
        "zero" => Ok(Arc::new(Uniform([0.0, 0.0]))),
        "uniform" => {
            let p = parse_params("uniform field", rest, 2)?;
            Ok(Arc::new(Uniform([p[0], p[1]])))
        }
        "affine" => {
            let p = parse_params("affine field", rest, 6)?;
            Ok(Arc::new(Affine {
                a: [[p[0], p[1]], [p[2], p[3]]],
                b: [p[4], p[5]],
            }))
        }
        "channel" => {
            let p = parse_params("channel profile", rest, 1)?;
            Ok(Arc::new(ChannelProfile { u0: p[0] }))
        }
        other => Err(Error::Config(format!("unknown vector field {other:?}"))),
    }
}

/// Scalar boundary field from a config spec: `zero`, `const:c`,
/// `affine:a,b,c` or `channel_heat:u0,viscosity,chi,eps,radius`.
pub fn make_scalar_field(spec: &str) -> Result<Arc<dyn ScalarField>> {
    let (name, rest) = split_spec(spec);
    match name {
        "zero" => Ok(Arc::new(ConstScalar(0.0))),
        "const" => {
            let p = parse_params("constant field", rest, 1)?;
            Ok(Arc::new(ConstScalar(p[0])))
        }
        "affine" => {
            let p = parse_params("affine scalar field", rest, 3)?;
            Ok(Arc::new(AffineScalar(p[0], p[1], p[2])))
        }
        "channel_heat" => {
            let p = parse_params("channel heat profile", rest, 5)?;
            Ok(Arc::new(ChannelHeat::new(p[0], p[1], p[2], p[3], p[4])?))
        }
        other => Err(Error::Config(format!("unknown scalar field {other:?}"))),
    }
}

/// Traction from a config spec: `zero`, `const:fx,fy` or `normal:mag`.
pub fn make_traction(spec: &str) -> Result<Arc<dyn TractionField>> {
    let (name, rest) = split_spec(spec);
    match name {
        "zero" => Ok(Arc::new(ZeroTraction)),
        "const" => {
            let p = parse_params("constant traction", rest, 2)?;
            Ok(Arc::new(ConstTraction([p[0], p[1]])))
        }
        "normal" => {
            let p = parse_params("normal traction", rest, 1)?;
            Ok(Arc::new(NormalTraction(p[0])))
        }
        other => Err(Error::Config(format!("unknown traction {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn channel_profile_vanishes_on_walls() {
        let u = ChannelProfile { u0: 1.5 };
        assert_eq!(u.eval([0.3, 0.0]), [0.0, 0.0]);
        assert_eq!(u.eval([0.7, 1.0]), [0.0, 0.0]);
        assert_relative_eq!(u.eval([0.2, 0.5])[0], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn field_specs_parse() {
        let f = make_vector_field("uniform: 2, -1 ").unwrap();
        assert_eq!(f.eval([0.0, 0.0]), [2.0, -1.0]);
        let f = make_vector_field("affine:0,1,-1,0,0,0").unwrap();
        assert_eq!(f.eval([2.0, 3.0]), [3.0, -2.0]);
        let s = make_scalar_field("affine:1,2,3").unwrap();
        assert_relative_eq!(s.eval([1.0, 1.0]), 6.0);
        let t = make_traction("normal:2.0").unwrap();
        assert_eq!(t.eval([0.0, 0.0], [0.0, -1.0]), [0.0, -2.0]);
        assert!(make_vector_field("vortex:1").is_err());
        assert!(make_vector_field("uniform:1").is_err());
        assert!(make_scalar_field("const:nan").is_err());
    }

    #[test]
    fn channel_heat_without_smoothing_limit() {
        // As the radius shrinks the profile approaches the unsmoothed
        // solution of chi T'' = -eps w (U')^2 with U' = 4 u0 (1 - 2y):
        // T(y) = (eps w / chi) * (16 u0^2) * (y/6 - y^4 + ... ); evaluate
        // by the closed form T(y) = (eps w /chi) * 16 u0^2 * p(y) with
        // p(y) = (y - y^2)(1 + (1 - 2y)^2 / 3) / 4... check the midpoint
        // instead: q = 16 u0^2 (1-2y)^2, T(1/2) = int G(1/2,s) q ds
        //        = 16 u0^2 * [ (1/2) int_0^{1/2} s (1-2s)^2 ds * 2 ] = 1/6 u0^2.
        let heat = ChannelHeat::new(1.0, 2.0, 4.0, 0.5, 0.005).unwrap();
        let scale = 0.5 * 2.0 / 4.0;
        let exact_mid = scale * 16.0 * (1.0 / 96.0 + 1.0 / 96.0);
        assert_relative_eq!(heat.eval([0.3, 0.5]), exact_mid, max_relative = 1e-3);
        // Walls stay cold.
        assert!(heat.eval([0.0, 0.0]).abs() < 1e-12);
        assert!(heat.eval([0.0, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn channel_heat_smoothing_conserves_shear_mass() {
        // The marginal kernel integrates to one: convolving a constant
        // leaves it unchanged, so far from the walls (distance > radius)
        // the smoothed shear of a linear profile equals the exact one.
        let heat = ChannelHeat::new(0.7, 1.0, 1.0, 1.0, 0.05).unwrap();
        let nodes = heat.marginal_nodes();
        let total: f64 = nodes.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        let s = heat.smoothed_shear(0.5, &nodes);
        // U' is linear around the center, the kernel is even: exact value.
        assert_relative_eq!(s, 0.0, epsilon = 1e-12);
        let s = heat.smoothed_shear(0.3, &nodes);
        assert_relative_eq!(s, 4.0 * 0.7 * 0.4, epsilon = 1e-10);
    }
}
