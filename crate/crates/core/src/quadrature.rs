//! Quadrature rules on the reference triangle and the unit interval.
//!
//! Reference triangle: vertices (0,0), (1,0), (0,1), area 1/2. Points are
//! stored as barycentric coordinates (l1, l2, l3) with l1 = 1 - xi - eta,
//! and weights are normalized so that `sum(w * f)` approximates the integral
//! over the reference triangle itself (weights sum to 1/2). An element
//! integral is then `|det J| * sum(w * f)`.

/// One quadrature point on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

impl TriPoint {
    pub fn xi_eta(&self) -> [f64; 2] {
        [self.bary[1], self.bary[2]]
    }
}

/// Midpoint rule with three points, exact for polynomials of degree 2.
/// Used for bilinear/quadratic integrands (strain products, P1 masses).
pub fn tri_degree2() -> &'static [TriPoint] {
    const W: f64 = 1.0 / 6.0;
    static RULE: [TriPoint; 3] = [
        TriPoint { bary: [0.5, 0.5, 0.0], weight: W },
        TriPoint { bary: [0.0, 0.5, 0.5], weight: W },
        TriPoint { bary: [0.5, 0.0, 0.5], weight: W },
    ];
    &RULE
}

/// Seven-point rule, exact for polynomials of degree 5. This is the default
/// rule for nonlinear integrands (viscosity terms, dissipation, convection).
pub fn tri_degree5() -> &'static [TriPoint] {
    // Centroid weight 9/80; the two orbits carry (155 +- sqrt(15))/2400.
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const W1: f64 = 0.066_197_076_394_253_09;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_34;
    const W2: f64 = 0.062_969_590_272_413_58;
    static RULE: [TriPoint; 7] = [
        TriPoint { bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], weight: 9.0 / 80.0 },
        TriPoint { bary: [A1, B1, B1], weight: W1 },
        TriPoint { bary: [B1, A1, B1], weight: W1 },
        TriPoint { bary: [B1, B1, A1], weight: W1 },
        TriPoint { bary: [A2, B2, B2], weight: W2 },
        TriPoint { bary: [B2, A2, B2], weight: W2 },
        TriPoint { bary: [B2, B2, A2], weight: W2 },
    ];
    &RULE
}

/// High-order product rule obtained by collapsing an n x n Gauss-Legendre
/// grid on the unit square onto the triangle (xi = s, eta = t(1-s)). Exact
/// for polynomials of degree n-1 and rapidly convergent for smooth
/// integrands; used to double-check the fixed rules on nonlinear forms.
pub fn tri_product_gauss(n: usize) -> Vec<TriPoint> {
    let (nodes, weights) = gauss_legendre_01(n);
    let mut rule = Vec::with_capacity(n * n);
    for (i, &s) in nodes.iter().enumerate() {
        for (j, &t) in nodes.iter().enumerate() {
            let xi = s;
            let eta = t * (1.0 - s);
            rule.push(TriPoint {
                bary: [1.0 - xi - eta, xi, eta],
                weight: weights[i] * weights[j] * (1.0 - s),
            });
        }
    }
    rule
}

/// Gauss-Legendre nodes and weights on [0, 1].
///
/// Computed by Newton iteration on the Legendre polynomial from the usual
/// cosine initial guesses; accurate to machine precision for the moderate
/// orders used here.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Root of P_n on (-1, 1), counted from +1 downwards.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = if n == 1 {
                1.0
            } else {
                n as f64 * (x * p1 - p0) / (x * x - 1.0)
            };
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    // Map from [-1, 1] to [0, 1]; the raw array descends, so this flips
    // it into ascending order.
    for i in 0..n {
        nodes[i] = 0.5 * (1.0 - nodes[i]);
        weights[i] *= 0.5;
    }
    (nodes, weights)
}

/// Three-point Gauss rule on [0, 1], exact for degree 5. Used for boundary
/// edge integrals (traction loads, flux checks).
pub fn edge_gauss3() -> [(f64, f64); 3] {
    let s = (0.6_f64).sqrt() / 2.0;
    [
        (0.5 - s, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + s, 5.0 / 18.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Integral of l1^a l2^b l3^c over the reference triangle.
    fn bary_moment(a: u32, b: u32, c: u32) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
        }
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    fn integrate(rule: &[TriPoint], f: impl Fn([f64; 3]) -> f64) -> f64 {
        rule.iter().map(|p| p.weight * f(p.bary)).sum()
    }

    fn check_exact_to_degree(rule: &[TriPoint], deg: u32) {
        for a in 0..=deg {
            for b in 0..=(deg - a) {
                for c in 0..=(deg - a - b) {
                    let approx = integrate(rule, |l| {
                        l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                    });
                    let exact = bary_moment(a, b, c);
                    assert_relative_eq!(approx, exact, max_relative = 1e-13, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn degree2_rule_is_exact_for_quadratics() {
        check_exact_to_degree(tri_degree2(), 2);
        let total: f64 = tri_degree2().iter().map(|p| p.weight).sum();
        assert_relative_eq!(total, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn degree5_rule_is_exact_for_quintics() {
        check_exact_to_degree(tri_degree5(), 5);
        let total: f64 = tri_degree5().iter().map(|p| p.weight).sum();
        assert_relative_eq!(total, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn degree5_rule_has_positive_interior_points() {
        for p in tri_degree5() {
            assert!(p.weight > 0.0);
            for l in p.bary {
                assert!(l > 0.0 && l < 1.0);
            }
            assert_relative_eq!(p.bary.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn product_gauss_matches_moments() {
        let rule = tri_product_gauss(8);
        check_exact_to_degree(&rule, 7);
    }

    #[test]
    fn product_gauss_converges_on_smooth_integrand() {
        // f = 1/sqrt(1 + l2 + 3 l3), integrable in closed form is not
        // needed: compare two refinement levels against each other.
        let f = |l: [f64; 3]| 1.0 / (1.0 + l[1] + 3.0 * l[2]).sqrt();
        let coarse = integrate(&tri_product_gauss(12), f);
        let fine = integrate(&tri_product_gauss(24), f);
        assert!((coarse - fine).abs() < 1e-13, "diff {:e}", coarse - fine);
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre_01(16);
        // Exact for degree 31: check x^20 against 1/21.
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(20)).sum();
        assert_relative_eq!(s, 1.0 / 21.0, max_relative = 1e-13);
        // Nodes ascend and weights are positive.
        for i in 1..x.len() {
            assert!(x[i] > x[i - 1]);
        }
        assert!(w.iter().all(|&wi| wi > 0.0));
    }

    #[test]
    fn edge_rule_integrates_quintic() {
        let s: f64 = edge_gauss3()
            .iter()
            .map(|&(t, w)| w * t.powi(5))
            .sum();
        assert_relative_eq!(s, 1.0 / 6.0, max_relative = 1e-14);
    }
}
