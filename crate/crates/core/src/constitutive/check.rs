//! Numeric admissibility check for the material closures.
//!
//! The solvability theory needs the weight closures bounded into [0, a0],
//! the shear closures into [a1, a2], the monotonicity margin
//! `s + 2 I ds/dI >= a3` and the derivative growth bound `|ds/dI| I <= a4`,
//! for both families, plus alignment independence at a vanishing electric
//! field. None of that can be verified symbolically for user-supplied
//! closures, so this module samples a structured grid of argument
//! combinations, augmented by seeded random draws, and reports the worst
//! margin per inequality.

use super::{closure_d_invariant, Closure, ClosureArgs, MaterialModel};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome for one inequality.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionRow {
    pub condition: String,
    pub passed: bool,
    /// Smallest slack seen over all samples; negative means violated.
    pub worst_margin: f64,
    /// The arguments that produced the worst margin.
    pub worst_args: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    pub samples: usize,
    pub passed: bool,
}

impl ConditionReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConditionRow> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

fn describe(a: &ClosureArgs) -> String {
    format!(
        "I={:.6e}, |E|={:.4}, mu={:.4}, tau={:.4}, x=({:.3}, {:.3})",
        a.invariant, a.e_mag, a.mu, a.tau, a.x[0], a.x[1]
    )
}

struct MarginTracker {
    condition: String,
    worst: f64,
    at: String,
    tol: f64,
}

impl MarginTracker {
    fn new(condition: impl Into<String>, tol: f64) -> Self {
        MarginTracker { condition: condition.into(), worst: f64::INFINITY, at: String::new(), tol }
    }

    fn observe(&mut self, margin: f64, args: &ClosureArgs) {
        if margin < self.worst {
            self.worst = margin;
            self.at = describe(args);
        }
    }

    fn finish(self) -> ConditionRow {
        ConditionRow {
            condition: self.condition,
            passed: self.worst >= -self.tol,
            worst_margin: self.worst,
            worst_args: self.at,
        }
    }
}

/// Samples every admissibility inequality for both closure families.
/// `extra_samples` random draws (seeded, reproducible) are added to a
/// structured grid of argument combinations.
pub fn model_condition_check(
    model: &MaterialModel,
    extra_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    let mut samples = grid_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra_samples {
        samples.push(ClosureArgs {
            invariant: (rng.random::<f64>() * 18.0 - 9.0).exp(),
            e_mag: 3.0 * rng.random::<f64>().abs(),
            mu: rng.random::<f64>(),
            tau: 10.0 * rng.random::<f64>() - 5.0,
            x: [rng.random::<f64>(), rng.random::<f64>()],
        });
    }

    // Floating-point slack, scaled by the constant each bound involves.
    let tol = |scale: f64| 1e-9 * scale.abs().max(1.0);

    let weight_rows = |closure: &dyn Closure, label: &str| -> Vec<MarginTracker> {
        let _ = (closure, label);
        vec![
            MarginTracker::new(format!("0 <= {label}"), tol(1.0)),
            MarginTracker::new(format!("{label} <= a0"), tol(model.a0)),
        ]
    };
    let shear_rows = |label: &str| -> Vec<MarginTracker> {
        vec![
            MarginTracker::new(format!("a1 <= {label}"), tol(model.a1)),
            MarginTracker::new(format!("{label} <= a2"), tol(model.a2)),
            MarginTracker::new(
                format!("{label} + 2 I d{label}/dI >= a3"),
                tol(model.a3),
            ),
            MarginTracker::new(format!("|d{label}/dI| I <= a4"), tol(model.a4)),
        ]
    };

    let mut rows_e = weight_rows(model.closure_e.as_ref(), "e");
    let mut rows_b = weight_rows(model.closure_b.as_ref(), "b");
    let mut rows_psi1 = shear_rows("psi1");
    let mut rows_psi = shear_rows("psi");
    let mut zero_field_b = MarginTracker::new("b at |E|=0 independent of mu", tol(1.0));
    let mut zero_field_psi = MarginTracker::new("psi at |E|=0 independent of mu", tol(1.0));

    for args in &samples {
        for (closure, rows) in [
            (model.closure_e.as_ref(), &mut rows_e),
            (model.closure_b.as_ref(), &mut rows_b),
        ] {
            let w = closure.eval(args);
            rows[0].observe(w, args);
            rows[1].observe(model.a0 - w, args);
        }
        for (closure, rows) in [
            (model.closure_psi1.as_ref(), &mut rows_psi1),
            (model.closure_psi.as_ref(), &mut rows_psi),
        ] {
            let s = closure.eval(args);
            let ds = closure_d_invariant(closure, args);
            rows[0].observe(s - model.a1, args);
            rows[1].observe(model.a2 - s, args);
            rows[2].observe(s + 2.0 * args.invariant * ds - model.a3, args);
            rows[3].observe(model.a4 - ds.abs() * args.invariant, args);
        }

        // With |E| = 0 the alignment factor is undefined, so nothing that
        // survives into the equations may depend on it there.
        let mut at_zero = *args;
        at_zero.e_mag = 0.0;
        let mut reference = at_zero;
        reference.mu = 0.0;
        let b_diff =
            (model.closure_b.eval(&at_zero) - model.closure_b.eval(&reference)).abs();
        zero_field_b.observe(-b_diff, &at_zero);
        let psi_diff =
            (model.closure_psi.eval(&at_zero) - model.closure_psi.eval(&reference)).abs();
        zero_field_psi.observe(-psi_diff, &at_zero);
    }

    let mut rows = Vec::new();
    rows.extend(rows_e.into_iter().map(MarginTracker::finish));
    rows.extend(rows_psi1.into_iter().map(MarginTracker::finish));
    rows.extend(rows_b.into_iter().map(MarginTracker::finish));
    rows.extend(rows_psi.into_iter().map(MarginTracker::finish));
    rows.push(zero_field_b.finish());
    rows.push(zero_field_psi.finish());

    for row in &rows {
        if !row.worst_margin.is_finite() {
            return Err(Error::InvalidInput(format!(
                "closure produced a non-finite value while checking `{}` at {}",
                row.condition, row.worst_args
            )));
        }
    }

    let passed = rows.iter().all(|r| r.passed);
    Ok(ConditionReport { rows, samples: samples.len(), passed })
}

fn grid_samples() -> Vec<ClosureArgs> {
    let mut invariants = vec![0.0];
    for k in 0..17 {
        invariants.push(10f64.powf(-4.0 + 0.5 * k as f64));
    }
    let e_mags = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let taus = [-5.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0];
    let mus = [0.0, 0.25, 0.5, 0.75, 1.0];
    let xs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];

    let mut out = Vec::new();
    for &invariant in &invariants {
        for &e_mag in &e_mags {
            for &tau in &taus {
                for &mu in &mus {
                    // Cycle positions instead of taking the full product;
                    // position dependence is rare and smooth in practice.
                    let x = xs[out.len() % xs.len()];
                    out.push(ClosureArgs { invariant, e_mag, mu, tau, x });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{closures, MaterialModel, ModelConstants, Variant};
    use std::sync::Arc;

    fn model_with(
        c: ModelConstants,
        psi1: Arc<dyn Closure>,
        psi: Arc<dyn Closure>,
    ) -> MaterialModel {
        MaterialModel::new(
            c,
            closures::make_weight("saturating:0.3", &c).unwrap(),
            psi1,
            closures::make_weight("saturating_aligned:0.3,0.5", &c).unwrap(),
            psi,
        )
        .unwrap()
    }

    #[test]
    fn default_closures_pass_all_conditions() {
        let c = ModelConstants::default();
        let model = model_with(
            c,
            closures::make_shear("carreau", &c).unwrap(),
            closures::make_shear("carreau", &c).unwrap(),
        );
        let report = model_condition_check(&model, 10_000, 7).unwrap();
        assert!(report.passed, "failures: {:?}", report.failures().collect::<Vec<_>>());
        assert!(report.samples >= 10_000);
        assert_eq!(report.rows.len(), 14);
    }

    #[test]
    fn constant_shear_at_lower_bound_passes() {
        // psi = a1 everywhere: the derivative terms vanish and the
        // monotonicity margin is a1 - a3 = 0 with the default constants.
        let c = ModelConstants::default();
        let model = model_with(
            c,
            closures::make_shear("const:0.5", &c).unwrap(),
            closures::make_shear("const:0.5", &c).unwrap(),
        );
        let report = model_condition_check(&model, 1_000, 1).unwrap();
        assert!(report.passed, "failures: {:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn out_of_range_closure_is_flagged_with_negative_margin() {
        struct TooBig;
        impl Closure for TooBig {
            fn eval(&self, _: &ClosureArgs) -> f64 {
                3.0 // above a2 = 2
            }
            fn name(&self) -> String {
                "toobig".into()
            }
        }
        let c = ModelConstants::default();
        let model = model_with(
            c,
            Arc::new(TooBig),
            closures::make_shear("carreau", &c).unwrap(),
        );
        let report = model_condition_check(&model, 100, 1).unwrap();
        assert!(!report.passed);
        let row = report
            .rows
            .iter()
            .find(|r| r.condition == "psi1 <= a2")
            .unwrap();
        assert!(!row.passed);
        assert!((row.worst_margin - (-1.0)).abs() < 1e-12);
        assert!(!row.worst_args.is_empty());
    }

    #[test]
    fn alignment_dependence_at_zero_field_is_flagged() {
        struct LeakyB;
        impl Closure for LeakyB {
            fn eval(&self, a: &ClosureArgs) -> f64 {
                0.1 * a.mu // depends on mu even at |E| = 0
            }
            fn name(&self) -> String {
                "leaky".into()
            }
        }
        let c = ModelConstants::default();
        let model = MaterialModel::new(
            c,
            closures::make_weight("saturating:0.3", &c).unwrap(),
            closures::make_shear("carreau", &c).unwrap(),
            Arc::new(LeakyB),
            closures::make_shear("carreau", &c).unwrap(),
        )
        .unwrap();
        let report = model_condition_check(&model, 100, 1).unwrap();
        let row = report
            .rows
            .iter()
            .find(|r| r.condition.contains("b at |E|=0"))
            .unwrap();
        assert!(!row.passed);
    }

    #[test]
    fn check_is_deterministic_for_a_fixed_seed() {
        let c = ModelConstants::default();
        let model = model_with(
            c,
            closures::make_shear("carreau", &c).unwrap(),
            closures::make_shear("carreau", &c).unwrap(),
        );
        let a = model_condition_check(&model, 500, 42).unwrap();
        let b = model_condition_check(&model, 500, 42).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.worst_margin, rb.worst_margin);
            assert_eq!(ra.worst_args, rb.worst_args);
        }
    }

    #[test]
    fn runs_fast_enough_for_many_samples() {
        let c = ModelConstants::default();
        let model = model_with(
            c,
            closures::make_shear("carreau", &c).unwrap(),
            closures::make_shear("carreau", &c).unwrap(),
        );
        let t0 = std::time::Instant::now();
        let report = model_condition_check(&model, 10_000, 3).unwrap();
        assert!(report.samples >= 10_000);
        assert!(t0.elapsed().as_secs_f64() < 5.0);
    }

    #[test]
    fn variant_is_threaded_through() {
        let c = ModelConstants { variant: Variant::Phi1, ..Default::default() };
        let model = model_with(
            c,
            closures::make_shear("carreau", &c).unwrap(),
            closures::make_shear("carreau", &c).unwrap(),
        );
        assert_eq!(model.variant, Variant::Phi1);
    }
}
