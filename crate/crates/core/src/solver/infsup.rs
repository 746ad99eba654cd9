//! Discrete inf-sup constant of the velocity/pressure pair.
//!
//! beta1 is the square root of the smallest eigenvalue of the pressure
//! Schur pencil
//!
//! ```text
//! B Mx^-1 B^T q = beta^2 M q
//! ```
//!
//! where Mx is the strain Gram matrix on the free velocity dofs, B the
//! divergence coupling and M the pressure mass. On a closed boundary the
//! pencil is singular on constants, which are deflated away; a traction
//! part removes that kernel.

use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_divergence, assemble_mass_p1, assemble_strain_product};
use crate::fem::space::Spaces;
use crate::linalg::{pcg, smallest_pencil_eigenvalue, SparseChol};
use crate::mesh::BoundaryTag;

/// Estimates the inf-sup constant of the discrete pair on this mesh.
pub fn estimate_inf_sup(spaces: &Spaces) -> Result<f64> {
    let v = &spaces.velocity;
    let b_full = assemble_divergence(spaces);
    let np = b_full.nrows;
    let b_free = b_full.restrict(
        &(0..np).collect::<Vec<_>>(),
        np,
        &v.full_to_free,
        v.n_free(),
    );
    let mx_full = assemble_strain_product(spaces);
    let mx_free = mx_full.restrict(&v.full_to_free, v.n_free(), &v.full_to_free, v.n_free());
    let mx_chol = SparseChol::new(&mx_free)?;
    let mass = assemble_mass_p1(spaces);
    let mass_chol = SparseChol::new(&mass)?;

    let closed = !spaces
        .mesh
        .boundary_edges
        .iter()
        .any(|e| e.tag == BoundaryTag::S2);

    // Mass-orthogonal deflation of the constant pressure mode, active only
    // when the boundary is closed and constants span the kernel.
    let m_one = mass.mul_vec(&vec![1.0; np]);
    let one_m_one: f64 = m_one.iter().sum();
    let deflate = |q: &mut Vec<f64>| {
        if closed {
            let c: f64 = q.iter().zip(&m_one).map(|(a, b)| a * b).sum::<f64>() / one_m_one;
            for x in q.iter_mut() {
                *x -= c;
            }
        }
    };

    let apply_schur = |q: &[f64]| -> Result<Vec<f64>> {
        let btq = b_free.mul_vec_transposed(q);
        let w = mx_chol.solve(&btq)?;
        Ok(b_free.mul_vec(&w))
    };
    let apply_mass = |q: &[f64]| -> Result<Vec<f64>> { Ok(mass.mul_vec(q)) };

    // Inverse iteration needs Schur^-1 applied to mass-weighted vectors;
    // conjugate gradients with the mass preconditioner, deflating before
    // and after so the solve stays in the orthogonal complement of the
    // kernel.
    let solve_schur = |rhs: &[f64]| -> Result<Vec<f64>> {
        let mut b = rhs.to_vec();
        deflate(&mut b);
        let mut q = pcg(
            |x| apply_schur(x),
            |r| mass_chol.solve(r),
            &b,
            1e-12,
            400,
        )?;
        deflate(&mut q);
        Ok(q)
    };

    let mut start: Vec<f64> = (0..np).map(|k| spaces.mesh.nodes[k][0]).collect();
    deflate(&mut start);
    let norm2: f64 = start.iter().map(|x| x * x).sum();
    if norm2 <= 0.0 {
        return Err(Error::Internal("degenerate start vector for the inf-sup pencil".into()));
    }

    let lam = smallest_pencil_eigenvalue(
        solve_schur,
        |q| apply_schur(q),
        apply_mass,
        &start,
        1e-10,
        300,
    )?;
    if lam <= 1e-16 {
        return Err(Error::Singular(format!(
            "inf-sup pencil degenerated (smallest eigenvalue {lam:.3e})"
        )));
    }
    Ok(lam.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_spaces;
    use crate::mesh::{generate_rectangle, TagRule};
    use std::sync::Arc;

    #[test]
    fn taylor_hood_is_stable_on_the_unit_square() {
        let mesh = generate_rectangle(8, 8, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = build_spaces(Arc::new(mesh));
        let beta = estimate_inf_sup(&spaces).unwrap();
        assert!(beta > 0.1 && beta < 1.0, "implausible inf-sup constant {beta}");
    }

    #[test]
    fn constant_is_mesh_size_robust() {
        // The whole point of a stable pair: beta does not collapse under
        // refinement. Two refinement levels must agree within a modest
        // spread.
        let tags = TagRule::all_dirichlet();
        let betas: Vec<f64> = [8usize, 16]
            .iter()
            .map(|&n| {
                let mesh = generate_rectangle(n, n, 1.0, 1.0, &tags).unwrap();
                estimate_inf_sup(&build_spaces(Arc::new(mesh))).unwrap()
            })
            .collect();
        let spread = (betas[0] - betas[1]).abs() / betas[0].max(betas[1]);
        assert!(spread < 0.1, "betas {betas:?} drift under refinement");
    }

    #[test]
    fn open_boundary_needs_no_deflation() {
        let tags = TagRule {
            left: BoundaryTag::S1,
            right: BoundaryTag::S2,
            bottom: BoundaryTag::S1,
            top: BoundaryTag::S1,
        };
        let mesh = generate_rectangle(6, 6, 1.0, 1.0, &tags).unwrap();
        let spaces = build_spaces(Arc::new(mesh));
        let beta = estimate_inf_sup(&spaces).unwrap();
        assert!(beta > 0.05, "open-boundary inf-sup constant {beta}");
    }
}
