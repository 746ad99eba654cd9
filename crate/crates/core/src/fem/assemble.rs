//! Element assembly of the discrete operators: the scalar Laplacian and
//! masses, the strain inner product, the divergence coupling, the loads,
//! the nonlinear momentum operator with its frozen-viscosity Picard
//! matrix, and the temperature operator with its dissipation source.
//!
//! All matrices and vectors are assembled over the full dof sets; the
//! solver restricts them to free dofs. Bilinear integrands use the
//! degree-2 rule (exact), convection the degree-5 rule (exact for it),
//! and the viscosity-weighted terms the degree-5 rule as the working
//! approximation.

use crate::constitutive::{
    alignment_mu, strain_rate, truncate_phi3, viscosity_phi1, viscosity_phi2, MaterialModel,
    Variant,
};
use crate::error::Result;
use crate::fem::field::FieldVector;
use crate::fem::space::Spaces;
use crate::fem::{p1_ref_grads, p2_ref_grads, p2_values, ElemGeom};
use crate::linalg::CooMat;
use crate::mesh::BoundaryTag;
use crate::problem::ProblemData;
use crate::quadrature::{edge_gauss3, tri_degree2, tri_degree5, TriPoint};

/// P2 shape data at one quadrature point of one element: values and
/// physical gradients.
struct P2Point {
    vals: [f64; 6],
    grads: [[f64; 2]; 6],
}

fn p2_at(geom: &ElemGeom, bary: [f64; 3]) -> P2Point {
    let refg = p2_ref_grads(bary);
    let mut grads = [[0.0; 2]; 6];
    for k in 0..6 {
        grads[k] = geom.push_grad(refg[k]);
    }
    P2Point { vals: p2_values(bary), grads }
}

fn p1_grads(geom: &ElemGeom) -> [[f64; 2]; 3] {
    let refg = p1_ref_grads();
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        g[k] = geom.push_grad(refg[k]);
    }
    g
}

/// Velocity value and gradient from element-local data.
fn velocity_at(
    p2: &P2Point,
    nodes: &[usize; 6],
    coeffs: &[f64],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut u = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for (k, &n) in nodes.iter().enumerate() {
        for c in 0..2 {
            let a = coeffs[2 * n + c];
            u[c] += a * p2.vals[k];
            grad[c][0] += a * p2.grads[k][0];
            grad[c][1] += a * p2.grads[k][1];
        }
    }
    (u, grad)
}

/// Scalar Laplacian on the P1 space: pi[i][j] = int grad psi_i . grad psi_j.
pub fn assemble_pi(spaces: &Spaces) -> CooMat {
    let mesh = &spaces.mesh;
    let n = mesh.nodes.len();
    let mut m = CooMat::new(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        let g = p1_grads(&geom);
        let area = 0.5 * geom.detj;
        for i in 0..3 {
            for j in 0..3 {
                m.push(tri[i], tri[j], area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
    }
    m
}

/// P1 mass matrix, shared by the pressure and temperature spaces.
pub fn assemble_mass_p1(spaces: &Spaces) -> CooMat {
    let mesh = &spaces.mesh;
    let n = mesh.nodes.len();
    let mut m = CooMat::new(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        for qp in tri_degree2() {
            let s = geom.detj * qp.weight;
            for i in 0..3 {
                for j in 0..3 {
                    m.push(tri[i], tri[j], s * qp.bary[i] * qp.bary[j]);
                }
            }
        }
    }
    m
}

/// Vector P2 mass matrix over the velocity dofs.
pub fn assemble_mass_velocity(spaces: &Spaces) -> CooMat {
    let mesh = &spaces.mesh;
    let nd = 2 * spaces.n_p2;
    let mut m = CooMat::new(nd, nd);
    for t in 0..mesh.triangles.len() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree5() {
            let p2 = p2_at(&geom, qp.bary);
            let s = geom.detj * qp.weight;
            for k in 0..6 {
                for l in 0..6 {
                    let v = s * p2.vals[k] * p2.vals[l];
                    for c in 0..2 {
                        m.push(2 * nodes[k] + c, 2 * nodes[l] + c, v);
                    }
                }
            }
        }
    }
    m
}

/// Entry of the strain inner product for basis directions (k, c), (l, c'):
/// eps(phi_k e_c) : eps(phi_l e_c').
#[inline]
fn strain_pair(gk: [f64; 2], c: usize, gl: [f64; 2], cp: usize) -> f64 {
    let same = if c == cp { gk[0] * gl[0] + gk[1] * gl[1] } else { 0.0 };
    0.5 * (same + gk[cp] * gl[c])
}

/// Gram matrix of the strain inner product (u, v) -> int eps(u) : eps(v).
/// Its restriction to the free velocity dofs is the Riesz map of the X
/// norm; on the full dof set it is only semidefinite (rigid motions).
pub fn assemble_strain_product(spaces: &Spaces) -> CooMat {
    let mesh = &spaces.mesh;
    let nd = 2 * spaces.n_p2;
    let mut m = CooMat::new(nd, nd);
    for t in 0..mesh.triangles.len() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree2() {
            let p2 = p2_at(&geom, qp.bary);
            let s = geom.detj * qp.weight;
            for k in 0..6 {
                for l in 0..6 {
                    for c in 0..2 {
                        for cp in 0..2 {
                            let v = s * strain_pair(p2.grads[k], c, p2.grads[l], cp);
                            if v != 0.0 {
                                m.push(2 * nodes[k] + c, 2 * nodes[l] + cp, v);
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// Divergence coupling B with (B u)_q = int psi_q div u: rows pressure
/// dofs, columns velocity dofs.
pub fn assemble_divergence(spaces: &Spaces) -> CooMat {
    let mesh = &spaces.mesh;
    let mut m = CooMat::new(mesh.nodes.len(), 2 * spaces.n_p2);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree2() {
            let p2 = p2_at(&geom, qp.bary);
            let s = geom.detj * qp.weight;
            for q in 0..3 {
                for l in 0..6 {
                    for c in 0..2 {
                        m.push(tri[q], 2 * nodes[l] + c, s * qp.bary[q] * p2.grads[l][c]);
                    }
                }
            }
        }
    }
    m
}

/// Load vector over the velocity dofs: the body force tested against the
/// P2 basis plus the traction integral over the natural boundary part.
pub fn assemble_loads(spaces: &Spaces, problem: &ProblemData) -> Vec<f64> {
    let mesh = &spaces.mesh;
    let mut load = vec![0.0; 2 * spaces.n_p2];
    for t in 0..mesh.triangles.len() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree5() {
            let x = geom.point(qp.bary);
            let f = problem.body_force.eval(x);
            let vals = p2_values(qp.bary);
            let s = geom.detj * qp.weight;
            for k in 0..6 {
                for c in 0..2 {
                    load[2 * nodes[k] + c] += s * f[c] * vals[k];
                }
            }
        }
    }
    for (be, edge) in mesh.boundary_edges.iter().enumerate() {
        if edge.tag != BoundaryTag::S2 {
            continue;
        }
        let a = mesh.nodes[edge.nodes[0]];
        let b = mesh.nodes[edge.nodes[1]];
        let normal = edge.outward_normal(mesh);
        let len = edge.length(mesh);
        let dofs = [edge.nodes[0], edge.nodes[1], spaces.boundary_midpoint_p2[be]];
        for (t, w) in edge_gauss3() {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let f = problem.traction.eval(x, normal);
            // Quadratic trace through the endpoints and the midpoint.
            let shapes = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            for (k, &n) in dofs.iter().enumerate() {
                for c in 0..2 {
                    load[2 * n + c] += w * len * f[c] * shapes[k];
                }
            }
        }
    }
    load
}

/// Viscosity at one quadrature point of the flow or dissipation operator.
/// The alignment factor of the field-aligned law comes from the velocity
/// value; at a vanishing electric field the law does not depend on it
/// (enforced when the model is built), so zero is passed.
fn viscosity_at(
    model: &MaterialModel,
    e: [f64; 2],
    x: [f64; 2],
    u_val: [f64; 2],
    invariant: f64,
    tau: f64,
) -> Result<f64> {
    let e_mag = (e[0] * e[0] + e[1] * e[1]).sqrt();
    match model.variant {
        Variant::Phi2 => viscosity_phi2(invariant, e_mag, tau, x, model),
        Variant::Phi1 => {
            let mu = if e_mag > 0.0 { alignment_mu(u_val, e, model)? } else { 0.0 };
            viscosity_phi1(invariant, e_mag, mu, tau, model)
        }
    }
}

/// The nonlinear momentum operator at a state: its residual vector
/// (the operator tested against every velocity basis function) and the
/// frozen-viscosity Picard matrix. By construction
/// `residual = picard * coeffs(total_u)`.
pub struct NAssembly {
    pub residual: Vec<f64>,
    pub picard: CooMat,
}

/// Assembles the momentum operator at `total_u` (lift plus correction)
/// and temperature `total_temp`. When `moll_u` is given, the viscosity
/// takes its invariant argument from that smoothed field instead of the
/// raw one; the default flow operator uses the raw invariant.
pub fn assemble_n(
    spaces: &Spaces,
    model: &MaterialModel,
    problem: &ProblemData,
    total_u: &FieldVector,
    total_temp: &FieldVector,
    moll_u: Option<&FieldVector>,
) -> Result<NAssembly> {
    let mesh = &spaces.mesh;
    let nd = 2 * spaces.n_p2;
    let mut residual = vec![0.0; nd];
    let mut picard = CooMat::new(nd, nd);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree5() {
            let p2 = p2_at(&geom, qp.bary);
            let x = geom.point(qp.bary);
            let (u_val, u_grad) = velocity_at(&p2, nodes, &total_u.coeffs);
            let strain = strain_rate(u_grad);
            let visc_inv = match moll_u {
                Some(pu) => strain_rate(velocity_at(&p2, nodes, &pu.coeffs).1).invariant,
                None => strain.invariant,
            };
            let tau = (0..3).map(|i| total_temp.coeffs[tri[i]] * qp.bary[i]).sum::<f64>();
            let e = problem.e_field.eval(x);
            let two_phi = 2.0 * viscosity_at(model, e, x, u_val, visc_inv, tau)?;
            let s = geom.detj * qp.weight;
            for k in 0..6 {
                let gk = p2.grads[k];
                for c in 0..2 {
                    // 2 phi eps(u) : eps(phi_k e_c) = 2 phi sum_j eps_cj d_j phi_k.
                    residual[2 * nodes[k] + c] += s
                        * two_phi
                        * (strain.eps[c][0] * gk[0] + strain.eps[c][1] * gk[1]);
                    for l in 0..6 {
                        for cp in 0..2 {
                            let v = s * two_phi * strain_pair(gk, c, p2.grads[l], cp);
                            if v != 0.0 {
                                picard.push(2 * nodes[k] + c, 2 * nodes[l] + cp, v);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(NAssembly { residual, picard })
}

/// How the convection term of the temperature equation is written.
/// `Divergence` tests the heat flux against the test gradient (the form
/// the smoothed problem uses); `Advective` tests the directional
/// derivative of the temperature (the form of the unsmoothed operator and
/// of the field-aligned problem). For exactly divergence-free transport
/// fields the two agree on interior test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionForm {
    Divergence,
    Advective,
}

/// The temperature operator at a state: the matrix acting on the full
/// temperature vector (conduction plus convection) and the dissipation
/// source tested against the P1 basis. The equation for the total
/// temperature theta is `matrix * theta = dissipation` on interior
/// vertices.
pub struct TempAssembly {
    pub matrix: CooMat,
    pub dissipation: Vec<f64>,
}

/// Assembles the temperature operator.
///
/// `lagged_temp` supplies the temperature the viscosity is evaluated at
/// (the previous outer iterate during the solve, the current one when
/// computing residuals). `moll_u` is the smoothed velocity; when present
/// the dissipation multiplier is its invariant, otherwise the raw one
/// (the unsmoothed operator). For the field-aligned law the viscosity
/// invariant argument follows the dissipation multiplier; for the
/// isotropic law it stays raw unless `visc_invariant_from_moll` opts in.
/// `truncation` caps the dissipation coefficient with the smooth cutoff.
#[allow(clippy::too_many_arguments)]
pub fn assemble_temp_operator(
    spaces: &Spaces,
    model: &MaterialModel,
    problem: &ProblemData,
    total_u: &FieldVector,
    lagged_temp: &FieldVector,
    convection: ConvectionForm,
    moll_u: Option<&FieldVector>,
    truncation: Option<(f64, f64)>,
    visc_invariant_from_moll: bool,
) -> Result<TempAssembly> {
    let mesh = &spaces.mesh;
    let n = mesh.nodes.len();
    let mut matrix = CooMat::new(n, n);
    let mut dissipation = vec![0.0; n];
    let chi = model.chi;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        let gp1 = p1_grads(&geom);
        for qp in tri_degree5() {
            let p2 = p2_at(&geom, qp.bary);
            let x = geom.point(qp.bary);
            let (u_val, u_grad) = velocity_at(&p2, nodes, &total_u.coeffs);
            let inv_raw = strain_rate(u_grad).invariant;
            let inv_diss = match moll_u {
                Some(pu) => strain_rate(velocity_at(&p2, nodes, &pu.coeffs).1).invariant,
                None => inv_raw,
            };
            let visc_inv = match model.variant {
                Variant::Phi1 => inv_diss,
                Variant::Phi2 => {
                    if visc_invariant_from_moll && moll_u.is_some() {
                        inv_diss
                    } else {
                        inv_raw
                    }
                }
            };
            let tau_lag = (0..3).map(|i| lagged_temp.coeffs[tri[i]] * qp.bary[i]).sum::<f64>();
            let e = problem.e_field.eval(x);
            let phi = viscosity_at(model, e, x, u_val, visc_inv, tau_lag)?;
            let phi = match truncation {
                Some((b1, b2)) => truncate_phi3(inv_diss, b1, b2, phi)?,
                None => phi,
            };
            let s = geom.detj * qp.weight;
            let source = s * 2.0 * model.eps_heat * phi * inv_diss;
            for i in 0..3 {
                dissipation[tri[i]] += source * qp.bary[i];
                for j in 0..3 {
                    let diffusion = chi * (gp1[i][0] * gp1[j][0] + gp1[i][1] * gp1[j][1]);
                    let convective = match convection {
                        ConvectionForm::Divergence => {
                            // - int psi_j (u . grad psi_i)
                            -qp.bary[j] * (u_val[0] * gp1[i][0] + u_val[1] * gp1[i][1])
                        }
                        ConvectionForm::Advective => {
                            // + int (u . grad psi_j) psi_i
                            (u_val[0] * gp1[j][0] + u_val[1] * gp1[j][1]) * qp.bary[i]
                        }
                    };
                    matrix.push(tri[i], tri[j], s * (diffusion + convective));
                }
            }
        }
    }
    Ok(TempAssembly { matrix, dissipation })
}

/// L2 norm of the dissipation density phi * I (without the 2 eps factor),
/// with the same viscosity and truncation conventions as
/// [`assemble_temp_operator`]. This is the quantity entering the
/// temperature ball estimate.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_density_l2(
    spaces: &Spaces,
    model: &MaterialModel,
    problem: &ProblemData,
    total_u: &FieldVector,
    lagged_temp: &FieldVector,
    moll_u: Option<&FieldVector>,
    truncation: Option<(f64, f64)>,
    visc_invariant_from_moll: bool,
) -> Result<f64> {
    let mesh = &spaces.mesh;
    let mut total = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElemGeom::new(mesh, t);
        let nodes = &spaces.elem_p2[t];
        for qp in tri_degree5() {
            let p2 = p2_at(&geom, qp.bary);
            let x = geom.point(qp.bary);
            let (u_val, u_grad) = velocity_at(&p2, nodes, &total_u.coeffs);
            let inv_raw = strain_rate(u_grad).invariant;
            let inv_diss = match moll_u {
                Some(pu) => strain_rate(velocity_at(&p2, nodes, &pu.coeffs).1).invariant,
                None => inv_raw,
            };
            let visc_inv = match model.variant {
                Variant::Phi1 => inv_diss,
                Variant::Phi2 => {
                    if visc_invariant_from_moll && moll_u.is_some() {
                        inv_diss
                    } else {
                        inv_raw
                    }
                }
            };
            let tau_lag = (0..3).map(|i| lagged_temp.coeffs[tri[i]] * qp.bary[i]).sum::<f64>();
            let e = problem.e_field.eval(x);
            let phi = viscosity_at(model, e, x, u_val, visc_inv, tau_lag)?;
            let phi = match truncation {
                Some((b1, b2)) => truncate_phi3(inv_diss, b1, b2, phi)?,
                None => phi,
            };
            let density = phi * inv_diss;
            total += geom.detj * qp.weight * density * density;
        }
    }
    Ok(total.sqrt())
}

/// Residual of the temperature equation at a total temperature field:
/// matrix * theta - dissipation, over all vertices. Meaningful on the
/// interior ones.
pub fn temperature_residual_vec(assembly: &TempAssembly, total_temp: &FieldVector) -> Vec<f64> {
    let k_theta = assembly.matrix.mul_vec(&total_temp.coeffs);
    k_theta.iter().zip(&assembly.dissipation).map(|(a, b)| a - b).collect()
}

/// Integrates a pointwise quantity with the degree-5 rule; the closure
/// receives the element, its geometry and the quadrature point.
pub fn integrate_deg5(
    spaces: &Spaces,
    mut f: impl FnMut(usize, &ElemGeom, &TriPoint) -> Result<f64>,
) -> Result<f64> {
    let mesh = &spaces.mesh;
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let geom = ElemGeom::new(mesh, t);
        for qp in tri_degree5() {
            total += geom.detj * qp.weight * f(t, &geom, qp)?;
        }
    }
    Ok(total)
}
