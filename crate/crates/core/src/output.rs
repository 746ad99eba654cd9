//! Artifact writers: VTK legacy ASCII fields, iteration and sweep tables
//! as CSV, and the machine-readable error JSON.
//!
//! All writers build the full byte string in memory with deterministic
//! float formatting (shortest round-trip, exponent form), so identical
//! solutions serialize to identical files. The command layer's
//! reproducibility contract rests on that.

use crate::error::{Error, Result};
use crate::fem::field::FieldVector;
use crate::fem::Spaces;
use crate::solver::{HistoryRow, SweepReport};
use std::fmt::Write as _;
use std::path::Path;

/// Velocity, pressure and temperature sampled at the mesh vertices, as a
/// VTK legacy ASCII 2.0 unstructured grid with point data. The quadratic
/// velocity is written at vertices only; midpoint coefficients stay in
/// the solver's own vectors.
pub fn vtk_string(
    spaces: &Spaces,
    velocity: &FieldVector,
    pressure: &FieldVector,
    temperature: &FieldVector,
) -> String {
    let mesh = &spaces.mesh;
    let n = mesh.nodes.len();
    let m = mesh.triangles.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 2.0\n");
    s.push_str("stationary flow and temperature fields\n");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    writeln!(s, "POINTS {n} double").unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{:e} {:e} 0", p[0], p[1]).unwrap();
    }

    writeln!(s, "CELLS {m} {}", 4 * m).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        s.push_str("5\n");
    }

    writeln!(s, "POINT_DATA {n}").unwrap();
    s.push_str("VECTORS velocity double\n");
    for i in 0..n {
        writeln!(s, "{:e} {:e} 0", velocity.coeffs[2 * i], velocity.coeffs[2 * i + 1]).unwrap();
    }
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for i in 0..n {
        writeln!(s, "{:e}", pressure.coeffs[i]).unwrap();
    }
    s.push_str("SCALARS temperature double 1\nLOOKUP_TABLE default\n");
    for i in 0..n {
        writeln!(s, "{:e}", temperature.coeffs[i]).unwrap();
    }
    s
}

/// Header sanity check on an emitted VTK string: the declared point count
/// must equal the mesh's node count. Run on every file before it lands on
/// disk.
pub fn check_vtk(text: &str, spaces: &Spaces) -> Result<()> {
    let declared = text
        .lines()
        .find_map(|l| l.strip_prefix("POINTS "))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::Internal("emitted VTK lacks a POINTS header".into()))?;
    if declared != spaces.mesh.nodes.len() {
        return Err(Error::Internal(format!(
            "emitted VTK declares {declared} points for a mesh with {} nodes",
            spaces.mesh.nodes.len()
        )));
    }
    Ok(())
}

/// Outer-iteration history as CSV.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from(
        "iter,flow_residual,temp_residual,coupled_residual,norm_X_v,norm_1_zeta,norm_2_zeta\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iter,
            r.flow_residual,
            r.temp_residual,
            r.coupled_residual,
            r.norm_x_v,
            r.norm_1_zeta,
            r.norm_2_zeta
        )
        .unwrap();
    }
    s
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Smoothing-sweep convergence table as CSV, one row per kernel radius.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = String::from(
        "radius,converged,outer_iterations,norm_X_v,norm_1_zeta,diff_X_to_finest,\
         diff_temp_L2_to_finest,unregularized_residual,error\n",
    );
    for r in &report.rows {
        writeln!(
            s,
            "{:e},{},{},{:e},{:e},{:e},{:e},{:e},{}",
            r.radius,
            r.converged,
            r.outer_iterations,
            r.norm_x_v,
            r.norm_1_zeta,
            r.diff_x_to_finest,
            r.diff_temp_l2_to_finest,
            r.unregularized_residual,
            csv_escape(r.error.as_deref().unwrap_or("")),
        )
        .unwrap();
    }
    s
}

/// Discrete stability constants per refinement level as CSV.
pub fn infsup_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut s = String::from("level,h_max,beta1\n");
    for (level, h, beta) in rows {
        writeln!(s, "{level},{h:e},{beta:e}").unwrap();
    }
    s
}

/// Error report for stderr and `error.json`: kind tag, exit code, the
/// display message, and the residual trace when an iteration gave up.
pub fn error_json(err: &Error) -> String {
    let mut obj = serde_json::json!({
        "error": {
            "kind": err.kind(),
            "exit_code": err.exit_code(),
            "message": err.to_string(),
        }
    });
    if let Error::NonConvergence(d) = err {
        let e = &mut obj["error"];
        e["what"] = serde_json::json!(d.what);
        e["iterations"] = serde_json::json!(d.iterations);
        e["residual_history"] = serde_json::json!(d.residual_history);
        if let Some(hint) = &d.suggestion {
            e["suggestion"] = serde_json::json!(hint);
        }
    }
    serde_json::to_string_pretty(&obj).expect("error report serializes") + "\n"
}

/// Writes a string artifact, creating parent directories as needed.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_spaces, SpaceKind};
    use crate::mesh::{generate_rectangle, TagRule};
    use std::sync::Arc;

    fn tiny() -> Spaces {
        let mesh = generate_rectangle(2, 2, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        build_spaces(Arc::new(mesh))
    }

    #[test]
    fn vtk_layout_matches_the_mesh() {
        let spaces = tiny();
        let n = spaces.mesh.nodes.len();
        let m = spaces.mesh.triangles.len();
        let v = FieldVector::zeros(SpaceKind::VelocityP2, &spaces);
        let p = FieldVector::zeros(SpaceKind::PressureP1, &spaces);
        let t = FieldVector::zeros(SpaceKind::TemperatureP1, &spaces);
        let text = vtk_string(&spaces, &v, &p, &t);

        assert!(text.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(text.contains(&format!("POINTS {n} double")));
        assert!(text.contains(&format!("CELLS {m} {}", 4 * m)));
        assert!(text.contains(&format!("POINT_DATA {n}")));
        assert!(text.contains("VECTORS velocity double"));
        assert!(text.contains("SCALARS pressure double 1"));
        assert!(text.contains("SCALARS temperature double 1"));
        check_vtk(&text, &spaces).unwrap();

        // Each triangle row indexes existing points.
        let cells: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("CELLS"))
            .skip(1)
            .take(m)
            .collect();
        assert_eq!(cells.len(), m);
        for row in cells {
            let ids: Vec<usize> =
                row.split_whitespace().map(|w| w.parse().unwrap()).collect();
            assert_eq!(ids[0], 3);
            assert!(ids[1..].iter().all(|&i| i < n));
        }
    }

    #[test]
    fn identical_fields_serialize_to_identical_bytes() {
        let spaces = tiny();
        let mut v = FieldVector::zeros(SpaceKind::VelocityP2, &spaces);
        v.coeffs.iter_mut().enumerate().for_each(|(i, c)| *c = (i as f64).sin());
        let p = FieldVector::zeros(SpaceKind::PressureP1, &spaces);
        let t = FieldVector::zeros(SpaceKind::TemperatureP1, &spaces);
        assert_eq!(vtk_string(&spaces, &v, &p, &t), vtk_string(&spaces, &v, &p, &t));
    }

    #[test]
    fn history_header_is_pinned() {
        let rows = vec![HistoryRow {
            iter: 1,
            flow_residual: 0.25,
            temp_residual: 1e-3,
            coupled_residual: 0.25,
            norm_x_v: 1.5,
            norm_1_zeta: 0.5,
            norm_2_zeta: 0.25,
        }];
        let csv = history_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,flow_residual,temp_residual,coupled_residual,norm_X_v,norm_1_zeta,norm_2_zeta"
        );
        assert_eq!(lines.next().unwrap(), "1,2.5e-1,1e-3,2.5e-1,1.5e0,5e-1,2.5e-1");
        assert!(lines.next().is_none());
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a, b"), "\"a, b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn error_report_is_machine_readable() {
        let err = Error::non_convergence("outer coupling iteration", 7, vec![1.0, 0.9], None);
        let parsed: serde_json::Value = serde_json::from_str(&error_json(&err)).unwrap();
        assert_eq!(parsed["error"]["kind"], "non_convergence");
        assert_eq!(parsed["error"]["exit_code"], 3);
        assert_eq!(parsed["error"]["iterations"], 7);
        assert_eq!(parsed["error"]["residual_history"][1], 0.9);

        let config = Error::Config("bad key".into());
        let parsed: serde_json::Value = serde_json::from_str(&error_json(&config)).unwrap();
        assert_eq!(parsed["error"]["kind"], "config");
        assert_eq!(parsed["error"]["exit_code"], 2);
    }
}
