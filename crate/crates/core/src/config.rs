//! Run configuration: flat `section.key = value` text with `#` comments.
//!
//! Parsing is strict. Every key must be known, well typed and set at most
//! once, and every diagnostic carries the 1-based line it points at, so a
//! typo fails the run instead of silently falling back to a default.
//! `RunConfig::load` realizes the full object graph (mesh, material model,
//! problem data, solver settings, kernel sequence, output options); the
//! command layer only orchestrates.

use crate::constitutive::{closures, MaterialModel, ModelConstants, Variant};
use crate::error::{Error, Result};
use crate::mesh::{
    generate_rectangle_with_pattern, read_mesh, BoundaryTag, Mesh, MeshPattern, TagRule,
};
use crate::mollify::{kernel_sequence, MollifierKernel};
use crate::problem::{make_scalar_field, make_traction, make_vector_field, ProblemData};
use crate::solver::{PressureGauge, SolverConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where artifacts go and which kinds are written.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub vtk: bool,
    pub csv: bool,
    pub json: bool,
}

/// Generator parameters, kept when the mesh came from `mesh.source =
/// generate` so commands can rebuild refinements of the same domain.
#[derive(Debug, Clone, Copy)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub pattern: MeshPattern,
    pub tags: TagRule,
}

impl MeshSpec {
    /// The same domain and tagging with `factor` times as many cells per
    /// side.
    pub fn refined(&self, factor: usize) -> Result<Mesh> {
        generate_rectangle_with_pattern(
            self.nx * factor,
            self.ny * factor,
            self.lx,
            self.ly,
            &self.tags,
            self.pattern,
        )
    }
}

/// Everything one run needs, realized from the config text.
#[derive(Debug)]
pub struct RunConfig {
    pub mesh: Mesh,
    /// Present when the mesh was generated rather than read from a file.
    pub generator: Option<MeshSpec>,
    pub model: MaterialModel,
    pub problem: ProblemData,
    pub solver: SolverConfig,
    /// Shrinking smoothing radii; `solve` uses the first entry, `sweep`
    /// walks all of them.
    pub kernels: Vec<MollifierKernel>,
    pub output: OutputOptions,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_text(&text, base)
    }

    /// Builds a config from already-loaded text. Relative `mesh.file`
    /// paths resolve against `base`; `output.dir` stays relative to the
    /// working directory.
    pub fn from_text(text: &str, base: &Path) -> Result<RunConfig> {
        let mut e = Entries::parse(text)?;
        let (mesh, generator) = build_mesh(&mut e, base)?;
        let model = build_model(&mut e)?;
        let problem = build_problem(&mut e)?;
        let solver = build_solver(&mut e)?;
        let kernels = build_kernels(&mut e, &mesh)?;
        let output = OutputOptions {
            dir: PathBuf::from(e.string_or("output.dir", "out")),
            vtk: e.bool_or("output.vtk", true)?,
            csv: e.bool_or("output.csv", true)?,
            json: e.bool_or("output.json", true)?,
        };
        e.finish()?;
        Ok(RunConfig { mesh, generator, model, problem, solver, kernels, output })
    }
}

/// The raw key/value pairs. Builders consume entries with `take`;
/// whatever is left at the end is a typo or a key the chosen mesh source
/// does not use, and `finish` rejects it.
struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse { line, msg: "empty key or value".into() });
            }
            if let Some((_, first)) = map.insert(key.clone(), (value, line)) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}` (first set at line {first})"),
                });
            }
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn string_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).map_or_else(|| default.to_string(), |(v, _)| v)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::Parse { line, msg: format!("`{key}` must be a finite number, got `{v}`") }
            }),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("`{key}` must be a non-negative integer, got `{v}`"),
            }),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "on" => Ok(true),
                "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Parse {
                    line,
                    msg: format!("`{key}` must be true or false, got `{v}`"),
                }),
            },
        }
    }

    fn pair_or(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse {
                        line,
                        msg: format!("`{key}` must be two comma-separated numbers, got `{v}`"),
                    })?;
                if parts.len() != 2 || parts.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse {
                        line,
                        msg: format!("`{key}` must be two finite numbers, got `{v}`"),
                    });
                }
                Ok([parts[0], parts[1]])
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((key, (_, line))) => {
                Err(Error::Parse { line, msg: format!("unknown or unused key `{key}`") })
            }
        }
    }
}

fn boundary_tag(e: &mut Entries, key: &str) -> Result<BoundaryTag> {
    match e.take(key) {
        None => Ok(BoundaryTag::S1),
        Some((v, line)) => match v.as_str() {
            "S1" => Ok(BoundaryTag::S1),
            "S2" => Ok(BoundaryTag::S2),
            _ => Err(Error::Parse { line, msg: format!("`{key}` must be S1 or S2, got `{v}`") }),
        },
    }
}

fn build_mesh(e: &mut Entries, base: &Path) -> Result<(Mesh, Option<MeshSpec>)> {
    let (source, source_line) = e.take("mesh.source").unwrap_or(("generate".to_string(), 0));
    match source.as_str() {
        "file" => {
            let Some((file, _)) = e.take("mesh.file") else {
                return Err(Error::Config("mesh.source = file needs mesh.file".into()));
            };
            Ok((read_mesh(base.join(file))?, None))
        }
        "generate" => {
            let pattern = match e.take("mesh.pattern") {
                None => MeshPattern::Crossed,
                Some((v, line)) => match v.as_str() {
                    "crossed" => MeshPattern::Crossed,
                    "diagonal" => MeshPattern::Diagonal,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("`mesh.pattern` must be crossed or diagonal, got `{v}`"),
                        })
                    }
                },
            };
            let spec = MeshSpec {
                nx: e.usize_or("mesh.nx", 16)?,
                ny: e.usize_or("mesh.ny", 16)?,
                lx: e.f64_or("mesh.lx", 1.0)?,
                ly: e.f64_or("mesh.ly", 1.0)?,
                pattern,
                tags: TagRule {
                    left: boundary_tag(e, "mesh.tag.left")?,
                    right: boundary_tag(e, "mesh.tag.right")?,
                    bottom: boundary_tag(e, "mesh.tag.bottom")?,
                    top: boundary_tag(e, "mesh.tag.top")?,
                },
            };
            Ok((spec.refined(1)?, Some(spec)))
        }
        _ => Err(Error::Parse {
            line: source_line,
            msg: format!("`mesh.source` must be generate or file, got `{source}`"),
        }),
    }
}

fn build_model(e: &mut Entries) -> Result<MaterialModel> {
    let variant = match e.take("model.variant") {
        None => Variant::Phi2,
        Some((v, line)) => match v.as_str() {
            "phi1" => Variant::Phi1,
            "phi2" => Variant::Phi2,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("`model.variant` must be phi1 or phi2, got `{v}`"),
                })
            }
        },
    };
    let d = ModelConstants::default();
    let c = ModelConstants {
        variant,
        lambda: e.f64_or("model.lambda", d.lambda)?,
        chi: e.f64_or("model.chi", d.chi)?,
        eps_heat: e.f64_or("model.eps_heat", d.eps_heat)?,
        a0: e.f64_or("model.a0", d.a0)?,
        a1: e.f64_or("model.a1", d.a1)?,
        a2: e.f64_or("model.a2", d.a2)?,
        a3: e.f64_or("model.a3", d.a3)?,
        a4: e.f64_or("model.a4", d.a4)?,
        alpha: e.f64_or("model.alpha", d.alpha)?,
        u_frame: e.pair_or("model.u_frame", d.u_frame)?,
    };
    // Defaults mirror `default_model`, so an empty model section gives the
    // reference material.
    let spec_e = e.string_or("model.closure.e", "saturating:0.3");
    let spec_psi1 = e.string_or("model.closure.psi1", "carreau");
    let spec_b = e.string_or("model.closure.b", "saturating_aligned:0.3,0.5");
    let spec_psi = e.string_or("model.closure.psi", "carreau");
    MaterialModel::new(
        c,
        closures::make_weight(&spec_e, &c)?,
        closures::make_shear(&spec_psi1, &c)?,
        closures::make_weight(&spec_b, &c)?,
        closures::make_shear(&spec_psi, &c)?,
    )
}

fn build_problem(e: &mut Entries) -> Result<ProblemData> {
    Ok(ProblemData {
        e_field: make_vector_field(&e.string_or("problem.e_field", "zero"))?,
        body_force: make_vector_field(&e.string_or("problem.body_force", "zero"))?,
        traction: make_traction(&e.string_or("problem.traction", "zero"))?,
        boundary_velocity: make_vector_field(&e.string_or("problem.boundary_velocity", "zero"))?,
        boundary_temperature: make_scalar_field(
            &e.string_or("problem.boundary_temperature", "zero"),
        )?,
    })
}

fn build_solver(e: &mut Entries) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let pressure_gauge = match e.take("solver.pressure_gauge") {
        None => d.pressure_gauge,
        Some((v, line)) => match v.as_str() {
            "mean_zero" => PressureGauge::MeanZero,
            "natural" => PressureGauge::Natural,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "`solver.pressure_gauge` must be mean_zero or natural, got `{v}`"
                    ),
                })
            }
        },
    };
    let truncation = match e.take("solver.truncation") {
        None => None,
        Some((v, _)) if v == "none" => None,
        Some((v, line)) => {
            let parts: Vec<f64> = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line,
                    msg: format!("`solver.truncation` must be `b1,b2` or none, got `{v}`"),
                })?;
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: format!("`solver.truncation` must be `b1,b2` or none, got `{v}`"),
                });
            }
            Some((parts[0], parts[1]))
        }
    };
    let cfg = SolverConfig {
        tol_flow: e.f64_or("solver.tol_flow", d.tol_flow)?,
        tol_temp: e.f64_or("solver.tol_temp", d.tol_temp)?,
        tol_coupled: e.f64_or("solver.tol_coupled", d.tol_coupled)?,
        max_picard: e.usize_or("solver.max_picard", d.max_picard)?,
        max_outer: e.usize_or("solver.max_outer", d.max_outer)?,
        theta_relax: e.f64_or("solver.theta_relax", d.theta_relax)?,
        pressure_gauge,
        truncation,
        moll_in_viscosity: e.bool_or("solver.moll_in_viscosity", d.moll_in_viscosity)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn build_kernels(e: &mut Entries, mesh: &Mesh) -> Result<Vec<MollifierKernel>> {
    let radius = e.f64_or("mollifier.radius", 0.1)?;
    let factor = e.f64_or("mollifier.sweep_factor", 0.5)?;
    let count = e.usize_or("mollifier.sweep_count", 3)?;
    let (lo, hi) = mesh.bbox();
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    if radius > diag {
        return Err(Error::Config(format!(
            "mollifier.radius {radius} exceeds the domain diameter {diag:.6}"
        )));
    }
    kernel_sequence(radius, factor, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from(text: &str) -> Result<RunConfig> {
        RunConfig::from_text(text, Path::new("."))
    }

    #[test]
    fn empty_text_yields_the_default_run() {
        let rc = from("").unwrap();
        assert_eq!(rc.mesh.bbox(), ([0.0, 0.0], [1.0, 1.0]));
        assert_eq!(rc.model.variant, Variant::Phi2);
        assert_eq!(rc.model.closure_e.name(), "saturating:0.3");
        assert_eq!(rc.model.closure_psi1.name(), "carreau");
        assert_eq!(rc.solver.max_outer, 80);
        assert_eq!(rc.kernels.len(), 3);
        assert!((rc.kernels[1].radius - 0.05).abs() < 1e-15);
        assert_eq!(rc.output.dir, PathBuf::from("out"));
        assert!(rc.output.vtk && rc.output.csv && rc.output.json);
    }

    #[test]
    fn a_full_config_reaches_every_field() {
        let text = "\
# driven channel, coarse
mesh.nx = 8
mesh.ny = 4
mesh.lx = 2.0
mesh.ly = 1.0
mesh.pattern = diagonal
mesh.tag.right = S2

model.variant = phi1
model.lambda = 0.5
model.a2 = 3.0
model.u_frame = 1.0, 0.0
model.closure.b = saturating_aligned:0.1,0.25
model.closure.psi = const:1.0  # inline comment

problem.body_force = uniform:1,0
problem.boundary_velocity = channel:1
problem.boundary_temperature = const:0.5

mollifier.radius = 0.2
mollifier.sweep_factor = 0.4
mollifier.sweep_count = 2

solver.tol_coupled = 1e-7
solver.theta_relax = 0.5
solver.pressure_gauge = natural
solver.truncation = 0.5,2.0
solver.moll_in_viscosity = true

output.dir = artifacts
output.vtk = false
";
        let rc = from(text).unwrap();
        assert_eq!(rc.mesh.bbox(), ([0.0, 0.0], [2.0, 1.0]));
        assert_eq!(rc.model.variant, Variant::Phi1);
        assert_eq!(rc.model.lambda, 0.5);
        assert_eq!(rc.model.a2, 3.0);
        assert_eq!(rc.model.u_frame, [1.0, 0.0]);
        assert_eq!(rc.model.closure_b.name(), "saturating_aligned:0.1,0.25");
        assert_eq!(rc.model.closure_psi.name(), "const:1");
        assert_eq!(rc.solver.tol_coupled, 1e-7);
        assert_eq!(rc.solver.theta_relax, 0.5);
        assert_eq!(rc.solver.pressure_gauge, PressureGauge::Natural);
        assert_eq!(rc.solver.truncation, Some((0.5, 2.0)));
        assert!(rc.solver.moll_in_viscosity);
        assert_eq!(rc.kernels.len(), 2);
        assert!((rc.kernels[1].radius - 0.08).abs() < 1e-15);
        assert_eq!(rc.output.dir, PathBuf::from("artifacts"));
        assert!(!rc.output.vtk && rc.output.csv && rc.output.json);
    }

    #[test]
    fn parse_diagnostics_carry_line_numbers() {
        let badly_formed = "mesh.nx = 8\nnot a key value line\n";
        match from(badly_formed).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }

        let duplicate = "mesh.nx = 8\n\nmesh.nx = 9\n";
        match from(duplicate).unwrap_err() {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("line 1"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }

        let unknown = "solver.tol_coupled = 1e-9\nmodel.a9 = 1\n";
        match from(unknown).unwrap_err() {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("model.a9"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }

        let bad_number = "model.lambda = fast\n";
        match from(bad_number).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn inadmissible_constants_are_rejected_before_any_solve() {
        assert!(from("model.a1 = 0\n").is_err());
        assert!(from("model.a1 = -1\n").is_err());
        assert!(from("model.lambda = 0\n").is_err());
        // Carreau's monotonicity margin needs a3 <= a1.
        assert!(from("model.a3 = 0.9\nmodel.a1 = 0.6\n").is_err());
    }

    #[test]
    fn degenerate_solver_and_kernel_settings_are_rejected() {
        assert!(from("solver.truncation = 2.0,0.5\n").is_err());
        assert!(from("solver.theta_relax = 0\n").is_err());
        assert!(from("mollifier.radius = 5\n").is_err());
        assert!(from("mollifier.sweep_count = 0\n").is_err());
    }

    #[test]
    fn mesh_files_resolve_against_the_config_directory() {
        let dir = std::env::temp_dir().join(format!("erheo-config-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mesh =
            crate::mesh::generate_rectangle(3, 3, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        crate::mesh::write_mesh(&mesh, dir.join("box.mesh")).unwrap();

        let text = "mesh.source = file\nmesh.file = box.mesh\n";
        let rc = RunConfig::from_text(text, &dir).unwrap();
        assert_eq!(rc.mesh.nodes.len(), mesh.nodes.len());

        assert!(from("mesh.source = file\n").is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn generator_keys_with_a_file_source_are_flagged() {
        let dir = std::env::temp_dir().join(format!("erheo-config-unused-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mesh =
            crate::mesh::generate_rectangle(2, 2, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        crate::mesh::write_mesh(&mesh, dir.join("box.mesh")).unwrap();
        let text = "mesh.source = file\nmesh.file = box.mesh\nmesh.nx = 8\n";
        match RunConfig::from_text(text, &dir).unwrap_err() {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("mesh.nx"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
