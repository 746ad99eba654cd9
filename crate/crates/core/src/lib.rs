//! Finite-element solver for stationary, non-isothermal flow of an
//! electrorheological fluid in a plane domain.
//!
//! The fluid model couples a Stokes-like momentum balance, whose viscosity
//! depends on the shear rate invariant, the electric field, the particle
//! alignment and the temperature, with a convection-diffusion equation for
//! the temperature whose source is the viscous dissipation. The dissipation
//! is evaluated on a mollified velocity field, which is what makes the
//! stationary coupled problem well posed for small data.
//!
//! Module map:
//! - [`mesh`]: conforming triangle meshes with tagged boundary parts.
//! - [`quadrature`]: fixed triangle and edge rules used by the assembly.
//! - [`constitutive`]: viscosity laws, their admissibility conditions and
//!   the constants entering the monotonicity estimates.
//! - [`fem`]: Taylor-Hood / P1 spaces, fields, norms and weak-form assembly.
//! - [`mollify`]: the compactly supported smoothing kernel and the discrete
//!   velocity regularization.
//! - [`linalg`]: sparse direct solves, saddle-point systems, Riesz dual
//!   norms (thin wrappers over `faer`).
//! - [`solver`]: the damped Picard flow solve, the temperature solve, the
//!   outer fixed-point coupling, and the diagnostic estimators.
//! - [`problem`], [`config`], [`output`], [`cli`]: problem data registry,
//!   flat-file configuration, artifact writers and the command line tool.

pub mod cli;
pub mod config;
pub mod constitutive;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod mollify;
pub mod output;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

use std::sync::OnceLock;

/// Runs `f` on the crate-wide rayon pool. The pool size is taken from the
/// `ERHEO_THREADS` environment variable once, at first use; unset, empty or
/// `0` means the rayon default. Results of parallel maps are collected in
/// index order, so numerical output does not depend on the thread count.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    let pool = POOL.get_or_init(|| {
        let n = std::env::var("ERHEO_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("failed to build thread pool")
    });
    pool.install(f)
}
