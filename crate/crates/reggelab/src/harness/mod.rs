//! Experiment harness: the manifold catalog, base complexes, convergence
//! drivers, the kinematic constant estimator, and tabular output.

pub mod catalog;
pub mod config;
pub mod convergence;
pub mod kinematic;

use std::sync::Once;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown manifold '{0}'")]
    UnknownManifold(String),
    #[error("unknown base complex '{0}'")]
    UnknownBaseComplex(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Poly(#[from] crate::polyhedron::PolyError),
    #[error(transparent)]
    Regge(#[from] crate::regge::ReggeError),
    #[error(transparent)]
    Manifold(#[from] crate::manifold::ManifoldError),
    #[error(transparent)]
    Complex(#[from] crate::complex::ComplexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

static THREAD_INIT: Once = Once::new();

/// Caps rayon's parallelism from `REGGE_THREADS` (first call wins).
pub fn init_threads() {
    THREAD_INIT.call_once(|| {
        if let Ok(v) = std::env::var("REGGE_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}
