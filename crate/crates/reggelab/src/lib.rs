//! A numerical laboratory for approximating Riemannian manifolds by
//! piecewise-flat polyhedra.
//!
//! The crate builds geodesic triangulations of analytic chart metrics,
//! realizes each simplex as a Euclidean simplex from its geodesic edge
//! lengths, and studies the resulting piecewise-flat geometry: deficit
//! angles along codimension-2 bones, parallel transport by unfolding,
//! discrete (Regge) curvature of loops and parametrised squares, and the
//! convergence of the Regge scalar `sum alpha_xi Vol_{n-2}(xi)` toward a
//! dimensional constant times the integral of the scalar curvature.
//!
//! Modules, roughly bottom-up:
//!
//! * [`euclid`] - distance-matrix realizability, simplex quality, dihedral
//!   angles and unfolding of adjacent simplices;
//! * [`manifold`] - chart metrics with geodesics, parallel transport,
//!   curvature and curvature integrals;
//! * [`barycentric`] - Riemannian barycenters (weighted squared-distance
//!   minimizers), barycentric coordinates, spread tests and Euclidean
//!   realizations of point sets;
//! * [`complex`] - simplicial complexes, edgewise (Freudenthal) subdivision
//!   and the bones of a complex;
//! * [`polyhedron`] - the approximating polyhedron: geodesic edge lengths,
//!   per-simplex embeddings, quality reports and serialization;
//! * [`regge`] - the piecewise-flat side: curve tracing, transport by
//!   unfolding, deficit tables, bone rotations, intersection indices and
//!   the Regge curving of squares;
//! * [`holonomy`] - the smooth side: loop transport, the curvature
//!   double-integral identity, Gauss curving, generalized angles, and the
//!   smooth-versus-polyhedral comparison;
//! * [`harness`] - manifold catalog, experiment drivers, the kinematic
//!   constant estimator, and tabular output.
//!
//! The `examples/` directory demonstrates each capability end to end; the
//! `reggelab` binary wraps the same drivers behind a small config-file CLI.

pub mod barycentric;
pub mod complex;
pub mod euclid;
pub mod harness;
pub mod holonomy;
pub mod manifold;
pub mod numutil;
pub mod ode;
pub mod polyhedron;
pub mod regge;
