//! Smooth versus polyhedral parallel transport along fixed geodesics on the
//! sphere: the operator-norm gap shrinks linearly with the mesh.

use reggelab::harness::{catalog, convergence::seeded_geodesics};
use reggelab::holonomy::compare_transport;
use reggelab::numutil::log_log_slope;
use reggelab::polyhedron::build_approximation;
use std::collections::HashMap;

fn main() {
    reggelab::harness::init_threads();
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let base = catalog::octahedron_sphere_base();
    let geos = seeded_geodesics(&m, None, 4, 11, 0.7, 400).unwrap();
    let mut rhos = Vec::new();
    let mut gaps = Vec::new();
    for e in [2u32, 4, 8] {
        let poly = build_approximation(m.clone(), &base, e).unwrap();
        let mut worst = 0.0f64;
        for g in &geos {
            let cmp = compare_transport(&m, &poly, g.curve(), 400).unwrap();
            worst = worst.max(cmp.gap);
        }
        println!("E={e}: rho={:.4} max gap={:.4e}", poly.mesh_rho, worst);
        rhos.push(poly.mesh_rho);
        gaps.push(worst);
    }
    println!("gap slope vs rho = {:.3} (expect about 1)", log_log_slope(&rhos, &gaps));
}
