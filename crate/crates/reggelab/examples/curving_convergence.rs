//! The Regge curving of a square (bone-deficit-weighted transported Hodge
//! duals) converges to the Gauss curving (the transported curvature
//! integral) as the mesh refines.

use nalgebra::DVector;
use reggelab::harness::catalog;
use reggelab::holonomy::{gauss_curving, regge_curving_chart, riemannian_square};
use reggelab::polyhedron::build_approximation;
use reggelab::regge::{deficit_table, regge_curving};
use std::collections::HashMap;

fn main() {
    reggelab::harness::init_threads();
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let base = catalog::octahedron_sphere_base();
    let x = DVector::from_vec(vec![1.35, 0.8]);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    let sq = riemannian_square(&m, &x, &u, &v, 0.5).unwrap();
    let gauss = gauss_curving(&m, &sq, 8).unwrap();
    let xw = m.wrap_point(&sq.base);
    println!("|gauss curving| = {:.6e}", m.op_norm_g(&xw, &xw, &gauss));
    for e in [2u32, 4, 8] {
        let poly = build_approximation(m.clone(), &base, e).unwrap();
        let records = deficit_table(&poly).unwrap();
        let skew = regge_curving(&poly, &sq, 1000, &records).unwrap();
        let chart = regge_curving_chart(&poly, &sq, &skew).unwrap();
        let gap = m.op_norm_g(&xw, &xw, &(&chart - &gauss));
        println!("E={e}: rho={:.4} |regge - gauss| = {:.4e}", poly.mesh_rho, gap);
    }
}
