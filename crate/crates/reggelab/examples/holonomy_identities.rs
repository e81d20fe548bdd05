//! Smooth holonomy identities on the sphere: the boundary-loop transport
//! equals the transported curvature double integral, and for surfaces the
//! generalized angle is minus the integrated Gauss curvature.

use nalgebra::DVector;
use reggelab::harness::catalog;
use reggelab::holonomy::{curvature_double_integral, generalized_angle, loop_defect, riemannian_square};
use std::collections::HashMap;

fn main() {
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let x = DVector::from_vec(vec![1.3, 0.9]);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    for r in [0.5, 0.3] {
        let sq = riemannian_square(&m, &x, &u, &v, r).unwrap();
        let lhs = loop_defect(&m, &sq, 1200).unwrap();
        let rhs = curvature_double_integral(&m, &sq, 8).unwrap();
        let xw = m.wrap_point(&sq.base);
        println!(
            "side {r}: |P^-1 - Id| = {:.6e}, residual vs double integral = {:.3e}",
            m.op_norm_g(&xw, &xw, &lhs),
            m.op_norm_g(&xw, &xw, &(&lhs - &rhs))
        );
        let (_, theta) = generalized_angle(&m, &sq, 24, 1000).unwrap();
        println!("         generalized angle theta(1) = {:.6} (= -area on the unit sphere)", theta.unwrap());
    }
}
