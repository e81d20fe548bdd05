//! Geodesics on a chart: the exponential map, the shooting solver behind the
//! logarithm, and the Jacobi-field defect that measures their curvature
//! coupling.

use nalgebra::DVector;
use reggelab::harness::catalog;
use reggelab::numutil::log_log_slope;
use std::collections::HashMap;

fn main() {
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let x = DVector::from_vec(vec![1.2, 0.7]);
    let v = DVector::from_vec(vec![0.5, 0.6]);
    let v = &v / m.norm(&x, &v) * 0.8;

    let end = m.exp_map(&x, &v).unwrap();
    println!("exp_x(v)          = ({:.6}, {:.6})", end.point[0], end.point[1]);
    println!("speed start/end   = {:.9} / {:.9}", m.norm(&x, &v), m.norm(&m.wrap_point(&end.point), &end.velocity));

    let back = m.log_map(&x, &m.wrap_point(&end.point)).unwrap();
    println!("log round trip    = {:.3e}", (&back.components - &v).norm());
    println!("distance          = {:.9}", m.norm(&x, &back.components));

    // Jacobi defect |P^-1 dexp(su)(w) - w| scales as s^2 (curvature).
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let w = DVector::from_vec(vec![0.0, 1.0]);
    let w = &w / m.norm(&x, &w);
    let ss = [0.4, 0.2, 0.1, 0.05];
    let vals: Vec<f64> = ss.iter().map(|&s| m.jacobi_defect(&x, &u, &w, s).unwrap()).collect();
    println!("jacobi defects    = {:?}", vals);
    println!("log-log slope     = {:.3} (expect 2)", log_log_slope(&ss, &vals));
}
