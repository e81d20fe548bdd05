//! Riemannian barycentric simplices on the sphere: weighted minimizers,
//! barycentric coordinates, the spread certificate and the Euclidean
//! realization of geodesic distances.

use nalgebra::DVector;
use rand::SeedableRng;
use reggelab::barycentric::{
    bary_coords, is_spread, metric_discrepancy, realize_euclidean, status, weighted_min, PointSet,
};
use reggelab::harness::catalog;
use std::collections::HashMap;

fn main() {
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let pts = vec![
        DVector::from_vec(vec![1.2, 0.4]),
        DVector::from_vec(vec![1.6, 0.9]),
        DVector::from_vec(vec![1.0, 1.1]),
    ];
    let ps = PointSet::new(&m, pts).unwrap();
    println!("enclosing ball: center=({:.4}, {:.4}) radius={:.4}", ps.center[0], ps.center[1], ps.radius);

    let lambda = [0.2, 0.5, 0.3];
    let x = weighted_min(&ps, &lambda, None).unwrap();
    println!("weighted_min({lambda:?}) = ({:.6}, {:.6})", x[0], x[1]);
    let back = bary_coords(&ps, &x).unwrap();
    println!("bary_coords round trip = ({:.9}, {:.9}, {:.9})", back[0], back[1], back[2]);
    println!("status(x) = {:?}", status(&ps, &x).unwrap().as_slice());

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let spread = is_spread(&ps, 10, &mut rng).unwrap();
    println!("spread = {} (t_min = {:.6})", spread.spread, spread.t_min);

    let flat = realize_euclidean(&ps).unwrap();
    println!("euclidean realization volume = {:.9}", flat.volume());
    let disc = metric_discrepancy(&ps, 6, &mut rng).unwrap();
    println!("metric discrepancy = {:.3e}", disc);
}
