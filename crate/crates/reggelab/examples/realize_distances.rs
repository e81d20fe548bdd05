//! Realizing edge-length data as a Euclidean simplex: the Schoenberg
//! criterion, the canonical embedding, and the quality measures.

use nalgebra::DMatrix;
use reggelab::euclid::{
    cayley_menger_volume, embed_simplex, inradius, openness, schoenberg_check, thickness,
    DistanceMatrix,
};

fn show(name: &str, dm: &DistanceMatrix) {
    let rep = schoenberg_check(dm);
    println!("{name}:");
    println!("  realizable      = {}", rep.realizable);
    println!("  min eigenvalue  = {:.3e}", rep.min_eigenvalue);
    if let Ok(v) = cayley_menger_volume(dm) {
        println!("  volume          = {v:.9}");
    }
    if rep.realizable {
        let s = embed_simplex(dm).unwrap();
        println!("  thickness       = {:.9}", thickness(&s));
        println!("  inradius        = {:.9}", inradius(&s));
        println!("  openness        = {:.9}", openness(&s));
        for (i, p) in s.vertices.iter().enumerate() {
            let c: Vec<String> = p.iter().map(|x| format!("{x:+.6}")).collect();
            println!("  v{i} = ({})", c.join(", "));
        }
    }
    println!();
}

fn main() {
    show("equilateral triangle", &DistanceMatrix::regular(2, 1.0));
    show("regular tetrahedron", &DistanceMatrix::regular(3, 1.0));
    show(
        "near-degenerate sliver (1, 1, 1.999)",
        &DistanceMatrix::triangle(1.0, 1.0, 1.999).unwrap(),
    );
    // A collinear triple: zero volume, not realizable as a 2-simplex.
    show(
        "collinear triple (1, 1, 2)",
        &DistanceMatrix::triangle(1.0, 2.0, 1.0).unwrap(),
    );
    // Distances that violate the triangle inequality badly fail with a
    // negative eigenvalue.
    let mut d = DMatrix::zeros(3, 3);
    d[(0, 1)] = 1.0;
    d[(1, 0)] = 1.0;
    d[(0, 2)] = 1.0;
    d[(2, 0)] = 1.0;
    d[(1, 2)] = 3.0;
    d[(2, 1)] = 3.0;
    show("impossible (1, 1, 3)", &DistanceMatrix::new(d).unwrap());
}
