//! Edgewise (Freudenthal) subdivision: cell counts, the finite shape catalog
//! with its thickness bound, and the rho <-> E coupling.

use reggelab::complex::{choose_e, SimplicialComplex};
use reggelab::euclid::{self, DistanceMatrix};
use nalgebra::DVector;

fn main() {
    // A single tetrahedron subdivided at increasing orders.
    let k = SimplicialComplex::from_top_cells(4, &[vec![0, 1, 2, 3]]).unwrap();
    let reg = euclid::embed_simplex(&DistanceMatrix::regular(3, 1.0)).unwrap();
    for e in [1u32, 2, 3, 4] {
        let (r, supports) = k.subdivide(e).unwrap();
        // Realize each cell on the regular tetrahedron and track thickness.
        let coords: Vec<DVector<f64>> = supports
            .iter()
            .map(|s| {
                let mut p = DVector::zeros(3);
                for &(v, w) in s {
                    p += (w as f64 / e as f64) * &reg.vertices[v as usize];
                }
                p
            })
            .collect();
        let mut t_min = f64::INFINITY;
        for cell in r.cells() {
            let pts: Vec<DVector<f64>> = cell.iter().map(|&v| coords[v as usize].clone()).collect();
            let s = euclid::EmbeddedSimplex::from_vertices(pts).unwrap();
            t_min = t_min.min(euclid::thickness(&s));
        }
        println!(
            "E={e}: cells={:3} (E^3={:3}) vertices={:3} t_min={:.4}",
            r.cells().len(),
            (e as usize).pow(3),
            supports.len(),
            t_min
        );
    }
    // The integer subdivision order coupled to a target mesh.
    println!();
    for rho in [3.0, 1.0, 0.25] {
        println!("choose_e(rho={rho}, beta_T*D_n=10) = {}", choose_e(rho, 1.0, 10.0).unwrap());
    }
}
