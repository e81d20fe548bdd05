//! The octahedron on the unit sphere: every vertex carries deficit 2 pi / 3,
//! the Regge scalar equals 2 pi chi = 4 pi at every refinement level, and the
//! star-loop transport realizes the deficit rotation.

use reggelab::harness::catalog;
use reggelab::polyhedron::build_approximation;
use reggelab::regge::{bone_rotation, deficit_table, regge_scalar};
use std::collections::HashMap;

fn main() {
    let m = catalog::catalog("round_sphere", &HashMap::new()).unwrap();
    let base = catalog::octahedron_sphere_base();
    for e in [1u32, 2, 4, 8] {
        let poly = build_approximation(m.clone(), &base, e).unwrap();
        let records = deficit_table(&poly).unwrap();
        let total = regge_scalar(&records, &poly, None);
        let max_a = records.iter().map(|r| r.alpha.abs()).fold(0.0f64, f64::max);
        println!(
            "E={e}: cells={:4} bones={:4} rho={:.4} regge_scalar={:.12} (4pi={:.12}) max|alpha|={:.6}",
            poly.complex.cells().len(),
            records.len(),
            poly.mesh_rho,
            total,
            4.0 * std::f64::consts::PI,
            max_a
        );
        if e == 1 {
            for r in &records {
                let rot = bone_rotation(&poly, r, r.bone.ring_cells[0]).unwrap();
                println!(
                    "  vertex {:?}: beta_total={:.9} alpha={:.12} ring={} orth defect={:.1e}",
                    r.bone.vertices,
                    r.beta_total,
                    r.alpha,
                    r.bone.ring_cells.len(),
                    rot.orthogonality_defect()
                );
            }
        }
    }
}
