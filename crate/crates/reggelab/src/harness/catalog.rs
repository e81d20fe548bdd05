//! Named manifolds and base complexes for the experiments.
//!
//! The catalog entries carry analytic Christoffels and closed-form scalar
//! curvature, so the generic finite-difference paths stay available for
//! cross-checks but the experiment drivers get clean integrands.

use super::HarnessError;
use crate::complex::SimplicialComplex;
use crate::manifold::{ChartManifold, DomainBox};
use crate::polyhedron::BaseGeometry;
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

fn param(params: &HashMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Builds a manifold by name. Known names: `flat_torus`, `round_sphere`,
/// `bump_torus2`, `conformal_torus3`.
pub fn catalog(
    name: &str,
    params: &HashMap<String, f64>,
) -> Result<Arc<ChartManifold>, HarnessError> {
    match name {
        "flat_torus" => {
            let l = param(params, "l", 2.0 * PI);
            let n = param(params, "n", 2.0) as usize;
            Ok(Arc::new(flat_torus(n, l)))
        }
        "round_sphere" => {
            let r = param(params, "r", 1.0);
            let theta_min = param(params, "theta_min", 0.05);
            Ok(Arc::new(round_sphere(r, theta_min)))
        }
        "bump_torus2" => {
            let a = param(params, "a", 0.3);
            let k = param(params, "k", 1.0);
            Ok(Arc::new(bump_torus2(a, k)))
        }
        "conformal_torus3" => {
            let a = param(params, "a", 0.1);
            let k = param(params, "k", 1.0);
            Ok(Arc::new(conformal_torus3(a, k)))
        }
        other => Err(HarnessError::UnknownManifold(other.into())),
    }
}

/// Flat n-torus of side `l`: the identity metric with all axes periodic.
pub fn flat_torus(n: usize, l: f64) -> ChartManifold {
    ChartManifold::new(
        "flat_torus",
        DomainBox {
            min: vec![0.0; n],
            max: vec![l; n],
        },
        vec![Some(l); n],
        Arc::new(move |x: &DVector<f64>| DMatrix::identity(x.len(), x.len())),
        // Solvability bound for geodesic BVPs: distances stay well below the
        // injectivity radius l/2 of the torus.
        0.48 * l,
    )
    .with_christoffel(Arc::new(move |x: &DVector<f64>| {
        vec![DMatrix::zeros(x.len(), x.len()); x.len()]
    }))
    .with_scal(Arc::new(|_x: &DVector<f64>| 0.0))
    .with_curvature_bound(0.0)
}

/// Round sphere of radius `r` in colatitude/longitude coordinates,
/// excluding polar caps of angular radius `theta_min`.
pub fn round_sphere(r: f64, theta_min: f64) -> ChartManifold {
    let r2 = r * r;
    ChartManifold::new(
        "round_sphere",
        DomainBox {
            min: vec![theta_min, 0.0],
            max: vec![PI - theta_min, 2.0 * PI],
        },
        vec![None, Some(2.0 * PI)],
        Arc::new(move |x: &DVector<f64>| {
            let mut g = DMatrix::zeros(2, 2);
            g[(0, 0)] = r2;
            g[(1, 1)] = r2 * x[0].sin().powi(2);
            g
        }),
        // The operative convex-ball bound: large enough for quarter-circle
        // edges (the octahedron's pi/2 r edges), below the injectivity pi r.
        1.6 * r,
    )
    .with_christoffel(Arc::new(|x: &DVector<f64>| {
        let (st, ct) = (x[0].sin(), x[0].cos());
        let mut g_t = DMatrix::zeros(2, 2);
        let mut g_p = DMatrix::zeros(2, 2);
        g_t[(1, 1)] = -st * ct;
        g_p[(0, 1)] = ct / st;
        g_p[(1, 0)] = ct / st;
        vec![g_t, g_p]
    }))
    .with_scal(Arc::new(move |_x: &DVector<f64>| 2.0 / r2))
    .with_curvature_bound(1.0 / r2)
}

/// Conformal Christoffels for `g = e^{2 phi} delta`:
/// `Gamma^i_{jk} = d^i_j phi_k + d^i_k phi_j - delta_{jk} phi^i`.
fn conformal_christoffel(n: usize, grad: &[f64]) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                if i == j {
                    v += grad[k];
                }
                if i == k {
                    v += grad[j];
                }
                if j == k {
                    v -= grad[i];
                }
                out[i][(j, k)] = v;
            }
        }
    }
    out
}

/// Conformally flat 2-torus `e^{2 a cos(kx) cos(ky)} delta` on `[0, 2 pi)^2`.
pub fn bump_torus2(a: f64, k: f64) -> ChartManifold {
    let l = 2.0 * PI;
    let phi = move |x: &DVector<f64>| a * (k * x[0]).cos() * (k * x[1]).cos();
    ChartManifold::new(
        "bump_torus2",
        DomainBox {
            min: vec![0.0, 0.0],
            max: vec![l, l],
        },
        vec![Some(l), Some(l)],
        Arc::new(move |x: &DVector<f64>| {
            DMatrix::identity(2, 2) * (2.0 * phi(x)).exp()
        }),
        0.48 * l * (-a.abs()).exp(),
    )
    .with_christoffel(Arc::new(move |x: &DVector<f64>| {
        let grad = [
            -a * k * (k * x[0]).sin() * (k * x[1]).cos(),
            -a * k * (k * x[0]).cos() * (k * x[1]).sin(),
        ];
        conformal_christoffel(2, &grad)
    }))
    .with_scal(Arc::new(move |x: &DVector<f64>| {
        // scal = -2 e^{-2 phi} lap(phi); lap(phi) = -2 k^2 phi here.
        let p = a * (k * x[0]).cos() * (k * x[1]).cos();
        4.0 * k * k * p * (-2.0 * p).exp()
    }))
    .with_curvature_bound(4.0 * k * k * a.abs() * (2.0 * a.abs()).exp())
}

/// Conformally flat 3-torus `e^{2 a cos(k x1)} delta` on `[0, 2 pi)^3`.
pub fn conformal_torus3(a: f64, k: f64) -> ChartManifold {
    let l = 2.0 * PI;
    ChartManifold::new(
        "conformal_torus3",
        DomainBox {
            min: vec![0.0; 3],
            max: vec![l; 3],
        },
        vec![Some(l); 3],
        Arc::new(move |x: &DVector<f64>| {
            DMatrix::identity(3, 3) * (2.0 * a * (k * x[0]).cos()).exp()
        }),
        // Wide enough for the coarse Kuhn diagonals of the experiment bases;
        // safely below the flat injectivity radius pi times the conformal
        // distortion.
        0.48 * l * (-a.abs()).exp(),
    )
    .with_christoffel(Arc::new(move |x: &DVector<f64>| {
        let grad = [-a * k * (k * x[0]).sin(), 0.0, 0.0];
        conformal_christoffel(3, &grad)
    }))
    .with_scal(Arc::new(move |x: &DVector<f64>| {
        // scal = -2(n-1) e^{-2 phi} (lap phi + (n-2)/2 |grad phi|^2), n = 3.
        let c = (k * x[0]).cos();
        let s = (k * x[0]).sin();
        let phi = a * c;
        let lap = -a * k * k * c;
        let grad2 = (a * k * s).powi(2);
        -4.0 * (-2.0 * phi).exp() * (lap + 0.5 * grad2)
    }))
    .with_curvature_bound(4.0 * a.abs() * k * k * (1.0 + a.abs()) * (2.0 * a.abs()).exp())
}

/// Rotation sending (1,1,1)/sqrt(3) to the north pole; with it the
/// octahedron's six vertices sit at colatitudes 54.7/125.3 degrees and the
/// chart poles fall at the centers of two opposite faces, away from every
/// edge great-circle.
const OCTA_ROT: [[f64; 3]; 3] = [
    [0.7886751345948129, -0.21132486540518708, -0.5773502691896258],
    [-0.21132486540518708, 0.7886751345948129, -0.5773502691896258],
    [0.5773502691896257, 0.5773502691896257, 0.5773502691896258],
];

fn to_chart(v: [f64; 3]) -> DVector<f64> {
    DVector::from_vec(vec![
        v[2].clamp(-1.0, 1.0).acos(),
        v[1].atan2(v[0]).rem_euclid(2.0 * PI),
    ])
}

fn rot(v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += OCTA_ROT[i][j] * v[j];
        }
    }
    out
}

/// The rotated octahedron inscribed in the unit sphere, as a base complex in
/// sphere chart coordinates.
pub fn octahedron_sphere_base() -> BaseGeometry {
    // Vertex order: +e1 -e1 +e2 -e2 +e3 -e3 (rotated).
    let dirs: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let positions: Vec<DVector<f64>> = dirs.iter().map(|&d| to_chart(rot(d))).collect();
    let cells: Vec<Vec<u32>> = vec![
        vec![0, 2, 4],
        vec![2, 1, 4],
        vec![1, 3, 4],
        vec![3, 0, 4],
        vec![2, 0, 5],
        vec![1, 2, 5],
        vec![3, 1, 5],
        vec![0, 3, 5],
    ];
    let complex = SimplicialComplex::from_top_cells(6, &cells).unwrap();
    BaseGeometry { complex, positions }
}

/// m x m grid triangulation of the flat coordinate 2-torus of side `l`.
pub fn torus2_grid_base(m: usize, l: f64) -> BaseGeometry {
    assert!(m >= 3, "grid torus needs m >= 3 to be simplicial");
    let vid = |i: usize, j: usize| ((i % m) * m + (j % m)) as u32;
    let mut cells = Vec::new();
    for i in 0..m {
        for j in 0..m {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            cells.push(vec![vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    let complex = SimplicialComplex::from_top_cells(m * m, &cells).unwrap();
    let h = l / m as f64;
    let positions = (0..m * m)
        .map(|v| DVector::from_vec(vec![(v / m) as f64 * h, (v % m) as f64 * h]))
        .collect();
    BaseGeometry { complex, positions }
}

/// m x m x m Kuhn (6-tetrahedra-per-cube) triangulation of the coordinate
/// 3-torus of side `l`.
pub fn torus3_kuhn_base(m: usize, l: f64) -> BaseGeometry {
    assert!(m >= 3, "Kuhn torus needs m >= 3 to be simplicial");
    let vid = |i: usize, j: usize, k: usize| ((i % m) * m * m + (j % m) * m + (k % m)) as u32;
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for p in &perms {
                    let mut c = [i, j, k];
                    let mut verts = vec![vid(c[0], c[1], c[2])];
                    for &axis in p {
                        c[axis] += 1;
                        verts.push(vid(c[0], c[1], c[2]));
                    }
                    cells.push(verts);
                }
            }
        }
    }
    let complex = SimplicialComplex::from_top_cells(m * m * m, &cells).unwrap();
    let h = l / m as f64;
    let positions = (0..m * m * m)
        .map(|v| {
            let i = v / (m * m);
            let j = (v / m) % m;
            let k = v % m;
            DVector::from_vec(vec![i as f64 * h, j as f64 * h, k as f64 * h])
        })
        .collect();
    BaseGeometry { complex, positions }
}

/// Base complex by name: `octahedron`, `torus2_grid<m>`, `torus3_kuhn<m>`.
pub fn base_complex(name: &str, m: &ChartManifold) -> Result<BaseGeometry, HarnessError> {
    let l = m.domain.max[0] - m.domain.min[0];
    if name == "octahedron" {
        return Ok(octahedron_sphere_base());
    }
    if let Some(rest) = name.strip_prefix("torus2_grid") {
        let g: usize = rest
            .parse()
            .map_err(|_| HarnessError::UnknownBaseComplex(name.into()))?;
        return Ok(torus2_grid_base(g, l));
    }
    if let Some(rest) = name.strip_prefix("torus3_kuhn") {
        let g: usize = rest
            .parse()
            .map_err(|_| HarnessError::UnknownBaseComplex(name.into()))?;
        return Ok(torus3_kuhn_base(g, l));
    }
    Err(HarnessError::UnknownBaseComplex(name.into()))
}
