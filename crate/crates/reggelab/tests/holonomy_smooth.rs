//! Smooth-side holonomy checks: the loop/double-integral identity, Gauss
//! curving limits, generalized angles, and Riemannian squares.

use nalgebra::DVector;
use reggelab::harness::catalog;
use reggelab::holonomy;
use reggelab::regge::ParamSquare;
use std::collections::HashMap;
use std::sync::Arc;

fn sphere() -> Arc<reggelab::manifold::ChartManifold> {
    catalog::catalog("round_sphere", &HashMap::new()).unwrap()
}

fn sphere_square(r: f64) -> ParamSquare {
    let m = sphere();
    let x = DVector::from_vec(vec![1.3, 0.9]);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    holonomy::riemannian_square(&m, &x, &u, &v, r).unwrap()
}

#[test]
fn flat_loop_and_integral_vanish() {
    let mut params = HashMap::new();
    params.insert("l".to_string(), 6.0);
    let m = catalog::catalog("flat_torus", &params).unwrap();
    let x = DVector::from_vec(vec![2.0, 2.0]);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    let sq = holonomy::riemannian_square(&m, &x, &u, &v, 0.8).unwrap();
    let lhs = holonomy::loop_defect(&m, &sq, 400).unwrap();
    assert!(lhs.norm() < 1e-9);
    let rhs = holonomy::curvature_double_integral(&m, &sq, 8).unwrap();
    assert!(rhs.norm() < 1e-9);
    let gc = holonomy::gauss_curving(&m, &sq, 8).unwrap();
    assert!(gc.norm() < 1e-9);
}

#[test]
fn loop_identity_on_sphere_square() {
    let m = sphere();
    let sq = sphere_square(0.5);
    let lhs = holonomy::loop_defect(&m, &sq, 1200).unwrap();
    let rhs = holonomy::curvature_double_integral(&m, &sq, 8).unwrap();
    let x = m.wrap_point(&sq.base);
    let gap = m.op_norm_g(&x, &x, &(lhs - rhs));
    assert!(gap < 1e-4, "loop identity residual {gap}");
}

#[test]
fn double_integral_scales_quadratically_in_side() {
    let m = sphere();
    let sides = [0.4, 0.2, 0.1];
    let vals: Vec<f64> = sides
        .iter()
        .map(|&r| {
            let sq = sphere_square(r);
            holonomy::curvature_double_integral(&m, &sq, 8)
                .unwrap()
                .norm()
        })
        .collect();
    let slope = reggelab::numutil::log_log_slope(&sides, &vals);
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn gauss_curving_pairs_to_area_on_sphere() {
    // For constant curvature 1, pairing the Gauss curving with the square's
    // unit tangent bivector gives K * area = area; with the exp
    // parametrisation the parameter integral of R_G is the area-weighted
    // curvature, so the pairing against r^2 tends to 1 as r -> 0
    // (the sectional curvature of the plane).
    let m = sphere();
    for (r, tol) in [(0.2, 2e-2), (0.05, 1e-3)] {
        let sq = sphere_square(r);
        let gc = holonomy::gauss_curving(&m, &sq, 8).unwrap();
        assert!(
            {
                let s = &gc + m.metric_at(&sq.base).try_inverse().unwrap()
                    * gc.transpose()
                    * m.metric_at(&sq.base);
                s.norm() < 1e-10
            },
            "gauss curving must be g-skew"
        );
        // Pairing <R(G), T_x G / |T_x G|>: for the orthonormal (u, v) frame
        // this is <R(G) v, u>_g / r^2 in the small-square limit.
        let x = m.wrap_point(&sq.base);
        let g = m.metric_at(&x);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        // normalize in g
        let un = &u / m.norm(&x, &u);
        let vn = {
            let w = &v - m.inner(&x, &un, &v) * &un;
            &w / m.norm(&x, &w)
        };
        let pairing = (un.transpose() * &g * (&gc * &vn))[(0, 0)];
        assert!(
            (pairing / (r * r) - 1.0).abs() < tol,
            "sectional limit {} at r={r}",
            pairing / (r * r)
        );
    }
}

#[test]
fn generalized_angle_matches_minus_curvature_integral() {
    let m = sphere();
    let sq = sphere_square(0.45);
    let (_mat, theta) = holonomy::generalized_angle(&m, &sq, 32, 1200).unwrap();
    let theta = theta.expect("surface returns the scalar angle");
    // Integrate K d area over the square by quadrature in parameters:
    // K = 1, d area = |dG/ds ^ dG/dt| ds dt.
    let mut area = 0.0;
    let n = 48;
    for i in 0..n {
        for j in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let t = (j as f64 + 0.5) / n as f64;
            let (ds, dt) = sq.partials(s, t);
            let p = m.wrap_point(&sq.eval(s, t));
            let g = m.metric_at(&p);
            let e11 = (ds.transpose() * &g * &ds)[(0, 0)];
            let e22 = (dt.transpose() * &g * &dt)[(0, 0)];
            let e12 = (ds.transpose() * &g * &dt)[(0, 0)];
            area += (e11 * e22 - e12 * e12).max(0.0).sqrt() / (n * n) as f64;
        }
    }
    assert!(
        (theta + area).abs() < 1e-4,
        "theta {} + int K dA {} should vanish",
        theta,
        area
    );
}

#[test]
fn octant_loop_rotation_is_quarter_turn() {
    // Geodesic triangle over an octant (three mutually orthogonal corners):
    // enclosed area pi/2 on the unit sphere, so the holonomy rotation angle
    // is pi/2. Corners mid-latitude to stay inside the chart.
    let m = sphere();
    let corners: [[f64; 3]; 3] = [
        [0.7886751345948129, -0.21132486540518708, 0.5773502691896258],
        [-0.21132486540518708, 0.7886751345948129, 0.5773502691896258],
        [0.5773502691896257, 0.5773502691896257, -0.5773502691896258],
    ];
    let chart = |v: [f64; 3]| {
        DVector::from_vec(vec![
            v[2].clamp(-1.0f64, 1.0).acos(),
            v[1].atan2(v[0]).rem_euclid(2.0 * std::f64::consts::PI),
        ])
    };
    let pts: Vec<DVector<f64>> = corners.iter().map(|&c| chart(c)).collect();
    // Three geodesic arcs by log/exp.
    let mut polyline = Vec::new();
    for k in 0..3 {
        let a = &pts[k];
        let b = &pts[(k + 1) % 3];
        let l = m.log_map(a, b).unwrap();
        let arc = m.geodesic_polyline(a, &l.components, 160).unwrap();
        polyline.extend(arc.into_iter());
    }
    // Close and transport.
    let fm = {
        // lift for continuity
        let mut lifted = vec![polyline[0].clone()];
        for p in &polyline[1..] {
            let prev = lifted.last().unwrap().clone();
            lifted.push(m.lift_near(&prev, p));
        }
        m.parallel_transport_polyline(&lifted).unwrap()
    };
    let x = &pts[0];
    let b = m.orthonormal_basis(x);
    let r = b.clone().try_inverse().unwrap() * &fm.matrix * &b;
    let angle = r[(1, 0)].atan2(r[(0, 0)]);
    assert!(
        (angle.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-4,
        "octant holonomy angle {}",
        angle
    );
}

#[test]
fn riemannian_squares_are_embedded() {
    let m = sphere();
    let sq = sphere_square(0.5);
    // Distinct parameters map to comfortably distinct points.
    assert!(sq.embeddedness_ratio(12) > 0.3);
}

#[test]
fn riemannian_square_side_lengths() {
    let m = sphere();
    let sq = sphere_square(0.3);
    // Bottom side length is r within (1 + O(r^2)).
    let mut len = 0.0;
    let mut prev = sq.eval(0.0, 0.0);
    for k in 1..=64 {
        let p = sq.eval(k as f64 / 64.0, 0.0);
        len += m.norm(&prev, &m.wrap_diff(&prev, &p));
        prev = p;
    }
    assert!((len - 0.3).abs() < 0.3 * 0.3 * 0.3, "side length {len}");
    // Degenerate square: constant map transports trivially.
    let tiny = sphere_square(1e-9);
    let lt = holonomy::loop_transport(&m, &tiny, 64).unwrap();
    assert!((lt.matrix - nalgebra::DMatrix::<f64>::identity(2, 2)).norm() < 1e-9);
}

#[test]
fn perturbed_square_keeps_boundary() {
    let m = sphere();
    let x = DVector::from_vec(vec![1.3, 0.9]);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    let base = holonomy::riemannian_square(&m, &x, &u, &v, 0.4).unwrap();
    let pert = holonomy::riemannian_square_perturbed(&m, &x, &u, &v, 0.4, 0.02, 9).unwrap();
    for t in [0.0, 0.21, 0.5, 0.77, 1.0] {
        assert!((base.boundary(t) - pert.boundary(t)).norm() < 1e-12);
    }
    let mid_gap = (base.eval(0.5, 0.5) - pert.eval(0.5, 0.5)).norm();
    assert!(mid_gap > 1e-4, "interior must actually move");
}
