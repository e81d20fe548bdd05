//! Smooth-side holonomy: loop transport around parametrised squares, the
//! curvature double-integral identity, the Gauss curving, generalized
//! angles, and the comparison of smooth against polyhedral transport.

use crate::manifold::{ChartManifold, FrameMap, ManifoldError, Point};
use crate::polyhedron::Polyhedron;
use crate::regge::{self, ParamSquare, ReggeError};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use std::sync::Arc;

/// Parallel transport around the square's boundary loop in its natural
/// orientation, as a chart-frame map at the base point.
pub fn loop_transport(
    m: &ChartManifold,
    square: &ParamSquare,
    samples: usize,
) -> Result<FrameMap, ManifoldError> {
    m.parallel_transport_curve(|u| square.boundary(u), samples)
}

/// Cached transports along the L-shaped paths `A_{s,t}` (up the left edge,
/// then along the row) over an (N+1)x(N+1) grid, with a few transport
/// sub-samples per grid segment.
struct AGrid {
    n: usize,
    /// a[j*(n+1)+i]: transport from the base to G(s_i, t_j) along A.
    a: Vec<DMatrix<f64>>,
    /// Row transports from G(0,t_j) to G(s_i,t_j).
    row: Vec<DMatrix<f64>>,
}

fn curve_segment_transport(
    m: &ChartManifold,
    square: &ParamSquare,
    from: (f64, f64),
    to: (f64, f64),
    sub: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let mut path = Vec::with_capacity(sub + 1);
    let mut prev = square.eval(from.0, from.1);
    path.push(prev.clone());
    for k in 1..=sub {
        let f = k as f64 / sub as f64;
        let s = from.0 + f * (to.0 - from.0);
        let t = from.1 + f * (to.1 - from.1);
        let p = m.lift_near(&prev, &square.eval(s, t));
        path.push(p.clone());
        prev = p;
    }
    Ok(m.parallel_transport_polyline(&path)?.matrix)
}

fn build_a_grid(
    m: &ChartManifold,
    square: &ParamSquare,
    n: usize,
) -> Result<AGrid, ManifoldError> {
    let dim = m.dim;
    let sub = 4;
    let mut left = Vec::with_capacity(n + 1);
    left.push(DMatrix::identity(dim, dim));
    for j in 1..=n {
        let t0 = (j - 1) as f64 / n as f64;
        let t1 = j as f64 / n as f64;
        let seg = curve_segment_transport(m, square, (0.0, t0), (0.0, t1), sub)?;
        let prev: &DMatrix<f64> = &left[j - 1];
        left.push(&seg * prev);
    }
    let mut row = Vec::with_capacity((n + 1) * (n + 1));
    let mut a = Vec::with_capacity((n + 1) * (n + 1));
    let left_edge = left;
    let left = &left_edge;
    for j in 0..=n {
        let t = j as f64 / n as f64;
        let mut acc = DMatrix::identity(dim, dim);
        row.push(acc.clone());
        a.push(&acc * &left[j]);
        for i in 1..=n {
            let s0 = (i - 1) as f64 / n as f64;
            let s1 = i as f64 / n as f64;
            let seg = curve_segment_transport(m, square, (s0, t), (s1, t), sub)?;
            acc = &seg * &acc;
            row.push(acc.clone());
            a.push(&acc * &left[j]);
        }
    }
    Ok(AGrid { n, a, row })
}

impl AGrid {
    fn a_at(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.a[j * (self.n + 1) + i]
    }
    fn row_at(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.row[j * (self.n + 1) + i]
    }
}

/// The curvature integrand `R_G(s,t) = R(dG/ds, dG/dt)` as a chart matrix.
fn r_g(m: &ChartManifold, square: &ParamSquare, s: f64, t: f64) -> Result<DMatrix<f64>, ManifoldError> {
    let p = m.wrap_point(&square.eval(s, t));
    let (ds, dt) = square.partials(s, t);
    let r = m.curvature_at(&p)?;
    Ok(r.operator(&ds, &dt))
}

/// Left-hand side of the loop identity: `P_Gamma^{-1} - Id` at the base.
pub fn loop_defect(
    m: &ChartManifold,
    square: &ParamSquare,
    samples: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let lt = loop_transport(m, square, samples)?;
    let inv = lt
        .matrix
        .clone()
        .try_inverse()
        .expect("transport invertible");
    Ok(inv - DMatrix::identity(m.dim, m.dim))
}

/// The double integral
/// `int int P_B^{-1} R_G(s,t) P_A ds dt`
/// over the unit square, by the composite trapezoid rule on a transported
/// grid, refined until the relative change drops below 1e-5. Equals
/// `P_Gamma^{-1} - Id` for smooth metrics.
pub fn curvature_double_integral(
    m: &ChartManifold,
    square: &ParamSquare,
    n0: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let mut n = n0.max(4);
    let mut prev: Option<DMatrix<f64>> = None;
    loop {
        let val = curvature_double_integral_fixed(m, square, n)?;
        if let Some(p) = prev {
            let denom = p.norm().max(1e-14);
            if (&val - &p).norm() / denom < 1e-5 || n >= 128 {
                return Ok(val);
            }
        }
        prev = Some(val);
        n *= 2;
    }
}

fn curvature_double_integral_fixed(
    m: &ChartManifold,
    square: &ParamSquare,
    n: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let dim = m.dim;
    let grid = build_a_grid(m, square, n)?;
    // Bottom row transport (t = 0) and right edge transports for B.
    let bottom_full = grid.row_at(n, 0).clone();
    let mut right = Vec::with_capacity(n + 1);
    right.push(DMatrix::identity(dim, dim));
    for j in 1..=n {
        let t0 = (j - 1) as f64 / n as f64;
        let t1 = j as f64 / n as f64;
        let seg = curve_segment_transport(m, square, (1.0, t0), (1.0, t1), 4)?;
        let prev: &DMatrix<f64> = &right[j - 1];
        right.push(&seg * prev);
    }
    let mut acc = DMatrix::zeros(dim, dim);
    for j in 0..=n {
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let t = j as f64 / n as f64;
            let w = trapezoid_weight(i, n) * trapezoid_weight(j, n) / (n as f64 * n as f64);
            let rg = r_g(m, square, s, t)?;
            // P_B = P_row(i->1 at t) ^{-1} ... built as
            // row_full(t) row_i(t)^{-1} reversed: P_B = row_i row_full^{-1}
            // right_j bottom_full. Then we need P_B^{-1}.
            let row_i = grid.row_at(i, j);
            let row_full = grid.row_at(n, j);
            let p_b = row_i
                * row_full.clone().try_inverse().expect("orthogonal")
                * &right[j]
                * &bottom_full;
            let p_b_inv = p_b.try_inverse().expect("transport invertible");
            acc += w * (p_b_inv * rg * grid.a_at(i, j));
        }
    }
    Ok(acc)
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

/// The Gauss curving: the curvature of the square integrated back to the
/// base point along the A-paths,
/// `int int P_A^{-1} R_G P_A ds dt`,
/// g-antisymmetrized at the base. (The normed curvature against the area
/// element cancels the Jacobian, leaving the parameter integral.)
pub fn gauss_curving(
    m: &ChartManifold,
    square: &ParamSquare,
    n0: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let mut n = n0.max(4);
    let mut prev: Option<DMatrix<f64>> = None;
    loop {
        let val = gauss_curving_fixed(m, square, n)?;
        if let Some(p) = prev {
            let denom = p.norm().max(1e-14);
            if (&val - &p).norm() / denom < 1e-5 || n >= 128 {
                return Ok(val);
            }
        }
        prev = Some(val);
        n *= 2;
    }
}

fn gauss_curving_fixed(
    m: &ChartManifold,
    square: &ParamSquare,
    n: usize,
) -> Result<DMatrix<f64>, ManifoldError> {
    let dim = m.dim;
    let grid = build_a_grid(m, square, n)?;
    let mut acc = DMatrix::zeros(dim, dim);
    for j in 0..=n {
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let t = j as f64 / n as f64;
            let w = trapezoid_weight(i, n) * trapezoid_weight(j, n) / (n as f64 * n as f64);
            let rg = r_g(m, square, s, t)?;
            let a = grid.a_at(i, j);
            let a_inv = a.clone().try_inverse().expect("transport invertible");
            acc += w * (a_inv * rg * a);
        }
    }
    // g-antisymmetrize at the base point.
    let x = m.wrap_point(&square.base);
    let g = m.metric_at(&x);
    let ginv = g.clone().try_inverse().expect("metric invertible");
    Ok(0.5 * (&acc - ginv * acc.transpose() * g))
}

/// The generalized angle
/// `int_0^1 P_{Gamma_{1,tau}} d/dv P_{Gamma_{1,v}}^{-1} (tau) d tau`
/// in the Lie algebra at the base; for surfaces also returns the scalar
/// total angle `theta(1)` of the loop rotations (continuously unwrapped),
/// which satisfies `theta(1) = - int int K d area`.
pub fn generalized_angle(
    m: &ChartManifold,
    square: &ParamSquare,
    n_tau: usize,
    samples: usize,
) -> Result<(DMatrix<f64>, Option<f64>), ManifoldError> {
    let dim = m.dim;
    let h = 1e-4;
    let loop_matrix = |v: f64| -> Result<DMatrix<f64>, ManifoldError> {
        if v <= 0.0 {
            return Ok(DMatrix::identity(dim, dim));
        }
        let sub_square = |u: f64| -> Point {
            // boundary of [0,1]x[0,v]
            let u = u.clamp(0.0, 1.0) * 4.0;
            if u <= 1.0 {
                square.eval(u, 0.0)
            } else if u <= 2.0 {
                square.eval(1.0, (u - 1.0) * v)
            } else if u <= 3.0 {
                square.eval(3.0 - u, v)
            } else {
                square.eval(0.0, (4.0 - u) * v)
            }
        };
        Ok(m.parallel_transport_curve(sub_square, samples)?.matrix)
    };
    let mut acc = DMatrix::zeros(dim, dim);
    for j in 0..=n_tau {
        let tau = j as f64 / n_tau as f64;
        let w = trapezoid_weight(j, n_tau) / n_tau as f64;
        let lp = loop_matrix((tau + h).min(1.0))?;
        let lm = loop_matrix((tau - h).max(0.0))?;
        let actual_h = (tau + h).min(1.0) - (tau - h).max(0.0);
        let d_inv = (lp.try_inverse().expect("inv") - lm.try_inverse().expect("inv")) / actual_h;
        let l = loop_matrix(tau)?;
        acc += w * (l * d_inv);
    }
    let scalar = if dim == 2 {
        // Unwrapped rotation angle of P_Gamma^{-1} in a g-orthonormal frame.
        let x = m.wrap_point(&square.base);
        let b = m.orthonormal_basis(&x);
        let binv = b.clone().try_inverse().expect("basis invertible");
        let mut theta = 0.0;
        let mut prev = 0.0;
        for j in 0..=n_tau {
            let tau = j as f64 / n_tau as f64;
            let l = loop_matrix(tau)?;
            let r = &binv * l.try_inverse().expect("inv") * &b;
            let raw = r[(1, 0)].atan2(r[(0, 0)]);
            let mut delta = raw - prev;
            while delta > std::f64::consts::PI {
                delta -= 2.0 * std::f64::consts::PI;
            }
            while delta < -std::f64::consts::PI {
                delta += 2.0 * std::f64::consts::PI;
            }
            theta += if j == 0 { 0.0 } else { delta };
            prev = raw;
        }
        Some(theta)
    } else {
        None
    };
    Ok((acc, scalar))
}

/// Outcome of comparing smooth and polyhedral transport along one curve.
pub struct TransportComparison {
    pub smooth: FrameMap,
    /// Polyhedral transport pushed into chart frames via the differentials
    /// of the per-simplex embeddings at the endpoints.
    pub polyhedral_chart: DMatrix<f64>,
    /// Operator-norm gap in the g-norms of the endpoints.
    pub gap: f64,
}

/// Smooth transport by the ODE; polyhedral transport by unfolding, conjugated
/// into chart frames with finite-difference embedding differentials.
pub fn compare_transport<F>(
    m: &ChartManifold,
    poly: &Polyhedron,
    curve: F,
    samples: usize,
) -> Result<TransportComparison, ReggeError>
where
    F: Fn(f64) -> Point + Copy,
{
    let smooth = m.parallel_transport_curve(curve, samples)?;
    let path = regge::trace_curve(poly, curve, samples)?;
    let g0 = regge::transport_g0(poly, &path)?;
    let start_cell = path.cells[0];
    let end_cell = *path.cells.last().unwrap();
    let p_start = curve(0.0);
    let p_end = curve(1.0);
    let e_start = regge::chart_to_embedded(poly, start_cell, &p_start);
    let e_end = regge::chart_to_embedded(poly, end_cell, &m.wrap_point(&p_end));
    let dt_start = regge::embedding_differential(poly, start_cell, &e_start)?;
    let dt_end = regge::embedding_differential(poly, end_cell, &e_end)?;
    let pushed = dt_end
        * &g0.matrix
        * dt_start
            .try_inverse()
            .ok_or_else(|| ReggeError::Inconsistent("singular embedding differential".into()))?;
    let diff = &smooth.matrix - &pushed;
    let gap = m.op_norm_g(&m.wrap_point(&p_start), &m.wrap_point(&p_end), &diff);
    Ok(TransportComparison {
        smooth,
        polyhedral_chart: pushed,
        gap,
    })
}

/// The Riemannian parametrised square `G(s,t) = exp_x(r (s u + t v))` for a
/// g-orthonormal pair (u, v).
pub fn riemannian_square(
    m: &Arc<ChartManifold>,
    x: &Point,
    u: &DVector<f64>,
    v: &DVector<f64>,
    r: f64,
) -> Result<ParamSquare, ManifoldError> {
    let gu = m.norm(x, u);
    let mut uu = u / gu;
    let mut vv = v - m.inner(x, &uu, v) * &uu;
    let gv = m.norm(x, &vv);
    vv /= gv;
    let _ = &mut uu;
    if r * 2f64.sqrt() >= m.convexity_radius_hint {
        return Err(ManifoldError::OutOfConvexBall(
            r * 2f64.sqrt(),
            m.convexity_radius_hint,
        ));
    }
    let mc = m.clone();
    let x0 = x.clone();
    let map = move |s: f64, t: f64| -> Point {
        let w = r * (s * &uu + t * &vv);
        if w.norm() < 1e-14 {
            return x0.clone();
        }
        mc.exp_map(&x0, &w).expect("square stays in chart").point
    };
    Ok(ParamSquare::new(m.clone(), Box::new(map)))
}

/// A seeded quasi-Riemannian perturbation: the same square with a smooth
/// interior bump (vanishing on the boundary), used when skeleton avoidance
/// wants the square itself moved rather than the traced loops.
pub fn riemannian_square_perturbed(
    m: &Arc<ChartManifold>,
    x: &Point,
    u: &DVector<f64>,
    v: &DVector<f64>,
    r: f64,
    amplitude: f64,
    seed: u64,
) -> Result<ParamSquare, ManifoldError> {
    let base = riemannian_square(m, x, u, v, r)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dir = DVector::from_fn(m.dim, |_, _| rng.gen_range(-1.0..1.0f64));
    let dir = &dir / dir.norm().max(1e-12);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let inner_map = base.map;
    let map = move |s: f64, t: f64| -> Point {
        let bump = (std::f64::consts::PI * s).sin()
            * (std::f64::consts::PI * t).sin()
            * (2.0 * s + 3.0 * t + phase).cos();
        inner_map(s, t) + amplitude * bump * &dir
    };
    Ok(ParamSquare::new(m.clone(), Box::new(map)))
}

/// Pushes a Regge curving (expressed in a base cell's embedded frame) into
/// the chart frame at the square's base point through the differential of the
/// per-simplex embedding.
pub fn regge_curving_chart(
    poly: &Polyhedron,
    square: &ParamSquare,
    skew: &regge::SkewMap,
) -> Result<DMatrix<f64>, ReggeError> {
    let base_emb = regge::chart_to_embedded(poly, skew.base_cell, &square.base);
    let dt = regge::embedding_differential(poly, skew.base_cell, &base_emb)?;
    let dt_inv = dt
        .clone()
        .try_inverse()
        .ok_or_else(|| ReggeError::Inconsistent("singular embedding differential".into()))?;
    Ok(dt * &skew.matrix * dt_inv)
}

/// Operator-norm gap (in the g-norm at the base) between the Regge curving
/// of the polyhedron and the Gauss curving of the smooth metric, for one
/// square.
pub fn curving_gap(
    m: &ChartManifold,
    poly: &Polyhedron,
    square: &ParamSquare,
    records: &[regge::DeficitRecord],
    trace_samples: usize,
) -> Result<f64, ReggeError> {
    let skew = regge::regge_curving(poly, square, trace_samples, records)?;
    let chart = regge_curving_chart(poly, square, &skew)?;
    let gauss = gauss_curving(m, square, 8)?;
    let x = m.wrap_point(&square.base);
    Ok(m.op_norm_g(&x, &x, &(chart - gauss)))
}
