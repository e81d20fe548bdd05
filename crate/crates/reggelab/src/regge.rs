//! The piecewise-flat side of the laboratory: tracing curves through the
//! complex, parallel transport by isometric unfolding, deficit angles,
//! bone rotations, intersection indices and the Regge curving of
//! parametrised squares.
//!
//! Ground truth for polyhedral transport is the explicit development of the
//! visited simplex chain into one Euclidean space: a transported vector is
//! constant in the developed picture, and the transport matrix between the
//! canonical frames of the first and last simplex is read off the developed
//! copies. The deficit-rotation formula along a bone star is then a derived
//! assertion checked against this development.

use crate::complex::Bone;
use crate::euclid::{self, EuclidError};
use crate::manifold::{ChartManifold, ManifoldError, Point};
use crate::polyhedron::{PolyError, Polyhedron};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

/// Curves are kept this fraction of the mesh away from the codimension-2
/// skeleton; crossings closer than that trigger a deterministic nudge.
pub const TOL_SKEL_FACTOR: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ReggeError {
    #[error("curve keeps hitting the (n-2)-skeleton after {0} nudges")]
    SkeletonCollision(usize),
    #[error("curve left the approximated region at t={0}")]
    LeftRegion(f64),
    #[error("bone star is not a single cycle")]
    NonManifoldStar,
    #[error("square is not transverse to the bone: {0}")]
    NonTransverse(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Euclid(#[from] EuclidError),
    #[error(transparent)]
    Bary(#[from] crate::barycentric::BaryError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Complex(#[from] crate::complex::ComplexError),
}

/// A curve's combinatorial passage through the n-simplices: the cells visited
/// and, between consecutive cells, the shared facet with the crossing point
/// in each cell's embedded coordinates.
#[derive(Debug, Clone)]
pub struct DualPath {
    pub cells: Vec<usize>,
    /// Global (n-1)-face ids separating consecutive cells.
    pub faces: Vec<usize>,
    /// Crossing points in the embedded coordinates of the cell being left.
    pub exit_points: Vec<DVector<f64>>,
    /// Crossing points in the embedded coordinates of the cell being entered.
    pub entry_points: Vec<DVector<f64>>,
    /// Recorded chart perturbation, when skeleton avoidance required one.
    pub nudge: Option<DVector<f64>>,
}

/// A smooth map of the unit square into the chart, with its base point.
pub struct ParamSquare {
    pub manifold: Arc<ChartManifold>,
    pub map: Box<dyn Fn(f64, f64) -> Point + Send + Sync>,
    pub base: Point,
}

impl ParamSquare {
    pub fn new(
        manifold: Arc<ChartManifold>,
        map: Box<dyn Fn(f64, f64) -> Point + Send + Sync>,
    ) -> Self {
        let base = map(0.0, 0.0);
        ParamSquare {
            manifold,
            map,
            base,
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> Point {
        (self.map)(s, t)
    }

    /// Chart partial derivatives by central differences.
    pub fn partials(&self, s: f64, t: f64) -> (DVector<f64>, DVector<f64>) {
        let h = 1e-6;
        let here = self.eval(s, t);
        let lift = |p: &Point| self.manifold.lift_near(&here, p);
        let ds = (lift(&self.eval(s + h, t)) - lift(&self.eval(s - h, t))) / (2.0 * h);
        let dt = (lift(&self.eval(s, t + h)) - lift(&self.eval(s, t - h))) / (2.0 * h);
        (ds, dt)
    }

    /// Embeddedness certificate by sampling: distinct parameters must map to
    /// chart points no closer than `floor` times their parameter separation
    /// scaled by the square's extent. Returns the worst observed ratio.
    pub fn embeddedness_ratio(&self, grid: usize) -> f64 {
        let mut pts = Vec::new();
        for i in 0..=grid {
            for j in 0..=grid {
                let s = i as f64 / grid as f64;
                let t = j as f64 / grid as f64;
                pts.push(((s, t), self.eval(s, t)));
            }
        }
        let mut extent = 0.0f64;
        for k in 1..pts.len() {
            extent = extent.max(self.manifold.wrap_diff(&pts[0].1, &pts[k].1).norm());
        }
        let mut worst = f64::INFINITY;
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let ((s1, t1), p1) = &pts[a];
                let ((s2, t2), p2) = &pts[b];
                let dp = ((s1 - s2).powi(2) + (t1 - t2).powi(2)).sqrt();
                let dx = self.manifold.wrap_diff(p1, p2).norm();
                worst = worst.min(dx / (dp * extent.max(1e-300)));
            }
        }
        worst
    }

    /// The boundary loop, parametrised over [0,1] in the natural orientation
    /// (bottom, right, top reversed, left reversed).
    pub fn boundary(&self, u: f64) -> Point {
        let u = u.clamp(0.0, 1.0) * 4.0;
        if u <= 1.0 {
            self.eval(u, 0.0)
        } else if u <= 2.0 {
            self.eval(1.0, u - 1.0)
        } else if u <= 3.0 {
            self.eval(3.0 - u, 1.0)
        } else {
            self.eval(0.0, 4.0 - u)
        }
    }
}

/// Per-bone deficit data: the ring dihedrals, their sum, the defect angle
/// `alpha = 2 pi - sum`, and the (n-2)-volume of the bone in g0.
#[derive(Debug, Clone)]
pub struct DeficitRecord {
    pub bone: Bone,
    pub dihedrals: Vec<(usize, f64)>,
    pub beta_total: f64,
    pub alpha: f64,
    pub vol_nm2: f64,
}

/// A g0-skew-symmetric map expressed in the canonical embedded frame of a
/// base cell.
#[derive(Debug, Clone)]
pub struct SkewMap {
    pub base_cell: usize,
    pub matrix: DMatrix<f64>,
}

impl SkewMap {
    /// Max violation of skewness with respect to the Euclidean frame.
    pub fn skew_defect(&self) -> f64 {
        let s = &self.matrix + self.matrix.transpose();
        s.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// Polyhedral parallel transport along a dual path, as the composition of
/// unfoldings: the matrix maps the canonical embedded frame of the first cell
/// to the canonical embedded frame of the last.
#[derive(Debug, Clone)]
pub struct G0Transport {
    pub start_cell: usize,
    pub end_cell: usize,
    pub matrix: DMatrix<f64>,
}

impl G0Transport {
    pub fn identity(cell: usize, n: usize) -> Self {
        G0Transport {
            start_cell: cell,
            end_cell: cell,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn orthogonality_defect(&self) -> f64 {
        let r = self.matrix.transpose() * &self.matrix
            - DMatrix::<f64>::identity(self.matrix.nrows(), self.matrix.ncols());
        r.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// Maps a chart point into a cell's embedded coordinates through the
/// chart-linear barycentric coordinates of the lifted vertex positions.
pub fn chart_to_embedded(poly: &Polyhedron, cell: usize, p: &Point) -> DVector<f64> {
    let lambda = poly.chart_barycentric(cell, p);
    let emb = &poly.embeddings[cell];
    let mut out = DVector::zeros(emb.vertices[0].len());
    for (i, v) in emb.vertices.iter().enumerate() {
        out += lambda[i] * v;
    }
    out
}

/// Traces a chart curve through the polyhedron. Crossing points are located
/// by bisection; crossings that land too close to the (n-2)-skeleton trigger
/// a deterministic orthogonal nudge of the whole curve (recorded in the
/// result) and a retrace, at most five times.
pub fn trace_curve<F>(poly: &Polyhedron, curve: F, samples: usize) -> Result<DualPath, ReggeError>
where
    F: Fn(f64) -> Point,
{
    let m = &poly.manifold;
    let tol_skel = TOL_SKEL_FACTOR * poly.mesh_rho;
    let mut nudge: Option<DVector<f64>> = None;
    for attempt in 0..=5 {
        let offset = nudge.clone();
        let shifted = |t: f64| -> Point {
            let p = curve(t);
            match &offset {
                Some(o) => p + o,
                None => p,
            }
        };
        match trace_once(poly, &shifted, samples, tol_skel) {
            Ok(mut path) => {
                path.nudge = nudge;
                return Ok(path);
            }
            Err(ReggeError::SkeletonCollision(_)) if attempt < 5 => {
                // Deterministic orthogonal nudge: smallest axis direction
                // orthogonalized against the curve's overall chart tangent.
                let p0 = curve(0.0);
                let p1 = curve(1.0);
                let tangent = m.wrap_diff(&p0, &p1);
                let mut dir = DVector::zeros(m.dim);
                for k in 0..m.dim {
                    let mut cand = DVector::zeros(m.dim);
                    cand[k] = 1.0;
                    if tangent.norm() > 0.0 {
                        let t = &tangent / tangent.norm();
                        cand -= cand.dot(&t) * t;
                    }
                    if cand.norm() > 0.5 {
                        let nr = cand.norm();
                        dir = cand / nr;
                        break;
                    }
                }
                let scale =
                    (10.0 * tol_skel * 10f64.powi(attempt as i32)).min(1e-3 * poly.mesh_rho);
                nudge = Some(dir * scale);
            }
            Err(e) => return Err(e),
        }
    }
    Err(ReggeError::SkeletonCollision(5))
}

fn trace_once<F>(
    poly: &Polyhedron,
    curve: &F,
    samples: usize,
    tol_skel: f64,
) -> Result<DualPath, ReggeError>
where
    F: Fn(f64) -> Point,
{
    let m = &poly.manifold;
    let pts = m.sample_curve(|t| curve(t), samples);
    let start = poly
        .locate(&pts[0])
        .ok_or(ReggeError::LeftRegion(0.0))?;
    let mut cells = vec![start];
    let mut faces = Vec::new();
    let mut exit_points = Vec::new();
    let mut entry_points = Vec::new();
    let mut current = start;
    let inside = |cell: usize, p: &Point| -> f64 {
        poly.chart_barycentric(cell, p)
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    let mut seg_start = pts[0].clone();
    let mut i = 1;
    let mut guard = 0usize;
    while i < pts.len() {
        let seg_end = pts[i].clone();
        if inside(current, &seg_end) >= 0.0 {
            seg_start = seg_end;
            i += 1;
            continue;
        }
        guard += 1;
        if guard > 100 * pts.len() {
            // Ping-ponging across a degenerate crossing configuration; let
            // the caller nudge the curve and retrace.
            return Err(ReggeError::SkeletonCollision(0));
        }
        // Bisect the crossing along the chart segment.
        let mut a = 0.0f64;
        let mut b = 1.0f64;
        let dirv = m.wrap_diff(&seg_start, &seg_end);
        let eval = |t: f64| -> Point { &seg_start + t * &dirv };
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if inside(current, &eval(mid)) >= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if (b - a) * dirv.norm() < 1e-10 * poly.mesh_rho {
                break;
            }
        }
        let cross = eval(0.5 * (a + b));
        // Facet being crossed: most negative coordinate just outside.
        let lam_out = poly.chart_barycentric(current, &eval(b.min(1.0)));
        let mut omit = 0;
        let mut worst = f64::INFINITY;
        for (j, &l) in lam_out.iter().enumerate() {
            if l < worst {
                worst = l;
                omit = j;
            }
        }
        // Skeleton proximity: at the crossing, coordinates other than `omit`
        // must stay clear of zero (in length units of the cell scale).
        let lam_cross = poly.chart_barycentric(current, &cross);
        for (j, &l) in lam_cross.iter().enumerate() {
            if j != omit && l * poly.mesh_rho < tol_skel {
                return Err(ReggeError::SkeletonCollision(0));
            }
        }
        let (nbr, _) = poly
            .complex
            .neighbor(current, omit)
            .ok_or(ReggeError::LeftRegion(i as f64 / pts.len() as f64))?;
        let facet: Vec<u32> = poly.complex.cells()[current]
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != omit)
            .map(|(_, &v)| v)
            .collect();
        let fid = poly
            .complex
            .face_index(poly.complex.dim - 1, &facet)
            .expect("facet exists");
        exit_points.push(chart_to_embedded(poly, current, &cross));
        entry_points.push(chart_to_embedded(poly, nbr, &cross));
        faces.push(fid);
        cells.push(nbr);
        current = nbr;
        // Continue the same segment from just past the crossing.
        let past = b + 1e-9;
        if past < 1.0 {
            seg_start = eval(past);
        } else {
            seg_start = seg_end;
            i += 1;
        }
    }
    Ok(DualPath {
        cells,
        faces,
        exit_points,
        entry_points,
        nudge: None,
    })
}

/// Number of distinct cells a curve visits (the crossing-count diagnostic).
pub fn distinct_cells_visited(path: &DualPath) -> usize {
    let mut seen: Vec<usize> = path.cells.clone();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Composes unfoldings along a dual path. The result maps the canonical
/// embedded frame of the first cell to that of the last and is
/// g0-orthogonal to machine accuracy.
pub fn transport_g0(poly: &Polyhedron, path: &DualPath) -> Result<G0Transport, ReggeError> {
    let n = poly.complex.dim;
    let start = path.cells[0];
    // Developed copy of the current cell: vertex coordinates in the common
    // Euclidean space, indexed by the cell's sorted tuple.
    let mut developed = poly.embeddings[start].clone();
    for (step, window) in path.cells.windows(2).enumerate() {
        let (a, b) = (window[0], window[1]);
        let face = &poly.complex.faces_of_dim(n - 1)[path.faces[step]];
        let a_verts = &poly.complex.cells()[a];
        let b_verts = &poly.complex.cells()[b];
        let shared: Vec<(usize, usize)> = face
            .iter()
            .map(|v| {
                let bi = b_verts.iter().position(|x| x == v).expect("facet vertex");
                let ai = a_verts.iter().position(|x| x == v).expect("facet vertex");
                (bi, ai)
            })
            .collect();
        let b_dm = poly.cell_distance_matrix(b);
        developed = euclid::unfold_adjacent(&developed, &b_dm, &shared)?;
    }
    let end = *path.cells.last().unwrap();
    let canonical = &poly.embeddings[end];
    // Linear part of the affine isometry canonical -> developed.
    let mut vcan = DMatrix::zeros(n, n);
    let mut vdev = DMatrix::zeros(n, n);
    for j in 1..=n {
        let ec = &canonical.vertices[j] - &canonical.vertices[0];
        let ed = &developed.vertices[j] - &developed.vertices[0];
        for i in 0..n {
            vcan[(i, j - 1)] = ec[i];
            vdev[(i, j - 1)] = ed[i];
        }
    }
    let m_end = &vdev
        * vcan
            .try_inverse()
            .ok_or_else(|| ReggeError::Inconsistent("degenerate end cell".into()))?;
    // A vector with start-frame components w develops as w itself (the start
    // cell is developed in canonical position), and reads m_end^{-1} w in the
    // end cell's canonical frame.
    let matrix = m_end
        .try_inverse()
        .ok_or_else(|| ReggeError::Inconsistent("non-invertible development".into()))?;
    Ok(G0Transport {
        start_cell: start,
        end_cell: end,
        matrix,
    })
}

/// Star loop of a bone as a dual path (ring order, back to the start cell).
pub fn star_loop_path(_poly: &Polyhedron, bone: &Bone, base: usize) -> DualPath {
    let r = bone.ring_cells.len();
    let offset = bone
        .ring_cells
        .iter()
        .position(|&c| c == base)
        .expect("base cell in ring");
    let mut cells = Vec::with_capacity(r + 1);
    let mut faces = Vec::with_capacity(r);
    for k in 0..=r {
        cells.push(bone.ring_cells[(offset + k) % r]);
        if k < r {
            faces.push(bone.ring_faces[(offset + k) % r]);
        }
    }
    DualPath {
        cells,
        faces,
        exit_points: Vec::new(),
        entry_points: Vec::new(),
        nudge: None,
    }
}

/// Dihedral angles around every bone, summed in ring order.
pub fn deficit_table(poly: &Polyhedron) -> Result<Vec<DeficitRecord>, ReggeError> {
    let bones = poly.complex.bones()?;
    let records: Vec<Result<DeficitRecord, ReggeError>> = bones
        .par_iter()
        .map(|bone| {
            let mut dihedrals = Vec::with_capacity(bone.ring_cells.len());
            let mut beta_total = 0.0;
            for &cell in &bone.ring_cells {
                let verts = &poly.complex.cells()[cell];
                let extra: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !bone.vertices.contains(v))
                    .map(|(i, _)| i)
                    .collect();
                if extra.len() != 2 {
                    return Err(ReggeError::NonManifoldStar);
                }
                let beta =
                    euclid::dihedral_angle(&poly.embeddings[cell], (extra[0], extra[1]))?;
                dihedrals.push((cell, beta));
                beta_total += beta;
            }
            let alpha = 2.0 * std::f64::consts::PI - beta_total;
            let vol_nm2 = poly.face_volume(&bone.vertices)?;
            Ok(DeficitRecord {
                bone: bone.clone(),
                dihedrals,
                beta_total,
                alpha,
                vol_nm2,
            })
        })
        .collect();
    records.into_iter().collect()
}

/// Transport around the once-winding star loop of a bone. The result is
/// checked against the analytic form (identity on the bone plane, rotation
/// by the defect angle in its orthogonal complement).
pub fn bone_rotation(
    poly: &Polyhedron,
    record: &DeficitRecord,
    base: usize,
) -> Result<G0Transport, ReggeError> {
    let path = star_loop_path(poly, &record.bone, base);
    let transport = transport_g0(poly, &path)?;
    // Assertion per the deficit-rotation lemma: the loop transport fixes the
    // bone and rotates its orthogonal plane by alpha.
    let frame = bone_frame_in_cell(poly, &record.bone, base)?;
    let n = poly.complex.dim;
    for col in 0..n - 2 {
        let b = frame.column(col).into_owned();
        let rb = &transport.matrix * &b;
        if (rb - &b).norm() > 1e-9 {
            return Err(ReggeError::Inconsistent(
                "star transport does not fix the bone".into(),
            ));
        }
    }
    let (q1, q2) = bone_normal_plane(poly, &record.bone, base, &frame)?;
    let r11 = q1.dot(&(&transport.matrix * &q1));
    let r21 = q2.dot(&(&transport.matrix * &q1));
    let cos_alpha = record.alpha.cos();
    let sin_alpha = record.alpha.sin();
    if (r11 - cos_alpha).abs() > 1e-9 || (r21.abs() - sin_alpha.abs()).abs() > 1e-9 {
        return Err(ReggeError::Inconsistent(format!(
            "star rotation angle mismatch: cos {r11:.12} vs {cos_alpha:.12}"
        )));
    }
    Ok(transport)
}

/// Orthonormal frame of the bone inside a cell's embedded coordinates, built
/// from the lexicographically ordered bone vertices.
pub fn bone_frame_in_cell(
    poly: &Polyhedron,
    bone: &Bone,
    cell: usize,
) -> Result<DMatrix<f64>, ReggeError> {
    let n = poly.complex.dim;
    let verts = &poly.complex.cells()[cell];
    let emb = &poly.embeddings[cell];
    let local: Vec<usize> = bone
        .vertices
        .iter()
        .map(|v| {
            verts
                .iter()
                .position(|x| x == v)
                .ok_or(ReggeError::NonManifoldStar)
        })
        .collect::<Result<_, _>>()?;
    let mut frame = DMatrix::zeros(n, n - 2);
    let base = &emb.vertices[local[0]];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (c, &li) in local[1..].iter().enumerate() {
        let mut w = &emb.vertices[li] - base;
        for b in &basis {
            let d = w.dot(b);
            w -= d * b;
        }
        let nr = w.norm();
        if nr < 1e-13 {
            return Err(ReggeError::Inconsistent("degenerate bone frame".into()));
        }
        let w = w / nr;
        for i in 0..n {
            frame[(i, c)] = w[i];
        }
        basis.push(w);
    }
    Ok(frame)
}

/// Completes the bone frame to an orthonormal basis of the cell frame; the
/// two extra vectors span the bone's orthogonal plane, ordered so that
/// (bone frame, q1, q2) is positively oriented for the complex orientation.
pub fn bone_normal_plane(
    poly: &Polyhedron,
    _bone: &Bone,
    cell: usize,
    frame: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>), ReggeError> {
    let n = poly.complex.dim;
    let mut basis: Vec<DVector<f64>> = (0..n - 2)
        .map(|c| frame.column(c).into_owned())
        .collect();
    let mut extras = Vec::new();
    for k in 0..n {
        let mut cand = DVector::zeros(n);
        cand[k] = 1.0;
        for b in &basis {
            let d = cand.dot(b);
            cand -= d * b;
        }
        let nr = cand.norm();
        if nr > 1e-6 {
            let v = cand / nr;
            basis.push(v.clone());
            extras.push(v);
            if extras.len() == 2 {
                break;
            }
        }
    }
    if extras.len() != 2 {
        return Err(ReggeError::Inconsistent("no normal plane".into()));
    }
    let mut q1 = extras[0].clone();
    let mut q2 = extras[1].clone();
    // Orientation: det[frame | q1 | q2] times the cell flag must be +1.
    let mut full = DMatrix::zeros(n, n);
    for c in 0..n - 2 {
        for i in 0..n {
            full[(i, c)] = frame[(i, c)];
        }
    }
    for i in 0..n {
        full[(i, n - 2)] = q1[i];
        full[(i, n - 1)] = q2[i];
    }
    let sign = full.determinant().signum() * poly.complex.orientations[cell] as f64;
    if sign < 0.0 {
        std::mem::swap(&mut q1, &mut q2);
    }
    Ok((q1, q2))
}

/// The Regge scalar: sum over bones inside the region of
/// `alpha_xi Vol_{n-2}(xi)`; for n = 2 the 0-volume counts 1.
pub fn regge_scalar(
    records: &[DeficitRecord],
    poly: &Polyhedron,
    region: Option<&(dyn Fn(&Point) -> bool + Sync)>,
) -> f64 {
    records
        .iter()
        .filter(|r| match region {
            Some(f) => f(&poly.face_centroid_chart(&r.bone.vertices)),
            None => true,
        })
        .map(|r| r.alpha * r.vol_nm2)
        .sum()
}

/// Boundary-loop Regge curvature of a square: inverse loop transport minus
/// identity, in the frame of the cell containing the base point.
pub fn loop_regge_curvature(
    poly: &Polyhedron,
    square: &ParamSquare,
    samples: usize,
) -> Result<SkewMap, ReggeError> {
    let path = trace_curve(poly, |u| square.boundary(u), samples)?;
    if path.cells[0] != *path.cells.last().unwrap() {
        return Err(ReggeError::Inconsistent("boundary loop did not close".into()));
    }
    let transport = transport_g0(poly, &path)?;
    let n = poly.complex.dim;
    let inv = transport
        .matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| ReggeError::Inconsistent("singular transport".into()))?;
    Ok(SkewMap {
        base_cell: path.cells[0],
        matrix: inv - DMatrix::identity(n, n),
    })
}

/// One transverse intersection of a square with a bone.
#[derive(Debug, Clone)]
pub struct BoneIntersection {
    pub s: f64,
    pub t: f64,
    /// Barycentric weights of the hit point on the bone.
    pub bone_weights: Vec<f64>,
    pub point: Point,
    pub index: i32,
}

/// Cached evaluations of a square on a coarse parameter grid, shared across
/// bone scans (each evaluation of an exponential-map square costs an ODE
/// solve).
pub struct SquareGrid {
    pub grid: usize,
    pub points: Vec<Point>,
}

impl SquareGrid {
    pub fn build(square: &ParamSquare, grid: usize) -> Self {
        let mut points = Vec::with_capacity((grid + 1) * (grid + 1));
        for i in 0..=grid {
            for j in 0..=grid {
                let s = i as f64 / grid as f64;
                let t = j as f64 / grid as f64;
                points.push(square.eval(s, t));
            }
        }
        SquareGrid { grid, points }
    }

    fn at(&self, i: usize, j: usize) -> &Point {
        &self.points[i * (self.grid + 1) + j]
    }
}

/// All transverse intersections of the square with one bone, by coarse grid
/// scan plus Newton refinement on the square system
/// `G(s,t) = bone(w_1..w_{n-2})`.
pub fn find_intersections(
    poly: &Polyhedron,
    square: &ParamSquare,
    bone: &Bone,
) -> Result<Vec<BoneIntersection>, ReggeError> {
    let cache = SquareGrid::build(square, 24);
    find_intersections_cached(poly, square, &cache, bone)
}

/// Grid-cached variant of [`find_intersections`].
pub fn find_intersections_cached(
    poly: &Polyhedron,
    square: &ParamSquare,
    cache: &SquareGrid,
    bone: &Bone,
) -> Result<Vec<BoneIntersection>, ReggeError> {
    let m = &poly.manifold;
    let n = m.dim;
    let tol_skel = TOL_SKEL_FACTOR * poly.mesh_rho;
    let bverts: Vec<Point> = bone
        .vertices
        .iter()
        .map(|&v| poly.vertex_positions[v as usize].clone())
        .collect();
    let b0 = bverts[0].clone();
    let bdirs: Vec<DVector<f64>> = bverts[1..]
        .iter()
        .map(|p| m.wrap_diff(&b0, p))
        .collect();
    let unknowns = 2 + (n - 2);
    debug_assert_eq!(unknowns, n);
    // Residual in the cover patch around the bone.
    let residual = |vars: &DVector<f64>| -> DVector<f64> {
        let g = square.eval(vars[0], vars[1]);
        let mut target = b0.clone();
        for (j, d) in bdirs.iter().enumerate() {
            target += vars[2 + j] * d;
        }
        let g_lift = m.lift_near(&target, &g);
        g_lift - target
    };
    // Coarse scan over the cached grid.
    let grid = cache.grid;
    let mut seeds: Vec<DVector<f64>> = Vec::new();
    let bone_scale: f64 = bdirs.iter().map(|d| d.norm()).fold(0.0, f64::max).max(1e-12);
    for i in 0..=grid {
        for j in 0..=grid {
            let s = i as f64 / grid as f64;
            let t = j as f64 / grid as f64;
            let g = cache.at(i, j).clone();
            // Closest point on the bone's affine span (least squares).
            let diff = m.wrap_diff(&b0, &g);
            let mut a = DMatrix::zeros(n, n - 2);
            for (c, d) in bdirs.iter().enumerate() {
                for r in 0..n {
                    a[(r, c)] = d[r];
                }
            }
            let w = if n > 2 {
                a.clone()
                    .svd(true, true)
                    .solve(&diff, 1e-13)
                    .unwrap_or_else(|_| DVector::zeros(n - 2))
            } else {
                DVector::zeros(0)
            };
            let mut res = diff.clone();
            for (c, d) in bdirs.iter().enumerate() {
                res -= w[c] * d;
            }
            if res.norm() < 0.75 * poly.mesh_rho.max(bone_scale) {
                let mut vars = DVector::zeros(n);
                vars[0] = s;
                vars[1] = t;
                for c in 0..n - 2 {
                    vars[2 + c] = w[c];
                }
                seeds.push(vars);
            }
        }
    }
    let mut found: Vec<DVector<f64>> = Vec::new();
    let tol = 1e-11 * (1.0 + poly.mesh_rho);
    for seed in seeds {
        let mut vars = seed;
        let mut r = residual(&vars);
        let mut ok = false;
        for _ in 0..40 {
            if r.norm() < tol {
                ok = true;
                break;
            }
            let h = 1e-7;
            let mut jac = DMatrix::zeros(n, n);
            for c in 0..n {
                let mut vp = vars.clone();
                vp[c] += h;
                let rp = residual(&vp);
                for rr in 0..n {
                    jac[(rr, c)] = (rp[rr] - r[rr]) / h;
                }
            }
            let svd = jac.clone().svd(true, true);
            let smax = svd.singular_values[0];
            let smin = svd.singular_values[svd.singular_values.len() - 1];
            if smin <= 0.0 || smax / smin > 1e6 {
                return Err(ReggeError::NonTransverse(format!(
                    "intersection system condition number {:.2e}",
                    smax / smin.max(1e-300)
                )));
            }
            let delta = svd
                .solve(&r, 1e-14 * smax)
                .map_err(|_| ReggeError::NonTransverse("singular system".into()))?;
            vars -= delta;
            r = residual(&vars);
        }
        if !ok || r.norm() > tol {
            continue;
        }
        // Inside the open square and the open bone simplex?
        let (s, t) = (vars[0], vars[1]);
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
            continue;
        }
        let mut weights = vec![0.0; n - 1];
        let mut rest = 0.0;
        for c in 0..n - 2 {
            weights[c + 1] = vars[2 + c];
            rest += vars[2 + c];
        }
        weights[0] = 1.0 - rest;
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            continue;
        }
        // Reject hits on the boundary of the square or the bone.
        let edge_gap = s.min(1.0 - s).min(t).min(1.0 - t);
        if edge_gap * poly.mesh_rho < tol_skel {
            return Err(ReggeError::NonTransverse(
                "intersection on the boundary of the square".into(),
            ));
        }
        // A 0-dimensional bone (n = 2) has no boundary to avoid.
        if n > 2 {
            let bone_gap = weights.iter().cloned().fold(f64::INFINITY, f64::min);
            if bone_gap * bone_scale < tol_skel {
                return Err(ReggeError::NonTransverse(
                    "intersection on the boundary of the bone".into(),
                ));
            }
        }
        if found
            .iter()
            .any(|f| (f[0] - s).abs() < 1e-7 && (f[1] - t).abs() < 1e-7)
        {
            continue;
        }
        found.push(vars);
    }
    // Index signs.
    let mut out = Vec::new();
    for vars in found {
        let (s, t) = (vars[0], vars[1]);
        let p = square.eval(s, t);
        let (ds, dt) = square.partials(s, t);
        let mut det_m = DMatrix::zeros(n, n);
        for (c, d) in bdirs.iter().enumerate() {
            for r in 0..n {
                det_m[(r, c)] = d[r];
            }
        }
        for r in 0..n {
            det_m[(r, n - 2)] = ds[r];
            det_m[(r, n - 1)] = dt[r];
        }
        let det = det_m.determinant();
        if det == 0.0 {
            return Err(ReggeError::NonTransverse("zero determinant".into()));
        }
        // Ambient orientation: sign of the complex orientation in chart
        // coordinates, read off any cell of the bone's ring.
        let cell = bone.ring_cells[0];
        let amb = chart_orientation_sign(poly, cell);
        let mut weights = vec![0.0; n - 1];
        let mut rest = 0.0;
        for c in 0..n - 2 {
            weights[c + 1] = vars[2 + c];
            rest += vars[2 + c];
        }
        weights[0] = 1.0 - rest;
        out.push(BoneIntersection {
            s,
            t,
            bone_weights: weights,
            point: p,
            index: (det.signum() * amb) as i32,
        });
    }
    out.sort_by(|a, b| (a.t, a.s).partial_cmp(&(b.t, b.s)).unwrap());
    Ok(out)
}

/// Sign relating the chart's coordinate orientation to the complex
/// orientation, evaluated on one cell.
pub fn chart_orientation_sign(poly: &Polyhedron, cell: usize) -> f64 {
    let n = poly.complex.dim;
    let lifts = &poly.cell_lifts[cell];
    let mut mdet = DMatrix::zeros(n, n);
    for j in 1..=n {
        for i in 0..n {
            mdet[(i, j - 1)] = lifts[j][i] - lifts[0][i];
        }
    }
    mdet.determinant().signum() * poly.complex.orientations[cell] as f64
}

/// Sum of intersection indices of the square against one bone.
pub fn intersection_index(
    poly: &Polyhedron,
    square: &ParamSquare,
    bone: &Bone,
) -> Result<i32, ReggeError> {
    Ok(find_intersections(poly, square, bone)?
        .iter()
        .map(|i| i.index)
        .sum())
}

/// The Regge curving of a square: the bone-deficit-weighted sum of
/// transported Hodge duals,
/// `sum over hit bones of -alpha index *(xi ^ .)`,
/// each dual carried back to the base along the square's parameter
/// rectangle path and expressed in the base cell's embedded frame.
pub fn regge_curving(
    poly: &Polyhedron,
    square: &ParamSquare,
    samples: usize,
    records: &[DeficitRecord],
) -> Result<SkewMap, ReggeError> {
    let n = poly.complex.dim;
    let base_cell = poly
        .locate(&square.base)
        .ok_or(ReggeError::LeftRegion(0.0))?;
    let mut total = DMatrix::<f64>::zeros(n, n);
    let cache = SquareGrid::build(square, 24);
    // Bounding ball of the sampled square in the cover patch around the base.
    let mut radius = 0.0f64;
    for p in &cache.points {
        radius = radius.max(poly.manifold.wrap_diff(&square.base, p).norm());
    }
    let margin = radius + 2.0 * poly.mesh_rho;
    for record in records {
        let centroid = poly.face_centroid_chart(&record.bone.vertices);
        if poly.manifold.wrap_diff(&square.base, &centroid).norm() > margin {
            continue;
        }
        let hits = find_intersections_cached(poly, square, &cache, &record.bone)?;
        for hit in hits {
            let contribution =
                transported_bone_dual(poly, square, samples, record, &hit, base_cell)?;
            total += contribution * (-record.alpha * hit.index as f64);
        }
    }
    Ok(SkewMap {
        base_cell,
        matrix: total,
    })
}

/// The map `w -> *(xi ^ w)` for one intersection, with the bone's unit
/// (n-2)-vector transported to the base cell along the privileged
/// parameter-rectangle path stopped just short of the bone.
fn transported_bone_dual(
    poly: &Polyhedron,
    square: &ParamSquare,
    samples: usize,
    record: &DeficitRecord,
    hit: &BoneIntersection,
    base_cell: usize,
) -> Result<DMatrix<f64>, ReggeError> {
    let n = poly.complex.dim;
    let (s_star, t_star) = (hit.s, hit.t);
    // L-shaped path in parameter space: up the left edge then along the row,
    // stopped a little before the bone.
    let mut path = None;
    let mut last_err: Option<ReggeError> = None;
    for shrink in [5e-2, 2e-2, 1e-2, 2e-3] {
        let s_end = s_star * (1.0 - shrink);
        let curve = |u: f64| -> Point {
            let u = u.clamp(0.0, 1.0);
            if u <= 0.5 {
                square.eval(0.0, 2.0 * u * t_star)
            } else {
                square.eval(2.0 * (u - 0.5) * s_end, t_star)
            }
        };
        match trace_curve(poly, curve, samples) {
            Ok(p) => {
                // The final cell must contain the bone so its frame can be
                // expressed there.
                let end = *p.cells.last().unwrap();
                if record.bone.ring_cells.contains(&end) {
                    path = Some(p);
                    break;
                }
                last_err = Some(ReggeError::Inconsistent(
                    "privileged path did not end in the bone star".into(),
                ));
            }
            Err(e) => last_err = Some(e),
        }
    }
    let path = path.ok_or_else(|| {
        last_err.unwrap_or(ReggeError::Inconsistent("no privileged path".into()))
    })?;
    let end_cell = *path.cells.last().unwrap();
    if path.cells[0] != base_cell {
        return Err(ReggeError::Inconsistent(
            "privileged path starts outside the base cell".into(),
        ));
    }
    let transport = transport_g0(poly, &path)?;
    // Bone frame in the end cell, pulled back to the base frame.
    let frame_end = bone_frame_in_cell(poly, &record.bone, end_cell)?;
    let inv = transport
        .matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| ReggeError::Inconsistent("singular transport".into()))?;
    let frame_base = inv * frame_end;
    // Complete to a positively oriented basis in the base cell.
    let mut basis: Vec<DVector<f64>> = (0..n - 2)
        .map(|c| frame_base.column(c).into_owned())
        .collect();
    let mut extras = Vec::new();
    for k in 0..n {
        let mut cand = DVector::zeros(n);
        cand[k] = 1.0;
        for b in &basis {
            let d = cand.dot(b);
            cand -= d * b;
        }
        let nr = cand.norm();
        if nr > 1e-6 {
            let v = cand / nr;
            basis.push(v.clone());
            extras.push(v);
            if extras.len() == 2 {
                break;
            }
        }
    }
    let mut q1 = extras[0].clone();
    let mut q2 = extras[1].clone();
    let mut full = DMatrix::zeros(n, n);
    for c in 0..n - 2 {
        for i in 0..n {
            full[(i, c)] = frame_base[(i, c)];
        }
    }
    for i in 0..n {
        full[(i, n - 2)] = q1[i];
        full[(i, n - 1)] = q2[i];
    }
    let sign = full.determinant().signum() * poly.complex.orientations[base_cell] as f64;
    if sign < 0.0 {
        std::mem::swap(&mut q1, &mut q2);
    }
    // w -> <q1, w> q2 - <q2, w> q1 is *(xi ^ w) in the oriented frame.
    let mut mmat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mmat[(i, j)] = q2[i] * q1[j] - q1[i] * q2[j];
        }
    }
    Ok(mmat)
}

/// Differential of the per-simplex embedding map (embedded coordinates to
/// chart coordinates) at an embedded point, by central finite differences of
/// the barycentric interpolation map.
pub fn embedding_differential(
    poly: &Polyhedron,
    cell: usize,
    at_emb: &DVector<f64>,
) -> Result<DMatrix<f64>, ReggeError> {
    use crate::barycentric::{weighted_min, PointSet};
    let m = &poly.manifold;
    let n = poly.complex.dim;
    let emb = &poly.embeddings[cell];
    // Affine coordinates in the embedded simplex.
    let mut vmat = DMatrix::zeros(n, n);
    for j in 1..=n {
        let e = &emb.vertices[j] - &emb.vertices[0];
        for i in 0..n {
            vmat[(i, j - 1)] = e[i];
        }
    }
    let vinv = vmat
        .try_inverse()
        .ok_or_else(|| ReggeError::Inconsistent("degenerate embedding".into()))?;
    let lambda_of = |e: &DVector<f64>| -> Vec<f64> {
        let c = &vinv * (e - &emb.vertices[0]);
        let mut lambda = vec![0.0; n + 1];
        let mut rest = 0.0;
        for j in 1..=n {
            lambda[j] = c[j - 1];
            rest += c[j - 1];
        }
        lambda[0] = 1.0 - rest;
        lambda
    };
    let verts = &poly.complex.cells()[cell];
    let pts: Vec<Point> = verts
        .iter()
        .map(|&v| poly.vertex_positions[v as usize].clone())
        .collect();
    let center = poly.face_centroid_chart(verts);
    // Centroid-to-vertex distances stay below 3/4 of the diameter, so this
    // ball encloses the cell with margin while staying inside the hint even
    // for coarse cells.
    let ps = PointSet::with_ball(m, pts, center, 0.9 * poly.embeddings[cell].diameter())?;
    let h = 1e-5 * poly.mesh_rho;
    let here = weighted_min(&ps, &lambda_of(at_emb), None)?;
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut ep = at_emb.clone();
        ep[k] += h;
        let mut em = at_emb.clone();
        em[k] -= h;
        let xp = weighted_min(&ps, &lambda_of(&ep), Some(&here))?;
        let xm = weighted_min(&ps, &lambda_of(&em), Some(&here))?;
        let d = (m.lift_near(&here, &xp) - m.lift_near(&here, &xm)) / (2.0 * h);
        for i in 0..n {
            jac[(i, k)] = d[i];
        }
    }
    Ok(jac)
}
