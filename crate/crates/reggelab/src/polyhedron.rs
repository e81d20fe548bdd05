//! The approximating polyhedron: a simplicial complex, chart positions for
//! its vertices, and per-simplex Euclidean structure derived from geodesic
//! edge lengths.
//!
//! Subdivision vertices are placed by Riemannian barycentric interpolation
//! and every edge length is a geodesic distance, so simplex edges are
//! geodesics by construction. For power-of-two orders the refinement runs as
//! repeated halving (edgewise subdivision composes, `Sd_2 . Sd_2 = Sd_4`),
//! which keeps every barycenter solve inside a small convex ball even when
//! the base complex is coarse; other orders interpolate directly against the
//! base simplices and require those to fit inside convex balls.

use crate::barycentric::{self, BaryError, PointSet};
use crate::complex::{ComplexError, SimplicialComplex, VertexSupport};
use crate::euclid::{self, DistanceMatrix, EmbeddedSimplex};
use crate::manifold::{ChartManifold, ManifoldError, Point};
use nalgebra::DVector;
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("simplex {cell} is not realizable from its edge lengths (min eigenvalue {min_eigenvalue:.3e}; mesh too coarse for the curvature?)")]
    NotRealizable { cell: usize, min_eigenvalue: f64 },
    #[error("spread check failed on cell {0}")]
    SpreadFailure(usize),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Bary(#[from] BaryError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Euclid(#[from] euclid::EuclidError),
    #[error("polyhedron file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A base complex with chart positions for its vertices.
#[derive(Debug, Clone)]
pub struct BaseGeometry {
    pub complex: SimplicialComplex,
    pub positions: Vec<Point>,
}

/// Deterministically recomputable quality summary of a build.
#[derive(Debug, Clone, Copy)]
pub struct QualityReport {
    /// Minimum Euclidean thickness over the n-simplices.
    pub t_min: f64,
    /// Maximum simplex diameter (the mesh rho).
    pub diam_max: f64,
    /// Minimum of vol_n / rho^n over the n-simplices.
    pub vol_min_over_rho_n: f64,
    pub bones_count: usize,
    pub has_boundary: bool,
}

/// The pair (T, K, g0): complex, vertex placements, per-simplex flat metric.
pub struct Polyhedron {
    pub manifold: Arc<ChartManifold>,
    pub complex: SimplicialComplex,
    pub vertex_positions: Vec<Point>,
    /// Geodesic length per edge (indexed like `complex.edges()`).
    pub edge_lengths: Vec<f64>,
    /// Per cell: vertex chart coordinates lifted into a common cover patch.
    pub cell_lifts: Vec<Vec<Point>>,
    /// Canonical Euclidean realization per cell, vertex order matching the
    /// cell's sorted tuple.
    pub embeddings: Vec<EmbeddedSimplex>,
    pub mesh_rho: f64,
    pub quality: QualityReport,
    buckets: Locator,
}

impl Polyhedron {
    /// Length of the edge between two vertex ids.
    pub fn edge_length(&self, a: u32, b: u32) -> f64 {
        let key = if a < b { vec![a, b] } else { vec![b, a] };
        let idx = self
            .complex
            .face_index(1, &key)
            .expect("edge exists in complex");
        self.edge_lengths[idx]
    }

    /// Distance data of one cell, in sorted-tuple vertex order.
    pub fn cell_distance_matrix(&self, cell: usize) -> DistanceMatrix {
        let verts = &self.complex.cells()[cell];
        let k = verts.len() - 1;
        let mut d = nalgebra::DMatrix::zeros(k + 1, k + 1);
        for i in 0..=k {
            for j in (i + 1)..=k {
                let l = self.edge_length(verts[i], verts[j]);
                d[(i, j)] = l;
                d[(j, i)] = l;
            }
        }
        DistanceMatrix::new(d).expect("validated edge lengths")
    }

    /// Chart-linear barycentric coordinates of a chart point with respect to
    /// a cell's lifted vertex positions (least squares in the lift patch).
    pub fn chart_barycentric(&self, cell: usize, p: &Point) -> DVector<f64> {
        let lifts = &self.cell_lifts[cell];
        let n = self.manifold.dim;
        let k = lifts.len() - 1;
        let p_lift = self.manifold.lift_near(&lifts[0], p);
        let mut a = nalgebra::DMatrix::zeros(n, k);
        for j in 1..=k {
            for i in 0..n {
                a[(i, j - 1)] = lifts[j][i] - lifts[0][i];
            }
        }
        let rhs = &p_lift - &lifts[0];
        let sol = a.svd(true, true).solve(&rhs, 1e-13).unwrap();
        let mut lambda = DVector::zeros(k + 1);
        let mut rest = 0.0;
        for j in 1..=k {
            lambda[j] = sol[j - 1];
            rest += sol[j - 1];
        }
        lambda[0] = 1.0 - rest;
        lambda
    }

    /// Cell containing the chart point, by bucket lookup plus barycentric
    /// tests; ties resolved toward the largest minimum coordinate.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        let wrapped = self.manifold.wrap_point(p);
        let mut best: Option<(usize, f64)> = None;
        for &cell in self.buckets.candidates(&wrapped) {
            let lambda = self.chart_barycentric(cell, &wrapped);
            let min_l = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.map(|(_, b)| min_l > b).unwrap_or(true) {
                best = Some((cell, min_l));
            }
        }
        match best {
            Some((cell, min_l)) if min_l > -1e-9 => Some(cell),
            _ => None,
        }
    }

    /// Chart position of the gravity center of a face (minimal-image mean).
    pub fn face_centroid_chart(&self, verts: &[u32]) -> Point {
        let p0 = &self.vertex_positions[verts[0] as usize];
        let mut acc = DVector::zeros(p0.len());
        for &v in verts {
            acc += self
                .manifold
                .wrap_diff(p0, &self.vertex_positions[v as usize]);
        }
        self.manifold.wrap_point(&(p0 + acc / verts.len() as f64))
    }

    /// Euclidean (g0) volume of a face from its edge lengths; 0-faces count 1.
    pub fn face_volume(&self, verts: &[u32]) -> Result<f64, PolyError> {
        if verts.len() == 1 {
            return Ok(1.0);
        }
        let k = verts.len() - 1;
        let mut d = nalgebra::DMatrix::zeros(k + 1, k + 1);
        for i in 0..=k {
            for j in (i + 1)..=k {
                let l = self.edge_length(verts[i], verts[j]);
                d[(i, j)] = l;
                d[(j, i)] = l;
            }
        }
        Ok(euclid::cayley_menger_volume(&DistanceMatrix::new(d)?)?)
    }
}

struct Locator {
    lo: Vec<f64>,
    size: Vec<f64>,
    counts: Vec<usize>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Locator {
    fn build(m: &ChartManifold, cell_lifts: &[Vec<Point>], mesh: f64) -> Self {
        let n = m.dim;
        let lo = m.domain.min.clone();
        let hi = m.domain.max.clone();
        let mut size = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for i in 0..n {
            let extent = hi[i] - lo[i];
            let want = (extent / (1.5 * mesh).max(1e-9)).floor().max(1.0) as usize;
            counts.push(want.min(128));
            size.push(extent / counts[i] as f64);
        }
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (ci, lifts) in cell_lifts.iter().enumerate() {
            // Bounding box of the lifted cell, mapped to bucket ranges with
            // periodic wrap-around.
            let mut bmin = lifts[0].clone();
            let mut bmax = lifts[0].clone();
            for p in &lifts[1..] {
                for i in 0..n {
                    bmin[i] = bmin[i].min(p[i]);
                    bmax[i] = bmax[i].max(p[i]);
                }
            }
            let mut ranges: Vec<Vec<i64>> = Vec::with_capacity(n);
            for i in 0..n {
                let a = ((bmin[i] - lo[i]) / size[i]).floor() as i64 - 1;
                let b = ((bmax[i] - lo[i]) / size[i]).floor() as i64 + 1;
                let mut idxs: Vec<i64> = (a..=b)
                    .map(|v| v.rem_euclid(counts[i] as i64))
                    .collect();
                idxs.sort_unstable();
                idxs.dedup();
                ranges.push(idxs);
            }
            let mut combo = vec![0usize; n];
            loop {
                let key: Vec<i64> = (0..n).map(|i| ranges[i][combo[i]]).collect();
                cells.entry(key).or_default().push(ci);
                let mut carry = 0;
                while carry < n {
                    combo[carry] += 1;
                    if combo[carry] < ranges[carry].len() {
                        break;
                    }
                    combo[carry] = 0;
                    carry += 1;
                }
                if carry == n {
                    break;
                }
            }
        }
        Locator {
            lo,
            size,
            counts,
            cells,
        }
    }

    fn candidates(&self, wrapped: &Point) -> &[usize] {
        let key: Vec<i64> = (0..self.lo.len())
            .map(|i| {
                (((wrapped[i] - self.lo[i]) / self.size[i]).floor() as i64)
                    .rem_euclid(self.counts[i] as i64)
            })
            .collect();
        self.cells.get(&key).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Builds the polyhedral approximation of order `E` over a base complex.
pub fn build_approximation(
    manifold: Arc<ChartManifold>,
    base: &BaseGeometry,
    e: u32,
) -> Result<Polyhedron, PolyError> {
    if e == 0 {
        return Err(ComplexError::BadRange("E must be >= 1".into()).into());
    }
    if e.is_power_of_two() {
        let mut current = assemble(
            manifold.clone(),
            base.complex.clone(),
            base.positions.clone(),
        )?;
        let mut remaining = e;
        while remaining > 1 {
            current = refine_once(&current)?;
            remaining /= 2;
        }
        Ok(current)
    } else {
        build_direct(manifold, base, e)
    }
}

/// One halving step: new vertices are geodesic edge midpoints (placed by the
/// two-point barycenter solve), split edges inherit half the parent length,
/// and genuinely new edges get fresh geodesic solves.
pub fn refine_once(poly: &Polyhedron) -> Result<Polyhedron, PolyError> {
    let m = &poly.manifold;
    let (refined, supports) = poly.complex.subdivide(2)?;
    let n_old = poly.vertex_positions.len();
    // Place new vertices (parallel, deterministic order by index).
    let placements: Vec<Result<Point, PolyError>> = supports[n_old..]
        .par_iter()
        .map(|sup| {
            debug_assert_eq!(sup.len(), 2);
            let (u, v) = (sup[0].0, sup[1].0);
            let pu = &poly.vertex_positions[u as usize];
            let pv = &poly.vertex_positions[v as usize];
            let len = poly.edge_length(u, v);
            let center = m.wrap_point(&(pu + 0.5 * m.wrap_diff(pu, pv)));
            let ps =
                PointSet::with_ball(m, vec![pu.clone(), pv.clone()], center.clone(), 0.75 * len)?;
            let l = m.log_map(pu, pv)?;
            let mid = m.wrap_point(&m.exp_map(pu, &(0.5 * &l.components))?.point);
            Ok(barycentric::weighted_min(&ps, &[0.5, 0.5], Some(&mid))?)
        })
        .collect();
    let mut positions = poly.vertex_positions.clone();
    for p in placements {
        positions.push(p?);
    }
    // Edge lengths: a split half keeps exactly half the parent length
    // (midpoints sit at arclength 1/2); everything else is solved.
    let mid_parent: Vec<Option<(u32, u32)>> = supports
        .iter()
        .map(|sup| {
            if sup.len() == 2 {
                Some((sup[0].0, sup[1].0))
            } else {
                None
            }
        })
        .collect();
    let edges = refined.edges().to_vec();
    let lengths: Vec<Result<f64, PolyError>> = edges
        .par_iter()
        .map(|edge| {
            let (a, b) = (edge[0], edge[1]);
            if let Some((u, v)) = mid_parent[b as usize] {
                if mid_parent[a as usize].is_none() && (a == u || a == v) {
                    return Ok(poly.edge_length(u, v) * 0.5);
                }
            }
            if let Some((u, v)) = mid_parent[a as usize] {
                if mid_parent[b as usize].is_none() && (b == u || b == v) {
                    return Ok(poly.edge_length(u, v) * 0.5);
                }
            }
            let pa = &positions[a as usize];
            let pb = &positions[b as usize];
            let (d, _) = m.distance_warm(pa, pb, None)?;
            Ok(d)
        })
        .collect();
    let mut edge_lengths = Vec::with_capacity(edges.len());
    for l in lengths {
        edge_lengths.push(l?);
    }
    assemble_with_lengths(poly.manifold.clone(), refined, positions, edge_lengths)
}

/// Direct placement for a general order: grid vertices are barycenters of
/// the base-simplex corner sets, which therefore must fit in convex balls.
fn build_direct(
    manifold: Arc<ChartManifold>,
    base: &BaseGeometry,
    e: u32,
) -> Result<Polyhedron, PolyError> {
    let m = manifold.clone();
    let (refined, supports) = base.complex.subdivide(e)?;
    let n_old = base.positions.len();
    let placements: Vec<Result<Point, PolyError>> = supports[n_old..]
        .par_iter()
        .map(|sup| place_support(&m, base, sup, e))
        .collect();
    let mut positions = base.positions.clone();
    for p in placements {
        positions.push(p?);
    }
    assemble(manifold, refined, positions)
}

fn place_support(
    m: &Arc<ChartManifold>,
    base: &BaseGeometry,
    sup: &VertexSupport,
    e: u32,
) -> Result<Point, PolyError> {
    let pts: Vec<Point> = sup
        .iter()
        .map(|&(v, _)| base.positions[v as usize].clone())
        .collect();
    let lambda: Vec<f64> = sup.iter().map(|&(_, w)| w as f64 / e as f64).collect();
    let ps = PointSet::new(m, pts)?;
    Ok(barycentric::weighted_min(&ps, &lambda, None)?)
}

/// Computes all edge lengths geodesically, then assembles.
fn assemble(
    manifold: Arc<ChartManifold>,
    complex: SimplicialComplex,
    positions: Vec<Point>,
) -> Result<Polyhedron, PolyError> {
    let m = &manifold;
    let edges = complex.edges().to_vec();
    let lengths: Vec<Result<f64, PolyError>> = edges
        .par_iter()
        .map(|edge| {
            let pa = &positions[edge[0] as usize];
            let pb = &positions[edge[1] as usize];
            let (d, _) = m.distance_warm(pa, pb, None)?;
            Ok(d)
        })
        .collect();
    let mut edge_lengths = Vec::with_capacity(edges.len());
    for l in lengths {
        edge_lengths.push(l?);
    }
    assemble_with_lengths(manifold, complex, positions, edge_lengths)
}

fn assemble_with_lengths(
    manifold: Arc<ChartManifold>,
    complex: SimplicialComplex,
    positions: Vec<Point>,
    edge_lengths: Vec<f64>,
) -> Result<Polyhedron, PolyError> {
    let m = &manifold;
    let n = complex.dim;
    let edge_of = |a: u32, b: u32| -> f64 {
        let key = if a < b { vec![a, b] } else { vec![b, a] };
        edge_lengths[complex.face_index(1, &key).expect("edge")]
    };
    // Per-cell embeddings from the shared edge lengths.
    let cells = complex.cells().to_vec();
    let embeddings: Vec<Result<EmbeddedSimplex, PolyError>> = cells
        .par_iter()
        .enumerate()
        .map(|(ci, verts)| {
            let k = verts.len() - 1;
            let mut d = nalgebra::DMatrix::zeros(k + 1, k + 1);
            for i in 0..=k {
                for j in (i + 1)..=k {
                    let l = edge_of(verts[i], verts[j]);
                    d[(i, j)] = l;
                    d[(j, i)] = l;
                }
            }
            let dm = DistanceMatrix::new(d)?;
            let rep = euclid::schoenberg_check(&dm);
            if !rep.realizable {
                return Err(PolyError::NotRealizable {
                    cell: ci,
                    min_eigenvalue: rep.min_eigenvalue,
                });
            }
            Ok(euclid::embed_simplex(&dm)?)
        })
        .collect();
    let mut embs = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        embs.push(e?);
    }
    // Cell lifts for point location and tracing.
    let mut cell_lifts = Vec::with_capacity(cells.len());
    for verts in &cells {
        let p0 = positions[verts[0] as usize].clone();
        let lifts: Vec<Point> = verts
            .iter()
            .map(|&v| m.lift_near(&p0, &positions[v as usize]))
            .collect();
        cell_lifts.push(lifts);
    }
    let mesh_rho = embs.iter().map(|e| e.diameter()).fold(0.0, f64::max);
    let t_min = embs
        .iter()
        .map(euclid::thickness)
        .fold(f64::INFINITY, f64::min);
    let vol_min_over_rho_n = embs
        .iter()
        .map(|e| e.volume() / mesh_rho.powi(n as i32))
        .fold(f64::INFINITY, f64::min);
    let bones_count = complex.bones()?.len();
    let quality = QualityReport {
        t_min,
        diam_max: mesh_rho,
        vol_min_over_rho_n,
        bones_count,
        has_boundary: !complex.is_closed(),
    };
    let buckets = Locator::build(m, &cell_lifts, mesh_rho);
    Ok(Polyhedron {
        manifold,
        complex,
        vertex_positions: positions,
        edge_lengths,
        cell_lifts,
        embeddings: embs,
        mesh_rho,
        quality,
        buckets,
    })
}

/// Rebuilds caches from serialized data (positions, cells, lengths).
pub fn from_parts(
    manifold: Arc<ChartManifold>,
    cells: &[Vec<u32>],
    positions: Vec<Point>,
    lengths: &[(u32, u32, f64)],
) -> Result<Polyhedron, PolyError> {
    let complex = SimplicialComplex::from_top_cells(positions.len(), cells)?;
    let mut edge_lengths = vec![0.0; complex.edges().len()];
    let mut seen = vec![false; edge_lengths.len()];
    for &(a, b, l) in lengths {
        let key = if a < b { vec![a, b] } else { vec![b, a] };
        let idx = complex
            .face_index(1, &key)
            .ok_or_else(|| PolyError::Format(format!("edge ({a},{b}) not in complex")))?;
        edge_lengths[idx] = l;
        seen[idx] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(PolyError::Format("missing edge lengths".into()));
    }
    assemble_with_lengths(manifold, complex, positions, edge_lengths)
}

/// Writes the versioned plain-text polyhedron format.
pub fn write_polyhedron<W: Write>(poly: &Polyhedron, out: &mut W) -> Result<(), PolyError> {
    use crate::numutil::fmt17;
    writeln!(out, "reggelab-polyhedron v1")?;
    writeln!(out, "dim {}", poly.complex.dim)?;
    writeln!(out, "[vertices]")?;
    for (i, p) in poly.vertex_positions.iter().enumerate() {
        let coords: Vec<String> = p.iter().map(|&c| fmt17(c)).collect();
        writeln!(out, "{} {}", i, coords.join(" "))?;
    }
    writeln!(out, "[simplices]")?;
    for (ci, cell) in poly.complex.cells().iter().enumerate() {
        let verts: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{} {} {}",
            poly.complex.dim,
            verts.join(" "),
            poly.complex.orientations[ci]
        )?;
    }
    writeln!(out, "[edges]")?;
    for (ei, edge) in poly.complex.edges().iter().enumerate() {
        writeln!(
            out,
            "{} {} {}",
            edge[0],
            edge[1],
            fmt17(poly.edge_lengths[ei])
        )?;
    }
    Ok(())
}

/// Reads the format back; caches are rebuilt from the stored lengths so the
/// written file round-trips bit-exactly.
pub fn read_polyhedron<R: BufRead>(
    manifold: Arc<ChartManifold>,
    input: R,
) -> Result<Polyhedron, PolyError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| PolyError::Format("empty file".into()))??;
    if header.trim() != "reggelab-polyhedron v1" {
        return Err(PolyError::Format(format!("bad header: {header}")));
    }
    let mut section = String::new();
    let mut positions: Vec<Point> = Vec::new();
    let mut cells: Vec<Vec<u32>> = Vec::new();
    let mut lengths: Vec<(u32, u32, f64)> = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("dim ") {
            continue;
        }
        if t.starts_with('[') {
            section = t.to_string();
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match section.as_str() {
            "[vertices]" => {
                let coords: Vec<f64> = parts[1..]
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e| PolyError::Format(format!("bad vertex: {e}")))?;
                positions.push(DVector::from_vec(coords));
            }
            "[simplices]" => {
                let dim: usize = parts[0]
                    .parse()
                    .map_err(|e| PolyError::Format(format!("bad dim: {e}")))?;
                let verts: Vec<u32> = parts[1..=dim + 1]
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e| PolyError::Format(format!("bad cell: {e}")))?;
                cells.push(verts);
            }
            "[edges]" => {
                let a: u32 = parts[0]
                    .parse()
                    .map_err(|_| PolyError::Format("edge".into()))?;
                let b: u32 = parts[1]
                    .parse()
                    .map_err(|_| PolyError::Format("edge".into()))?;
                let l: f64 = parts[2]
                    .parse()
                    .map_err(|_| PolyError::Format("edge".into()))?;
                lengths.push((a, b, l));
            }
            _ => return Err(PolyError::Format(format!("stray line: {t}"))),
        }
    }
    from_parts(manifold, &cells, positions, &lengths)
}
