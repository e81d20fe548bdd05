//! Pure Euclidean simplex geometry.
//!
//! Everything here works on edge-length data (a [`DistanceMatrix`]) or on an
//! explicit realization ([`EmbeddedSimplex`]): Cayley-Menger volumes, the
//! Schoenberg realizability criterion, quality measures (inradius about the
//! gravity center, thickness, openness), dihedral angles along codimension-2
//! faces, and the isometric unfolding of an adjacent simplex across a shared
//! facet. Unfolding is the elementary move behind piecewise-flat parallel
//! transport: developing a chain of simplices into one Euclidean space makes
//! transported vectors constant.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Scale-free tolerance used to declare a squared-distance Gram matrix
/// positive definite: the actual threshold is `EPS_PD * max_distance^2`.
pub const EPS_PD: f64 = 1e-10;

/// A simplex is degenerate when its volume is below `EPS_DEGENERATE * diam^n`.
pub const EPS_DEGENERATE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EuclidError {
    #[error("distance data is not realizable as a Euclidean simplex (min eigenvalue {min_eigenvalue:.3e})")]
    NotRealizable { min_eigenvalue: f64 },
    #[error("degenerate simplex: {0}")]
    Degenerate(String),
    #[error("shared facet lengths disagree: {0}")]
    FacetMismatch(String),
    #[error("invalid distance matrix: {0}")]
    BadDistances(String),
}

/// Symmetric nonnegative edge-length data for `k+1` points.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    /// Simplex dimension `k` (the matrix is `(k+1) x (k+1)`).
    order: usize,
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and positive off-diagonal entries.
    pub fn new(d: DMatrix<f64>) -> Result<Self, EuclidError> {
        let m = d.nrows();
        if m < 2 || d.ncols() != m {
            return Err(EuclidError::BadDistances(format!(
                "need a square matrix of size >= 2, got {}x{}",
                m,
                d.ncols()
            )));
        }
        let scale = d.iter().cloned().fold(0.0, f64::max);
        for i in 0..m {
            if d[(i, i)] != 0.0 {
                return Err(EuclidError::BadDistances(format!("d[{i}][{i}] != 0")));
            }
            for j in 0..i {
                if (d[(i, j)] - d[(j, i)]).abs() > 1e-14 * scale.max(1.0) {
                    return Err(EuclidError::BadDistances(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
                if d[(i, j)] <= 0.0 {
                    return Err(EuclidError::BadDistances(format!(
                        "nonpositive distance at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { order: m - 1, d })
    }

    /// Builds the matrix from an explicit list of `k+1` distinct points.
    pub fn from_points(points: &[DVector<f64>]) -> Result<Self, EuclidError> {
        let m = points.len();
        let mut d = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    d[(i, j)] = (&points[i] - &points[j]).norm();
                }
            }
        }
        Self::new(d)
    }

    /// Convenience constructor for a triangle with side lengths `(d01, d02, d12)`.
    pub fn triangle(d01: f64, d02: f64, d12: f64) -> Result<Self, EuclidError> {
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 1)] = d01;
        d[(1, 0)] = d01;
        d[(0, 2)] = d02;
        d[(2, 0)] = d02;
        d[(1, 2)] = d12;
        d[(2, 1)] = d12;
        Self::new(d)
    }

    /// Regular simplex on `k+1` vertices with all edges `edge`.
    pub fn regular(k: usize, edge: f64) -> Self {
        let m = k + 1;
        let mut d = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    d[(i, j)] = edge;
                }
            }
        }
        Self { order: k, d }
    }

    /// Simplex dimension `k` (number of points minus one).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    /// Largest entry; the natural length scale of the data.
    pub fn scale(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }

    /// Restriction to a subset of the points (face data).
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut d = DMatrix::zeros(m, m);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                d[(a, b)] = self.d[(i, j)];
            }
        }
        Self { order: m - 1, d }
    }

    /// The centered squared-distance matrix `D_ij = (d_i0^2 + d_j0^2 - d_ij^2)/2`
    /// whose positive definiteness is the Schoenberg criterion.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.order;
        let mut g = DMatrix::zeros(k, k);
        for i in 1..=k {
            for j in 1..=k {
                let a = self.d[(i, 0)];
                let b = self.d[(j, 0)];
                let c = self.d[(i, j)];
                g[(i - 1, j - 1)] = 0.5 * (a * a + b * b - c * c);
            }
        }
        g
    }
}

/// Outcome of the Schoenberg realizability test.
#[derive(Debug, Clone, Copy)]
pub struct SchoenbergReport {
    pub realizable: bool,
    pub min_eigenvalue: f64,
}

/// Euclidean realizability of a distance matrix: the centered squared-distance
/// matrix must be positive definite. Degenerate inputs come back with
/// `realizable == false` rather than an error.
pub fn schoenberg_check(dm: &DistanceMatrix) -> SchoenbergReport {
    let g = dm.gram();
    let eig = g.symmetric_eigenvalues();
    let min_eigenvalue = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = dm.scale();
    SchoenbergReport {
        realizable: min_eigenvalue > EPS_PD * scale * scale,
        min_eigenvalue,
    }
}

/// k-volume of any isometric realization of `dm`, through the Cayley-Menger
/// determinant. Returns 0 for degenerate data and `NotRealizable` when the
/// determinant has the wrong sign beyond tolerance.
pub fn cayley_menger_volume(dm: &DistanceMatrix) -> Result<f64, EuclidError> {
    let k = dm.order;
    let m = k + 2;
    let mut b = DMatrix::zeros(m, m);
    for i in 1..m {
        b[(0, i)] = 1.0;
        b[(i, 0)] = 1.0;
    }
    for i in 0..=k {
        for j in 0..=k {
            let dij = dm.get(i, j);
            b[(i + 1, j + 1)] = dij * dij;
        }
    }
    let det = b.lu().determinant();
    // vol^2 = (-1)^(k+1) det / (2^k (k!)^2)
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let mut fact = 1.0;
    for i in 1..=k {
        fact *= i as f64;
    }
    let v2 = sign * det / (2f64.powi(k as i32) * fact * fact);
    let scale = dm.scale();
    let tol = 1e-9 * scale.powi(2 * k as i32);
    if v2 < -tol {
        return Err(EuclidError::NotRealizable {
            min_eigenvalue: v2,
        });
    }
    Ok(v2.max(0.0).sqrt())
}

/// A simplex realized by explicit vertex coordinates, with its quality data.
#[derive(Debug, Clone)]
pub struct EmbeddedSimplex {
    /// Simplex dimension `k`; the ambient space has dimension >= k.
    pub dim: usize,
    pub vertices: Vec<DVector<f64>>,
    diameter: f64,
    volume: f64,
    inradius: f64,
}

impl EmbeddedSimplex {
    /// Wraps explicit vertices; fails on degenerate input.
    pub fn from_vertices(vertices: Vec<DVector<f64>>) -> Result<Self, EuclidError> {
        let dim = vertices.len() - 1;
        let mut s = Self {
            dim,
            vertices,
            diameter: 0.0,
            volume: 0.0,
            inradius: 0.0,
        };
        s.recompute()?;
        Ok(s)
    }

    fn recompute(&mut self) -> Result<(), EuclidError> {
        let dm = self.distances()?;
        self.diameter = dm.scale();
        self.volume = cayley_menger_volume(&dm)?;
        if self.volume < EPS_DEGENERATE * self.diameter.powi(self.dim as i32) {
            return Err(EuclidError::Degenerate(format!(
                "volume {:.3e} below degeneracy threshold",
                self.volume
            )));
        }
        // Inradius about the gravity center:
        // d(center, face i) = n vol_n / ((n+1) vol_{n-1}(face i)), r = min over faces.
        let k = self.dim;
        let mut r = f64::INFINITY;
        for drop in 0..=k {
            let idx: Vec<usize> = (0..=k).filter(|&i| i != drop).collect();
            let face = dm.restrict(&idx);
            let face_vol = cayley_menger_volume(&face)?;
            if face_vol <= 0.0 {
                return Err(EuclidError::Degenerate("degenerate facet".into()));
            }
            let d = k as f64 * self.volume / ((k as f64 + 1.0) * face_vol);
            r = r.min(d);
        }
        self.inradius = r;
        Ok(())
    }

    /// Edge-length data reproduced from the coordinates.
    pub fn distances(&self) -> Result<DistanceMatrix, EuclidError> {
        DistanceMatrix::from_points(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Gravity center of the vertices.
    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.vertices[0].len());
        for v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }
}

/// Radius of the largest ball centered at the gravity center and inscribed in
/// the simplex.
pub fn inradius(s: &EmbeddedSimplex) -> f64 {
    s.inradius
}

/// Thickness `t = r/diam`, the sliver-detection measure. Bounded above by
/// `1/sqrt(2n(n+1))` with equality exactly for the regular simplex.
pub fn thickness(s: &EmbeddedSimplex) -> f64 {
    s.inradius / s.diameter
}

/// Openness `omega = vol_n / diam^n`.
pub fn openness(s: &EmbeddedSimplex) -> f64 {
    s.volume / s.diameter.powi(s.dim as i32)
}

/// Upper bound `1/sqrt(2n(n+1))` attained only by regular simplices.
pub fn max_thickness(n: usize) -> f64 {
    1.0 / (2.0 * n as f64 * (n as f64 + 1.0)).sqrt()
}

/// Canonical realization of a distance matrix: `v0` at the origin, first edge
/// along axis 1, remaining vertices filled in by a lower-triangular (Cholesky)
/// factorization with positive diagonal, so the output is deterministic.
pub fn embed_simplex(dm: &DistanceMatrix) -> Result<EmbeddedSimplex, EuclidError> {
    let k = dm.order;
    let g = dm.gram();
    let scale = dm.scale();
    let eps = EPS_PD * scale * scale;
    // Hand-rolled Cholesky so we control the failure tolerance.
    let mut l = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mut sum = g[(i, j)];
            for p in 0..j {
                sum -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if sum <= eps {
                    let min_eigenvalue = g
                        .symmetric_eigenvalues()
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    return Err(EuclidError::NotRealizable { min_eigenvalue });
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    let mut vertices = Vec::with_capacity(k + 1);
    vertices.push(DVector::zeros(k));
    for i in 0..k {
        vertices.push(l.row(i).transpose());
    }
    EmbeddedSimplex::from_vertices(vertices)
}

/// Local index pair naming a codimension-2 face: the bone spanned by all
/// vertices except `i` and `j` is the intersection of the facets opposite
/// `i` and opposite `j`.
pub type BonePair = (usize, usize);

/// Interior dihedral angle of `s` along the bone opposite to the vertex pair,
/// measured in the plane orthogonal to the bone: project the two into-facet
/// directions (toward the omitted vertices) onto the bone's orthogonal
/// complement and take the arccos of their inner product.
pub fn dihedral_angle(s: &EmbeddedSimplex, bone: BonePair) -> Result<f64, EuclidError> {
    let (i, j) = bone;
    let k = s.dim;
    if i == j || i > k || j > k {
        return Err(EuclidError::Degenerate(format!(
            "bad bone pair ({i},{j}) for dimension {k}"
        )));
    }
    let bone_verts: Vec<usize> = (0..=k).filter(|&v| v != i && v != j).collect();
    let base = &s.vertices[bone_verts[0]];
    // Orthonormalize the bone directions (Gram-Schmidt), then project off.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for &v in &bone_verts[1..] {
        let mut w = &s.vertices[v] - base;
        for b in &basis {
            let c = w.dot(b);
            w -= c * b;
        }
        let n = w.norm();
        if n < 1e-13 * s.diameter {
            return Err(EuclidError::Degenerate("degenerate bone".into()));
        }
        basis.push(w / n);
    }
    let project = |v: usize| -> Result<DVector<f64>, EuclidError> {
        let mut w = &s.vertices[v] - base;
        for b in &basis {
            let c = w.dot(b);
            w -= c * b;
        }
        let n = w.norm();
        if n < 1e-13 * s.diameter {
            return Err(EuclidError::Degenerate(
                "vertex projects onto the bone".into(),
            ));
        }
        Ok(w / n)
    };
    // Facet opposite i contains vertex j and conversely.
    let u = project(j)?;
    let w = project(i)?;
    Ok(u.dot(&w).clamp(-1.0, 1.0).acos())
}

/// Unfolds simplex `b` (given by its lengths) into `a`'s coordinate space so
/// that the shared facet coincides pointwise and `b`'s free vertex lies on the
/// opposite side of the facet hyperplane from `a`'s free vertex.
///
/// `shared` pairs each facet vertex of `b` with the matching vertex of `a`;
/// exactly one vertex of each simplex is left unmatched.
pub fn unfold_adjacent(
    a: &EmbeddedSimplex,
    b_lengths: &DistanceMatrix,
    shared: &[(usize, usize)],
) -> Result<EmbeddedSimplex, EuclidError> {
    let k = a.dim;
    if b_lengths.order != k || shared.len() != k {
        return Err(EuclidError::FacetMismatch(format!(
            "expected {} shared vertices for dimension {}, got {}",
            k,
            k,
            shared.len()
        )));
    }
    let scale = a.diameter.max(b_lengths.scale());
    for &(bi, ai) in shared {
        for &(bj, aj) in shared {
            let la = (&a.vertices[ai] - &a.vertices[aj]).norm();
            let lb = b_lengths.get(bi, bj);
            if (la - lb).abs() > 1e-9 * scale {
                return Err(EuclidError::FacetMismatch(format!(
                    "edge ({bi},{bj}) of b has length {lb:.12} but the matched edge of a has {la:.12}"
                )));
            }
        }
    }
    let free_b = (0..=k)
        .find(|v| !shared.iter().any(|&(bi, _)| bi == *v))
        .ok_or_else(|| EuclidError::FacetMismatch("no free vertex in b".into()))?;
    let free_a = (0..=k)
        .find(|v| !shared.iter().any(|&(_, ai)| ai == *v))
        .ok_or_else(|| EuclidError::FacetMismatch("no free vertex in a".into()))?;

    let w0 = a.vertices[shared[0].1].clone();
    // Orthonormal basis of the facet's linear span.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for &(_, ai) in &shared[1..] {
        let mut w = &a.vertices[ai] - &w0;
        for b in &basis {
            let c = w.dot(b);
            w -= c * b;
        }
        let n = w.norm();
        if n < 1e-13 * scale {
            return Err(EuclidError::Degenerate("degenerate shared facet".into()));
        }
        basis.push(w / n);
    }
    // Distances from b's free vertex to the shared vertices fix its position
    // up to reflection across the facet hyperplane.
    let l0 = b_lengths.get(free_b, shared[0].0);
    let mut coeffs = vec![0.0; basis.len()];
    for (m, &(bi, ai)) in shared[1..].iter().enumerate() {
        let wi = &a.vertices[ai] - &w0;
        let li = b_lengths.get(free_b, bi);
        // |x - w_i|^2 - |x - w_0|^2 = l_i^2 - l_0^2 with x = w0 + sum c_m e_m + h nu
        // gives a triangular system because wi = sum_{m'<=m} <wi,e_m'> e_m'.
        let mut rhs = 0.5 * (wi.norm_squared() - li * li + l0 * l0);
        for p in 0..m {
            rhs -= coeffs[p] * wi.dot(&basis[p]);
        }
        let diag = wi.dot(&basis[m]);
        if diag.abs() < 1e-13 * scale {
            return Err(EuclidError::Degenerate("ill-conditioned facet".into()));
        }
        coeffs[m] = rhs / diag;
    }
    let mut in_plane = w0.clone();
    for (c, b) in coeffs.iter().zip(&basis) {
        in_plane += *c * b;
    }
    let h2 = l0 * l0 - (&in_plane - &w0).norm_squared();
    if h2 <= (1e-12 * scale * scale).max(0.0) {
        return Err(EuclidError::Degenerate(format!(
            "unfolded vertex height^2 = {h2:.3e}"
        )));
    }
    // Unit normal to the facet span, oriented away from a's free vertex.
    let mut nu = &a.vertices[free_a] - &w0;
    for b in &basis {
        let c = nu.dot(b);
        nu -= c * b;
    }
    let nn = nu.norm();
    if nn < 1e-13 * scale {
        return Err(EuclidError::Degenerate("a is flat across the facet".into()));
    }
    nu /= nn;
    let x = in_plane - h2.sqrt() * nu;

    let mut vertices = vec![DVector::zeros(a.vertices[0].len()); k + 1];
    for &(bi, ai) in shared {
        vertices[bi] = a.vertices[ai].clone();
    }
    vertices[free_b] = x;
    let out = EmbeddedSimplex::from_vertices(vertices)?;
    // The unfolding must be an isometry on all of b, not only the facet.
    let check = out.distances()?;
    for i in 0..=k {
        for j in 0..=k {
            if (check.get(i, j) - b_lengths.get(i, j)).abs() > 1e-9 * scale {
                return Err(EuclidError::FacetMismatch(format!(
                    "unfolding failed to reproduce edge ({i},{j})"
                )));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute-force determinant by cofactor expansion; independent oracle for
    /// the Cayley-Menger path.
    fn det_cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut acc = 0.0;
        for j in 0..n {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * m[(0, j)] * det_cofactor(&minor);
        }
        acc
    }

    #[test]
    fn equilateral_triangle_area() {
        let dm = DistanceMatrix::regular(2, 1.0);
        let v = cayley_menger_volume(&dm).unwrap();
        assert_relative_eq!(v, 3f64.sqrt() / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_triple_has_zero_area() {
        let dm = DistanceMatrix::triangle(1.0, 2.0, 1.0).unwrap();
        assert_eq!(cayley_menger_volume(&dm).unwrap(), 0.0);
    }

    #[test]
    fn regular_tetrahedron_volume_vs_cofactor_oracle() {
        let dm = DistanceMatrix::regular(3, 1.0);
        // Hand-built 5x5 bordered matrix evaluated by cofactor expansion.
        let mut b = DMatrix::zeros(5, 5);
        for i in 1..5 {
            b[(0, i)] = 1.0;
            b[(i, 0)] = 1.0;
        }
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    b[(i + 1, j + 1)] = 1.0;
                }
            }
        }
        let det = det_cofactor(&b);
        let oracle = (det / (2f64.powi(3) * 36.0)).abs().sqrt();
        assert_relative_eq!(oracle, 0.11785113019775793, epsilon = 1e-15);
        let v = cayley_menger_volume(&dm).unwrap();
        assert_relative_eq!(v, oracle, epsilon = 1e-12);
        assert_relative_eq!(v, 2f64.sqrt() / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn schoenberg_right_isoceles() {
        let dm = DistanceMatrix::triangle(1.0, 1.0, 2f64.sqrt()).unwrap();
        let rep = schoenberg_check(&dm);
        assert!(rep.realizable);
        let g = dm.gram();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schoenberg_collinear_not_realizable() {
        let dm = DistanceMatrix::triangle(1.0, 2.0, 1.0).unwrap();
        let rep = schoenberg_check(&dm);
        assert!(!rep.realizable);
        assert!(rep.min_eigenvalue.abs() < 1e-10);
    }

    #[test]
    fn embed_equilateral_canonical_vertices() {
        let dm = DistanceMatrix::regular(2, 1.0);
        let s = embed_simplex(&dm).unwrap();
        assert_relative_eq!(s.vertices[0][0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.vertices[1][0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.vertices[1][1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.vertices[2][0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(s.vertices[2][1], 3f64.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn regular_simplex_thickness_formula() {
        for n in 2..=5 {
            let dm = DistanceMatrix::regular(n, 1.0);
            let s = embed_simplex(&dm).unwrap();
            assert_relative_eq!(thickness(&s), max_thickness(n), epsilon = 1e-10);
            assert_relative_eq!(inradius(&s), max_thickness(n), epsilon = 1e-10);
        }
    }

    #[test]
    fn near_degenerate_sliver_is_thin() {
        let dm = DistanceMatrix::triangle(1.0, 1.0, 1.999).unwrap();
        let rep = schoenberg_check(&dm);
        assert!(rep.realizable);
        assert!(rep.min_eigenvalue < 0.01);
        let s = embed_simplex(&dm).unwrap();
        assert!(thickness(&s) < 0.03, "t = {}", thickness(&s));
    }

    #[test]
    fn equilateral_inradius() {
        let dm = DistanceMatrix::regular(2, 1.0);
        let s = embed_simplex(&dm).unwrap();
        assert_relative_eq!(inradius(&s), 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn right_triangle_inradius_about_centroid() {
        // Legs 1,1: centroid (1/3,1/3); distances to the three side lines are
        // 1/3, 1/3 and |1/3+1/3-1|/sqrt(2) = 1/(3 sqrt 2).
        let pts = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ];
        let s = EmbeddedSimplex::from_vertices(pts).unwrap();
        assert_relative_eq!(inradius(&s), 1.0 / (3.0 * 2f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn thickness_and_openness_scale_invariant() {
        let dm = DistanceMatrix::triangle(1.0, 1.2, 0.9).unwrap();
        let s1 = embed_simplex(&dm).unwrap();
        let scaled: Vec<DVector<f64>> = s1.vertices.iter().map(|v| 3.7 * v).collect();
        let s2 = EmbeddedSimplex::from_vertices(scaled).unwrap();
        assert_relative_eq!(thickness(&s1), thickness(&s2), epsilon = 1e-12);
        assert_relative_eq!(openness(&s1), openness(&s2), epsilon = 1e-12);
    }

    #[test]
    fn openness_of_regular_triangle() {
        let dm = DistanceMatrix::regular(2, 1.0);
        let s = embed_simplex(&dm).unwrap();
        assert_relative_eq!(openness(&s), 3f64.sqrt() / 4.0, epsilon = 1e-12);
        assert_relative_eq!(thickness(&s), 1.0 / 12f64.sqrt(), epsilon = 1e-12);
    }

    /// Both sides of the thickness/openness sandwich: with |sigma_l| the
    /// l-volume of the regular l-simplex of diameter 1,
    /// (n/(n+1)) |sigma_n|^((n-1)/n)/|sigma_{n-1}| omega^(1/n) >= t >= (n/(n+1)) omega/|sigma_{n-1}|.
    fn sandwich(s: &EmbeddedSimplex) -> (f64, f64, f64) {
        let n = s.dim;
        let reg_n = cayley_menger_volume(&DistanceMatrix::regular(n, 1.0)).unwrap();
        let reg_nm1 = cayley_menger_volume(&DistanceMatrix::regular(n - 1, 1.0)).unwrap();
        let om = openness(s);
        let f = n as f64 / (n as f64 + 1.0);
        let left = f * reg_n.powf((n as f64 - 1.0) / n as f64) / reg_nm1 * om.powf(1.0 / n as f64);
        let right = f * om / reg_nm1;
        (left, thickness(s), right)
    }

    #[test]
    fn thickness_openness_sandwich_sliver() {
        let dm = DistanceMatrix::triangle(1.0, 1.0, 1.99).unwrap();
        let s = embed_simplex(&dm).unwrap();
        let (left, t, right) = sandwich(&s);
        assert!(left >= t - 1e-12 && t >= right - 1e-12, "{left} {t} {right}");
    }

    #[test]
    fn sandwich_equality_for_regular() {
        for n in 2..=4 {
            let s = embed_simplex(&DistanceMatrix::regular(n, 1.0)).unwrap();
            let (left, t, _) = sandwich(&s);
            assert_relative_eq!(left, t, epsilon = 1e-9);
        }
    }

    #[test]
    fn dihedral_regular_tetrahedron_vs_gram_oracle() {
        let dm = DistanceMatrix::regular(3, 1.0);
        let s = embed_simplex(&dm).unwrap();
        // Oracle: unit-edge tetrahedron face normals from explicit coordinates.
        let a = &s.vertices[0];
        let b = &s.vertices[1];
        let c = &s.vertices[2];
        let d = &s.vertices[3];
        let cross = |u: &DVector<f64>, v: &DVector<f64>| {
            DVector::from_vec(vec![
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ])
        };
        // Faces meeting along edge ab: (a,b,c) and (a,b,d). With both normals
        // built from the same edge factor, their angle IS the dihedral.
        let n1 = cross(&(b - a), &(c - a));
        let n2 = cross(&(b - a), &(d - a));
        let oracle = (n1.dot(&n2) / (n1.norm() * n2.norm())).clamp(-1.0, 1.0).acos();
        assert_relative_eq!(oracle, (1f64 / 3.0).acos(), epsilon = 1e-12);
        // Bone = edge ab = all vertices except {2,3}.
        let ang = dihedral_angle(&s, (2, 3)).unwrap();
        assert_relative_eq!(ang, (1f64 / 3.0).acos(), epsilon = 1e-12);
        assert_relative_eq!(ang, 1.2309594173407747, epsilon = 1e-12);
    }

    #[test]
    fn dihedral_of_triangle_is_interior_angle() {
        let s = embed_simplex(&DistanceMatrix::regular(2, 1.0)).unwrap();
        for pair in [(0, 1), (0, 2), (1, 2)] {
            let ang = dihedral_angle(&s, pair).unwrap();
            assert_relative_eq!(ang, std::f64::consts::PI / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthoscheme_right_dihedrals() {
        // Corner simplex at the origin with axis edges: dihedral along any
        // bone containing the origin and one axis vertex is pi/2.
        let pts = vec![
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        ];
        let s = EmbeddedSimplex::from_vertices(pts).unwrap();
        // Bone spanned by {v0, v1} (the x-axis edge): omit {2,3}.
        let ang = dihedral_angle(&s, (2, 3)).unwrap();
        assert_relative_eq!(ang, std::f64::consts::PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unfold_two_equilateral_triangles_is_rhombus() {
        let a = embed_simplex(&DistanceMatrix::regular(2, 1.0)).unwrap();
        let b = DistanceMatrix::regular(2, 1.0);
        // Share b's vertices 0,1 with a's vertices 1,2 (the edge (1,2) of a).
        let out = unfold_adjacent(&a, &b, &[(0, 1), (1, 2)]).unwrap();
        // Free vertex of b is 2; rhombus closes: it must be at distance 1 from
        // both shared vertices and sqrt(3) from a's remaining vertex 0.
        let x = &out.vertices[2];
        assert_relative_eq!((x - &a.vertices[1]).norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!((x - &a.vertices[2]).norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!((x - &a.vertices[0]).norm(), 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn unfold_rejects_mismatched_facet() {
        let a = embed_simplex(&DistanceMatrix::regular(2, 1.0)).unwrap();
        let b = DistanceMatrix::regular(2, 1.1);
        assert!(matches!(
            unfold_adjacent(&a, &b, &[(0, 1), (1, 2)]),
            Err(EuclidError::FacetMismatch(_))
        ));
    }

    #[test]
    fn unfold_four_right_corners_closes_up() {
        // Four right isoceles triangles around the right-angle vertex tile a
        // flat disk: the composition of unfoldings is the identity.
        let lengths = DistanceMatrix::triangle(1.0, 1.0, 2f64.sqrt()).unwrap();
        let mut current = embed_simplex(&lengths).unwrap();
        let first = current.clone();
        // Each triangle has the right angle at vertex 0; glue leg (0,2) of the
        // current one to leg (0,1) of the next.
        for _ in 0..3 {
            current = unfold_adjacent(&current, &lengths, &[(0, 0), (1, 2)]).unwrap();
        }
        // After the fourth unfolding, vertex 2 must land on the first one's vertex 1.
        assert_relative_eq!(
            (&current.vertices[2] - &first.vertices[1]).norm(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn unfold_four_equilateral_triangles_rotates_by_deficit() {
        // Four unit equilateral triangles around a vertex leave deficit
        // 2 pi - 4 pi/3 = 2 pi/3: the final edge is rotated by -2 pi/3
        // (equivalently +4 pi/3) from the first.
        let lengths = DistanceMatrix::regular(2, 1.0);
        let mut current = embed_simplex(&lengths).unwrap();
        let first_dir = (&current.vertices[1] - &current.vertices[0]).clone();
        for _ in 0..4 {
            current = unfold_adjacent(&current, &lengths, &[(0, 0), (1, 2)]).unwrap();
        }
        let last_dir = &current.vertices[1] - &current.vertices[0];
        let cosang = first_dir.dot(&last_dir) / (first_dir.norm() * last_dir.norm());
        assert_relative_eq!(cosang, (2.0 * std::f64::consts::PI / 3.0).cos(), epsilon = 1e-10);
    }

    #[test]
    fn lemma_1_2_ellipsoid_bound() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4);
            let pts: Vec<DVector<f64>> = (0..=n)
                .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let s = match EmbeddedSimplex::from_vertices(pts) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let r = inradius(&s);
            for _ in 0..100 {
                let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let mut lin = DVector::zeros(n);
                for i in 0..n {
                    lin += u[i] * (&s.vertices[i + 1] - &s.vertices[0]);
                }
                assert!(
                    r * u.norm() <= lin.norm() + 1e-12,
                    "Lemma 1.2 violated: {} > {}",
                    r * u.norm(),
                    lin.norm()
                );
            }
        }
    }

    #[test]
    fn thickness_never_exceeds_regular_bound() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 2..=4 {
            let bound = max_thickness(n);
            let reg = embed_simplex(&DistanceMatrix::regular(n, 1.0)).unwrap();
            assert_relative_eq!(thickness(&reg), bound, epsilon = 1e-12);
            for _ in 0..20 {
                // Perturb the regular simplex; thickness must drop below the bound.
                let pts: Vec<DVector<f64>> = reg
                    .vertices
                    .iter()
                    .map(|v| v.map(|x| x + rng.gen_range(-0.05..0.05)))
                    .collect();
                let s = EmbeddedSimplex::from_vertices(pts).unwrap();
                assert!(thickness(&s) <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn embed_round_trip_random_simplices() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut done = 0;
        while done < 100 {
            let n = rng.gen_range(2..=5);
            let pts: Vec<DVector<f64>> = (0..=n)
                .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let dm = match DistanceMatrix::from_points(&pts) {
                Ok(dm) => dm,
                Err(_) => continue,
            };
            if !schoenberg_check(&dm).realizable {
                continue;
            }
            let s = match embed_simplex(&dm) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let back = s.distances().unwrap();
            let scale = dm.scale();
            for i in 0..=n {
                for j in 0..=n {
                    assert!(
                        (back.get(i, j) - dm.get(i, j)).abs() <= 1e-10 * scale,
                        "round trip failed at ({i},{j})"
                    );
                }
            }
            done += 1;
        }
    }

    #[test]
    fn random_five_points_in_four_space() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pts: Vec<DVector<f64>> = (0..5)
                .map(|_| DVector::from_fn(4, |_, _| rng.gen_range(-2.0..2.0)))
                .collect();
            let dm = DistanceMatrix::from_points(&pts).unwrap();
            let rep = schoenberg_check(&dm);
            assert!(rep.realizable);
            let s = embed_simplex(&dm).unwrap();
            let back = s.distances().unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    assert!((back.get(i, j) - dm.get(i, j)).abs() <= 1e-10 * dm.scale());
                }
            }
        }
    }
}
