//! Simplicial complexes with facet adjacency, consistent orientations,
//! edgewise (Freudenthal/Kuhn) subdivision, and bone enumeration.
//!
//! A complex stores sorted vertex tuples per dimension. Top cells carry an
//! orientation flag relative to their sorted tuple; flags are propagated by
//! breadth-first search so that adjacent cells induce opposite orientations
//! on their shared facet (non-orientable inputs are rejected).

use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ComplexError {
    #[error("invalid complex: {0}")]
    Invalid(String),
    #[error("complex is not orientable")]
    NonOrientable,
    #[error("bone {0:?} has a non-cyclic star")]
    NonManifoldStar(Vec<u32>),
    #[error("mesh parameter out of range: {0}")]
    BadRange(String),
}

/// Barycentric support of a subdivision vertex: pairs `(coarse vertex,
/// integer weight)` with weights summing to the subdivision order `E`.
pub type VertexSupport = Vec<(u32, u32)>;

#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    /// Top dimension `n`.
    pub dim: usize,
    pub n_vertices: usize,
    /// `faces[d]` lists the sorted vertex tuples of all d-simplices.
    faces: Vec<Vec<Vec<u32>>>,
    index: Vec<HashMap<Vec<u32>, usize>>,
    /// Per top cell and local facet (the one omitting local vertex `i`), the
    /// neighboring cell and its matching local facet; `None` on the boundary.
    adjacency: Vec<Vec<Option<(usize, usize)>>>,
    /// Orientation of each top cell relative to its sorted tuple.
    pub orientations: Vec<i8>,
}

fn combinations(tuple: &[u32], k: usize, out: &mut Vec<Vec<u32>>) {
    let n = tuple.len();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| tuple[i]).collect());
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Parity of the permutation sorting `tuple`; +1 for even, -1 for odd.
fn sort_parity(tuple: &[u32]) -> i8 {
    let mut t = tuple.to_vec();
    let mut parity = 1i8;
    for i in 0..t.len() {
        for j in (i + 1)..t.len() {
            if t[i] > t[j] {
                t.swap(i, j);
                parity = -parity;
            }
        }
    }
    parity
}

impl SimplicialComplex {
    /// Builds the complex from its top-dimensional cells.
    pub fn from_top_cells(n_vertices: usize, cells: &[Vec<u32>]) -> Result<Self, ComplexError> {
        if cells.is_empty() {
            return Err(ComplexError::Invalid("no cells".into()));
        }
        let dim = cells[0].len() - 1;
        let mut faces: Vec<Vec<Vec<u32>>> = vec![Vec::new(); dim + 1];
        let mut index: Vec<HashMap<Vec<u32>, usize>> = vec![HashMap::new(); dim + 1];
        for cell in cells {
            if cell.len() != dim + 1 {
                return Err(ComplexError::Invalid("mixed cell dimensions".into()));
            }
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dim + 1 {
                return Err(ComplexError::Invalid(format!(
                    "cell {cell:?} has repeated vertices"
                )));
            }
            for d in 0..=dim {
                let mut combos = Vec::new();
                combinations(&sorted, d + 1, &mut combos);
                for c in combos {
                    let len = faces[d].len();
                    index[d].entry(c.clone()).or_insert_with(|| {
                        faces[d].push(c);
                        len
                    });
                }
            }
        }
        let top: Vec<Vec<u32>> = faces[dim].clone();
        // Facet adjacency.
        let mut facet_owner: HashMap<Vec<u32>, Vec<(usize, usize)>> = HashMap::new();
        for (ci, cell) in top.iter().enumerate() {
            for omit in 0..=dim {
                let facet: Vec<u32> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != omit)
                    .map(|(_, &v)| v)
                    .collect();
                facet_owner.entry(facet).or_default().push((ci, omit));
            }
        }
        let mut adjacency = vec![vec![None; dim + 1]; top.len()];
        for (facet, owners) in &facet_owner {
            match owners.len() {
                1 => {}
                2 => {
                    let (c1, f1) = owners[0];
                    let (c2, f2) = owners[1];
                    adjacency[c1][f1] = Some((c2, f2));
                    adjacency[c2][f2] = Some((c1, f1));
                }
                _ => {
                    return Err(ComplexError::Invalid(format!(
                        "facet {facet:?} borders {} cells",
                        owners.len()
                    )))
                }
            }
        }
        // Orientation by BFS: adjacent cells induce opposite orientations on
        // the shared facet. For sorted tuples the facet omitting position i
        // carries the induced sign (-1)^i times the cell's flag.
        let mut orientations = vec![0i8; top.len()];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..top.len() {
            if orientations[start] != 0 {
                continue;
            }
            orientations[start] = 1;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                for omit in 0..=dim {
                    if let Some((nbr, nbr_omit)) = adjacency[c][omit] {
                        let sign_c = orientations[c] * if omit % 2 == 0 { 1 } else { -1 };
                        let needed = -sign_c * if nbr_omit % 2 == 0 { 1 } else { -1 };
                        if orientations[nbr] == 0 {
                            orientations[nbr] = needed;
                            queue.push_back(nbr);
                        } else if orientations[nbr] != needed {
                            return Err(ComplexError::NonOrientable);
                        }
                    }
                }
            }
        }
        Ok(Self {
            dim,
            n_vertices,
            faces,
            index,
            adjacency,
            orientations,
        })
    }

    pub fn cells(&self) -> &[Vec<u32>] {
        &self.faces[self.dim]
    }

    pub fn n_cells(&self) -> usize {
        self.faces[self.dim].len()
    }

    pub fn faces_of_dim(&self, d: usize) -> &[Vec<u32>] {
        &self.faces[d]
    }

    pub fn face_index(&self, d: usize, tuple: &[u32]) -> Option<usize> {
        self.index[d].get(tuple).copied()
    }

    pub fn edges(&self) -> &[Vec<u32>] {
        &self.faces[1]
    }

    /// Neighbor across the facet omitting local vertex `omit`.
    pub fn neighbor(&self, cell: usize, omit: usize) -> Option<(usize, usize)> {
        self.adjacency[cell][omit]
    }

    pub fn is_closed(&self) -> bool {
        self.adjacency
            .iter()
            .all(|row| row.iter().all(|a| a.is_some()))
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut chi = 0i64;
        for (d, fs) in self.faces.iter().enumerate() {
            let c = fs.len() as i64;
            chi += if d % 2 == 0 { c } else { -c };
        }
        chi
    }

    /// Boundary facets (global (n-1)-face ids with a single owner cell).
    pub fn boundary_facets(&self) -> Vec<usize> {
        let dim = self.dim;
        let mut out = Vec::new();
        for (ci, cell) in self.cells().iter().enumerate() {
            for omit in 0..=dim {
                if self.adjacency[ci][omit].is_none() {
                    let facet: Vec<u32> = cell
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != omit)
                        .map(|(_, &v)| v)
                        .collect();
                    out.push(self.index[dim - 1][&facet]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Edgewise (Freudenthal) subdivision of order `E`.
    ///
    /// Every n-cell is replaced by `E^n` sub-cells whose vertices sit on the
    /// barycentric grid of step `1/E`; shapes come from a finite catalog, so
    /// the minimum thickness over the catalog bounds the thickness of every
    /// cell. Returns the refined complex together with the barycentric
    /// support of every new vertex in terms of the coarse vertices.
    pub fn subdivide(&self, e: u32) -> Result<(SimplicialComplex, Vec<VertexSupport>), ComplexError> {
        if e == 0 {
            return Err(ComplexError::BadRange("subdivision order must be >= 1".into()));
        }
        let n = self.dim;
        let mut supports: Vec<VertexSupport> = Vec::new();
        let mut vertex_ids: HashMap<VertexSupport, u32> = HashMap::new();
        let mut intern = |support: VertexSupport| -> u32 {
            if let Some(&id) = vertex_ids.get(&support) {
                return id;
            }
            let id = supports.len() as u32;
            vertex_ids.insert(support.clone(), id);
            supports.push(support);
            id
        };
        // Keep coarse vertices first so their ids are stable.
        for v in 0..self.n_vertices as u32 {
            intern(vec![(v, e)]);
        }

        let mut new_cells: Vec<Vec<u32>> = Vec::new();
        let mut corner_anchor: Option<(Vec<u32>, i8)> = None;
        let perms = permutations(n);
        for (ci, cell) in self.cells().iter().enumerate() {
            let mut cell_count = 0usize;
            for k in grid_points(n, e) {
                'perm: for p in &perms {
                    // Walk the staircase: xi^0 = k, xi^j = xi^{j-1} + e_{p[j]}.
                    let mut xi = k.clone();
                    let mut verts = Vec::with_capacity(n + 1);
                    let mut ok = staircase_ok(&xi, e);
                    if !ok {
                        continue 'perm;
                    }
                    verts.push(xi_to_vertex(&xi, cell, e, &mut intern));
                    for &axis in p {
                        xi[axis] += 1;
                        if !staircase_ok(&xi, e) {
                            ok = false;
                            break;
                        }
                        verts.push(xi_to_vertex(&xi, cell, e, &mut intern));
                    }
                    if !ok {
                        continue 'perm;
                    }
                    cell_count += 1;
                    if ci == 0 && corner_anchor.is_none() && k.iter().all(|&v| v == 0) {
                        // The corner sub-cell inherits the parent orientation:
                        // its path tuple is a shrunken copy of the parent
                        // tuple when p is the identity permutation.
                        if p.iter().enumerate().all(|(i, &a)| a == i) {
                            let parity = sort_parity(&verts);
                            corner_anchor =
                                Some((sorted_copy(&verts), self.orientations[0] * parity));
                        }
                    }
                    new_cells.push(verts);
                }
            }
            if cell_count != (e as usize).pow(n as u32) {
                return Err(ComplexError::Invalid(format!(
                    "cell {ci} produced {cell_count} != E^n sub-cells"
                )));
            }
        }
        let mut refined = SimplicialComplex::from_top_cells(supports.len(), &new_cells)?;
        // Align the BFS orientation with the parent orientation through the
        // anchor sub-cell.
        if let Some((anchor_sorted, desired)) = corner_anchor {
            if let Some(&idx) = refined.index[n].get(&anchor_sorted) {
                if refined.orientations[idx] != desired {
                    for o in refined.orientations.iter_mut() {
                        *o = -*o;
                    }
                }
            }
        }
        Ok((refined, supports))
    }

    /// Bones: interior (n-2)-simplices, each with the cyclically ordered ring
    /// of incident n-cells and the separating (n-1)-faces between them.
    pub fn bones(&self) -> Result<Vec<Bone>, ComplexError> {
        let n = self.dim;
        assert!(n >= 2, "bones need dimension >= 2");
        let bone_dim = n - 2;
        // Incidence bone -> cells.
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.faces[bone_dim].len()];
        for (ci, cell) in self.cells().iter().enumerate() {
            let mut combos = Vec::new();
            combinations(cell, bone_dim + 1, &mut combos);
            for c in combos {
                incident[self.index[bone_dim][&c]].push(ci);
            }
        }
        // Bones on the boundary are excluded: a bone is boundary when it is
        // contained in a boundary facet.
        let mut on_boundary = vec![false; self.faces[bone_dim].len()];
        for &bf in &self.boundary_facets() {
            let facet = &self.faces[n - 1][bf];
            let mut combos = Vec::new();
            combinations(facet, bone_dim + 1, &mut combos);
            for c in combos {
                if let Some(&bi) = self.index[bone_dim].get(&c) {
                    on_boundary[bi] = true;
                }
            }
        }
        let mut bones = Vec::new();
        for (bi, cells) in incident.iter().enumerate() {
            if on_boundary[bi] || cells.is_empty() {
                continue;
            }
            let bone_verts = self.faces[bone_dim][bi].clone();
            // The two facets of a cell containing the bone.
            let bone_facets = |ci: usize| -> Vec<usize> {
                let cell = &self.cells()[ci];
                (0..=n)
                    .filter(|&omit| {
                        let v = cell[omit];
                        !bone_verts.contains(&v)
                    })
                    .collect()
            };
            let start = *cells.iter().min().unwrap();
            let facets0 = bone_facets(start);
            if facets0.len() != 2 {
                return Err(ComplexError::NonManifoldStar(bone_verts));
            }
            let mut ring_cells = vec![start];
            let mut ring_faces = Vec::new();
            let mut cur = start;
            let mut exit_local = facets0[0];
            loop {
                let cell = &self.cells()[cur];
                let facet: Vec<u32> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != exit_local)
                    .map(|(_, &v)| v)
                    .collect();
                ring_faces.push(self.index[n - 1][&facet]);
                let (nbr, nbr_omit) = match self.adjacency[cur][exit_local] {
                    Some(x) => x,
                    None => return Err(ComplexError::NonManifoldStar(bone_verts)),
                };
                if nbr == start {
                    break;
                }
                ring_cells.push(nbr);
                let nf = bone_facets(nbr);
                if nf.len() != 2 {
                    return Err(ComplexError::NonManifoldStar(bone_verts));
                }
                exit_local = if nf[0] == nbr_omit { nf[1] } else { nf[0] };
                cur = nbr;
                if ring_cells.len() > cells.len() {
                    return Err(ComplexError::NonManifoldStar(bone_verts));
                }
            }
            if ring_cells.len() != cells.len() {
                return Err(ComplexError::NonManifoldStar(bone_verts));
            }
            bones.push(Bone {
                face_id: bi,
                vertices: bone_verts,
                ring_cells,
                ring_faces,
            });
        }
        Ok(bones)
    }
}

/// An interior (n-2)-simplex with its cyclic star.
#[derive(Debug, Clone)]
pub struct Bone {
    /// Index into the complex's (n-2)-faces.
    pub face_id: usize,
    /// Sorted vertex tuple (the lexicographic order fixes the bone's
    /// reference orientation).
    pub vertices: Vec<u32>,
    /// Incident n-cells in cyclic ring order.
    pub ring_cells: Vec<usize>,
    /// `ring_faces[i]` separates `ring_cells[i]` from `ring_cells[i+1]`
    /// (global (n-1)-face ids, cyclic).
    pub ring_faces: Vec<usize>,
}

fn sorted_copy(t: &[u32]) -> Vec<u32> {
    let mut s = t.to_vec();
    s.sort_unstable();
    s
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    heap_permute(&mut cur, n, &mut out);
    out.sort();
    out
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

fn grid_points(n: usize, e: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    loop {
        out.push(cur.clone());
        let mut carry = 0;
        while carry < n {
            cur[carry] += 1;
            if cur[carry] < e {
                break;
            }
            cur[carry] = 0;
            carry += 1;
        }
        if carry == n {
            break;
        }
    }
    out
}

/// Staircase constraint for the order-simplex model: `E >= xi_1 >= ... >= xi_n >= 0`.
fn staircase_ok(xi: &[u32], e: u32) -> bool {
    let mut prev = e;
    for &v in xi {
        if v > prev {
            return false;
        }
        prev = v;
    }
    true
}

/// Converts staircase coordinates to the barycentric support of the grid
/// vertex inside `cell` and interns it.
fn xi_to_vertex<F: FnMut(VertexSupport) -> u32>(
    xi: &[u32],
    cell: &[u32],
    e: u32,
    intern: &mut F,
) -> u32 {
    let n = xi.len();
    let mut weights = vec![0u32; n + 1];
    weights[0] = e - xi[0];
    for i in 1..n {
        weights[i] = xi[i - 1] - xi[i];
    }
    weights[n] = xi[n - 1];
    let mut support: VertexSupport = cell
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0)
        .map(|(&v, &w)| (v, w))
        .collect();
    support.sort_unstable();
    intern(support)
}

/// The integer subdivision order coupled to a target mesh: `E = floor(1 +
/// beta_T D_n / rho)`, which satisfies `beta_T D_n / rho < E <= 2 beta_T D_n / rho`.
pub fn choose_e(rho: f64, beta_t: f64, d_n: f64) -> Result<u32, ComplexError> {
    let prod = beta_t * d_n;
    if !(rho > 0.0 && rho <= prod) {
        return Err(ComplexError::BadRange(format!(
            "rho = {rho} outside (0, {prod}]"
        )));
    }
    let e = (1.0 + prod / rho).floor() as u32;
    debug_assert!(prod / rho < e as f64 && (e as f64) <= 2.0 * prod / rho);
    Ok(e)
}
