use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A triangulated disk-type parameter domain with its boundary split into a
/// fixed arc (mapped onto a boundary curve) and a free arc (glued to the
/// other sheets).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    fixed_boundary: Vec<usize>,
    free_boundary: Vec<usize>,
}

/// Twice the signed area of a parameter triangle.
#[inline]
pub(crate) fn signed_area2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

impl SheetMesh {
    /// Validates and wraps a triangulation. Triangles must be positively
    /// oriented, the mesh must be a combinatorial disk, and the two chains
    /// must partition its boundary, sharing exactly their endpoints.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        fixed_boundary: Vec<usize>,
        free_boundary: Vec<usize>,
    ) -> Result<Self> {
        let mesh = Self { vertices, triangles, fixed_boundary, free_boundary };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.triangles.is_empty() {
            return Err(Error::Structural("mesh has no triangles".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Structural(format!("triangle {t} references a missing vertex")));
            }
            let a2 = signed_area2(self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]);
            if !(a2 > 0.0) {
                return Err(Error::NumericalDegeneracy { triangle: t, area: 0.5 * a2 });
            }
        }

        let edges = self.edge_counts();
        if edges.values().any(|&c| c > 2) {
            return Err(Error::Structural("non-manifold edge".into()));
        }
        let euler = nv as i64 - edges.len() as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(Error::Structural(format!("Euler characteristic {euler}, expected 1 for a disk")));
        }

        let (fx, fr) = (&self.fixed_boundary, &self.free_boundary);
        if fx.len() < 2 || fr.len() < 2 {
            return Err(Error::Structural("boundary chains need at least two vertices".into()));
        }
        for chain in [fx, fr] {
            let mut seen = vec![false; nv];
            for &v in chain.iter() {
                if v >= nv || std::mem::replace(&mut seen[v], true) {
                    return Err(Error::Structural("boundary chain is not simple".into()));
                }
            }
        }
        let same = fx[0] == fr[0] && fx[fx.len() - 1] == fr[fr.len() - 1];
        let swapped = fx[0] == fr[fr.len() - 1] && fx[fx.len() - 1] == fr[0];
        if !(same || swapped) {
            return Err(Error::Structural("boundary chains must share their endpoints".into()));
        }
        let interior_fx: Vec<usize> = fx[1..fx.len() - 1].to_vec();
        if fr[1..fr.len() - 1].iter().any(|v| interior_fx.contains(v)) {
            return Err(Error::Structural("boundary chains overlap away from their endpoints".into()));
        }

        let mut boundary: Vec<(usize, usize)> =
            edges.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
        let mut chain_edges: Vec<(usize, usize)> = fx
            .windows(2)
            .chain(fr.windows(2))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        boundary.sort_unstable();
        chain_edges.sort_unstable();
        if boundary != chain_edges {
            return Err(Error::Structural("boundary chains do not cover the mesh boundary exactly".into()));
        }
        Ok(())
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn fixed_boundary(&self) -> &[usize] {
        &self.fixed_boundary
    }

    pub fn free_boundary(&self) -> &[usize] {
        &self.free_boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_counts().len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.num_edges() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * signed_area2(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn parameter_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Undirected edges as sorted pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self.edge_counts().into_keys().collect();
        e.sort_unstable();
        e
    }

    /// True when walking the free chain in stored order keeps the mesh on the left.
    pub fn free_chain_is_ccw(&self) -> bool {
        let (a, b) = (self.free_boundary[0], self.free_boundary[1]);
        self.triangles
            .iter()
            .any(|t| (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b))
    }

    /// Reorients so the free chain runs counter-clockwise and the fixed chain
    /// runs between the same endpoints in the same order.
    pub(crate) fn canonicalized(mut self) -> Self {
        if !self.free_chain_is_ccw() {
            self.free_boundary.reverse();
        }
        if self.fixed_boundary[0] != self.free_boundary[0] {
            self.fixed_boundary.reverse();
        }
        self
    }

    /// Vertex-to-neighbouring-triangle incidence.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vt[v].push(t);
            }
        }
        vt
    }

    /// Boundary flags: true for vertices on either chain.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.vertices.len()];
        for &v in self.fixed_boundary.iter().chain(&self.free_boundary) {
            m[v] = true;
        }
        m
    }

    /// Normalized parameter arclength of each fixed-chain vertex.
    pub fn fixed_chain_fractions(&self) -> Vec<f64> {
        chain_fractions(&self.vertices, &self.fixed_boundary)
    }

    pub fn free_chain_fractions(&self) -> Vec<f64> {
        chain_fractions(&self.vertices, &self.free_boundary)
    }

    /// Returns the triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let eps = 1e-12;
        self.triangles.iter().enumerate().find_map(|(t, tri)| {
            let [a, b, c] = tri.map(|v| self.vertices[v]);
            let area = signed_area2(a, b, c);
            let l0 = signed_area2(p, b, c) / area;
            let l1 = signed_area2(a, p, c) / area;
            let l2 = 1.0 - l0 - l1;
            (l0 >= -eps && l1 >= -eps && l2 >= -eps).then_some((t, [l0, l1, l2]))
        })
    }
}

fn chain_fractions(vertices: &[[f64; 2]], chain: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; chain.len()];
    for i in 1..chain.len() {
        let (p, q) = (vertices[chain[i - 1]], vertices[chain[i]]);
        acc[i] = acc[i - 1] + ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
    }
    let total = acc[chain.len() - 1];
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

/// Polar triangulation of the closed upper half unit disk.
///
/// The free boundary is the diameter from (-1,0) to (1,0) through the
/// origin; the fixed boundary is the upper semicircle between the same
/// endpoints.
pub fn build_half_disk_mesh(radial_resolution: usize, angular_resolution: usize) -> Result<SheetMesh> {
    if radial_resolution == 0 || angular_resolution < 2 {
        return invalid("half-disk needs radial resolution >= 1 and angular resolution >= 2");
    }
    let (nr, na) = (radial_resolution, angular_resolution);
    let idx = |r: usize, j: usize| -> usize { if r == 0 { 0 } else { 1 + (r - 1) * (na + 1) + j } };

    let mut vertices = vec![[0.0, 0.0]];
    for r in 1..=nr {
        let rho = r as f64 / nr as f64;
        for j in 0..=na {
            let theta = std::f64::consts::PI * j as f64 / na as f64;
            let (s, c) = theta.sin_cos();
            // exact zeros on the diameter keep the free chain on y = 0
            let (x, y) = match j {
                0 => (rho, 0.0),
                _ if j == na => (-rho, 0.0),
                _ if 2 * j == na => (0.0, rho),
                _ => (rho * c, rho * s),
            };
            vertices.push([x, y]);
        }
    }

    let mut triangles = Vec::new();
    for j in 0..na {
        triangles.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for r in 1..nr {
        for j in 0..na {
            let (a, b, c, d) = (idx(r, j), idx(r + 1, j), idx(r + 1, j + 1), idx(r, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let free: Vec<usize> = (1..=nr)
        .rev()
        .map(|r| idx(r, na))
        .chain(std::iter::once(0))
        .chain((1..=nr).map(|r| idx(r, 0)))
        .collect();
    let fixed: Vec<usize> = (0..=na).rev().map(|j| idx(nr, j)).collect();
    SheetMesh::new(vertices, triangles, fixed, free)
}

/// Polar triangulation of the closed unit disk with the fixed arc on the
/// upper semicircle and the free arc on the lower one. `angular_resolution`
/// counts segments around the full circle and must be even.
pub fn build_disk_mesh(radial_resolution: usize, angular_resolution: usize) -> Result<SheetMesh> {
    if radial_resolution == 0 || angular_resolution < 4 || !angular_resolution.is_multiple_of(2) {
        return invalid("disk needs radial >= 1 and an even angular resolution >= 4");
    }
    let (nr, na) = (radial_resolution, angular_resolution);
    let idx = |r: usize, j: usize| -> usize { if r == 0 { 0 } else { 1 + (r - 1) * na + (j % na) } };
    let mut vertices = vec![[0.0, 0.0]];
    for r in 1..=nr {
        let rho = r as f64 / nr as f64;
        for j in 0..na {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
            let (s, c) = theta.sin_cos();
            let y = if j == 0 || 2 * j == na { 0.0 } else { rho * s };
            let x = if 4 * j == na || 4 * j == 3 * na { 0.0 } else { rho * c };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..na {
        triangles.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for r in 1..nr {
        for j in 0..na {
            let (a, b, c, d) = (idx(r, j), idx(r + 1, j), idx(r + 1, j + 1), idx(r, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let half = na / 2;
    let fixed: Vec<usize> = (0..=half).rev().map(|j| idx(nr, j)).collect();
    let free: Vec<usize> = (half..=na).map(|j| idx(nr, j)).collect();
    SheetMesh::new(vertices, triangles, fixed, free)
}
