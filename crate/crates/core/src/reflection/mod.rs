//! Multi-sheeted reflection across the junction, its discrete harmonicity
//! certificate, and Björling continuation of junction curves.

mod bjorling;
mod chebyshev;

pub use bjorling::{
    balanced_normal_triple, bjorling_extend, AnalyticCurveData, BjorlingOptions, BjorlingPatch, Half, NormalKind,
};
pub use chebyshev::Chebyshev;

use serde::Serialize;

use crate::domain::{GluedDomain, GluingData, PiecewiseMap, SheetMesh};
use crate::energy::cotangent_matrix;
use crate::error::{invalid, Result};
use crate::positions::{dist, norm, Positions};

/// Three maps on one half-disk mesh whose diameter (the free chain) lies on
/// the x-axis; they agree on the diameter.
#[derive(Clone, Debug)]
pub struct HalfDiskTriple {
    mesh: SheetMesh,
    sheets: [Positions; 3],
}

impl HalfDiskTriple {
    pub fn new(mesh: SheetMesh, sheets: [Positions; 3]) -> Result<Self> {
        let dim = sheets[0].dim();
        for (i, s) in sheets.iter().enumerate() {
            if s.dim() != dim || s.len() != mesh.num_vertices() {
                return invalid(format!("sheet {i} positions have the wrong shape"));
            }
        }
        let mut on_axis = vec![false; mesh.num_vertices()];
        for &v in mesh.free_boundary() {
            on_axis[v] = true;
        }
        for (v, p) in mesh.vertices().iter().enumerate() {
            if on_axis[v] != (p[1] == 0.0) || p[1] < 0.0 {
                return invalid("mesh is not a half-disk over the x-axis with its diameter as free chain");
            }
        }
        for &v in mesh.free_boundary() {
            let scale = 1.0 + norm(sheets[0].get(v));
            if dist(sheets[0].get(v), sheets[1].get(v)) > 1e-12 * scale || dist(sheets[0].get(v), sheets[2].get(v)) > 1e-12 * scale {
                return invalid("sheets do not agree along the diameter");
            }
        }
        Ok(Self { mesh, sheets })
    }

    /// The triple of a solution whose sheets share one half-disk mesh and
    /// are glued by the identity.
    pub fn from_map(domain: &GluedDomain, gluing: &GluingData, map: &PiecewiseMap) -> Result<Self> {
        let mesh = domain.sheet(0);
        if (1..3).any(|i| domain.sheet(i).vertices() != mesh.vertices() || domain.sheet(i).triangles() != mesh.triangles()) {
            return invalid("sheets do not share one mesh");
        }
        if !gluing.free_is_identity() {
            return invalid("reflection needs the identity correspondence along the junction");
        }
        Self::new(mesh.clone(), map.sheets().clone())
    }

    pub fn mesh(&self) -> &SheetMesh {
        &self.mesh
    }

    pub fn sheet(&self, i: usize) -> &Positions {
        &self.sheets[i]
    }
}

/// A half-disk mesh together with its mirror image below the x-axis.
#[derive(Clone, Debug)]
pub struct DoubledMesh {
    pub mesh: SheetMesh,
    /// Half-disk vertex each doubled vertex comes from.
    pub source: Vec<usize>,
    pub lower: Vec<bool>,
    pub on_axis: Vec<bool>,
}

/// Mirrors the half disk across the x-axis. The first `n` vertices are the
/// original ones; off-axis vertices get mirror copies appended.
pub fn double_mesh(half: &SheetMesh) -> Result<DoubledMesh> {
    let n = half.num_vertices();
    let v = half.vertices();
    let mut on_axis_half = vec![false; n];
    for &i in half.free_boundary() {
        on_axis_half[i] = true;
    }
    let mut vertices = v.to_vec();
    let mut source: Vec<usize> = (0..n).collect();
    let mut mirror = vec![0usize; n];
    for i in 0..n {
        if on_axis_half[i] {
            mirror[i] = i;
        } else {
            mirror[i] = vertices.len();
            vertices.push([v[i][0], -v[i][1]]);
            source.push(i);
        }
    }
    let mut triangles = half.triangles().to_vec();
    triangles.extend(half.triangles().iter().map(|t| [mirror[t[0]], mirror[t[2]], mirror[t[1]]]));
    let fixed = half.fixed_boundary().to_vec();
    let lower_chain: Vec<usize> = fixed.iter().map(|&i| mirror[i]).collect();
    let mesh = SheetMesh::new(vertices, triangles, fixed, lower_chain)?;
    let lower = (0..source.len()).map(|i| i >= n).collect();
    let on_axis = (0..source.len()).map(|i| i < n && on_axis_half[i]).collect();
    Ok(DoubledMesh { mesh, source, lower, on_axis })
}

/// `U_s`: sheet `s` above the axis and `-f_s + (2/3) sum_i f_i` at the
/// mirror image below it.
pub fn multi_sheeted_reflect(triple: &HalfDiskTriple, sheet: usize) -> Result<(DoubledMesh, Positions)> {
    if sheet > 2 {
        return invalid("sheet index must be 0, 1 or 2");
    }
    let doubled = double_mesh(&triple.mesh)?;
    let dim = triple.sheets[0].dim();
    let values = Positions::from_rows(
        dim,
        (0..doubled.source.len()).map(|i| {
            let src = doubled.source[i];
            let own = triple.sheets[sheet].get(src);
            if !doubled.lower[i] {
                return own.to_vec();
            }
            (0..dim)
                .map(|c| -own[c] + (2.0 / 3.0) * (0..3).map(|k| triple.sheets[k].get(src)[c]).sum::<f64>())
                .collect()
        }),
    );
    Ok((doubled, values))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicCertificate {
    /// Largest normalized residual over all interior vertices.
    pub max_residual: f64,
    pub max_on_junction: f64,
    pub max_off_junction: f64,
    pub worst_vertex: Option<usize>,
}

/// Per-vertex `|(K U)_v|` divided by the mean image length of the edges at
/// `v`; `None` on the outer boundary.
pub fn harmonic_residual_profile(doubled: &DoubledMesh, u: &Positions) -> Result<Vec<Option<f64>>> {
    if u.len() != doubled.mesh.num_vertices() {
        return invalid("values do not match the doubled mesh");
    }
    let k = cotangent_matrix(&doubled.mesh)?;
    let mask = doubled.mesh.boundary_mask();
    let mut ku = Positions::zeros(u.dim(), u.len());
    for c in 0..u.dim() {
        ku.set_column(c, &k.apply(&u.column(c)));
    }
    Ok((0..u.len())
        .map(|v| {
            if mask[v] {
                return None;
            }
            let (mut len, mut count) = (0.0, 0usize);
            for (w, _) in k.row(v) {
                if w != v {
                    len += dist(u.get(v), u.get(w));
                    count += 1;
                }
            }
            let scale = if count > 0 { len / count as f64 } else { 0.0 };
            let r = norm(ku.get(v));
            Some(if scale > 0.0 { r / scale } else { r })
        })
        .collect())
}

/// Largest normalized cotangent-Laplacian residual over the interior of
/// the doubled disk, junction vertices included.
pub fn harmonic_residual(doubled: &DoubledMesh, u: &Positions) -> Result<f64> {
    Ok(harmonic_certificate(doubled, u)?.max_residual)
}

pub fn harmonic_certificate(doubled: &DoubledMesh, u: &Positions) -> Result<HarmonicCertificate> {
    let profile = harmonic_residual_profile(doubled, u)?;
    let mut cert = HarmonicCertificate { max_residual: 0.0, max_on_junction: 0.0, max_off_junction: 0.0, worst_vertex: None };
    for (v, r) in profile.iter().enumerate() {
        let Some(r) = *r else { continue };
        if doubled.on_axis[v] {
            cert.max_on_junction = cert.max_on_junction.max(r);
        } else {
            cert.max_off_junction = cert.max_off_junction.max(r);
        }
        if cert.worst_vertex.is_none() || r > cert.max_residual {
            cert.max_residual = r;
            cert.worst_vertex = Some(v);
        }
    }
    Ok(cert)
}
