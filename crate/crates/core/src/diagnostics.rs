//! Certificates for a computed configuration: weak conformality, junction
//! conormals and their balancing, dihedral angles, and branch points.

use serde::{Deserialize, Serialize};

use crate::domain::{GluedDomain, GluingData, PiecewiseMap, SheetMesh};
use crate::energy::{area, dirichlet_energy, sheet_jets};
use crate::error::{invalid, Result};
use crate::positions::{cross3, dot, norm, normalized, sub, Positions};

const DENSITY_GUARD: f64 = 1e-30;

/// Per-triangle defect `sqrt(d1^2 + d2^2) / (|a_x|^2 + |a_y|^2 + eps)` with
/// `d1 = |a_x|^2 - |a_y|^2`, `d2 = 2 a_x . a_y`. Returns the maximum and the
/// area-weighted L2 mean.
pub fn conformality_residual(sheet: &SheetMesh, positions: &Positions) -> Result<(f64, f64)> {
    let jets = sheet_jets(sheet, positions)?;
    let (mut max, mut sum, mut total) = (0.0f64, 0.0, 0.0);
    for j in &jets {
        let (e, f, g) = (dot(&j.dx, &j.dx), dot(&j.dx, &j.dy), dot(&j.dy, &j.dy));
        let d1 = e - g;
        let d2 = 2.0 * f;
        let rho = (d1 * d1 + d2 * d2).sqrt() / (e + g + DENSITY_GUARD);
        max = max.max(rho);
        sum += j.area * rho * rho;
        total += j.area;
    }
    Ok((max, (sum / total).sqrt()))
}

/// Area-weighted average of the differentials of the triangles around each
/// vertex, as an `n x 2` matrix stored column-wise (`[d/dx, d/dy]`).
pub fn vertex_differentials(sheet: &SheetMesh, positions: &Positions) -> Result<Vec<[Vec<f64>; 2]>> {
    let jets = sheet_jets(sheet, positions)?;
    let n = positions.dim();
    let mut acc = vec![([vec![0.0; n], vec![0.0; n]], 0.0); sheet.num_vertices()];
    for (t, tri) in sheet.triangles().iter().enumerate() {
        let j = &jets[t];
        for &v in tri {
            let (d, w) = &mut acc[v];
            for c in 0..n {
                d[0][c] += j.area * j.dx[c];
                d[1][c] += j.area * j.dy[c];
            }
            *w += j.area;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(d, w)| {
            let inv = if w > 0.0 { 1.0 / w } else { 0.0 };
            d.map(|col| col.into_iter().map(|x| x * inv).collect())
        })
        .collect())
}

/// Singular values (largest first) of an `n x 2` matrix given by columns.
pub fn singular_values(d: &[Vec<f64>; 2]) -> [f64; 2] {
    let (a, b, c) = (dot(&d[0], &d[0]), dot(&d[0], &d[1]), dot(&d[1], &d[1]));
    let mean = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [(mean + disc).max(0.0).sqrt(), (mean - disc).max(0.0).sqrt()]
}

/// Tangent and sheet conormals at one interior junction node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionFrame {
    pub node: usize,
    pub tangent: Vec<f64>,
    /// `None` where the sheet's differential degenerates at the node.
    pub conormals: [Option<Vec<f64>>; 3],
}

impl JunctionFrame {
    pub fn is_complete(&self) -> bool {
        self.conormals.iter().all(Option::is_some)
    }
}

/// Junction frames at every interior junction node. The conormal of sheet
/// `i` is its vertex differential applied to the inward normal of the free
/// chain in the parameter domain, with the junction-tangent component
/// removed, normalized.
pub fn junction_frames(domain: &GluedDomain, gluing: &GluingData, map: &PiecewiseMap) -> Result<Vec<JunctionFrame>> {
    let m = domain.junction_len();
    let junction = map.junction();
    let mut per_sheet = Vec::with_capacity(3);
    for i in 0..3 {
        let sheet = domain.sheet(i);
        let diffs = vertex_differentials(sheet, map.sheet(i))?;
        let free = sheet.free_boundary();
        let params = gluing.free(i);
        let v = sheet.vertices();
        let mut dirs = Vec::with_capacity(m);
        for node in 0..m {
            if node == 0 || node + 1 == m {
                dirs.push(None);
                continue;
            }
            let s = node as f64 / (m - 1) as f64;
            let k = (0..free.len()).min_by(|&a, &b| (params[a] - s).abs().total_cmp(&(params[b] - s).abs())).unwrap();
            let (prev, next) = (v[free[k.saturating_sub(1)]], v[free[(k + 1).min(free.len() - 1)]]);
            let t = [next[0] - prev[0], next[1] - prev[1]];
            let inward = [-t[1], t[0]];
            let d = &diffs[free[k]];
            let image: Vec<f64> = (0..d[0].len()).map(|c| d[0][c] * inward[0] + d[1][c] * inward[1]).collect();
            dirs.push(Some(image));
        }
        per_sheet.push(dirs);
    }
    let mut frames = Vec::with_capacity(m.saturating_sub(2));
    for node in 1..m.saturating_sub(1) {
        let Some(tangent) = normalized(&sub(junction.get(node + 1), junction.get(node - 1))) else {
            frames.push(JunctionFrame { node, tangent: vec![0.0; junction.dim()], conormals: [None, None, None] });
            continue;
        };
        let conormals = [0, 1, 2].map(|i| {
            let raw = per_sheet[i][node].as_ref()?;
            let along = dot(raw, &tangent);
            let perp: Vec<f64> = raw.iter().zip(&tangent).map(|(r, t)| r - along * t).collect();
            if norm(&perp) <= 1e-10 * norm(raw).max(f64::MIN_POSITIVE) || norm(&perp) == 0.0 {
                return None;
            }
            normalized(&perp)
        });
        frames.push(JunctionFrame { node, tangent, conormals });
    }
    Ok(frames)
}

/// `|eta_1 + eta_2 + eta_3|` per complete frame.
pub fn balancing_residual(frames: &[JunctionFrame]) -> Vec<(usize, f64)> {
    frames
        .iter()
        .filter(|f| f.is_complete())
        .map(|f| {
            let e = f.conormals.each_ref().map(|c| c.as_ref().unwrap());
            let s: Vec<f64> = (0..e[0].len()).map(|c| e[0][c] + e[1][c] + e[2][c]).collect();
            (f.node, norm(&s))
        })
        .collect()
}

/// Three angles per complete frame. In R^3 these are the consecutive gaps
/// between the conormals ordered around the tangent (summing to 2 pi); in
/// other dimensions the pairwise angles `(eta_1,eta_2), (eta_2,eta_3),
/// (eta_3,eta_1)`.
pub fn dihedral_angles(frames: &[JunctionFrame]) -> Vec<(usize, [f64; 3])> {
    frames
        .iter()
        .filter(|f| f.is_complete())
        .map(|f| {
            let e = f.conormals.each_ref().map(|c| c.as_ref().unwrap());
            if f.tangent.len() == 3 {
                let b = cross3(&f.tangent, e[0]);
                let phi = e.map(|v| dot(v, &b).atan2(dot(v, e[0])).rem_euclid(std::f64::consts::TAU));
                let mut order = [0, 1, 2];
                order.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]));
                let tau = std::f64::consts::TAU;
                let gaps = [
                    phi[order[1]] - phi[order[0]],
                    phi[order[2]] - phi[order[1]],
                    tau - (phi[order[2]] - phi[order[0]]),
                ];
                (f.node, gaps)
            } else {
                let ang = |a: &[f64], b: &[f64]| dot(a, b).clamp(-1.0, 1.0).acos();
                (f.node, [ang(e[0], e[1]), ang(e[1], e[2]), ang(e[2], e[0])])
            }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchPoints {
    /// `(sheet, vertex)` where the differential has rank zero.
    pub rank_zero: Vec<(usize, usize)>,
    /// `(sheet, vertex)` where only the smaller singular value is small.
    pub rank_one: Vec<(usize, usize)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Scale of the differential on a sheet: median image edge length over
/// median parameter edge length.
fn differential_scale(sheet: &SheetMesh, positions: &Positions) -> f64 {
    let edges = sheet.edges();
    let v = sheet.vertices();
    let img = median(edges.iter().map(|&(a, b)| crate::positions::dist(positions.get(a), positions.get(b))).collect());
    let par = median(edges.iter().map(|&(a, b)| ((v[a][0] - v[b][0]).powi(2) + (v[a][1] - v[b][1]).powi(2)).sqrt()).collect());
    img / par
}

/// Flags vertices whose averaged differential is (nearly) rank deficient
/// relative to `threshold` times the sheet's differential scale.
pub fn detect_branch_points(domain: &GluedDomain, map: &PiecewiseMap, threshold: f64) -> Result<BranchPoints> {
    if !(threshold > 0.0) {
        return invalid("branch threshold must be positive");
    }
    let mut out = BranchPoints::default();
    for i in 0..3 {
        let sheet = domain.sheet(i);
        let scale = differential_scale(sheet, map.sheet(i));
        let bound = threshold * scale;
        for (v, d) in vertex_differentials(sheet, map.sheet(i))?.iter().enumerate() {
            let [s1, s2] = singular_values(d);
            if s1 <= bound {
                out.rank_zero.push((i, v));
            } else if s2 <= bound {
                out.rank_one.push((i, v));
            }
        }
    }
    Ok(out)
}

/// Rank-zero test at a single vertex, with the same scaling as
/// [`detect_branch_points`]. Meaningful only where the vertex has a full
/// fan of triangles, e.g. on a reflected mesh.
pub fn is_branch_vertex(sheet: &SheetMesh, positions: &Positions, vertex: usize, threshold: f64) -> Result<bool> {
    if !(threshold > 0.0) {
        return invalid("branch threshold must be positive");
    }
    if vertex >= sheet.num_vertices() {
        return invalid("vertex out of range");
    }
    let d = &vertex_differentials(sheet, positions)?[vertex];
    Ok(singular_values(d)[0] <= threshold * differential_scale(sheet, positions))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalityStats {
    pub max: f64,
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub energies: [f64; 3],
    pub areas: [f64; 3],
    /// `E/2 - A` per sheet.
    pub gap: [f64; 3],
    pub conformality: [ConformalityStats; 3],
    /// `(junction node, |sum of conormals|)`.
    pub balancing: Vec<(usize, f64)>,
    /// `(junction node, angles in radians)`.
    pub angles: Vec<(usize, [f64; 3])>,
    pub branch_points: BranchPoints,
    /// Junction nodes skipped because some conormal degenerated.
    pub skipped_nodes: Vec<usize>,
    pub matching_residual: f64,
}

impl DiagnosticsReport {
    pub fn max_balancing(&self) -> f64 {
        self.balancing.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    /// Largest deviation of any angle from 120 degrees, in degrees.
    pub fn max_angle_error_degrees(&self) -> f64 {
        self.angles
            .iter()
            .flat_map(|(_, a)| a.iter())
            .map(|a| (a.to_degrees() - 120.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `gap / energy` over sheets with positive energy.
    pub fn max_relative_gap(&self) -> f64 {
        (0..3).filter(|&i| self.energies[i] > 0.0).map(|i| self.gap[i] / self.energies[i]).fold(0.0, f64::max)
    }
}

/// Thresholds used when a report is checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub angle_degrees: f64,
    pub balancing: f64,
    pub relative_gap: f64,
    pub matching: f64,
    pub branch: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { angle_degrees: 1.0, balancing: 0.02, relative_gap: 0.02, matching: 1e-12, branch: 1e-6 }
    }
}

impl Thresholds {
    /// Names of the failed checks; empty when everything passes.
    pub fn failures(&self, r: &DiagnosticsReport) -> Vec<String> {
        let mut out = Vec::new();
        if r.max_angle_error_degrees() > self.angle_degrees {
            out.push(format!("angles: max deviation {:.4} deg > {}", r.max_angle_error_degrees(), self.angle_degrees));
        }
        if r.max_balancing() > self.balancing {
            out.push(format!("balancing: {:.3e} > {}", r.max_balancing(), self.balancing));
        }
        if r.max_relative_gap() > self.relative_gap {
            out.push(format!("energy-area gap: {:.3e} > {}", r.max_relative_gap(), self.relative_gap));
        }
        if r.matching_residual > self.matching {
            out.push(format!("matching: {:.3e} > {}", r.matching_residual, self.matching));
        }
        if !r.skipped_nodes.is_empty() {
            out.push(format!("{} junction nodes have degenerate conormals", r.skipped_nodes.len()));
        }
        if !r.branch_points.rank_zero.is_empty() {
            out.push(format!("{} branch points", r.branch_points.rank_zero.len()));
        }
        out
    }
}

pub fn build_report(domain: &GluedDomain, gluing: &GluingData, map: &PiecewiseMap, branch_threshold: f64) -> Result<DiagnosticsReport> {
    let mut energies = [0.0; 3];
    let mut areas = [0.0; 3];
    let mut conformality = [0, 1, 2].map(|_| ConformalityStats { max: 0.0, l2: 0.0 });
    for i in 0..3 {
        energies[i] = dirichlet_energy(domain.sheet(i), map.sheet(i))?;
        areas[i] = area(domain.sheet(i), map.sheet(i))?;
        let (max, l2) = conformality_residual(domain.sheet(i), map.sheet(i))?;
        conformality[i] = ConformalityStats { max, l2 };
    }
    let frames = junction_frames(domain, gluing, map)?;
    Ok(DiagnosticsReport {
        energies,
        areas,
        gap: [0, 1, 2].map(|i| 0.5 * energies[i] - areas[i]),
        conformality,
        balancing: balancing_residual(&frames),
        angles: dihedral_angles(&frames),
        branch_points: detect_branch_points(domain, map, branch_threshold)?,
        skipped_nodes: frames.iter().filter(|f| !f.is_complete()).map(|f| f.node).collect(),
        matching_residual: map.matching_residual(domain, gluing),
    })
}
