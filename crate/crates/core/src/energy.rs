//! Dirichlet energy, area, and the weighted l1 / l2 energy algebra.
//!
//! Energies use the convention `E(a) = ∫ |a_x|^2 + |a_y|^2`, so the area of a
//! map never exceeds half its energy.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::domain::SheetMesh;
use crate::error::{invalid, Error, Result};
use crate::positions::{dot, Positions};
use crate::sparse::CsrMatrix;

/// Affine data of one triangle: parameter area and the constant partial
/// derivatives of the interpolated map.
#[derive(Clone, Debug)]
pub struct TriangleJet {
    pub area: f64,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl TriangleJet {
    pub fn dirichlet_density(&self) -> f64 {
        dot(&self.dx, &self.dx) + dot(&self.dy, &self.dy)
    }

    /// Image-area element `sqrt(|a_x|^2 |a_y|^2 - (a_x . a_y)^2)`.
    pub fn area_density(&self) -> f64 {
        let (e, f, g) = (dot(&self.dx, &self.dx), dot(&self.dx, &self.dy), dot(&self.dy, &self.dy));
        (e * g - f * f).max(0.0).sqrt()
    }
}

pub fn triangle_jet(param: [[f64; 2]; 3], values: [&[f64]; 3]) -> Option<TriangleJet> {
    let (e1, e2) = (
        [param[1][0] - param[0][0], param[1][1] - param[0][1]],
        [param[2][0] - param[0][0], param[2][1] - param[0][1]],
    );
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    if !(det > 0.0) {
        return None;
    }
    // [a1-a0, a2-a0] = [dx dy] [e1 e2]  =>  [dx dy] = [d1 d2] [e1 e2]^-1
    let inv = [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]];
    let n = values[0].len();
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    for c in 0..n {
        let d1 = values[1][c] - values[0][c];
        let d2 = values[2][c] - values[0][c];
        dx[c] = d1 * inv[0][0] + d2 * inv[1][0];
        dy[c] = d1 * inv[0][1] + d2 * inv[1][1];
    }
    Some(TriangleJet { area: 0.5 * det, dx, dy })
}

/// Jets of every triangle, failing on the first degenerate one.
pub fn sheet_jets(sheet: &SheetMesh, positions: &Positions) -> Result<Vec<TriangleJet>> {
    if positions.len() != sheet.num_vertices() {
        return invalid("positions do not match the mesh");
    }
    let v = sheet.vertices();
    sheet
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            triangle_jet(tri.map(|i| v[i]), tri.map(|i| positions.get(i)))
                .ok_or(Error::NumericalDegeneracy { triangle: t, area: sheet.triangle_area(t) })
        })
        .collect()
}

pub fn dirichlet_energy(sheet: &SheetMesh, positions: &Positions) -> Result<f64> {
    Ok(sheet_jets(sheet, positions)?.iter().map(|j| j.area * j.dirichlet_density()).sum())
}

pub fn area(sheet: &SheetMesh, positions: &Positions) -> Result<f64> {
    Ok(sheet_jets(sheet, positions)?.iter().map(|j| j.area * j.area_density()).sum())
}

/// Cotangent stiffness matrix `K` with `x^T K x` equal to the Dirichlet
/// energy of the piecewise-linear interpolant (one scalar coordinate).
pub fn cotangent_matrix(sheet: &SheetMesh) -> Result<CsrMatrix> {
    let v = sheet.vertices();
    let mut triplets = Vec::with_capacity(sheet.triangles().len() * 9);
    for (t, tri) in sheet.triangles().iter().enumerate() {
        let a2 = crate::domain::signed_area2(v[tri[0]], v[tri[1]], v[tri[2]]);
        if !(a2 > 0.0) {
            return Err(Error::NumericalDegeneracy { triangle: t, area: 0.5 * a2 });
        }
        for k in 0..3 {
            let (i, j, o) = (tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k]);
            let u = [v[i][0] - v[o][0], v[i][1] - v[o][1]];
            let w = [v[j][0] - v[o][0], v[j][1] - v[o][1]];
            // cot of the angle at o is (u.w) / |u x w|; edge weight is cot/2
            let weight = 0.5 * (u[0] * w[0] + u[1] * w[1]) / a2;
            triplets.push((i, j, -weight));
            triplets.push((j, i, -weight));
            triplets.push((i, i, weight));
            triplets.push((j, j, weight));
        }
    }
    let n = v.len();
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

/// Quadratic form `sum_c x_c^T K x_c` over all coordinates.
pub fn quadratic_form(k: &CsrMatrix, positions: &Positions) -> f64 {
    (0..positions.dim())
        .map(|c| {
            let x = positions.column(c);
            let kx = k.apply(&x);
            dot(&x, &kx)
        })
        .sum()
}

/// Per-sheet Dirichlet energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTriple(pub [f64; 3]);

impl EnergyTriple {
    pub fn new(values: [f64; 3]) -> Result<Self> {
        if values.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return invalid("energies must be finite and nonnegative");
        }
        Ok(Self(values))
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    L2,
    L1,
}

/// A point of the weight simplex (l2 mode) or a positive weight triple (l1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub mode: WeightMode,
    pub values: [f64; 3],
}

impl WeightVector {
    pub fn l2(values: [f64; 3]) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if values.iter().any(|c| !(*c >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return invalid(format!("l2 weights must be nonnegative and sum to 1, got {values:?}"));
        }
        Ok(Self { mode: WeightMode::L2, values })
    }

    pub fn l1(values: [f64; 3]) -> Result<Self> {
        if values.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return invalid(format!("l1 weights must be positive, got {values:?}"));
        }
        Ok(Self { mode: WeightMode::L1, values })
    }

    pub fn uniform_l1() -> Self {
        Self { mode: WeightMode::L1, values: [1.0; 3] }
    }

    pub fn uniform_l2() -> Self {
        Self { mode: WeightMode::L2, values: [1.0 / 3.0; 3] }
    }
}

/// `(sum_{c_i != 0} E_i^2 / c_i)^(1/2)`, or infinity when some sheet with
/// zero weight has positive energy.
pub fn l2_energy(e: &EnergyTriple, c: &WeightVector) -> f64 {
    debug_assert_eq!(c.mode, WeightMode::L2);
    let mut s = 0.0;
    for (ei, ci) in e.0.iter().zip(c.values) {
        if ci == 0.0 {
            if *ei != 0.0 {
                return f64::INFINITY;
            }
        } else {
            s += ei * ei / ci;
        }
    }
    s.sqrt()
}

pub fn l1_energy(e: &EnergyTriple, k: &WeightVector) -> Result<f64> {
    if k.values.iter().any(|v| !(*v > 0.0)) {
        return invalid("l1 weights must be positive");
    }
    Ok(e.0.iter().zip(k.values).map(|(e, k)| e * k).sum())
}

/// `c_i = E_i / sum_j E_j`.
pub fn optimal_weights(e: &EnergyTriple) -> Result<WeightVector> {
    let total = e.total();
    if !(total > 0.0) {
        return Err(Error::DegenerateMap("all sheet energies vanish".into()));
    }
    let mut c = e.0.map(|v| v / total);
    fix_sum(&mut c);
    Ok(WeightVector { mode: WeightMode::L2, values: c })
}

/// `c_i = E_i / (k_i sum_j E_j / k_j)`.
pub fn weights_l1_to_l2(k: &WeightVector, e: &EnergyTriple) -> Result<WeightVector> {
    if k.values.iter().any(|v| !(*v > 0.0)) {
        return invalid("l1 weights must be positive");
    }
    let s: f64 = e.0.iter().zip(k.values).map(|(e, k)| e / k).sum();
    if !(s > 0.0) {
        return Err(Error::DegenerateMap("all sheet energies vanish".into()));
    }
    let mut c = [0, 1, 2].map(|i| e.0[i] / (k.values[i] * s));
    fix_sum(&mut c);
    Ok(WeightVector { mode: WeightMode::L2, values: c })
}

/// Recovers l1 weights from l2 weights: `x` spans the kernel of `C - I`
/// (C has every column equal to `c`), and `k_i = E_i / x_i`, scaled so the
/// smallest entry is 1.
pub fn weights_l2_to_l1(c: &WeightVector, e: &EnergyTriple) -> Result<WeightVector> {
    if c.values.iter().chain(&e.0).any(|v| !(*v > 0.0)) {
        return invalid("weights and energies must be strictly positive");
    }
    let cm = Matrix3::from_fn(|r, _| c.values[r]) - Matrix3::identity();
    let svd = cm.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (kernel_row, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut x = [0, 1, 2].map(|j| v_t[(kernel_row, j)]);
    if x.iter().sum::<f64>() < 0.0 {
        x = x.map(|v| -v);
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateMap("kernel of C - I is not positive".into()));
    }
    let k = [0, 1, 2].map(|i| e.0[i] / x[i]);
    let kmin = k.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WeightVector { mode: WeightMode::L1, values: k.map(|v| v / kmin) })
}

// nudge the largest entry so the simplex sum is 1 up to rounding
fn fix_sum(c: &mut [f64; 3]) {
    let imax = (0..3).max_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
    let rest: f64 = (0..3).filter(|&i| i != imax).map(|i| c[i]).sum();
    c[imax] = 1.0 - rest;
}
