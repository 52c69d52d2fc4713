use serde::{Deserialize, Serialize};

use crate::domain::glued::GluedDomain;
use crate::domain::graph::BoundaryGraph;
use crate::error::{invalid, Result};

/// Discrete gluing map: per sheet, the arclength fraction on the boundary
/// arc assigned to each fixed-chain vertex, and the junction-curve parameter
/// assigned to each free-chain vertex. Both lists are strictly increasing
/// from 0 to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingData {
    fixed: [Vec<f64>; 3],
    free: [Vec<f64>; 3],
    /// Fixed-chain index of the image of (0,1) on each sheet.
    pinned: [usize; 3],
    pinned_values: [f64; 3],
}

fn strictly_increasing_unit(v: &[f64]) -> bool {
    v.len() >= 2 && v[0] == 0.0 && v[v.len() - 1] == 1.0 && v.windows(2).all(|w| w[1] > w[0])
}

impl GluingData {
    /// Constant-speed boundary parameters and the identity correspondence
    /// along the junction.
    pub fn identity(domain: &GluedDomain) -> Self {
        let m = domain.junction_len();
        let free = uniform(m);
        let fixed = domain.sheets().each_ref().map(|s| s.fixed_chain_fractions());
        let pinned = domain.sheets().each_ref().map(|s| {
            let v = s.vertices();
            let d = |i: usize| {
                let p = v[s.fixed_boundary()[i]];
                p[0] * p[0] + (p[1] - 1.0) * (p[1] - 1.0)
            };
            (0..s.fixed_boundary().len()).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap()
        });
        let pinned_values = [0, 1, 2].map(|i| fixed[i][pinned[i]]);
        Self { fixed, free: [free.clone(), free.clone(), free], pinned, pinned_values }
    }

    /// Replaces the parameters, keeping the pinned-point bookkeeping of
    /// `reference`. Only monotonicity and the endpoints are enforced here;
    /// see [`GluingData::satisfies_three_point_condition`].
    pub fn with_parameters(reference: &GluingData, fixed: [Vec<f64>; 3], free: [Vec<f64>; 3]) -> Result<Self> {
        for i in 0..3 {
            if fixed[i].len() != reference.fixed[i].len() || free[i].len() != reference.free[i].len() {
                return invalid(format!("sheet {i}: parameter count does not match the domain"));
            }
            if !strictly_increasing_unit(&fixed[i]) || !strictly_increasing_unit(&free[i]) {
                return invalid(format!("sheet {i}: parameters must increase strictly from 0 to 1"));
            }
        }
        Ok(Self { fixed, free, pinned: reference.pinned, pinned_values: reference.pinned_values })
    }

    pub fn fixed(&self, sheet: usize) -> &[f64] {
        &self.fixed[sheet]
    }

    pub fn free(&self, sheet: usize) -> &[f64] {
        &self.free[sheet]
    }

    pub fn pinned(&self, sheet: usize) -> usize {
        self.pinned[sheet]
    }

    /// Fixed-chain indices that never move: both endpoints and the image of (0,1).
    pub fn pinned_indices(&self, sheet: usize) -> [usize; 3] {
        [0, self.pinned[sheet], self.fixed[sheet].len() - 1]
    }

    pub fn satisfies_three_point_condition(&self) -> bool {
        (0..3).all(|i| {
            let f = &self.fixed[i];
            f[0] == 0.0 && f[f.len() - 1] == 1.0 && f[self.pinned[i]] == self.pinned_values[i]
        })
    }

    pub fn is_monotone(&self) -> bool {
        (0..3).all(|i| strictly_increasing_unit(&self.fixed[i]) && strictly_increasing_unit(&self.free[i]))
    }

    pub fn free_is_identity(&self) -> bool {
        let u = uniform(self.free[0].len());
        self.free.iter().all(|f| *f == u)
    }
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    v[n - 1] = 1.0;
    v
}

/// Boundary positions for every fixed-chain vertex of `sheet`: the point of
/// arc `sheet` at the vertex's (reparameterized) arclength fraction.
pub fn sample_boundary_targets(graph: &BoundaryGraph, gluing: &GluingData, sheet: usize) -> Vec<Vec<f64>> {
    gluing.fixed(sheet).iter().map(|&t| graph.eval(sheet, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::glued::{build_glued_domain, CorrespondencePolicy};
    use crate::domain::sheet::build_half_disk_mesh;
    use crate::positions::Positions;

    fn domain(r: usize, a: usize) -> GluedDomain {
        let m = build_half_disk_mesh(r, a).unwrap();
        build_glued_domain([m.clone(), m.clone(), m], &CorrespondencePolicy::Identity).unwrap()
    }

    fn unit_segments() -> BoundaryGraph {
        let s = Positions::from_rows(3, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        BoundaryGraph::new([s.clone(), s.clone(), s]).unwrap()
    }

    #[test]
    fn identity_gluing_on_segment() {
        let d = domain(1, 2);
        let g = GluingData::identity(&d);
        assert!(g.satisfies_three_point_condition());
        let t = sample_boundary_targets(&unit_segments(), &g, 0);
        assert_eq!(t, vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
    }

    #[test]
    fn squared_parameter_moves_middle_target() {
        let d = domain(1, 2);
        let id = GluingData::identity(&d);
        let sq: Vec<f64> = id.fixed(1).iter().map(|t| t * t).collect();
        let fixed = [id.fixed(0).to_vec(), sq, id.fixed(2).to_vec()];
        let free = [0, 1, 2].map(|i| id.free(i).to_vec());
        let g = GluingData::with_parameters(&id, fixed, free).unwrap();
        let t = sample_boundary_targets(&unit_segments(), &g, 1);
        assert_eq!(t[1], vec![0.25, 0.0, 0.0]);
        assert_eq!(t[0], vec![0.0, 0.0, 0.0]);
        assert_eq!(t[2], vec![1.0, 0.0, 0.0]);
        // moving the image of (0,1) breaks the three-point condition
        assert!(!g.satisfies_three_point_condition());
    }

    #[test]
    fn pinned_point_is_top_of_half_disk() {
        let d = domain(3, 8);
        let g = GluingData::identity(&d);
        let s = d.sheet(0);
        assert_eq!(s.vertices()[s.fixed_boundary()[g.pinned(0)]], [0.0, 1.0]);
        assert!((g.fixed(0)[g.pinned(0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_monotone_parameters_rejected() {
        let d = domain(2, 4);
        let id = GluingData::identity(&d);
        let mut bad = id.fixed(0).to_vec();
        bad.swap(1, 2);
        let fixed = [bad, id.fixed(1).to_vec(), id.fixed(2).to_vec()];
        let free = [0, 1, 2].map(|i| id.free(i).to_vec());
        assert!(GluingData::with_parameters(&id, fixed, free).is_err());
    }
}
