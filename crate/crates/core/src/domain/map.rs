use crate::domain::glued::GluedDomain;
use crate::domain::gluing::GluingData;
use crate::error::{invalid, Result};
use crate::positions::{lerp, Positions};

/// Per-sheet vertex positions whose free-boundary entries are always derived
/// from the single shared junction polyline, so the three sheets agree along
/// the junction by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseMap {
    junction: Positions,
    sheets: [Positions; 3],
}

/// Point of the junction polyline at parameter `s` (node `m` sits at `m/(M-1)`).
pub fn junction_point(junction: &Positions, s: f64) -> Vec<f64> {
    let m = junction.len();
    let x = s.clamp(0.0, 1.0) * (m - 1) as f64;
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        return junction.get(r as usize).to_vec();
    }
    let k = (x.floor() as usize).min(m - 2);
    lerp(junction.get(k), junction.get(k + 1), x - k as f64)
}

/// Junction segment and interpolation weight for parameter `s`: the point is
/// `(1-w) J[k] + w J[k+1]`; exact nodes return `w = 0`.
pub(crate) fn junction_stencil(m: usize, s: f64) -> (usize, f64) {
    let x = s.clamp(0.0, 1.0) * (m - 1) as f64;
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        let k = r as usize;
        return if k == m - 1 { (m - 2, 1.0) } else { (k, 0.0) };
    }
    let k = (x.floor() as usize).min(m - 2);
    (k, x - k as f64)
}

impl PiecewiseMap {
    /// Builds a map from junction positions and per-sheet positions; the
    /// free-chain entries of `sheets` are overwritten from the junction.
    pub fn new(domain: &GluedDomain, gluing: &GluingData, junction: Positions, mut sheets: [Positions; 3]) -> Result<Self> {
        let dim = junction.dim();
        if junction.len() != domain.junction_len() {
            return invalid("junction length does not match the domain");
        }
        for (i, s) in sheets.iter_mut().enumerate() {
            let mesh = domain.sheet(i);
            if s.dim() != dim || s.len() != mesh.num_vertices() {
                return invalid(format!("sheet {i} positions have the wrong shape"));
            }
            for (v, &param) in mesh.free_boundary().iter().zip(gluing.free(i)) {
                s.set(*v, &junction_point(&junction, param));
            }
        }
        Ok(Self { junction, sheets })
    }

    /// Evaluates `f(sheet, parameter point)` at every vertex. Junction nodes
    /// take the value of sheet 0 at its free-chain vertices.
    pub fn from_fn(domain: &GluedDomain, gluing: &GluingData, dim: usize, f: impl Fn(usize, [f64; 2]) -> Vec<f64>) -> Self {
        let s0 = domain.sheet(0);
        let junction = Positions::from_rows(dim, s0.free_boundary().iter().map(|&v| f(0, s0.vertices()[v])));
        let sheets = [0, 1, 2].map(|i| Positions::from_rows(dim, domain.sheet(i).vertices().iter().map(|&p| f(i, p))));
        Self::new(domain, gluing, junction, sheets).expect("shapes derived from the domain")
    }

    pub fn dim(&self) -> usize {
        self.junction.dim()
    }

    pub fn junction(&self) -> &Positions {
        &self.junction
    }

    pub fn sheet(&self, i: usize) -> &Positions {
        &self.sheets[i]
    }

    pub fn sheets(&self) -> &[Positions; 3] {
        &self.sheets
    }

    /// Largest disagreement between a sheet's free-chain vertex and the
    /// junction point it is glued to. Zero by construction.
    pub fn matching_residual(&self, domain: &GluedDomain, gluing: &GluingData) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for (v, &s) in domain.sheet(i).free_boundary().iter().zip(gluing.free(i)) {
                let d = crate::positions::dist(self.sheets[i].get(*v), &junction_point(&self.junction, s));
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replaces every position by `f(position)`, e.g. a rigid motion.
    pub fn transformed(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self { junction: self.junction.map(&f), sheets: self.sheets.each_ref().map(|s| s.map(&f)) }
    }

    /// `(1-t) self + t other`, vertexwise.
    pub fn interpolate(&self, other: &PiecewiseMap, t: f64) -> Self {
        let mix = |a: &Positions, b: &Positions| {
            Positions::from_flat(a.dim(), a.as_flat().iter().zip(b.as_flat()).map(|(x, y)| (1.0 - t) * x + t * y).collect())
        };
        Self {
            junction: mix(&self.junction, &other.junction),
            sheets: [0, 1, 2].map(|i| mix(&self.sheets[i], &other.sheets[i])),
        }
    }

    /// Vertexwise difference `self - other` (not itself boundary-feasible).
    pub fn difference(&self, other: &PiecewiseMap) -> Self {
        let diff = |a: &Positions, b: &Positions| {
            Positions::from_flat(a.dim(), a.as_flat().iter().zip(b.as_flat()).map(|(x, y)| x - y).collect())
        };
        Self {
            junction: diff(&self.junction, &other.junction),
            sheets: [0, 1, 2].map(|i| diff(&self.sheets[i], &other.sheets[i])),
        }
    }

    pub fn same_shape(&self, other: &PiecewiseMap) -> bool {
        self.dim() == other.dim()
            && self.junction.len() == other.junction.len()
            && (0..3).all(|i| self.sheets[i].len() == other.sheets[i].len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::glued::{build_glued_domain, CorrespondencePolicy};
    use crate::domain::sheet::build_half_disk_mesh;

    #[test]
    fn junction_point_hits_nodes_exactly() {
        let j = Positions::from_rows(1, [[0.1], [0.7], [0.3], [0.9]]);
        for m in 0..4 {
            assert_eq!(junction_point(&j, m as f64 / 3.0), vec![j.get(m)[0]]);
        }
        assert!((junction_point(&j, 0.5)[0] - 0.5).abs() < 1e-15);
        assert_eq!(junction_stencil(4, 1.0), (2, 1.0));
        assert_eq!(junction_stencil(4, 1.0 / 3.0), (1, 0.0));
    }

    #[test]
    fn matching_holds_by_construction() {
        let m = build_half_disk_mesh(3, 6).unwrap();
        let d = build_glued_domain([m.clone(), m.clone(), m], &CorrespondencePolicy::Identity).unwrap();
        let g = GluingData::identity(&d);
        // sheets disagree on the diameter; the shared junction wins
        let map = PiecewiseMap::from_fn(&d, &g, 2, |i, p| vec![p[0] + i as f64, p[1] * p[1]]);
        assert_eq!(map.matching_residual(&d, &g), 0.0);
        for i in 0..3 {
            for (k, &v) in d.sheet(i).free_boundary().iter().enumerate() {
                assert_eq!(map.sheet(i).get(v), map.junction().get(k));
            }
        }
    }
}
