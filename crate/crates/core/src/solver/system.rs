//! Weighted cotangent assembly over the glued complex and the constrained
//! harmonic solve.

use crate::domain::{junction_stencil, GluedDomain, GluingData, PiecewiseMap, BoundaryGraph, sample_boundary_targets};
use crate::energy::{cotangent_matrix, quadratic_form, EnergyTriple, WeightVector};
use crate::error::{invalid, Result};
use crate::positions::{dot, Positions};
use crate::sparse::{conjugate_gradient, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dof {
    Unknown(usize),
    Known(usize),
}

/// How a sheet vertex depends on the global unknowns and known values.
pub type Link = Vec<(Dof, f64)>;

/// The symmetric positive-definite system `A u = b` whose solution is the
/// minimizer of `sum_i k_i E(a_i)` under matching and boundary conditions.
#[derive(Clone, Debug)]
pub struct WeightedSystem {
    pub matrix: CsrMatrix,
    /// One column per ambient coordinate.
    pub rhs: Positions,
    links: [Vec<Link>; 3],
    known: Positions,
    junction_len: usize,
}

impl WeightedSystem {
    pub fn num_unknowns(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.known.dim()
    }

    /// Unknown index of interior junction node `m` (nodes 0 and M-1 are the
    /// fixed endpoints).
    pub fn junction_unknown(&self, m: usize) -> Option<usize> {
        (m > 0 && m + 1 < self.junction_len).then(|| m - 1)
    }

    pub fn link(&self, sheet: usize, vertex: usize) -> &Link {
        &self.links[sheet][vertex]
    }

    fn eval_link(&self, link: &Link, unknowns: &Positions) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for &(dof, w) in link {
            let src = match dof {
                Dof::Unknown(u) => unknowns.get(u),
                Dof::Known(k) => self.known.get(k),
            };
            for c in 0..p.len() {
                p[c] += w * src[c];
            }
        }
        p
    }

    /// Reconstructs the glued map from a vector of unknowns.
    pub fn map_from_unknowns(&self, domain: &GluedDomain, gluing: &GluingData, unknowns: &Positions) -> PiecewiseMap {
        let dim = self.dim();
        let junction = Positions::from_rows(
            dim,
            (0..self.junction_len).map(|m| match self.junction_unknown(m) {
                Some(u) => unknowns.get(u).to_vec(),
                None if m == 0 => self.known.get(0).to_vec(),
                None => self.known.get(1).to_vec(),
            }),
        );
        let sheets = [0, 1, 2].map(|i| Positions::from_rows(dim, self.links[i].iter().map(|l| self.eval_link(l, unknowns))));
        PiecewiseMap::new(domain, gluing, junction, sheets).expect("links derived from the domain")
    }

    /// Reads the unknowns back out of a map (inverse of `map_from_unknowns`
    /// on feasible maps).
    pub fn unknowns_from_map(&self, map: &PiecewiseMap) -> Positions {
        let mut u = Positions::zeros(self.dim(), self.num_unknowns());
        for m in 0..self.junction_len {
            if let Some(k) = self.junction_unknown(m) {
                u.set(k, map.junction().get(m));
            }
        }
        for i in 0..3 {
            for (v, link) in self.links[i].iter().enumerate() {
                if let [(Dof::Unknown(k), w)] = link.as_slice() {
                    if *w == 1.0 && *k >= self.junction_len.saturating_sub(2) {
                        u.set(*k, map.sheet(i).get(v));
                    }
                }
            }
        }
        u
    }

    /// Solves each coordinate by preconditioned conjugate gradients from
    /// `initial` (zero when absent). Returns the unknowns, the largest
    /// relative residual and the total iteration count.
    pub fn solve(&self, initial: Option<&Positions>, tol: f64) -> Result<(Positions, f64, usize)> {
        let n = self.num_unknowns();
        let dim = self.dim();
        let mut unknowns = match initial {
            Some(u) if u.len() == n && u.dim() == dim => u.clone(),
            Some(_) => return invalid("initial guess has the wrong shape"),
            None => Positions::zeros(dim, n),
        };
        let mut residual = 0.0f64;
        let mut iterations = 0;
        for c in 0..dim {
            let b = self.rhs.column(c);
            let mut x = unknowns.column(c);
            let rep = conjugate_gradient(&self.matrix, &b, &mut x, tol, 20 * n + 100)?;
            residual = residual.max(rep.relative_residual);
            iterations += rep.iterations;
            unknowns.set_column(c, &x);
        }
        Ok((unknowns, residual, iterations))
    }

    /// Componentwise `A u - b`, one row per unknown.
    pub fn residual(&self, unknowns: &Positions) -> Positions {
        let mut r = Positions::zeros(self.dim(), self.num_unknowns());
        for c in 0..self.dim() {
            let au = self.matrix.apply(&unknowns.column(c));
            let b = self.rhs.column(c);
            r.set_column(c, &au.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        }
        r
    }
}

/// Builds the weighted system for fixed gluing, weights and boundary targets.
/// `targets[i][j]` is the position of fixed-chain vertex `j` of sheet `i`.
pub fn assemble_weighted_system(
    domain: &GluedDomain,
    gluing: &GluingData,
    k: &WeightVector,
    targets: &[Vec<Vec<f64>>; 3],
) -> Result<WeightedSystem> {
    let stiffness = stiffness_matrices(domain)?;
    assemble_with(domain, &stiffness, gluing, k, targets)
}

pub fn stiffness_matrices(domain: &GluedDomain) -> Result<[CsrMatrix; 3]> {
    Ok([cotangent_matrix(domain.sheet(0))?, cotangent_matrix(domain.sheet(1))?, cotangent_matrix(domain.sheet(2))?])
}

pub(crate) fn assemble_with(
    domain: &GluedDomain,
    stiffness: &[CsrMatrix; 3],
    gluing: &GluingData,
    k: &WeightVector,
    targets: &[Vec<Vec<f64>>; 3],
) -> Result<WeightedSystem> {
    if k.values.iter().any(|v| !(*v > 0.0)) {
        return invalid("l1 weights must be positive");
    }
    let m = domain.junction_len();
    let dim = targets[0][0].len();
    for (i, t) in targets.iter().enumerate() {
        if t.len() != domain.sheet(i).fixed_boundary().len() || t.iter().any(|p| p.len() != dim) {
            return invalid(format!("boundary targets of sheet {i} have the wrong shape"));
        }
    }

    // known table: q-, q+, then every fixed-chain target
    let mut known_rows: Vec<Vec<f64>> = vec![targets[0][0].clone(), targets[0][targets[0].len() - 1].clone()];
    let node_dof = |node: usize| -> Dof {
        if node == 0 {
            Dof::Known(0)
        } else if node == m - 1 {
            Dof::Known(1)
        } else {
            Dof::Unknown(node - 1)
        }
    };
    let mut next_unknown = m - 2;
    let mut links: [Vec<Link>; 3] = Default::default();
    for i in 0..3 {
        let sheet = domain.sheet(i);
        let mut l: Vec<Option<Link>> = vec![None; sheet.num_vertices()];
        let fixed = sheet.fixed_boundary();
        for (j, &v) in fixed.iter().enumerate() {
            if j == 0 || j + 1 == fixed.len() {
                continue;
            }
            known_rows.push(targets[i][j].clone());
            l[v] = Some(vec![(Dof::Known(known_rows.len() - 1), 1.0)]);
        }
        for (&v, &s) in sheet.free_boundary().iter().zip(gluing.free(i)) {
            let (node, w) = junction_stencil(m, s);
            let mut link = Vec::with_capacity(2);
            if w < 1.0 {
                link.push((node_dof(node), 1.0 - w));
            }
            if w > 0.0 {
                link.push((node_dof(node + 1), w));
            }
            l[v] = Some(link);
        }
        links[i] = l
            .into_iter()
            .map(|x| {
                x.unwrap_or_else(|| {
                    next_unknown += 1;
                    vec![(Dof::Unknown(next_unknown - 1), 1.0)]
                })
            })
            .collect();
    }
    let n = next_unknown;
    let known = Positions::from_rows(dim, known_rows);

    let mut triplets = Vec::new();
    let mut rhs = Positions::zeros(dim, n);
    for i in 0..3 {
        let ki = k.values[i];
        for a in 0..domain.sheet(i).num_vertices() {
            for (b, kab) in stiffness[i].row(a) {
                for &(pa, ca) in &links[i][a] {
                    let Dof::Unknown(p) = pa else { continue };
                    for &(pb, cb) in &links[i][b] {
                        let coef = ki * kab * ca * cb;
                        match pb {
                            Dof::Unknown(q) => triplets.push((p, q, coef)),
                            Dof::Known(q) => {
                                let kv = known.get(q);
                                let r = rhs.get_mut(p);
                                for c in 0..dim {
                                    r[c] -= coef * kv[c];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(WeightedSystem { matrix: CsrMatrix::from_triplets(n, n, triplets), rhs, links, known, junction_len: m })
}

/// Output of one constrained harmonic solve.
#[derive(Clone, Debug)]
pub struct HarmonicSolve {
    pub map: PiecewiseMap,
    pub energies: EnergyTriple,
    /// Largest relative linear-solve residual over the coordinates.
    pub residual: f64,
    pub iterations: usize,
    pub unknowns: Positions,
}

/// A glued domain and boundary graph with cached per-sheet stiffness.
#[derive(Clone, Debug)]
pub struct HarmonicProblem<'a> {
    pub domain: &'a GluedDomain,
    pub graph: &'a BoundaryGraph,
    stiffness: [CsrMatrix; 3],
}

impl<'a> HarmonicProblem<'a> {
    pub fn new(domain: &'a GluedDomain, graph: &'a BoundaryGraph) -> Result<Self> {
        Ok(Self { domain, graph, stiffness: stiffness_matrices(domain)? })
    }

    pub fn stiffness(&self, sheet: usize) -> &CsrMatrix {
        &self.stiffness[sheet]
    }

    pub fn targets(&self, gluing: &GluingData) -> [Vec<Vec<f64>>; 3] {
        [0, 1, 2].map(|i| sample_boundary_targets(self.graph, gluing, i))
    }

    pub fn system(&self, gluing: &GluingData, k: &WeightVector) -> Result<WeightedSystem> {
        assemble_with(self.domain, &self.stiffness, gluing, k, &self.targets(gluing))
    }

    pub fn energies(&self, map: &PiecewiseMap) -> EnergyTriple {
        EnergyTriple([0, 1, 2].map(|i| quadratic_form(&self.stiffness[i], map.sheet(i)).max(0.0)))
    }

    /// Minimizes `sum k_i E(a_i)` for fixed gluing. `initial` seeds the
    /// iterative solver and does not change the minimizer.
    pub fn solve(&self, gluing: &GluingData, k: &WeightVector, initial: Option<&Positions>, tol: f64) -> Result<HarmonicSolve> {
        let system = self.system(gluing, k)?;
        let (unknowns, residual, iterations) = system.solve(initial, tol)?;
        let map = system.map_from_unknowns(self.domain, gluing, &unknowns);
        let energies = self.energies(&map);
        Ok(HarmonicSolve { map, energies, residual, iterations, unknowns })
    }

    /// `d(sum k_i E_i)/d(position)` at each vertex of `sheet`, treating the
    /// vertex as free: `2 k_i (K_i x_i)_v`.
    pub fn reaction_forces(&self, map: &PiecewiseMap, k: &WeightVector, sheet: usize) -> Positions {
        let x = map.sheet(sheet);
        let mut f = Positions::zeros(x.dim(), x.len());
        for c in 0..x.dim() {
            let kx = self.stiffness[sheet].apply(&x.column(c));
            f.set_column(c, &kx.iter().map(|v| 2.0 * k.values[sheet] * v).collect::<Vec<_>>());
        }
        f
    }

    /// Weighted sum over sheets of the cotangent residuals at each interior
    /// junction node: the discrete balancing condition.
    pub fn junction_balance(&self, map: &PiecewiseMap, gluing: &GluingData, k: &WeightVector) -> Vec<f64> {
        let m = self.domain.junction_len();
        let dim = map.dim();
        let mut acc = vec![vec![0.0; dim]; m];
        for i in 0..3 {
            let f = self.reaction_forces(map, k, i);
            for (&v, &s) in self.domain.sheet(i).free_boundary().iter().zip(gluing.free(i)) {
                let (node, w) = junction_stencil(m, s);
                for c in 0..dim {
                    acc[node][c] += (1.0 - w) * f.get(v)[c];
                    acc[node + 1][c] += w * f.get(v)[c];
                }
            }
        }
        acc[1..m - 1].iter().map(|r| dot(r, r).sqrt()).collect()
    }
}

/// One-shot harmonic solve from zero initial data.
pub fn solve_harmonic_map(
    domain: &GluedDomain,
    gluing: &GluingData,
    k: &WeightVector,
    graph: &BoundaryGraph,
    tol: f64,
) -> Result<HarmonicSolve> {
    HarmonicProblem::new(domain, graph)?.solve(gluing, k, None, tol)
}
