//! Alternating minimization over maps, weights and gluing parameters.

use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryGraph, GluedDomain, GluingData, PiecewiseMap};
use crate::energy::{dirichlet_energy, l1_energy, l2_energy, optimal_weights, EnergyTriple, WeightMode, WeightVector};
use crate::error::{invalid, Result};
use crate::positions::{dot, sub, Positions};
use crate::solver::system::{HarmonicProblem, HarmonicSolve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Whether the junction correspondence between sheets may move.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GluingMode {
    /// Free-chain vertex `m` of every sheet sits at junction node `m`.
    #[default]
    Identity,
    /// Sheets 2 and 3 slide along the junction of sheet 1.
    Sliding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub inner_tolerance: f64,
    pub weight_tolerance: f64,
    pub energy_tolerance: f64,
    pub max_outer_iterations: usize,
    /// First step size of the gluing descent; later steps use the
    /// Barzilai-Borwein estimate.
    pub gluing_step: f64,
    pub max_backtracks: usize,
    pub mode: GluingMode,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            inner_tolerance: 1e-10,
            weight_tolerance: 1e-8,
            energy_tolerance: 1e-9,
            max_outer_iterations: 200,
            gluing_step: 0.1,
            max_backtracks: 40,
            mode: GluingMode::Identity,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inner_tolerance", self.inner_tolerance),
            ("weight_tolerance", self.weight_tolerance),
            ("energy_tolerance", self.energy_tolerance),
            ("gluing_step", self.gluing_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite"));
            }
        }
        if self.max_outer_iterations == 0 {
            return invalid("max_outer_iterations must be at least 1");
        }
        Ok(())
    }
}

/// Result of the weight step.
#[derive(Clone, Debug)]
pub struct WeightUpdate {
    pub c: WeightVector,
    pub k: WeightVector,
    /// Set when some sheet energy vanishes; `k` is then left unchanged.
    pub degenerate: bool,
}

/// Optimal l2 weights `c_i = E_i / sum E` for the current map and the l1
/// weights they induce (`k` proportional to `(1,1,1)`, smallest entry 1).
pub fn update_weights(e: &EnergyTriple, current_k: &WeightVector) -> Result<WeightUpdate> {
    let c = optimal_weights(e)?;
    if e.0.iter().any(|&v| v <= 0.0) {
        return Ok(WeightUpdate { c, k: *current_k, degenerate: true });
    }
    let ratios = [0, 1, 2].map(|i| e.0[i] / c.values[i]);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = WeightVector { mode: WeightMode::L1, values: ratios.map(|r| r / min) };
    Ok(WeightUpdate { c, k, degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GluingOutcome {
    Accepted,
    /// The gradient vanished; the gluing is returned unchanged.
    Stationary,
    /// No admissible step decreased the energy enough.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct GluingUpdate {
    pub gluing: GluingData,
    pub solve: HarmonicSolve,
    pub outcome: GluingOutcome,
    pub step: f64,
    pub gradient: Vec<f64>,
}

/// Flat vector of the movable gluing parameters, in a fixed order: the
/// non-pinned fixed-chain parameters of each sheet, then (sliding mode)
/// the interior free-chain parameters of sheets 2 and 3.
fn movable(gluing: &GluingData, mode: GluingMode) -> Vec<(usize, bool, usize)> {
    let mut out = Vec::new();
    for i in 0..3 {
        let pinned = gluing.pinned_indices(i);
        for j in 0..gluing.fixed(i).len() {
            if !pinned.contains(&j) {
                out.push((i, true, j));
            }
        }
    }
    if mode == GluingMode::Sliding {
        for i in 1..3 {
            for j in 1..gluing.free(i).len() - 1 {
                out.push((i, false, j));
            }
        }
    }
    out
}

fn read_params(gluing: &GluingData, slots: &[(usize, bool, usize)]) -> Vec<f64> {
    slots.iter().map(|&(i, fixed, j)| if fixed { gluing.fixed(i)[j] } else { gluing.free(i)[j] }).collect()
}

fn write_params(gluing: &GluingData, slots: &[(usize, bool, usize)], values: &[f64]) -> Result<GluingData> {
    let mut fixed = [0, 1, 2].map(|i| gluing.fixed(i).to_vec());
    let mut free = [0, 1, 2].map(|i| gluing.free(i).to_vec());
    for (&(i, f, j), &v) in slots.iter().zip(values) {
        if f {
            fixed[i][j] = v;
        } else {
            free[i][j] = v;
        }
    }
    GluingData::with_parameters(gluing, fixed, free)
}

/// Derivative of the junction polyline at parameter `s`; at a node the two
/// adjacent segment directions are averaged.
fn junction_derivative(junction: &Positions, s: f64) -> Vec<f64> {
    let m = junction.len();
    let seg = |k: usize| sub(junction.get(k + 1), junction.get(k)).into_iter().map(|d| d * (m - 1) as f64).collect::<Vec<_>>();
    let x = s * (m - 1) as f64;
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        let k = r as usize;
        if k == 0 {
            return seg(0);
        }
        if k == m - 1 {
            return seg(m - 2);
        }
        return seg(k - 1).iter().zip(seg(k)).map(|(a, b)| 0.5 * (a + b)).collect();
    }
    seg((x.floor() as usize).min(m - 2))
}

/// Gradient of `min_maps sum k_i E_i` with respect to the movable gluing
/// parameters. By the envelope theorem only the explicit dependence through
/// the boundary and junction positions contributes: the reaction force at a
/// vertex dotted with the velocity of its prescribed position.
pub fn gluing_gradient(
    problem: &HarmonicProblem<'_>,
    gluing: &GluingData,
    map: &PiecewiseMap,
    k: &WeightVector,
    mode: GluingMode,
) -> Vec<f64> {
    let forces = [0, 1, 2].map(|i| problem.reaction_forces(map, k, i));
    movable(gluing, mode)
        .into_iter()
        .map(|(i, fixed, j)| {
            let sheet = problem.domain.sheet(i);
            if fixed {
                let v = sheet.fixed_boundary()[j];
                dot(forces[i].get(v), &problem.graph.tangent(i, gluing.fixed(i)[j]))
            } else {
                let v = sheet.free_boundary()[j];
                dot(forces[i].get(v), &junction_derivative(map.junction(), gluing.free(i)[j]))
            }
        })
        .collect()
}

/// One projected descent step on the gluing parameters with Armijo
/// backtracking. Steps that would break strict monotonicity are shortened.
#[allow(clippy::too_many_arguments)]
pub fn update_gluing(
    problem: &HarmonicProblem<'_>,
    gluing: &GluingData,
    current: &HarmonicSolve,
    k: &WeightVector,
    step: f64,
    mode: GluingMode,
    config: &SolveConfig,
) -> Result<GluingUpdate> {
    let slots = movable(gluing, mode);
    let grad = gluing_gradient(problem, gluing, &current.map, k, mode);
    let g2 = dot(&grad, &grad);
    let base = l1_energy(&current.energies, k)?;
    let unchanged = |outcome| GluingUpdate { gluing: gluing.clone(), solve: current.clone(), outcome, step: 0.0, gradient: grad.clone() };
    if slots.is_empty() || g2.sqrt() <= 1e-14 * base.max(1e-300) {
        return Ok(unchanged(GluingOutcome::Stationary));
    }
    let x0 = read_params(gluing, &slots);
    let mut alpha = step;
    let warm = problem.system(gluing, k)?.unknowns_from_map(&current.map);
    for _ in 0..config.max_backtracks {
        let x: Vec<f64> = x0.iter().zip(&grad).map(|(x, g)| x - alpha * g).collect();
        if let Ok(candidate) = write_params(gluing, &slots, &x) {
            let solve = problem.solve(&candidate, k, Some(&warm), config.inner_tolerance)?;
            let energy = l1_energy(&solve.energies, k)?;
            if energy <= base - 1e-4 * alpha * g2 {
                return Ok(GluingUpdate { gluing: candidate, solve, outcome: GluingOutcome::Accepted, step: alpha, gradient: grad });
            }
        }
        alpha *= 0.5;
    }
    Ok(unchanged(GluingOutcome::LineSearchFailed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub l2_energy: f64,
    pub l1_energy: f64,
    pub energies: [f64; 3],
    pub linear_residual: f64,
    pub weight_change: f64,
    pub gluing_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EnergyTolerance,
    Stationary,
    LineSearchFailed,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub map: PiecewiseMap,
    pub gluing: GluingData,
    pub c: WeightVector,
    pub k: WeightVector,
    pub energies: EnergyTriple,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub termination: Termination,
    pub mode: GluingMode,
    pub degenerate_weights: bool,
}

/// Randomized starting vector for the first linear solve. The minimizer
/// does not depend on it.
fn jittered_start(problem: &HarmonicProblem<'_>, gluing: &GluingData, k: &WeightVector, seed: u64) -> Result<Positions> {
    let sys = problem.system(gluing, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = problem.graph.length(0).max(problem.graph.length(1)).max(problem.graph.length(2));
    let n = sys.num_unknowns() * sys.dim();
    Ok(Positions::from_flat(sys.dim(), (0..n).map(|_| scale * rng.gen_range(-0.5..0.5)).collect()))
}

/// Alternates harmonic solves, weight updates and gluing descent until the
/// relative energy decrease falls below `energy_tolerance`.
pub fn minimize(domain: &GluedDomain, graph: &BoundaryGraph, config: &SolveConfig) -> Result<Solution> {
    config.validate()?;
    if graph.dim() < 2 {
        return invalid("the ambient dimension must be at least 2");
    }
    let problem = HarmonicProblem::new(domain, graph)?;
    let mut gluing = GluingData::identity(domain);
    let mut k = WeightVector::uniform_l1();
    let start = jittered_start(&problem, &gluing, &k, config.seed)?;
    let mut current = problem.solve(&gluing, &k, Some(&start), config.inner_tolerance)?;
    let mut wu = update_weights(&current.energies, &k)?;
    let mut history = vec![record(0, &current, &wu, 0.0, 0.0)];
    let mut step = config.gluing_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let slots = movable(&gluing, config.mode);
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=config.max_outer_iterations {
        let weight_change = (0..3).map(|i| (wu.k.values[i] - k.values[i]).abs()).fold(0.0, f64::max);
        if weight_change > config.weight_tolerance {
            k = wu.k;
            let warm = problem.system(&gluing, &k)?.unknowns_from_map(&current.map);
            current = problem.solve(&gluing, &k, Some(&warm), config.inner_tolerance)?;
        }
        let before = l1_energy(&current.energies, &k)?;
        let x_cur = read_params(&gluing, &slots);
        let g_cur = gluing_gradient(&problem, &gluing, &current.map, &k, config.mode);
        if let Some((x_old, g_old)) = &prev {
            let s: Vec<f64> = x_cur.iter().zip(x_old).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_cur.iter().zip(g_old).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-10, 1e6);
            }
        }
        prev = Some((x_cur, g_cur));
        let upd = update_gluing(&problem, &gluing, &current, &k, step, config.mode, config)?;
        let outcome = upd.outcome;
        let accepted_step = upd.step;
        gluing = upd.gluing;
        current = upd.solve;
        wu = update_weights(&current.energies, &k)?;
        history.push(record(iteration, &current, &wu, weight_change, accepted_step));
        match outcome {
            GluingOutcome::Stationary => {
                termination = Termination::Stationary;
                break;
            }
            GluingOutcome::LineSearchFailed => {
                termination = Termination::LineSearchFailed;
                break;
            }
            GluingOutcome::Accepted => {}
        }
        let after = l1_energy(&current.energies, &k)?;
        if (before - after) <= config.energy_tolerance * before.abs().max(f64::MIN_POSITIVE) {
            termination = Termination::EnergyTolerance;
            break;
        }
    }
    if slots.is_empty() && termination == Termination::MaxIterations {
        termination = Termination::Stationary;
    }
    let converged = termination != Termination::MaxIterations;
    Ok(Solution {
        map: current.map,
        gluing,
        c: wu.c,
        k: wu.k,
        energies: current.energies,
        history,
        converged,
        termination,
        mode: config.mode,
        degenerate_weights: wu.degenerate,
    })
}

fn record(iteration: usize, s: &HarmonicSolve, wu: &WeightUpdate, weight_change: f64, gluing_step: f64) -> IterationRecord {
    IterationRecord {
        iteration,
        l2_energy: l2_energy(&s.energies, &wu.c),
        l1_energy: s.energies.total(),
        energies: s.energies.0,
        linear_residual: s.residual,
        weight_change,
        gluing_step,
    }
}

/// Defect of the convexity identity along the segment between two maps:
/// `E_k(a_t) - [(1-t) E_k(a_0) + t E_k(a_1) - t(1-t) E_k(a_0 - a_1)]`,
/// computed from per-triangle gradients. Zero up to rounding for every pair.
pub fn convexity_check(domain: &GluedDomain, a0: &PiecewiseMap, a1: &PiecewiseMap, k: &WeightVector, t: f64) -> Result<f64> {
    if !a0.same_shape(a1) {
        return invalid("maps have different shapes");
    }
    let ek = |m: &PiecewiseMap| -> Result<f64> {
        let mut s = 0.0;
        for i in 0..3 {
            s += k.values[i] * dirichlet_energy(domain.sheet(i), m.sheet(i))?;
        }
        Ok(s)
    };
    let at = a0.interpolate(a1, t);
    let d = a0.difference(a1);
    Ok(ek(&at)? - ((1.0 - t) * ek(a0)? + t * ek(a1)? - t * (1.0 - t) * ek(&d)?))
}
