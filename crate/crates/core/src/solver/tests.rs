use super::*;
use crate::domain::{GluedDomain, GluingData, PiecewiseMap};
use crate::energy::{cotangent_matrix, l2_energy, EnergyTriple, WeightVector};
use crate::error::Error;
use crate::positions::Positions;
use crate::scenarios::{affine_y_map, flat_y_frames, flat_y_graph, half_disk_domain};
use crate::BoundaryGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat_y(r: usize, a: usize, height: f64) -> (GluedDomain, BoundaryGraph) {
    (half_disk_domain(r, a).unwrap(), flat_y_graph(height, 8 * a).unwrap())
}

/// Gluing whose fixed-chain parameters are pushed towards q-.
fn skewed(domain: &GluedDomain, power: f64) -> GluingData {
    let id = GluingData::identity(domain);
    let fixed = [0, 1, 2].map(|i| {
        let f = id.fixed(i);
        let p = id.pinned(i);
        let (fp, n) = (f[p], f.len());
        (0..n)
            .map(|j| if j <= p { fp * (f[j] / fp).powf(power) } else { f[j] })
            .collect::<Vec<_>>()
    });
    GluingData::with_parameters(&id, fixed, [0, 1, 2].map(|i| id.free(i).to_vec())).unwrap()
}

#[test]
fn interior_rows_reproduce_the_sheet_stencil() {
    let (d, g) = flat_y(3, 6, 1.0);
    let gl = GluingData::identity(&d);
    let k = WeightVector::l1([1.0, 2.0, 3.0]).unwrap();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let sys = p.system(&gl, &k).unwrap();
    let kmats = [0, 1, 2].map(|i| cotangent_matrix(d.sheet(i)).unwrap());
    // sheet 1, vertex 0 (the center) lies on the junction; pick an interior vertex
    let sheet = d.sheet(1);
    let mask = sheet.boundary_mask();
    let v = (0..sheet.num_vertices()).find(|&v| !mask[v]).unwrap();
    let [(Dof::Unknown(u), _)] = sys.link(1, v).as_slice() else { panic!("interior vertex must be unknown") };
    assert!((sys.matrix.get(*u, *u) - 2.0 * kmats[1].get(v, v)).abs() < 1e-14);

    // junction node: the row is the k-weighted sum of the three stencils
    let m = d.junction_len() / 2;
    let ju = sys.junction_unknown(m).unwrap();
    let diag: f64 = (0..3).map(|i| k.values[i] * kmats[i].get(d.sheet(i).free_boundary()[m], d.sheet(i).free_boundary()[m])).sum();
    assert!((sys.matrix.get(ju, ju) - diag).abs() < 1e-13);
    let nb = |i: usize| {
        let free = d.sheet(i).free_boundary();
        kmats[i].get(free[m], free[m + 1])
    };
    let off: f64 = (0..3).map(|i| k.values[i] * nb(i)).sum();
    assert!((sys.matrix.get(ju, ju + 1) - off).abs() < 1e-13);
}

#[test]
fn system_is_symmetric_positive_definite() {
    let (d, g) = flat_y(2, 4, 1.0);
    let sys = assemble_weighted_system(&d, &GluingData::identity(&d), &WeightVector::l1([1.0, 1.5, 3.0]).unwrap(), &HarmonicProblem::new(&d, &g).unwrap().targets(&GluingData::identity(&d))).unwrap();
    assert!(sys.matrix.is_symmetric(1e-14));
    let eig = sys.matrix.to_dense().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| l > 1e-8), "{:?}", eig.eigenvalues);
}

#[test]
fn constant_targets_give_constant_map() {
    let d = half_disk_domain(3, 6).unwrap();
    let gl = GluingData::identity(&d);
    let q = vec![0.3, -1.0, 2.0];
    let targets = [0, 1, 2].map(|i| vec![q.clone(); d.sheet(i).fixed_boundary().len()]);
    let sys = assemble_weighted_system(&d, &gl, &WeightVector::uniform_l1(), &targets).unwrap();
    let (u, _, _) = sys.solve(None, 1e-12).unwrap();
    let map = sys.map_from_unknowns(&d, &gl, &u);
    for i in 0..3 {
        for p in map.sheet(i).iter() {
            assert!(crate::positions::dist(p, &q) < 1e-12);
        }
        assert!(crate::energy::dirichlet_energy(d.sheet(i), map.sheet(i)).unwrap() < 1e-18);
    }
}

#[test]
fn flat_y_solution_is_the_affine_embedding() {
    let (d, g) = flat_y(4, 8, 1.0);
    let gl = GluingData::identity(&d);
    let k = WeightVector::uniform_l1();
    let exact = affine_y_map(&d, &gl, flat_y_frames());
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let sys = p.system(&gl, &k).unwrap();
    let u = sys.unknowns_from_map(&exact);
    let rebuilt = sys.map_from_unknowns(&d, &gl, &u);
    for i in 0..3 {
        assert!(rebuilt.sheet(i).max_distance(exact.sheet(i)) < 1e-14);
    }
    let r = sys.residual(&u);
    assert!(r.as_flat().iter().all(|v| v.abs() <= 1e-10), "stationarity residual");

    let s = solve_harmonic_map(&d, &gl, &k, &g, 1e-12).unwrap();
    for i in 0..3 {
        assert!(s.map.sheet(i).max_distance(exact.sheet(i)) < 1e-10);
    }
    let e = s.energies.0;
    assert!((e[0] - e[1]).abs() < 1e-10 && (e[1] - e[2]).abs() < 1e-10);
}

#[test]
fn solution_is_invariant_under_weight_scaling() {
    let (d, g) = flat_y(4, 8, 0.6);
    let gl = skewed(&d, 1.5);
    let a = solve_harmonic_map(&d, &gl, &WeightVector::l1([1.0, 2.0, 1.5]).unwrap(), &g, 1e-11).unwrap();
    let b = solve_harmonic_map(&d, &gl, &WeightVector::l1([2.0, 4.0, 3.0]).unwrap(), &g, 1e-11).unwrap();
    for i in 0..3 {
        assert!(a.map.sheet(i).max_distance(b.map.sheet(i)) < 1e-12);
    }
}

#[test]
fn initial_guess_does_not_change_the_minimizer() {
    let (d, g) = flat_y(4, 8, 0.6);
    let gl = GluingData::identity(&d);
    let k = WeightVector::uniform_l1();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let n = p.system(&gl, &k).unwrap().num_unknowns();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let guess = Positions::from_flat(3, (0..3 * n).map(|_| rng.gen_range(-5.0..5.0)).collect());
    let a = p.solve(&gl, &k, None, 1e-12).unwrap();
    let b = p.solve(&gl, &k, Some(&guess), 1e-12).unwrap();
    for i in 0..3 {
        assert!(a.map.sheet(i).max_distance(b.map.sheet(i)) < 1e-9);
    }
    assert!(matches!(p.solve(&gl, &k, Some(&Positions::zeros(3, 1)), 1e-12), Err(Error::InvalidArgument(_))));
}

#[test]
fn junction_is_balanced_after_a_solve() {
    let (d, g) = flat_y(4, 8, 0.6);
    let gl = skewed(&d, 1.3);
    let k = WeightVector::l1([1.0, 1.2, 2.0]).unwrap();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let s = p.solve(&gl, &k, None, 1e-12).unwrap();
    let scale = p.reaction_forces(&s.map, &k, 0).as_flat().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bal = p.junction_balance(&s.map, &gl, &k);
    assert_eq!(bal.len(), d.junction_len() - 2);
    assert!(bal.iter().all(|&b| b <= 1e-9 * scale), "{bal:?}");
}

#[test]
fn weight_update_examples() {
    let k0 = WeightVector::uniform_l1();
    let w = update_weights(&EnergyTriple([1.0, 1.0, 2.0]), &k0).unwrap();
    assert_eq!(w.c.values, [0.25, 0.25, 0.5]);
    assert_eq!(w.k.values, [1.0, 1.0, 1.0]);
    assert!(!w.degenerate);
    let w2 = update_weights(&EnergyTriple([1.0, 1.0, 2.0]), &w.k).unwrap();
    assert_eq!(w.c, w2.c);
    assert_eq!(w.k, w2.k);

    let k = WeightVector::l1([1.0, 3.0, 2.0]).unwrap();
    let w = update_weights(&EnergyTriple([0.0, 1.0, 1.0]), &k).unwrap();
    assert!(w.degenerate);
    assert_eq!(w.k, k);
    assert!(matches!(update_weights(&EnergyTriple([0.0; 3]), &k), Err(Error::DegenerateMap(_))));
}

#[test]
fn symmetric_flat_y_has_equal_weights_and_no_gluing_gradient() {
    let (d, g) = flat_y(4, 8, 1.0);
    let gl = GluingData::identity(&d);
    let k = WeightVector::uniform_l1();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let s = p.solve(&gl, &k, None, 1e-12).unwrap();
    let w = update_weights(&s.energies, &k).unwrap();
    assert!(w.c.values.iter().all(|c| (c - 1.0 / 3.0).abs() < 1e-12));
    let upd = update_gluing(&p, &gl, &s, &k, 0.1, GluingMode::Sliding, &SolveConfig::default()).unwrap();
    assert_eq!(upd.outcome, GluingOutcome::Stationary);
    assert_eq!(upd.gluing, gl);
}

#[test]
fn envelope_gradient_matches_finite_differences() {
    let (d, g) = flat_y(3, 6, 0.6);
    let gl = skewed(&d, 1.4);
    let k = WeightVector::l1([1.0, 1.3, 1.7]).unwrap();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    for mode in [GluingMode::Identity, GluingMode::Sliding] {
        let s = p.solve(&gl, &k, None, 1e-13).unwrap();
        let grad = gluing_gradient(&p, &gl, &s.map, &k, mode);
        // perturb one fixed parameter of sheet 1 and one free parameter of sheet 2
        let mut checked = 0;
        for (sheet, fixed, j) in [(1usize, true, 2usize), (2, false, 2)] {
            if !fixed && mode == GluingMode::Identity {
                continue;
            }
            let idx = grad_index(&gl, mode, sheet, fixed, j);
            let h = 1e-6;
            let energy_at = |delta: f64| {
                let mut fx = [0, 1, 2].map(|i| gl.fixed(i).to_vec());
                let mut fr = [0, 1, 2].map(|i| gl.free(i).to_vec());
                if fixed {
                    fx[sheet][j] += delta;
                } else {
                    // a free parameter between nodes keeps the polyline smooth
                    fr[sheet][j] += delta + 0.3 / (d.junction_len() - 1) as f64;
                }
                let g2 = GluingData::with_parameters(&gl, fx, fr).unwrap();
                let s = p.solve(&g2, &k, None, 1e-13).unwrap();
                crate::energy::l1_energy(&s.energies, &k).unwrap()
            };
            let fd = (energy_at(h) - energy_at(-h)) / (2.0 * h);
            let analytic = if fixed {
                grad[idx]
            } else {
                let mut fr = [0, 1, 2].map(|i| gl.free(i).to_vec());
                fr[sheet][j] += 0.3 / (d.junction_len() - 1) as f64;
                let g2 = GluingData::with_parameters(&gl, [0, 1, 2].map(|i| gl.fixed(i).to_vec()), fr).unwrap();
                let s2 = p.solve(&g2, &k, None, 1e-13).unwrap();
                gluing_gradient(&p, &g2, &s2.map, &k, mode)[idx]
            };
            assert!((fd - analytic).abs() < 1e-5 * (1.0 + fd.abs()), "{mode:?} sheet {sheet}: fd {fd} vs {analytic}");
            checked += 1;
        }
        assert!(checked >= 1);
    }
}

fn grad_index(gl: &GluingData, mode: GluingMode, sheet: usize, fixed: bool, j: usize) -> usize {
    let mut idx = 0;
    for i in 0..3 {
        let pinned = gl.pinned_indices(i);
        for jj in 0..gl.fixed(i).len() {
            if pinned.contains(&jj) {
                continue;
            }
            if fixed && i == sheet && jj == j {
                return idx;
            }
            idx += 1;
        }
    }
    assert_eq!(mode, GluingMode::Sliding);
    for i in 1..3 {
        for jj in 1..gl.free(i).len() - 1 {
            if i == sheet && jj == j {
                return idx;
            }
            idx += 1;
        }
    }
    unreachable!()
}

#[test]
fn skewed_gluing_descends() {
    let (d, g) = flat_y(4, 8, 1.0);
    let gl = skewed(&d, 1.6);
    let k = WeightVector::uniform_l1();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let s = p.solve(&gl, &k, None, 1e-12).unwrap();
    let upd = update_gluing(&p, &gl, &s, &k, 0.1, GluingMode::Identity, &SolveConfig::default()).unwrap();
    assert_eq!(upd.outcome, GluingOutcome::Accepted);
    assert!(upd.solve.energies.total() < s.energies.total());
    assert!(upd.gluing.is_monotone());
    assert!(upd.gluing.satisfies_three_point_condition());
    for i in 0..3 {
        for j in upd.gluing.pinned_indices(i) {
            assert_eq!(upd.gluing.fixed(i)[j], gl.fixed(i)[j]);
        }
    }
}

#[test]
fn convexity_identity_holds() {
    let (d, g) = flat_y(3, 6, 0.6);
    let gl = GluingData::identity(&d);
    let k = WeightVector::l1([1.0, 2.5, 1.2]).unwrap();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let sys = p.system(&gl, &k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut random_map = || {
        let n = sys.num_unknowns();
        sys.map_from_unknowns(&d, &gl, &Positions::from_flat(3, (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()))
    };
    let (a, b) = (random_map(), random_map());
    assert_eq!(convexity_check(&d, &a, &a, &k, 0.4).unwrap(), 0.0);
    assert!(convexity_check(&d, &a, &b, &k, 0.0).unwrap().abs() < 1e-12);
    assert!(convexity_check(&d, &a, &b, &k, 1.0).unwrap().abs() < 1e-12);
    let ek: f64 = (0..3).map(|i| k.values[i] * crate::energy::dirichlet_energy(d.sheet(i), a.sheet(i)).unwrap()).sum();
    assert!(convexity_check(&d, &a, &b, &k, 0.37).unwrap().abs() <= 1e-10 * ek.max(1.0));

    let other = half_disk_domain(2, 4).unwrap();
    let small = affine_y_map(&other, &GluingData::identity(&other), flat_y_frames());
    assert!(matches!(convexity_check(&d, &a, &small, &k, 0.5), Err(Error::InvalidArgument(_))));
}

#[test]
fn l1_minimizer_is_stationary_for_the_l2_energy() {
    let (d, g) = flat_y(4, 8, 0.6);
    let gl = skewed(&d, 1.2);
    let k = WeightVector::uniform_l1();
    let p = HarmonicProblem::new(&d, &g).unwrap();
    let s = p.solve(&gl, &k, None, 1e-13).unwrap();
    let c = update_weights(&s.energies, &k).unwrap().c;
    let sys = p.system(&gl, &k).unwrap();
    let base = sys.unknowns_from_map(&s.map);
    let ec = |m: &PiecewiseMap| l2_energy(&p.energies(m), &c);
    let e0 = ec(&s.map);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dir: Vec<f64> = (0..base.as_flat().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-4;
        let moved = Positions::from_flat(3, base.as_flat().iter().zip(&dir).map(|(u, d)| u + eps * d).collect());
        let derivative = (ec(&sys.map_from_unknowns(&d, &gl, &moved)) - e0) / eps;
        assert!(derivative >= -1e-6 * e0, "{derivative}");
    }
}

#[test]
fn minimize_flat_y_history_and_weights() {
    let (d, g) = flat_y(4, 8, 0.6);
    let cfg = SolveConfig { max_outer_iterations: 50, ..SolveConfig::default() };
    let sol = minimize(&d, &g, &cfg).unwrap();
    assert!(sol.converged, "{:?}", sol.termination);
    for w in sol.history.windows(2) {
        assert!(w[1].l2_energy <= w[0].l2_energy * (1.0 + 1e-12));
    }
    let e = sol.energies;
    for i in 0..3 {
        assert!((sol.c.values[i] - e.0[i] / e.total()).abs() <= cfg.weight_tolerance);
        assert!((sol.c.values[i] - 1.0 / 3.0).abs() < 1e-6);
    }
    assert!(sol.gluing.is_monotone() && sol.gluing.satisfies_three_point_condition());
    let again = minimize(&d, &g, &cfg).unwrap();
    assert_eq!(again.map, sol.map);
}

#[test]
fn identical_arcs_give_identical_sheets() {
    let d = half_disk_domain(3, 6).unwrap();
    let arc = Positions::from_rows(3, (0..=24).map(|k| {
        let s = std::f64::consts::PI * k as f64 / 24.0;
        [-s.cos(), if k == 0 || k == 24 { 0.0 } else { s.sin() }, 0.2 * s.sin() * s.cos()]
    }));
    let g = BoundaryGraph::new([arc.clone(), arc.clone(), arc]).unwrap();
    let sol = minimize(&d, &g, &SolveConfig { max_outer_iterations: 10, ..SolveConfig::default() }).unwrap();
    assert!((sol.energies.0[0] - sol.energies.0[1]).abs() < 1e-9 * sol.energies.total());
    assert!((sol.energies.0[0] - sol.energies.0[2]).abs() < 1e-9 * sol.energies.total());
    assert!(sol.c.values.iter().all(|c| (c - 1.0 / 3.0).abs() < 1e-9));
    assert!(sol.map.sheet(0).max_distance(sol.map.sheet(1)) < 1e-7);
}

#[test]
fn sliding_mode_keeps_invariants() {
    let (d, g) = flat_y(3, 6, 0.6);
    let cfg = SolveConfig { mode: GluingMode::Sliding, max_outer_iterations: 20, ..SolveConfig::default() };
    let sol = minimize(&d, &g, &cfg).unwrap();
    assert_eq!(sol.mode, GluingMode::Sliding);
    assert!(sol.gluing.is_monotone());
    assert!(sol.map.matching_residual(&d, &sol.gluing) == 0.0);
    for w in sol.history.windows(2) {
        assert!(w[1].l2_energy <= w[0].l2_energy * (1.0 + 1e-12));
    }
}

#[test]
fn config_validation() {
    assert!(SolveConfig::default().validate().is_ok());
    assert!(SolveConfig { inner_tolerance: 0.0, ..SolveConfig::default() }.validate().is_err());
    assert!(SolveConfig { max_outer_iterations: 0, ..SolveConfig::default() }.validate().is_err());
    let cfg: SolveConfig = serde_json::from_str(r#"{"mode": "sliding", "seed": 4}"#).unwrap();
    assert_eq!(cfg.mode, GluingMode::Sliding);
    assert_eq!(cfg.inner_tolerance, 1e-10);
}
