use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use plateau_core::diagnostics::{build_report, is_branch_vertex};
use plateau_core::domain::BoundaryGraph;
use plateau_core::error::Error;
use plateau_core::io::{read_solution, write_solution, ObjMesh, SolveReport, SCHEMA_VERSION};
use plateau_core::reflection::{
    balanced_normal_triple, bjorling_extend, harmonic_certificate, multi_sheeted_reflect, AnalyticCurveData, Half,
    HalfDiskTriple,
};
use plateau_core::scenarios::half_disk_domain;
use plateau_core::solver::{minimize, GluingMode};
use serde_json::json;

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Error = 1,
    /// Iteration limit reached, or a check threshold failed.
    Incomplete = 2,
    BranchPoint = 3,
    FitResidual = 4,
}

pub fn solve(
    config: Option<&Path>,
    out: &Path,
    mode: Option<GluingMode>,
    seed: Option<u64>,
    resolution: Option<usize>,
) -> Result<Status> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(m) = mode {
        cfg.solve.mode = m;
    }
    if let Some(s) = seed {
        cfg.solve.seed = s;
    }
    if let Some(r) = resolution {
        cfg.set_resolution(r);
    }
    cfg.validate()?;
    let path = cfg.graph.as_ref().context("no boundary graph given; set `graph` in the config file")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading boundary graph {}", path.display()))?;
    let graph = BoundaryGraph::from_json(&text).with_context(|| format!("parsing boundary graph {}", path.display()))?;

    let domain = half_disk_domain(cfg.radial, cfg.angular)?;
    let solution = minimize(&domain, &graph, &cfg.solve)?;
    let diagnostics = build_report(&domain, &solution.gluing, &solution.map, cfg.thresholds.branch)?;
    let report = SolveReport::new(&domain, &solution, &cfg.solve, diagnostics);
    write_solution(out, &domain, &solution.map, &report)?;

    let d = &report.diagnostics;
    println!("termination: {:?} after {} iterations", solution.termination, solution.history.len());
    println!("weights c: {:?}", report.solution.c);
    println!("energies: {:?}", report.solution.energies);
    println!("max angle deviation: {:.4} deg", d.max_angle_error_degrees());
    println!("max balancing residual: {:.3e}", d.max_balancing());
    println!("max energy-area gap / energy: {:.3e}", d.max_relative_gap());
    println!("wrote {}", out.display());
    Ok(if solution.converged { Status::Success } else { Status::Incomplete })
}

pub fn check(dir: &Path, config: Option<&Path>) -> Result<Status> {
    let cfg = RunConfig::load(config)?;
    let loaded = read_solution(dir)?;
    let mut report = build_report(&loaded.domain, &loaded.gluing, &loaded.map, cfg.thresholds.branch)?;
    report.matching_residual = loaded.stored_matching;
    let failures = cfg.thresholds.failures(&report);
    println!("max angle deviation: {:.4} deg", report.max_angle_error_degrees());
    println!("max balancing residual: {:.3e}", report.max_balancing());
    println!("max energy-area gap / energy: {:.3e}", report.max_relative_gap());
    println!("matching residual: {:.3e}", report.matching_residual);
    if failures.is_empty() {
        println!("PASS");
        Ok(Status::Success)
    } else {
        for f in &failures {
            println!("FAIL {f}");
        }
        Ok(Status::Incomplete)
    }
}

pub fn reflect(dir: &Path, sheet: usize, node: Option<usize>, out: Option<&Path>, config: Option<&Path>) -> Result<Status> {
    if !(1..=3).contains(&sheet) {
        bail!("sheet must be 1, 2 or 3");
    }
    let cfg = RunConfig::load(config)?;
    let loaded = read_solution(dir)?;
    let m = loaded.domain.junction_len();
    let node = node.unwrap_or((m - 1) / 2);
    if node == 0 || node + 1 >= m {
        bail!("node must be an interior junction node, 1..={}", m - 2);
    }
    let triple = HalfDiskTriple::from_map(&loaded.domain, &loaded.gluing, &loaded.map)?;
    let vertex = triple.mesh().free_boundary()[node];
    for s in 0..3 {
        let (doubled, u) = multi_sheeted_reflect(&triple, s)?;
        if is_branch_vertex(&doubled.mesh, &u, vertex, cfg.thresholds.branch)? {
            eprintln!("junction node {node} is a branch point of sheet {}; no reflection written", s + 1);
            return Ok(Status::BranchPoint);
        }
    }
    let (doubled, u) = multi_sheeted_reflect(&triple, sheet - 1)?;
    let certificate = harmonic_certificate(&doubled, &u)?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    fs::write(out.join("extended.obj"), ObjMesh::from_sheet(&doubled.mesh, &u)?.to_obj()?)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "sheet": sheet,
        "node": node,
        "point": loaded.map.junction().get(node),
        "certificate": certificate,
    });
    fs::write(out.join("certificate.json"), serde_json::to_string_pretty(&doc)?)?;
    println!("max harmonic residual: {:.3e}", certificate.max_residual);
    println!("  on the junction: {:.3e}", certificate.max_on_junction);
    println!("  off the junction: {:.3e}", certificate.max_off_junction);
    Ok(Status::Success)
}

pub fn bjorling(curve: &Path, half: Half, out: &Path, config: Option<&Path>) -> Result<Status> {
    let cfg = RunConfig::load(config)?;
    let text = fs::read_to_string(curve).with_context(|| format!("reading curve {}", curve.display()))?;
    let data = AnalyticCurveData::from_json(&text)?;
    let opts = &cfg.bjorling;
    let run = || -> plateau_core::Result<Vec<_>> {
        let [second, third] = balanced_normal_triple(&data, opts)?;
        let curves = [data.clone(), data.with_conormal(second)?, data.with_conormal(third)?];
        curves.iter().map(|c| bjorling_extend(c, half, opts)).collect()
    };
    let patches = match run() {
        Ok(p) => p,
        Err(Error::Accuracy { residual, threshold }) => {
            eprintln!("curve fit residual {residual:e} exceeds {threshold:e}");
            return Ok(Status::FitResidual);
        }
        Err(e) => return Err(e.into()),
    };
    fs::create_dir_all(out)?;
    for (i, p) in patches.iter().enumerate() {
        let obj = ObjMesh {
            params: p.params.clone(),
            positions: p.positions.clone(),
            triangles: p.triangles(),
            polylines: vec![("curve".into(), (0..p.nx).map(|x| p.index(x, 0)).collect())],
        };
        fs::write(out.join(format!("patch_{}.obj", i + 1)), obj.to_obj()?)?;
    }
    let residuals: Vec<f64> = patches.iter().map(|p| p.fit_residual).collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "half": half,
        "fit_residuals": residuals,
        "options": opts,
    });
    fs::write(out.join("bjorling.json"), serde_json::to_string_pretty(&doc)?)?;
    println!("fit residuals: {residuals:?}");
    Ok(Status::Success)
}
