//! Mesh and report files.
//!
//! Sheets are exported as Wavefront OBJ: `v` lines carry image positions
//! (padded to three coordinates), `vt` lines the parameter points, faces use
//! `v/vt` pairs with identical indices, and the two boundary chains are
//! stored as `l` polylines in the groups `fixed_boundary` and
//! `free_boundary`. Floats are written in shortest round-trip form, so
//! re-reading a file reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsReport;
use crate::domain::{build_glued_domain, junction_point, CorrespondencePolicy, GluedDomain, GluingData, PiecewiseMap, SheetMesh};
use crate::error::{Error, Result};
use crate::positions::{dist, Positions};
use crate::solver::{GluingMode, IterationRecord, Solution, SolveConfig, Termination};

pub const SCHEMA_VERSION: u32 = 1;

pub const FIXED_GROUP: &str = "fixed_boundary";
pub const FREE_GROUP: &str = "free_boundary";

fn parse_err<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Parse(format!("line {line}: {msg}")))
}

/// Triangle mesh with parameter coordinates and named polylines.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjMesh {
    pub params: Vec<[f64; 2]>,
    pub positions: Positions,
    pub triangles: Vec<[usize; 3]>,
    /// `(group, vertex indices)` for every `l` statement, in file order.
    pub polylines: Vec<(String, Vec<usize>)>,
}

impl ObjMesh {
    pub fn from_sheet(sheet: &SheetMesh, positions: &Positions) -> Result<Self> {
        if positions.len() != sheet.num_vertices() {
            return Err(Error::InvalidArgument("positions do not match the mesh".into()));
        }
        Ok(Self {
            params: sheet.vertices().to_vec(),
            positions: positions.clone(),
            triangles: sheet.triangles().to_vec(),
            polylines: vec![
                (FIXED_GROUP.into(), sheet.fixed_boundary().to_vec()),
                (FREE_GROUP.into(), sheet.free_boundary().to_vec()),
            ],
        })
    }

    /// Rebuilds the sheet from its triangles and boundary polylines.
    pub fn into_sheet(self) -> Result<(SheetMesh, Positions)> {
        let chain = |name: &str| -> Result<Vec<usize>> {
            let mut found = self.polylines.iter().filter(|(g, _)| g == name);
            match (found.next(), found.next()) {
                (Some((_, c)), None) => Ok(c.clone()),
                _ => Err(Error::Parse(format!("expected exactly one polyline in group {name}"))),
            }
        };
        let (fixed, free) = (chain(FIXED_GROUP)?, chain(FREE_GROUP)?);
        let sheet = SheetMesh::new(self.params, self.triangles, fixed, free)?;
        Ok((sheet, self.positions))
    }

    pub fn to_obj(&self) -> Result<String> {
        let dim = self.positions.dim();
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidArgument(format!("OBJ stores at most three coordinates, got {dim}")));
        }
        if self.params.len() != self.positions.len() {
            return Err(Error::InvalidArgument("parameter and position counts differ".into()));
        }
        let mut out = String::new();
        for p in self.positions.iter() {
            let c = |i: usize| p.get(i).copied().unwrap_or(0.0);
            writeln!(out, "v {} {} {}", c(0), c(1), c(2)).expect("write to string");
        }
        for q in &self.params {
            writeln!(out, "vt {} {}", q[0], q[1]).expect("write to string");
        }
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            writeln!(out, "f {a}/{a} {b}/{b} {c}/{c}").expect("write to string");
        }
        for (group, line) in &self.polylines {
            writeln!(out, "g {group}").expect("write to string");
            let idx: Vec<String> = line.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(out, "l {}", idx.join(" ")).expect("write to string");
        }
        Ok(out)
    }

    /// Parses the subset of OBJ written by [`ObjMesh::to_obj`]: `v`, `vt`,
    /// triangular `f` with matching `v/vt` indices, `g` and `l`. Comments and
    /// `o`/`s` statements are ignored.
    pub fn from_obj(text: &str) -> Result<Self> {
        let mut verts: Vec<f64> = Vec::new();
        let mut params = Vec::new();
        let mut faces: Vec<([usize; 3], usize)> = Vec::new();
        let mut polylines = Vec::new();
        let mut group = String::new();
        let mut lines_at: Vec<usize> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let ln = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut tok = line.split_whitespace();
            let Some(head) = tok.next() else { continue };
            let rest: Vec<&str> = tok.collect();
            let floats = |want: usize| -> Result<Vec<f64>> {
                if rest.len() != want {
                    return parse_err(ln, format!("expected {want} numbers after '{head}'"));
                }
                rest.iter()
                    .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("line {ln}: bad number '{s}'"))))
                    .collect()
            };
            let index = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => parse_err(ln, format!("bad index '{s}'")),
                }
            };
            match head {
                "v" => verts.extend(floats(3)?),
                "vt" => {
                    let p = floats(2)?;
                    params.push([p[0], p[1]]);
                }
                "f" => {
                    if rest.len() != 3 {
                        return parse_err(ln, "only triangles are supported");
                    }
                    let mut tri = [0; 3];
                    for (k, s) in rest.iter().enumerate() {
                        let mut parts = s.split('/');
                        let v = index(parts.next().unwrap_or(""))?;
                        if let Some(t) = parts.next() {
                            if !t.is_empty() && index(t)? != v {
                                return parse_err(ln, "vertex and texture indices must agree");
                            }
                        }
                        tri[k] = v;
                    }
                    faces.push((tri, ln));
                }
                "g" => group = rest.join(" "),
                "l" => {
                    let idx = rest.iter().map(|s| index(s)).collect::<Result<Vec<_>>>()?;
                    polylines.push((group.clone(), idx));
                    lines_at.push(ln);
                }
                "o" | "s" | "vn" | "mtllib" | "usemtl" => {}
                other => return parse_err(ln, format!("unsupported statement '{other}'")),
            }
        }
        let nv = verts.len() / 3;
        if params.len() != nv {
            return Err(Error::Parse(format!("{nv} vertices but {} parameter points", params.len())));
        }
        if let Some((_, ln)) = faces.iter().find(|(t, _)| t.iter().any(|&i| i >= nv)) {
            return parse_err(*ln, "face references a missing vertex");
        }
        for ((_, l), ln) in polylines.iter().zip(&lines_at) {
            if l.iter().any(|&i| i >= nv) {
                return parse_err(*ln, "polyline references a missing vertex");
            }
        }
        Ok(Self {
            params,
            positions: Positions::from_flat(3, verts),
            triangles: faces.into_iter().map(|(t, _)| t).collect(),
            polylines,
        })
    }
}

/// Run summary stored next to the diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub converged: bool,
    pub termination: Termination,
    pub mode: GluingMode,
    pub iterations: usize,
    pub c: [f64; 3],
    pub k: [f64; 3],
    pub energies: [f64; 3],
    pub l1_energy: f64,
    pub l2_energy: f64,
    pub degenerate_weights: bool,
}

impl SolutionSummary {
    pub fn new(solution: &Solution) -> Self {
        let e = solution.energies.0;
        let c = solution.c.values;
        Self {
            converged: solution.converged,
            termination: solution.termination,
            mode: solution.mode,
            iterations: solution.history.len(),
            c,
            k: solution.k.values,
            energies: e,
            l1_energy: (0..3).map(|i| solution.k.values[i] * e[i]).sum(),
            l2_energy: crate::energy::l2_energy(&solution.energies, &solution.c),
            degenerate_weights: solution.degenerate_weights,
        }
    }
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub diagnostics: DiagnosticsReport,
    pub solution: SolutionSummary,
    pub history: Vec<IterationRecord>,
    pub config: SolveConfig,
    pub gluing: GluingData,
    /// Per sheet, the one-based OBJ indices of the free-chain vertices. Entry
    /// `m` of every list is the copy of the same junction point.
    pub junction_vertices: [Vec<usize>; 3],
}

impl SolveReport {
    pub fn new(domain: &GluedDomain, solution: &Solution, config: &SolveConfig, diagnostics: DiagnosticsReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            diagnostics,
            solution: SolutionSummary::new(solution),
            history: solution.history.clone(),
            config: config.clone(),
            gluing: solution.gluing.clone(),
            junction_vertices: domain.sheets().each_ref().map(|s| s.free_boundary().iter().map(|v| v + 1).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(Error::Parse(format!("unsupported report schema version {v}"))),
            None => return Err(Error::Parse("report has no schema_version".into())),
        }
        Ok(serde_json::from_value(value)?)
    }
}

pub fn sheet_file_name(sheet: usize) -> String {
    format!("sheet_{}.obj", sheet + 1)
}

pub const REPORT_FILE: &str = "report.json";

/// Writes `sheet_{1,2,3}.obj` and `report.json` into `dir`.
pub fn write_solution(dir: &Path, domain: &GluedDomain, map: &PiecewiseMap, report: &SolveReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    for i in 0..3 {
        let obj = ObjMesh::from_sheet(domain.sheet(i), map.sheet(i))?.to_obj()?;
        fs::write(dir.join(sheet_file_name(i)), obj)?;
    }
    fs::write(dir.join(REPORT_FILE), report.to_json())?;
    Ok(())
}

/// A configuration re-read from exported files.
#[derive(Clone, Debug)]
pub struct LoadedSolution {
    pub domain: GluedDomain,
    pub gluing: GluingData,
    pub map: PiecewiseMap,
    pub report: Option<SolveReport>,
    /// Largest distance between a free-chain vertex as stored in its file and
    /// the junction point it is glued to.
    pub stored_matching: f64,
}

/// Reads the three sheet files from `dir` and, if present, `report.json` for
/// the gluing. Without a report the identity gluing is assumed. The junction
/// is taken from sheet 1, whose free chain is never reparameterized.
pub fn read_solution(dir: &Path) -> Result<LoadedSolution> {
    let mut sheets = Vec::with_capacity(3);
    for i in 0..3 {
        let path = dir.join(sheet_file_name(i));
        let text = fs::read_to_string(&path)?;
        let obj = ObjMesh::from_obj(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        sheets.push(obj.into_sheet()?);
    }
    let (meshes, positions): (Vec<SheetMesh>, Vec<Positions>) = sheets.into_iter().unzip();
    let meshes: [SheetMesh; 3] = meshes.try_into().expect("three sheets");
    let positions: [Positions; 3] = positions.try_into().expect("three sheets");
    let domain = build_glued_domain(meshes, &CorrespondencePolicy::Identity)?;

    let report_path = dir.join(REPORT_FILE);
    let report = if report_path.exists() { Some(SolveReport::from_json(&fs::read_to_string(report_path)?)?) } else { None };
    let gluing = match &report {
        Some(r) => {
            let g = r.gluing.clone();
            let shapes_match = (0..3).all(|i| {
                g.fixed(i).len() == domain.sheet(i).fixed_boundary().len() && g.free(i).len() == domain.junction_len()
            });
            if !shapes_match {
                return Err(Error::Parse("report gluing does not match the sheet files".into()));
            }
            g
        }
        None => GluingData::identity(&domain),
    };
    let m = domain.junction_len();
    let uniform = gluing.free(0).iter().enumerate().all(|(j, &s)| (s - j as f64 / (m - 1) as f64).abs() < 1e-15);
    if !uniform {
        return Err(Error::Parse("sheet 1 free chain must carry the junction parameters".into()));
    }
    let junction = Positions::from_rows(3, domain.sheet(0).free_boundary().iter().map(|&v| positions[0].get(v).to_vec()));
    let mut stored_matching = 0.0f64;
    for i in 0..3 {
        for (v, &s) in domain.sheet(i).free_boundary().iter().zip(gluing.free(i)) {
            stored_matching = stored_matching.max(dist(positions[i].get(*v), &junction_point(&junction, s)));
        }
    }
    let map = PiecewiseMap::new(&domain, &gluing, junction, positions)?;
    Ok(LoadedSolution { domain, gluing, map, report, stored_matching })
}
