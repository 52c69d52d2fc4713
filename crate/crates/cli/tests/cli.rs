use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plateau_core::domain::GluingData;
use plateau_core::io::{ObjMesh, SolveReport};
use plateau_core::positions::Positions;
use plateau_core::reflection::{AnalyticCurveData, NormalKind};
use plateau_core::scenarios::{affine_y_map, flat_y_frames, flat_y_graph, half_disk_domain, squared_y_map};
use plateau_core::PiecewiseMap;
use tempfile::TempDir;

fn plateau(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plateau")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Config for the half-ellipse flat Y at radial resolution 8.
fn flat_y_setup(extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("graph.json"), flat_y_graph(0.6, 128).unwrap().to_json()).unwrap();
    fs::write(dir.path().join("run.toml"), format!("graph = \"graph.json\"\nradial = 8\nangular = 16\n{extra}")).unwrap();
    dir
}

fn write_sheets(dir: &Path, map: &PiecewiseMap) {
    let domain = half_disk_domain(4, 8).unwrap();
    fs::create_dir_all(dir).unwrap();
    for i in 0..3 {
        let obj = ObjMesh::from_sheet(domain.sheet(i), map.sheet(i)).unwrap().to_obj().unwrap();
        fs::write(dir.join(format!("sheet_{}.obj", i + 1)), obj).unwrap();
    }
}

fn read_obj(path: PathBuf) -> ObjMesh {
    ObjMesh::from_obj(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_flat_y_writes_sheets_and_a_passing_report() {
    let dir = flat_y_setup("");
    let o = plateau(&["solve", "--config", "run.toml", "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let report = SolveReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.diagnostics.max_angle_error_degrees() <= 1.0);
    assert!(report.solution.converged);

    let sheets: Vec<ObjMesh> = (1..=3).map(|i| read_obj(out.join(format!("sheet_{i}.obj")))).collect();
    for m in 0..report.junction_vertices[0].len() {
        let p = sheets[0].positions.get(report.junction_vertices[0][m] - 1);
        for i in 1..3 {
            assert_eq!(sheets[i].positions.get(report.junction_vertices[i][m] - 1), p);
        }
    }

    let o = plateau(&["check", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn identical_runs_write_identical_reports() {
    let dir = flat_y_setup("");
    for mode in ["identity", "sliding"] {
        let mut reports = Vec::new();
        for out in ["a", "b"] {
            let o = plateau(&["solve", "--config", "run.toml", "--out", out, "--seed", "7", "--mode", mode, "--resolution", "4"], dir.path());
            assert!(code(&o) == 0 || code(&o) == 2);
            reports.push(fs::read(dir.path().join(out).join("report.json")).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{mode}");
        let text = String::from_utf8(reports[0].clone()).unwrap();
        assert!(text.contains(&format!("\"mode\": \"{mode}\"")));
        assert!(text.contains("\"seed\": 7"));
    }
}

#[test]
fn missing_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "graph = \"nowhere.json\"\n").unwrap();
    assert_eq!(code(&plateau(&["solve", "--config", "run.toml"], dir.path())), 1);
    assert_eq!(code(&plateau(&["solve"], dir.path())), 1);
    assert_eq!(code(&plateau(&["solve", "--config", "absent.toml"], dir.path())), 1);
    fs::write(dir.path().join("bad.toml"), "radial = \"four\"\n").unwrap();
    assert_eq!(code(&plateau(&["solve", "--config", "bad.toml"], dir.path())), 1);
    assert_eq!(code(&plateau(&["check", "nothing"], dir.path())), 1);
    assert_eq!(code(&plateau(&["bjorling", "nothing.json"], dir.path())), 1);
}

#[test]
fn iteration_limit_exits_with_two_and_keeps_the_result() {
    let dir = flat_y_setup("[solve]\nmax_outer_iterations = 1\n");
    let o = plateau(&["solve", "--config", "run.toml", "--out", "out", "--resolution", "3"], dir.path());
    assert_eq!(code(&o), 2);
    let report = SolveReport::from_json(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert!(!report.solution.converged);
    assert!(dir.path().join("out/sheet_3.obj").exists());
}

#[test]
fn check_rejects_perturbed_and_malformed_meshes() {
    let dir = flat_y_setup("");
    assert_eq!(code(&plateau(&["solve", "--config", "run.toml", "--out", "out"], dir.path())), 0);
    let out = dir.path().join("out");
    let path = out.join("sheet_2.obj");
    let mut obj = read_obj(path.clone());
    let free = obj.polylines.iter().find(|(g, _)| g == "free_boundary").unwrap().1.clone();
    let mid = free[free.len() / 2];
    // push the interior neighbours of the middle junction node out of plane
    let near: Vec<usize> = obj.triangles.iter().filter(|t| t.contains(&mid)).flatten().copied().collect();
    for v in near {
        if !free.contains(&v) {
            obj.positions.get_mut(v)[0] += 0.05;
        }
    }
    fs::write(&path, obj.to_obj().unwrap()).unwrap();
    let o = plateau(&["check", "out"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    fs::write(&path, "v 0 0 0\nf 1 2\n").unwrap();
    assert_eq!(code(&plateau(&["check", "out"], dir.path())), 1);
}

#[test]
fn reflect_flat_y_solution() {
    let dir = flat_y_setup("");
    assert_eq!(code(&plateau(&["solve", "--config", "run.toml", "--out", "out", "--resolution", "4"], dir.path())), 0);
    let o = plateau(&["reflect", "out", "--sheet", "2", "--out", "ext"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ext/certificate.json")).unwrap()).unwrap();
    assert!(cert["certificate"]["max_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(cert["sheet"], 2);
    let ext = read_obj(dir.path().join("ext/extended.obj"));
    assert!(ext.params.iter().any(|p| p[1] < 0.0));
    assert_eq!(code(&plateau(&["reflect", "out", "--sheet", "4"], dir.path())), 1);
    assert_eq!(code(&plateau(&["reflect", "out", "--node", "0"], dir.path())), 1);
}

#[test]
fn identical_sheets_reflect_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let domain = half_disk_domain(4, 8).unwrap();
    let gluing = GluingData::identity(&domain);
    let map = PiecewiseMap::from_fn(&domain, &gluing, 3, |_, p| vec![p[0], p[1], 0.3 * p[0] * p[1]]);
    write_sheets(&dir.path().join("same"), &map);
    assert_eq!(code(&plateau(&["reflect", "same"], dir.path())), 0);
    let ext = read_obj(dir.path().join("same/extended.obj"));
    for (p, q) in ext.params.iter().zip(ext.positions.iter()) {
        let expect = [p[0], p[1].abs(), 0.3 * p[0] * p[1].abs()];
        for c in 0..3 {
            assert!((q[c] - expect[c]).abs() < 1e-15);
        }
    }
}

#[test]
fn reflect_rejects_a_branch_point() {
    let dir = tempfile::tempdir().unwrap();
    let domain = half_disk_domain(4, 8).unwrap();
    let gluing = GluingData::identity(&domain);
    write_sheets(&dir.path().join("sq"), &squared_y_map(&domain, &gluing));
    let o = plateau(&["reflect", "sq"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("sq/extended.obj").exists());
    // away from the origin the same map is regular
    write_sheets(&dir.path().join("flat"), &affine_y_map(&domain, &gluing, flat_y_frames()));
    assert_eq!(code(&plateau(&["reflect", "sq", "--node", "2"], dir.path())), 0);
    assert_eq!(code(&plateau(&["reflect", "flat"], dir.path())), 0);
}

fn curve_file(dir: &Path, name: &str, data: &AnalyticCurveData) {
    fs::write(dir.join(name), data.to_json()).unwrap();
}

fn sampled(n: usize, lo: f64, hi: f64, gamma: impl Fn(f64) -> [f64; 3], normal: impl Fn(f64) -> [f64; 3]) -> AnalyticCurveData {
    let t: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let g = Positions::from_rows(3, t.iter().map(|&s| gamma(s)));
    let nn = Positions::from_rows(3, t.iter().map(|&s| normal(s)));
    AnalyticCurveData::new(t, g, nn, NormalKind::Conormal).unwrap()
}

#[test]
fn bjorling_line_gives_three_half_planes() {
    let dir = tempfile::tempdir().unwrap();
    curve_file(dir.path(), "line.json", &sampled(33, -1.0, 1.0, |t| [t, 0.0, 0.0], |_| [0.0, 1.0, 0.0]));
    let o = plateau(&["bjorling", "line.json", "--out", "patches"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let frames = flat_y_frames();
    for (i, n) in frames.iter().enumerate() {
        let patch = read_obj(dir.path().join(format!("patches/patch_{}.obj", i + 1)));
        for (p, q) in patch.params.iter().zip(patch.positions.iter()) {
            let expect = [p[0], p[1] * n[1], p[1] * n[2]];
            for c in 0..3 {
                assert!((q[c] - expect[c]).abs() < 1e-12);
            }
        }
    }
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("patches/bjorling.json")).unwrap()).unwrap();
    assert_eq!(doc["fit_residuals"].as_array().unwrap().len(), 3);
    assert_eq!(doc["half"], "plus");
}

#[test]
fn bjorling_circle_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let circle = sampled(256, 0.0, 2.0 * PI, |t| [t.cos(), t.sin(), 0.0], |_| [0.0, 0.0, 1.0]);
    curve_file(dir.path(), "circle.json", &circle);
    let o = plateau(&["bjorling", "circle.json", "--half", "minus", "--out", "c"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c/bjorling.json")).unwrap()).unwrap();
    assert!(doc["fit_residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1e-8));

    fs::write(dir.path().join("strict.toml"), "[bjorling]\nmax_fit_residual = 1e-30\n").unwrap();
    let o = plateau(&["bjorling", "circle.json", "--config", "strict.toml", "--out", "s"], dir.path());
    assert_eq!(code(&o), 4);

    let skew = serde_json::json!({
        "t": [0.0, 0.5, 1.0, 1.5, 2.0],
        "gamma": [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [1.5, 0.0, 0.0], [2.0, 0.0, 0.0]],
        "normal": [[0.6, 0.8, 0.0], [0.6, 0.8, 0.0], [0.6, 0.8, 0.0], [0.6, 0.8, 0.0], [0.6, 0.8, 0.0]],
    });
    fs::write(dir.path().join("skew.json"), skew.to_string()).unwrap();
    assert_eq!(code(&plateau(&["bjorling", "skew.json"], dir.path())), 1);
}

#[test]
fn help_states_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = plateau(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["inner_tolerance = 1e-10", "max_outer_iterations = 200", "angle_degrees = 1.0", "degree = 24", "radial = 8"] {
        assert!(text.contains(key), "{key}");
    }
}
