use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cheb2relu::io;
use cheb2relu::spline::{sample_to_spline, Mesh};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cheb2relu"));
    c.env_remove("CHEB2RELU_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parse_coeffs(text: &[u8]) -> Vec<f64> {
    io::read_coeffs(text).unwrap().coeffs().to_vec()
}

#[test]
fn coeffs_of_t3() {
    let o = run(&["coeffs", "--expr", "T3", "--degree", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = parse_coeffs(&o.stdout);
    for (a, b) in c.iter().zip([0.0, 0.0, 0.0, 1.0]) {
        assert!((a - b).abs() < 1e-14, "{c:?}");
    }
}

#[test]
fn runge_interpolant_matches_barycentric_oracle() {
    let p = 32;
    let o = run(&["coeffs", "--expr", "runge", "--degree", "32", "--interval", "-1", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = parse_coeffs(&o.stdout);
    let runge = |x: f64| 1.0 / (1.0 + 25.0 * x * x);
    let nodes: Vec<f64> = (0..=p).map(|j| (std::f64::consts::PI * j as f64 / p as f64).cos()).collect();
    let w: Vec<f64> = (0..=p)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == p { 0.5 * s } else { s }
        })
        .collect();
    let bary = |x: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for (xj, wj) in nodes.iter().zip(&w) {
            if x == *xj {
                return runge(x);
            }
            let q = wj / (x - xj);
            num += q * runge(*xj);
            den += q;
        }
        num / den
    };
    let cheb = |x: f64| c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * x.acos()).cos()).sum::<f64>();
    let grid: Vec<f64> = (0..=4000).map(|i| -1.0 + i as f64 / 2000.0).collect();
    let err_series = grid.iter().map(|&x| (cheb(x) - runge(x)).abs()).fold(0.0, f64::max);
    let err_oracle = grid.iter().map(|&x| (bary(x) - runge(x)).abs()).fold(0.0, f64::max);
    assert!((err_series - err_oracle).abs() <= 1e-9, "{err_series} vs {err_oracle}");
}

#[test]
fn wrong_sample_count_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "s.csv", "value\n1\n2\n");
    let o = run(&["coeffs", "--samples", s(&f), "--degree", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("p+1 = 4"), "{}", stderr(&o));
    let f = write(&dir, "ok.csv", "value\n1\n2\n3\n");
    let o = run(&["coeffs", "--samples", s(&f), "--degree", "2", "--interval", "0", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(io::read_coeffs(&o.stdout[..]).unwrap().interval(), (0.0, 4.0));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&["coeffs", "--degree", "3"])), 2);
    assert_eq!(code(&run(&["coeffs", "--degree", "3", "--expr", "nope"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let o = bin().args(["coeffs", "--expr", "T2", "--degree", "2"]).env("CHEB2RELU_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["coeffs", "--expr", "T2", "--degree", "2"]).env("CHEB2RELU_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
}

fn mesh_files(dir: &TempDir, nodes: &[f64], degrees: &[usize]) -> (PathBuf, PathBuf) {
    let n: String = nodes.iter().map(|x| format!("{x}\n")).collect();
    let d: String = degrees.iter().map(|x| format!("{x}\n")).collect();
    (write(dir, "nodes.csv", &format!("node\n{n}")), write(dir, "degrees.csv", &format!("degree\n{d}")))
}

fn report_values(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn emulate_linear_target() {
    let dir = TempDir::new().unwrap();
    let (m, d) = mesh_files(&dir, &[-1.0, 0.0, 0.5, 1.0], &[1, 3, 2]);
    let out = dir.path().join("net.json");
    let o = run(&["emulate", "--mesh", s(&m), "--degrees", s(&d), "--expr", "T1", "--eps", "1e-3", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = report_values(&dir.path().join("net.report.json"));
    for e in rep["entries"].as_array().unwrap() {
        assert!(e["value"].as_f64().unwrap() <= 1e-14, "{e}");
    }
    let net: cheb2relu::nn::NeuralNetwork = io::load_json(&out).unwrap();
    assert!((net.realize(&[0.3]).unwrap()[0] - 0.3).abs() < 1e-14);
}

#[test]
fn emulate_singular_power_on_geometric_mesh() {
    let dir = TempDir::new().unwrap();
    let n = 6;
    let nodes: Vec<f64> = std::iter::once(0.0).chain((0..n).map(|i| 0.5f64.powi((n - 1 - i) as i32))).collect();
    let degrees: Vec<usize> = (1..=n).collect();
    let (m, d) = mesh_files(&dir, &nodes, &degrees);
    let out = dir.path().join("net.json");
    let rep = dir.path().join("rep.json");
    let o = run(&[
        "emulate", "--mesh", s(&m), "--degrees", s(&d), "--expr", "xpow0.6", "--eps", "1e-3", "--out", s(&out), "--report",
        s(&rep),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report_values(&rep);
    let h1 = r["bound_checks"].as_array().unwrap().iter().find(|c| c["name"].as_str().unwrap().contains("H1")).unwrap();
    assert_eq!(h1["satisfied"], true);
}

#[test]
fn discontinuous_values_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (m, d) = mesh_files(&dir, &[0.0, 0.5, 1.0], &[1, 1]);
    let vals = write(&dir, "v.csv", "element_index,cc_point,value\n0,0.5,1\n0,0,0\n1,1,0\n1,0.5,2\n");
    let out = dir.path().join("net.json");
    let o = run(&["emulate", "--mesh", s(&m), "--degrees", s(&d), "--values", s(&vals), "--eps", "1e-3", "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let vals = write(&dir, "v.csv", "element_index,cc_point,value\n0,0.5,1\n0,0,0\n1,1,0\n1,0.5,1\n");
    let o = run(&["emulate", "--mesh", s(&m), "--degrees", s(&d), "--values", s(&vals), "--eps", "1e-3", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn study_rows(path: &Path) -> Vec<cheb2relu::studies::StudyRecord> {
    io::read_study(io::open(path).unwrap()).unwrap()
}

#[test]
fn hp_study_writes_rows_and_fit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("hp.csv");
    let fit = dir.path().join("fit.json");
    let o = run(&["study", "hp", "--alpha", "0.6", "--sigma", "0.5", "--Nmax", "10", "--out", s(&out), "--fit", s(&fit)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = study_rows(&out);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
    let f = report_values(&fit);
    let first = &f.as_array().unwrap()[0];
    assert!(first["slope"].as_f64().unwrap() < 0.0 && first["r2"].as_f64().unwrap() >= 0.98);

    // the free-knot pipeline on the same splines reproduces the hp rows
    let fk = dir.path().join("fk.csv");
    let o = run(&["study", "free-knot", "--alpha", "0.6", "--sigma", "0.5", "--Nmin", "3", "--Nmax", "5", "--out", s(&fk)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for (a, b) in study_rows(&fk).iter().zip(&rows[2..5]) {
        assert!(a.same_result(b), "{a:?} vs {b:?}");
    }
}

#[test]
fn p_version_error_is_monotone() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.csv");
    let o = run(&["study", "p-version", "--expr", "sin2pix", "--N", "4", "--pmax", "12", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = study_rows(&out);
    assert_eq!(rows.len(), 12);
    for w in rows.windows(2) {
        assert!(w[1].error_h1 < w[0].error_h1, "{rows:?}");
    }
}

#[test]
fn round_trip_of_emulated_network() {
    let dir = TempDir::new().unwrap();
    let nodes = [0.0, 0.7, 2.0];
    let degrees = [8, 5];
    let (m, d) = mesh_files(&dir, &nodes, &degrees);
    let net = dir.path().join("net.json");
    let o = run(&["emulate", "--mesh", s(&m), "--degrees", s(&d), "--expr", "sin2pix", "--eps", "1e-4", "--out", s(&net)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rt = dir.path().join("rt.json");
    let o = run(&["roundtrip", "--net", s(&net), "--mesh", s(&m), "--degrees", s(&d), "--eps", "1e-4", "--out", s(&rt)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report_values(&rt);
    assert_eq!(r["extraction"], "OutputLayer");
    let mesh = Mesh::new(nodes.to_vec(), degrees.to_vec()).unwrap();
    let v = sample_to_spline(&|x: f64| (2.0 * std::f64::consts::PI * x).sin(), &mesh).unwrap();
    let got = r["spline"]["series"].as_array().unwrap();
    for (g, want) in got.iter().zip(v.series()) {
        let g: Vec<f64> = g["coeffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        for (a, b) in g.iter().zip(want.coeffs()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let (m, d) = mesh_files(&dir, &[0.0, 0.25, 1.0], &[4, 6]);
    let mut bodies = Vec::new();
    for k in 0..2 {
        let net = dir.path().join(format!("n{k}.json"));
        let o = run(&["emulate", "--mesh", s(&m), "--degrees", s(&d), "--expr", "runge", "--eps", "1e-3", "--out", s(&net)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        bodies.push(std::fs::read(&net).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let a = run(&["coeffs", "--expr", "absx", "--degree", "17"]);
    let b = run(&["coeffs", "--expr", "absx", "--degree", "17"]);
    assert_eq!(a.stdout, b.stdout);
}
