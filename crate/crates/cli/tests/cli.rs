use std::path::Path;
use std::process::Command;

use cstk::io::{save_field, save_connection_path, Field};
use cstk::{named, TorusGrid};
use serde_json::Value;

fn cstk(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cstk")).args(args).env_remove("CSTK_JOBS").output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = cstk(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn usage_error(args: &[&str], flag: &str) {
    let out = cstk(args);
    assert_eq!(out.status.code(), Some(2), "{args:?}");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(flag), "{err}");
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cs_eval_of_zero_connection() {
    let out = cstk(&["cs", "eval", "--grid", "16", "--connection", "zero"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"cs\": 0.0}\n");
}

#[test]
fn rep_solve_is_byte_identical_across_runs() {
    let args = ["rep", "solve", "--presentation", "<a,b|[a,b]>", "--trials", "10", "--seed", "1"];
    let (a, b) = (cstk(&args), cstk(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let trefoil = ["rep", "solve", "--presentation", "trefoil", "--trials", "20", "--seed", "7"];
    assert_eq!(cstk(&trefoil).stdout, cstk(&trefoil).stdout);
}

#[test]
fn spectral_flow_of_bundled_constant_path() {
    let v = ok_json(&["spec", "flow", "--path", "constant", "--epsilon", "1e-6"]);
    assert_eq!(v, serde_json::json!({"sf": 0, "warnings": []}));
    let v = ok_json(&["spec", "flow", "--path", "constant:3", "--snapshots"]);
    assert_eq!(v["snapshots"].as_array().unwrap().len(), 3);
}

#[test]
fn validation_errors_name_the_flag() {
    usage_error(&["cs", "eval", "--grid", "3"], "--grid");
    usage_error(&["cs", "eval", "--grid", "x"], "--grid");
    usage_error(&["cs", "eval", "--connection", "missing.cstk"], "--connection");
    usage_error(&["cs", "eval", "--connection", "random:abc"], "--connection");
    usage_error(&["rep", "count", "--presentation", "<a | a^>"], "--presentation");
    usage_error(&["rep", "solve", "--presentation", "trefoil", "--trials", "0"], "--trials");
    usage_error(&["hol", "loop", "--loop", "axis:7"], "--loop");
    usage_error(&["spec", "flow", "--path", "constant", "--epsilon=-1"], "--epsilon");
    usage_error(&["spec", "kernel", "--solver", "lanczos"], "--solver");
    usage_error(&["rep", "cohomology", "--presentation", "trefoil", "--rep", "trivial", "--restriction"], "--restriction");
    usage_error(&["cs", "bogus"], "bogus");
}

#[test]
fn grid_must_match_field_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.cstk");
    save_field(&file, &Field::Algebra(named::flat_constant(TorusGrid::cube(3, 8).unwrap()).unwrap())).unwrap();
    usage_error(&["cs", "eval", "--grid", "16", "--connection", path_str(&file)], "--grid");
    let v = ok_json(&["cs", "eval", "--grid", "8", "--connection", path_str(&file)]);
    assert!(v["cs"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn non_convergence_is_structured_with_exit_3() {
    let out = cstk(&["gauge", "flatten", "--connection", "random:0.5", "--max-iters", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"], "non_convergence");
    assert_eq!(v["iterations"], 2);
    assert!(v["residual"].as_f64().unwrap() > 0.0);
}

#[test]
fn flatten_saves_a_flat_connection() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("flat.cstk");
    let v = ok_json(&["gauge", "flatten", "--grid", "8", "--connection", "random:0.05", "--tol", "1e-8", "--save", path_str(&file)]);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    let rep = ok_json(&["hol", "rep", "--grid", "8", "--connection", path_str(&file)]);
    assert_eq!(rep["images"].as_object().unwrap().len(), 3);
}

#[test]
fn out_flag_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("kernel.csv");
    let out = cstk(&["spec", "kernel", "--count", "12", "--format", "csv", "--out", path_str(&file)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn kernel_and_triplet_export() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.txt");
    let v = ok_json(&["spec", "kernel", "--grid", "4", "--export", path_str(&file)]);
    assert_eq!(v["dim"], 768);
    assert_eq!(v["kernel_dim"], 12);
    let m = cstk::spectral::OperatorMatrix::from_triplet_text(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(m.rows(), 768);
    assert_eq!(m.symmetry_defect(), 0.0);
    let it = ok_json(&["spec", "kernel", "--grid", "4", "--solver", "iterative", "--count", "14"]);
    assert_eq!(it["kernel_dim"], 12);
    let lap = ok_json(&["spec", "kernel", "--grid", "4", "--operator", "laplacian0"]);
    assert_eq!(lap["kernel_dim"], 3);
}

#[test]
fn eta_of_zero_connection() {
    let v = ok_json(&["spec", "eta", "--grid", "4"]);
    assert_eq!(v["dim"], 768);
    assert!(v["eta"].is_i64());
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(
        &cfg,
        "command = \"rep count\"\nseed = 5\n[rep.count]\npresentation = \"trefoil\"\ntrials = 12\n[spec.flow]\nepsilon = 1e-3\n",
    )
    .unwrap();
    let v = ok_json(&["--config", path_str(&cfg)]);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["trials"], 12);
    let v = ok_json(&["rep", "count", "--config", path_str(&cfg), "--trials", "3", "--seed", "9"]);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["trials"], 3);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "color = \"red\"\n").unwrap();
    usage_error(&["cs", "eval", "--config", path_str(&bad)], "--config");
    usage_error(&["cs", "eval", "--config", "nowhere.toml"], "--config");
}

#[test]
fn jobs_from_environment() {
    let run = |jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_cstk"))
            .args(["cs", "eval", "--grid", "8"])
            .env("CSTK_JOBS", jobs)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("0").status.code(), Some(2));
    assert_eq!(cstk(&["cs", "eval", "--grid", "8", "--jobs", "1"]).status.code(), Some(0));
}

#[test]
fn holonomy_and_representation_files() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("x.loop");
    std::fs::write(&lp, "3 1 0 0\n0 0 0\n0.25 0 0\n0.5 0 0\n0.75 0 0\n1 0 0\n").unwrap();
    let v = ok_json(&["hol", "loop", "--grid", "8", "--connection", "flat-constant", "--loop", path_str(&lp), "--steps", "256"]);
    let axis = ok_json(&["hol", "loop", "--grid", "8", "--connection", "flat-constant", "--loop", "axis:0", "--steps", "256"]);
    for i in 0..4 {
        let (a, b) = (v["quaternion"][i].as_f64().unwrap(), axis["quaternion"][i].as_f64().unwrap());
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(v["matrix"].as_array().unwrap().len(), 2);
    let rep = dir.path().join("rho.json");
    ok_json(&["hol", "rep", "--grid", "8", "--connection", "flat-constant", "--save", path_str(&rep)]);
    let dims = ok_json(&["rep", "cohomology", "--presentation", "z3", "--rep", path_str(&rep)]);
    assert_eq!(dims["h0"], 1);
    assert_eq!(dims["h1"], 3);
    usage_error(&["hol", "rep", "--grid", "8", "--connection", "nonflat"], "flat");
}

#[test]
fn surface_restriction_from_saved_representation() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("trivial.json");
    std::fs::write(&rep, "{\"x1\": [1,0,0,0], \"x2\": [1,0,0,0], \"y1\": [1,0,0,0], \"y2\": [1,0,0,0]}").unwrap();
    let v = ok_json(&["rep", "cohomology", "--presentation", "genus2", "--rep", path_str(&rep), "--restriction"]);
    assert_eq!(v["h1"], 12);
    assert!(v["restriction_image_dim"].is_u64());
}

#[test]
fn line_bundle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::cube(2, 8).unwrap();
    let samples = named::connection_path("segment:2.0:5", g, 3).unwrap().unwrap();
    save_connection_path(dir.path(), &samples).unwrap();
    let pt = ok_json(&["lines", "pt", "--grid", "8", "--path", path_str(dir.path())]);
    let cyl = ok_json(&["lines", "cylinder-cs", "--grid", "8", "--path", path_str(dir.path())]);
    assert!(pt["residuals"][0].as_f64().unwrap() < 1e-10);
    assert!(cyl["residuals"][0].as_f64().unwrap() < 1e-10);
    assert!((pt["value_re"].as_f64().unwrap() - cyl["value_re"].as_f64().unwrap()).abs() < 1e-10);
    let c = ok_json(&["lines", "cocycle-check", "--grid", "16", "--amplitude", "0.5"]);
    let modulus = c["value_re"].as_f64().unwrap().hypot(c["value_im"].as_f64().unwrap());
    assert!((modulus - 1.0).abs() < 1e-12);
    assert!(c["residuals"][0].as_f64().unwrap() < 0.1);
}

#[test]
fn degree_and_gauge_shift() {
    let v = ok_json(&["cs", "degree"]);
    assert_eq!(v["degree"], 1);
    let v = ok_json(&["cs", "gauge-shift", "--connection", "random:0.5"]);
    assert_eq!(v["nearest_integer"], 1);
    assert!(v["residual"].as_f64().unwrap() < 0.05);
    usage_error(&["cs", "degree", "--grid", "6"], "jump");
}

#[test]
fn chern_weil_on_four_torus() {
    let v = ok_json(&["cs", "chern-weil", "--grid", "6"]);
    assert!(v["integral_dalpha"].as_f64().unwrap().abs() < 1e-10);
    usage_error(&["cs", "chern-weil", "--grid", "6,6,6"], "4");
}

#[test]
fn help_goes_to_stdout() {
    let out = cstk(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("spec"));
}
