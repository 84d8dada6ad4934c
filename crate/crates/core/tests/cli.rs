use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use savopt::harness::verify::operator_negativity;
use savopt::harness::{read_csv, run_experiment, ExperimentConfig, Status, CSV_HEADER};
use savopt::{LinearOperator, Operator, Result};
use tempfile::TempDir;

fn savopt(args: &[&str], paths: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_savopt"))
        .args(args)
        .args(paths)
        .output()
        .expect("spawn savopt")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

const NOISY: &str = "iterations = 200\nnoise = 0.05\n\
    [problem]\nname = \"quadratic\"\ninit = \"ones\"\nseed = 4\n\
    [optimizer]\nname = \"adaptive_rsav\"\nlr = 0.1\n";

const ROSENBROCK: &str = "iterations = 1000\n\
    [problem]\nname = \"rosenbrock\"\ndimension = 2\ninit = \"rosenbrock-2d-start\"\n";

#[test]
fn run_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "noisy.toml", NOISY);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for trace in [&a, &b] {
        let out = savopt(&["run", "--config"], &[&cfg, Path::new("--trace"), trace]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_csv(&a).unwrap().len(), 201);

    let c = dir.path().join("c.csv");
    savopt(
        &["--seed", "5", "run", "--config"],
        &[&cfg, Path::new("--trace"), &c],
    );
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn json_trace_is_written() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "noisy.toml", NOISY);
    let path = dir.path().join("t.json");
    let out = savopt(
        &["run", "--format", "json", "--config"],
        &[&cfg, Path::new("--trace"), &path],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(v.as_array().map(|a| a.len()), Some(201));
}

#[test]
fn zero_iterations_give_single_record() {
    let cfg =
        ExperimentConfig::from_toml(&NOISY.replace("iterations = 200", "iterations = 0")).unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].k, 0);
    assert_eq!(out.summary.status, Status::Ok);
}

#[test]
fn documented_run_results() {
    let quad = "iterations = 1000\n[problem]\nname = \"quadratic\"\ninit = \"ones\"\n\
                [optimizer]\nname = \"gd\"\nlr = 0.01\n";
    let out = run_experiment(&ExperimentConfig::from_toml(quad).unwrap()).unwrap();
    assert!((out.summary.final_loss - 0.3351).abs() <= 1e-3);
    assert_eq!(out.records.len(), 1001);

    let rosen = format!("{ROSENBROCK}[optimizer]\nname = \"gd\"\nlr = 1e-4\n");
    let out = run_experiment(&ExperimentConfig::from_toml(&rosen).unwrap()).unwrap();
    assert!((out.summary.final_loss - 0.7142).abs() <= 1e-3);
}

#[test]
fn shifted_energy_stays_positive() {
    let text = format!("{ROSENBROCK}[optimizer]\nname = \"adaptive_rsav\"\nlr = 1.0\n");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.records.iter().all(|r| r.f + 1e-5 >= 1e-12));
    assert!(out.records.iter().all(|r| r.dt.unwrap() >= 1e-6));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let diverging = write(
        &dir,
        "gd.toml",
        &format!("{ROSENBROCK}[optimizer]\nname = \"gd\"\nlr = 1.0\n"),
    );
    let out = savopt(&["run", "--config"], &[&diverging]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "diverge");

    let unknown = write(
        &dir,
        "bad.toml",
        "iterations = 10\nbogus = 1\n[problem]\nname = \"quadratic\"\n",
    );
    let out = savopt(&["run", "--config"], &[&unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        savopt(&["run", "--config"], &[&missing]).status.code(),
        Some(2)
    );
    assert_eq!(savopt(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(
        savopt(&["verify", "--scope", "sav"], &[]).status.code(),
        Some(0)
    );
}

#[test]
fn compare_renders_table_and_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cmp.toml",
        &format!(
            "{ROSENBROCK}[compare]\nstep_sizes = [1e-4, 1e-2]\n\
             optimizers = [{{ name = \"gd\" }}, {{ name = \"adaptive_rsav\" }}]\n"
        ),
    );
    let out_dir = dir.path().join("cells");
    let out = savopt(
        &["compare", "--config"],
        &[&cfg, Path::new("--out-dir"), &out_dir],
    );
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    assert!(lines[0].contains("dt=0.0001") && lines[0].contains("dt=0.01"));
    assert!(
        lines[2].starts_with("gd") && lines[2].contains("0.7142") && lines[2].contains("diverge")
    );
    assert!(lines[3].starts_with("adaptive_rsav") && !lines[3].contains("diverge"));
    let files = fs::read_dir(&out_dir).unwrap().count();
    assert_eq!(files, 5, "four traces and summary.txt");

    let all_diverge = write(
        &dir,
        "div.toml",
        &format!(
            "{ROSENBROCK}[compare]\nstep_sizes = [1e-2, 1.0]\noptimizers = [{{ name = \"gd\" }}]\n"
        ),
    );
    let out = savopt(
        &["compare", "--config"],
        &[&all_diverge, Path::new("--out-dir"), &out_dir],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plot_overlays_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "noisy.toml", NOISY);
    let (a, b) = (dir.path().join("first.csv"), dir.path().join("second.csv"));
    savopt(&["run", "--config"], &[&cfg, Path::new("--trace"), &a]);
    savopt(
        &["--seed", "8", "run", "--config"],
        &[&cfg, Path::new("--trace"), &b],
    );
    let svg = dir.path().join("loss.svg");
    let out = savopt(&["plot", "--out"], &[&svg, &a, &b]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 2);
    assert_eq!(text.matches(r#"class="legend""#).count(), 2);
    assert!(text.contains(">first<") && text.contains(">second<"));
}

#[test]
fn empty_trace_plot_and_header() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "empty.csv", &format!("{CSV_HEADER}\n"));
    assert!(read_csv(&path).unwrap().is_empty());
    let svg = dir.path().join("empty.svg");
    assert_eq!(
        savopt(&["plot", "--out"], &[&svg, &path]).status.code(),
        Some(0)
    );
}

/// `-(-σΔ)`: a deliberately wrong sign.
struct NegatedLaplacian(LinearOperator);

impl Operator for NegatedLaplacian {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.apply(v)?.into_iter().map(|x| -x).collect())
    }

    fn solve_shifted(&self, dt: f64, b: &[f64]) -> Result<Vec<f64>> {
        self.0.solve_shifted(-dt, b)
    }
}

#[test]
fn negated_laplacian_fails_nonnegativity() {
    let good = LinearOperator::laplacian(0.5, 16).unwrap();
    assert!(operator_negativity(&good, 50, 1).unwrap() <= 1e-12);
    let bad = NegatedLaplacian(good);
    assert!(operator_negativity(&bad, 50, 1).unwrap() > 1e-3);
}
