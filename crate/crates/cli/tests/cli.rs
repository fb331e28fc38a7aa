use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SCENARIO: &str = r#"
delta0 = 0.5

[potential]
label = "harmonic"
omega = 1.0

[grid]
n = 1024
x_min = -20.0
dx = 0.0390625

[search]
t_stride = 0.03125

[output]
dir = "out"
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self::with(SCENARIO)
    }

    fn with(scenario: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scenario.toml"), scenario).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_wpk"))
            .current_dir(self.dir.path())
            .args(["--config", "scenario.toml"])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|row| row.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn missing_input_is_a_usage_error() {
    let ws = Workspace::new();
    let out = ws.run(&["detect", "absent.wpk"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.wpk"));
}

#[test]
fn unknown_scenario_keys_are_rejected() {
    let ws = Workspace::with("delta0 = 0.5\nbogus = 1\n");
    let out = ws.run(&["verify", "flow"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn oversized_window_for_the_oscillator_is_rejected() {
    let ws = Workspace::with(&SCENARIO.replace("omega = 1.0", "omega = 4.0"));
    assert_eq!(code(&ws.run(&["verify", "flow"])), 2);
}

#[test]
fn mismatched_grid_is_rejected() {
    let ws = Workspace::new();
    ws.ok(&["gen", "gaussian", "--output", "g.wpk"]);
    fs::write(ws.path("scenario.toml"), SCENARIO.replace("n = 1024", "n = 512").replace("0.0390625", "0.078125"))
        .unwrap();
    assert_eq!(code(&ws.run(&["detect", "g.wpk"])), 2);
}

#[test]
fn detect_recovers_a_planted_packet() {
    let ws = Workspace::new();
    ws.ok(&["gen", "packet", "--lambda", "0.5", "--x0", "1", "--xi0", "-2", "--output", "p.wpk"]);
    let out = ws.ok(&["detect", "p.wpk"]);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, ws.json("out/detection.json"));
    assert_eq!(printed["format"], "wpk-report/1");
    let r = &printed["result"];
    assert!((r["lambda"].as_f64().unwrap() - 0.5).abs() < 0.01, "{r}");
    assert!(r["t0"].as_f64().unwrap().abs() <= 0.03125, "{r}");
    assert!((r["x0"].as_f64().unwrap() - 1.0).abs() < 0.05, "{r}");
    assert!((r["xi0"].as_f64().unwrap() + 2.0).abs() < 0.1, "{r}");
    assert!((r["abs"].as_f64().unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-3, "{r}");
}

#[test]
fn zero_field_has_no_bubble() {
    let ws = Workspace::new();
    ws.ok(&["gen", "packet", "--output", "p.wpk"]);
    // A zero-amplitude chirp is not available from gen; scale by hand instead.
    let f = wpk::field::load_field(ws.path("p.wpk")).unwrap();
    wpk::field::save_field(&f.scaled(wpk::Complex64::new(0.0, 0.0)), ws.path("zero.wpk")).unwrap();
    ws.ok(&["detect", "zero.wpk"]);
    let r = &ws.json("out/detection.json")["result"];
    assert_eq!(r["abs"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluation_budget_is_reported() {
    let ws = Workspace::new();
    ws.ok(&["gen", "chirp", "--a", "2", "--output", "c.wpk"]);
    ws.ok(&["detect", "c.wpk", "--max-evals", "10"]);
    let report = ws.json("out/detection.json");
    assert_eq!(report["scenario"]["search"]["max_evals"], 10);
    assert_eq!(report["result"]["budget_exceeded"], true);
}

#[test]
fn two_packets_decompose_into_two_bubbles() {
    let ws = Workspace::new();
    ws.ok(&["gen", "two-packet", "--output", "t.wpk"]);
    ws.ok(&["decompose", "t.wpk"]);
    let rows = read_csv(&ws.path("out/ledger.csv"));
    assert_eq!(rows.len(), 2);
    let remainder: f64 = rows[1][7].parse().unwrap();
    assert!(remainder < 1e-3 * 2.0 / (2.0 * PI), "{rows:?}");
    let bubbles = ws.json("out/decomposition.json");
    assert_eq!(bubbles["result"].as_array().unwrap().len(), 2);
}

#[test]
fn hls_interval_of_a_gaussian_contains_the_origin() {
    let ws = Workspace::new();
    ws.ok(&["gen", "gaussian", "--output", "g.wpk"]);
    ws.ok(&["hls", "g.wpk", "--q", "8"]);
    let r = &ws.json("out/interval.json")["result"];
    assert_eq!(r["r"].as_f64().unwrap(), 4.0);
    assert_eq!(r["admissible"], true);
    assert_eq!(r["passed"], true);
    let c = r["interval"]["t_center"].as_f64().unwrap();
    let h = r["interval"]["half_length"].as_f64().unwrap();
    assert!(c - h <= 0.0 && c + h >= 0.0, "{r}");
}

#[test]
fn hls_rejects_inadmissible_defaults() {
    let ws = Workspace::new();
    ws.ok(&["gen", "gaussian", "--output", "g.wpk"]);
    assert_eq!(code(&ws.run(&["hls", "g.wpk", "--q", "3"])), 2);
}

#[test]
fn kernel_is_positive_on_equal_points() {
    let ws = Workspace::new();
    fs::write(
        ws.path("q.csv"),
        "x1,xi1,x2,xi2,x3,xi3,x4,xi4\n0,0,0,0,0,0,0,0\n1,0.5,1,0.5,1,0.5,1,0.5\n0,0,0,4,0,0,0,4\n",
    )
    .unwrap();
    ws.ok(&["kernel", "q.csv"]);
    let rows = read_csv(&ws.path("out/kernel.csv"));
    assert_eq!(rows.len(), 3);
    let k: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(k[0] > 0.0 && k[1] > 0.0);
    let im: f64 = rows[0][10].parse().unwrap();
    assert!(im.abs() <= 1e-12 * k[0]);
    assert!(k[2] < k[0], "{k:?}");
}

#[test]
fn verify_flow_passes_on_the_oscillator() {
    let ws = Workspace::new();
    let out = ws.ok(&["verify", "flow"]);
    let tap = String::from_utf8(out.stdout).unwrap();
    assert!(tap.starts_with("TAP version 13\n1..7\n"), "{tap}");
    assert!(!tap.contains("not ok"), "{tap}");
}

#[test]
fn verify_fails_on_an_oversized_step() {
    let ws = Workspace::with(&SCENARIO.replace("[output]", "[evolve]\ndt = 0.5\n\n[output]"));
    let out = ws.run(&["verify", "propagator"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("not ok 1 - propagator/convergence"));
}

#[test]
fn outputs_are_deterministic() {
    let ws = Workspace::new();
    ws.ok(&["--seed", "7", "gen", "corpus", "--count", "3"]);
    let first: Vec<Vec<u8>> =
        (0..3).map(|k| fs::read(ws.path(&format!("out/corpus/corpus_{k:03}.wpk"))).unwrap()).collect();
    ws.ok(&["--seed", "7", "gen", "corpus", "--count", "3"]);
    for (k, bytes) in first.iter().enumerate() {
        assert_eq!(&fs::read(ws.path(&format!("out/corpus/corpus_{k:03}.wpk"))).unwrap(), bytes);
    }
    let a = ws.ok(&["detect", "out/corpus/corpus_001.wpk"]).stdout;
    let b = ws.ok(&["detect", "out/corpus/corpus_001.wpk"]).stdout;
    assert_eq!(a, b);
}

#[test]
fn corpus_needs_a_seed() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["gen", "corpus"])), 2);
}

#[test]
fn evolve_conserves_mass_and_exports_tables() {
    let ws = Workspace::new();
    ws.ok(&["gen", "packet", "--x0", "2", "--output", "p.wpk"]);
    ws.ok(&["--out", "run", "evolve", "p.wpk", "--t1", "-0.25"]);
    let rows = read_csv(&ws.path("run/norms.csv"));
    assert_eq!(rows.len(), 251);
    let m0: f64 = rows[0][1].parse().unwrap();
    for r in &rows {
        let m: f64 = r[1].parse().unwrap();
        assert!((m - m0).abs() <= 1e-12 * m0);
    }
    assert_eq!(read_csv(&ws.path("run/mixed_norms.csv")).len(), 2);
    assert!(ws.path("run/slices/index.json").exists());
    let r = &ws.json("run/evolve.json")["result"];
    assert_eq!(r["t_start"].as_f64().unwrap(), -0.25);
}

#[test]
fn evolution_reaching_the_box_edge_is_numerical_failure() {
    let small = SCENARIO.replace("n = 1024", "n = 128").replace("x_min = -20.0", "x_min = -2.5");
    let ws = Workspace::with(&small);
    ws.ok(&["gen", "packet", "--xi0", "1", "--output", "p.wpk"]);
    assert_eq!(code(&ws.run(&["evolve", "p.wpk"])), 3);
}
