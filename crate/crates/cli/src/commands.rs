//! Drivers for the experiment subcommands. Every JSON report carries the
//! format string and the resolved scenario.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wpk::concentration::{
    detect_bubble, epsilon_l6, iterate_decomposition, kernel_integral, locate_interval, DetectionReport,
};
use wpk::field::{load_field, lp_norm, mixed_norm_from_slices, save_field};
use wpk::phase_space::{dilate, Window};
use wpk::propagator::{evolve_window, export_spacetime};
use wpk::{Complex64, ComplexField, Grid1D, PhasePoint};

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

pub const FORMAT: &str = "wpk-report/1";
/// Largest tolerated amplitude at the box edges.
pub const BOUNDARY_LIMIT: f64 = 1e-8;

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    format: &'static str,
    command: &'static str,
    scenario: &'a Scenario,
    result: T,
}

fn write_report<T: Serialize>(path: &Path, command: &'static str, sc: &Scenario, result: T) -> Result<String> {
    let text = serde_json::to_string_pretty(&Report { format: FORMAT, command, scenario: sc, result })? + "\n";
    fs::write(path, &text)?;
    Ok(text)
}

fn out_dir(sc: &Scenario) -> Result<PathBuf> {
    fs::create_dir_all(&sc.output.dir)?;
    Ok(sc.output.dir.clone())
}

fn load_input(sc: &Scenario, path: &Path) -> Result<ComplexField> {
    let f = load_field(path).map_err(|source| CliError::Input { context: format!("input {}", path.display()), source })?;
    let grid = sc.grid()?;
    if *f.grid() != grid {
        return Err(CliError::Config(format!(
            "input grid (n = {}, x_min = {}, dx = {}) differs from the scenario grid",
            f.grid().n(),
            f.grid().x_min(),
            f.grid().dx()
        )));
    }
    Ok(f)
}

fn check_boundary(amplitude: f64) -> Result<()> {
    if amplitude > BOUNDARY_LIMIT {
        return Err(CliError::Numerical(format!(
            "boundary amplitude {amplitude:.3e} exceeds {BOUNDARY_LIMIT:e}; enlarge the box"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct MixedNorm {
    q: f64,
    r: f64,
    norm: f64,
}

#[derive(Serialize)]
struct EvolveResult {
    t_start: f64,
    t_end: f64,
    slices: usize,
    initial_mass: f64,
    max_relative_mass_drift: f64,
    mixed_norms: Vec<MixedNorm>,
    boundary_amplitude: f64,
}

/// Records `U(t, 0)f` between 0 and `t1`, exporting slices, a per-slice
/// mass table and the mixed-norm table.
pub fn evolve(sc: &Scenario, input: &Path, t1: Option<f64>) -> Result<()> {
    let p = sc.potential()?;
    let f = load_input(sc, input)?;
    let t1 = t1.unwrap_or(sc.delta0);
    let (lo, hi) = if t1 >= 0.0 { (0.0, t1) } else { (t1, 0.0) };
    if lo == hi {
        return Err(CliError::Config("evolution span is empty".into()));
    }
    let u = evolve_window(&p, &f, 0.0, lo, hi, &sc.evolve)?;
    let dir = out_dir(sc)?;
    export_spacetime(&u, dir.join("slices"))?;

    let m0 = f.mass();
    let mut table = csv::Writer::from_path(dir.join("norms.csv"))?;
    table.write_record(["t", "mass", "relative_mass_drift", "sup", "boundary_amplitude"])?;
    let mut drift = 0.0f64;
    for (t, s) in u.times().iter().zip(u.slices()) {
        let d = if m0 > 0.0 { (s.mass() - m0).abs() / m0 } else { 0.0 };
        drift = drift.max(d);
        table.write_record(&[
            t.to_string(),
            format!("{:.17e}", s.mass()),
            format!("{d:.3e}"),
            format!("{:.17e}", s.max_abs()),
            format!("{:.3e}", s.boundary_amplitude()),
        ])?;
    }
    table.flush()?;

    let mut mixed = Vec::new();
    let mut norms_csv = csv::Writer::from_path(dir.join("mixed_norms.csv"))?;
    norms_csv.write_record(["q", "r", "norm"])?;
    for [q, r] in &sc.output.norms {
        let per_slice = u.slices().iter().map(|s| lp_norm(s, *r)).collect::<wpk::Result<Vec<_>>>()?;
        let norm = mixed_norm_from_slices(u.times(), &per_slice, *q, None)?;
        norms_csv.write_record(&[q.to_string(), r.to_string(), format!("{norm:.17e}")])?;
        mixed.push(MixedNorm { q: *q, r: *r, norm });
    }
    norms_csv.flush()?;

    let boundary = u.boundary_amplitude();
    let result = EvolveResult {
        t_start: lo,
        t_end: hi,
        slices: u.len(),
        initial_mass: m0,
        max_relative_mass_drift: drift,
        mixed_norms: mixed,
        boundary_amplitude: boundary,
    };
    write_report(&dir.join("evolve.json"), "evolve", sc, result)?;
    check_boundary(boundary)
}

pub fn detect(sc: &Scenario, input: &Path, max_evals: Option<usize>) -> Result<()> {
    let p = sc.potential()?;
    let f = load_input(sc, input)?;
    let mut search = sc.search()?;
    if max_evals.is_some() {
        search.max_evals = max_evals;
    }
    let b = detect_bubble(&p, &f, &search)?;
    let eps = epsilon_l6(&p, &f, &search)?;
    let report = DetectionReport::new(&b, eps, f.mass());
    let mut resolved = sc.clone();
    resolved.search.max_evals = search.max_evals;
    let text = write_report(&out_dir(sc)?.join("detection.json"), "detect", &resolved, report)?;
    print!("{text}");
    Ok(())
}

pub fn decompose(sc: &Scenario, input: &Path, max_bubbles: usize) -> Result<()> {
    let p = sc.potential()?;
    let f = load_input(sc, input)?;
    let search = sc.search()?;
    let dec = iterate_decomposition(&p, &f, max_bubbles, sc.search.stop_threshold, &search)?;
    // ε is that of the input; each record's mass is the mass it carries.
    let eps = epsilon_l6(&p, &f, &search)?;
    let records: Vec<DetectionReport> =
        dec.bubbles.iter().zip(&dec.bubble_masses).map(|(b, m)| DetectionReport::new(b, eps, *m)).collect();
    let dir = out_dir(sc)?;
    write_report(&dir.join("decomposition.json"), "decompose", sc, &records)?;
    let mut ledger = fs::File::create(dir.join("ledger.csv"))?;
    dec.write_ledger_csv(&mut ledger)?;
    println!(
        "{} bubble(s); captured mass {:.6e} of {:.6e}; ledger residual {:.2e}",
        dec.bubbles.len(),
        dec.captured_mass(),
        dec.total_mass,
        dec.ledger_residual
    );
    Ok(())
}

/// `r` with `2/q + 1/r = 1/2`, when it exists.
pub fn admissible_r(q: f64) -> Option<f64> {
    (q > 4.0).then(|| 2.0 * q / (q - 4.0))
}

pub fn hls(sc: &Scenario, input: &Path, q: f64, r: Option<f64>) -> Result<()> {
    let p = sc.potential()?;
    let f = load_input(sc, input)?;
    let r = match r.or_else(|| admissible_r(q)) {
        Some(r) => r,
        None => return Err(CliError::Config(format!("no admissible r for q = {q}; pass --r"))),
    };
    let report = locate_interval(&p, &f, q, r, &sc.hls())?;
    let text = write_report(&out_dir(sc)?.join("interval.json"), "hls", sc, &report)?;
    print!("{text}");
    check_boundary(report.boundary_amplitude)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Quadruple {
    pub x1: f64,
    pub xi1: f64,
    pub x2: f64,
    pub xi2: f64,
    pub x3: f64,
    pub xi3: f64,
    pub x4: f64,
    pub xi4: f64,
}

impl Quadruple {
    fn points(&self) -> [PhasePoint; 4] {
        [
            PhasePoint::new(self.x1, self.xi1),
            PhasePoint::new(self.x2, self.xi2),
            PhasePoint::new(self.x3, self.xi3),
            PhasePoint::new(self.x4, self.xi4),
        ]
    }
}

/// Reads a CSV of `x1,xi1,…,x4,xi4` rows and writes `K` for each.
pub fn kernel(sc: &Scenario, list: &Path) -> Result<()> {
    let p = sc.potential()?;
    let params = sc.kernel()?;
    let mut reader = csv::Reader::from_path(list)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", list.display())))?;
    let quads: Vec<Quadruple> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad quadruple list: {e}")))?;
    if quads.is_empty() {
        return Err(CliError::Config("quadruple list is empty".into()));
    }
    use rayon::prelude::*;
    let values: Vec<Complex64> =
        quads.par_iter().map(|q| kernel_integral(&p, q.points(), &params)).collect::<wpk::Result<_>>()?;
    let dir = out_dir(sc)?;
    let mut w = csv::Writer::from_path(dir.join("kernel.csv"))?;
    w.write_record(["x1", "xi1", "x2", "xi2", "x3", "xi3", "x4", "xi4", "k", "re", "im"])?;
    for (q, v) in quads.iter().zip(&values) {
        let row = [q.x1, q.xi1, q.x2, q.xi2, q.x3, q.xi3, q.x4, q.xi4, v.norm(), v.re, v.im];
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    write_report(&dir.join("kernel.json"), "kernel", sc, values.iter().map(|v| v.norm()).collect::<Vec<_>>())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FieldKind {
    /// `π^{-1/4} e^{-x²/2}`.
    Gaussian,
    /// `π(x₀, ξ₀)S_λψ`.
    Packet,
    /// `π((−8, −6))ψ + π((8, 6))ψ`.
    TwoPacket,
    /// Unit Gaussian times `e^{iax²/2}`.
    Chirp,
    /// Seeded unit-mass corpus of packets, chirps, bump trains and dilated Gaussians.
    Corpus,
}

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    pub lambda: f64,
    pub x0: f64,
    pub xi0: f64,
    pub a: f64,
    pub count: usize,
}

fn unit_gaussian(grid: Grid1D) -> Result<ComplexField> {
    let c = std::f64::consts::PI.powf(-0.25);
    Ok(ComplexField::from_fn(grid, |x| Complex64::new(c * (-0.5 * x * x).exp(), 0.0))?)
}

fn chirp(grid: Grid1D, a: f64) -> Result<ComplexField> {
    let c = std::f64::consts::PI.powf(-0.25);
    Ok(ComplexField::from_fn(grid, |x| Complex64::from_polar(c * (-0.5 * x * x).exp(), 0.5 * a * x * x))?)
}

fn normalized(f: ComplexField) -> ComplexField {
    let n = f.norm();
    if n == 0.0 {
        f
    } else {
        f.scaled(Complex64::new(n.recip(), 0.0))
    }
}

fn corpus_member(grid: Grid1D, rng: &mut ChaCha8Rng) -> Result<ComplexField> {
    let w = Window::default();
    let f = match rng.gen_range(0..4) {
        0 => {
            let lambda = 2f64.powf(-rng.gen_range(0.0..3.0));
            let z = PhasePoint::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            Window::scaled(lambda)?.packet(grid, z)
        }
        1 => chirp(grid, rng.gen_range(-4.0..4.0))?,
        2 => {
            let k = rng.gen_range(2..=6);
            let mut f = ComplexField::zeros(grid);
            for j in 0..k {
                let x = 4.5 * (j as f64 - (k - 1) as f64 / 2.0);
                let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                f = f.add(&w.packet(grid, PhasePoint::new(x, rng.gen_range(-2.0..2.0))).scaled(phase))?;
            }
            f
        }
        _ => dilate(2f64.powf(-rng.gen_range(0.0..4.0)), &unit_gaussian(grid)?)?,
    };
    Ok(normalized(f))
}

/// Writes test fields on the scenario grid. `corpus` writes `count` files
/// into the output directory; the other kinds write `output`.
pub fn generate(
    sc: &Scenario,
    kind: FieldKind,
    output: Option<&Path>,
    opts: GenOptions,
    seed: Option<u64>,
) -> Result<()> {
    let grid = sc.grid()?;
    let single = |f: ComplexField| -> Result<()> {
        let path = output.ok_or_else(|| CliError::Config("--output is required for this kind".into()))?;
        save_field(&f, path)?;
        Ok(())
    };
    match kind {
        FieldKind::Gaussian => single(unit_gaussian(grid)?),
        FieldKind::Packet => single(Window::scaled(opts.lambda)?.packet(grid, PhasePoint::new(opts.x0, opts.xi0))),
        FieldKind::TwoPacket => {
            let w = Window::default();
            single(w.packet(grid, PhasePoint::new(-8.0, -6.0)).add(&w.packet(grid, PhasePoint::new(8.0, 6.0)))?)
        }
        FieldKind::Chirp => single(chirp(grid, opts.a)?),
        FieldKind::Corpus => {
            let seed = seed.ok_or_else(|| CliError::Config("corpus generation needs --seed".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dir = out_dir(sc)?.join("corpus");
            fs::create_dir_all(&dir)?;
            for k in 0..opts.count {
                save_field(&corpus_member(grid, &mut rng)?, dir.join(format!("corpus_{k:03}.wpk")))?;
            }
            Ok(())
        }
    }
}
