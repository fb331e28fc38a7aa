//! Invariant suites for a scenario, printed as TAP.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpk::concentration::{detect_bubble, extract_profile, inverse_hls_scan, kernel_k, locate_interval, ScanMode};
use wpk::flow::{check_pair_estimates, collision_window, cube_containment, flow, Containment};
use wpk::phase_space::{analyze, dilate, galilean_covariance_residual, synthesize, CovarianceParams, PhaseGrid, Window};
use wpk::potential::{estimate_m2, verify_subquadratic};
use wpk::propagator::{dispersive_probe, evolve, EvolveParams, ProbeSetup};
use wpk::{Builtin, Complex64, ComplexField, Grid1D, PhasePoint};

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Flow,
    Propagator,
    Phasespace,
    Concentration,
    All,
}

struct Outcome {
    name: String,
    passed: bool,
    detail: String,
}

struct Ctx {
    p: Builtin,
    grid: Grid1D,
    delta0: f64,
    evolve: EvolveParams,
    sc: Scenario,
}

type Check = (&'static str, fn(&Ctx) -> Result<(bool, String)>);

const FLOW: &[Check] = &[
    ("flow/subquadratic", flow_subquadratic),
    ("flow/reversal", flow_reversal),
    ("flow/group", flow_group),
    ("flow/symplectic", flow_symplectic),
    ("flow/pair-estimates", flow_pairs),
    ("flow/collisions", flow_collisions),
    ("flow/cube-dilation", flow_cubes),
];

const PROPAGATOR: &[Check] = &[
    ("propagator/convergence", prop_convergence),
    ("propagator/mass", prop_mass),
    ("propagator/reversibility", prop_reversibility),
    ("propagator/dispersive-exponent", prop_dispersive),
];

const PHASESPACE: &[Check] = &[
    ("phasespace/isometry-inversion", ps_isometry),
    ("phasespace/galilean-covariance", ps_galilei),
    ("phasespace/dilation-roundtrip", ps_dilation),
];

const CONCENTRATION: &[Check] = &[
    ("concentration/planted-detection", conc_detection),
    ("concentration/decoupling", conc_decoupling),
    ("concentration/hls-brute-force", conc_hls_scan),
    ("concentration/hls-interval", conc_hls_interval),
    ("concentration/kernel-symmetry", conc_kernel),
];

/// Runs the selected suites and writes TAP to `out`. Fails with
/// [`CliError::Verify`] when any check fails.
pub fn run(sc: &Scenario, suite: Suite, mut out: impl Write) -> Result<()> {
    let ctx = Ctx { p: sc.potential()?, grid: sc.grid()?, delta0: sc.delta0, evolve: sc.evolve, sc: sc.clone() };
    let checks: Vec<&Check> = match suite {
        Suite::Flow => FLOW.iter().collect(),
        Suite::Propagator => PROPAGATOR.iter().collect(),
        Suite::Phasespace => PHASESPACE.iter().collect(),
        Suite::Concentration => CONCENTRATION.iter().collect(),
        Suite::All => FLOW.iter().chain(PROPAGATOR).chain(PHASESPACE).chain(CONCENTRATION).collect(),
    };
    writeln!(out, "TAP version 13")?;
    writeln!(out, "1..{}", checks.len())?;
    let mut failed = 0;
    for (k, (name, check)) in checks.into_iter().enumerate() {
        let o = match check(&ctx) {
            Ok((passed, detail)) => Outcome { name: name.to_string(), passed, detail },
            Err(e) => Outcome { name: name.to_string(), passed: false, detail: format!("error: {e}") },
        };
        failed += usize::from(!o.passed);
        writeln!(out, "{} {} - {} # {}", if o.passed { "ok" } else { "not ok" }, k + 1, o.name, o.detail)?;
        out.flush()?;
    }
    if failed > 0 {
        return Err(CliError::Verify(failed));
    }
    Ok(())
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

fn point(rng: &mut ChaCha8Rng, reach: f64) -> PhasePoint {
    PhasePoint::new(rng.gen_range(-reach..reach), rng.gen_range(-reach..reach))
}

const FLOW_DT: f64 = 1e-4;

fn flow_subquadratic(c: &Ctx) -> Result<(bool, String)> {
    let r = verify_subquadratic(&c.p, (-50.0, 50.0), (-c.delta0, c.delta0), 4)?;
    let m2 = r.m(2).unwrap_or(f64::NAN);
    Ok((m2.is_finite(), format!("M2 = {m2:.6}")))
}

fn flow_reversal(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let z = point(&mut rng, 5.0);
        let back = flow(&c.p, flow(&c.p, z, 0.0, c.delta0, FLOW_DT)?, c.delta0, 0.0, FLOW_DT)?;
        worst = worst.max(back.sub(&z).x.abs().max(back.sub(&z).xi.abs()));
    }
    Ok((worst <= 1e-9, format!("max error {worst:.2e}")))
}

fn flow_group(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let mut worst = 0.0f64;
    let mid = 0.5 * c.delta0;
    for _ in 0..20 {
        let z = point(&mut rng, 5.0);
        let two = flow(&c.p, flow(&c.p, z, 0.0, mid, FLOW_DT)?, mid, c.delta0, FLOW_DT)?;
        let one = flow(&c.p, z, 0.0, c.delta0, FLOW_DT)?;
        worst = worst.max(two.sub(&one).x.abs().max(two.sub(&one).xi.abs()));
    }
    Ok((worst <= 1e-9, format!("max error {worst:.2e}")))
}

fn flow_symplectic(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let mut worst = 0.0f64;
    let e = 1e-5;
    for _ in 0..20 {
        let z = point(&mut rng, 5.0);
        let f = |dz: PhasePoint| flow(&c.p, PhasePoint::new(z.x + dz.x, z.xi + dz.xi), 0.0, c.delta0, FLOW_DT);
        let (xp, xm) = (f(PhasePoint::new(e, 0.0))?, f(PhasePoint::new(-e, 0.0))?);
        let (pp, pm) = (f(PhasePoint::new(0.0, e))?, f(PhasePoint::new(0.0, -e))?);
        let (a, b) = ((xp.x - xm.x) / (2.0 * e), (pp.x - pm.x) / (2.0 * e));
        let (cc, d) = ((xp.xi - xm.xi) / (2.0 * e), (pp.xi - pm.xi) / (2.0 * e));
        worst = worst.max((a * d - b * cc - 1.0).abs());
    }
    Ok((worst <= 1e-6, format!("max |det DΦ − 1| = {worst:.2e}")))
}

fn flow_pairs(c: &Ctx) -> Result<(bool, String)> {
    let m2 = estimate_m2(&c.p, (-2.0, 2.0))?;
    let mut rng = rng();
    let mut failures = 0;
    for _ in 0..200 {
        let s = rng.gen_range(-1.0..1.0);
        let t = s + rng.gen_range(-1.0..1.0);
        let r = check_pair_estimates(&c.p, point(&mut rng, 5.0), point(&mut rng, 5.0), s, t, 1e-3, Some(m2))?;
        failures += usize::from(!r.all_satisfied());
    }
    Ok((failures == 0, format!("{failures}/200 violations, M2 = {m2:.4}")))
}

fn flow_collisions(c: &Ctx) -> Result<(bool, String)> {
    let m2 = estimate_m2(&c.p, (-2.0, 2.0))?;
    let mut rng = rng();
    let mut failures = 0;
    for _ in 0..100 {
        let r = rng.gen_range(0.1..2.0);
        let a = point(&mut rng, 5.0);
        let b = PhasePoint::new(a.x + 0.99 * r * rng.gen_range(-1.0..1.0), rng.gen_range(-20.0..20.0));
        let rep = collision_window(&c.p, a, b, 0.0, r, rng.gen_range(2.0..4.0), 1e-3, Some(m2))?;
        failures += usize::from(!rep.satisfied);
    }
    Ok((failures == 0, format!("{failures}/100 violations")))
}

fn flow_cubes(c: &Ctx) -> Result<(bool, String)> {
    let m2 = estimate_m2(&c.p, (-2.0, 2.0))?;
    let mut rng = rng();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for k in 0..=6 {
        let eta = 2f64.powi(k);
        for _ in 0..8 {
            let half = eta.recip().min(1.0);
            let s = rng.gen_range(-half..=half);
            let zref = point(&mut rng, 3.0);
            let zs = flow(&c.p, zref, 0.0, s, 1e-3)?;
            let d = (rng.gen_range(-1.0..=1.0), eta + rng.gen_range(-1.0..=1.0));
            let z = flow(&c.p, PhasePoint::new(zs.x + d.0, zs.xi + d.1), s, 0.0, 1e-3)?;
            let r = cube_containment(&c.p, zref, z, 0.0, eta, 1.0, 1e-3, Some(m2))?;
            failures += usize::from(r.contained != Containment::Contained);
            worst = worst.max(r.c_required.unwrap_or(f64::INFINITY));
        }
    }
    Ok((failures == 0, format!("max C_required {worst:.3} over η ∈ {{1, …, 64}}")))
}

fn test_field(grid: Grid1D) -> Result<ComplexField> {
    let g = ComplexField::from_fn(grid, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0))?;
    Ok(g.add(&Window::scaled(0.5)?.packet(grid, PhasePoint::new(1.0, 2.0)))?)
}

fn prop_convergence(c: &Ctx) -> Result<(bool, String)> {
    c.evolve.validate()?;
    let f = test_field(c.grid)?;
    let coarse = evolve(&c.p, &f, 0.0, c.delta0, &c.evolve)?;
    let fine = EvolveParams { dt: 0.5 * c.evolve.dt, record_stride: 1 };
    let reference = evolve(&c.p, &f, 0.0, c.delta0, &fine)?;
    let err = coarse.distance(&reference)? / f.norm();
    Ok((err <= 1e-6, format!("dt vs dt/2 relative difference {err:.2e}")))
}

fn prop_mass(c: &Ctx) -> Result<(bool, String)> {
    let f = test_field(c.grid)?;
    let u = evolve(&c.p, &f, 0.0, c.delta0, &c.evolve)?;
    let drift = (u.norm() - f.norm()).abs() / f.norm();
    let boundary = u.boundary_amplitude();
    Ok((drift <= 1e-10 && boundary <= 1e-8, format!("relative drift {drift:.2e}, boundary {boundary:.1e}")))
}

fn prop_reversibility(c: &Ctx) -> Result<(bool, String)> {
    let f = test_field(c.grid)?;
    let u = evolve(&c.p, &f, 0.0, c.delta0, &c.evolve)?;
    let back = evolve(&c.p, &u, c.delta0, 0.0, &c.evolve)?;
    let err = back.distance(&f)? / f.norm();
    Ok((err <= 1e-10, format!("relative error {err:.2e}")))
}

fn prop_dispersive(c: &Ctx) -> Result<(bool, String)> {
    let w = (8.0 * c.grid.dx()).max(0.1);
    let times: Vec<f64> = (0..6).map(|k| c.delta0 * 2f64.powf(-0.6 * k as f64)).collect();
    let setup = ProbeSetup { grid: c.grid, params: c.evolve, delta0: c.delta0 };
    let r = dispersive_probe(&c.p, &times, w, &setup)?;
    let e = r.fitted_exponent;
    Ok(((e + 0.5).abs() <= 0.1, format!("fitted exponent {e:.4} at source width {w:.3}")))
}

fn ps_isometry(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let values = (0..c.grid.n()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let f = ComplexField::new(c.grid, values)?;
    let w = Window::default();
    let pg = PhaseGrid::covering(&c.grid, 1.0)?;
    let tf = analyze(&f, &w, &pg)?;
    let iso = (tf.energy() / f.mass() - 1.0).abs();
    let inv = synthesize(&tf, &w, c.grid).distance(&f)? / f.norm();
    Ok((iso <= 1e-10 && inv <= 1e-10, format!("isometry {iso:.2e}, inversion {inv:.2e}")))
}

fn ps_galilei(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let phi = ComplexField::from_fn(c.grid, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0))?;
    let params = CovarianceParams { evolve: c.evolve, ..CovarianceParams::default() };
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let z = point(&mut rng, 3.0);
        let t = rng.gen_range(-c.delta0..=c.delta0);
        worst = worst.max(galilean_covariance_residual(&c.p, z, &phi, t, &params)?);
    }
    Ok((worst <= 1e-5, format!("worst residual {worst:.2e}")))
}

fn ps_dilation(c: &Ctx) -> Result<(bool, String)> {
    let f = test_field(c.grid)?;
    let back = dilate(2.0, &dilate(0.5, &f)?)?;
    let err = back.distance(&f)? / f.norm();
    Ok((err <= 1e-8, format!("S_2 S_1/2 relative error {err:.2e}")))
}

fn conc_detection(c: &Ctx) -> Result<(bool, String)> {
    let z = PhasePoint::new(2.0, 3.0);
    let f = Window::scaled(0.5)?.packet(c.grid, z);
    let b = detect_bubble(&c.p, &f, &c.sc.search()?)?;
    let ok = b.abs_correlation >= 0.95 / (2.0 * PI)
        && b.t0.abs() <= c.sc.search()?.t_stride
        && (b.x0 - z.x).abs() <= 0.125
        && (b.xi0 - z.xi).abs() <= 0.5;
    Ok((ok, format!("λ = {:.4}, t = {:.4}, z = ({:.4}, {:.4}), |c|·2π = {:.5}", b.lambda, b.t0, b.x0, b.xi0, b.abs_correlation * 2.0 * PI)))
}

fn conc_decoupling(c: &Ctx) -> Result<(bool, String)> {
    let f = test_field(c.grid)?;
    let b = detect_bubble(&c.p, &f, &c.sc.search()?)?;
    let ex = extract_profile(&c.p, &f, &b, &c.evolve)?;
    let rel = ex.decoupling_residual.abs() / f.mass();
    Ok((rel <= 1e-10, format!("residual {rel:.2e}·‖f‖²")))
}

fn conc_hls_scan(_: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let n = 200;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0f64..1.0).powi(2)).collect();
    let q = 8.0;
    let scan = inverse_hls_scan(&times, &g, q, ScanMode::Exact)?;
    let mut best = 0.0f64;
    for a in 0..n {
        let mut integral = 0.0;
        for b in a + 1..n {
            integral += 0.5 * (g[b - 1] + g[b]) * (times[b] - times[b - 1]);
            best = best.max((times[b] - times[a]).powf(-1.0 / q) * integral);
        }
    }
    let gap = (scan.score - best).abs();
    Ok((gap <= 1e-12, format!("score gap {gap:.1e}")))
}

fn conc_hls_interval(c: &Ctx) -> Result<(bool, String)> {
    let g = ComplexField::from_fn(c.grid, |x| Complex64::new((-0.5 * x * x).exp(), 0.0))?;
    let f = g.scaled(Complex64::new(g.norm().recip(), 0.0));
    let r = locate_interval(&c.p, &f, 8.0, 4.0, &c.sc.hls())?;
    let (a, b) = r.interval.bounds();
    let ok = a <= 0.0 && b >= 0.0 && r.passed;
    Ok((ok, format!("J = [{a:.4}, {b:.4}], lhs/rhs = {:.3}", r.ratio)))
}

fn conc_kernel(c: &Ctx) -> Result<(bool, String)> {
    let mut rng = rng();
    let z: [PhasePoint; 4] = std::array::from_fn(|_| point(&mut rng, 2.0));
    let params = c.sc.kernel()?;
    let k = kernel_k(&c.p, z, &params)?;
    let k12 = kernel_k(&c.p, [z[1], z[0], z[2], z[3]], &params)?;
    let k34 = kernel_k(&c.p, [z[0], z[1], z[3], z[2]], &params)?;
    let gap = (k - k12).abs().max((k - k34).abs()) / k;
    Ok((gap <= 1e-10, format!("K = {k:.6e}, relative permutation gap {gap:.1e}")))
}
