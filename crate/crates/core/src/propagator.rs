//! Split-step spectral propagation for `i ∂_t u = (−½∂²_x + V(t, x)) u`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::save_field;
use crate::field::{lp_norm, mixed_norm_from_slices, ComplexField, Grid1D, SpacetimeField};
use crate::flow::step_count;
use crate::potential::Potential;
use crate::spectral::Fourier;
use crate::stats::fit_power_law;

/// Longest time span a single evolution will cover.
pub const MAX_SPAN: f64 = 10.0;
/// Largest admissible time step.
pub const MAX_DT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveParams {
    pub dt: f64,
    /// Keep every `record_stride`-th slice when recording.
    pub record_stride: usize,
}

impl EvolveParams {
    pub fn new(dt: f64, record_stride: usize) -> Result<Self> {
        let p = Self { dt, record_stride };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(invalid(format!("time step dt = {} must lie in (0, {MAX_DT}]", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record stride must be at least 1"));
        }
        Ok(())
    }
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self { dt: 1e-3, record_stride: 1 }
    }
}

/// Streaming Strang stepper with a fixed signed step `h`.
///
/// Each step applies half a kinetic step, the potential phase
/// `exp(−ih V(t + h/2, x))` and another half kinetic step.
pub struct Stepper<'a> {
    potential: &'a dyn Potential,
    grid: Grid1D,
    fourier: Fourier,
    kinetic_half: Vec<Complex64>,
    static_phase: Option<Vec<Complex64>>,
    xs: Vec<f64>,
    buf: Vec<Complex64>,
    t0: f64,
    h: f64,
    steps: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(potential: &'a dyn Potential, f: &ComplexField, t0: f64, h: f64) -> Self {
        let grid = *f.grid();
        let n = grid.n();
        let ks = grid.wavenumbers();
        let inv_n = 1.0 / n as f64;
        let k_max = grid.nyquist();
        if 0.5 * k_max * k_max * h.abs() > std::f64::consts::PI {
            static COARSE: std::sync::Once = std::sync::Once::new();
            COARSE.call_once(|| {
                log::warn!(
                    "kinetic phase per step {:.3} exceeds π on this grid; the highest modes are underresolved",
                    0.5 * k_max * k_max * h.abs()
                )
            });
        }
        // The 1/n of each inverse transform is folded into the multiplier.
        let kinetic_half = ks
            .iter()
            .map(|k| Complex64::from_polar(inv_n, -0.25 * h * k * k))
            .collect();
        let xs: Vec<f64> = grid.points().collect();
        let static_phase = potential
            .is_time_independent()
            .then(|| xs.iter().map(|&x| Complex64::from_polar(1.0, -h * potential.v(t0, x))).collect());
        Self {
            potential,
            grid,
            fourier: Fourier::new(n),
            kinetic_half,
            static_phase,
            xs,
            buf: f.values().to_vec(),
            t0,
            h,
            steps: 0,
        }
    }

    fn half_kinetic(&mut self) {
        self.fourier.forward(&mut self.buf);
        for (v, m) in self.buf.iter_mut().zip(&self.kinetic_half) {
            *v *= m;
        }
        self.fourier.inverse(&mut self.buf);
    }

    pub fn step(&mut self) {
        self.half_kinetic();
        match &self.static_phase {
            Some(phase) => {
                for (v, ph) in self.buf.iter_mut().zip(phase) {
                    *v *= ph;
                }
            }
            None => {
                let tm = self.time() + 0.5 * self.h;
                for (v, &x) in self.buf.iter_mut().zip(&self.xs) {
                    *v *= Complex64::from_polar(1.0, -self.h * self.potential.v(tm, x));
                }
            }
        }
        self.half_kinetic();
        self.steps += 1;
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.h
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[Complex64] {
        &self.buf
    }

    pub fn field(&self) -> ComplexField {
        ComplexField::from_parts(self.grid, self.buf.clone())
    }

    pub fn into_field(self) -> ComplexField {
        ComplexField::from_parts(self.grid, self.buf)
    }
}

fn check_request(f: &ComplexField, t0: f64, t1: f64, params: &EvolveParams) -> Result<usize> {
    params.validate()?;
    if !(t0.is_finite() && t1.is_finite()) || (t1 - t0).abs() > MAX_SPAN {
        return Err(invalid(format!("evolution span [{t0}, {t1}] exceeds {MAX_SPAN}")));
    }
    if let Some(k) = f.values().iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite(k));
    }
    Ok(step_count(t1 - t0, params.dt))
}

/// `U(t1, t0) f`. Backward evolution (`t1 < t0`) is allowed.
pub fn evolve(
    p: &dyn Potential,
    f: &ComplexField,
    t0: f64,
    t1: f64,
    params: &EvolveParams,
) -> Result<ComplexField> {
    let n = check_request(f, t0, t1, params)?;
    if n == 0 {
        return Ok(f.clone());
    }
    let mut stepper = Stepper::new(p, f, t0, (t1 - t0) / n as f64);
    for _ in 0..n {
        stepper.step();
    }
    Ok(stepper.into_field())
}

/// Streams `(t, u(t))` at every `record_stride`-th step from `t0` to `t1`,
/// both endpoints included. Times run in the direction of evolution.
pub fn evolve_observe(
    p: &dyn Potential,
    f: &ComplexField,
    t0: f64,
    t1: f64,
    params: &EvolveParams,
    mut visit: impl FnMut(f64, &ComplexField) -> Result<()>,
) -> Result<()> {
    let n = check_request(f, t0, t1, params)?;
    visit(t0, f)?;
    if n == 0 {
        return Ok(());
    }
    let grid = *f.grid();
    let mut stepper = Stepper::new(p, f, t0, (t1 - t0) / n as f64);
    let mut slice = f.clone();
    for k in 1..=n {
        stepper.step();
        if k % params.record_stride == 0 || k == n {
            let t = if k == n { t1 } else { stepper.time() };
            slice.values_mut().copy_from_slice(stepper.values());
            debug_assert_eq!(*slice.grid(), grid);
            visit(t, &slice)?;
        }
    }
    Ok(())
}

/// Records `u` on `[t0, t1]` (`t1 > t0`); the last slice equals [`evolve`]'s output.
pub fn evolve_record(
    p: &dyn Potential,
    f: &ComplexField,
    t0: f64,
    t1: f64,
    params: &EvolveParams,
) -> Result<SpacetimeField> {
    if !(t1 > t0) {
        return Err(invalid(format!("recording needs t1 > t0 (got [{t0}, {t1}])")));
    }
    let (mut times, mut slices) = (Vec::new(), Vec::new());
    evolve_observe(p, f, t0, t1, params, |t, u| {
        times.push(t);
        slices.push(u.clone());
        Ok(())
    })?;
    SpacetimeField::new(times, slices)
}

/// Streams `u` over `[lo, hi]` for data `f` given at `t_ref`, in increasing
/// time order. Both sides of `t_ref` are evolved from `f` directly.
pub fn evolve_window_observe(
    p: &dyn Potential,
    f: &ComplexField,
    t_ref: f64,
    lo: f64,
    hi: f64,
    params: &EvolveParams,
    mut visit: impl FnMut(f64, &ComplexField) -> Result<()>,
) -> Result<()> {
    if !(hi > lo) {
        return Err(invalid(format!("empty time window [{lo}, {hi}]")));
    }
    if t_ref <= lo {
        let start = evolve(p, f, t_ref, lo, params)?;
        return evolve_observe(p, &start, lo, hi, params, visit);
    }
    if t_ref >= hi {
        let start = evolve(p, f, t_ref, hi, params)?;
        let mut back = Vec::new();
        evolve_observe(p, &start, hi, lo, params, |t, u| {
            back.push((t, u.clone()));
            Ok(())
        })?;
        for (t, u) in back.iter().rev() {
            visit(*t, u)?;
        }
        return Ok(());
    }
    // The backward half is buffered so that slices arrive in time order.
    let mut back = Vec::new();
    evolve_observe(p, f, t_ref, lo, params, |t, u| {
        back.push((t, u.clone()));
        Ok(())
    })?;
    for (t, u) in back.iter().rev() {
        visit(*t, u)?;
    }
    drop(back);
    let mut first = true;
    evolve_observe(p, f, t_ref, hi, params, |t, u| {
        if std::mem::take(&mut first) {
            return Ok(());
        }
        visit(t, u)
    })
}

/// Recorded `u` on `[lo, hi]` for data given at `t_ref`.
pub fn evolve_window(
    p: &dyn Potential,
    f: &ComplexField,
    t_ref: f64,
    lo: f64,
    hi: f64,
    params: &EvolveParams,
) -> Result<SpacetimeField> {
    let (mut times, mut slices) = (Vec::new(), Vec::new());
    evolve_window_observe(p, f, t_ref, lo, hi, params, |t, u| {
        times.push(t);
        slices.push(u.clone());
        Ok(())
    })?;
    SpacetimeField::new(times, slices)
}

/// Exact free evolution `e^{−itk²/2}` applied in Fourier space.
pub fn free_evolve_exact(f: &ComplexField, t: f64) -> ComplexField {
    let grid = *f.grid();
    let n = grid.n();
    let mut buf = f.values().to_vec();
    let mut fourier = Fourier::new(n);
    fourier.forward(&mut buf);
    let inv_n = 1.0 / n as f64;
    for (v, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        *v *= Complex64::from_polar(inv_n, -0.5 * t * k * k);
    }
    fourier.inverse(&mut buf);
    ComplexField::from_parts(grid, buf)
}

/// `L¹ → L∞` estimates from a narrow normalised Gaussian source.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersiveReport {
    pub times: Vec<f64>,
    pub width: f64,
    /// `‖U(t, 0)g_w‖_∞ / ‖g_w‖₁` at source width `w`.
    pub operator_norm_estimates: Vec<f64>,
    /// The same estimates at width `w/2`, when that width is still resolved.
    pub refined_estimates: Option<Vec<f64>>,
    /// Slope of `log estimate` against `log t`.
    pub fitted_exponent: f64,
    pub boundary_amplitude: f64,
}

/// Grid, step and time window for [`dispersive_probe`].
#[derive(Clone, Copy, Debug)]
pub struct ProbeSetup {
    pub grid: Grid1D,
    pub params: EvolveParams,
    pub delta0: f64,
}

/// `g_w(x) = (2πw²)^{-1/2} e^{-x²/2w²}`, so that `‖g_w‖₁ = 1`.
pub fn point_source(grid: Grid1D, w: f64) -> Result<ComplexField> {
    let a = (2.0 * std::f64::consts::PI * w * w).sqrt().recip();
    ComplexField::from_fn(grid, |x| Complex64::new(a * (-0.5 * x * x / (w * w)).exp(), 0.0))
}

fn probe_width(p: &dyn Potential, times: &[f64], w: f64, setup: &ProbeSetup) -> Result<(Vec<f64>, f64)> {
    let g = point_source(setup.grid, w)?;
    let l1 = lp_norm(&g, 1.0)?;
    let mut u = g;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut boundary = 0.0f64;
    for &s in times {
        u = evolve(p, &u, t, s, &setup.params)?;
        t = s;
        out.push(u.max_abs() / l1);
        boundary = boundary.max(u.boundary_amplitude());
    }
    Ok((out, boundary))
}

/// Evolves a narrow point source and records the sup of the solution at each
/// of `t_list` (all in `(0, δ₀]`), with a `w/2` refinement column.
pub fn dispersive_probe(
    p: &dyn Potential,
    t_list: &[f64],
    w: f64,
    setup: &ProbeSetup,
) -> Result<DispersiveReport> {
    let dx = setup.grid.dx();
    if !(w >= 4.0 * dx) {
        return Err(Error::Underresolved(format!("source width {w} is below 4·dx = {}", 4.0 * dx)));
    }
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0 && *t <= setup.delta0)) {
        return Err(invalid(format!("probe times must lie in (0, {}]", setup.delta0)));
    }
    let mut times = t_list.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (est, b1) = probe_width(p, &times, w, setup)?;
    let refined = if 0.5 * w >= 4.0 * dx {
        Some(probe_width(p, &times, 0.5 * w, setup)?)
    } else {
        log::warn!("w/2 = {} is underresolved; skipping the refinement column", 0.5 * w);
        None
    };
    let fitted_exponent = fit_power_law(&times, &est).map_or(f64::NAN, |f| f.slope);
    let boundary_amplitude = b1.max(refined.as_ref().map_or(0.0, |r| r.1));
    Ok(DispersiveReport {
        times,
        width: w,
        operator_norm_estimates: est,
        refined_estimates: refined.map(|r| r.0),
        fitted_exponent,
        boundary_amplitude,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrichartzReport {
    pub norm: f64,
    /// `norm / ‖f‖₂`, 0 for `f = 0`.
    pub ratio: f64,
    pub boundary_amplitude: f64,
}

/// `‖U(t, 0)f‖_{L^q_t L^r_x(interval)}`, streamed slice by slice.
pub fn strichartz_check(
    p: &dyn Potential,
    f: &ComplexField,
    interval: (f64, f64),
    q: f64,
    r: f64,
    params: &EvolveParams,
) -> Result<StrichartzReport> {
    let (mut times, mut norms) = (Vec::new(), Vec::new());
    let mut boundary = 0.0f64;
    evolve_window_observe(p, f, 0.0, interval.0, interval.1, params, |t, u| {
        times.push(t);
        norms.push(lp_norm(u, r)?);
        boundary = boundary.max(u.boundary_amplitude());
        Ok(())
    })?;
    let norm = mixed_norm_from_slices(&times, &norms, q, None)?;
    let mass = f.norm();
    let ratio = if mass > 0.0 { norm / mass } else { 0.0 };
    Ok(StrichartzReport { norm, ratio, boundary_amplitude: boundary })
}

#[derive(Serialize)]
struct SeriesIndex<'a> {
    format: &'static str,
    grid: Grid1D,
    times: &'a [f64],
    files: Vec<String>,
}

/// Writes each slice as a WPK1 file plus an `index.json` listing the times.
pub fn export_spacetime(u: &SpacetimeField, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(u.len());
    for (i, slice) in u.slices().iter().enumerate() {
        let name = format!("slice_{i:06}.wpk");
        save_field(slice, dir.join(&name))?;
        files.push(name);
    }
    let index = SeriesIndex { format: "wpk1-series/1", grid: *u.grid(), times: u.times(), files };
    let text = serde_json::to_string_pretty(&index).map_err(|e| invalid(e.to_string()))?;
    fs::write(dir.join("index.json"), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Builtin;
    use std::f64::consts::PI;

    fn gaussian(grid: Grid1D) -> ComplexField {
        ComplexField::from_fn(grid, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0)).unwrap()
    }

    fn grid() -> Grid1D {
        Grid1D::from_box(1024, -20.0, 20.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(EvolveParams::new(0.5, 1).is_err());
        assert!(EvolveParams::new(1e-3, 0).is_err());
        assert!(EvolveParams::new(-1e-3, 1).is_err());
        assert!(EvolveParams::new(1e-2, 3).is_ok());
    }

    #[test]
    fn ground_state_is_stationary_in_modulus() {
        let f = gaussian(grid());
        // Splitting error in the modulus scales as dt²; 1e-3 leaves it near 4e-8.
        let u = evolve(&Builtin::harmonic(1.0), &f, 0.0, 1.0, &EvolveParams::new(1e-4, 1).unwrap()).unwrap();
        let err = u.values().iter().zip(f.values()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn free_gaussian_peak() {
        let u = evolve(&Builtin::Zero, &gaussian(grid()), 0.0, 1.0, &EvolveParams::default()).unwrap();
        assert!((u.max_abs() - PI.powf(-0.25) * 2f64.powf(-0.25)).abs() < 1e-6);
    }

    #[test]
    fn zero_span_is_identity() {
        let f = gaussian(grid());
        let u = evolve(&Builtin::SoftBranch, &f, 0.3, 0.3, &EvolveParams::default()).unwrap();
        assert_eq!(u, f);
    }

    #[test]
    fn record_counts_and_last_slice() {
        let f = gaussian(grid());
        let params = EvolveParams::new(1e-3, 1).unwrap();
        let p = Builtin::breathing(1.0, 0.5).unwrap();
        let rec = evolve_record(&p, &f, 0.0, 0.1, &params).unwrap();
        assert_eq!(rec.len(), 101);
        let last = evolve(&p, &f, 0.0, 0.1, &params).unwrap();
        assert_eq!(rec.slices().last().unwrap(), &last);
        let m0 = f.mass();
        for s in rec.slices() {
            assert!((s.mass() - m0).abs() <= 1e-12 * m0);
        }
        let strided = evolve_record(&p, &f, 0.0, 0.1, &EvolveParams::new(1e-3, 7).unwrap()).unwrap();
        assert_eq!(strided.len(), 16);
        assert_eq!(strided.times()[15], 0.1);
    }

    #[test]
    fn split_step_is_exact_for_free_evolution() {
        let f = ComplexField::from_fn(grid(), |x| Complex64::from_polar((-(x - 1.0).powi(2)).exp(), 2.0 * x)).unwrap();
        let u = evolve(&Builtin::Zero, &f, 0.0, 1.0, &EvolveParams::default()).unwrap();
        assert!(u.distance(&free_evolve_exact(&f, 1.0)).unwrap() < 1e-10);
    }

    #[test]
    fn backward_evolution_inverts_forward() {
        let f = gaussian(grid());
        let p = Builtin::SoftBranch;
        let params = EvolveParams::default();
        let u = evolve(&p, &f, 0.0, 0.5, &params).unwrap();
        let back = evolve(&p, &u, 0.5, 0.0, &params).unwrap();
        assert!(back.distance(&f).unwrap() < 1e-11);
    }

    #[test]
    fn window_straddles_reference_time() {
        let f = gaussian(grid());
        let params = EvolveParams::new(1e-3, 10).unwrap();
        let w = evolve_window(&Builtin::Zero, &f, 0.0, -0.2, 0.3, &params).unwrap();
        assert_eq!(w.len(), 51);
        assert_eq!(w.times()[20], 0.0);
        assert_eq!(&w.slices()[20], &f);
        let later = evolve_window(&Builtin::Zero, &f, 0.0, 0.1, 0.2, &params).unwrap();
        assert_eq!(later.len(), 11);
    }

    #[test]
    fn strichartz_of_zero_field() {
        let z = ComplexField::zeros(grid());
        let r = strichartz_check(&Builtin::Zero, &z, (-0.5, 0.5), 6.0, 6.0, &EvolveParams::default()).unwrap();
        assert_eq!((r.norm, r.ratio), (0.0, 0.0));
    }

    #[test]
    fn dispersive_probe_rejects_narrow_source() {
        let setup = ProbeSetup { grid: grid(), params: EvolveParams::default(), delta0: 0.5 };
        let err = dispersive_probe(&Builtin::Zero, &[0.1], 0.01, &setup).unwrap_err();
        assert!(matches!(err, Error::Underresolved(_)));
        assert!(dispersive_probe(&Builtin::Zero, &[0.6], 0.5, &setup).is_err());
    }

    #[test]
    fn spacetime_export_layout() {
        let f = gaussian(grid());
        let rec = evolve_record(&Builtin::Zero, &f, 0.0, 0.01, &EvolveParams::new(5e-3, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_spacetime(&rec, dir.path()).unwrap();
        let index: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(index["times"].as_array().unwrap().len(), 3);
        let back = crate::field::load_field(dir.path().join("slice_000002.wpk")).unwrap();
        assert_eq!(&back, &rec.slices()[2]);
    }
}
