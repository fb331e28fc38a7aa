//! Matched-filter search for the packet `π(z)S_λψ` best correlated with
//! `U(t, 0)f` over scales, times and phase-space centres.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{lp_norm, mixed_norm_from_slices, ComplexField, Grid1D};
use crate::flow::PhasePoint;
use crate::phase_space::{analyze_unchecked, PhaseGrid, Window};
use crate::potential::Potential;
use crate::propagator::{evolve, evolve_window, evolve_window_observe, EvolveParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub delta0: f64,
    pub lambda_ladder: Vec<f64>,
    pub t_stride: f64,
    pub evolve: EvolveParams,
    /// Cap on coarse `(λ, t)` evaluations; the best value found so far is
    /// returned, flagged, once the cap is reached.
    pub max_evals: Option<usize>,
    pub refine: bool,
}

impl SearchParams {
    /// Dyadic ladder `2^{-j}`, `j = 0..=8`, truncated to scales of at least
    /// three samples; time stride `δ₀/64`.
    pub fn new(grid: &Grid1D, delta0: f64) -> Self {
        let lambda_ladder = (0..=8)
            .map(|j| 2f64.powi(-j))
            .filter(|l| *l >= 3.0 * grid.dx())
            .collect();
        Self {
            delta0,
            lambda_ladder,
            t_stride: delta0 / 64.0,
            evolve: EvolveParams::default(),
            max_evals: None,
            refine: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0 <= 1.0) {
            return Err(invalid(format!("δ₀ = {} must lie in (0, 1]", self.delta0)));
        }
        if self.lambda_ladder.is_empty() || self.lambda_ladder.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
            return Err(invalid("λ ladder must be a nonempty subset of (0, 1]"));
        }
        if !(self.t_stride > 0.0 && self.t_stride <= self.delta0) {
            return Err(invalid(format!("time stride {} must lie in (0, δ₀]", self.t_stride)));
        }
        self.evolve.validate()
    }
}

/// A detected concentration: `correlation = ⟨π(x₀, ξ₀)S_λψ, U(t₀, 0)f⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bubble {
    pub lambda: f64,
    pub t0: f64,
    pub x0: f64,
    pub xi0: f64,
    pub correlation: Complex64,
    pub abs_correlation: f64,
    /// Coarse `(λ, t)` evaluations spent.
    pub evaluations: usize,
    pub budget_exceeded: bool,
}

impl Bubble {
    pub fn z(&self) -> PhasePoint {
        PhasePoint::new(self.x0, self.xi0)
    }
}

/// Flat detection record, one per bubble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub lambda: f64,
    pub t0: f64,
    pub x0: f64,
    pub xi0: f64,
    pub correlation_re: f64,
    pub correlation_im: f64,
    pub abs: f64,
    #[serde(rename = "epsilon_L6")]
    pub epsilon_l6: f64,
    pub mass: f64,
    pub budget_exceeded: bool,
}

impl DetectionReport {
    pub fn new(b: &Bubble, epsilon_l6: f64, mass: f64) -> Self {
        Self {
            lambda: b.lambda,
            t0: b.t0,
            x0: b.x0,
            xi0: b.xi0,
            correlation_re: b.correlation.re,
            correlation_im: b.correlation.im,
            abs: b.abs_correlation,
            epsilon_l6,
            mass,
            budget_exceeded: b.budget_exceeded,
        }
    }
}

/// `⟨π(z)S_λψ, u⟩` by direct summation over the window support.
pub fn correlation(u: &ComplexField, lambda: f64, z: PhasePoint) -> Complex64 {
    let window = Window::scaled(lambda).expect("positive scale");
    let grid = u.grid();
    let dx = grid.dx();
    let n = grid.n() as i64;
    let h = window.half_support();
    let j_lo = ((z.x - h - grid.x_min()) / dx).ceil() as i64;
    let j_hi = ((z.x + h - grid.x_min()) / dx).floor() as i64;
    let vals = u.values();
    let y0 = grid.x_min() + j_lo as f64 * dx - z.x;
    let rot = Complex64::from_polar(1.0, dx * z.xi);
    let mut ph = Complex64::from_polar(1.0, y0 * z.xi);
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, j) in (j_lo..=j_hi).enumerate() {
        let v = vals[j.rem_euclid(n) as usize];
        acc += ph * v.conj() * window.eval(y0 + l as f64 * dx);
        ph *= rot;
    }
    acc * dx
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    lambda: f64,
    t: f64,
    slice: usize,
    z: PhasePoint,
    corr: Complex64,
}

impl Candidate {
    fn abs(&self) -> f64 {
        self.corr.norm()
    }

    /// Larger correlation wins; exact ties go to smaller `|t|`, `λ`, `|x₀|`, `|ξ₀|`.
    fn better_than(&self, other: &Candidate) -> bool {
        match self.abs().partial_cmp(&other.abs()) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => {
                let key = |c: &Candidate| (c.t.abs(), c.lambda, c.z.x.abs(), c.z.xi.abs());
                let (a, b) = (key(self), key(other));
                a.partial_cmp(&b) == Some(Ordering::Less)
            }
        }
    }
}

/// Coarse cells within this fraction of the best are polished before refinement.
const POLISH_RATIO: f64 = 0.98;
const MAX_POLISHED: usize = 256;

fn pick_best(cands: &[Candidate]) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in cands {
        if best.map_or(true, |b| c.better_than(&b)) {
            best = Some(*c);
        }
    }
    best
}

/// Samples of `u` where `|u|` exceeds `1e-6` of its peak, padded by the window reach.
fn active_range(u: &ComplexField, lambda: f64) -> Option<(f64, f64)> {
    let peak = u.max_abs();
    if peak == 0.0 {
        return None;
    }
    let grid = u.grid();
    let idx: Vec<usize> = (0..grid.n()).filter(|&k| u.values()[k].norm() > 1e-6 * peak).collect();
    let pad = 2.0 * lambda;
    let lo = (grid.x(idx[0]) - pad).max(grid.x_min());
    let hi = (grid.x(*idx.last().expect("nonempty")) + pad).min(grid.x_max());
    Some((lo, hi))
}

fn scan_slice(u: &ComplexField, lambda: f64, t: f64, slice: usize) -> Result<Option<Candidate>> {
    let Some(range) = active_range(u, lambda) else {
        return Ok(None);
    };
    let window = Window::scaled(lambda)?;
    let pg = PhaseGrid::full_band(u.grid(), lambda, range, 1.0 / (4.0 * lambda))?;
    let coefs = analyze_unchecked(u, &window, &pg);
    let mut best: Option<Candidate> = None;
    for i in 0..pg.nx {
        for (j, v) in coefs.row(i).iter().enumerate() {
            let c = Candidate {
                lambda,
                t,
                slice,
                z: PhasePoint::new(pg.x_center(i), pg.xi_center(j)),
                corr: v.conj(),
            };
            if best.map_or(true, |b| c.better_than(&b)) {
                best = Some(c);
            }
        }
    }
    Ok(best)
}

/// Maximises `|⟨π(z)S_λψ, U(t, 0)f⟩|` over the λ ladder, times in
/// `[−δ₀, δ₀]` at the given stride and full-band phase grids of spacing
/// `(λ/4, 1/(4λ))`, then refines `λ` and `t` by golden-section search and
/// `z` by repeated grid refinement.
pub fn detect_bubble(p: &dyn Potential, f: &ComplexField, search: &SearchParams) -> Result<Bubble> {
    search.validate()?;
    let mut ladder = search.lambda_ladder.clone();
    ladder.sort_by(f64::total_cmp);
    if f.max_abs() == 0.0 {
        return Ok(Bubble {
            lambda: ladder[0],
            t0: 0.0,
            x0: 0.0,
            xi0: 0.0,
            correlation: Complex64::new(0.0, 0.0),
            abs_correlation: 0.0,
            evaluations: 0,
            budget_exceeded: false,
        });
    }

    let (times, slices, params) = record_slices(p, f, search)?;

    // Coarse pairs, nearest times first so that a budget covers them first.
    let mut pairs: Vec<(usize, f64)> = (0..times.len())
        .flat_map(|k| ladder.iter().map(move |&l| (k, l)))
        .collect();
    pairs.sort_by(|a, b| {
        times[a.0].abs().total_cmp(&times[b.0].abs()).then(times[a.0].total_cmp(&times[b.0])).then(a.1.total_cmp(&b.1))
    });
    let budget_exceeded = search.max_evals.is_some_and(|m| m < pairs.len());
    if let Some(m) = search.max_evals {
        pairs.truncate(m.max(1));
    }
    let evaluations = pairs.len();
    let found: Vec<Option<Candidate>> = pairs
        .par_iter()
        .map(|&(k, l)| scan_slice(&slices[k], l, times[k], k))
        .collect::<Result<_>>()?;
    let found: Vec<Candidate> = found.into_iter().flatten().collect();
    let Some(mut best) = pick_best(&found) else {
        return Err(invalid("no scan produced a candidate"));
    };

    if search.refine && !budget_exceeded && best.abs() > 0.0 {
        // Grid quantisation of z can outweigh the variation in t and λ, so
        // every near-optimal coarse cell is polished before choosing.
        let mut close: Vec<Candidate> = found.iter().filter(|c| c.abs() >= POLISH_RATIO * best.abs()).copied().collect();
        close.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(a.t.abs().total_cmp(&b.t.abs())));
        close.truncate(MAX_POLISHED);
        let polished: Vec<Candidate> = close
            .par_iter()
            .map(|c| {
                let (z, corr) = refine_z(&slices[c.slice], c.lambda, c.z, 4);
                Candidate { z, corr, ..*c }
            })
            .collect();
        best = pick_best(&polished).unwrap_or(best);
        best = refine(p, &times, &slices, &params, &ladder, search, best)?;
    }
    Ok(Bubble {
        lambda: best.lambda,
        t0: best.t,
        x0: best.z.x,
        xi0: best.z.xi,
        correlation: best.corr,
        abs_correlation: best.abs(),
        evaluations,
        budget_exceeded,
    })
}

/// Slices `U(t_k, 0)f` at `t_k = −δ₀ + k·stride`, with the stride adjusted
/// to divide `δ₀` and the step adjusted to divide the stride.
fn record_slices(
    p: &dyn Potential,
    f: &ComplexField,
    search: &SearchParams,
) -> Result<(Vec<f64>, Vec<ComplexField>, EvolveParams)> {
    let per_side = (search.delta0 / search.t_stride - 1e-9).ceil().max(1.0);
    let stride = search.delta0 / per_side;
    let steps = (stride / search.evolve.dt - 1e-9).ceil().max(1.0);
    let params = EvolveParams { dt: stride / steps, record_stride: steps as usize };
    let rec = evolve_window(p, f, 0.0, -search.delta0, search.delta0, &params)?;
    Ok((rec.times().to_vec(), rec.slices().to_vec(), params))
}

/// `L⁶_{t,x}` norm of `U(t, 0)f` over `[−δ₀, δ₀]`, sampled at every time step.
pub fn epsilon_l6(p: &dyn Potential, f: &ComplexField, search: &SearchParams) -> Result<f64> {
    search.validate()?;
    let params = EvolveParams { dt: search.evolve.dt, record_stride: 1 };
    let (mut times, mut norms) = (Vec::new(), Vec::new());
    evolve_window_observe(p, f, 0.0, -search.delta0, search.delta0, &params, |t, u| {
        times.push(t);
        norms.push(lp_norm(u, 6.0)?);
        Ok(())
    })?;
    mixed_norm_from_slices(&times, &norms, 6.0, None)
}

/// Best `z` near `start` by repeated 11×11 grids, each a fifth the spacing of the last.
fn refine_z(u: &ComplexField, lambda: f64, start: PhasePoint, passes: usize) -> (PhasePoint, Complex64) {
    let mut best = (start, correlation(u, lambda, start));
    let (mut hx, mut hxi) = (lambda / 4.0, 1.0 / (4.0 * lambda));
    for _ in 0..passes {
        let centre = best.0;
        let points: Vec<PhasePoint> = (-5..=5)
            .flat_map(|a| {
                (-5..=5).map(move |b| {
                    PhasePoint::new(centre.x + a as f64 * hx / 5.0, centre.xi + b as f64 * hxi / 5.0)
                })
            })
            .collect();
        let values: Vec<Complex64> = points.par_iter().map(|z| correlation(u, lambda, *z)).collect();
        for (z, c) in points.into_iter().zip(values) {
            if c.norm() > best.1.norm() {
                best = (z, c);
            }
        }
        hx /= 5.0;
        hxi /= 5.0;
    }
    best
}

/// Maximiser of a unimodal function on `[a, b]` by golden-section search.
fn golden_max(mut a: f64, mut b: f64, iters: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { c } else { d })
}

fn refine(
    p: &dyn Potential,
    times: &[f64],
    slices: &[ComplexField],
    params: &EvolveParams,
    ladder: &[f64],
    search: &SearchParams,
    coarse: Candidate,
) -> Result<Candidate> {
    let stride = times[1] - times[0];
    let step = EvolveParams { dt: params.dt, record_stride: 1 };
    let slice_at = |t: f64| -> Result<ComplexField> {
        let k = (((t - times[0]) / stride).round().max(0.0) as usize).min(times.len() - 1);
        evolve(p, &slices[k], times[k], t, &step)
    };
    let (lam_lo, lam_hi) = (ladder[0], ladder[ladder.len() - 1]);
    let mut best = coarse;
    let mut u = slices[coarse.slice].clone();
    let (z, c) = refine_z(&u, best.lambda, best.z, 4);
    best.z = z;
    best.corr = c;

    for round in 0..2 {
        // Scale, in log λ around the current value.
        let span = if round == 0 { 2f64.ln() } else { 0.25 * 2f64.ln() };
        let (a, b) = ((best.lambda.ln() - span).max(lam_lo.ln()), (best.lambda.ln() + span).min(lam_hi.ln()));
        if b > a {
            let z0 = best.z;
            let ll = golden_max(a, b, 30, |ll| Ok(refine_z(&u, ll.exp(), z0, 3).1.norm()))?;
            let (z, c) = refine_z(&u, ll.exp(), z0, 4);
            if c.norm() > best.corr.norm() {
                best = Candidate { lambda: ll.exp(), z, corr: c, ..best };
            }
        }
        // Time, within one stride of the current value.
        let w = if round == 0 { stride } else { 0.25 * stride };
        let (a, b) = ((best.t - w).max(-search.delta0), (best.t + w).min(search.delta0));
        if b > a {
            let (lambda, z0) = (best.lambda, best.z);
            let t = golden_max(a, b, 30, |t| Ok(refine_z(&slice_at(t)?, lambda, z0, 3).1.norm()))?;
            let ut = slice_at(t)?;
            let (z, c) = refine_z(&ut, lambda, z0, 4);
            if c.norm() > best.corr.norm() {
                best = Candidate { t, z, corr: c, ..best };
                u = ut;
            }
        }
    }
    let (z, c) = refine_z(&u, best.lambda, best.z, 10);
    if c.norm() >= best.corr.norm() {
        best.z = z;
        best.corr = c;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{dilate, translate_modulate, WINDOW_MASS};
    use crate::potential::Builtin;

    fn grid() -> Grid1D {
        Grid1D::from_box(2048, -20.0, 20.0).unwrap()
    }

    #[test]
    fn correlation_matches_inner_product() {
        let g = grid();
        let w = Window::scaled(0.5).unwrap();
        let z = PhasePoint::new(1.3, -2.2);
        let f = w.packet(g, PhasePoint::new(1.0, -2.0));
        let direct = crate::field::inner_product(&w.packet(g, z), &f).unwrap();
        assert!((correlation(&f, 0.5, z) - direct).norm() < 1e-14);
    }

    #[test]
    fn planted_packet_is_found() {
        let g = grid();
        let psi = Window::default().generator(g);
        let f = translate_modulate(PhasePoint::new(3.0, 5.0), &dilate(0.5, &psi).unwrap());
        let b = detect_bubble(&Builtin::Zero, &f, &SearchParams::new(&g, 0.5)).unwrap();
        assert!((b.abs_correlation - WINDOW_MASS).abs() < 1e-4, "{b:?}");
        assert!((b.lambda - 0.5).abs() < 1e-3 && b.t0.abs() < 1e-3, "{b:?}");
        assert!((b.x0 - 3.0).abs() < 1e-3 && (b.xi0 - 5.0).abs() < 1e-3, "{b:?}");
    }

    #[test]
    fn zero_field_and_budget() {
        let g = grid();
        let b = detect_bubble(&Builtin::Zero, &ComplexField::zeros(g), &SearchParams::new(&g, 0.5)).unwrap();
        assert_eq!(b.abs_correlation, 0.0);
        let mut s = SearchParams::new(&g, 0.5);
        s.max_evals = Some(3);
        let f = Window::default().generator(g);
        let b = detect_bubble(&Builtin::Zero, &f, &s).unwrap();
        assert!(b.budget_exceeded && b.evaluations == 3);
        assert!(b.abs_correlation > 0.0);
    }

    #[test]
    fn cauchy_schwarz_bound() {
        let g = grid();
        let f = ComplexField::from_fn(g, |x| {
            Complex64::new(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0)
        })
        .unwrap();
        let b = detect_bubble(&Builtin::SoftBranch, &f, &SearchParams::new(&g, 0.5)).unwrap();
        assert!(b.abs_correlation <= WINDOW_MASS.sqrt() * (1.0 + 1e-9));
    }
}
