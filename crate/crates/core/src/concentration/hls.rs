//! Locating the time interval that carries a quantitative share of a
//! Strichartz norm.

use serde::{Deserialize, Serialize};

use super::is_admissible;
use crate::error::{invalid, Error, Result};
use crate::field::{lp_norm, mixed_norm_from_slices, ComplexField};
use crate::potential::Potential;
use crate::propagator::{evolve_window_observe, EvolveParams};

/// An interval `J = [t_center − half_length, t_center + half_length]` with
/// its score `|J|^{-1/q} ∫_J G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntervalCandidate {
    pub t_center: f64,
    pub half_length: f64,
    pub score: f64,
    /// Sample indices of the endpoints.
    pub start: usize,
    pub end: usize,
}

impl IntervalCandidate {
    pub fn bounds(&self) -> (f64, f64) {
        (self.t_center - self.half_length, self.t_center + self.half_length)
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }
}

/// Which intervals the scan ranges over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Every interval with sample endpoints (`O(N²)`).
    #[default]
    Exact,
    /// Dyadic lengths anchored at half-length steps (`O(N log N)`).
    Dyadic,
}

/// Maximises `|J|^{-1/q} ∫_J G` (trapezoid rule) over intervals with
/// sample endpoints. Ties keep the shorter, then the earlier interval.
pub fn inverse_hls_scan(times: &[f64], g: &[f64], q: f64, mode: ScanMode) -> Result<IntervalCandidate> {
    let n = times.len();
    if n < 2 || g.len() != n {
        return Err(invalid("the scan needs at least two samples of G, one per time"));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(invalid(format!("q = {q} must be finite and > 1")));
    }
    if g.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(invalid("G must be finite and nonnegative"));
    }
    let span = times[n - 1] - times[0];
    let dt = span / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(invalid("G must be sampled on a uniform increasing grid"));
    }
    let mut prefix = vec![0.0; n];
    for k in 1..n {
        prefix[k] = prefix[k - 1] + 0.5 * (times[k] - times[k - 1]) * (g[k] + g[k - 1]);
    }
    let candidate = |a: usize, b: usize| {
        let len = times[b] - times[a];
        let score = (prefix[b] - prefix[a]) * len.powf(-1.0 / q);
        IntervalCandidate { t_center: 0.5 * (times[a] + times[b]), half_length: 0.5 * len, score, start: a, end: b }
    };
    if prefix[n - 1] == 0.0 {
        return Ok(IntervalCandidate { score: 0.0, ..candidate(0, n - 1) });
    }
    let mut best = candidate(0, 1);
    let mut consider = |a: usize, b: usize| {
        let c = candidate(a, b);
        if c.score > best.score {
            best = c;
        }
    };
    match mode {
        ScanMode::Exact => {
            for len in 1..n {
                for a in 0..n - len {
                    consider(a, a + len);
                }
            }
        }
        ScanMode::Dyadic => {
            let mut len = 1usize;
            while len < n {
                let step = (len / 2).max(1);
                let mut a = 0;
                while a + len < n {
                    consider(a, a + len);
                    a += step;
                }
                len *= 2;
            }
            consider(0, n - 1);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HlsParams {
    pub delta0: f64,
    pub evolve: EvolveParams,
    /// Constant in front of the lower bound.
    pub constant: f64,
    pub mode: ScanMode,
}

impl Default for HlsParams {
    fn default() -> Self {
        Self { delta0: 0.5, evolve: EvolveParams::default(), constant: 0.1, mode: ScanMode::Exact }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalReport {
    pub interval: IntervalCandidate,
    pub q: f64,
    pub r: f64,
    pub admissible: bool,
    /// `ε = ‖u‖_{L^q_t L^r_x([−δ₀, δ₀])}`.
    pub epsilon: f64,
    /// `‖u‖_{L^{q−1}_t L^r_x(J)}`.
    pub lhs: f64,
    /// `c |J|^{1/(q(q−1))} ε^{q/(q−2)}`.
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
    pub boundary_amplitude: f64,
}

/// Evolves unit-mass data over `[−δ₀, δ₀]`, scans the dual weight
/// `G(t) = ‖u(t)‖_{L^r}^{q−1} / ε^{q−1}` and compares
/// `‖u‖_{L^{q−1}_t L^r_x(J)}` with `c |J|^{1/(q(q−1))} ε^{q/(q−2)}` on the
/// returned interval.
///
/// Admissibility of `(q, r)` is reported rather than enforced.
pub fn locate_interval(
    p: &dyn Potential,
    f: &ComplexField,
    q: f64,
    r: f64,
    params: &HlsParams,
) -> Result<IntervalReport> {
    if !(q > 2.0 && q.is_finite() && r >= 1.0) {
        return Err(invalid(format!("need 2 < q < ∞ and r ≥ 1 (got q = {q}, r = {r})")));
    }
    if !(params.delta0 > 0.0 && params.delta0 <= 1.0) {
        return Err(invalid(format!("δ₀ = {} must lie in (0, 1]", params.delta0)));
    }
    let mass = f.norm();
    if mass == 0.0 {
        return Err(Error::ZeroSolution);
    }
    if (mass - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("data must have unit L² norm (got {mass})")));
    }
    let (mut times, mut norms) = (Vec::new(), Vec::new());
    let mut boundary = 0.0f64;
    evolve_window_observe(p, f, 0.0, -params.delta0, params.delta0, &params.evolve, |t, u| {
        times.push(t);
        norms.push(lp_norm(u, r)?);
        boundary = boundary.max(u.boundary_amplitude());
        Ok(())
    })?;
    let epsilon = mixed_norm_from_slices(&times, &norms, q, None)?;
    if epsilon == 0.0 {
        return Err(Error::ZeroSolution);
    }
    let g: Vec<f64> = norms.iter().map(|n| (n / epsilon).powf(q - 1.0)).collect();
    let interval = inverse_hls_scan(&times, &g, q, params.mode)?;
    let (a, b) = (interval.start, interval.end);
    let lhs = mixed_norm_from_slices(&times[a..=b], &norms[a..=b], q - 1.0, None)?;
    let rhs = params.constant * interval.length().powf(1.0 / (q * (q - 1.0))) * epsilon.powf(q / (q - 2.0));
    Ok(IntervalReport {
        interval,
        q,
        r,
        admissible: is_admissible(q, r),
        epsilon,
        lhs,
        rhs,
        ratio: lhs / rhs,
        passed: lhs >= rhs,
        boundary_amplitude: boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_times(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_weight_takes_everything() {
        let t = grid_times(101, -0.5, 0.5);
        let g = vec![2.0; 101];
        let c = inverse_hls_scan(&t, &g, 2.0, ScanMode::Exact).unwrap();
        assert_eq!((c.start, c.end), (0, 100));
        assert!((c.score - 2.0).abs() < 1e-12);
        let d = inverse_hls_scan(&t, &g, 2.0, ScanMode::Dyadic).unwrap();
        assert_eq!((d.start, d.end), (0, 100));
    }

    #[test]
    fn indicator_weight() {
        let t = grid_times(401, -1.0, 3.0);
        let g: Vec<f64> = t.iter().map(|&s| if (0.0..=1.0).contains(&s) { 1.0 } else { 0.0 }).collect();
        let c = inverse_hls_scan(&t, &g, 2.0, ScanMode::Exact).unwrap();
        let (lo, hi) = c.bounds();
        assert!(lo.abs() < 0.02 && (hi - 1.0).abs() < 0.02, "{lo} {hi}");
        assert!((c.score - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_weight() {
        let t = grid_times(11, 0.0, 1.0);
        let c = inverse_hls_scan(&t, &[0.0; 11], 3.0, ScanMode::Exact).unwrap();
        assert_eq!((c.score, c.start, c.end), (0.0, 0, 10));
    }

    #[test]
    fn rejects_bad_input() {
        let t = grid_times(5, 0.0, 1.0);
        assert!(inverse_hls_scan(&t, &[1.0; 4], 2.0, ScanMode::Exact).is_err());
        assert!(inverse_hls_scan(&t, &[1.0; 5], 1.0, ScanMode::Exact).is_err());
        assert!(inverse_hls_scan(&t, &[1.0, -1.0, 0.0, 0.0, 0.0], 2.0, ScanMode::Exact).is_err());
        assert!(inverse_hls_scan(&[0.0, 0.1, 0.5], &[1.0; 3], 2.0, ScanMode::Exact).is_err());
    }
}
