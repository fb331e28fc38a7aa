//! Bicharacteristics of `h = ½ξ² + V(t, x)` and the trajectory estimates
//! they satisfy on unit time scales.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::{estimate_m2, Potential};

/// Longest time span a single flow call will integrate over.
pub const MAX_SPAN: f64 = 10.0;

/// A point `z = (x, ξ)` of phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub xi: f64,
}

impl PhasePoint {
    pub fn new(x: f64, xi: f64) -> Self {
        Self { x, xi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.xi.is_finite()
    }

    pub fn sub(&self, other: &PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x - other.x, self.xi - other.xi)
    }

    /// Japanese bracket `⟨z⟩ = (1 + |z|²)^{1/2}`.
    pub fn bracket(&self) -> f64 {
        (1.0 + self.x * self.x + self.xi * self.xi).sqrt()
    }
}

/// A sampled bicharacteristic with its accumulated classical action.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub action_values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> PhasePoint {
        *self.points.last().expect("trajectory has at least one point")
    }

    pub fn action(&self) -> f64 {
        *self.action_values.last().expect("trajectory has at least one point")
    }

    /// Writes `t,x,xi,action` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,xi,action")?;
        for ((t, z), a) in self.times.iter().zip(&self.points).zip(&self.action_values) {
            writeln!(w, "{t:e},{:e},{:e},{a:e}", z.x, z.xi)?;
        }
        Ok(())
    }
}

fn check_span(z: &PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("flow step dt = {dt} must be positive")));
    }
    if !(t0.is_finite() && t1.is_finite()) || (t1 - t0).abs() > MAX_SPAN {
        return Err(invalid(format!("flow span [{t0}, {t1}] exceeds {MAX_SPAN}")));
    }
    if !z.is_finite() {
        return Err(invalid("phase point is not finite"));
    }
    Ok(step_count(t1 - t0, dt))
}

/// Number of equal steps of size at most `dt` covering `span`.
pub(crate) fn step_count(span: f64, dt: f64) -> usize {
    let ratio = span.abs() / dt;
    // Absorb the roundoff in spans that are exact multiples of dt.
    (ratio - 1e-9 * ratio.max(1.0)).ceil().max(0.0) as usize
}

/// One kick–drift–kick step from `t` with (signed) step `h`.
#[inline]
fn verlet_step(p: &dyn Potential, z: PhasePoint, t: f64, h: f64) -> PhasePoint {
    let tm = t + 0.5 * h;
    let xi_half = z.xi - 0.5 * h * p.dv(tm, z.x);
    let x = z.x + h * xi_half;
    let xi = xi_half - 0.5 * h * p.dv(tm, x);
    PhasePoint::new(x, xi)
}

fn lagrangian(p: &dyn Potential, t: f64, z: &PhasePoint) -> f64 {
    0.5 * z.xi * z.xi - p.v(t, z.x)
}

fn integrate(
    p: &dyn Potential,
    z: PhasePoint,
    t0: f64,
    t1: f64,
    dt: f64,
    mut visit: impl FnMut(f64, PhasePoint, f64),
) -> Result<(PhasePoint, f64)> {
    let n = check_span(&z, t0, t1, dt)?;
    let mut cur = z;
    let mut action = 0.0;
    visit(t0, cur, action);
    if n == 0 {
        return Ok((cur, action));
    }
    let h = (t1 - t0) / n as f64;
    let mut l_prev = lagrangian(p, t0, &cur);
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let next = verlet_step(p, cur, t, h);
        let t_next = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * h };
        if !next.is_finite() {
            return Err(Error::FlowBlowup(t_next));
        }
        let l_next = lagrangian(p, t_next, &next);
        action += 0.5 * h * (l_prev + l_next);
        l_prev = l_next;
        cur = next;
        visit(t_next, cur, action);
    }
    Ok((cur, action))
}

/// `Φ(t1, t0)(z)` by velocity-Verlet steps of size at most `dt`.
pub fn flow(p: &dyn Potential, z: PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<PhasePoint> {
    integrate(p, z, t0, t1, dt, |_, _, _| {}).map(|(z, _)| z)
}

/// Classical action `∫ ½ξ² − V` along the discrete trajectory from `t0` to `t1`.
pub fn action(p: &dyn Potential, z: PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<f64> {
    integrate(p, z, t0, t1, dt, |_, _, _| {}).map(|(_, a)| a)
}

/// Flow endpoint together with the action accumulated on the way.
pub fn flow_with_action(
    p: &dyn Potential,
    z: PhasePoint,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<(PhasePoint, f64)> {
    integrate(p, z, t0, t1, dt, |_, _, _| {})
}

/// Every integrator step from `t0` to `t1`, endpoints included.
pub fn trajectory(p: &dyn Potential, z: PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), points: Vec::new(), action_values: Vec::new() };
    integrate(p, z, t0, t1, dt, |t, z, a| {
        traj.times.push(t);
        traj.points.push(z);
        traj.action_values.push(a);
    })?;
    Ok(traj)
}

/// The orbit of `z` (given at time `t0`) sampled at the increasing `times`.
pub fn sample_orbit(
    p: &dyn Potential,
    z: PhasePoint,
    t0: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut cur) = (t0, z);
    for &s in times {
        cur = flow(p, cur, t, s, dt)?;
        t = s;
        out.push(cur);
    }
    Ok(out)
}

/// One side-by-side evaluation of an inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Bound {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, satisfied: lhs <= rhs * (1.0 + 1e-12) + 1e-10 }
    }
}

/// The three trajectory-difference inequalities for `|t − s| ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairReport {
    pub m2: f64,
    /// `|x₀ᵗ − x₁ᵗ| ≤ (|Δxˢ| + |t−s||Δξˢ|) e^{M₂}`.
    pub position: Bound,
    /// `|Δξᵗ − Δξˢ| ≤ (|t−s||Δxˢ| + |t−s|²|Δξˢ|) M₂ e^{M₂}`.
    pub momentum: Bound,
    /// `|Δxᵗ − Δxˢ − (t−s)Δξˢ| ≤ (|t−s|²|Δxˢ| + |t−s|³|Δξˢ|) e^{M₂}`.
    pub linearized: Bound,
}

impl PairReport {
    pub fn all_satisfied(&self) -> bool {
        self.position.satisfied && self.momentum.satisfied && self.linearized.satisfied
    }
}

fn resolve_m2(p: &dyn Potential, m2: Option<f64>, times: &[f64]) -> Result<f64> {
    match m2 {
        Some(m) => Ok(m),
        None => {
            let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            estimate_m2(p, (lo, hi))
        }
    }
}

/// Evaluates both sides of the trajectory-difference inequalities for the
/// orbits of `z0`, `z1` (given at time 0) between times `s` and `t`.
///
/// `m2` overrides the estimate of `sup |∂²_x V|` obtained from
/// [`verify_subquadratic`](crate::potential::verify_subquadratic).
pub fn check_pair_estimates(
    p: &dyn Potential,
    z0: PhasePoint,
    z1: PhasePoint,
    s: f64,
    t: f64,
    dt: f64,
    m2: Option<f64>,
) -> Result<PairReport> {
    if (t - s).abs() > 1.0 {
        return Err(invalid(format!("|t - s| = {} exceeds 1", (t - s).abs())));
    }
    let m2 = resolve_m2(p, m2, &[0.0, s, t])?;
    let a_s = flow(p, z0, 0.0, s, dt)?;
    let b_s = flow(p, z1, 0.0, s, dt)?;
    let a_t = flow(p, a_s, s, t, dt)?;
    let b_t = flow(p, b_s, s, t, dt)?;
    let (ds, dt_) = (a_s.sub(&b_s), a_t.sub(&b_t));
    let tau = (t - s).abs();
    let growth = m2.exp();
    Ok(PairReport {
        m2,
        position: Bound::new(dt_.x.abs(), (ds.x.abs() + tau * ds.xi.abs()) * growth),
        momentum: Bound::new(
            (dt_.xi - ds.xi).abs(),
            (tau * ds.x.abs() + tau * tau * ds.xi.abs()) * m2 * growth,
        ),
        linearized: Bound::new(
            (dt_.x - ds.x - (t - s) * ds.xi).abs(),
            (tau * tau * ds.x.abs() + tau.powi(3) * ds.xi.abs()) * growth,
        ),
    })
}

/// Largest `δ ≤ 1` with `e^{M₂}(δ² + δ³) ≤ 1/100`.
pub fn collision_delta(m2: f64) -> f64 {
    let g = |d: f64| m2.exp() * (d * d + d * d * d);
    if g(1.0) <= 0.01 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.01 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollisionReport {
    pub delta_used: f64,
    /// Interaction window `s ± min(δ, 2Cr/|Δξˢ|)`; all of `s ± δ` when `Δξˢ = 0`.
    pub window: (f64, f64),
    pub momentum_drift_bound: f64,
    /// Largest observed `|Δξᵗ − Δξˢ|` while the separation stays within `Cr`.
    pub max_momentum_drift: f64,
    /// Smallest separation seen at `2Cr/|Δξˢ| ≤ |t − s| ≤ δ` (infinite if no such `t`).
    pub min_separation_outside: f64,
    /// Worst ratio of the linearization error to its `1/100` allowance.
    pub linearization_ratio: f64,
    pub satisfied: bool,
}

/// Scans `[s − δ, s + δ]` for the two colliding-orbit conclusions: separation
/// beyond `Cr` away from the interaction window, and small relative momentum
/// drift during the interaction.
#[allow(clippy::too_many_arguments)]
pub fn collision_window(
    p: &dyn Potential,
    z0: PhasePoint,
    z1: PhasePoint,
    s: f64,
    r: f64,
    c: f64,
    dt: f64,
    m2: Option<f64>,
) -> Result<CollisionReport> {
    if !(c >= 2.0) {
        return Err(invalid(format!("collision constant C = {c} must be at least 2")));
    }
    if !(r > 0.0) {
        return Err(invalid(format!("collision radius r = {r} must be positive")));
    }
    let m2 = resolve_m2(p, m2, &[0.0, s - 1.0, s + 1.0])?;
    let delta = collision_delta(m2);
    let a_s = flow(p, z0, 0.0, s, dt)?;
    let b_s = flow(p, z1, 0.0, s, dt)?;
    let ds = a_s.sub(&b_s);
    if ds.x.abs() > r * (1.0 + 1e-12) {
        return Err(invalid(format!("initial separation {} exceeds r = {r}", ds.x.abs())));
    }
    let rel_speed = ds.xi.abs();
    let half = if rel_speed > 0.0 { delta.min(2.0 * c * r / rel_speed) } else { delta };
    let bound = half * c * r * m2 * m2.exp();

    let samples = 400usize;
    let mut min_sep = f64::INFINITY;
    let mut max_drift = 0.0f64;
    let mut lin_ratio = 0.0f64;
    for dir in [1.0, -1.0] {
        let times: Vec<f64> =
            (1..=samples).map(|k| s + dir * delta * k as f64 / samples as f64).collect();
        let a = sample_orbit(p, a_s, s, &times, dt)?;
        let b = sample_orbit(p, b_s, s, &times, dt)?;
        let mut interacting = true;
        for ((t, za), zb) in times.iter().zip(&a).zip(&b) {
            let d = za.sub(zb);
            let tau = (t - s).abs();
            let allowance = 0.01 * (ds.x.abs() + tau * ds.xi.abs());
            let lin = (d.x - ds.x - (t - s) * ds.xi).abs();
            if allowance > 0.0 {
                lin_ratio = lin_ratio.max(lin / allowance);
            } else if lin > 1e-12 {
                lin_ratio = f64::INFINITY;
            }
            if rel_speed > 0.0 && tau >= 2.0 * c * r / rel_speed {
                min_sep = min_sep.min(d.x.abs());
            }
            interacting &= d.x.abs() <= c * r;
            if interacting {
                max_drift = max_drift.max((d.xi - ds.xi).abs());
            }
        }
    }
    let satisfied = min_sep >= c * r
        && max_drift <= bound * (1.0 + 1e-12) + 1e-10
        && lin_ratio <= 1.0 + 1e-9;
    Ok(CollisionReport {
        delta_used: delta,
        window: (s - half, s + half),
        momentum_drift_bound: bound,
        max_momentum_drift: max_drift,
        min_separation_outside: min_sep,
        linearization_ratio: lin_ratio,
        satisfied,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    Contained,
    NotContained,
    /// The orbit never meets the tube during the time window.
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CubeReport {
    /// Smallest `C ≥ 1` placing `z` in the dilated cube at `t_center`.
    pub c_required: Option<f64>,
    /// Dilation allowed by the trajectory estimates, `max(3e^{M₂}, 1 + 3M₂e^{M₂})`.
    pub c_allowed: f64,
    pub contained: Containment,
}

/// Dilation of the cube `(0, rη) + r[−1, 1]²` (about its centre) needed to hold `d`.
fn dilation(d: PhasePoint, eta: f64, r: f64) -> f64 {
    (d.x.abs().max((d.xi - r * eta).abs()) / r).max(1.0)
}

/// If the orbit of `z` meets the moving cube `z0refᵗ + rQ_η` for some
/// `|t − t_center| ≤ min(1/|η|, 1)`, measures how far the cube must be
/// dilated to contain `z` at `t_center`. Both points are given at time 0.
#[allow(clippy::too_many_arguments)]
pub fn cube_containment(
    p: &dyn Potential,
    z0ref: PhasePoint,
    z: PhasePoint,
    t_center: f64,
    eta: f64,
    r: f64,
    dt: f64,
    m2: Option<f64>,
) -> Result<CubeReport> {
    if !(r >= 1.0) {
        return Err(invalid(format!("cube radius r = {r} must be at least 1")));
    }
    let half = if eta == 0.0 { 1.0 } else { eta.abs().recip().min(1.0) };
    let m2 = resolve_m2(p, m2, &[0.0, t_center - half, t_center + half])?;
    let c_allowed = (3.0 * m2.exp()).max(1.0 + 3.0 * m2 * m2.exp());
    let samples = 401usize;
    let times: Vec<f64> = (0..samples)
        .map(|k| t_center - half + 2.0 * half * k as f64 / (samples - 1) as f64)
        .collect();
    let refs = sample_orbit(p, z0ref, 0.0, &times, dt)?;
    let orbit = sample_orbit(p, z, 0.0, &times, dt)?;
    let enters = refs
        .iter()
        .zip(&orbit)
        .any(|(a, b)| dilation(b.sub(a), eta, r) <= 1.0 + 1e-12);
    if !enters {
        return Ok(CubeReport { c_required: None, c_allowed, contained: Containment::NotApplicable });
    }
    let centre = flow(p, z, 0.0, t_center, dt)?.sub(&flow(p, z0ref, 0.0, t_center, dt)?);
    let c = dilation(centre, eta, r);
    let contained = if c <= c_allowed { Containment::Contained } else { Containment::NotContained };
    Ok(CubeReport { c_required: Some(c), c_allowed, contained })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Builtin;
    use std::f64::consts::PI;

    #[test]
    fn free_flow_is_a_straight_line() {
        let z = flow(&Builtin::Zero, PhasePoint::new(1.0, 2.0), 0.0, 3.0, 0.25).unwrap();
        assert_eq!(z, PhasePoint::new(7.0, 2.0));
        let z = flow(&Builtin::Zero, PhasePoint::new(1.0, 2.0), 0.0, 3.0, 1e-3).unwrap();
        assert!((z.x - 7.0).abs() < 1e-12 && z.xi == 2.0);
    }

    #[test]
    fn harmonic_rotation() {
        let h = Builtin::harmonic(1.0);
        let z = flow(&h, PhasePoint::new(1.0, 0.0), 0.0, PI / 2.0, 1e-4).unwrap();
        assert!(z.x.abs() < 1e-6 && (z.xi + 1.0).abs() < 1e-6, "{z:?}");
        let z = flow(&h, PhasePoint::new(0.0, 1.0), 0.0, PI, 1e-4).unwrap();
        assert!(z.x.abs() < 1e-6 && (z.xi + 1.0).abs() < 1e-6, "{z:?}");
    }

    #[test]
    fn action_examples() {
        let a = action(&Builtin::Zero, PhasePoint::new(0.0, 2.0), 0.0, 1.0, 1e-3).unwrap();
        assert!((a - 2.0).abs() < 1e-8);
        let a = action(&Builtin::harmonic(1.0), PhasePoint::new(1.0, 0.0), 0.0, 2.0 * PI, 1e-4).unwrap();
        assert!(a.abs() < 1e-5, "{a}");
        let a = action(&Builtin::SoftBranch, PhasePoint::new(0.3, 1.0), 0.7, 0.7, 1e-4).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn flow_rejects_bad_arguments() {
        let z = PhasePoint::new(0.0, 0.0);
        assert!(flow(&Builtin::Zero, z, 0.0, 11.0, 1e-3).is_err());
        assert!(flow(&Builtin::Zero, z, 0.0, 1.0, 0.0).is_err());
        assert!(flow(&Builtin::Zero, PhasePoint::new(f64::NAN, 0.0), 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let tr = trajectory(&Builtin::Zero, PhasePoint::new(0.0, 1.0), 0.0, 1.0, 0.5).unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(tr.action_values[0], 0.0);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,x,xi,action\n"));
    }

    #[test]
    fn pair_estimates_free_particle() {
        let r = check_pair_estimates(
            &Builtin::Zero,
            PhasePoint::new(0.0, 1.0),
            PhasePoint::new(2.0, -1.0),
            0.2,
            0.9,
            1e-3,
            None,
        )
        .unwrap();
        assert_eq!(r.m2, 0.0);
        assert!(r.all_satisfied());
        // Free orbits are straight lines: Δxᵗ = Δxˢ + (t − s)Δξˢ = −1.6 + 0.7·2.
        assert!((r.position.lhs - 0.2).abs() < 1e-12);
        assert!(r.linearized.lhs < 1e-12 && r.momentum.lhs == 0.0);
    }

    #[test]
    fn pair_estimates_harmonic() {
        let r = check_pair_estimates(
            &Builtin::harmonic(1.0),
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            0.0,
            0.5,
            1e-4,
            None,
        )
        .unwrap();
        assert!(r.all_satisfied(), "{r:?}");
        // Exact rotation: Δx = cos 0.5, Δξ = −sin 0.5 relative to z1 − z0.
        assert!((r.position.lhs - 0.5f64.cos()).abs() < 1e-7);
        assert!((r.momentum.lhs - 0.5f64.sin()).abs() < 1e-7);
        let z = PhasePoint::new(0.4, -1.2);
        let same = check_pair_estimates(&Builtin::SoftBranch, z, z, -0.3, 0.4, 1e-3, Some(1.0)).unwrap();
        assert_eq!((same.position.lhs, same.momentum.lhs, same.linearized.lhs), (0.0, 0.0, 0.0));
    }

    #[test]
    fn collision_delta_margin() {
        let d = collision_delta(0.0);
        assert!((d * d + d * d * d - 0.01).abs() < 1e-12);
        assert!(collision_delta(1.0) < d);
    }

    #[test]
    fn collision_examples() {
        let r = collision_window(
            &Builtin::Zero,
            PhasePoint::new(0.0, 5.0),
            PhasePoint::new(1.0, -5.0),
            0.0,
            1.0,
            2.0,
            1e-3,
            None,
        )
        .unwrap();
        assert!(r.satisfied);
        assert_eq!(r.momentum_drift_bound, 0.0);
        let h = Builtin::harmonic(1.0);
        let r = collision_window(&h, PhasePoint::new(0.0, 5.0), PhasePoint::new(0.0, -5.0), 0.0, 0.1, 2.0, 1e-4, None)
            .unwrap();
        assert!(r.satisfied, "{r:?}");
        let r = collision_window(&h, PhasePoint::new(0.0, 1.0), PhasePoint::new(0.05, 1.0), 0.0, 0.1, 2.0, 1e-4, None)
            .unwrap();
        assert_eq!(r.window, (-r.delta_used, r.delta_used));
        assert!(r.satisfied && r.max_momentum_drift <= r.momentum_drift_bound);
    }

    #[test]
    fn cube_examples() {
        let origin = PhasePoint::new(0.0, 0.0);
        let r = cube_containment(&Builtin::Zero, origin, PhasePoint::new(0.5, 0.0), 0.3, 0.0, 1.0, 1e-3, None)
            .unwrap();
        assert_eq!(r.c_required, Some(1.0));
        let r = cube_containment(&Builtin::Zero, origin, PhasePoint::new(0.0, 0.5), 0.0, 0.0, 1.0, 1e-3, None)
            .unwrap();
        assert!(r.c_required.unwrap() <= 2.0);
        let far = cube_containment(&Builtin::Zero, origin, PhasePoint::new(50.0, 0.0), 0.0, 0.0, 1.0, 1e-3, None)
            .unwrap();
        assert_eq!(far.contained, Containment::NotApplicable);
    }

    #[test]
    fn cube_harmonic_bounded_in_eta() {
        let h = Builtin::harmonic(1.0);
        let mut worst = 0.0f64;
        for eta in [5.0, 10.0, 20.0] {
            // Start inside the moving cube at the window edge.
            let s = 1.0 / eta;
            let zref = PhasePoint::new(0.3, 0.2);
            let zref_s = flow(&h, zref, 0.0, s, 1e-4).unwrap();
            let zs = PhasePoint::new(zref_s.x + 0.9, zref_s.xi + eta - 0.9);
            let z = flow(&h, zs, s, 0.0, 1e-4).unwrap();
            let r = cube_containment(&h, zref, z, 0.0, eta, 1.0, 1e-4, None).unwrap();
            assert_eq!(r.contained, Containment::Contained);
            worst = worst.max(r.c_required.unwrap());
        }
        assert!(worst < 3.0, "{worst}");
    }
}
