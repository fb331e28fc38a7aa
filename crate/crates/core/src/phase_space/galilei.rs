//! Galilean covariance along a classical trajectory.
//!
//! With `X = x₀ᵗ`, `Ξ = ξ₀ᵗ` and `α` the classical action,
//! `U(t, 0) π(z₀) φ = e^{iα} π(z₀ᵗ) U^{z₀}(t, 0) φ`, where `U^{z₀}` is generated
//! by the recentred potential `V(t, X + x) − V(t, X) − x ∂_xV(t, X)`.

use num_complex::Complex64;

use super::{translate_modulate, Window};
use crate::error::{invalid, Result};
use crate::field::ComplexField;
use crate::flow::{flow_with_action, trajectory, PhasePoint};
use crate::potential::Potential;
use crate::propagator::{evolve, evolve_window_observe, EvolveParams};

/// `V` expanded to second order around a cached trajectory.
#[derive(Debug)]
pub struct RecenteredPotential<'a> {
    base: &'a dyn Potential,
    origin: PhasePoint,
    times: Vec<f64>,
    points: Vec<PhasePoint>,
    actions: Vec<f64>,
}

/// Caches the orbit of `z0` (given at time 0) over `t_range` at step `flow_dt`.
pub fn recentered_potential<'a>(
    p: &'a dyn Potential,
    z0: PhasePoint,
    t_range: (f64, f64),
    flow_dt: f64,
) -> Result<RecenteredPotential<'a>> {
    let (lo, hi) = (t_range.0.min(0.0), t_range.1.max(0.0));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(invalid("trajectory window must be finite"));
    }
    let back = trajectory(p, z0, 0.0, lo, flow_dt)?;
    let fwd = trajectory(p, z0, 0.0, hi, flow_dt)?;
    let mut times: Vec<f64> = back.times.iter().rev().copied().collect();
    let mut points: Vec<PhasePoint> = back.points.iter().rev().copied().collect();
    let mut actions: Vec<f64> = back.action_values.iter().rev().copied().collect();
    times.extend_from_slice(&fwd.times[1..]);
    points.extend_from_slice(&fwd.points[1..]);
    actions.extend_from_slice(&fwd.action_values[1..]);
    Ok(RecenteredPotential { base: p, origin: z0, times, points, actions })
}

impl RecenteredPotential<'_> {
    /// Cubic Hermite basis on the cached interval containing `t` (clamped to the cache).
    fn locate(&self, t: f64) -> (usize, f64, f64, [f64; 4]) {
        let last = self.times.len() - 1;
        if last == 0 {
            return (0, 0.0, 0.0, [1.0, 0.0, 0.0, 0.0]);
        }
        let k = self.times.partition_point(|s| *s <= t).saturating_sub(1).min(last - 1);
        let h = self.times[k + 1] - self.times[k];
        let s = ((t - self.times[k]) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let basis = [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2];
        (k, h, s, basis)
    }

    fn hermite(&self, t: f64, value: impl Fn(usize) -> f64, slope: impl Fn(usize) -> f64) -> f64 {
        let (k, h, _, b) = self.locate(t);
        if h == 0.0 {
            return value(k);
        }
        b[0] * value(k) + b[1] * h * slope(k) + b[2] * value(k + 1) + b[3] * h * slope(k + 1)
    }

    /// `x₀ᵗ`.
    pub fn center(&self, t: f64) -> f64 {
        self.hermite(t, |k| self.points[k].x, |k| self.points[k].xi)
    }

    /// `z₀ᵗ`, with `ξ₀ᵗ` from its own Hermite interpolant (`dξ/dt = −∂_xV`).
    pub fn phase_point(&self, t: f64) -> PhasePoint {
        let xi = self.hermite(
            t,
            |k| self.points[k].xi,
            |k| -self.base.dv(self.times[k], self.points[k].x),
        );
        PhasePoint::new(self.center(t), xi)
    }

    /// Classical action `α(t, 0, z₀)`.
    pub fn action(&self, t: f64) -> f64 {
        self.hermite(
            t,
            |k| self.actions[k],
            |k| 0.5 * self.points[k].xi.powi(2) - self.base.v(self.times[k], self.points[k].x),
        )
    }
}

impl Potential for RecenteredPotential<'_> {
    fn v(&self, t: f64, x: f64) -> f64 {
        let c = self.center(t);
        self.base.v(t, c + x) - self.base.v(t, c) - x * self.base.dv(t, c)
    }

    fn dv(&self, t: f64, x: f64) -> f64 {
        let c = self.center(t);
        self.base.dv(t, c + x) - self.base.dv(t, c)
    }

    fn d2v(&self, t: f64, x: f64) -> f64 {
        self.base.d2v(t, self.center(t) + x)
    }

    fn label(&self) -> String {
        format!("recentered({}; x0={}, xi0={})", self.base.label(), self.origin.x, self.origin.xi)
    }

    fn is_time_independent(&self) -> bool {
        false
    }
}

/// Time steps for the quantum and classical parts of the covariance check.
#[derive(Clone, Copy, Debug)]
pub struct CovarianceParams {
    pub evolve: EvolveParams,
    pub flow_dt: f64,
}

impl Default for CovarianceParams {
    fn default() -> Self {
        Self { evolve: EvolveParams { dt: 1e-3, record_stride: 1 }, flow_dt: 1e-4 }
    }
}

/// `‖U(t,0)π(z₀)φ − e^{iα}π(z₀ᵗ)U^{z₀}(t,0)φ‖₂`.
pub fn galilean_covariance_residual(
    p: &dyn Potential,
    z0: PhasePoint,
    phi: &ComplexField,
    t: f64,
    params: &CovarianceParams,
) -> Result<f64> {
    let lhs = evolve(p, &translate_modulate(z0, phi), 0.0, t, &params.evolve)?;
    let (zt, alpha) = flow_with_action(p, z0, 0.0, t, params.flow_dt)?;
    let rec = recentered_potential(p, z0, (t.min(0.0), t.max(0.0)), params.flow_dt)?;
    let inner = evolve(&rec, phi, 0.0, t, &params.evolve)?;
    let rhs = translate_modulate(zt, &inner).scaled(Complex64::from_polar(1.0, alpha));
    lhs.distance(&rhs)
}

/// `sup_{|t| ≤ δ₀} sup_x ⟨x − x₀ᵗ⟩^N |U(t, 0)ψ_{z₀}(x)|` over the recorded slices.
pub fn wavepacket_tail_sup(
    p: &dyn Potential,
    z0: PhasePoint,
    power: i32,
    delta0: f64,
    grid: crate::field::Grid1D,
    params: &CovarianceParams,
) -> Result<f64> {
    let packet = Window::default().packet(grid, z0);
    let rec = recentered_potential(p, z0, (-delta0, delta0), params.flow_dt)?;
    let mut sup = 0.0f64;
    evolve_window_observe(p, &packet, 0.0, -delta0, delta0, &params.evolve, |t, u| {
        let c = rec.center(t);
        for (v, x) in u.values().iter().zip(grid.points()) {
            let bracket = (1.0 + (x - c).powi(2)).sqrt();
            sup = sup.max(bracket.powi(power) * v.norm());
        }
        Ok(())
    })?;
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid1D;
    use crate::potential::Builtin;

    fn grid() -> Grid1D {
        Grid1D::from_box(1024, -20.0, 20.0).unwrap()
    }

    #[test]
    fn harmonic_recentering_is_exact() {
        let h = Builtin::harmonic(1.0);
        let rec = recentered_potential(&h, PhasePoint::new(1.5, -2.0), (-0.5, 0.5), 1e-4).unwrap();
        for t in [-0.4, 0.0, 0.33] {
            for x in [-3.0, 0.5, 2.0] {
                assert!((rec.v(t, x) - 0.5 * x * x).abs() < 1e-12);
            }
        }
        let z = Builtin::Zero;
        let rec = recentered_potential(&z, PhasePoint::new(1.0, 1.0), (0.0, 0.5), 1e-4).unwrap();
        assert_eq!(rec.v(0.2, 3.0), 0.0);
    }

    #[test]
    fn soft_branch_recentered_at_origin() {
        let s = Builtin::SoftBranch;
        let rec = recentered_potential(&s, PhasePoint::default(), (0.0, 0.5), 1e-4).unwrap();
        for x in [-2.0, 0.3, 4.0] {
            assert!((rec.v(0.0, x) - ((1.0 + x * x).sqrt() - 1.0)).abs() < 1e-14);
        }
        assert_eq!(rec.dv(0.0, 0.0), 0.0);
    }

    #[test]
    fn interpolated_orbit_matches_rotation() {
        let h = Builtin::harmonic(1.0);
        let rec = recentered_potential(&h, PhasePoint::new(2.0, 0.0), (-0.5, 0.5), 1e-3).unwrap();
        for t in [-0.45, -0.123_45, 0.0, 0.2718, 0.5] {
            assert!((rec.center(t) - 2.0 * f64::cos(t)).abs() < 1e-7);
            assert!((rec.phase_point(t).xi + 2.0 * f64::sin(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn covariance_examples() {
        let psi = Window::default().generator(grid());
        let params = CovarianceParams::default();
        let r = galilean_covariance_residual(&Builtin::Zero, PhasePoint::new(0.0, 3.0), &psi, 0.4, &params).unwrap();
        assert!(r <= 1e-6, "free: {r}");
        let h = Builtin::harmonic(1.0);
        let r = galilean_covariance_residual(&h, PhasePoint::new(2.0, 0.0), &psi, 0.5, &params).unwrap();
        assert!(r <= 1e-6, "harmonic: {r}");
        let r = galilean_covariance_residual(&Builtin::SoftBranch, PhasePoint::default(), &psi, -0.3, &params).unwrap();
        assert!(r <= 1e-8, "even: {r}");
    }
}
