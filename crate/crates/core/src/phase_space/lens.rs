//! The lens transform, taking free solutions to harmonic-oscillator solutions:
//! `𝓛u(t, x) = (cos t)^{-1/2} u(tan t, x / cos t) e^{−ix² tan t / 2}`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{ComplexField, SpacetimeField};
use crate::spectral::{interpolate_uniform, kinetic};

/// Cubic Lagrange interpolation of the recorded slices at time `s`.
fn slice_at(u: &SpacetimeField, s: f64) -> Result<ComplexField> {
    let times = u.times();
    let m = times.len();
    if m < 4 {
        return Err(invalid("cubic interpolation in time needs at least four slices"));
    }
    let (first, last) = (times[0], times[m - 1]);
    if !(s >= first && s <= last) {
        return Err(invalid(format!("time {s} outside the recorded range [{first}, {last}]")));
    }
    let k = times.partition_point(|t| *t <= s).saturating_sub(1);
    let start = k.saturating_sub(1).min(m - 4);
    let nodes = &times[start..start + 4];
    let grid = *u.grid();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n()];
    for (i, ti) in nodes.iter().enumerate() {
        let w: f64 = nodes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, tj)| (s - tj) / (ti - tj))
            .product();
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(u.slices()[start + i].values()) {
            *o += w * v;
        }
    }
    ComplexField::new(grid, out)
}

fn lens_slice(u: &SpacetimeField, t: f64) -> Result<ComplexField> {
    let c = t.cos();
    if !(c.abs() >= 0.1) {
        return Err(Error::LensSingular(t));
    }
    let tan = t.tan();
    let us = slice_at(u, tan)?;
    let grid = *u.grid();
    let mut values = interpolate_uniform(&us, grid.x_min() / c, grid.dx() / c, grid.n(), true);
    let a = c.abs().sqrt().recip();
    for (v, x) in values.iter_mut().zip(grid.points()) {
        *v *= Complex64::from_polar(a, -0.5 * x * x * tan);
    }
    ComplexField::new(grid, values)
}

/// `𝓛u` at the strictly increasing `times`, resampling the recorded free
/// solution `u` by cubic interpolation in time and band-limited interpolation in space.
pub fn lens_transform(u_free: &SpacetimeField, times: &[f64]) -> Result<SpacetimeField> {
    let slices = times.iter().map(|&t| lens_slice(u_free, t)).collect::<Result<Vec<_>>>()?;
    SpacetimeField::new(times.to_vec(), slices)
}

/// `‖i∂_t𝓛u − (−½∂² + ½x²)𝓛u‖₂` at time `t`, with a central difference of step `h` in time.
pub fn lens_pde_residual(u_free: &SpacetimeField, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("difference step must be positive"));
    }
    let minus = lens_slice(u_free, t - h)?;
    let mid = lens_slice(u_free, t)?;
    let plus = lens_slice(u_free, t + h)?;
    let grid = *mid.grid();
    let kin = kinetic(&mid);
    let i = Complex64::new(0.0, 1.0);
    let residual: Vec<Complex64> = plus
        .values()
        .iter()
        .zip(minus.values())
        .zip(mid.values().iter().zip(kin.values()))
        .zip(grid.points())
        .map(|(((p, m), (c, k)), x)| i * (p - m) / (2.0 * h) - k - 0.5 * x * x * c)
        .collect();
    Ok(ComplexField::new(grid, residual)?.norm())
}
