//! FFT plumbing and band-limited (trigonometric) interpolation.
//!
//! Fourier workspaces are created per invocation; nothing here is shared
//! between threads.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::field::{ComplexField, Grid1D};

/// Forward/inverse FFT pair of a fixed length with its own scratch space.
pub struct Fourier {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self { fwd, inv, scratch: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// In-place `X_m = Σ_j x_j e^{-2πi jm/n}`.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// In-place `x_j = Σ_m X_m e^{+2πi jm/n}` (unnormalised).
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }
}

/// `f(· − shift)` by a phase ramp in Fourier space. Exactly unitary; exact for
/// band-limited data, and wraps around the periodic box.
pub fn fourier_shift(f: &ComplexField, shift: f64) -> ComplexField {
    if shift == 0.0 {
        return f.clone();
    }
    let grid = *f.grid();
    let n = grid.n();
    let mut buf = f.values().to_vec();
    let mut fourier = Fourier::new(n);
    fourier.forward(&mut buf);
    let inv_n = 1.0 / n as f64;
    for (v, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        *v *= Complex64::from_polar(inv_n, -k * shift);
    }
    fourier.inverse(&mut buf);
    ComplexField::from_parts(grid, buf)
}

/// Evaluates the trigonometric interpolant of `f` at the uniform points
/// `start + j·step`, `j = 0..count`.
///
/// Points outside the box `[x_min, x_max)` evaluate to zero when
/// `zero_outside` is set, which suppresses periodic ghost copies when the
/// interpolant is stretched. The Nyquist mode enters as a cosine so that the
/// interpolant of a real field stays real.
pub fn interpolate_uniform(
    f: &ComplexField,
    start: f64,
    step: f64,
    count: usize,
    zero_outside: bool,
) -> Vec<Complex64> {
    let grid = *f.grid();
    let n = grid.n();
    let mut coef = f.values().to_vec();
    Fourier::new(n).forward(&mut coef);
    let inv_n = 1.0 / n as f64;
    coef.iter_mut().for_each(|c| *c *= inv_n);
    let ks = grid.wavenumbers();
    let peak = coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let nyq = n / 2;
    // Modes below roundoff relative to the peak contribute nothing measurable.
    let modes: Vec<(f64, Complex64, bool)> = coef
        .iter()
        .zip(&ks)
        .enumerate()
        .filter(|(_, (c, _))| c.norm() > peak * 1e-17)
        .map(|(m, (c, k))| (*k, *c, m == nyq))
        .collect();
    let x0 = grid.x_min();
    let (lo, hi) = (grid.x_min(), grid.x_max());
    const CHUNK: usize = 128;
    let mut out = vec![Complex64::new(0.0, 0.0); count];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let first = c * CHUNK;
        let y0 = start + first as f64 * step;
        for &(k, a, is_nyq) in &modes {
            if is_nyq {
                for (j, o) in chunk.iter_mut().enumerate() {
                    let y = y0 + j as f64 * step;
                    *o += a * (k * (y - x0)).cos();
                }
                continue;
            }
            let mut ph = Complex64::from_polar(1.0, k * (y0 - x0));
            let rot = Complex64::from_polar(1.0, k * step);
            for o in chunk.iter_mut() {
                *o += a * ph;
                ph *= rot;
            }
        }
        if zero_outside {
            for (j, o) in chunk.iter_mut().enumerate() {
                let y = start + (first + j) as f64 * step;
                if y < lo || y >= hi {
                    *o = Complex64::new(0.0, 0.0);
                }
            }
        }
    });
    out
}

/// `-½ ∂²_x f` computed spectrally.
pub fn kinetic(f: &ComplexField) -> ComplexField {
    let grid = *f.grid();
    let mut buf = f.values().to_vec();
    let mut fourier = Fourier::new(grid.n());
    fourier.forward(&mut buf);
    let inv_n = 1.0 / grid.n() as f64;
    for (v, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        *v *= 0.5 * k * k * inv_n;
    }
    fourier.inverse(&mut buf);
    ComplexField::from_parts(grid, buf)
}

/// Resamples `f` onto `grid` by band-limited interpolation.
pub fn resample(f: &ComplexField, grid: Grid1D) -> ComplexField {
    let values = interpolate_uniform(f, grid.x_min(), grid.dx(), grid.n(), true);
    ComplexField::from_parts(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(grid: Grid1D, x0: f64, xi: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            Complex64::from_polar((-(x - x0).powi(2) / 2.0).exp(), xi * x)
        })
        .unwrap()
    }

    #[test]
    fn parseval_on_grid() {
        let g = Grid1D::from_box(512, -16.0, 16.0).unwrap();
        let f = packet(g, 1.3, 2.0);
        let lhs = f.mass();
        let rhs: f64 = f.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.length();
        assert!(((lhs - rhs) / lhs).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_grid_samples() {
        let g = Grid1D::from_box(256, -12.0, 12.0).unwrap();
        let f = packet(g, 0.5, 1.0);
        let vals = interpolate_uniform(&f, g.x_min(), g.dx(), g.n(), true);
        for (a, b) in vals.iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_off_grid_matches_analytic() {
        let g = Grid1D::from_box(512, -16.0, 16.0).unwrap();
        let f = packet(g, 0.0, 3.0);
        let vals = interpolate_uniform(&f, -3.0 + 0.013, 0.0371, 100, true);
        for (j, v) in vals.iter().enumerate() {
            let y = -3.0 + 0.013 + j as f64 * 0.0371;
            let exact = Complex64::from_polar((-y * y / 2.0).exp(), 3.0 * y);
            assert!((v - exact).norm() < 1e-12, "j = {j}");
        }
    }

    #[test]
    fn shift_is_unitary_and_exact() {
        let g = Grid1D::from_box(512, -16.0, 16.0).unwrap();
        let f = packet(g, 0.0, 2.0);
        let s = fourier_shift(&f, 1.2345);
        assert!(((s.mass() - f.mass()) / f.mass()).abs() < 1e-13);
        let expect = ComplexField::from_fn(g, |x| {
            let y = x - 1.2345;
            Complex64::from_polar((-y * y / 2.0).exp(), 2.0 * y)
        })
        .unwrap();
        assert!(s.distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn kinetic_of_plane_wave_packet() {
        // -½ ∂² e^{-x²/2} = ½ (1 - x²) e^{-x²/2}
        let g = Grid1D::from_box(512, -16.0, 16.0).unwrap();
        let f = packet(g, 0.0, 0.0);
        let k = kinetic(&f);
        for (x, v) in g.points().zip(k.values()) {
            let exact = 0.5 * (1.0 - x * x) * (-x * x / 2.0).exp();
            assert!((v.re - exact).abs() < 1e-11 && v.im.abs() < 1e-11);
        }
    }
}
