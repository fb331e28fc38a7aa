//! Uniform periodic grids, sampled complex wavefunctions and their norms.
//!
//! The real line is replaced by the periodic box `[x_min, x_min + n·dx)`.
//! Spatial integrals are uniform Riemann sums with weight `dx`, which is
//! spectrally accurate for the smooth, rapidly decaying data used here.
//! Time integrals over a [`SpacetimeField`] use the trapezoidal rule.

mod io;

pub use io::{load_field, read_field, save_field, write_field, MAGIC};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::Fourier;

/// A uniform grid on the periodic box `[x_min, x_min + n·dx)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    x_min: f64,
    dx: f64,
}

impl Grid1D {
    pub fn new(n: usize, x_min: f64, dx: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !x_min.is_finite() || !dx.is_finite() || dx <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "x_min = {x_min}, dx = {dx}: need finite x_min and dx > 0"
            )));
        }
        Ok(Self { n, x_min, dx })
    }

    /// Grid with `n` samples covering `[x_lo, x_hi)`.
    pub fn from_box(n: usize, x_lo: f64, x_hi: f64) -> Result<Self> {
        if x_hi <= x_lo {
            return Err(Error::InvalidGrid(format!("empty box [{x_lo}, {x_hi})")));
        }
        Self::new(n, x_lo, (x_hi - x_lo) / n as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.x(k))
    }

    /// Angular wavenumbers in FFT order; the Nyquist mode carries `-π/dx`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as isize;
        let base = 2.0 * PI / self.length();
        (0..n)
            .map(|m| if m < n / 2 { m } else { m - n })
            .map(|m| m as f64 * base)
            .collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }
}

/// A sampled complex wavefunction.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(invalid(format!(
                "field has {} samples, grid expects {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(grid: Grid1D, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::from_parts(grid, vec![Complex64::new(0.0, 0.0); grid.n()])
    }

    /// Samples `f` at every grid point. Non-finite samples are rejected.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `‖f‖₂²`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `‖f‖₂`.
    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Ok(Self::from_parts(self.grid, values))
    }

    /// `‖f − g‖₂`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus over the outer 5% of the box on each side.
    ///
    /// Every experiment reports this number: the periodic box stands in for
    /// the real line only while it stays negligible.
    pub fn boundary_amplitude(&self) -> f64 {
        let n = self.grid.n();
        let edge = (n / 20).max(1);
        self.values[..edge]
            .iter()
            .chain(&self.values[n - edge..])
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Fourier coefficients `f̂(k_m) = dx · Σ_j f_j e^{-i k_m (x_j - x_min)}`
    /// in FFT order. With this convention `‖f‖₂² = L⁻¹ Σ_m |f̂(k_m)|²`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        Fourier::new(self.grid.n()).forward(&mut buf);
        let dx = self.grid.dx();
        buf.iter_mut().for_each(|v| *v *= dx);
        buf
    }
}

/// Samples `u(t, ·)` at strictly increasing times, all on one grid.
#[derive(Clone, Debug)]
pub struct SpacetimeField {
    times: Vec<f64>,
    slices: Vec<ComplexField>,
}

impl SpacetimeField {
    pub fn new(times: Vec<f64>, slices: Vec<ComplexField>) -> Result<Self> {
        if times.len() != slices.len() || times.len() < 2 {
            return Err(invalid(format!(
                "need at least two slices with one time each (got {} times, {} slices)",
                times.len(),
                slices.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("slice times must be strictly increasing"));
        }
        let grid = *slices[0].grid();
        if slices.iter().any(|s| *s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, slices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[ComplexField] {
        &self.slices
    }

    pub fn grid(&self) -> &Grid1D {
        self.slices[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest boundary amplitude over all slices.
    pub fn boundary_amplitude(&self) -> f64 {
        self.slices.iter().map(|s| s.boundary_amplitude()).fold(0.0, f64::max)
    }
}

/// Trapezoidal quadrature weights for (possibly nonuniform) sample times.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    if m < 2 {
        return vec![0.0; m];
    }
    (0..m)
        .map(|i| {
            let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
            let right = if i + 1 < m { times[i + 1] - times[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn check_exponent(p: f64, what: &str) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("{what} = {p} must satisfy {what} >= 1")));
    }
    Ok(())
}

fn lp_of_moduli(moduli: impl Iterator<Item = f64> + Clone, p: f64, dx: f64) -> f64 {
    let peak = moduli.clone().fold(0.0, f64::max);
    if p.is_infinite() {
        return peak;
    }
    if peak == 0.0 {
        return 0.0;
    }
    // Normalising by the peak keeps |v|^p in range for large p.
    let sum: f64 = moduli.map(|m| (m / peak).powf(p)).sum();
    peak * (sum * dx).powf(1.0 / p)
}

/// `‖f‖_{L^p}`; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(f: &ComplexField, p: f64) -> Result<f64> {
    check_exponent(p, "p")?;
    if let Some(k) = f.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite(k));
    }
    Ok(lp_of_moduli(f.values.iter().map(|v| v.norm()), p, f.grid.dx()))
}

/// `⟨f, g⟩ = Σ f_k conj(g_k) dx`, linear in the first slot.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    Ok(raw_inner(&f.values, &g.values) * f.grid.dx())
}

pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `‖u‖_{L^q_t L^r_x}` with trapezoidal weights in time, optionally
/// multiplied by a nonnegative time window sampled at `u.times()`.
pub fn mixed_norm(u: &SpacetimeField, q: f64, r: f64, weight: Option<&[f64]>) -> Result<f64> {
    check_exponent(r, "r")?;
    let norms = u
        .slices
        .iter()
        .map(|s| lp_norm(s, r))
        .collect::<Result<Vec<_>>>()?;
    mixed_norm_from_slices(&u.times, &norms, q, weight)
}

/// Time part of [`mixed_norm`], given precomputed `‖u(t_i)‖_{L^r}`.
pub fn mixed_norm_from_slices(
    times: &[f64],
    slice_norms: &[f64],
    q: f64,
    weight: Option<&[f64]>,
) -> Result<f64> {
    if q.is_infinite() || q.is_nan() || q < 1.0 {
        return Err(invalid(format!("q = {q} must be finite and >= 1")));
    }
    if times.len() < 2 || times.len() != slice_norms.len() {
        return Err(invalid("mixed norm needs at least two time slices"));
    }
    if let Some(w) = weight {
        if w.len() != times.len() || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("time weight must be nonnegative and sampled at every slice time"));
        }
    }
    let dt = trapezoid_weights(times);
    let peak = slice_norms.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = slice_norms
        .iter()
        .zip(&dt)
        .enumerate()
        .map(|(i, (nrm, dti))| {
            let w = weight.map_or(1.0, |w| w[i]);
            w * dti * (nrm / peak).powf(q)
        })
        .sum();
    Ok(peak * sum.powf(1.0 / q))
}
