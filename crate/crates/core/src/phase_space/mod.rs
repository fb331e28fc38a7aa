//! Wavepacket (Gabor) transform, phase-space symmetries, Galilean
//! covariance and the lens transform.
//!
//! Conventions: `ψ_z(y) = e^{i(y−x₀)ξ₀} w(y − x₀)` for a real even window `w`,
//! and `Tf(z) = ⟨f, ψ_z⟩`. With `‖w‖₂² = 1/(2π)` the transform is an isometry
//! onto `L²(dx₀ dξ₀)` and `f = ∫ Tf(z) ψ_z dz`.

mod galilei;
mod lens;
mod symmetry;

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{ComplexField, Grid1D};
use crate::flow::PhasePoint;
use crate::spectral::Fourier;

pub use galilei::{
    galilean_covariance_residual, recentered_potential, wavepacket_tail_sup, CovarianceParams,
    RecenteredPotential,
};
pub use lens::{lens_pde_residual, lens_transform};
pub use symmetry::{dilate, translate_modulate, translate_modulate_inverse, DILATION_RANGE};

/// `‖ψ‖₂² = 1/(2π)`.
pub const WINDOW_MASS: f64 = 1.0 / (2.0 * PI);

/// Half-width, in units of the window scale, beyond which the window is
/// treated as zero (`e^{-50}` relative to the peak).
const SUPPORT: f64 = 10.0;

/// The fixed window `ψ(x) = (2π)^{-1/2} π^{-1/4} e^{-x²/2}`.
pub fn psi(x: f64) -> f64 {
    (2.0 * PI).sqrt().recip() * PI.powf(-0.25) * (-0.5 * x * x).exp()
}

/// The window `S_λψ(y) = λ^{-1/2} ψ(y/λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lambda: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

impl Window {
    pub fn scaled(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("window scale {lambda} must be positive")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.lambda.sqrt().recip() * psi(y / self.lambda)
    }

    pub fn half_support(&self) -> f64 {
        SUPPORT * self.lambda
    }

    /// The window sampled on `grid`, centred at 0.
    pub fn generator(&self, grid: Grid1D) -> ComplexField {
        self.packet(grid, PhasePoint::default())
    }

    /// `ψ_z = π(z) S_λψ` sampled directly from the closed form.
    pub fn packet(&self, grid: Grid1D, z: PhasePoint) -> ComplexField {
        let values = grid
            .points()
            .map(|x| Complex64::from_polar(self.eval(x - z.x), (x - z.x) * z.xi))
            .collect();
        ComplexField::from_parts(grid, values)
    }
}

/// A uniform grid of phase-space centres `(x₀, ξ₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_start: f64,
    pub dx0: f64,
    pub nx: usize,
    pub xi_start: f64,
    pub dxi: f64,
    pub nxi: usize,
}

impl PhaseGrid {
    pub fn new(x_start: f64, dx0: f64, nx: usize, xi_start: f64, dxi: f64, nxi: usize) -> Result<Self> {
        let finite = [x_start, dx0, xi_start, dxi].iter().all(|v| v.is_finite());
        if !finite || !(dx0 > 0.0 && dxi > 0.0) || nx == 0 || nxi == 0 {
            return Err(Error::InvalidGrid(format!(
                "phase grid needs positive spacings and nonempty axes (dx0={dx0}, dxi={dxi}, nx={nx}, nxi={nxi})"
            )));
        }
        Ok(Self { x_start, dx0, nx, xi_start, dxi, nxi })
    }

    /// Full-band grid for a window of scale `lambda` on `grid`: `x₀` at
    /// spacing `λ/4` over `[x_lo, x_hi]` (snapped to multiples of the spacing),
    /// and `ξ₀` covering the whole band `[−π/dx, π/dx)` at the largest
    /// spacing `2π/(M dx)`, `M` a power of two, below `max_dxi`.
    pub fn full_band(grid: &Grid1D, lambda: f64, x_range: (f64, f64), max_dxi: f64) -> Result<Self> {
        let dx0 = lambda / 4.0;
        let window = Window::scaled(lambda)?;
        let support = (2.0 * window.half_support() / grid.dx()).floor() as usize + 1;
        let mut m = support.next_power_of_two().max(8);
        while 2.0 * PI / (m as f64 * grid.dx()) > max_dxi {
            m *= 2;
        }
        let dxi = 2.0 * PI / (m as f64 * grid.dx());
        let i_lo = (x_range.0 / dx0).floor() as i64;
        let i_hi = (x_range.1 / dx0).ceil() as i64;
        let nx = (i_hi - i_lo + 1).max(1) as usize;
        Self::new(i_lo as f64 * dx0, dx0, nx, -((m / 2) as f64) * dxi, dxi, m)
    }

    /// [`full_band`](Self::full_band) over the whole box at the analysis
    /// resolution limit `Δξ ≤ π/(5λ)`.
    pub fn covering(grid: &Grid1D, lambda: f64) -> Result<Self> {
        Self::full_band(grid, lambda, (grid.x_min(), grid.x_max() - lambda / 4.0), PI / (5.0 * lambda))
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_start + i as f64 * self.dx0
    }

    pub fn xi_center(&self, j: usize) -> f64 {
        self.xi_start + j as f64 * self.dxi
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn xi_centers(&self) -> Vec<f64> {
        (0..self.nxi).map(|j| self.xi_center(j)).collect()
    }

    /// `dΛ = Δx₀ Δξ₀`.
    pub fn cell_area(&self) -> f64 {
        self.dx0 * self.dxi
    }

    pub fn len(&self) -> usize {
        self.nx * self.nxi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Transform values `Tf(x₀, ξ₀)` stored row-major (one row per `x₀`).
#[derive(Clone, Debug, PartialEq)]
pub struct WavepacketCoefs {
    pub grid: PhaseGrid,
    pub values: Vec<Complex64>,
}

impl WavepacketCoefs {
    pub fn new(grid: PhaseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("{} coefficients for a {}×{} grid", values.len(), grid.nx, grid.nxi)));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.nxi + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.grid.nxi..(i + 1) * self.grid.nxi]
    }

    /// `Σ |Tf|² dΛ`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// Index `(i, j)` of the largest modulus; ties go to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0.0f64);
        for (k, v) in self.values.iter().enumerate() {
            let a = v.norm_sqr();
            if a > best.1 {
                best = (k, a);
            }
        }
        (best.0 / self.grid.nxi, best.0 % self.grid.nxi)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Rows of `x0,xi0,re,im,abs` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x0,xi0,re,im,abs")?;
        for i in 0..self.grid.nx {
            let x0 = self.grid.x_center(i);
            for (j, v) in self.row(i).iter().enumerate() {
                writeln!(w, "{x0:e},{:e},{:e},{:e},{:e}", self.grid.xi_center(j), v.re, v.im, v.norm())?;
            }
        }
        Ok(())
    }

    /// Binary layout: `WPK2`, then little-endian `u64 nx, u64 nxi, f64 x_start,
    /// f64 dx0, f64 xi_start, f64 dxi` and `nx·nxi` interleaved `(re, im)` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        w.write_all(MAGIC2)?;
        w.write_all(&(g.nx as u64).to_le_bytes())?;
        w.write_all(&(g.nxi as u64).to_le_bytes())?;
        for v in [g.x_start, g.dx0, g.xi_start, g.dxi] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 52];
        r.read_exact(&mut head).map_err(|_| Error::Header("file shorter than the WPK2 header".into()))?;
        if &head[..4] != MAGIC2 {
            return Err(Error::Header(format!("bad magic {:?}", &head[..4])));
        }
        let u = |k: usize| u64::from_le_bytes(head[k..k + 8].try_into().expect("8 bytes"));
        let f = |k: usize| f64::from_le_bytes(head[k..k + 8].try_into().expect("8 bytes"));
        let grid = PhaseGrid::new(f(20), f(28), u(4) as usize, f(36), f(44), u(12) as usize)
            .map_err(|e| Error::Header(e.to_string()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected = 16 * grid.len();
        if payload.len() != expected {
            return Err(Error::Truncated { expected, found: payload.len() });
        }
        let mut values = Vec::with_capacity(grid.len());
        for (k, c) in payload.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::NonFinite(k));
            }
            values.push(Complex64::new(re, im));
        }
        Ok(Self { grid, values })
    }
}

pub const MAGIC2: &[u8; 4] = b"WPK2";

/// Sample range `j_lo..=j_hi` (unwrapped) where the window centred at `x0` is non-negligible.
fn support(grid: &Grid1D, window: &Window, x0: f64) -> (i64, usize) {
    let h = window.half_support();
    let j_lo = ((x0 - h - grid.x_min()) / grid.dx()).ceil() as i64;
    let j_hi = ((x0 + h - grid.x_min()) / grid.dx()).floor() as i64;
    (j_lo, (j_hi - j_lo + 1).max(0) as usize)
}

/// FFT length usable for the fast path, if the frequency spacing matches one.
fn fft_length(grid: &Grid1D, pg: &PhaseGrid, support_len: usize) -> Option<usize> {
    let m = 2.0 * PI / (pg.dxi * grid.dx());
    let mr = m.round();
    let m_int = mr as usize;
    ((m - mr).abs() <= 1e-9 * mr && m_int.is_power_of_two() && m_int >= support_len && pg.nxi <= m_int)
        .then_some(m_int)
}

fn check_resolution(window: &Window, pg: &PhaseGrid) -> Result<()> {
    let lambda = window.lambda();
    let tol = 1.0 + 1e-12;
    if pg.dxi > PI / (5.0 * lambda) * tol || pg.dx0 > lambda / 4.0 * tol {
        return Err(Error::Underresolved(format!(
            "phase grid (dx0 = {}, dxi = {}) is coarser than (λ/4, π/(5λ)) for λ = {lambda}",
            pg.dx0, pg.dxi
        )));
    }
    Ok(())
}

/// `Tf(z) = ⟨f, ψ_z⟩` on every point of `pg`.
pub fn analyze(f: &ComplexField, window: &Window, pg: &PhaseGrid) -> Result<WavepacketCoefs> {
    check_resolution(window, pg)?;
    Ok(analyze_unchecked(f, window, pg))
}

/// [`analyze`] without the sampling-density precondition, for searches that
/// trade exact isometry for speed.
pub fn analyze_unchecked(f: &ComplexField, window: &Window, pg: &PhaseGrid) -> WavepacketCoefs {
    analyze_impl(f, window, pg, true)
}

fn analyze_impl(f: &ComplexField, window: &Window, pg: &PhaseGrid, allow_fft: bool) -> WavepacketCoefs {
    let grid = *f.grid();
    let (_, max_len) = support(&grid, window, 0.0);
    let fft_len = fft_length(&grid, pg, max_len + 1).filter(|_| allow_fft);
    let rows: Vec<Vec<Complex64>> = (0..pg.nx)
        .into_par_iter()
        .map_init(
            || fft_len.map(Fourier::new),
            |fourier, i| analyze_row(f, window, pg, pg.x_center(i), fourier.as_mut(), fft_len),
        )
        .collect();
    WavepacketCoefs { grid: *pg, values: rows.concat() }
}

fn analyze_row(
    f: &ComplexField,
    window: &Window,
    pg: &PhaseGrid,
    x0: f64,
    fourier: Option<&mut Fourier>,
    fft_len: Option<usize>,
) -> Vec<Complex64> {
    let grid = f.grid();
    let n = grid.n() as i64;
    let dx = grid.dx();
    let (j_lo, len) = support(grid, window, x0);
    let y0 = grid.x_min() + j_lo as f64 * dx;
    let vals = f.values();
    let weighted: Vec<Complex64> = (0..len)
        .map(|l| {
            let j = (j_lo + l as i64).rem_euclid(n) as usize;
            vals[j] * window.eval(y0 + l as f64 * dx - x0)
        })
        .collect();
    let mut row = vec![Complex64::new(0.0, 0.0); pg.nxi];
    match (fourier, fft_len) {
        (Some(fourier), Some(m)) => {
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for (l, (b, a)) in buf.iter_mut().zip(&weighted).enumerate() {
                *b = a * Complex64::from_polar(1.0, -(l as f64) * dx * pg.xi_start);
            }
            fourier.forward(&mut buf);
            for (c, r) in row.iter_mut().enumerate() {
                let xi = pg.xi_center(c);
                *r = buf[c] * Complex64::from_polar(dx, -(y0 - x0) * xi);
            }
        }
        _ => {
            for (c, r) in row.iter_mut().enumerate() {
                let xi = pg.xi_center(c);
                let rot = Complex64::from_polar(1.0, -dx * xi);
                let mut ph = Complex64::from_polar(1.0, -(y0 - x0) * xi);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in &weighted {
                    acc += a * ph;
                    ph *= rot;
                }
                *r = acc * dx;
            }
        }
    }
    row
}

/// `Σ_z F(z) ψ_z dΛ`, the discretised adjoint of [`analyze`].
pub fn synthesize(coefs: &WavepacketCoefs, window: &Window, grid: Grid1D) -> ComplexField {
    synthesize_impl(coefs, window, grid, true)
}

fn synthesize_impl(coefs: &WavepacketCoefs, window: &Window, grid: Grid1D, allow_fft: bool) -> ComplexField {
    let pg = coefs.grid;
    let (_, max_len) = support(&grid, window, 0.0);
    let fft_len = fft_length(&grid, &pg, max_len + 1).filter(|_| allow_fft);
    let rows: Vec<(i64, Vec<Complex64>)> = (0..pg.nx)
        .into_par_iter()
        .map_init(
            || fft_len.map(Fourier::new),
            |fourier, i| synthesize_row(coefs, window, &grid, i, fourier.as_mut(), fft_len),
        )
        .collect();
    // Rows are accumulated in order so the result does not depend on scheduling.
    let n = grid.n() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n()];
    for (j_lo, contrib) in rows {
        for (l, c) in contrib.into_iter().enumerate() {
            out[(j_lo + l as i64).rem_euclid(n) as usize] += c;
        }
    }
    ComplexField::from_parts(grid, out)
}

fn synthesize_row(
    coefs: &WavepacketCoefs,
    window: &Window,
    grid: &Grid1D,
    i: usize,
    fourier: Option<&mut Fourier>,
    fft_len: Option<usize>,
) -> (i64, Vec<Complex64>) {
    let pg = &coefs.grid;
    let x0 = pg.x_center(i);
    let dx = grid.dx();
    let (j_lo, len) = support(grid, window, x0);
    let y0 = grid.x_min() + j_lo as f64 * dx;
    let row = coefs.row(i);
    let area = pg.cell_area();
    if row.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return (j_lo, vec![Complex64::new(0.0, 0.0); len]);
    }
    let mut sums = vec![Complex64::new(0.0, 0.0); len];
    match (fourier, fft_len) {
        (Some(fourier), Some(m)) => {
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for (c, (b, v)) in buf.iter_mut().zip(row).enumerate() {
                *b = v * Complex64::from_polar(1.0, (y0 - x0) * pg.xi_center(c));
            }
            fourier.inverse(&mut buf);
            for (l, s) in sums.iter_mut().enumerate() {
                *s = buf[l] * Complex64::from_polar(1.0, l as f64 * dx * pg.xi_start);
            }
        }
        _ => {
            for (c, v) in row.iter().enumerate() {
                let xi = pg.xi_center(c);
                let rot = Complex64::from_polar(1.0, dx * xi);
                let mut ph = v * Complex64::from_polar(1.0, (y0 - x0) * xi);
                for s in sums.iter_mut() {
                    *s += ph;
                    ph *= rot;
                }
            }
        }
    }
    for (l, s) in sums.iter_mut().enumerate() {
        *s *= area * window.eval(y0 + l as f64 * dx - x0);
    }
    (j_lo, sums)
}
