//! The four-wavepacket interaction kernel
//! `K = |∫∫ u₁u₂ conj(u₃u₄) η(t) dx dt|`, `u_j = U(t, 0)ψ_{z_j}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{raw_inner, Grid1D};
use crate::flow::{step_count, PhasePoint};
use crate::phase_space::Window;
use crate::potential::Potential;
use crate::propagator::Stepper;
use crate::stats::fit_power_law;

/// The bump `η(t) = exp(1 − 1/(1 − (t/δ₀)²))` on `|t| < δ₀`, zero outside.
pub fn eta(t: f64, delta0: f64) -> f64 {
    let s = t / delta0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub grid: Grid1D,
    pub dt: f64,
    pub delta0: f64,
}

fn spacetime_sum(p: &dyn Potential, packets: &[crate::field::ComplexField; 4], h: f64, n: usize, delta0: f64) -> Complex64 {
    let mut steppers: Vec<Stepper> = packets.iter().map(|f| Stepper::new(p, f, 0.0, h)).collect();
    let dx = packets[0].grid().dx();
    let mut total = Complex64::new(0.0, 0.0);
    let mut product = vec![Complex64::new(0.0, 0.0); packets[0].grid().n()];
    let mut conj_product = product.clone();
    // k = 0 is counted by the forward sweep only.
    let first = if h > 0.0 { 0 } else { 1 };
    for k in 0..=n {
        if k > 0 {
            steppers.iter_mut().for_each(|s| s.step());
        }
        if k < first {
            continue;
        }
        let t = k as f64 * h;
        let weight = eta(t, delta0) * if k == n { 0.5 } else { 1.0 };
        if weight == 0.0 {
            continue;
        }
        let (a, b, c, d) = (steppers[0].values(), steppers[1].values(), steppers[2].values(), steppers[3].values());
        for i in 0..product.len() {
            product[i] = a[i] * b[i];
            conj_product[i] = c[i] * d[i];
        }
        total += raw_inner(&product, &conj_product) * (dx * weight);
    }
    total * h.abs()
}

/// `K(z₁, z₂, z₃, z₄)` with unit-scale packets, quadrature by the trapezoid
/// rule in time (step at most `dt`) and Riemann sums in space.
pub fn kernel_k(p: &dyn Potential, z: [PhasePoint; 4], params: &KernelParams) -> Result<f64> {
    Ok(kernel_integral(p, z, params)?.norm())
}

/// The spacetime integral whose modulus is [`kernel_k`].
pub fn kernel_integral(p: &dyn Potential, z: [PhasePoint; 4], params: &KernelParams) -> Result<Complex64> {
    let grid = params.grid;
    let max_xi = z.iter().map(|zj| zj.xi.abs()).fold(0.0, f64::max);
    if max_xi * grid.dx() > 0.5 {
        return Err(Error::Underresolved(format!(
            "momentum {max_xi} is not resolved at dx = {}",
            grid.dx()
        )));
    }
    if !(params.delta0 > 0.0 && params.delta0 <= 1.0) {
        return Err(invalid(format!("δ₀ = {} must lie in (0, 1]", params.delta0)));
    }
    if !(params.dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let window = Window::default();
    let packets = z.map(|zj| window.packet(grid, zj));
    let n = step_count(params.delta0, params.dt).max(1);
    let h = params.delta0 / n as f64;
    let forward = spacetime_sum(p, &packets, h, n, params.delta0);
    let backward = spacetime_sum(p, &packets, -h, n, params.delta0);
    Ok(forward + backward)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayFamily {
    /// `z₁ = base + (s, 0)`, the others at `base`.
    Spatial,
    /// `z₁ = z₂ = base + (0, m/4)`, `z₃ = z₄ = base − (0, m/4)`: momentum-sum mismatch `m`.
    MomentumSum,
    /// `z₁,₂ = base ± (0, a)`, `z₃,₄ = base ± (0, 1)`: energy mismatch `4|a² − 1|`.
    Energy,
}

impl DecayFamily {
    fn quadruple(self, base: PhasePoint, s: f64) -> [PhasePoint; 4] {
        let at = |dx: f64, dxi: f64| PhasePoint::new(base.x + dx, base.xi + dxi);
        match self {
            DecayFamily::Spatial => [at(s, 0.0), base, base, base],
            DecayFamily::MomentumSum => [at(0.0, s / 4.0), at(0.0, s / 4.0), at(0.0, -s / 4.0), at(0.0, -s / 4.0)],
            DecayFamily::Energy => [at(0.0, s), at(0.0, -s), at(0.0, 1.0), at(0.0, -1.0)],
        }
    }

    /// The mismatch the family is indexed by.
    fn mismatch(self, s: f64) -> f64 {
        match self {
            DecayFamily::Spatial | DecayFamily::MomentumSum => s.abs(),
            DecayFamily::Energy => 4.0 * (s * s - 1.0).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub family: DecayFamily,
    pub parameter: f64,
    pub mismatch: f64,
    pub k: f64,
    /// `K · (1 + mismatch)`.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Slope of `log K` against `log(1 + s)` along the spatial ray.
    pub spatial_exponent: f64,
    /// Slope of `log K` against `log m` for momentum-sum mismatches `m ≥ 4`.
    pub momentum_exponent: f64,
    /// Slope of `log K` against the log energy mismatch.
    pub energy_exponent: f64,
    /// `K·(1 + s)` never exceeds its value at `s = 0` along the spatial ray.
    pub crude_bound_holds: bool,
    /// `K` drops at least tenfold per doubling of the momentum-sum mismatch beyond 4.
    pub momentum_drop_holds: bool,
    pub energy_exponent_holds: bool,
}

/// Evaluates `K` along the three families (each list of parameters
/// increasing) and fits decay exponents.
pub fn kernel_decay_probe(
    p: &dyn Potential,
    base: PhasePoint,
    spatial: &[f64],
    momentum: &[f64],
    energy: &[f64],
    params: &KernelParams,
) -> Result<KernelProbeReport> {
    for list in [spatial, momentum, energy] {
        if list.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("separations must be increasing"));
        }
    }
    let jobs: Vec<(DecayFamily, f64)> = [
        (DecayFamily::Spatial, spatial),
        (DecayFamily::MomentumSum, momentum),
        (DecayFamily::Energy, energy),
    ]
    .iter()
    .flat_map(|(fam, list)| list.iter().map(move |s| (*fam, *s)))
    .collect();
    let rows: Vec<ProbeRow> = jobs
        .par_iter()
        .map(|&(family, s)| {
            let k = kernel_k(p, family.quadruple(base, s), params)?;
            let mismatch = family.mismatch(s);
            Ok(ProbeRow { family, parameter: s, mismatch, k, weighted: k * (1.0 + mismatch) })
        })
        .collect::<Result<_>>()?;
    let of = |fam: DecayFamily| rows.iter().filter(move |r| r.family == fam);

    let spatial_rows: Vec<&ProbeRow> = of(DecayFamily::Spatial).collect();
    let origin = spatial_rows.iter().find(|r| r.mismatch == 0.0).map(|r| r.weighted);
    let crude_bound_holds = match origin {
        Some(w0) => spatial_rows.iter().all(|r| r.weighted <= w0 * (1.0 + 1e-9)),
        None => spatial_rows.windows(2).all(|w| w[1].weighted <= w[0].weighted * (1.0 + 1e-9)),
    };
    let (sx, sy): (Vec<f64>, Vec<f64>) = spatial_rows.iter().map(|r| (1.0 + r.mismatch, r.k)).unzip();
    let spatial_exponent = fit_power_law(&sx, &sy).map_or(f64::NAN, |f| f.slope);

    let mom: Vec<&ProbeRow> = of(DecayFamily::MomentumSum).filter(|r| r.mismatch >= 4.0).collect();
    let momentum_drop_holds = mom.windows(2).all(|w| {
        let doublings = (w[1].mismatch / w[0].mismatch).log2();
        w[1].k <= w[0].k * 0.1f64.powf(doublings)
    });
    let (mx, my): (Vec<f64>, Vec<f64>) = mom.iter().map(|r| (r.mismatch, r.k)).unzip();
    let momentum_exponent = fit_power_law(&mx, &my).map_or(f64::NAN, |f| f.slope);

    let (ex, ey): (Vec<f64>, Vec<f64>) =
        of(DecayFamily::Energy).filter(|r| r.mismatch > 0.0).map(|r| (r.mismatch, r.k)).unzip();
    let energy_exponent = fit_power_law(&ex, &ey).map_or(f64::NAN, |f| f.slope);
    Ok(KernelProbeReport {
        rows,
        spatial_exponent,
        momentum_exponent,
        energy_exponent,
        crude_bound_holds,
        momentum_drop_holds,
        energy_exponent_holds: energy_exponent <= -2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Builtin;
    use std::f64::consts::PI;

    fn params() -> KernelParams {
        KernelParams { grid: Grid1D::from_box(1024, -20.0, 20.0).unwrap(), dt: 1e-3, delta0: 0.5 }
    }

    #[test]
    fn eta_is_a_bump() {
        assert_eq!(eta(0.0, 0.5), 1.0);
        assert_eq!(eta(0.5, 0.5), 0.0);
        assert_eq!(eta(-0.7, 0.5), 0.0);
        assert!(eta(0.49, 0.5) < 1e-10);
    }

    #[test]
    fn all_packets_at_origin() {
        let o = PhasePoint::default();
        let k = kernel_k(&Builtin::Zero, [o; 4], &params()).unwrap();
        // Composite Simpson on the closed-form spatial integral.
        let m = 20_000;
        let h = 1.0 / m as f64;
        let f = |t: f64| eta(t, 0.5) * (2.0 * PI).powi(-2) * PI.powf(-0.5) * 0.5f64.sqrt() / (1.0 + t * t).sqrt();
        let simpson: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(-0.5 + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((k - simpson).abs() < 1e-6 * simpson, "{k} vs {simpson}");
    }

    #[test]
    fn symmetries() {
        let z = [PhasePoint::new(0.5, 1.0), PhasePoint::new(-1.0, 0.0), PhasePoint::new(0.0, 2.0), PhasePoint::new(1.0, -1.0)];
        let p = Builtin::SoftBranch;
        let k = kernel_k(&p, z, &params()).unwrap();
        let k12 = kernel_k(&p, [z[1], z[0], z[2], z[3]], &params()).unwrap();
        let k34 = kernel_k(&p, [z[0], z[1], z[3], z[2]], &params()).unwrap();
        assert!((k - k12).abs() <= 1e-10 * k && (k - k34).abs() <= 1e-10 * k);
        let pairwise = kernel_integral(&p, [z[0], z[1], z[0], z[1]], &params()).unwrap();
        assert!(pairwise.re > 0.0 && pairwise.im.abs() <= 1e-12 * pairwise.re);
    }

    #[test]
    fn underresolved_momentum() {
        let z = [PhasePoint::new(0.0, 30.0), PhasePoint::default(), PhasePoint::default(), PhasePoint::default()];
        assert!(matches!(kernel_k(&Builtin::Zero, z, &params()), Err(Error::Underresolved(_))));
    }
}
