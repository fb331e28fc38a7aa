//! Admissible subquadratic potentials `V(t, x)` and hypothesis checks.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats::fit_power_law;

/// A real potential with its first two spatial derivatives.
///
/// Implementations must be pure: evaluation is called concurrently from
/// parallel parameter sweeps.
pub trait Potential: Send + Sync + fmt::Debug {
    fn v(&self, t: f64, x: f64) -> f64;
    /// `∂_x V`.
    fn dv(&self, t: f64, x: f64) -> f64;
    /// `∂²_x V`.
    fn d2v(&self, t: f64, x: f64) -> f64;
    fn label(&self) -> String;
    /// Known bounds `(k, M_k)` on `sup |∂^k_x V|`, if any.
    fn declared_seminorms(&self) -> Option<Vec<(u32, f64)>> {
        None
    }
    fn is_time_independent(&self) -> bool;
    /// Whether `V(t, -x) = V(t, x)`.
    fn is_even(&self) -> bool {
        false
    }
}

/// The builtin family: `V = 0`, a constant field `E·x`, the harmonic
/// oscillator `ω²x²/2`, the soft branch `√(1+x²)` and a breathing trap
/// `ω(t)²x²/2` with `ω(t) = ω₀(1 + a sin t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum Builtin {
    Zero,
    Linear { e: f64 },
    Harmonic { omega: f64 },
    SoftBranch,
    Breathing { omega0: f64, a: f64 },
}

/// Looks up a builtin potential by label, reading parameters from `params`.
pub fn builtin(label: &str, params: &BTreeMap<String, f64>) -> Result<Builtin> {
    let get = |key: &str, default: f64| -> Result<f64> {
        let v = params.get(key).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("parameter `{key}` of `{label}` is not finite")))
        }
    };
    let known: &[&str] = match label {
        "zero" | "soft_branch" => &[],
        "linear" => &["e"],
        "harmonic" => &["omega"],
        "breathing" => &["omega0", "a"],
        other => return Err(Error::UnknownPotential(other.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(invalid(format!("`{label}` takes no parameter `{k}`")));
    }
    match label {
        "zero" => Ok(Builtin::Zero),
        "soft_branch" => Ok(Builtin::SoftBranch),
        "linear" => Ok(Builtin::Linear { e: get("e", 1.0)? }),
        "harmonic" => Ok(Builtin::Harmonic { omega: get("omega", 1.0)? }),
        _ => Builtin::breathing(get("omega0", 1.0)?, get("a", 0.5)?),
    }
}

impl Builtin {
    pub fn harmonic(omega: f64) -> Self {
        Builtin::Harmonic { omega }
    }

    pub fn breathing(omega0: f64, a: f64) -> Result<Self> {
        if !(omega0.is_finite() && a.is_finite()) {
            return Err(invalid("breathing parameters must be finite"));
        }
        // ω(t) must stay positive.
        if a.abs() > 0.5 {
            return Err(invalid(format!("breathing amplitude a = {a} exceeds 0.5")));
        }
        Ok(Builtin::Breathing { omega0, a })
    }

    /// One representative of each builtin label, as used by the verification suites.
    pub fn all() -> Vec<Builtin> {
        vec![
            Builtin::Zero,
            Builtin::Linear { e: 1.0 },
            Builtin::Harmonic { omega: 1.0 },
            Builtin::SoftBranch,
            Builtin::Breathing { omega0: 1.0, a: 0.5 },
        ]
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            Builtin::Linear { e } => {
                m.insert("e".into(), e);
            }
            Builtin::Harmonic { omega } => {
                m.insert("omega".into(), omega);
            }
            Builtin::Breathing { omega0, a } => {
                m.insert("omega0".into(), omega0);
                m.insert("a".into(), a);
            }
            Builtin::Zero | Builtin::SoftBranch => {}
        }
        m
    }

    fn breathing_omega2(omega0: f64, a: f64, t: f64) -> f64 {
        let w = omega0 * (1.0 + a * t.sin());
        w * w
    }
}

impl Potential for Builtin {
    fn v(&self, t: f64, x: f64) -> f64 {
        match *self {
            Builtin::Zero => 0.0,
            Builtin::Linear { e } => e * x,
            Builtin::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Builtin::SoftBranch => (1.0 + x * x).sqrt(),
            Builtin::Breathing { omega0, a } => 0.5 * Self::breathing_omega2(omega0, a, t) * x * x,
        }
    }

    fn dv(&self, t: f64, x: f64) -> f64 {
        match *self {
            Builtin::Zero => 0.0,
            Builtin::Linear { e } => e,
            Builtin::Harmonic { omega } => omega * omega * x,
            Builtin::SoftBranch => x / (1.0 + x * x).sqrt(),
            Builtin::Breathing { omega0, a } => Self::breathing_omega2(omega0, a, t) * x,
        }
    }

    fn d2v(&self, t: f64, x: f64) -> f64 {
        match *self {
            Builtin::Zero | Builtin::Linear { .. } => 0.0,
            Builtin::Harmonic { omega } => omega * omega,
            Builtin::SoftBranch => (1.0 + x * x).powf(-1.5),
            Builtin::Breathing { omega0, a } => Self::breathing_omega2(omega0, a, t),
        }
    }

    fn label(&self) -> String {
        match *self {
            Builtin::Zero => "zero".into(),
            Builtin::Linear { e } => format!("linear(e={e})"),
            Builtin::Harmonic { omega } => format!("harmonic(omega={omega})"),
            Builtin::SoftBranch => "soft_branch".into(),
            Builtin::Breathing { omega0, a } => format!("breathing(omega0={omega0},a={a})"),
        }
    }

    fn declared_seminorms(&self) -> Option<Vec<(u32, f64)>> {
        let m2 = match *self {
            Builtin::Zero | Builtin::Linear { .. } => 0.0,
            Builtin::Harmonic { omega } => omega * omega,
            Builtin::SoftBranch => 1.0,
            Builtin::Breathing { omega0, a } => (omega0 * (1.0 + a.abs())).powi(2),
        };
        // ∂³ of √(1+x²) is -3x(1+x²)^{-5/2}, maximal at x = ±1/2.
        let m3 = if matches!(self, Builtin::SoftBranch) { 0.858_650_354_529_988_4 } else { 0.0 };
        Some(vec![(2, m2), (3, m3)])
    }

    fn is_time_independent(&self) -> bool {
        !matches!(self, Builtin::Breathing { .. })
    }

    fn is_even(&self) -> bool {
        !matches!(self, Builtin::Linear { .. })
    }
}

/// Finite-difference step for derivatives of order `k` at `x`.
fn fd_step(x: f64) -> f64 {
    1e-2 * x.abs().max(1.0).sqrt()
}

fn binomial(k: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Central finite-difference estimate of `∂^k_x V(t, x)`.
pub fn fd_derivative(p: &dyn Potential, t: f64, x: f64, k: u32) -> Result<f64> {
    let h = fd_step(x);
    let hk = h.powi(k as i32);
    if k == 0 {
        return Ok(p.v(t, x));
    }
    if !(hk > 1e-250) || k > 40 {
        return Err(Error::StepUnderflow(k));
    }
    let half = k as f64 / 2.0;
    let sum: f64 = (0..=k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(k, j) * p.v(t, x + (half - j as f64) * h)
        })
        .sum();
    Ok(sum / hk)
}

/// Decay of `∂³_x V` against `⟨x⟩^{-1-ε}` on the tails of the sample box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    /// Fitted `ε ≥ 0`; 0 when no decay is detected. Infinite when `∂³_x V`
    /// vanishes on the box, since then any `ε` works.
    pub epsilon: f64,
    pub third_derivative_vanishes: bool,
    /// `R²` of the tail fit (1 when nothing was fitted).
    pub fit_r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubquadraticReport {
    /// `(k, sup |∂^k_x V|)` over the sample grid, `2 ≤ k ≤ k_max`.
    pub seminorms: Vec<(u32, f64)>,
    /// `sup |V|` over `|x| ≤ 1`.
    pub sup_v_unit_ball: f64,
    pub decay: DecayReport,
}

impl SubquadraticReport {
    pub fn m(&self, k: u32) -> Option<f64> {
        self.seminorms.iter().find(|(j, _)| *j == k).map(|(_, m)| *m)
    }
}

/// Sample counts used by [`verify_subquadratic`].
#[derive(Clone, Copy, Debug)]
pub struct SampleGrid {
    pub x_samples: usize,
    pub t_samples: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self { x_samples: 401, t_samples: 11 }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Estimates the seminorms `M_k` by nested central differences and fits the
/// tail decay of `∂³_x V`.
pub fn verify_subquadratic(
    p: &dyn Potential,
    x_box: (f64, f64),
    t_range: (f64, f64),
    k_max: u32,
) -> Result<SubquadraticReport> {
    verify_subquadratic_on(p, x_box, t_range, k_max, SampleGrid::default())
}

pub fn verify_subquadratic_on(
    p: &dyn Potential,
    x_box: (f64, f64),
    t_range: (f64, f64),
    k_max: u32,
    samples: SampleGrid,
) -> Result<SubquadraticReport> {
    if k_max < 2 {
        return Err(invalid(format!("k_max = {k_max} must be at least 2")));
    }
    if !(x_box.0.is_finite() && x_box.1.is_finite() && x_box.0 < x_box.1) {
        return Err(invalid("sample box must be finite and nonempty"));
    }
    let xs = linspace(x_box.0, x_box.1, samples.x_samples.max(2));
    let ts = if p.is_time_independent() {
        vec![t_range.0]
    } else {
        linspace(t_range.0, t_range.1, samples.t_samples.max(1))
    };

    let mut seminorms = Vec::new();
    for k in 2..=k_max.max(3) {
        let mut sup = 0.0f64;
        for &t in &ts {
            for &x in &xs {
                sup = sup.max(fd_derivative(p, t, x, k)?.abs());
            }
        }
        if k <= k_max {
            seminorms.push((k, sup));
        }
    }

    let unit: Vec<f64> = linspace(-1.0, 1.0, 201);
    let sup_v_unit_ball = ts
        .iter()
        .flat_map(|&t| unit.iter().map(move |&x| p.v(t, x).abs()))
        .fold(0.0, f64::max);

    // Tail profile of ∂³V, maximised over the time samples.
    let d3: Vec<f64> = xs
        .iter()
        .map(|&x| {
            ts.iter()
                .map(|&t| fd_derivative(p, t, x, 3).map(f64::abs))
                .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
        })
        .collect::<Result<_>>()?;
    let m2 = seminorms.first().map_or(0.0, |(_, m)| *m);
    let d3_sup = d3.iter().copied().fold(0.0, f64::max);
    let decay = if d3_sup <= 1e-6 * m2.max(1.0) {
        DecayReport { epsilon: f64::INFINITY, third_derivative_vanishes: true, fit_r_squared: 1.0 }
    } else {
        let reach = x_box.0.abs().max(x_box.1.abs());
        let tail_start = (0.1 * reach).max(2.0);
        let floor = 1e-9 * d3_sup;
        let (jx, jy): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&d3)
            .filter(|(x, d)| x.abs() >= tail_start && **d > floor)
            .map(|(x, d)| ((1.0 + x * x).sqrt(), *d))
            .unzip();
        match fit_power_law(&jx, &jy) {
            Some(fit) => DecayReport {
                epsilon: (-fit.slope - 1.0).max(0.0),
                third_derivative_vanishes: false,
                fit_r_squared: fit.r_squared,
            },
            None => DecayReport { epsilon: 0.0, third_derivative_vanishes: false, fit_r_squared: 0.0 },
        }
    };
    Ok(SubquadraticReport { seminorms, sup_v_unit_ball, decay })
}

/// `M₂` estimated on the box `[-50, 50]` over `t_range`.
pub fn estimate_m2(p: &dyn Potential, t_range: (f64, f64)) -> Result<f64> {
    let report = verify_subquadratic_on(
        p,
        (-50.0, 50.0),
        t_range,
        2,
        SampleGrid { x_samples: 1001, t_samples: 41 },
    )?;
    Ok(report.m(2).unwrap_or(0.0))
}

/// Largest relative mismatch between the analytic derivatives `dv`, `d2v`
/// and five-point finite differences of `v` (resp. `dv`) on the given samples.
pub fn derivative_consistency(
    p: &dyn Potential,
    x_range: (f64, f64),
    t_range: (f64, f64),
    x_samples: usize,
    t_samples: usize,
) -> f64 {
    let h = 1e-3;
    let five = |f: &dyn Fn(f64) -> f64, x: f64| {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    };
    let mut worst = 0.0f64;
    for &t in &linspace(t_range.0, t_range.1, t_samples) {
        for &x in &linspace(x_range.0, x_range.1, x_samples) {
            let d1 = five(&|y| p.v(t, y), x);
            let d2 = five(&|y| p.dv(t, y), x);
            let e1 = (d1 - p.dv(t, x)).abs() / p.dv(t, x).abs().max(1e-6);
            let e2 = (d2 - p.d2v(t, x)).abs() / p.d2v(t, x).abs().max(1e-6);
            worst = worst.max(e1).max(e2);
        }
    }
    worst
}
