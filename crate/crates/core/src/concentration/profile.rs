//! Rank-one profile extraction and the iterated decomposition.

use serde::Serialize;

use super::detect::{detect_bubble, Bubble, SearchParams};
use crate::error::{invalid, Result};
use crate::field::{inner_product, ComplexField};
use crate::phase_space::Window;
use crate::potential::Potential;
use crate::propagator::{evolve, EvolveParams};

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    /// `φ = (⟨h, ψ⟩/‖ψ‖²) ψ` with `h = S_λ^{-1}π(z)^{-1}U(t₀, 0)f`.
    pub profile: ComplexField,
    /// `g = U(0, t₀)π(z)S_λφ`, the part of `f` carried by the bubble.
    pub g: ComplexField,
    pub remainder: ComplexField,
    /// `‖f‖² − ‖f − g‖² − ‖g‖²`.
    pub decoupling_residual: f64,
}

/// Projects `U(t₀, 0)f` onto the detected packet and pulls the projection
/// back to time 0. The projection is orthogonal, so the masses of `g` and
/// `f − g` add up to that of `f` up to roundoff.
pub fn extract_profile(
    p: &dyn Potential,
    f: &ComplexField,
    bubble: &Bubble,
    params: &EvolveParams,
) -> Result<Extraction> {
    let grid = *f.grid();
    let window = Window::scaled(bubble.lambda)?;
    if bubble.abs_correlation == 0.0 {
        return Ok(Extraction {
            profile: ComplexField::zeros(grid),
            g: ComplexField::zeros(grid),
            remainder: f.clone(),
            decoupling_residual: 0.0,
        });
    }
    let packet = window.packet(grid, bubble.z());
    let ut = evolve(p, f, 0.0, bubble.t0, params)?;
    let c = inner_product(&ut, &packet)? / packet.mass();
    // S_λ^{-1}π(z)^{-1} maps the sampled packet to the sampled window, so the
    // profile is the same multiple of ψ.
    let profile = Window::default().generator(grid).scaled(c);
    let g = evolve(p, &packet.scaled(c), bubble.t0, 0.0, params)?;
    let remainder = f.sub(&g)?;
    let decoupling_residual = f.mass() - remainder.mass() - g.mass();
    Ok(Extraction { profile, g, remainder, decoupling_residual })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileDecomposition {
    pub bubbles: Vec<Bubble>,
    #[serde(skip)]
    pub profiles: Vec<ComplexField>,
    /// `‖g_j‖²`.
    pub bubble_masses: Vec<f64>,
    /// `‖r_j‖²` after each extraction.
    pub remainders_mass: Vec<f64>,
    pub decoupling_residuals: Vec<f64>,
    pub total_mass: f64,
    /// `(‖f‖² − Σ‖g_j‖² − ‖r_final‖²) / ‖f‖²`.
    pub ledger_residual: f64,
    #[serde(skip)]
    pub remainder: ComplexField,
}

/// Detects and extracts bubbles from successive remainders until the
/// correlation drops below `stop_threshold` or `max_bubbles` are taken.
pub fn iterate_decomposition(
    p: &dyn Potential,
    f: &ComplexField,
    max_bubbles: usize,
    stop_threshold: f64,
    search: &SearchParams,
) -> Result<ProfileDecomposition> {
    if max_bubbles == 0 {
        return Err(invalid("max_bubbles must be at least 1"));
    }
    let total_mass = f.mass();
    let mut out = ProfileDecomposition {
        bubbles: Vec::new(),
        profiles: Vec::new(),
        bubble_masses: Vec::new(),
        remainders_mass: Vec::new(),
        decoupling_residuals: Vec::new(),
        total_mass,
        ledger_residual: 0.0,
        remainder: f.clone(),
    };
    while out.bubbles.len() < max_bubbles {
        let bubble = detect_bubble(p, &out.remainder, search)?;
        if bubble.abs_correlation < stop_threshold || bubble.abs_correlation == 0.0 {
            break;
        }
        let ex = extract_profile(p, &out.remainder, &bubble, &search.evolve)?;
        out.bubble_masses.push(ex.g.mass());
        out.remainders_mass.push(ex.remainder.mass());
        out.decoupling_residuals.push(ex.decoupling_residual);
        out.profiles.push(ex.profile);
        out.bubbles.push(bubble);
        out.remainder = ex.remainder;
    }
    let captured: f64 = out.bubble_masses.iter().sum();
    out.ledger_residual = if total_mass > 0.0 {
        (total_mass - captured - out.remainder.mass()) / total_mass
    } else {
        0.0
    };
    Ok(out)
}

impl ProfileDecomposition {
    /// Rows of `index,lambda,t0,x0,xi0,abs,bubble_mass,remainder_mass,decoupling_residual`.
    pub fn write_ledger_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,lambda,t0,x0,xi0,abs,bubble_mass,remainder_mass,decoupling_residual")?;
        for (k, b) in self.bubbles.iter().enumerate() {
            writeln!(
                w,
                "{k},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                b.lambda,
                b.t0,
                b.x0,
                b.xi0,
                b.abs_correlation,
                self.bubble_masses[k],
                self.remainders_mass[k],
                self.decoupling_residuals[k]
            )?;
        }
        Ok(())
    }

    pub fn captured_mass(&self) -> f64 {
        self.bubble_masses.iter().sum()
    }
}
