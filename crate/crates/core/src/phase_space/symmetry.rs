//! The phase-space translations `π(z)` and the `L²` dilations `S_λ`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::field::ComplexField;
use crate::flow::PhasePoint;
use crate::spectral::{fourier_shift, interpolate_uniform};

/// Admissible dilation factors; outside this range the grids used here
/// cannot resolve the result.
pub const DILATION_RANGE: (f64, f64) = (1.0 / 4096.0, 16.0);

/// `π(x₀, ξ₀) f(x) = e^{i(x−x₀)ξ₀} f(x − x₀)`, translating in Fourier space.
pub fn translate_modulate(z: PhasePoint, f: &ComplexField) -> ComplexField {
    let mut out = fourier_shift(f, z.x);
    if z.xi != 0.0 {
        let grid = *out.grid();
        for (v, x) in out.values_mut().iter_mut().zip(grid.points()) {
            *v *= Complex64::from_polar(1.0, (x - z.x) * z.xi);
        }
    }
    out
}

/// `π(z)^{-1} g(y) = e^{−iyξ₀} g(y + x₀)`.
pub fn translate_modulate_inverse(z: PhasePoint, g: &ComplexField) -> ComplexField {
    let mut demod = g.clone();
    if z.xi != 0.0 {
        let grid = *g.grid();
        for (v, x) in demod.values_mut().iter_mut().zip(grid.points()) {
            *v *= Complex64::from_polar(1.0, -(x - z.x) * z.xi);
        }
    }
    fourier_shift(&demod, -z.x)
}

/// `S_λ f(x) = λ^{-1/2} f(x/λ)` by band-limited resampling; zero where
/// `x/λ` leaves the box.
pub fn dilate(lambda: f64, f: &ComplexField) -> Result<ComplexField> {
    if !(lambda >= DILATION_RANGE.0 && lambda <= DILATION_RANGE.1) {
        return Err(invalid(format!(
            "dilation λ = {lambda} outside [{}, {}]",
            DILATION_RANGE.0, DILATION_RANGE.1
        )));
    }
    if lambda == 1.0 {
        return Ok(f.clone());
    }
    let grid = *f.grid();
    let mut values = interpolate_uniform(f, grid.x_min() / lambda, grid.dx() / lambda, grid.n(), true);
    let a = lambda.sqrt().recip();
    values.iter_mut().for_each(|v| *v *= a);
    ComplexField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid1D;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn gaussian() -> ComplexField {
        let g = Grid1D::from_box(1024, -20.0, 20.0).unwrap();
        ComplexField::from_fn(g, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0)).unwrap()
    }

    #[test]
    fn identity_cases() {
        let f = gaussian();
        assert!(translate_modulate(PhasePoint::default(), &f).distance(&f).unwrap() < 1e-15);
        assert_eq!(dilate(1.0, &f).unwrap(), f);
    }

    #[test]
    fn translate_round_trip() {
        let f = gaussian();
        let z = PhasePoint::new(3.0, 5.0);
        let g = translate_modulate(z, &f);
        assert!((g.norm() - f.norm()).abs() < 1e-13);
        assert!(translate_modulate_inverse(z, &g).distance(&f).unwrap() < 1e-12);
        // Matches the closed form.
        let exact = ComplexField::from_fn(*f.grid(), |x| {
            Complex64::from_polar(PI.powf(-0.25) * (-0.5 * (x - 3.0).powi(2)).exp(), (x - 3.0) * 5.0)
        })
        .unwrap();
        assert!(g.distance(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn dilation_of_gaussian() {
        let f = gaussian();
        let g = dilate(0.5, &f).unwrap();
        assert!((g.max_abs() - 2f64.sqrt() * PI.powf(-0.25)).abs() < 1e-12);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert!(dilate(32.0, &f).is_err());
        assert!(dilate(1e-4, &f).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn translations_are_unitary(x0 in -6.0f64..6.0, xi0 in -15.0f64..15.0) {
            let f = gaussian();
            let g = translate_modulate(PhasePoint::new(x0, xi0), &f);
            prop_assert!((g.norm() - f.norm()).abs() < 1e-12);
        }

        #[test]
        fn dilations_are_unitary(log_l in -2.0f64..1.5) {
            let f = gaussian();
            let g = dilate(2f64.powf(log_l), &f).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-10);
        }
    }
}
