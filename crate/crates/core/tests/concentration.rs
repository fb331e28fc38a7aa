use std::f64::consts::PI;

use wpk::concentration::{detect_bubble, extract_profile, locate_interval, HlsParams, SearchParams, Q0, R0, is_admissible};
use wpk::phase_space::{dilate, translate_modulate, Window};
use wpk::{Builtin, Complex64, ComplexField, Grid1D, PhasePoint};

fn grid() -> Grid1D {
    Grid1D::from_box(2048, -20.0, 20.0).unwrap()
}

fn gaussian(grid: Grid1D) -> ComplexField {
    ComplexField::from_fn(grid, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0)).unwrap()
}

fn search() -> SearchParams {
    let mut s = SearchParams::new(&grid(), 0.5);
    s.t_stride = 0.5 / 16.0;
    s
}

/// A chirped, off-centre bump whose best packet is not on the coarse grid.
fn sample() -> ComplexField {
    let g = grid();
    let f = ComplexField::from_fn(g, |x| {
        let y = x - 0.7;
        Complex64::from_polar((-0.8 * y * y).exp(), 0.3 * y * y + 1.1 * y)
    })
    .unwrap();
    f.scaled(Complex64::new(f.norm().recip(), 0.0))
}

#[test]
fn detection_follows_phase_space_translations() {
    let s = search();
    let f = sample();
    let a = detect_bubble(&Builtin::Zero, &f, &s).unwrap();
    let shift = PhasePoint::new(2.0, -1.5);
    let b = detect_bubble(&Builtin::Zero, &translate_modulate(shift, &f), &s).unwrap();
    // The argmax moves with the data along the free flow from t₀.
    assert!((b.t0 - a.t0).abs() < 1e-3, "{a:?} {b:?}");
    let moved = PhasePoint::new(a.x0 + shift.x + a.t0 * shift.xi, a.xi0 + shift.xi);
    assert!((b.x0 - moved.x).abs() < 2e-2 && (b.xi0 - moved.xi).abs() < 2e-2, "{a:?} {b:?}");
    assert!((b.abs_correlation - a.abs_correlation).abs() < 1e-6);
}

#[test]
fn detection_follows_dilations() {
    let mut s = search();
    s.t_stride = 0.5 / 32.0;
    let f = Window::scaled(0.5).unwrap().packet(grid(), PhasePoint::new(1.0, 2.0));
    let a = detect_bubble(&Builtin::Zero, &f, &s).unwrap();
    let mu = 0.5;
    let b = detect_bubble(&Builtin::Zero, &dilate(mu, &f).unwrap(), &s).unwrap();
    assert!((b.lambda / (mu * a.lambda) - 1.0).abs() < 0.02, "{a:?} {b:?}");
    assert!((b.x0 - mu * a.x0).abs() < 0.02 && (b.xi0 - a.xi0 / mu).abs() < 0.05, "{a:?} {b:?}");
}

#[test]
fn backward_plant_under_the_oscillator() {
    let g = grid();
    let packet = Window::scaled(0.5).unwrap().packet(g, PhasePoint::new(1.0, -2.0));
    let p = Builtin::harmonic(1.0);
    let s = search();
    let f = wpk::propagator::evolve(&p, &packet, 0.3, 0.0, &s.evolve).unwrap();
    let b = detect_bubble(&p, &f, &s).unwrap();
    assert!((b.t0 - 0.3).abs() <= s.t_stride, "{b:?}");
    assert!(b.abs_correlation >= 0.95 / (2.0 * PI));
}

#[test]
fn unit_gaussian_respects_cauchy_schwarz() {
    for p in Builtin::all() {
        let b = detect_bubble(&p, &gaussian(grid()), &search()).unwrap();
        assert!(b.abs_correlation <= (2.0 * PI).powf(-0.5) + 1e-12);
    }
}

#[test]
fn profile_norm_matches_correlation() {
    let f = sample();
    let b = detect_bubble(&Builtin::SoftBranch, &f, &search()).unwrap();
    let ex = extract_profile(&Builtin::SoftBranch, &f, &b, &search().evolve).unwrap();
    assert!((ex.profile.norm() - b.abs_correlation * (2.0 * PI).sqrt()).abs() < 1e-8);
    assert!(ex.decoupling_residual.abs() <= 1e-10);
}

#[test]
fn hls_interval_for_the_free_gaussian() {
    let g = Grid1D::from_box(4096, -40.0, 40.0).unwrap();
    let f = gaussian(g);
    for (q, r) in [(8.0, 8.0 / 3.0), (8.0, 4.0), (Q0, R0)] {
        let rep = locate_interval(&Builtin::Zero, &f, q, r, &HlsParams::default()).unwrap();
        let (a, b) = rep.interval.bounds();
        assert!(a <= 0.0 && b >= 0.0, "{rep:?}");
        assert!(rep.ratio >= 1.0, "{rep:?}");
        // Even data evolve symmetrically in time.
        assert!((a + b).abs() <= 1e-3 + 1e-9, "{rep:?}");
        assert_eq!(rep.admissible, is_admissible(q, r));
    }
}
