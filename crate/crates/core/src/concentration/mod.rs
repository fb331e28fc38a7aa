//! Inverse-HLS interval location, concentration-bubble detection, profile
//! extraction with exact mass decoupling, and the four-wavepacket kernel.

mod detect;
mod hls;
mod kernel;
mod profile;

pub use detect::{correlation, detect_bubble, epsilon_l6, Bubble, DetectionReport, SearchParams};
pub use hls::{
    inverse_hls_scan, locate_interval, HlsParams, IntervalCandidate, IntervalReport, ScanMode,
};
pub use kernel::{
    eta, kernel_decay_probe, kernel_integral, kernel_k, DecayFamily, KernelParams, KernelProbeReport, ProbeRow,
};
pub use profile::{extract_profile, iterate_decomposition, Extraction, ProfileDecomposition};

/// The exponent `q₀ = (7 + √33)/2`.
pub const Q0: f64 = 6.372_281_323_269_014_5;
/// The exponent `r₀ = (5 + √33)/2`.
pub const R0: f64 = 5.372_281_323_269_014_5;

/// Whether `(q, r)` is a Strichartz pair in one dimension, `2/q + 1/r = 1/2`.
pub fn is_admissible(q: f64, r: f64) -> bool {
    q >= 4.0 && (2.0 / q + 1.0 / r - 0.5).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_pair() {
        let s = 33f64.sqrt();
        assert!((Q0 - (7.0 + s) / 2.0).abs() < 1e-15);
        assert!((R0 - (5.0 + s) / 2.0).abs() < 1e-15);
        assert!((Q0 - 6.37228).abs() < 1e-5 && (R0 - 5.37228).abs() < 1e-5);
        assert!(is_admissible(8.0, 4.0) && is_admissible(6.0, 6.0));
        assert!(!is_admissible(8.0, 8.0 / 3.0));
    }
}
