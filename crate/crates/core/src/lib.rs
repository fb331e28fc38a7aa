//! Numerical toolkit for one-dimensional Schrödinger evolutions
//! `i ∂_t u = (-½ ∂²_x + V(t, x)) u` with subquadratic potentials.
//!
//! The crate covers:
//!
//! * sampled wavefunctions on periodic grids with `L^p` and mixed
//!   spacetime norms ([`field`]),
//! * an admissible family of potentials with hypothesis checks ([`potential`]),
//! * bicharacteristic flows and trajectory estimates ([`flow`]),
//! * split-step spectral propagation with dispersive and Strichartz probes
//!   ([`propagator`]),
//! * the wavepacket transform, phase-space symmetries, Galilean covariance
//!   and the lens transform ([`phase_space`]),
//! * interval location, concentration-bubble detection, profile extraction
//!   and the four-wavepacket interaction kernel ([`concentration`]).

pub mod concentration;
pub mod error;
pub mod field;
pub mod flow;
pub mod phase_space;
pub mod potential;
pub mod propagator;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use field::{ComplexField, Grid1D, SpacetimeField};
pub use flow::PhasePoint;
pub use num_complex::Complex64;
pub use potential::{Builtin, Potential};
