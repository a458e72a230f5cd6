//! Simulation and statistical analysis of polarization-entangled photon pairs
//! from a frequency-multiplexed Sagnac-loop source.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation on owned values: state construction, Jones-calculus
//! analyzers, fringe models and fitting, tomographic reconstruction and a
//! seeded pulse-train coincidence engine. File formats, configuration and the
//! command-line front end live in the `sagnac` crate.
//!
//! Basis ordering is fixed crate-wide: `H = 0`, `V = 1`, and the first photon
//! is the most significant bit of a basis index. Photons are ordered
//! `(s1, i1, s2, i2, ...)`.

#![no_std]
// when a dependency links std, its inherent float methods shadow `Float`
#![allow(unused_imports)]

extern crate alloc;

pub mod error;
pub mod fringes;
pub mod linalg;
pub mod optics;
pub mod qstate;
pub mod rng;
pub mod simulator;
pub mod tomography;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
pub use optics::{Projector, WaveplateSetting};
pub use qstate::{DensityMatrix, SourceParams, StateVector};
