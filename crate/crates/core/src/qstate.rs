//! Multi-photon polarization states and density matrices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, TAU};
use core::fmt::Write as _;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, kron_vec, CMatrix};

/// Allowed deviation of `Σ|a|²` from one.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Allowed elementwise `|ρ − ρ†|`.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Allowed `|Tr ρ − 1|`.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-9;

fn photons_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Pure state over `{H, V}^⊗n`, amplitudes indexed with `H = 0`, `V = 1` and
/// the first photon as the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_photons: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps normalized amplitudes.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_photons = photons_for_dim(amplitudes.len())?;
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(StateVector {
            n_photons,
            amplitudes,
        })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_photons = photons_for_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Ok(StateVector {
            n_photons,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Computational basis state `|index⟩` of `n_photons` photons.
    pub fn basis(n_photons: usize, index: usize) -> Result<Self> {
        if n_photons == 0 {
            return Err(Error::invalid("n_photons", "must be at least 1"));
        }
        let dim = 1usize << n_photons;
        if index >= dim {
            return Err(Error::invalid("index", "outside the basis"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_photons,
            amplitudes,
        })
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self ⊗ other`, with `self` occupying the leading photons.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector {
            n_photons: self.n_photons + other.n_photons,
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`; equals one exactly when the states agree up to a global phase.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        self.inner(other).map(|z| z.norm_sqr())
    }
}

/// Pump amplitude ratio `eta ≥ 0` and relative phase `delta ∈ [0, 2π)` of the
/// two circulation directions in the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    eta: f64,
    delta: f64,
}

impl SourceParams {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::invalid("eta", "must be finite and nonnegative"));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        let mut delta = delta % TAU;
        if delta < 0.0 {
            delta += TAU;
        }
        if delta >= TAU {
            delta = 0.0;
        }
        Ok(SourceParams { eta, delta })
    }

    /// Balanced pumping with zero phase: `(|HH⟩ + |VV⟩)/√2`.
    pub fn maximally_entangled() -> Self {
        SourceParams {
            eta: 1.0,
            delta: 0.0,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same ratio with the phase shifted by `shift` radians.
    pub fn with_phase_shift(&self, shift: f64) -> Self {
        SourceParams::new(self.eta, self.delta + shift).unwrap_or(*self)
    }
}

/// Two-photon state emitted by the loop: `(|HH⟩ + η e^{iδ}|VV⟩)/√(1+η²)`.
pub fn bell_source_state(params: SourceParams) -> StateVector {
    let [hh, vv] = source_amplitudes(params.eta, params.delta);
    let zero = Complex64::new(0.0, 0.0);
    StateVector {
        n_photons: 2,
        amplitudes: vec![hh, zero, zero, vv],
    }
}

/// `|HH⟩` and `|VV⟩` amplitudes of the source state.
pub(crate) fn source_amplitudes(eta: f64, delta: f64) -> [Complex64; 2] {
    let norm = (1.0 + eta * eta).sqrt().recip();
    [
        Complex64::new(norm, 0.0),
        Complex64::from_polar(eta * norm, delta),
    ]
}

/// Canonical maximally entangled pair `(|HH⟩ + |VV⟩)/√2`.
pub fn bell_phi_plus() -> StateVector {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    StateVector {
        n_photons: 2,
        amplitudes: vec![a, zero, zero, a],
    }
}

/// Tensor product of independent pair states, photons ordered `(s1, i1, s2, i2, ...)`.
pub fn multiphoton_state(pair_params: &[SourceParams]) -> Result<StateVector> {
    let (first, rest) = pair_params
        .split_first()
        .ok_or_else(|| Error::invalid("pair_params", "at least one pair is required"))?;
    Ok(rest
        .iter()
        .fold(bell_source_state(*first), |acc, p| acc.tensor(&bell_source_state(*p))))
}

/// Hermitian, positive semidefinite, unit-trace operator on `2^n` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_photons: usize,
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates `elements` against the density-matrix invariants.
    pub fn from_matrix(elements: CMatrix) -> Result<Self> {
        let report = validate_density(&elements)?;
        if let Some(msg) = report.violation_message() {
            return Err(Error::InvalidDensity(msg));
        }
        let n_photons = photons_for_dim(elements.rows())?;
        Ok(DensityMatrix {
            n_photons,
            elements,
        })
    }

    /// Caller guarantees the invariants (used where they hold by construction).
    pub(crate) fn from_matrix_unchecked(elements: CMatrix) -> Self {
        let n_photons = elements.rows().trailing_zeros() as usize;
        DensityMatrix {
            n_photons,
            elements,
        }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_photons: usize) -> Result<Self> {
        if n_photons == 0 {
            return Err(Error::invalid("n_photons", "must be at least 1"));
        }
        let dim = 1usize << n_photons;
        Ok(DensityMatrix {
            n_photons,
            elements: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
        })
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn dim(&self) -> usize {
        self.elements.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_matrix(self) -> CMatrix {
        self.elements
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elements).expect("density matrices are square")
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.elements
            .trace_product(&self.elements)
            .map_or(f64::NAN, |z| z.re)
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn density_from_pure(psi: &StateVector) -> DensityMatrix {
    let a = psi.amplitudes();
    DensityMatrix {
        n_photons: psi.n_photons(),
        elements: CMatrix::outer(a, a),
    }
}

/// Overlap `Tr(ρ_exp ρ_th)`.
///
/// This is the textbook fidelity only when `rho_th` is pure; for two mixed
/// states it is the Hilbert-Schmidt overlap, not the Uhlmann fidelity.
pub fn fidelity(rho_exp: &DensityMatrix, rho_th: &DensityMatrix) -> Result<f64> {
    if rho_exp.dim() != rho_th.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_th.dim(),
            found: rho_exp.dim(),
        });
    }
    let tr = rho_exp.elements.trace_product(&rho_th.elements)?;
    if tr.im.abs() > HERMITICITY_TOLERANCE {
        return Err(Error::ComplexFidelity(tr.im));
    }
    Ok(tr.re)
}

/// Diagnostics for the three density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    /// max |ρ − ρ†| over elements
    pub hermiticity_defect: f64,
    /// |Tr ρ − 1|
    pub trace_defect: f64,
    /// smallest eigenvalue of the Hermitian part
    pub min_eigenvalue: f64,
}

impl DensityReport {
    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect <= HERMITICITY_TOLERANCE
    }

    pub fn has_unit_trace(&self) -> bool {
        self.trace_defect <= TRACE_TOLERANCE
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue >= -EIGENVALUE_TOLERANCE
    }

    pub fn is_valid(&self) -> bool {
        self.is_hermitian() && self.has_unit_trace() && self.is_positive_semidefinite()
    }

    /// Names of the violated invariants, in a fixed order.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.is_hermitian() {
            out.push("hermiticity");
        }
        if !self.has_unit_trace() {
            out.push("unit trace");
        }
        if !self.is_positive_semidefinite() {
            out.push("positive semidefinite");
        }
        out
    }

    fn violation_message(&self) -> Option<String> {
        let v = self.violations();
        if v.is_empty() {
            return None;
        }
        let mut msg = String::new();
        for (i, name) in v.iter().enumerate() {
            if i > 0 {
                msg.push_str(", ");
            }
            msg.push_str(name);
        }
        let _ = write!(
            msg,
            " (hermiticity defect {:e}, trace defect {:e}, min eigenvalue {:e})",
            self.hermiticity_defect, self.trace_defect, self.min_eigenvalue
        );
        Some(msg)
    }
}

/// Checks a raw square matrix of dimension `2^n` against the density-matrix invariants.
pub fn validate_density(rho: &CMatrix) -> Result<DensityReport> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: rho.rows(),
            found: rho.cols(),
        });
    }
    photons_for_dim(rho.rows())?;
    let tr = rho.trace();
    let min_eigenvalue = hermitian_eigenvalues(rho)?
        .first()
        .copied()
        .unwrap_or(f64::NAN);
    Ok(DensityReport {
        hermiticity_defect: rho.hermiticity_defect(),
        trace_defect: (tr - Complex64::new(1.0, 0.0)).norm(),
        min_eigenvalue,
    })
}
