//! Jones-calculus model of the analysis stage: QWP → HWP → PBS (transmits H).
//!
//! Waveplate angles are in degrees. The effective polarizer angle of a plain
//! HWP + PBS analyzer is twice the HWP angle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, kron_vec, CMatrix};
use crate::qstate::{DensityMatrix, StateVector, HERMITICITY_TOLERANCE};

/// Angles of the waveplates in front of one detector's PBS. `qwp = None`
/// means the quarter-wave plate is removed from the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateSetting {
    pub qwp: Option<f64>,
    pub hwp: f64,
}

impl WaveplateSetting {
    pub const H: WaveplateSetting = WaveplateSetting { qwp: None, hwp: 0.0 };
    pub const V: WaveplateSetting = WaveplateSetting { qwp: None, hwp: 45.0 };
    pub const D: WaveplateSetting = WaveplateSetting { qwp: None, hwp: 22.5 };
    pub const A: WaveplateSetting = WaveplateSetting { qwp: None, hwp: -22.5 };
    pub const R: WaveplateSetting = WaveplateSetting {
        qwp: Some(45.0),
        hwp: 0.0,
    };

    pub fn new(qwp: Option<f64>, hwp: f64) -> Result<Self> {
        if !hwp.is_finite() || qwp.is_some_and(|q| !q.is_finite()) {
            return Err(Error::invalid("waveplate angle", "must be finite"));
        }
        Ok(WaveplateSetting { qwp, hwp })
    }

    /// HWP-only analyzer transmitting linear polarization at `angle_deg`.
    pub fn polarizer(angle_deg: f64) -> Self {
        WaveplateSetting {
            qwp: None,
            hwp: angle_deg / 2.0,
        }
    }

    /// Setting with both plates offset by the given angles.
    pub fn offset(&self, qwp_deg: f64, hwp_deg: f64) -> Self {
        WaveplateSetting {
            qwp: self.qwp.map(|q| q + qwp_deg),
            hwp: self.hwp + hwp_deg,
        }
    }
}

impl fmt::Display for WaveplateSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qwp {
            Some(q) => write!(f, "qwp={q} hwp={}", self.hwp),
            None => write!(f, "qwp=out hwp={}", self.hwp),
        }
    }
}

/// Analyzer set used for tomography, in Cartesian-product order.
pub const TOMOGRAPHY_BASIS: [WaveplateSetting; 4] = [
    WaveplateSetting::H,
    WaveplateSetting::V,
    WaveplateSetting::D,
    WaveplateSetting::R,
];

pub fn hwp_matrix(theta_deg: f64) -> CMatrix {
    let (s, c) = (2.0 * theta_deg.to_radians()).sin_cos();
    let re = |x: f64| Complex64::new(x, 0.0);
    CMatrix::from_vec(2, 2, vec![re(c), re(s), re(s), re(-c)]).expect("2x2")
}

pub fn qwp_matrix(theta_deg: f64) -> CMatrix {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let diag0 = c * c + i * (s * s);
    let off = (one - i) * (s * c);
    let diag1 = s * s + i * (c * c);
    CMatrix::from_vec(2, 2, vec![diag0, off, off, diag1]).expect("2x2")
}

/// `[H, V]` amplitudes of the state the analyzer transmits.
pub(crate) fn analyzer_amplitudes(setting: &WaveplateSetting) -> [Complex64; 2] {
    // U = HWP · QWP; the transmitted ket is U† |H⟩ = QWP† HWP |H⟩
    let (s2, c2) = (2.0 * setting.hwp.to_radians()).sin_cos();
    let after_hwp = [Complex64::new(c2, 0.0), Complex64::new(s2, 0.0)];
    match setting.qwp {
        None => after_hwp,
        Some(q) => {
            let (s, c) = q.to_radians().sin_cos();
            let i = Complex64::i();
            let one = Complex64::new(1.0, 0.0);
            // QWP is symmetric, so QWP† is its elementwise conjugate
            let d0 = (c * c + i * (s * s)).conj();
            let off = ((one - i) * (s * c)).conj();
            let d1 = (s * s + i * (c * c)).conj();
            [
                d0 * after_hwp[0] + off * after_hwp[1],
                off * after_hwp[0] + d1 * after_hwp[1],
            ]
        }
    }
}

/// Single-photon state transmitted by the waveplates and PBS.
pub fn analyzer_ket(setting: &WaveplateSetting) -> StateVector {
    StateVector::normalized(analyzer_amplitudes(setting).to_vec())
        .expect("analyzer kets are unitary images of |H>")
}

/// Rank-1 measurement operator `|k⟩⟨k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    ket: StateVector,
    operator: CMatrix,
}

impl Projector {
    pub fn from_ket(ket: StateVector) -> Self {
        let a = ket.amplitudes();
        let operator = CMatrix::outer(a, a);
        Projector { ket, operator }
    }

    pub fn n_photons(&self) -> usize {
        self.ket.n_photons()
    }

    pub fn ket(&self) -> &StateVector {
        &self.ket
    }

    pub fn operator(&self) -> &CMatrix {
        &self.operator
    }
}

/// Product projector, one analyzer per photon.
pub fn multi_projector(settings: &[WaveplateSetting]) -> Result<Projector> {
    if settings.is_empty() {
        return Err(Error::invalid("settings", "one setting per photon is required"));
    }
    let amps = settings.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, s| {
        kron_vec(&acc, &analyzer_amplitudes(s))
    });
    Ok(Projector::from_ket(StateVector::normalized(amps)?))
}

/// All `4^n` analyzer tuples over `{H, V, D, R}`, first photon varying slowest.
pub fn tomography_settings(n_photons: usize) -> Result<Vec<Vec<WaveplateSetting>>> {
    if n_photons < 1 {
        return Err(Error::invalid("n_photons", "must be at least 1"));
    }
    if n_photons > 8 {
        return Err(Error::invalid("n_photons", "more than 8 photons is not supported"));
    }
    let total = 1usize << (2 * n_photons);
    Ok((0..total)
        .map(|mut idx| {
            let mut tuple = vec![WaveplateSetting::H; n_photons];
            for slot in tuple.iter_mut().rev() {
                *slot = TOMOGRAPHY_BASIS[idx % 4];
                idx /= 4;
            }
            tuple
        })
        .collect())
}

/// Born-rule probability `Tr(ρ P)`.
pub fn measurement_probability(state: &DensityMatrix, proj: &Projector) -> Result<f64> {
    if state.dim() != proj.ket().dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: proj.ket().dim(),
        });
    }
    let p = state.matrix().quadratic_form(proj.ket().amplitudes());
    if p.im.abs() > HERMITICITY_TOLERANCE {
        return Err(Error::ComplexFidelity(p.im));
    }
    Ok(p.re)
}

/// Numerical rank of the span of the projectors in operator space, from the
/// Gram matrix `G_ij = Tr(P_i P_j) = |⟨k_i|k_j⟩|²`.
pub fn informational_rank(projectors: &[Projector]) -> Result<usize> {
    let m = projectors.len();
    let gram = CMatrix::from_fn(m, m, |i, j| {
        let z = projectors[i]
            .ket()
            .inner(projectors[j].ket())
            .unwrap_or_default();
        Complex64::new(z.norm_sqr(), 0.0)
    });
    let ev = hermitian_eigenvalues(&gram)?;
    let top = ev.last().copied().unwrap_or(0.0);
    Ok(ev.iter().filter(|&&v| v > 1e-10 * top.max(1.0)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{bell_phi_plus, density_from_pure};
    use core::f64::consts::FRAC_1_SQRT_2;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unitary_defect(u: &CMatrix) -> f64 {
        (&u.adjoint() * u).max_abs_diff(&CMatrix::identity(2))
    }

    /// max over kets of 1 - |<a|b>|²
    fn same_up_to_phase(a: &[Complex64], b: &[Complex64]) -> bool {
        let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        (ip.norm_sqr() - 1.0).abs() < 1e-12
    }

    /// True when `a = e^{iφ} b` for some φ.
    fn matrices_equal_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
        let (r, col) = (0..4)
            .map(|k| (k / 2, k % 2))
            .max_by(|x, y| b[*x].norm().total_cmp(&b[*y].norm()))
            .unwrap();
        let phase = a[(r, col)] / b[(r, col)];
        (phase.norm() - 1.0).abs() < 1e-12 && a.max_abs_diff(&b.scale(phase)) < 1e-12
    }

    #[test]
    fn hwp_examples() {
        let z = hwp_matrix(0.0);
        assert!(z.max_abs_diff(&CMatrix::diagonal(&[1.0, -1.0])) < 1e-15);
        let out = hwp_matrix(22.5).mul_vec(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((out[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let swap = hwp_matrix(45.0);
        let out = swap.mul_vec(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(out[0].norm() < 1e-15 && (out[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn qwp_examples() {
        let q0 = qwp_matrix(0.0);
        assert!(matrices_equal_up_to_phase(
            &q0,
            &CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])
                .unwrap()
        ));
        let out = qwp_matrix(45.0).mul_vec(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let circ = [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)];
        // handedness depends on convention; the state must be circular
        let lcirc = [c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)];
        assert!(same_up_to_phase(&out, &circ) || same_up_to_phase(&out, &lcirc));
        assert!((out[0].norm() - out[1].norm()).abs() < 1e-15);

        for theta in [0.0, 10.0, 33.3, 45.0, 120.0] {
            let qq = &qwp_matrix(theta) * &qwp_matrix(theta);
            assert!(matrices_equal_up_to_phase(&qq, &hwp_matrix(theta)), "θ={theta}");
        }
    }

    #[test]
    fn analyzer_kets() {
        let h = analyzer_ket(&WaveplateSetting::H);
        assert!(same_up_to_phase(h.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]));
        let d = analyzer_ket(&WaveplateSetting::D);
        let diag = [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)];
        assert!(same_up_to_phase(d.amplitudes(), &diag));
    }

    #[test]
    fn circular_analyzer_matches_explicit_jones_product() {
        // U = HWP(0) · QWP(45), ket = U† |H>
        let u = &hwp_matrix(0.0) * &qwp_matrix(45.0);
        let ket = u.adjoint().mul_vec(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let r = analyzer_ket(&WaveplateSetting::R);
        assert!(same_up_to_phase(r.amplitudes(), &ket));
        let circ = [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)];
        assert!(same_up_to_phase(r.amplitudes(), &circ));
    }

    #[test]
    fn product_projectors() {
        let hh = multi_projector(&[WaveplateSetting::H, WaveplateSetting::H]).unwrap();
        assert!(hh.operator().max_abs_diff(&CMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0])) < 1e-15);

        let dd = multi_projector(&[WaveplateSetting::D, WaveplateSetting::D]).unwrap();
        for a in dd.ket().amplitudes() {
            assert!((a - c(0.5, 0.0)).norm() < 1e-15);
        }

        let h4 = multi_projector(&[WaveplateSetting::H; 4]).unwrap();
        let mut diag = [0.0; 16];
        diag[0] = 1.0;
        assert!(h4.operator().max_abs_diff(&CMatrix::diagonal(&diag)) < 1e-15);
        let op = h4.operator();
        assert!((op * op).max_abs_diff(op) < 1e-10);
    }

    #[test]
    fn tomography_setting_counts() {
        assert_eq!(tomography_settings(1).unwrap().len(), 4);
        assert_eq!(tomography_settings(2).unwrap().len(), 16);
        assert_eq!(tomography_settings(4).unwrap().len(), 256);
        assert!(tomography_settings(0).is_err());
        let two = tomography_settings(2).unwrap();
        assert_eq!(two[0], vec![WaveplateSetting::H, WaveplateSetting::H]);
        assert_eq!(two[1], vec![WaveplateSetting::H, WaveplateSetting::V]);
        assert_eq!(two[15], vec![WaveplateSetting::R, WaveplateSetting::R]);
    }

    #[test]
    fn tomography_sets_are_informationally_complete() {
        for n in 1..=3 {
            let projectors: Vec<_> = tomography_settings(n)
                .unwrap()
                .iter()
                .map(|s| multi_projector(s).unwrap())
                .collect();
            assert_eq!(informational_rank(&projectors).unwrap(), 1 << (2 * n), "n={n}");
        }
        // H/V only spans the diagonal
        let hv: Vec<_> = [WaveplateSetting::H, WaveplateSetting::V]
            .iter()
            .map(|s| multi_projector(&[*s]).unwrap())
            .collect();
        assert_eq!(informational_rank(&hv).unwrap(), 2);
    }

    #[test]
    fn bell_probabilities() {
        let bell = density_from_pure(&bell_phi_plus());
        let p = |a, b| measurement_probability(&bell, &multi_projector(&[a, b]).unwrap()).unwrap();
        use WaveplateSetting as W;
        assert!((p(W::H, W::H) - 0.5).abs() < 1e-12);
        assert!(p(W::H, W::V).abs() < 1e-12);
        // |<DD|Φ+>|² = |(1/2)(1 + 1)/√2|² = 1/2
        assert!((p(W::D, W::D) - 0.5).abs() < 1e-12);
        assert!(p(W::D, W::A).abs() < 1e-12);
        let one = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(measurement_probability(&one, &multi_projector(&[W::H, W::H]).unwrap()).is_err());
    }

    fn setting() -> impl Strategy<Value = WaveplateSetting> {
        (proptest::option::of(-360.0..360.0f64), -360.0..360.0f64)
            .prop_map(|(q, h)| WaveplateSetting::new(q, h).unwrap())
    }

    proptest! {
        #[test]
        fn waveplates_are_unitary(theta in -720.0..720.0f64) {
            prop_assert!(unitary_defect(&hwp_matrix(theta)) < 1e-12);
            prop_assert!(unitary_defect(&qwp_matrix(theta)) < 1e-12);
        }

        #[test]
        fn analyzer_kets_are_normalized(s in setting()) {
            prop_assert!((analyzer_ket(&s).norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn half_turn_leaves_projector_unchanged(s in setting(), dq in 0..3i32, dh in 0..3i32) {
            let shifted = s.offset(180.0 * dq as f64, 180.0 * dh as f64);
            let a = multi_projector(&[s]).unwrap();
            let b = multi_projector(&[shifted]).unwrap();
            prop_assert!(a.operator().max_abs_diff(b.operator()) < 1e-10);
        }

        #[test]
        fn orthonormal_basis_probabilities_sum_to_one(
            ket in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
            mix in 0.0..1.0f64,
        ) {
            let amps: Vec<_> = ket.iter().map(|&(r, i)| c(r, i)).collect();
            prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3);
            let psi = StateVector::normalized(amps).unwrap();
            let pure = density_from_pure(&psi);
            let rho = DensityMatrix::from_matrix(
                &pure.matrix().scale_real(mix)
                    + &DensityMatrix::maximally_mixed(3).unwrap().matrix().scale_real(1.0 - mix),
            ).unwrap();
            let hv = [WaveplateSetting::H, WaveplateSetting::V];
            let mut total = 0.0;
            for a in hv { for b in hv { for d in hv {
                total += measurement_probability(&rho, &multi_projector(&[a, b, d]).unwrap()).unwrap();
            }}}
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
