//! Closed-form click probabilities computed from scratch (density matrix
//! and explicit polarizer kets), used to check the stochastic engine.
#![allow(dead_code)]

use num_complex::Complex64;

/// Linear polarizer ket for a half-wave plate at `hwp_deg` in front of a PBS.
pub fn polarizer_ket(hwp_deg: f64) -> [Complex64; 2] {
    let a = (2.0 * hwp_deg).to_radians();
    [Complex64::new(a.cos(), 0.0), Complex64::new(a.sin(), 0.0)]
}

/// `(|HH⟩ + η e^{iδ}|VV⟩)/√(1+η²)` as a 4×4 density matrix.
pub fn pair_density(eta: f64, delta: f64) -> [[Complex64; 4]; 4] {
    let n = (1.0 + eta * eta).sqrt();
    let psi = [
        Complex64::new(1.0 / n, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(eta / n, delta),
    ];
    let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            rho[r][c] = psi[r] * psi[c].conj();
        }
    }
    rho
}

fn expectation(rho: &[[Complex64; 4]; 4], op: &[[Complex64; 4]; 4]) -> f64 {
    let mut t = Complex64::new(0.0, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            t += rho[r][c] * op[c][r];
        }
    }
    t.re
}

fn projector(k: Option<[Complex64; 2]>) -> [[Complex64; 2]; 2] {
    match k {
        None => [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ],
        Some(k) => [
            [k[0] * k[0].conj(), k[0] * k[1].conj()],
            [k[1] * k[0].conj(), k[1] * k[1].conj()],
        ],
    }
}

fn kron2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 4]; 4] {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// `(P(signal passes), P(idler passes), P(both pass))` for one pair.
pub fn pass_probabilities(
    rho: &[[Complex64; 4]; 4],
    signal: Option<[Complex64; 2]>,
    idler: Option<[Complex64; 2]>,
) -> (f64, f64, f64) {
    let ps = projector(signal);
    let pi = projector(idler);
    let id = projector(None);
    (
        expectation(rho, &kron2(&ps, &id)),
        expectation(rho, &kron2(&id, &pi)),
        expectation(rho, &kron2(&ps, &pi)),
    )
}

/// Per-pulse probability that both detectors of one pair click, with
/// Poisson(μ) emission, photon survival `eta` and dark probability `dark`.
///
/// P(no click on a) = (1−d) Σ_k Pois(k) (1−q_a)^k = (1−d) e^{−μ q_a}; the
/// joint no-click term uses 1 − q_s − q_i + q_si per pair.
pub fn twofold_probability(mu: f64, eta: f64, dark: f64, pass: (f64, f64, f64)) -> f64 {
    let (ps, pi, psi) = pass;
    let qs = eta * ps;
    let qi = eta * pi;
    let qsi = eta * eta * psi;
    1.0 - (1.0 - dark) * (-mu * qs).exp() - (1.0 - dark) * (-mu * qi).exp()
        + (1.0 - dark) * (1.0 - dark) * (-mu * (qs + qi - qsi)).exp()
}

/// `|observed − expected|` in units of the binomial standard error.
pub fn z_score(observed: f64, trials: f64, p: f64) -> f64 {
    let sd = (trials * p * (1.0 - p)).sqrt();
    let diff = (observed - trials * p).abs();
    if sd == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / sd
    }
}
