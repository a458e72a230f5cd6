//! Polarization interference fringes: Born-rule prediction, the empirical
//! two- and four-photon fringe shapes, weighted least-squares fitting, and
//! the CHSH visibility threshold.
//!
//! Angles on the fringe axis are effective polarizer angles in degrees.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::invert_real;
use crate::optics::{measurement_probability, multi_projector, WaveplateSetting};
use crate::qstate::DensityMatrix;

/// Visibility above which a Bell-type fringe violates the CHSH inequality.
pub const CHSH_VISIBILITY_BOUND: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FringeKind {
    /// `scale · (1 + V sin(2π(x − x_c)/T))`
    TwoPhoton,
    /// `scale · (1 + ((1 − √(1 − V²))/V) sin²(2π(x − x_c)/T))`
    FourPhoton,
}

impl FringeKind {
    pub fn from_n_fold(n_fold: usize) -> Result<Self> {
        match n_fold {
            2 => Ok(FringeKind::TwoPhoton),
            4 => Ok(FringeKind::FourPhoton),
            _ => Err(Error::invalid("n_fold", "must be 2 or 4")),
        }
    }

    pub fn n_fold(self) -> usize {
        match self {
            FringeKind::TwoPhoton => 2,
            FringeKind::FourPhoton => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeModel {
    pub kind: FringeKind,
    /// multiplicative amplitude (counts)
    pub scale: f64,
    pub visibility: f64,
    /// initial phase, degrees
    pub x_c: f64,
    /// oscillation period, degrees
    pub period: f64,
}

impl FringeModel {
    pub fn new(kind: FringeKind, scale: f64, visibility: f64, x_c: f64, period: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::invalid("visibility", "must lie in [0, 1]"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("period", "must be positive"));
        }
        if !scale.is_finite() || scale < 0.0 || !x_c.is_finite() {
            return Err(Error::invalid("scale", "scale and x_c must be finite, scale ≥ 0"));
        }
        Ok(FringeModel {
            kind,
            scale,
            visibility,
            x_c,
            period,
        })
    }

    /// Evaluates whichever shape `kind` selects.
    pub fn eval(&self, x: f64) -> f64 {
        let theta = TAU * (x - self.x_c) / self.period;
        match self.kind {
            FringeKind::TwoPhoton => self.scale * (1.0 + self.visibility * theta.sin()),
            FringeKind::FourPhoton => {
                let s = theta.sin();
                self.scale * (1.0 + four_photon_coefficient(self.visibility) * s * s)
            }
        }
    }
}

/// Two-photon fringe `scale · (1 + V sin(2π(x − x_c)/T))`.
pub fn two_photon_model(x: f64, m: &FringeModel) -> Result<f64> {
    if m.kind != FringeKind::TwoPhoton {
        return Err(Error::invalid("model", "expected a two-photon model"));
    }
    Ok(m.eval(x))
}

/// Four-photon fringe `scale · (1 + c(V) sin²(2π(x − x_c)/T))`.
pub fn four_photon_model(x: f64, m: &FringeModel) -> Result<f64> {
    if m.kind != FringeKind::FourPhoton {
        return Err(Error::invalid("model", "expected a four-photon model"));
    }
    if !(0.0..=1.0).contains(&m.visibility) {
        return Err(Error::invalid("visibility", "must lie in [0, 1]"));
    }
    Ok(m.eval(x))
}

/// `(1 − √(1 − V²))/V`, evaluated as `V/(1 + √(1 − V²))` so that `V → 0` is
/// smooth (coefficient `≈ V/2`).
pub fn four_photon_coefficient(visibility: f64) -> f64 {
    let v = visibility.clamp(0.0, 1.0);
    v / (1.0 + (1.0 - v * v).max(0.0).sqrt())
}

/// Inverse of [`four_photon_coefficient`] on `[0, 1]`.
pub fn visibility_from_coefficient(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    2.0 * c / (1.0 + c * c)
}

/// Born-rule coincidence probabilities along an idler sweep, QWPs out.
///
/// `signal_polarizer_deg` holds one angle per pair. When
/// `pairs_scanned_together` is set every idler follows the sweep; otherwise
/// only the first pair's idler is swept and each remaining idler stays at its
/// own signal angle.
pub fn predict_fringe(
    state: &DensityMatrix,
    signal_polarizer_deg: &[f64],
    idler_sweep_deg: &[f64],
    pairs_scanned_together: bool,
) -> Result<Vec<f64>> {
    let pairs = signal_polarizer_deg.len();
    if pairs == 0 || state.n_photons() != 2 * pairs {
        return Err(Error::DimensionMismatch {
            expected: state.n_photons(),
            found: 2 * pairs,
        });
    }
    idler_sweep_deg
        .iter()
        .map(|&x| {
            let settings: Vec<WaveplateSetting> = signal_polarizer_deg
                .iter()
                .enumerate()
                .flat_map(|(k, &s)| {
                    let idler = if pairs_scanned_together || k == 0 { x } else { s };
                    [WaveplateSetting::polarizer(s), WaveplateSetting::polarizer(idler)]
                })
                .collect();
            measurement_probability(state, &multi_projector(&settings)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub angle_deg: f64,
    pub counts: f64,
    pub count_error: f64,
}

/// Coincidence counts along an idler sweep.
///
/// Counts are stored as `f64` so that expected (noiseless) curves can be fed
/// through the same fitting path as measured integers.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeData {
    points: Vec<FringePoint>,
    pub signal_basis_deg: f64,
    pub n_fold: usize,
    poisson: bool,
}

impl FringeData {
    pub fn new(points: Vec<FringePoint>, signal_basis_deg: f64, n_fold: usize) -> Result<Self> {
        FringeKind::from_n_fold(n_fold)?;
        if points.windows(2).any(|w| !(w[1].angle_deg > w[0].angle_deg)) {
            return Err(Error::invalid("sweep", "angles must be strictly increasing"));
        }
        if points
            .iter()
            .any(|p| !(p.counts >= 0.0) || !(p.count_error >= 0.0) || !p.angle_deg.is_finite())
        {
            return Err(Error::invalid("sweep", "counts and errors must be nonnegative"));
        }
        Ok(FringeData {
            points,
            signal_basis_deg,
            n_fold,
            poisson: false,
        })
    }

    /// Poisson counts with error bars `√counts`. The fit then weights each
    /// point by the model prediction rather than the observed count, which
    /// avoids the downward pull of low-count bins.
    pub fn from_counts(
        angles_deg: &[f64],
        counts: &[f64],
        signal_basis_deg: f64,
        n_fold: usize,
    ) -> Result<Self> {
        if angles_deg.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: angles_deg.len(),
                found: counts.len(),
            });
        }
        let points = angles_deg
            .iter()
            .zip(counts)
            .map(|(&angle_deg, &counts)| FringePoint {
                angle_deg,
                counts,
                count_error: counts.max(0.0).sqrt(),
            })
            .collect();
        let mut data = Self::new(points, signal_basis_deg, n_fold)?;
        data.poisson = true;
        Ok(data)
    }

    /// Whether error bars are Poisson (`√counts`) rather than supplied.
    pub fn is_poisson(&self) -> bool {
        self.poisson
    }

    pub fn points(&self) -> &[FringePoint] {
        &self.points
    }

    pub fn kind(&self) -> FringeKind {
        FringeKind::from_n_fold(self.n_fold).expect("validated on construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeErrors {
    pub scale: f64,
    /// delta-method standard error of `V`
    pub visibility: f64,
    /// standard error of the fitted amplitude: `V` itself for the two-photon
    /// shape, the sin² coefficient `c` for the four-photon one
    pub amplitude: f64,
    pub x_c: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub model: FringeModel,
    pub errors: FringeErrors,
    /// `√χ²` of the weighted residuals
    pub residual_norm: f64,
    pub iterations: usize,
}

impl FringeFit {
    /// `V` range covered by the amplitude ± `n_sigma` standard errors. For
    /// the four-photon shape the interval is built on `c` and mapped through
    /// `V = 2c/(1+c²)`, which stays honest near `V = 1` where the map is flat.
    pub fn visibility_interval(&self, n_sigma: f64) -> (f64, f64) {
        let m = &self.model;
        let d = n_sigma * self.errors.amplitude;
        match m.kind {
            FringeKind::TwoPhoton => ((m.visibility - d).max(0.0), (m.visibility + d).min(1.0)),
            FringeKind::FourPhoton => {
                let c = four_photon_coefficient(m.visibility);
                (
                    visibility_from_coefficient((c - d).max(0.0)),
                    visibility_from_coefficient((c + d).min(1.0)),
                )
            }
        }
    }
}

const MAX_ITERATIONS: usize = 500;
const IRLS_ROUNDS: usize = 50;
const MIN_POINTS: usize = 6;

/// Weighted nonlinear least-squares fit of the model selected by `data.n_fold`.
///
/// Weights are `1/σ²` with `σ = max(count_error, 1)`, so empty bins keep a
/// finite weight. The amplitude parameter is bounded: `V ∈ [0, 1]` for the
/// two-photon shape and the sin² coefficient `c ∈ [0, 1]` for the four-photon
/// one, with `V` recovered from `c`.
pub fn fit_fringe(data: &FringeData) -> Result<FringeFit> {
    let pts = data.points();
    if pts.len() < MIN_POINTS {
        return Err(Error::invalid("sweep", "at least 6 points are required"));
    }
    let ys: Vec<f64> = pts.iter().map(|p| p.counts).collect();
    let y_max = ys.iter().cloned().fold(f64::MIN, f64::max);
    let y_min = ys.iter().cloned().fold(f64::MAX, f64::min);
    if y_max - y_min <= 1e-12 * y_max.abs().max(1.0) {
        return Err(Error::Degenerate("all counts are equal"));
    }
    let kind = data.kind();
    let problem = FitProblem {
        kind,
        xs: pts.iter().map(|p| p.angle_deg).collect(),
        ys,
        sigmas: pts.iter().map(|p| p.count_error.max(1.0)).collect(),
    };

    let poisson = data.is_poisson();
    let mut best: Option<(f64, FitProblem, LmOutcome)> = None;
    let mut last_failure = None;
    for period in problem.period_candidates() {
        let Some(start) = problem.initial_guess(period) else {
            continue;
        };
        let attempt = if poisson {
            problem.poisson_fit(start)
        } else {
            problem.levenberg_marquardt(start).map(|o| (problem.clone(), o))
        };
        match attempt {
            // for Poisson data this is Pearson's χ² under the fit's own model weights
            Ok((weighted, outcome)) => {
                if best.as_ref().is_none_or(|b| outcome.chi2 < b.0) {
                    best = Some((outcome.chi2, weighted, outcome));
                }
            }
            Err(e) => last_failure = Some(e),
        }
    }
    match (best, last_failure) {
        (Some((_, weighted, outcome)), _) => weighted.finish(outcome),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Degenerate("no usable period candidate")),
    }
}

#[derive(Clone)]
struct FitProblem {
    kind: FringeKind,
    xs: Vec<f64>,
    ys: Vec<f64>,
    sigmas: Vec<f64>,
}

struct LmOutcome {
    params: [f64; 4],
    chi2: f64,
    iterations: usize,
}

impl FitProblem {
    /// `(value, [∂/∂scale, ∂/∂amp, ∂/∂x_c, ∂/∂T])` at `x`.
    fn eval(&self, p: &[f64; 4], x: f64) -> (f64, [f64; 4]) {
        let [s, a, xc, t] = *p;
        let theta = TAU * (x - xc) / t;
        let (sin, cos) = theta.sin_cos();
        let (g, dg) = match self.kind {
            FringeKind::TwoPhoton => (sin, cos),
            FringeKind::FourPhoton => (sin * sin, 2.0 * sin * cos),
        };
        let f = s * (1.0 + a * g);
        let common = s * a * dg;
        (
            f,
            [
                1.0 + a * g,
                s * g,
                -common * TAU / t,
                -common * TAU * (x - xc) / (t * t),
            ],
        )
    }

    fn chi2(&self, p: &[f64; 4]) -> f64 {
        self.xs
            .iter()
            .zip(&self.ys)
            .zip(&self.sigmas)
            .map(|((&x, &y), &sg)| {
                let r = (y - self.eval(p, x).0) / sg;
                r * r
            })
            .sum()
    }

    /// Normal matrix `JᵀWJ` and gradient `JᵀW r`.
    fn normal_equations(&self, p: &[f64; 4]) -> ([f64; 16], [f64; 4]) {
        let mut jtj = [0.0; 16];
        let mut jtr = [0.0; 4];
        for ((&x, &y), &sg) in self.xs.iter().zip(&self.ys).zip(&self.sigmas) {
            let (f, d) = self.eval(p, x);
            let w = 1.0 / (sg * sg);
            let r = y - f;
            for i in 0..4 {
                jtr[i] += w * d[i] * r;
                for j in 0..4 {
                    jtj[i * 4 + j] += w * d[i] * d[j];
                }
            }
        }
        (jtj, jtr)
    }

    /// Iteratively reweighted fit with `σ² = max(model, 1)`, starting from
    /// the weights of the start point. The fixed point is the Poisson
    /// maximum-likelihood estimate. Returns the final weighting with the fit.
    fn poisson_fit(&self, start: [f64; 4]) -> Result<(FitProblem, LmOutcome)> {
        let mut weighted = self.clone();
        let mut params = start;
        self.project(&mut params);
        let mut last = None;
        for _ in 0..IRLS_ROUNDS {
            weighted.sigmas = self.xs.iter().map(|&x| self.eval(&params, x).0.max(1.0).sqrt()).collect();
            let next = weighted.levenberg_marquardt(params)?;
            let moved = (0..4)
                .map(|i| ((next.params[i] - params[i]) / params[i].abs().max(1e-9)).abs())
                .fold(0.0, f64::max);
            params = next.params;
            last = Some(next);
            if moved < 1e-10 {
                break;
            }
        }
        Ok((weighted, last.expect("at least one round")))
    }

    fn project(&self, p: &mut [f64; 4]) {
        p[0] = p[0].max(1e-12);
        p[1] = p[1].clamp(0.0, 1.0);
        p[3] = p[3].max(1e-9);
    }

    /// Periods suggested by the strongest peaks of the data's discrete spectrum.
    fn period_candidates(&self) -> Vec<f64> {
        let n = self.xs.len();
        let span = self.xs[n - 1] - self.xs[0];
        let min_dx = self
            .xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::MAX, f64::min);
        let f_lo = 0.5 / span;
        let f_hi = 0.5 / min_dx;
        let mean = self.ys.iter().sum::<f64>() / n as f64;
        const GRID: usize = 2048;
        let power: Vec<(f64, f64)> = (0..GRID)
            .map(|k| {
                let f = f_lo + (f_hi - f_lo) * k as f64 / (GRID - 1) as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (&x, &y) in self.xs.iter().zip(&self.ys) {
                    let (s, c) = (TAU * f * x).sin_cos();
                    re += (y - mean) * c;
                    im += (y - mean) * s;
                }
                (f, re * re + im * im)
            })
            .collect();
        let mut peaks: Vec<(f64, f64)> = (0..GRID)
            .filter(|&k| {
                let left = k == 0 || power[k - 1].1 <= power[k].1;
                let right = k + 1 == GRID || power[k + 1].1 < power[k].1;
                left && right
            })
            .map(|k| power[k])
            .collect();
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
        // the sin² shape oscillates at twice the model frequency
        let harmonic = match self.kind {
            FringeKind::TwoPhoton => 1.0,
            FringeKind::FourPhoton => 2.0,
        };
        peaks
            .iter()
            .take(3)
            .map(|&(f, _)| harmonic / f)
            .collect()
    }

    /// Weighted linear fit of `C + A sin(kωx) + B cos(kωx)` at period `T`
    /// (`k = 1` two-photon, `k = 2` for the sin² shape), returning the start
    /// point it implies and its χ².
    fn linear_start(&self, period: f64) -> Option<([f64; 4], f64)> {
        let k = match self.kind {
            FringeKind::TwoPhoton => 1.0,
            FringeKind::FourPhoton => 2.0,
        };
        let w = k * TAU / period;
        let mut n = [0.0; 9];
        let mut rhs = [0.0; 3];
        for ((&x, &y), &sg) in self.xs.iter().zip(&self.ys).zip(&self.sigmas) {
            let (sn, cs) = (w * x).sin_cos();
            let basis = [1.0, sn, cs];
            let wt = 1.0 / (sg * sg);
            for i in 0..3 {
                rhs[i] += wt * basis[i] * y;
                for j in 0..3 {
                    n[i * 3 + j] += wt * basis[i] * basis[j];
                }
            }
        }
        let inv = invert_real(&n, 3).ok()?;
        let coef: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i * 3 + j] * rhs[j]).sum()).collect();
        let (c0, a, b) = (coef[0], coef[1], coef[2]);
        let r = a.hypot(b);
        let chi2 = self
            .xs
            .iter()
            .zip(&self.ys)
            .zip(&self.sigmas)
            .map(|((&x, &y), &sg)| {
                let (sn, cs) = (w * x).sin_cos();
                let e = (y - c0 - a * sn - b * cs) / sg;
                e * e
            })
            .sum();
        let start = match self.kind {
            // R sin(ω(x − x_c)) = R cos(ωx_c) sin ωx − R sin(ωx_c) cos ωx
            FringeKind::TwoPhoton => {
                let scale = c0.max(1e-9);
                [scale, (r / scale).clamp(0.02, 0.98), (-b).atan2(a) / w, period]
            }
            // s(1 + c sin²θ) = s(1 + c/2) − (sc/2) cos 2θ
            // deeper modulation than the shape allows starts on the bound,
            // matched to the mean level
            FringeKind::FourPhoton => {
                let c = if c0 - r > 0.0 { (2.0 * r / (c0 - r)).clamp(0.02, 0.98) } else { 0.98 };
                let scale = (c0 / (1.0 + c / 2.0)).max(1e-9);
                [scale, c, (-a).atan2(-b) / w, period]
            }
        };
        Some((start, chi2))
    }

    /// Start point near `period`: the linear fit is scanned over ±10 % of
    /// the spectral estimate and the best period kept.
    fn initial_guess(&self, period: f64) -> Option<[f64; 4]> {
        const STEPS: usize = 41;
        (0..STEPS)
            .filter_map(|i| self.linear_start(period * (0.9 + 0.2 * i as f64 / (STEPS - 1) as f64)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p)
    }

    fn levenberg_marquardt(&self, start: [f64; 4]) -> Result<LmOutcome> {
        let mut p = start;
        self.project(&mut p);
        let mut chi2 = self.chi2(&p);
        let mut lambda = 1e-3;
        for iter in 1..=MAX_ITERATIONS {
            let (mut jtj, mut jtr) = self.normal_equations(&p);
            // freeze the amplitude while it sits on a bound and is pushed outward
            let pushed_low = p[1] <= 0.0 && jtr[1] < 0.0;
            let pushed_high = p[1] >= 1.0 && jtr[1] > 0.0;
            if pushed_low || pushed_high {
                for j in 0..4 {
                    jtj[4 + j] = 0.0;
                    jtj[j * 4 + 1] = 0.0;
                }
                jtj[5] = 1.0;
                jtr[1] = 0.0;
            }
            let mut improved = false;
            while lambda < 1e16 {
                let mut a = jtj;
                for i in 0..4 {
                    a[i * 5] += lambda * jtj[i * 5].max(1e-12);
                }
                let Ok(inv) = invert_real(&a, 4) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut trial = p;
                for i in 0..4 {
                    trial[i] += (0..4).map(|j| inv[i * 4 + j] * jtr[j]).sum::<f64>();
                }
                self.project(&mut trial);
                let trial_chi2 = self.chi2(&trial);
                if trial_chi2 < chi2 {
                    let step: f64 = (0..4)
                        .map(|i| ((trial[i] - p[i]) / p[i].abs().max(1e-9)).abs())
                        .fold(0.0, f64::max);
                    let decrease = chi2 - trial_chi2;
                    p = trial;
                    chi2 = trial_chi2;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if step < 1e-12 || decrease <= 1e-14 * chi2 || chi2 < 1e-24 {
                        return Ok(LmOutcome {
                            params: p,
                            chi2,
                            iterations: iter,
                        });
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                // no descent direction left at machine precision
                return Ok(LmOutcome {
                    params: p,
                    chi2,
                    iterations: iter,
                });
            }
        }
        let last = self.to_model(&p);
        Err(Error::FitDidNotConverge {
            iterations: MAX_ITERATIONS,
            last,
        })
    }

    fn to_model(&self, p: &[f64; 4]) -> FringeModel {
        let [s, a, xc, t] = *p;
        let (visibility, fold) = match self.kind {
            FringeKind::TwoPhoton => (a, t),
            FringeKind::FourPhoton => (visibility_from_coefficient(a), t / 2.0),
        };
        let mut x_c = xc % fold;
        if x_c < 0.0 {
            x_c += fold;
        }
        FringeModel {
            kind: self.kind,
            scale: s,
            visibility: visibility.clamp(0.0, 1.0),
            x_c,
            period: t,
        }
    }

    fn finish(&self, outcome: LmOutcome) -> Result<FringeFit> {
        let p = outcome.params;
        let (jtj, _) = self.normal_equations(&p);
        // a singular normal matrix (e.g. zero amplitude leaves x_c and T
        // undetermined) reports infinite errors
        let cov = invert_real(&jtj, 4).unwrap_or_else(|_| vec![f64::INFINITY; 16]);
        let se = |i: usize| {
            let v = cov[i * 5];
            if v.is_nan() {
                f64::INFINITY
            } else {
                v.max(0.0).sqrt()
            }
        };
        let visibility_se = match self.kind {
            FringeKind::TwoPhoton => se(1),
            FringeKind::FourPhoton => {
                let c = p[1];
                let dv_dc = 2.0 * (1.0 - c * c) / ((1.0 + c * c) * (1.0 + c * c));
                dv_dc.abs() * se(1)
            }
        };
        Ok(FringeFit {
            model: self.to_model(&p),
            errors: FringeErrors {
                scale: se(0),
                visibility: visibility_se,
                amplitude: se(1),
                x_c: se(2),
                period: se(3),
            },
            residual_norm: outcome.chi2.sqrt(),
            iterations: outcome.iterations,
        })
    }
}

/// `(d_max − d_min)/(d_max + d_min)`.
pub fn visibility_from_extrema(d_max: f64, d_min: f64) -> Result<f64> {
    if !(d_min >= 0.0) || !(d_max >= d_min) || !(d_max > 0.0) {
        return Err(Error::invalid("extrema", "need d_max ≥ d_min ≥ 0 and d_max > 0"));
    }
    Ok((d_max - d_min) / (d_max + d_min))
}

/// Extremal visibility of a sampled curve.
pub fn visibility_of(values: &[f64]) -> Result<f64> {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    visibility_from_extrema(max, min.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshVerdict {
    pub violates: bool,
    /// `V − 1/√2`
    pub margin: f64,
}

pub fn chsh_violation(visibility: f64) -> ChshVerdict {
    let margin = visibility - CHSH_VISIBILITY_BOUND;
    ChshVerdict {
        violates: margin > 0.0,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{bell_phi_plus, density_from_pure, multiphoton_state, SourceParams};
    use proptest::prelude::*;

    fn model(kind: FringeKind, v: f64) -> FringeModel {
        FringeModel::new(kind, 100.0, v, 12.0, 180.0).unwrap()
    }

    fn sweep(n: usize, stop: f64) -> Vec<f64> {
        (0..n).map(|i| stop * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn two_photon_extremes() {
        let m = model(FringeKind::TwoPhoton, 1.0);
        assert!((two_photon_model(12.0 + 45.0, &m).unwrap() - 200.0).abs() < 1e-9);
        assert!(two_photon_model(12.0 + 135.0, &m).unwrap().abs() < 1e-9);
        let flat = model(FringeKind::TwoPhoton, 0.0);
        for x in [0.0, 30.0, 77.0] {
            assert_eq!(two_photon_model(x, &flat).unwrap(), 100.0);
        }
        assert!(two_photon_model(0.0, &model(FringeKind::FourPhoton, 0.5)).is_err());
    }

    #[test]
    fn four_photon_coefficient_examples() {
        assert_eq!(four_photon_coefficient(1.0), 1.0);
        assert!((four_photon_coefficient(0.6) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(four_photon_coefficient(0.0), 0.0);
        assert!((four_photon_coefficient(1e-6) - 5e-7).abs() < 1e-18);
        for v in [0.0, 0.1, 0.6, 0.93, 1.0] {
            assert!((visibility_from_coefficient(four_photon_coefficient(v)) - v).abs() < 1e-12);
        }
        let m = model(FringeKind::FourPhoton, 1.0);
        let x = 40.0;
        let s = (TAU * (x - 12.0) / 180.0).sin();
        assert!((four_photon_model(x, &m).unwrap() - 100.0 * (1.0 + s * s)).abs() < 1e-9);
        for v in [0.2, 0.6, 1.0] {
            let m = model(FringeKind::FourPhoton, v);
            assert!((four_photon_model(12.0, &m).unwrap() - 100.0).abs() < 1e-12);
        }
        let bad = FringeModel {
            visibility: 1.2,
            ..model(FringeKind::FourPhoton, 1.0)
        };
        assert!(four_photon_model(0.0, &bad).is_err());
    }

    #[test]
    fn bell_fringe_predictions() {
        let bell = density_from_pure(&bell_phi_plus());
        let p = predict_fringe(&bell, &[0.0], &[0.0, 90.0], true).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1].abs() < 1e-12);
        // closed form cos²(φs − φi)/2
        let xs = sweep(37, 180.0);
        for basis in [0.0, 45.0] {
            let p = predict_fringe(&bell, &[basis], &xs, true).unwrap();
            for (x, v) in xs.iter().zip(&p) {
                let d = (basis - x).to_radians();
                assert!((v - 0.5 * d.cos() * d.cos()).abs() < 1e-12);
            }
            assert!((visibility_of(&p).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn four_photon_prediction_by_brute_force() {
        let b = SourceParams::maximally_entangled();
        let rho = density_from_pure(&multiphoton_state(&[b, b]).unwrap());
        let p = predict_fringe(&rho, &[0.0, 0.0], &[45.0], true).unwrap();
        // independent: sum over the 16-dim amplitudes with explicit analyzer kets
        let h = [1.0, 0.0];
        let d45 = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        let kets = [h, d45, h, d45];
        let amp: f64 = [0usize, 3, 12, 15]
            .iter()
            .map(|&idx| {
                0.5 * (0..4)
                    .map(|q| kets[q][(idx >> (3 - q)) & 1])
                    .product::<f64>()
            })
            .sum();
        assert!((p[0] - amp * amp).abs() < 1e-12);
        assert!((p[0] - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn prediction_dimension_mismatch() {
        let bell = density_from_pure(&bell_phi_plus());
        assert!(predict_fringe(&bell, &[0.0, 0.0], &[0.0], true).is_err());
    }

    fn noiseless(kind: FringeKind, v: f64) -> FringeData {
        let m = FringeModel::new(kind, 400.0, v, 20.0, 180.0).unwrap();
        let xs = sweep(19, 180.0);
        let ys: Vec<f64> = xs.iter().map(|&x| m.eval(x)).collect();
        let points = xs
            .iter()
            .zip(&ys)
            .map(|(&angle_deg, &counts)| FringePoint {
                angle_deg,
                counts,
                count_error: 1.0,
            })
            .collect();
        FringeData::new(points, 0.0, kind.n_fold()).unwrap()
    }

    #[test]
    fn noiseless_two_photon_recovery() {
        let fit = fit_fringe(&noiseless(FringeKind::TwoPhoton, 1.0)).unwrap();
        assert!((fit.model.visibility - 1.0).abs() < 1e-6);
        assert!((fit.model.period - 180.0).abs() < 1e-6);
        assert!((fit.model.x_c - 20.0).abs() < 1e-6);
    }

    #[test]
    fn exact_four_photon_curve_fits_at_full_visibility() {
        // the Born curve has zero minima, deeper than the sin² shape can follow
        let pair = SourceParams::maximally_entangled();
        let rho = density_from_pure(&multiphoton_state(&[pair, pair]).unwrap());
        let angles: Vec<f64> = (0..37).map(|i| 10.0 * i as f64).collect();
        for basis in [0.0, 45.0] {
            let p = predict_fringe(&rho, &[basis, basis], &angles, true).unwrap();
            let counts: Vec<f64> = p.iter().map(|q| (1e4 * q).round()).collect();
            let fit = fit_fringe(&FringeData::from_counts(&angles, &counts, basis, 4).unwrap()).unwrap();
            assert!(fit.model.visibility > 0.999, "{basis}: {:?}", fit.model);
            // the shape mismatch shifts the best period a little off 360°
            assert!((fit.model.period - 360.0).abs() < 36.0, "{:?}", fit.model);
        }
    }

    #[test]
    fn noiseless_four_photon_recovery() {
        let fit = fit_fringe(&noiseless(FringeKind::FourPhoton, 0.8)).unwrap();
        assert!((fit.model.visibility - 0.8).abs() < 1e-6, "{:?}", fit.model);
        assert!((fit.model.scale - 400.0).abs() < 1e-4);
    }

    #[test]
    fn fit_rejects_degenerate_data() {
        let xs = sweep(10, 180.0);
        let data = FringeData::from_counts(&xs, &[50.0; 10], 0.0, 2).unwrap();
        assert_eq!(fit_fringe(&data), Err(Error::Degenerate("all counts are equal")));
        let short = FringeData::from_counts(&xs[..5], &[1.0, 2.0, 3.0, 4.0, 5.0], 0.0, 2).unwrap();
        assert!(fit_fringe(&short).is_err());
        assert!(FringeData::from_counts(&[0.0, 0.0], &[1.0, 2.0], 0.0, 2).is_err());
        assert!(FringeData::from_counts(&[0.0], &[1.0], 0.0, 3).is_err());
    }

    #[test]
    fn extrema_visibility_examples() {
        assert!((visibility_from_extrema(100.0, 2.0).unwrap() - 0.9608).abs() < 1e-4);
        assert_eq!(visibility_from_extrema(7.0, 7.0).unwrap(), 0.0);
        assert_eq!(visibility_from_extrema(7.0, 0.0).unwrap(), 1.0);
        assert!(visibility_from_extrema(1.0, 2.0).is_err());
        assert!(visibility_from_extrema(0.0, 0.0).is_err());
        assert!(visibility_from_extrema(1.0, -0.5).is_err());
    }

    #[test]
    fn chsh_examples() {
        let v = chsh_violation(0.961);
        assert!(v.violates && (v.margin - 0.254).abs() < 5e-4);
        let v = chsh_violation(0.930);
        assert!(v.violates && (v.margin - 0.223).abs() < 5e-4);
        let v = chsh_violation(0.5);
        assert!(!v.violates && (v.margin + 0.207).abs() < 5e-4);
        // the bound itself is exactly 1/√2, not 0.707
        assert!(!chsh_violation(0.7071).violates);
        assert!(chsh_violation(0.7071068).violates);
        assert!(!chsh_violation(FRAC_1_SQRT_2).violates);
    }

    proptest! {
        #[test]
        fn prediction_has_half_turn_symmetry(
            eta in 0.0..3.0f64, delta in 0.0..6.3f64, s in -90.0..90.0f64, x in -180.0..180.0f64
        ) {
            let rho = density_from_pure(&crate::qstate::bell_source_state(SourceParams::new(eta, delta).unwrap()));
            let a = predict_fringe(&rho, &[s], &[x], true).unwrap();
            let b = predict_fringe(&rho, &[s + 180.0], &[x + 180.0], true).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-10);
        }

        #[test]
        fn four_photon_shape_symmetry_and_half_period(v in 0.01..1.0f64, d in 0.0..90.0f64) {
            let m = FringeModel::new(FringeKind::FourPhoton, 50.0, v, 10.0, 200.0).unwrap();
            prop_assert!((m.eval(10.0 + d) - m.eval(10.0 - d)).abs() < 1e-9);
            prop_assert!((m.eval(10.0 + d) - m.eval(10.0 + d + 100.0)).abs() < 1e-9);
            // the two-photon shape has no half-period symmetry
            let m2 = FringeModel { kind: FringeKind::TwoPhoton, ..m };
            prop_assume!((d - 50.0).abs() > 1.0 && d > 1.0 && (d - 100.0).abs() > 1.0);
            prop_assert!((m2.eval(10.0 + d) - m2.eval(10.0 + d + 100.0)).abs() > 1e-6);
        }

        #[test]
        fn noiseless_fits_recover_all_parameters(
            v in 0.3..1.0f64, xc in 0.0..40.0f64, four in proptest::bool::ANY
        ) {
            let kind = if four { FringeKind::FourPhoton } else { FringeKind::TwoPhoton };
            let m = FringeModel::new(kind, 250.0, v, xc, 180.0).unwrap();
            let xs = sweep(25, 360.0);
            let ys: Vec<f64> = xs.iter().map(|&x| m.eval(x)).collect();
            let data = FringeData::from_counts(&xs, &ys, 0.0, kind.n_fold()).unwrap();
            let fit = fit_fringe(&data).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            prop_assert!(rel(fit.model.visibility, v) < 1e-6, "{:?}", fit.model);
            prop_assert!(rel(fit.model.scale, 250.0) < 1e-6);
            prop_assert!(rel(fit.model.period, 180.0) < 1e-6);
            let fold = if four { 90.0 } else { 180.0 };
            let dx = (fit.model.x_c - xc).rem_euclid(fold);
            prop_assert!(dx.min(fold - dx) < 1e-6 * fold, "x_c {} vs {}", fit.model.x_c, xc);
        }
    }
}
