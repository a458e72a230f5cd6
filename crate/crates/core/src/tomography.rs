//! State reconstruction from coincidence counts.
//!
//! [`linear_inversion`] solves the Born-rule equations directly and may return
//! a non-physical matrix. [`mle_reconstruct`] minimizes the Gaussian-approximated
//! count likelihood
//!
//! ```text
//! L(t) = Σ_i (n_i − N p_i(t))² / (2 N p_i(t)),   p_i(t) = Tr(ρ(t) P_i)
//! ```
//!
//! over a lower-triangular parameterization `ρ(t) = T†T / Tr(T†T)`, which is
//! Hermitian, positive semidefinite and unit-trace for every `t`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, hermitian_eigh, least_squares, CMatrix};
use crate::optics::{measurement_probability, multi_projector, WaveplateSetting};
use crate::qstate::{fidelity, validate_density, DensityMatrix, DensityReport};
use crate::rng::{poisson, standard_normal, stream_rng};

/// Lower bound applied to predicted probabilities inside the likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Measured (or simulated) counts for a list of analyzer settings.
///
/// `exposure` is the normalization `N` such that the expected count of
/// setting `i` is `N · Tr(ρ P_i)`. Counts are stored as `f64`; measured
/// records hold integers, expected-count fixtures may not.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    settings: Vec<Vec<WaveplateSetting>>,
    counts: Vec<f64>,
    exposure: f64,
}

impl CountRecord {
    pub fn new(settings: Vec<Vec<WaveplateSetting>>, counts: Vec<f64>, exposure: f64) -> Result<Self> {
        if settings.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: settings.len(),
                found: counts.len(),
            });
        }
        if settings.is_empty() {
            return Err(Error::invalid("settings", "record is empty"));
        }
        let n = settings[0].len();
        if n == 0 || settings.iter().any(|s| s.len() != n) {
            return Err(Error::invalid("settings", "every tuple needs one setting per photon"));
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("counts", "must be finite and nonnegative"));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(Error::invalid("exposure", "must be positive"));
        }
        Ok(CountRecord {
            settings,
            counts,
            exposure,
        })
    }

    /// Noiseless record with `counts_i = exposure · Tr(ρ P_i)`.
    pub fn expected(
        rho: &DensityMatrix,
        settings: Vec<Vec<WaveplateSetting>>,
        exposure: f64,
    ) -> Result<Self> {
        let counts = settings
            .iter()
            .map(|s| Ok(exposure * measurement_probability(rho, &multi_projector(s)?)?.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(settings, counts, exposure)
    }

    /// Record with `counts_i ~ Poisson(exposure · Tr(ρ P_i))` drawn from stream 0 of `seed`.
    pub fn sample_poisson(
        rho: &DensityMatrix,
        settings: Vec<Vec<WaveplateSetting>>,
        exposure: f64,
        seed: u64,
    ) -> Result<Self> {
        let expected = Self::expected(rho, settings, exposure)?;
        let mut rng = stream_rng(seed, 0);
        let counts = expected
            .counts
            .iter()
            .map(|&m| poisson(&mut rng, m) as f64)
            .collect();
        Self::new(expected.settings, counts, exposure)
    }

    pub fn settings(&self) -> &[Vec<WaveplateSetting>] {
        &self.settings
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn n_photons(&self) -> usize {
        self.settings[0].len()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Same settings and exposure with different counts.
    pub fn with_counts(&self, counts: Vec<f64>) -> Result<Self> {
        Self::new(self.settings.clone(), counts, self.exposure)
    }

    /// The same record listed in canonical order.
    pub fn canonical(&self) -> CountRecord {
        let order = self.canonical_order();
        CountRecord {
            settings: order.iter().map(|&i| self.settings[i].clone()).collect(),
            counts: order.iter().map(|&i| self.counts[i]).collect(),
            exposure: self.exposure,
        }
    }

    /// Indices in a canonical order (settings lexicographic, then counts), so
    /// that reconstruction does not depend on how the record was listed.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            compare_tuples(&self.settings[a], &self.settings[b])
                .then_with(|| self.counts[a].total_cmp(&self.counts[b]))
        });
        idx
    }
}

fn compare_tuples(a: &[WaveplateSetting], b: &[WaveplateSetting]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = match (x.qwp, y.qwp) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(p), Some(q)) => p.total_cmp(&q),
        }
        .then_with(|| x.hwp.total_cmp(&y.hwp));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// Parameters of a lower-triangular `T` (real diagonal, complex below it):
/// the `d` diagonal entries first, then `(re, im)` of `T[j][k]` for `j > k`
/// in row-major order. `4^n` reals in total.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParams(pub Vec<f64>);

impl CholeskyParams {
    pub fn dim(&self) -> Result<usize> {
        let len = self.0.len();
        let d = (len as f64).sqrt().round() as usize;
        if d * d != len || d < 2 || !d.is_power_of_two() {
            return Err(Error::invalid("t", "length must be 4^n"));
        }
        Ok(d)
    }

    pub fn lower_triangular(&self) -> Result<CMatrix> {
        let d = self.dim()?;
        let mut t = CMatrix::zeros(d, d);
        for j in 0..d {
            t[(j, j)] = Complex64::new(self.0[j], 0.0);
        }
        let mut k = d;
        for row in 0..d {
            for col in 0..row {
                t[(row, col)] = Complex64::new(self.0[k], self.0[k + 1]);
                k += 2;
            }
        }
        Ok(t)
    }

    /// Parameters of a lower-triangular matrix; the imaginary part of the
    /// diagonal is dropped.
    pub fn from_lower_triangular(t: &CMatrix) -> Self {
        let d = t.rows();
        let mut out = Vec::with_capacity(d * d);
        for j in 0..d {
            out.push(t[(j, j)].re);
        }
        for row in 0..d {
            for col in 0..row {
                out.push(t[(row, col)].re);
                out.push(t[(row, col)].im);
            }
        }
        CholeskyParams(out)
    }

    /// Parameters whose `T†T` equals the positive definite `rho`.
    pub fn from_density(rho: &CMatrix) -> Result<Self> {
        let d = rho.rows();
        // reverse-order Cholesky: J ρ J = L L†  ⇒  ρ = (J L J)(J L J)†, and T = (J L J)†
        let flipped = CMatrix::from_fn(d, d, |r, c| rho[(d - 1 - r, d - 1 - c)]);
        let l = cholesky_lower(&flipped)?;
        let upper = CMatrix::from_fn(d, d, |r, c| l[(d - 1 - r, d - 1 - c)]);
        Ok(Self::from_lower_triangular(&upper.adjoint()))
    }

    /// `T†T / Tr(T†T)`.
    pub fn density(&self) -> Result<DensityMatrix> {
        let t = self.lower_triangular()?;
        let a = (&t.adjoint() * &t).hermitian_part();
        let tr = a.trace().re;
        if !(tr > 0.0) {
            return Err(Error::Degenerate("T†T has zero trace"));
        }
        Ok(DensityMatrix::from_matrix_unchecked(a.scale_real(1.0 / tr)))
    }
}

/// Least-squares solution of `N · Tr(ρ P_i) = n_i` over Hermitian `ρ`,
/// rescaled to unit trace. Positive semidefiniteness is not enforced.
pub fn linear_inversion(record: &CountRecord) -> Result<CMatrix> {
    let n = record.n_photons();
    let d = 1usize << n;
    let unknowns = d * d;
    let m = record.len();
    let mut a = vec![0.0; m * unknowns];
    for (i, s) in record.settings().iter().enumerate() {
        let proj = multi_projector(s)?;
        let k = proj.ket().amplitudes();
        let row = &mut a[i * unknowns..(i + 1) * unknowns];
        let exposure = record.exposure();
        for j in 0..d {
            row[j] = exposure * k[j].norm_sqr();
        }
        let mut col = d;
        for j in 0..d {
            for l in (j + 1)..d {
                let p = k[j] * k[l].conj();
                row[col] = exposure * 2.0 * p.re;
                row[col + 1] = exposure * 2.0 * p.im;
                col += 2;
            }
        }
    }
    let x = least_squares(&a, m, unknowns, record.counts())?;
    let mut rho = CMatrix::zeros(d, d);
    for j in 0..d {
        rho[(j, j)] = Complex64::new(x[j], 0.0);
    }
    let mut col = d;
    for j in 0..d {
        for l in (j + 1)..d {
            let z = Complex64::new(x[col], x[col + 1]);
            rho[(j, l)] = z;
            rho[(l, j)] = z.conj();
            col += 2;
        }
    }
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Degenerate("linear inversion produced a nonpositive trace"));
    }
    Ok(rho.scale_real(1.0 / tr))
}

/// Nearest unit-trace PSD matrix in the eigenbasis: negative eigenvalues are
/// clipped to zero and the rest renormalized.
pub fn psd_projection(rho: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigh(rho)?;
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("matrix has no positive eigenvalue"));
    }
    let scaled: Vec<f64> = clipped.iter().map(|v| v / total).collect();
    let out = &(&vectors * &CMatrix::diagonal(&scaled)) * &vectors.adjoint();
    Ok(out.hermitian_part())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Objective-and-gradient evaluation budget; `None` selects 5·10⁴ for up
    /// to two photons and 5·10⁵ beyond.
    pub max_evaluations: Option<usize>,
    /// Weight of `I/d` mixed into the starting point so its Cholesky factor exists.
    pub init_mixing: f64,
    pub probability_floor: f64,
    /// L-BFGS memory length.
    pub history: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_evaluations: None,
            init_mixing: 1e-3,
            probability_floor: PROBABILITY_FLOOR,
            history: 12,
        }
    }
}

impl MleOptions {
    fn budget(&self, n_photons: usize) -> usize {
        self.max_evaluations
            .unwrap_or(if n_photons <= 2 { 50_000 } else { 500_000 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub density: DensityMatrix,
    pub params: CholeskyParams,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Record data laid out for repeated likelihood evaluation.
struct Likelihood {
    dim: usize,
    kets: Vec<Vec<Complex64>>,
    counts: Vec<f64>,
    exposure: f64,
    floor: f64,
}

impl Likelihood {
    fn new(record: &CountRecord, floor: f64) -> Result<Self> {
        let order = record.canonical_order();
        let mut kets = Vec::with_capacity(order.len());
        let mut counts = Vec::with_capacity(order.len());
        for &i in &order {
            kets.push(multi_projector(&record.settings()[i])?.ket().amplitudes().to_vec());
            counts.push(record.counts()[i]);
        }
        Ok(Likelihood {
            dim: 1 << record.n_photons(),
            kets,
            counts,
            exposure: record.exposure(),
            floor,
        })
    }

    fn check(&self, t: &CholeskyParams) -> Result<()> {
        let d = t.dim()?;
        if d != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim * self.dim,
                found: t.0.len(),
            });
        }
        Ok(())
    }

    /// `(L, ∂L/∂t)`; the gradient is skipped when `want_gradient` is false.
    fn evaluate(&self, t: &CholeskyParams, want_gradient: bool) -> Result<(f64, Vec<f64>)> {
        let d = self.dim;
        let tm = t.lower_triangular()?;
        let a = &tm.adjoint() * &tm;
        let tau = a.trace().re;
        if !(tau > 0.0) {
            return Err(Error::Degenerate("T†T has zero trace"));
        }
        let rho = a.scale_real(1.0 / tau);
        let n = self.exposure;
        let mut value = 0.0;
        let mut weights = Vec::with_capacity(self.kets.len());
        let mut tr_g_rho = 0.0;
        for (k, &count) in self.kets.iter().zip(&self.counts) {
            let raw = rho.quadratic_form(k).re;
            let (p, floored) = if raw < self.floor {
                (self.floor, true)
            } else {
                (raw, false)
            };
            let r = count - n * p;
            value += r * r / (2.0 * n * p);
            let w = if floored {
                0.0
            } else {
                -r / p - r * r / (2.0 * n * p * p)
            };
            tr_g_rho += w * raw;
            weights.push(w);
        }
        if !want_gradient {
            return Ok((value, Vec::new()));
        }
        // H = (Σ w_i P_i − Tr(Gρ) I) / τ,  ∂L/∂T_jk ↔ 2·(T H)_jk
        let mut h = CMatrix::zeros(d, d);
        for (k, &w) in self.kets.iter().zip(&weights) {
            if w == 0.0 {
                continue;
            }
            for r in 0..d {
                let kr = k[r] * w;
                for c in 0..d {
                    h[(r, c)] += kr * k[c].conj();
                }
            }
        }
        for j in 0..d {
            h[(j, j)] -= Complex64::new(tr_g_rho, 0.0);
        }
        let m = (&tm * &h).scale_real(2.0 / tau);
        let mut grad = Vec::with_capacity(d * d);
        for j in 0..d {
            grad.push(m[(j, j)].re);
        }
        for row in 0..d {
            for col in 0..row {
                grad.push(m[(row, col)].re);
                grad.push(m[(row, col)].im);
            }
        }
        Ok((value, grad))
    }
}

/// Likelihood objective `L(t)` for `record`.
pub fn mle_objective(t: &CholeskyParams, record: &CountRecord) -> Result<f64> {
    let lik = Likelihood::new(record, PROBABILITY_FLOOR)?;
    lik.check(t)?;
    lik.evaluate(t, false).map(|(v, _)| v)
}

/// Analytic gradient of [`mle_objective`] with respect to `t`.
pub fn mle_gradient(t: &CholeskyParams, record: &CountRecord) -> Result<Vec<f64>> {
    let lik = Likelihood::new(record, PROBABILITY_FLOOR)?;
    lik.check(t)?;
    lik.evaluate(t, true).map(|(_, g)| g)
}

/// Deterministic starting point: regularized Cholesky factor of the
/// PSD-projected linear-inversion estimate.
pub fn initial_params(record: &CountRecord, init_mixing: f64) -> Result<CholeskyParams> {
    let lin = linear_inversion(record)?;
    let psd = psd_projection(&lin)?;
    let d = psd.rows();
    let eps = init_mixing.clamp(1e-12, 1.0);
    let mixed = &psd.scale_real(1.0 - eps) + &CMatrix::identity(d).scale_real(eps / d as f64);
    CholeskyParams::from_density(&mixed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Physically constrained maximum-likelihood reconstruction (L-BFGS with
/// Armijo backtracking, so the objective never increases).
pub fn mle_reconstruct(record: &CountRecord, options: &MleOptions) -> Result<MleResult> {
    if !(record.total_counts() > 0.0) {
        return Err(Error::Degenerate("record has no counts"));
    }
    let record = &record.canonical();
    let lik = Likelihood::new(record, options.probability_floor)?;
    let budget = options.budget(record.n_photons());
    let mut x = initial_params(record, options.init_mixing)?;
    let (mut f, mut g) = lik.evaluate(&x, true)?;
    let initial_objective = f;
    let mut evaluations = 1;
    let mut iterations = 0;
    let memory = options.history.max(1);
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_y: Vec<Vec<f64>> = Vec::new();
    let mut stalls = 0;

    loop {
        let gnorm = dot(&g, &g).sqrt();
        let xnorm = dot(&x.0, &x.0).sqrt();
        if gnorm * xnorm <= 1e-12 * (1.0 + f) {
            break;
        }
        if evaluations >= budget {
            return Err(Error::OptimizerBudget {
                evaluations,
                objective: f,
                gradient_norm: gnorm,
            });
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = vec![0.0; hist_s.len()];
        for i in (0..hist_s.len()).rev() {
            let rho_i = 1.0 / dot(&hist_y[i], &hist_s[i]);
            alphas[i] = rho_i * dot(&hist_s[i], &q);
            for (qv, yv) in q.iter_mut().zip(&hist_y[i]) {
                *qv -= alphas[i] * yv;
            }
        }
        let gamma = match (hist_s.last(), hist_y.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => xnorm.max(1e-3) / gnorm,
        };
        for qv in q.iter_mut() {
            *qv *= gamma;
        }
        for i in 0..hist_s.len() {
            let rho_i = 1.0 / dot(&hist_y[i], &hist_s[i]);
            let beta = rho_i * dot(&hist_y[i], &q);
            for (qv, sv) in q.iter_mut().zip(&hist_s[i]) {
                *qv += (alphas[i] - beta) * sv;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist_s.clear();
            hist_y.clear();
            dir = g.iter().map(|v| -v * xnorm.max(1e-3) / gnorm).collect();
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = CholeskyParams(x.0.iter().zip(&dir).map(|(a, b)| a + step * b).collect());
            evaluations += 1;
            if let Ok((ft, gt)) = lik.evaluate(&trial, true) {
                if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((x_new, f_new, g_new)) = accepted else {
            if hist_s.is_empty() {
                // steepest descent cannot make progress at this precision
                break;
            }
            hist_s.clear();
            hist_y.clear();
            continue;
        };
        let s: Vec<f64> = x_new.0.iter().zip(&x.0).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let decrease = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist_s.len() == memory {
                hist_s.remove(0);
                hist_y.remove(0);
            }
            hist_s.push(s);
            hist_y.push(y);
        }
        if decrease <= 1e-15 * f.abs().max(f64::MIN_POSITIVE) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    // rescale to unit norm; ρ(t) is unchanged
    let norm = dot(&x.0, &x.0).sqrt();
    let params = CholeskyParams(x.0.iter().map(|v| v / norm).collect());
    let density = params.density()?;
    Ok(MleResult {
        density,
        params,
        objective: f,
        initial_objective,
        iterations,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampling {
    /// `n' ~ round(max(0, Normal(n, √n)))`
    Gaussian,
    /// `n' ~ Poisson(n)`
    Poisson,
    /// `n' = n`
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    pub runs: usize,
    pub seed: u64,
    pub resampling: Resampling,
    pub mle: MleOptions,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            runs: 100,
            seed: 0,
            resampling: Resampling::Gaussian,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub mean: f64,
    /// sample standard deviation (n − 1 denominator)
    pub std: f64,
    /// fidelity of each successful run, in run order
    pub samples: Vec<f64>,
    pub failed_runs: Vec<usize>,
}

/// Counts of one Monte Carlo replica. Run `i` draws from stream `i + 1` of
/// the seed, so replicas can be produced in any order.
pub fn resample_counts(record: &CountRecord, resampling: Resampling, seed: u64, run: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, run as u64 + 1);
    record
        .counts()
        .iter()
        .map(|&n| match resampling {
            Resampling::None => n,
            Resampling::Poisson => poisson(&mut rng, n) as f64,
            Resampling::Gaussian => (n + n.sqrt() * standard_normal(&mut rng)).max(0.0).round(),
        })
        .collect()
}

/// Fidelity of one resampled reconstruction against `rho_th`.
pub fn monte_carlo_run(
    record: &CountRecord,
    rho_th: &DensityMatrix,
    options: &MonteCarloOptions,
    run: usize,
) -> Result<f64> {
    let counts = resample_counts(record, options.resampling, options.seed, run);
    let replica = record.with_counts(counts)?;
    let fit = mle_reconstruct(&replica, &options.mle)?;
    fidelity(&fit.density, rho_th)
}

/// Combines per-run outcomes (in run order) into a summary.
pub fn summarize_runs(outcomes: &[Result<f64>]) -> Result<MonteCarloSummary> {
    let runs = outcomes.len();
    let mut samples = Vec::with_capacity(runs);
    let mut failed_runs = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Ok(f) => samples.push(*f),
            Err(_) => failed_runs.push(i),
        }
    }
    if failed_runs.len() * 10 > runs || samples.len() < 2 {
        return Err(Error::MonteCarloFailures {
            failed: failed_runs.len(),
            runs,
        });
    }
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0);
    Ok(MonteCarloSummary {
        mean,
        std: var.sqrt(),
        samples,
        failed_runs,
    })
}

/// Monte Carlo fidelity error bar: resample the counts, re-run
/// [`mle_reconstruct`], and collect the fidelities against `rho_th`.
pub fn monte_carlo_fidelity(
    record: &CountRecord,
    rho_th: &DensityMatrix,
    options: &MonteCarloOptions,
) -> Result<MonteCarloSummary> {
    if options.runs < 2 {
        return Err(Error::invalid("runs", "at least 2 Monte Carlo runs are required"));
    }
    let outcomes: Vec<Result<f64>> = (0..options.runs)
        .map(|run| monte_carlo_run(record, rho_th, options, run))
        .collect();
    summarize_runs(&outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyReport {
    pub reconstruction: MleResult,
    /// `Tr(ρ_exp ρ_th)` of the reconstruction from the unperturbed record
    pub fidelity: f64,
    pub monte_carlo: MonteCarloSummary,
    pub diagnostics: DensityReport,
}

pub fn tomography_report(
    record: &CountRecord,
    rho_th: &DensityMatrix,
    options: &MonteCarloOptions,
) -> Result<TomographyReport> {
    let reconstruction = mle_reconstruct(record, &options.mle)?;
    let fidelity = fidelity(&reconstruction.density, rho_th)?;
    let monte_carlo = monte_carlo_fidelity(record, rho_th, options)?;
    let diagnostics = validate_density(reconstruction.density.matrix())?;
    Ok(TomographyReport {
        reconstruction,
        fidelity,
        monte_carlo,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::tomography_settings;
    use crate::qstate::{bell_phi_plus, bell_source_state, density_from_pure, SourceParams, StateVector};
    use rand::Rng;

    fn bell() -> DensityMatrix {
        density_from_pure(&bell_phi_plus())
    }

    fn noiseless(rho: &DensityMatrix, exposure: f64) -> CountRecord {
        CountRecord::expected(rho, tomography_settings(rho.n_photons()).unwrap(), exposure).unwrap()
    }

    #[test]
    fn record_validation() {
        let s = tomography_settings(1).unwrap();
        assert!(CountRecord::new(s.clone(), vec![1.0; 3], 1.0).is_err());
        assert!(CountRecord::new(s.clone(), vec![-1.0, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(CountRecord::new(s.clone(), vec![1.0; 4], 0.0).is_err());
        assert!(CountRecord::new(s, vec![1.0; 4], 10.0).is_ok());
    }

    #[test]
    fn linear_inversion_recovers_exact_states() {
        let rho = bell();
        let est = linear_inversion(&noiseless(&rho, 1e4)).unwrap();
        assert!(est.max_abs_diff(rho.matrix()) < 1e-8);

        let hh = density_from_pure(&StateVector::basis(2, 0).unwrap());
        let est = linear_inversion(&noiseless(&hh, 1e4)).unwrap();
        assert!(est.max_abs_diff(hh.matrix()) < 1e-8);
    }

    #[test]
    fn linear_inversion_rejects_incomplete_sets() {
        use WaveplateSetting as W;
        let settings = vec![vec![W::H, W::H], vec![W::H, W::V], vec![W::V, W::H], vec![W::V, W::V]];
        let record = CountRecord::expected(&bell(), settings, 100.0).unwrap();
        assert!(matches!(linear_inversion(&record), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn noisy_linear_inversion_can_be_unphysical() {
        // with the four-state basis the smallest eigenvalue sits around −0.18
        // at this exposure (cross-checked with an independent least-squares solve)
        let settings = tomography_settings(2).unwrap();
        let mut ev = Vec::new();
        for seed in 0..20 {
            let record = CountRecord::sample_poisson(&bell(), settings.clone(), 100.0, seed).unwrap();
            let est = linear_inversion(&record).unwrap();
            let r = validate_density(&est).unwrap();
            assert!(r.is_hermitian() && r.has_unit_trace());
            ev.push(r.min_eigenvalue);
        }
        ev.sort_by(f64::total_cmp);
        assert!(ev[19] < 0.0, "{ev:?}");
        assert!(ev[10] > -0.3 && ev[0] > -0.6, "{ev:?}");
    }

    #[test]
    fn cholesky_params_round_trip() {
        let psi = bell_source_state(SourceParams::new(0.6, 1.1).unwrap());
        let pure = density_from_pure(&psi);
        let mixed = &pure.matrix().scale_real(0.8) + &CMatrix::identity(4).scale_real(0.05);
        let t = CholeskyParams::from_density(&mixed).unwrap();
        assert_eq!(t.0.len(), 16);
        let tm = t.lower_triangular().unwrap();
        for r in 0..4 {
            for c in (r + 1)..4 {
                assert_eq!(tm[(r, c)], Complex64::new(0.0, 0.0));
            }
        }
        assert!(t.density().unwrap().matrix().max_abs_diff(&mixed) < 1e-12);
    }

    #[test]
    fn objective_vanishes_at_truth_and_is_scale_invariant() {
        let psi = bell_source_state(SourceParams::new(0.8, 0.4).unwrap());
        let rho = &density_from_pure(&psi).matrix().scale_real(0.9) + &CMatrix::identity(4).scale_real(0.025);
        let truth = DensityMatrix::from_matrix(rho.clone()).unwrap();
        let record = noiseless(&truth, 5000.0);
        let t = CholeskyParams::from_density(&rho).unwrap();
        assert!(mle_objective(&t, &record).unwrap() < 1e-9);

        let other = CholeskyParams((0..16).map(|i| 0.1 + 0.05 * i as f64).collect());
        let base = mle_objective(&other, &record).unwrap();
        for k in [0.01, 3.0, 250.0] {
            let scaled = CholeskyParams(other.0.iter().map(|v| v * k).collect());
            let v = mle_objective(&scaled, &record).unwrap();
            assert!((v - base).abs() <= 1e-9 * base);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let record = CountRecord::sample_poisson(&bell(), tomography_settings(2).unwrap(), 1000.0, 9).unwrap();
        let mut rng = stream_rng(4, 0);
        let t = CholeskyParams((0..16).map(|_| rng.random::<f64>() - 0.3).collect());
        let g = mle_gradient(&t, &record).unwrap();
        let h = 1e-6;
        for i in 0..16 {
            let mut up = t.clone();
            up.0[i] += h;
            let mut dn = t.clone();
            dn.0[i] -= h;
            let fd = (mle_objective(&up, &record).unwrap() - mle_objective(&dn, &record).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "component {i}: {fd} vs {}", g[i]);
        }
        // O(ε²) error of the central difference
        let i = 5;
        let err = |h: f64| {
            let mut up = t.clone();
            up.0[i] += h;
            let mut dn = t.clone();
            dn.0[i] -= h;
            ((mle_objective(&up, &record).unwrap() - mle_objective(&dn, &record).unwrap()) / (2.0 * h) - g[i]).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e2 < e1 * 0.35, "{e1} {e2}");
    }

    #[test]
    fn gradient_sign_agrees_with_probes() {
        let record = CountRecord::sample_poisson(&bell(), tomography_settings(2).unwrap(), 500.0, 2).unwrap();
        let mut rng = stream_rng(5, 0);
        let mut agree = 0;
        let probes = 200;
        for _ in 0..probes {
            let t = CholeskyParams((0..16).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
            let dir: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let g = mle_gradient(&t, &record).unwrap();
            let h = 1e-6;
            let up = CholeskyParams(t.0.iter().zip(&dir).map(|(a, b)| a + h * b).collect());
            let dn = CholeskyParams(t.0.iter().zip(&dir).map(|(a, b)| a - h * b).collect());
            let fd = mle_objective(&up, &record).unwrap() - mle_objective(&dn, &record).unwrap();
            if (fd > 0.0) == (dot(&g, &dir) > 0.0) {
                agree += 1;
            }
        }
        assert!(agree * 100 >= probes * 95, "{agree}/{probes}");
    }

    #[test]
    fn mle_on_noiseless_bell_counts() {
        let rho = bell();
        let fit = mle_reconstruct(&noiseless(&rho, 1e4), &MleOptions::default()).unwrap();
        let f = fidelity(&fit.density, &rho).unwrap();
        assert!(f >= 1.0 - 1e-6, "fidelity {f}");
        assert!(fit.objective <= fit.initial_objective);
        assert!(validate_density(fit.density.matrix()).unwrap().is_valid());
    }

    #[test]
    fn mle_agrees_with_linear_inversion_on_noiseless_data() {
        let psi = bell_source_state(SourceParams::new(0.7, 0.9).unwrap());
        let rho = DensityMatrix::from_matrix(
            &density_from_pure(&psi).matrix().scale_real(0.85) + &CMatrix::identity(4).scale_real(0.0375),
        )
        .unwrap();
        let record = noiseless(&rho, 2e4);
        let lin = linear_inversion(&record).unwrap();
        let fit = mle_reconstruct(&record, &MleOptions::default()).unwrap();
        assert!(fit.density.matrix().max_abs_diff(&lin) < 1e-6);
    }

    #[test]
    fn mle_noisy_bell_fidelity() {
        let record = CountRecord::sample_poisson(&bell(), tomography_settings(2).unwrap(), 1e4, 11).unwrap();
        let fit = mle_reconstruct(&record, &MleOptions::default()).unwrap();
        assert!(fidelity(&fit.density, &bell()).unwrap() >= 0.99);
        assert!(fit.objective <= fit.initial_objective);
    }

    #[test]
    fn mle_is_invariant_to_record_order() {
        let record = CountRecord::sample_poisson(&bell(), tomography_settings(2).unwrap(), 300.0, 3).unwrap();
        let n = record.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let shuffled = CountRecord::new(
            perm.iter().map(|&i| record.settings()[i].clone()).collect(),
            perm.iter().map(|&i| record.counts()[i]).collect(),
            record.exposure(),
        )
        .unwrap();
        let a = mle_reconstruct(&record, &MleOptions::default()).unwrap();
        let b = mle_reconstruct(&shuffled, &MleOptions::default()).unwrap();
        assert!(a.density.matrix().max_abs_diff(b.density.matrix()) <= 1e-9);
    }

    #[test]
    fn mle_rejects_empty_record() {
        let s = tomography_settings(2).unwrap();
        let record = CountRecord::new(s, vec![0.0; 16], 10.0).unwrap();
        assert!(mle_reconstruct(&record, &MleOptions::default()).is_err());
    }

    #[test]
    fn monte_carlo_without_resampling_has_zero_spread() {
        let record = noiseless(&bell(), 1e4);
        let opts = MonteCarloOptions {
            runs: 5,
            resampling: Resampling::None,
            ..Default::default()
        };
        let mc = monte_carlo_fidelity(&record, &bell(), &opts).unwrap();
        assert_eq!(mc.std, 0.0);
        assert_eq!(mc.samples.len(), 5);
        let opts = MonteCarloOptions { runs: 1, ..opts };
        assert!(monte_carlo_fidelity(&record, &bell(), &opts).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_reproducible() {
        let record = CountRecord::sample_poisson(&bell(), tomography_settings(2).unwrap(), 1e4, 1).unwrap();
        let opts = MonteCarloOptions {
            runs: 8,
            seed: 42,
            ..Default::default()
        };
        let a = monte_carlo_fidelity(&record, &bell(), &opts).unwrap();
        let b = monte_carlo_fidelity(&record, &bell(), &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.std > 0.0 && a.std < 0.03);
        // run-order independence
        let single = monte_carlo_run(&record, &bell(), &opts, 5).unwrap();
        assert_eq!(single, a.samples[5]);
    }

    #[test]
    fn summarize_rejects_many_failures() {
        let mut outcomes: Vec<Result<f64>> = (0..10).map(|_| Ok(0.9)).collect();
        outcomes[0] = Err(Error::Degenerate("x"));
        assert!(summarize_runs(&outcomes).is_ok());
        outcomes[1] = Err(Error::Degenerate("x"));
        assert!(matches!(
            summarize_runs(&outcomes),
            Err(Error::MonteCarloFailures { failed: 2, runs: 10 })
        ));
    }

    #[test]
    fn report_on_noiseless_record() {
        let record = noiseless(&bell(), 1e4);
        let opts = MonteCarloOptions {
            runs: 4,
            resampling: Resampling::None,
            ..Default::default()
        };
        let rep = tomography_report(&record, &bell(), &opts).unwrap();
        assert!((rep.fidelity - 1.0).abs() < 1e-6);
        assert!(rep.diagnostics.is_valid());
    }
}
