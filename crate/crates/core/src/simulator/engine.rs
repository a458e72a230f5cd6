//! Stochastic pulse-slot engine.
//!
//! Each channel pair emits in a pulse with probability `1 − e^{−μ}` (then a
//! zero-truncated Poisson number of pairs), and each detector dark-clicks
//! with probability `dark_rate · window`. Only pulses in which something
//! happens are visited: every such process keeps its own geometric gap to
//! its next active pulse.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::optics::{tomography_settings, WaveplateSetting};
use crate::qstate::source_amplitudes;
use crate::rng::{geometric_gap, standard_normal, stream_rng, truncated_poisson, SimRng};
use crate::tomography::CountRecord;

use super::analytic::pass_probabilities;
use super::config::{Analyzer, ExperimentConfig, JitterMode};

/// Click statistics of one analyzer setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_pulses: u64,
    pub n_fold: usize,
    /// pulses in which the first `n_fold` detectors all clicked
    pub coincidences: u64,
    /// pulses in which each detector clicked
    pub singles: Vec<u64>,
    /// `n_det × n_det`, row-major: pulses in which both detectors clicked
    pub twofold: Vec<u64>,
    pub elapsed_s: f64,
}

impl SimResult {
    fn empty(n_detectors: usize, n_fold: usize) -> Self {
        SimResult {
            n_pulses: 0,
            n_fold,
            coincidences: 0,
            singles: vec![0; n_detectors],
            twofold: vec![0; n_detectors * n_detectors],
            elapsed_s: 0.0,
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.singles.len()
    }

    pub fn twofold(&self, a: usize, b: usize) -> u64 {
        self.twofold[a * self.n_detectors() + b]
    }

    /// Adds the counts of a disjoint stretch of the same experiment.
    pub fn merge(&mut self, other: &SimResult) -> Result<()> {
        if other.n_detectors() != self.n_detectors() || other.n_fold != self.n_fold {
            return Err(Error::DimensionMismatch {
                expected: self.n_detectors(),
                found: other.n_detectors(),
            });
        }
        self.n_pulses += other.n_pulses;
        self.coincidences += other.coincidences;
        for (a, b) in self.singles.iter_mut().zip(&other.singles) {
            *a += b;
        }
        for (a, b) in self.twofold.iter_mut().zip(&other.twofold) {
            *a += b;
        }
        self.elapsed_s += other.elapsed_s;
        Ok(())
    }

    /// Expected n-fold count from uncorrelated singles, `N · Π (S_j / N)`.
    pub fn accidental_estimate(&self) -> f64 {
        if self.n_pulses == 0 {
            return 0.0;
        }
        let n = self.n_pulses as f64;
        self.singles[..self.n_fold]
            .iter()
            .fold(n, |acc, &s| acc * (s as f64 / n))
    }

    pub fn coincidence_rate_hz(&self) -> f64 {
        if self.elapsed_s > 0.0 {
            self.coincidences as f64 / self.elapsed_s
        } else {
            0.0
        }
    }
}

/// How a run is split into independently seeded partitions. `block`
/// separates runs that share a seed, such as the settings of one tomography
/// scan. Results depend on `(seed, block, partitions)` and not on the order in
/// which partitions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLayout {
    pub partitions: u32,
    pub block: u32,
}

impl Default for RunLayout {
    fn default() -> Self {
        RunLayout { partitions: 1, block: 0 }
    }
}

impl RunLayout {
    /// Layout used for setting `index` of [`run_tomography_experiment`].
    pub fn for_setting(index: usize, partitions: u32) -> Self {
        RunLayout {
            partitions,
            block: index as u32 + 1,
        }
    }

    fn stream(&self, slot: u32) -> u64 {
        ((self.block as u64) << 32) | slot as u64
    }
}

fn check_inputs(config: &ExperimentConfig, analyzers: &[Analyzer], n_fold: usize, layout: &RunLayout) -> Result<()> {
    config.validate()?;
    if analyzers.len() != config.n_detectors() {
        return Err(Error::DimensionMismatch {
            expected: config.n_detectors(),
            found: analyzers.len(),
        });
    }
    if n_fold == 0 || n_fold % 2 != 0 || n_fold > config.n_detectors() {
        return Err(Error::invalid("n_fold", "must be even and at most the number of detectors"));
    }
    if layout.partitions == 0 || layout.partitions == u32::MAX {
        return Err(Error::invalid("partitions", "must be at least 1"));
    }
    Ok(())
}

fn jitter(setting: &WaveplateSetting, sigma: f64, rng: &mut SimRng) -> WaveplateSetting {
    let dq = sigma * standard_normal(rng);
    let dh = sigma * standard_normal(rng);
    WaveplateSetting {
        qwp: setting.qwp.map(|q| q + dq),
        hwp: setting.hwp + dh,
    }
}

/// Analyzers as actually mounted for this setting (per-setting jitter).
fn mounted_analyzers(config: &ExperimentConfig, analyzers: &[Analyzer], layout: &RunLayout) -> Vec<Analyzer> {
    let sigma = config.angle_jitter_sigma_deg;
    if sigma == 0.0 || config.jitter_mode != JitterMode::PerSetting {
        return analyzers.to_vec();
    }
    let mut rng = stream_rng(config.seed, layout.stream(0));
    analyzers
        .iter()
        .map(|a| a.as_ref().map(|s| jitter(s, sigma, &mut rng)))
        .collect()
}

struct Engine<'a> {
    config: &'a ExperimentConfig,
    analyzers: Vec<Analyzer>,
    adjacent: Vec<Vec<usize>>,
    survival: f64,
    n_fold: usize,
}

impl Engine<'_> {
    fn route(&self, detector: usize, rng: &mut SimRng) -> Option<usize> {
        let x = self.config.crosstalk_prob;
        if x == 0.0 || rng.random::<f64>() >= x {
            return Some(detector);
        }
        let adj = &self.adjacent[detector];
        if adj.is_empty() {
            None
        } else {
            Some(adj[rng.random_range(0..adj.len())])
        }
    }

    fn analyzer(&self, detector: usize, rng: &mut SimRng) -> Analyzer {
        let a = self.analyzers[detector];
        match (a, self.config.jitter_mode) {
            (Some(s), JitterMode::PerPulse) if self.config.angle_jitter_sigma_deg > 0.0 => {
                Some(jitter(&s, self.config.angle_jitter_sigma_deg, rng))
            }
            _ => a,
        }
    }

    fn emit_pair(&self, pair: usize, amps: [Complex64; 2], fired: &mut [bool], rng: &mut SimRng) {
        let dest_s = self.route(2 * pair, rng);
        let dest_i = self.route(2 * pair + 1, rng);
        let a_s = dest_s.map(|d| self.analyzer(d, rng)).unwrap_or(None);
        let a_i = dest_i.map(|d| self.analyzer(d, rng)).unwrap_or(None);
        let p = pass_probabilities(amps, &a_s, &a_i);
        let signal_pass = rng.random::<f64>() < p.signal;
        let idler_given = if signal_pass {
            if p.signal > 0.0 {
                p.both / p.signal
            } else {
                0.0
            }
        } else if p.signal < 1.0 {
            (p.idler - p.both) / (1.0 - p.signal)
        } else {
            0.0
        };
        let idler_pass = rng.random::<f64>() < idler_given;
        if let Some(d) = dest_s {
            if signal_pass && rng.random::<f64>() < self.survival {
                fired[d] = true;
            }
        }
        if let Some(d) = dest_i {
            if idler_pass && rng.random::<f64>() < self.survival {
                fired[d] = true;
            }
        }
    }

    fn run(&self, n_pulses: u64, rng: &mut SimRng) -> SimResult {
        let cfg = self.config;
        let n_pairs = cfg.channel_pairs.len();
        let n_det = cfg.n_detectors();
        let mut rates: Vec<f64> = cfg.channel_pairs.iter().map(|p| -(-p.mu).exp_m1()).collect();
        let dark = cfg.dark_probability();
        rates.extend(core::iter::repeat_n(dark, n_det));
        let mut next: Vec<u64> = rates.iter().map(|&p| geometric_gap(rng, p)).collect();
        let mut out = SimResult::empty(n_det, self.n_fold);
        out.n_pulses = n_pulses;
        out.elapsed_s = n_pulses as f64 / cfg.rep_rate_hz;
        let mut fired = vec![false; n_det];
        loop {
            let t = *next.iter().min().expect("at least one process");
            if t >= n_pulses {
                break;
            }
            fired.iter_mut().for_each(|f| *f = false);
            let mut drift = None;
            for c in 0..n_pairs {
                if next[c] != t {
                    continue;
                }
                let params = cfg.channel_pairs[c];
                let shift = *drift.get_or_insert_with(|| {
                    if cfg.phase_drift_sigma_rad > 0.0 {
                        cfg.phase_drift_sigma_rad * standard_normal(rng)
                    } else {
                        0.0
                    }
                });
                let amps = source_amplitudes(params.source.eta(), params.source.delta() + shift);
                let k = truncated_poisson(rng, params.mu);
                for _ in 0..k {
                    self.emit_pair(c, amps, &mut fired, rng);
                }
            }
            for j in 0..n_det {
                if next[n_pairs + j] == t {
                    fired[j] = true;
                }
            }
            for (k, n) in next.iter_mut().enumerate() {
                if *n == t {
                    *n = t.saturating_add(1).saturating_add(geometric_gap(rng, rates[k]));
                }
            }
            for a in 0..n_det {
                if !fired[a] {
                    continue;
                }
                out.singles[a] += 1;
                for b in (a + 1)..n_det {
                    if fired[b] {
                        out.twofold[a * n_det + b] += 1;
                        out.twofold[b * n_det + a] += 1;
                    }
                }
            }
            for a in 0..n_det {
                out.twofold[a * n_det + a] = out.singles[a];
            }
            if fired[..self.n_fold].iter().all(|&f| f) {
                out.coincidences += 1;
            }
        }
        out
    }
}

fn build_engine<'a>(
    config: &'a ExperimentConfig,
    analyzers: &[Analyzer],
    n_fold: usize,
    layout: &RunLayout,
) -> Result<Engine<'a>> {
    check_inputs(config, analyzers, n_fold, layout)?;
    Ok(Engine {
        config,
        analyzers: mounted_analyzers(config, analyzers, layout),
        adjacent: (0..config.n_detectors()).map(|d| config.adjacent_detectors(d)).collect(),
        survival: config.photon_survival()?,
        n_fold,
    })
}

/// Partition `index` of the run described by `layout`; merging all
/// partitions in index order gives [`simulate_counts_with`].
pub fn simulate_partition(
    config: &ExperimentConfig,
    analyzers: &[Analyzer],
    n_fold: usize,
    layout: RunLayout,
    index: u32,
) -> Result<SimResult> {
    let engine = build_engine(config, analyzers, n_fold, &layout)?;
    if index >= layout.partitions {
        return Err(Error::invalid("partition", "index out of range"));
    }
    let bound = |i: u32| (config.n_pulses as u128 * i as u128 / layout.partitions as u128) as u64;
    let pulses = bound(index + 1) - bound(index);
    let mut rng = stream_rng(config.seed, layout.stream(index + 1));
    Ok(engine.run(pulses, &mut rng))
}

/// Runs the full pulse train serially, partition by partition.
pub fn simulate_counts_with(
    config: &ExperimentConfig,
    analyzers: &[Analyzer],
    n_fold: usize,
    layout: RunLayout,
) -> Result<SimResult> {
    check_inputs(config, analyzers, n_fold, &layout)?;
    let mut total = SimResult::empty(config.n_detectors(), n_fold);
    for i in 0..layout.partitions {
        total.merge(&simulate_partition(config, analyzers, n_fold, layout, i)?)?;
    }
    Ok(total)
}

/// One waveplate setting per detector, single partition.
pub fn simulate_counts(config: &ExperimentConfig, settings: &[WaveplateSetting], n_fold: usize) -> Result<SimResult> {
    let analyzers: Vec<Analyzer> = settings.iter().copied().map(Some).collect();
    simulate_counts_with(config, &analyzers, n_fold, RunLayout::default())
}

/// Normalization `N` of simulated tomography counts: pulses times the
/// probability that every involved pair emits, times the survival of all
/// `n_photons` photons. Exact in the low-μ limit.
pub fn tomography_exposure(config: &ExperimentConfig, n_photons: usize) -> Result<f64> {
    let eta = config.photon_survival()?;
    let emit: f64 = config.channel_pairs[..n_photons / 2]
        .iter()
        .map(|p| -(-p.mu).exp_m1())
        .product();
    Ok(config.n_pulses as f64 * emit * eta.powi(n_photons as i32))
}

/// Analyzers for tomography setting `tuple` on the first photons; the
/// remaining detectors are left without polarizers.
pub fn tomography_analyzers(config: &ExperimentConfig, tuple: &[WaveplateSetting]) -> Vec<Analyzer> {
    let mut a: Vec<Analyzer> = tuple.iter().copied().map(Some).collect();
    a.resize(config.n_detectors(), None);
    a
}

/// One simulated run per setting of the `n_photons`-photon tomography basis,
/// each with the full pulse budget.
pub fn run_tomography_experiment(config: &ExperimentConfig, n_photons: usize) -> Result<CountRecord> {
    config.validate()?;
    if n_photons == 0 || n_photons % 2 != 0 || n_photons > config.n_detectors() {
        return Err(Error::invalid("n_photons", "must be even and covered by the configured channel pairs"));
    }
    let settings = tomography_settings(n_photons)?;
    let mut counts = Vec::with_capacity(settings.len());
    for (i, tuple) in settings.iter().enumerate() {
        let analyzers = tomography_analyzers(config, tuple);
        let r = simulate_counts_with(config, &analyzers, n_photons, RunLayout::for_setting(i, 1))?;
        counts.push(r.coincidences as f64);
    }
    let exposure = tomography_exposure(config, n_photons)?;
    CountRecord::new(settings, counts, exposure)
}

/// Two-fold coincidences between signal and idler detectors of different pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    pub signal_channels: Vec<i64>,
    pub idler_channels: Vec<i64>,
    /// `counts[a][b]`: signal detector of pair `a` with idler detector of pair `b`
    pub counts: Vec<Vec<u64>>,
    pub rates_hz: Vec<Vec<f64>>,
    pub elapsed_s: f64,
}

/// Simulated two-fold rates for every signal × idler combination of the
/// listed channel pairs, with all polarizers removed.
pub fn crosstalk_matrix(config: &ExperimentConfig, pairs: &[usize]) -> Result<CrosstalkMatrix> {
    config.validate()?;
    if pairs.len() < 2 {
        return Err(Error::invalid("pairs", "at least two channel pairs are required"));
    }
    if pairs.iter().any(|&p| p >= config.channel_pairs.len()) {
        return Err(Error::invalid("pairs", "index out of range"));
    }
    let analyzers = vec![None; config.n_detectors()];
    let r = simulate_counts_with(config, &analyzers, 2, RunLayout::default())?;
    let counts: Vec<Vec<u64>> = pairs
        .iter()
        .map(|&a| pairs.iter().map(|&b| r.twofold(2 * a, 2 * b + 1)).collect())
        .collect();
    let rates_hz = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / r.elapsed_s).collect())
        .collect();
    Ok(CrosstalkMatrix {
        signal_channels: pairs.iter().map(|&p| config.channel_pairs[p].signal_channel).collect(),
        idler_channels: pairs.iter().map(|&p| config.channel_pairs[p].idler_channel).collect(),
        counts,
        rates_hz,
        elapsed_s: r.elapsed_s,
    })
}
