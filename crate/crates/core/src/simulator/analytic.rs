//! Closed-form click probabilities for noise-free configurations.

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::optics::analyzer_amplitudes;
use crate::qstate::source_amplitudes;

use super::config::{Analyzer, ExperimentConfig};

/// Born-rule transmission probabilities of one emitted pair through its
/// signal and idler analyzers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairClickProbabilities {
    pub signal: f64,
    pub idler: f64,
    pub both: f64,
}

pub(crate) fn pass_probabilities(pair: [Complex64; 2], signal: &Analyzer, idler: &Analyzer) -> PairClickProbabilities {
    let ks = signal.as_ref().map(analyzer_amplitudes);
    let ki = idler.as_ref().map(analyzer_amplitudes);
    let marginal = |k: &Option<[Complex64; 2]>| match k {
        None => 1.0,
        Some(k) => k[0].norm_sqr() * pair[0].norm_sqr() + k[1].norm_sqr() * pair[1].norm_sqr(),
    };
    let p_s = marginal(&ks);
    let p_i = marginal(&ki);
    let both = match (&ks, &ki) {
        (None, _) => p_i,
        (_, None) => p_s,
        (Some(s), Some(i)) => (s[0].conj() * i[0].conj() * pair[0] + s[1].conj() * i[1].conj() * pair[1]).norm_sqr(),
    };
    PairClickProbabilities {
        signal: p_s.min(1.0),
        idler: p_i.min(1.0),
        both: both.min(p_s).min(p_i),
    }
}

/// Transmission probabilities of channel pair `pair` under `analyzers`.
pub fn pair_click_probabilities(
    config: &ExperimentConfig,
    analyzers: &[Analyzer],
    pair: usize,
) -> Result<PairClickProbabilities> {
    if analyzers.len() != config.n_detectors() {
        return Err(Error::DimensionMismatch {
            expected: config.n_detectors(),
            found: analyzers.len(),
        });
    }
    let p = config
        .channel_pairs
        .get(pair)
        .ok_or_else(|| Error::invalid("pair", "index out of range"))?;
    let amps = source_amplitudes(p.source.eta(), p.source.delta());
    Ok(pass_probabilities(amps, &analyzers[2 * pair], &analyzers[2 * pair + 1]))
}

/// Per-pulse probability that the first `n_fold` detectors all click, for a
/// configuration without crosstalk, jitter or phase drift.
///
/// With Poisson(μ) pairs, survival η and dark probability d, the two clicks
/// of one pair fail together with probability
/// `(1−d)² exp(−μ(q_s + q_i − q_si))`, where `q` are the per-pair detection
/// probabilities; different channel pairs are independent.
pub fn expected_coincidence_probability(
    config: &ExperimentConfig,
    analyzers: &[Analyzer],
    n_fold: usize,
) -> Result<f64> {
    config.validate()?;
    if config.crosstalk_prob != 0.0 || config.angle_jitter_sigma_deg != 0.0 || config.phase_drift_sigma_rad != 0.0 {
        return Err(Error::invalid("config", "closed form requires crosstalk, jitter and drift to be zero"));
    }
    if n_fold == 0 || n_fold % 2 != 0 || n_fold > config.n_detectors() {
        return Err(Error::invalid("n_fold", "must be even and at most the number of detectors"));
    }
    let eta = config.photon_survival()?;
    let d = config.dark_probability();
    let mut total = 1.0;
    for pair in 0..n_fold / 2 {
        let mu = config.channel_pairs[pair].mu;
        let p = pair_click_probabilities(config, analyzers, pair)?;
        let q_s = eta * p.signal;
        let q_i = eta * p.idler;
        let q_si = eta * eta * p.both;
        let none_s = (1.0 - d) * (-mu * q_s).exp();
        let none_i = (1.0 - d) * (-mu * q_i).exp();
        let neither = (1.0 - d) * (1.0 - d) * (-mu * (q_s + q_i - q_si)).exp();
        total *= (1.0 - none_s - none_i + neither).max(0.0);
    }
    Ok(total)
}
