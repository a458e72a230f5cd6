use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::optics::WaveplateSetting;
use crate::qstate::SourceParams;

use super::survival_probability;

/// Analyzer in front of one detector. `None` means no polarizer: every
/// photon that survives the loss reaches the detector.
pub type Analyzer = Option<WaveplateSetting>;

/// One signal/idler channel pair. Channel ids are DWDM slot numbers; pairs
/// whose signal (or idler) ids differ by one are adjacent for crosstalk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPair {
    pub signal_channel: i64,
    pub idler_channel: i64,
    /// mean pairs per pulse
    pub mu: f64,
    pub source: SourceParams,
}

/// When waveplate-angle jitter is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JitterMode {
    /// one offset per waveplate per setting, i.e. a miscalibrated rotation mount
    #[default]
    PerSetting,
    /// a fresh offset for every analyzed pair
    PerPulse,
}

/// Parameters of a simulated run. Detectors are numbered photon-wise: pair
/// `c` owns detector `2c` (signal) and `2c + 1` (idler).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rep_rate_hz: f64,
    pub n_pulses: u64,
    pub channel_pairs: Vec<ChannelPair>,
    /// total system and detection loss per photon
    pub loss_db_per_photon: f64,
    /// extra detector efficiency factor; keep at 1 when the efficiency is part of the loss
    pub detector_efficiency: f64,
    pub dark_rate_hz: f64,
    pub coincidence_window_s: f64,
    pub angle_jitter_sigma_deg: f64,
    pub jitter_mode: JitterMode,
    pub phase_drift_sigma_rad: f64,
    pub crosstalk_prob: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Noise-free single-pair configuration at 100 MHz with a 0.8 ns window.
    pub fn single_pair(mu: f64, source: SourceParams, n_pulses: u64) -> Self {
        ExperimentConfig {
            rep_rate_hz: 100e6,
            n_pulses,
            channel_pairs: alloc::vec![ChannelPair {
                signal_channel: 1,
                idler_channel: -1,
                mu,
                source,
            }],
            loss_db_per_photon: 0.0,
            detector_efficiency: 1.0,
            dark_rate_hz: 0.0,
            coincidence_window_s: 0.8e-9,
            angle_jitter_sigma_deg: 0.0,
            jitter_mode: JitterMode::PerSetting,
            phase_drift_sigma_rad: 0.0,
            crosstalk_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        let nonneg = |name, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be nonnegative, got {v}")))
            }
        };
        positive("rep_rate_hz", self.rep_rate_hz)?;
        positive("coincidence_window_s", self.coincidence_window_s)?;
        nonneg("loss_db_per_photon", self.loss_db_per_photon)?;
        nonneg("dark_rate_hz", self.dark_rate_hz)?;
        nonneg("angle_jitter_sigma_deg", self.angle_jitter_sigma_deg)?;
        nonneg("phase_drift_sigma_rad", self.phase_drift_sigma_rad)?;
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::invalid("detector_efficiency", "must lie in (0, 1]"));
        }
        if !(self.crosstalk_prob >= 0.0 && self.crosstalk_prob < 1.0) {
            return Err(Error::invalid("crosstalk_prob", "must lie in [0, 1)"));
        }
        let period = 1.0 / self.rep_rate_hz;
        if self.coincidence_window_s >= period {
            return Err(Error::WindowTooLong {
                window_s: self.coincidence_window_s,
                period_s: period,
            });
        }
        if self.channel_pairs.is_empty() {
            return Err(Error::invalid("channel_pairs", "at least one pair is required"));
        }
        for (i, p) in self.channel_pairs.iter().enumerate() {
            if !(p.mu >= 0.0) || !p.mu.is_finite() {
                return Err(Error::invalid("mu", format!("pair {i}: must be finite and nonnegative")));
            }
            if p.signal_channel == p.idler_channel {
                return Err(Error::invalid("channel_pairs", format!("pair {i}: signal and idler share a channel")));
            }
        }
        let mut ids: Vec<i64> = self
            .channel_pairs
            .iter()
            .flat_map(|p| [p.signal_channel, p.idler_channel])
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("channel_pairs", "a channel id is used twice"));
        }
        Ok(())
    }

    pub fn n_detectors(&self) -> usize {
        2 * self.channel_pairs.len()
    }

    /// Probability that a photon reaching a detector's input is registered.
    pub fn photon_survival(&self) -> Result<f64> {
        Ok(survival_probability(self.loss_db_per_photon)? * self.detector_efficiency)
    }

    /// Dark-click probability per detector per pulse slot.
    pub fn dark_probability(&self) -> f64 {
        (self.dark_rate_hz * self.coincidence_window_s).min(1.0)
    }

    pub fn pulse_period_s(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    /// Detectors on the same side whose channel id is adjacent to `detector`'s.
    pub fn adjacent_detectors(&self, detector: usize) -> Vec<usize> {
        let side = detector % 2;
        let id = self.channel_id(detector);
        (0..self.n_detectors())
            .filter(|&d| d % 2 == side && (self.channel_id(d) - id).abs() == 1)
            .collect()
    }

    pub fn channel_id(&self, detector: usize) -> i64 {
        let p = &self.channel_pairs[detector / 2];
        if detector % 2 == 0 {
            p.signal_channel
        } else {
            p.idler_channel
        }
    }
}
