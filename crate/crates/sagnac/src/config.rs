//! JSON run configuration.
//!
//! Every physical field carries its unit in the name. The document must
//! declare `"schema": 1`; unknown keys are rejected. All sections are
//! optional and fall back to a noise-free single-pair setup.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sagnac_core::qstate::SourceParams;
use sagnac_core::simulator::{loss_budget, ChannelPair, ExperimentConfig, JitterMode};
use sagnac_core::WaveplateSetting;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub fringe: FringeSection,
    #[serde(default)]
    pub tomo: TomoSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub crosstalk: CrosstalkSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            schema: SCHEMA_VERSION,
            experiment: ExperimentSection::default(),
            fringe: FringeSection::default(),
            tomo: TomoSection::default(),
            rates: RatesSection::default(),
            crosstalk: CrosstalkSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossComponent {
    pub label: String,
    pub loss_db: f64,
}

impl LossComponent {
    fn new(label: &str, loss_db: f64) -> Self {
        LossComponent {
            label: label.to_string(),
            loss_db,
        }
    }

    fn is_detector(&self) -> bool {
        self.label.to_ascii_lowercase().contains("detector")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelPairSection {
    pub signal_channel: i64,
    pub idler_channel: i64,
    pub mu: f64,
    /// pump amplitude ratio of the two loop directions
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub delta_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterModeName {
    PerSetting,
    PerPulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub rep_rate_hz: f64,
    pub n_pulses: u64,
    pub channel_pairs: Vec<ChannelPairSection>,
    /// total per-photon loss, detection included; excludes `loss_components_db`
    pub loss_db_per_photon: Option<f64>,
    pub loss_components_db: Option<Vec<LossComponent>>,
    /// separate efficiency factor; forbidden when the loss already covers the detector
    pub detector_efficiency: Option<f64>,
    pub dark_rate_hz: f64,
    pub coincidence_window_s: f64,
    pub angle_jitter_sigma_deg: f64,
    pub jitter_mode: JitterModeName,
    pub phase_drift_sigma_rad: f64,
    pub crosstalk_prob: f64,
    pub seed: u64,
    /// pulse-train partitions per setting; results depend on it, thread count does not
    pub partitions: u32,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            rep_rate_hz: 100e6,
            n_pulses: 10_000_000,
            channel_pairs: vec![ChannelPairSection {
                signal_channel: 1,
                idler_channel: -1,
                mu: 0.0027,
                eta: 1.0,
                delta_rad: 0.0,
            }],
            loss_db_per_photon: None,
            loss_components_db: None,
            detector_efficiency: None,
            dark_rate_hz: 0.0,
            coincidence_window_s: 0.8e-9,
            angle_jitter_sigma_deg: 0.0,
            jitter_mode: JitterModeName::PerSetting,
            phase_drift_sigma_rad: 0.0,
            crosstalk_prob: 0.0,
            seed: 0,
            partitions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FringeSection {
    pub n_fold: usize,
    /// signal polarizer angle
    pub signal_basis_deg: f64,
    /// idler polarizer sweep, inclusive of both ends
    pub sweep_start_deg: f64,
    pub sweep_stop_deg: f64,
    pub sweep_step_deg: f64,
    /// sweep every idler (otherwise only the first pair's)
    pub pairs_scanned_together: bool,
    /// fit this `angle_deg,counts[,err]` file instead of simulating
    pub data_path: Option<PathBuf>,
}

impl Default for FringeSection {
    fn default() -> Self {
        FringeSection {
            n_fold: 2,
            signal_basis_deg: 0.0,
            sweep_start_deg: 0.0,
            sweep_stop_deg: 360.0,
            sweep_step_deg: 10.0,
            pairs_scanned_together: true,
            data_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingName {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomoSection {
    pub n_photons: usize,
    pub monte_carlo_runs: usize,
    pub resampling: ResamplingName,
    /// reconstruct this count-record CSV instead of simulating
    pub record_path: Option<PathBuf>,
}

impl Default for TomoSection {
    fn default() -> Self {
        TomoSection {
            n_photons: 2,
            monte_carlo_runs: 100,
            resampling: ResamplingName::Gaussian,
            record_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateScenario {
    pub name: String,
    pub n_photons: u32,
    pub loss_components_db: Vec<LossComponent>,
    /// exactly one of the two rates is given; the other is derived
    #[serde(default)]
    pub detected_rate_hz: Option<f64>,
    #[serde(default)]
    pub generation_rate_hz: Option<f64>,
    /// defaults to the experiment's repetition rate
    #[serde(default)]
    pub rep_rate_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub scenarios: Vec<RateScenario>,
}

impl Default for RatesSection {
    fn default() -> Self {
        let chain = |filters_db: f64| {
            vec![
                LossComponent::new("grating coupler", 5.0),
                LossComponent::new("state manipulation and measurement", 4.3),
                LossComponent::new("post-filters and WDM", filters_db),
                LossComponent::new("detector", 0.7),
            ]
        };
        RatesSection {
            scenarios: vec![
                RateScenario {
                    name: "two-photon".into(),
                    n_photons: 2,
                    loss_components_db: chain(6.0),
                    detected_rate_hz: None,
                    generation_rate_hz: Some(270e3),
                    rep_rate_hz: None,
                },
                RateScenario {
                    name: "four-photon".into(),
                    n_photons: 4,
                    loss_components_db: chain(5.0),
                    detected_rate_hz: Some(0.34),
                    generation_rate_hz: None,
                    rep_rate_hz: None,
                },
                RateScenario {
                    name: "lossless".into(),
                    n_photons: 2,
                    loss_components_db: Vec::new(),
                    detected_rate_hz: None,
                    generation_rate_hz: Some(270e3),
                    rep_rate_hz: None,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrosstalkSection {
    /// channel-pair indices; all pairs when absent
    pub pairs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// density-matrix text files that must be physical
    pub fixtures: Vec<PathBuf>,
    /// pulses per setting for the engine-versus-oracle check
    pub oracle_pulses: u64,
    /// two-detector setting tuples for the oracle check, e.g. `"out,0,out,45"`
    pub oracle_settings: Vec<String>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            fixtures: Vec::new(),
            oracle_pulses: 2_000_000,
            oracle_settings: ["out,0,out,0", "out,0,out,45", "out,22.5,out,22.5", "out,22.5,out,-22.5"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Parsed configuration with the source text kept for error locations.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    /// `None` for the built-in defaults
    pub path: Option<PathBuf>,
    source: String,
}

impl LoadedConfig {
    pub fn defaults() -> Self {
        LoadedConfig {
            file: ConfigFile::default(),
            path: None,
            source: String::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&source, Some(path.to_path_buf()))
    }

    pub fn parse(source: &str, path: Option<PathBuf>) -> Result<Self> {
        let shown = path.clone().unwrap_or_else(|| PathBuf::from("<config>"));
        let file: ConfigFile = serde_json::from_str(source).map_err(|e| Error::Config {
            path: shown.clone(),
            line: e.line(),
            message: strip_position(&e.to_string()),
        })?;
        let loaded = LoadedConfig {
            file,
            path,
            source: source.to_string(),
        };
        if loaded.file.schema != SCHEMA_VERSION {
            return Err(loaded.error("schema", format!("unsupported schema version {}", loaded.file.schema)));
        }
        Ok(loaded)
    }

    /// Config error pointing at the first line mentioning `key`.
    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        let needle = format!("\"{key}\"");
        let line = self
            .source
            .lines()
            .position(|l| l.contains(&needle))
            .map_or(0, |i| i + 1);
        Error::Config {
            path: self.path.clone().unwrap_or_else(|| PathBuf::from("<defaults>")),
            line,
            message: message.into(),
        }
    }

    /// Resolves a path from the config relative to the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match self.path.as_deref().and_then(Path::parent) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Effective seed: the override when given, else the configured one.
    pub fn seed(&self, seed_override: Option<u64>) -> u64 {
        seed_override.unwrap_or(self.file.experiment.seed)
    }

    /// Builds and validates the simulator configuration.
    pub fn experiment(&self, seed_override: Option<u64>) -> Result<ExperimentConfig> {
        let e = &self.file.experiment;
        let loss_db = match (e.loss_db_per_photon, &e.loss_components_db) {
            (Some(_), Some(_)) => {
                return Err(self.error(
                    "loss_components_db",
                    "give either loss_db_per_photon or loss_components_db, not both",
                ))
            }
            (Some(total), None) => {
                if e.detector_efficiency.is_some() {
                    return Err(self.error(
                        "detector_efficiency",
                        "loss_db_per_photon already includes detection; detector_efficiency would count it twice",
                    ));
                }
                total
            }
            (None, Some(parts)) => {
                if e.detector_efficiency.is_some() && parts.iter().any(LossComponent::is_detector) {
                    return Err(self.error(
                        "detector_efficiency",
                        "a detector loss component and detector_efficiency cannot both be given",
                    ));
                }
                let parts: Vec<(&str, f64)> = parts.iter().map(|c| (c.label.as_str(), c.loss_db)).collect();
                loss_budget(&parts).map_err(|err| self.error("loss_components_db", err.to_string()))?
            }
            (None, None) => 0.0,
        };
        if e.partitions == 0 {
            return Err(self.error("partitions", "must be at least 1"));
        }
        let mut channel_pairs = Vec::with_capacity(e.channel_pairs.len());
        for p in &e.channel_pairs {
            let source = SourceParams::new(p.eta, p.delta_rad).map_err(|err| self.error("eta", err.to_string()))?;
            channel_pairs.push(ChannelPair {
                signal_channel: p.signal_channel,
                idler_channel: p.idler_channel,
                mu: p.mu,
                source,
            });
        }
        let config = ExperimentConfig {
            rep_rate_hz: e.rep_rate_hz,
            n_pulses: e.n_pulses,
            channel_pairs,
            loss_db_per_photon: loss_db,
            detector_efficiency: e.detector_efficiency.unwrap_or(1.0),
            dark_rate_hz: e.dark_rate_hz,
            coincidence_window_s: e.coincidence_window_s,
            angle_jitter_sigma_deg: e.angle_jitter_sigma_deg,
            jitter_mode: match e.jitter_mode {
                JitterModeName::PerSetting => JitterMode::PerSetting,
                JitterModeName::PerPulse => JitterMode::PerPulse,
            },
            phase_drift_sigma_rad: e.phase_drift_sigma_rad,
            crosstalk_prob: e.crosstalk_prob,
            seed: self.seed(seed_override),
        };
        config.validate().map_err(|err| {
            let key = match &err {
                sagnac_core::Error::InvalidParameter { name, .. } => *name,
                sagnac_core::Error::WindowTooLong { .. } => "coincidence_window_s",
                _ => "experiment",
            };
            self.error(key, err.to_string())
        })?;
        Ok(config)
    }
}

/// serde_json appends " at line L column C"; the line is reported separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// Parses one setting tuple: `qwp,hwp` degree pairs per photon separated by
/// commas, with `out` for a removed QWP.
pub fn parse_setting_tuple(text: &str) -> std::result::Result<Vec<WaveplateSetting>, String> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.is_empty() || fields.len() % 2 != 0 {
        return Err(format!("`{text}`: expected qwp,hwp pairs"));
    }
    fields
        .chunks(2)
        .map(|c| {
            let qwp = match c[0] {
                "out" => None,
                q => Some(q.parse::<f64>().map_err(|_| format!("`{q}` is not an angle"))?),
            };
            let hwp = c[1].parse::<f64>().map_err(|_| format!("`{}` is not an angle", c[1]))?;
            WaveplateSetting::new(qwp, hwp).map_err(|e| e.to_string())
        })
        .collect()
}

/// Inverse of [`parse_setting_tuple`].
pub fn format_setting_tuple(settings: &[WaveplateSetting]) -> String {
    settings
        .iter()
        .map(|s| match s.qwp {
            Some(q) => format!("{q},{}", s.hwp),
            None => format!("out,{}", s.hwp),
        })
        .collect::<Vec<_>>()
        .join(",")
}
