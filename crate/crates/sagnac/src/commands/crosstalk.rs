use serde::Serialize;

use sagnac_core::simulator::crosstalk_matrix;

use super::RunManifest;
use crate::error::{Context, Result};
use crate::output::{key_value_block, Format, RunDir};
use crate::records::{write_crosstalk, CrosstalkJson};

#[derive(Serialize)]
struct CrosstalkSummary {
    pairs: usize,
    elapsed_s: f64,
    matched_rate_hz: f64,
    /// largest signal × idler rate between different pairs
    max_cross_rate_hz: f64,
    /// `max_cross_rate_hz / matched_rate_hz`, 0 without matched counts
    max_cross_ratio: f64,
}

pub(super) fn run(m: &RunManifest, dir: &mut RunDir) -> Result<String> {
    let config = m.config.experiment(m.seed)?;
    let pairs: Vec<usize> = match &m.config.file.crosstalk.pairs {
        Some(p) => p.clone(),
        None => (0..config.channel_pairs.len()).collect(),
    };
    if pairs.len() < 2 {
        return Err(m.config.error("pairs", "crosstalk needs at least two channel pairs"));
    }
    if let Some(&bad) = pairs.iter().find(|&&p| p >= config.channel_pairs.len()) {
        return Err(m.config.error("pairs", format!("pair index {bad} is out of range")));
    }
    let mx = crosstalk_matrix(&config, &pairs).context("crosstalk")?;
    let n = pairs.len();
    let matched = (0..n).map(|a| mx.rates_hz[a][a]).sum::<f64>() / n as f64;
    let cross = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| mx.rates_hz[a][b])
        .fold(0.0, f64::max);
    let summary = CrosstalkSummary {
        pairs: n,
        elapsed_s: mx.elapsed_s,
        matched_rate_hz: matched,
        max_cross_rate_hz: cross,
        max_cross_ratio: if matched > 0.0 { cross / matched } else { 0.0 },
    };
    match dir.format {
        Format::Csv => dir.write("crosstalk.csv", &write_crosstalk(&mx))?,
        Format::Json => dir.write_json("crosstalk.json", &CrosstalkJson::from(&mx))?,
    }
    Ok(key_value_block(&summary))
}
