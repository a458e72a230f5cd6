use serde::Serialize;

use sagnac_core::simulator::{generation_rate_from_detected, loss_budget, pairs_per_pulse, survival_probability};

use super::RunManifest;
use crate::error::Result;
use crate::output::{key_value_block, Format, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub scenario: String,
    pub n_photons: u32,
    pub loss_db_per_photon: f64,
    /// probability that all `n_photons` photons survive
    pub survival_all: f64,
    pub detected_rate_hz: f64,
    pub generation_rate_hz: f64,
    pub rep_rate_hz: f64,
    pub pairs_per_pulse: f64,
}

pub(crate) fn rate_rows(m: &RunManifest) -> Result<Vec<RateRow>> {
    let cfg = &m.config;
    let default_rep = cfg.file.experiment.rep_rate_hz;
    let mut rows = Vec::new();
    for s in &cfg.file.rates.scenarios {
        let bad = |msg: String| cfg.error("scenarios", format!("scenario `{}`: {msg}", s.name));
        let parts: Vec<(&str, f64)> = s.loss_components_db.iter().map(|c| (c.label.as_str(), c.loss_db)).collect();
        let loss = loss_budget(&parts).map_err(|e| bad(e.to_string()))?;
        if s.n_photons == 0 {
            return Err(bad("n_photons must be at least 1".into()));
        }
        let survival = survival_probability(loss * s.n_photons as f64).map_err(|e| bad(e.to_string()))?;
        let (detected, generated) = match (s.detected_rate_hz, s.generation_rate_hz) {
            (Some(d), None) => (d, generation_rate_from_detected(d, loss, s.n_photons).map_err(|e| bad(e.to_string()))?),
            (None, Some(g)) if g >= 0.0 => (g * survival, g),
            (None, Some(_)) => return Err(bad("generation_rate_hz must be nonnegative".into())),
            _ => return Err(bad("give exactly one of detected_rate_hz and generation_rate_hz".into())),
        };
        let rep = s.rep_rate_hz.unwrap_or(default_rep);
        rows.push(RateRow {
            scenario: s.name.clone(),
            n_photons: s.n_photons,
            loss_db_per_photon: loss,
            survival_all: survival,
            detected_rate_hz: detected,
            generation_rate_hz: generated,
            rep_rate_hz: rep,
            pairs_per_pulse: pairs_per_pulse(generated, rep).map_err(|e| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

pub(super) fn run(m: &RunManifest, dir: &mut RunDir) -> Result<String> {
    let rows = rate_rows(m)?;
    match dir.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).expect("in-memory write");
            }
            let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output");
            dir.write("rates.csv", &text)?;
        }
        Format::Json => dir.write_json("rates.json", &rows)?,
    }
    let mut out = String::new();
    for r in &rows {
        for line in key_value_block(r).lines().skip(1) {
            out.push_str(&format!("{}.{line}\n", r.scenario));
        }
    }
    Ok(out)
}
