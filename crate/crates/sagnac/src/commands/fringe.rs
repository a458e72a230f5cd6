use rayon::prelude::*;
use serde::Serialize;

use sagnac_core::fringes::{chsh_violation, fit_fringe, FringeData, FringeFit};
use sagnac_core::simulator::{Analyzer, ExperimentConfig, RunLayout, SimResult};
use sagnac_core::WaveplateSetting;

use super::{simulate_block, RunManifest};
use crate::error::{Context, Result};
use crate::output::{key_value_block, Format, RunDir};
use crate::records::{parse_fringe_data, write_fringe_data, SimResultJson};

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub n_fold: usize,
    pub signal_basis_deg: f64,
    pub points: usize,
    pub visibility: f64,
    pub visibility_err: f64,
    pub visibility_lo_3sigma: f64,
    pub visibility_hi_3sigma: f64,
    pub scale_counts: f64,
    pub scale_err_counts: f64,
    pub x_c_deg: f64,
    pub x_c_err_deg: f64,
    pub period_deg: f64,
    pub period_err_deg: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub chsh_violation: bool,
    pub chsh_margin: f64,
}

impl FitSummary {
    pub fn new(data: &FringeData, fit: &FringeFit) -> Self {
        let (lo, hi) = fit.visibility_interval(3.0);
        let chsh = chsh_violation(fit.model.visibility);
        FitSummary {
            n_fold: data.n_fold,
            signal_basis_deg: data.signal_basis_deg,
            points: data.points().len(),
            visibility: fit.model.visibility,
            visibility_err: fit.errors.visibility,
            visibility_lo_3sigma: lo,
            visibility_hi_3sigma: hi,
            scale_counts: fit.model.scale,
            scale_err_counts: fit.errors.scale,
            x_c_deg: fit.model.x_c,
            x_c_err_deg: fit.errors.x_c,
            period_deg: fit.model.period,
            period_err_deg: fit.errors.period,
            residual_norm: fit.residual_norm,
            iterations: fit.iterations,
            chsh_violation: chsh.violates,
            chsh_margin: chsh.margin,
        }
    }
}

/// Analyzers for one sweep point: polarizers on the first `n_fold / 2`
/// pairs, nothing in front of the remaining detectors.
pub(crate) fn sweep_analyzers(
    config: &ExperimentConfig,
    n_fold: usize,
    signal_deg: f64,
    idler_deg: f64,
    together: bool,
) -> Vec<Analyzer> {
    let mut a: Vec<Analyzer> = vec![None; config.n_detectors()];
    for k in 0..n_fold / 2 {
        let idler = if together || k == 0 { idler_deg } else { signal_deg };
        a[2 * k] = Some(WaveplateSetting::polarizer(signal_deg));
        a[2 * k + 1] = Some(WaveplateSetting::polarizer(idler));
    }
    a
}

fn sweep_grid(m: &RunManifest) -> Result<Vec<f64>> {
    let f = &m.config.file.fringe;
    if !(f.sweep_step_deg > 0.0) || !(f.sweep_stop_deg > f.sweep_start_deg) {
        return Err(m
            .config
            .error("sweep_step_deg", "sweep needs a positive step and stop > start"));
    }
    let n = ((f.sweep_stop_deg - f.sweep_start_deg) / f.sweep_step_deg + 1e-9).floor() as usize + 1;
    if n < 6 {
        return Err(m.config.error("sweep_step_deg", format!("sweep has {n} points, at least 6 are needed")));
    }
    Ok((0..n).map(|i| f.sweep_start_deg + i as f64 * f.sweep_step_deg).collect())
}

#[derive(Serialize)]
struct SweepJson<'a> {
    angle_deg: Vec<f64>,
    counts: Vec<f64>,
    err: Vec<f64>,
    runs: &'a [SimResultJson],
}

pub(super) fn run(m: &RunManifest, dir: &mut RunDir) -> Result<String> {
    let f = &m.config.file.fringe;
    if f.n_fold != 2 && f.n_fold != 4 {
        return Err(m.config.error("n_fold", "must be 2 or 4"));
    }
    let (data, runs) = match &f.data_path {
        Some(p) => {
            let path = m.config.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|e| crate::error::Error::io(&path, e))?;
            (parse_fringe_data(&text, &path, f.signal_basis_deg, f.n_fold)?, Vec::new())
        }
        None => {
            let config = m.config.experiment(m.seed)?;
            if f.n_fold > config.n_detectors() {
                return Err(m.config.error("n_fold", "more photons than configured detectors"));
            }
            let angles = sweep_grid(m)?;
            let partitions = m.config.file.experiment.partitions;
            let runs: Vec<SimResult> = angles
                .par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let a = sweep_analyzers(&config, f.n_fold, f.signal_basis_deg, x, f.pairs_scanned_together);
                    simulate_block(&config, &a, f.n_fold, RunLayout::for_setting(i, partitions))
                })
                .collect::<Result<_>>()?;
            let counts: Vec<f64> = runs.iter().map(|r| r.coincidences as f64).collect();
            let data = FringeData::from_counts(&angles, &counts, f.signal_basis_deg, f.n_fold).context("sweep")?;
            (data, runs)
        }
    };
    let fit = fit_fringe(&data).context("fringe fit")?;
    let summary = FitSummary::new(&data, &fit);
    let runs: Vec<SimResultJson> = runs.iter().map(SimResultJson::from).collect();
    match dir.format {
        Format::Csv => {
            dir.write("sweep.csv", &write_fringe_data(&data))?;
            dir.write("fit.txt", &key_value_block(&summary))?;
        }
        Format::Json => {
            let p = data.points();
            dir.write_json(
                "sweep.json",
                &SweepJson {
                    angle_deg: p.iter().map(|p| p.angle_deg).collect(),
                    counts: p.iter().map(|p| p.counts).collect(),
                    err: p.iter().map(|p| p.count_error).collect(),
                    runs: &runs,
                },
            )?;
            dir.write_json("fit.json", &summary)?;
        }
    }
    Ok(key_value_block(&summary))
}
