use rayon::prelude::*;
use serde::Serialize;

use sagnac_core::optics::tomography_settings;
use sagnac_core::qstate::{density_from_pure, fidelity, multiphoton_state, validate_density, DensityMatrix};
use sagnac_core::simulator::{tomography_analyzers, tomography_exposure, ExperimentConfig, RunLayout};
use sagnac_core::tomography::{
    mle_reconstruct, monte_carlo_run, summarize_runs, CountRecord, MonteCarloOptions, Resampling,
};

use super::{simulate_block, RunManifest};
use crate::config::ResamplingName;
use crate::error::{Context, Error, Result};
use crate::matrix_io::format_matrix;
use crate::output::{key_value_block, Format, RunDir};
use crate::records::{matrix_json, parse_count_record, write_count_record, write_matrix_part};

#[derive(Debug, Clone, Serialize)]
pub struct TomoSummary {
    pub n_photons: usize,
    pub settings: usize,
    pub total_counts: f64,
    pub exposure: f64,
    pub fidelity: f64,
    pub fidelity_err: f64,
    pub monte_carlo_mean: f64,
    pub monte_carlo_runs: usize,
    pub monte_carlo_failed: usize,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    summary: &'a TomoSummary,
    rho_exp: Vec<Vec<[f64; 2]>>,
    rho_th: Vec<Vec<[f64; 2]>>,
    monte_carlo_fidelities: &'a [f64],
    monte_carlo_failed_runs: &'a [usize],
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct RecordJson {
    settings: Vec<String>,
    counts: Vec<f64>,
    exposure: f64,
}

/// Simulated counts for every tomography setting, one block per setting.
/// With a single partition this matches the core's serial experiment.
pub(crate) fn simulate_record(config: &ExperimentConfig, n_photons: usize, partitions: u32) -> Result<CountRecord> {
    let settings = tomography_settings(n_photons).context("tomography settings")?;
    let counts: Vec<f64> = settings
        .par_iter()
        .enumerate()
        .map(|(i, tuple)| {
            let a = tomography_analyzers(config, tuple);
            simulate_block(config, &a, n_photons, RunLayout::for_setting(i, partitions)).map(|r| r.coincidences as f64)
        })
        .collect::<Result<_>>()?;
    let exposure = tomography_exposure(config, n_photons).context("exposure")?;
    CountRecord::new(settings, counts, exposure).context("count record")
}

pub(crate) fn target_state(config: &ExperimentConfig, n_photons: usize) -> Result<DensityMatrix> {
    let sources: Vec<_> = config.channel_pairs[..n_photons / 2].iter().map(|p| p.source).collect();
    Ok(density_from_pure(&multiphoton_state(&sources).context("target state")?))
}

pub(super) fn run(m: &RunManifest, dir: &mut RunDir) -> Result<String> {
    let t = &m.config.file.tomo;
    let config = m.config.experiment(m.seed)?;
    if t.n_photons != 2 && t.n_photons != 4 {
        return Err(m.config.error("n_photons", "must be 2 or 4"));
    }
    if t.n_photons > config.n_detectors() {
        return Err(m.config.error("n_photons", "more photons than configured detectors"));
    }
    let runs = m.runs.unwrap_or(t.monte_carlo_runs);
    if runs < 2 {
        return Err(m.config.error("monte_carlo_runs", "at least 2 Monte Carlo runs are required"));
    }
    let record = match &t.record_path {
        Some(p) => {
            let path = m.config.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let r = parse_count_record(&text, &path)?;
            if r.n_photons() != t.n_photons {
                return Err(Error::format(&path, 1, format!("record has {} photons, config says {}", r.n_photons(), t.n_photons)));
            }
            r
        }
        None => simulate_record(&config, t.n_photons, m.config.file.experiment.partitions)?,
    };
    let rho_th = target_state(&config, t.n_photons)?;
    let options = MonteCarloOptions {
        runs,
        seed: config.seed,
        resampling: match t.resampling {
            ResamplingName::Gaussian => Resampling::Gaussian,
            ResamplingName::Poisson => Resampling::Poisson,
        },
        ..MonteCarloOptions::default()
    };

    let fit = mle_reconstruct(&record, &options.mle).context("maximum-likelihood reconstruction")?;
    let f = fidelity(&fit.density, &rho_th).context("fidelity")?;
    let outcomes: Vec<_> = (0..runs)
        .into_par_iter()
        .map(|r| monte_carlo_run(&record, &rho_th, &options, r))
        .collect();
    let mc = summarize_runs(&outcomes).context("Monte Carlo")?;
    let diag = validate_density(fit.density.matrix()).context("diagnostics")?;

    let summary = TomoSummary {
        n_photons: t.n_photons,
        settings: record.len(),
        total_counts: record.total_counts(),
        exposure: record.exposure(),
        fidelity: f,
        fidelity_err: mc.std,
        monte_carlo_mean: mc.mean,
        monte_carlo_runs: runs,
        monte_carlo_failed: mc.failed_runs.len(),
        purity: fit.density.purity(),
        min_eigenvalue: diag.min_eigenvalue,
        hermiticity_defect: diag.hermiticity_defect,
        trace_defect: diag.trace_defect,
        objective: fit.objective,
        initial_objective: fit.initial_objective,
        iterations: fit.iterations,
        evaluations: fit.evaluations,
    };

    let rho = fit.density.matrix();
    dir.write("rho_exp.txt", &format_matrix(rho))?;
    dir.write("rho_th.txt", &format_matrix(rho_th.matrix()))?;
    match dir.format {
        Format::Csv => {
            dir.write("record.csv", &write_count_record(&record))?;
            dir.write("rho_exp_re.csv", &write_matrix_part(rho, false))?;
            dir.write("rho_exp_im.csv", &write_matrix_part(rho, true))?;
            dir.write("summary.txt", &key_value_block(&summary))?;
        }
        Format::Json => {
            dir.write_json(
                "record.json",
                &RecordJson {
                    settings: record.settings().iter().map(|s| crate::config::format_setting_tuple(s)).collect(),
                    counts: record.counts().to_vec(),
                    exposure: record.exposure(),
                },
            )?;
            dir.write_json(
                "report.json",
                &ReportJson {
                    summary: &summary,
                    rho_exp: matrix_json(rho),
                    rho_th: matrix_json(rho_th.matrix()),
                    monte_carlo_fidelities: &mc.samples,
                    monte_carlo_failed_runs: &mc.failed_runs,
                    eigenvalues: fit.density.eigenvalues(),
                },
            )?;
        }
    }
    Ok(key_value_block(&summary))
}
