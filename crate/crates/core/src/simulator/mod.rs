//! Pulse-train experiment engine and rate/loss budget.

mod analytic;
mod config;
mod engine;

pub use analytic::{expected_coincidence_probability, pair_click_probabilities, PairClickProbabilities};
pub use config::{Analyzer, ChannelPair, ExperimentConfig, JitterMode};
pub use engine::{
    crosstalk_matrix, run_tomography_experiment, simulate_counts, simulate_counts_with, simulate_partition,
    tomography_analyzers, tomography_exposure, CrosstalkMatrix, RunLayout, SimResult,
};

use num_traits::Float;

use crate::error::{Error, Result};

/// Fraction of photons surviving a loss of `loss_db`.
pub fn survival_probability(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::invalid("loss_db", "must be finite and nonnegative"));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Total loss of a chain of components (labels are informational).
pub fn loss_budget(components: &[(&str, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for (label, db) in components {
        if !(*db >= 0.0) || !db.is_finite() {
            return Err(Error::invalid("loss component", alloc::format!("{label}: {db} dB")));
        }
        total += db;
    }
    Ok(total)
}

/// Source rate implied by an `n_photons`-fold detected rate when every photon
/// suffers `loss_db_per_photon`.
pub fn generation_rate_from_detected(detected_rate: f64, loss_db_per_photon: f64, n_photons: u32) -> Result<f64> {
    if !(detected_rate >= 0.0) {
        return Err(Error::invalid("detected_rate", "must be nonnegative"));
    }
    if n_photons == 0 {
        return Err(Error::invalid("n_photons", "must be at least 1"));
    }
    let survival = survival_probability(loss_db_per_photon * n_photons as f64)?;
    Ok(detected_rate / survival)
}

/// Mean pairs per pulse for a generation rate at repetition rate `rep_rate`.
pub fn pairs_per_pulse(generation_rate: f64, rep_rate: f64) -> Result<f64> {
    if !(rep_rate > 0.0) {
        return Err(Error::invalid("rep_rate", "must be positive"));
    }
    if !(generation_rate >= 0.0) {
        return Err(Error::invalid("generation_rate", "must be nonnegative"));
    }
    Ok(generation_rate / rep_rate)
}
