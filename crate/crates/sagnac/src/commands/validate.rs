//! Reduced-scale invariant suite: every check runs against the loaded
//! configuration where it has a say (source state, loss, darks, seed).

use serde::Serialize;

use sagnac_core::fringes::{fit_fringe, predict_fringe, visibility_of, FringeData, FringeKind, FringeModel};
use sagnac_core::optics::tomography_settings;
use sagnac_core::qstate::{bell_phi_plus, density_from_pure, fidelity, validate_density};
use sagnac_core::simulator::{
    expected_coincidence_probability, generation_rate_from_detected, loss_budget, pairs_per_pulse,
    run_tomography_experiment, simulate_counts_with, Analyzer, ExperimentConfig, RunLayout,
};
use sagnac_core::tomography::{
    linear_inversion, mle_reconstruct, monte_carlo_fidelity, CountRecord, MleOptions, MonteCarloOptions,
};

use super::tomo::{simulate_record, target_state};
use super::{simulate_block, RunManifest};
use crate::config::parse_setting_tuple;
use crate::error::{Error, Result};
use crate::matrix_io::read_matrix;
use crate::output::{Format, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, f: impl FnOnce() -> std::result::Result<String, String>) -> Check {
    let name = name.into();
    match f() {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

fn ensure(ok: bool, detail: String) -> std::result::Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn show<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Allowed |z| for the engine-versus-closed-form comparison. One seed per
/// setting here, so the bound is looser than the multi-seed test suite's.
const ORACLE_Z: f64 = 4.0;

fn rate_arithmetic() -> std::result::Result<String, String> {
    let two = loss_budget(&[("coupler", 5.0), ("analysis", 4.3), ("filters", 6.0), ("detector", 0.7)]).map_err(show)?;
    let four = loss_budget(&[("coupler", 5.0), ("analysis", 4.3), ("filters", 5.0), ("detector", 0.7)]).map_err(show)?;
    let gen = generation_rate_from_detected(0.34, 15.0, 4).map_err(show)?;
    let ppp = pairs_per_pulse(270e3, 100e6).map_err(show)?;
    ensure(
        (two - 16.0).abs() < 1e-12 && (four - 15.0).abs() < 1e-12 && (gen / 340e3 - 1.0).abs() < 0.01 && ppp == 0.0027,
        format!("{two} dB, {four} dB, {:.1} kHz, {ppp} per pulse", gen / 1e3),
    )
}

fn ideal_fringes() -> std::result::Result<String, String> {
    let rho = density_from_pure(&bell_phi_plus());
    let sweep: Vec<f64> = (0..=360).map(f64::from).collect();
    let mut worst: f64 = 0.0;
    for basis in [0.0, 45.0] {
        let p = predict_fringe(&rho, &[basis], &sweep, true).map_err(show)?;
        worst = worst.max((visibility_of(&p).map_err(show)? - 1.0).abs());
    }
    ensure(worst < 1e-9, format!("max |V - 1| = {worst:.1e}"))
}

fn noiseless_fit() -> std::result::Result<String, String> {
    let angles: Vec<f64> = (0..37).map(|i| 10.0 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for kind in [FringeKind::TwoPhoton, FringeKind::FourPhoton] {
        for v in [0.6, 1.0] {
            let truth = FringeModel::new(kind, 500.0, v, 20.0, 180.0).map_err(show)?;
            let counts: Vec<f64> = angles.iter().map(|&x| truth.eval(x)).collect();
            let data = FringeData::from_counts(&angles, &counts, 0.0, kind.n_fold()).map_err(show)?;
            let fit = fit_fringe(&data).map_err(show)?;
            worst = worst.max((fit.model.visibility - v).abs() / v);
        }
    }
    ensure(worst <= 1e-6, format!("max relative V error {worst:.1e}"))
}

fn noise_free(config: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        angle_jitter_sigma_deg: 0.0,
        phase_drift_sigma_rad: 0.0,
        crosstalk_prob: 0.0,
        ..config.clone()
    }
}

fn engine_oracle(m: &RunManifest, config: &ExperimentConfig) -> std::result::Result<String, String> {
    let v = &m.config.file.validate;
    let cfg = ExperimentConfig {
        n_pulses: v.oracle_pulses,
        ..noise_free(config)
    };
    let n = cfg.n_pulses as f64;
    let mut worst: f64 = 0.0;
    for (i, text) in v.oracle_settings.iter().enumerate() {
        let tuple = parse_setting_tuple(text)?;
        if tuple.len() != 2 {
            return Err(format!("`{text}`: oracle settings cover the two detectors of pair 0"));
        }
        let mut a: Vec<Analyzer> = vec![None; cfg.n_detectors()];
        a[0] = Some(tuple[0]);
        a[1] = Some(tuple[1]);
        let p = expected_coincidence_probability(&cfg, &a, 2).map_err(show)?;
        let r = simulate_block(&cfg, &a, 2, RunLayout::for_setting(i, 1)).map_err(show)?;
        let c = r.coincidences as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        let z = if sd > 0.0 {
            (c - n * p) / sd
        } else if c == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if z.abs() > ORACLE_Z {
            return Err(format!("setting `{text}`: {c} counts, expected {:.1} (z = {z:.2})", n * p));
        }
        worst = worst.max(z.abs());
    }
    Ok(format!("{} settings, max |z| = {worst:.2}", v.oracle_settings.len()))
}

fn partition_merge(config: &ExperimentConfig) -> std::result::Result<String, String> {
    let cfg = ExperimentConfig {
        n_pulses: config.n_pulses.min(2_000_000),
        ..config.clone()
    };
    let a: Vec<Analyzer> = vec![None; cfg.n_detectors()];
    let layout = RunLayout { partitions: 3, block: 0 };
    let parallel = simulate_block(&cfg, &a, 2, layout).map_err(show)?;
    let again = simulate_block(&cfg, &a, 2, layout).map_err(show)?;
    let serial = simulate_counts_with(&cfg, &a, 2, layout).map_err(show)?;
    ensure(
        parallel == serial && again == serial,
        format!("{} coincidences over 3 partitions", serial.coincidences),
    )
}

fn linear_round_trip(config: &ExperimentConfig) -> std::result::Result<String, String> {
    let rho = target_state(config, 2).map_err(show)?;
    let rec = CountRecord::expected(&rho, tomography_settings(2).map_err(show)?, 1e4).map_err(show)?;
    let err = linear_inversion(&rec).map_err(show)?.max_abs_diff(rho.matrix());
    ensure(err <= 1e-6, format!("max element error {err:.1e}"))
}

fn mle_round_trip(config: &ExperimentConfig) -> std::result::Result<String, String> {
    let rho = target_state(config, 2).map_err(show)?;
    let rec = CountRecord::sample_poisson(&rho, tomography_settings(2).map_err(show)?, 1e4, config.seed).map_err(show)?;
    let fit = mle_reconstruct(&rec, &MleOptions::default()).map_err(show)?;
    let f = fidelity(&fit.density, &rho).map_err(show)?;
    let diag = validate_density(fit.density.matrix()).map_err(show)?;
    ensure(
        f >= 0.99 && diag.is_valid(),
        format!("F = {f:.5}, min eigenvalue {:.1e}", diag.min_eigenvalue),
    )
}

fn engine_tomography(config: &ExperimentConfig) -> std::result::Result<String, String> {
    let pair = config.channel_pairs[0];
    let mut cfg = ExperimentConfig::single_pair(0.002, pair.source, 5_000_000);
    cfg.seed = config.seed;
    let threaded = simulate_record(&cfg, 2, 1).map_err(show)?;
    let serial = run_tomography_experiment(&cfg, 2).map_err(show)?;
    if threaded != serial {
        return Err("threaded and serial records differ".into());
    }
    let rho = target_state(&cfg, 2).map_err(show)?;
    let fit = mle_reconstruct(&serial, &MleOptions::default()).map_err(show)?;
    let f = fidelity(&fit.density, &rho).map_err(show)?;
    ensure(f >= 0.99, format!("F = {f:.5} at exposure {:.0}", serial.exposure()))
}

fn monte_carlo_repeatable(config: &ExperimentConfig) -> std::result::Result<String, String> {
    let rho = target_state(config, 2).map_err(show)?;
    let rec = CountRecord::sample_poisson(&rho, tomography_settings(2).map_err(show)?, 1e3, config.seed).map_err(show)?;
    let opts = MonteCarloOptions {
        runs: 10,
        seed: config.seed,
        ..MonteCarloOptions::default()
    };
    let a = monte_carlo_fidelity(&rec, &rho, &opts).map_err(show)?;
    let b = monte_carlo_fidelity(&rec, &rho, &opts).map_err(show)?;
    ensure(a == b, format!("F = {:.4} ± {:.4} over 10 runs", a.mean, a.std))
}

fn fixture(m: &RunManifest, p: &std::path::Path) -> Check {
    let path = m.config.resolve(p);
    check(format!("fixture {}", p.display()), || {
        let mx = read_matrix(&path).map_err(show)?;
        let d = validate_density(&mx).map_err(show)?;
        let v = d.violations();
        ensure(
            v.is_empty(),
            if v.is_empty() {
                format!("{0}x{0} density matrix", mx.rows())
            } else {
                format!(
                    "violates {} (hermiticity defect {:.1e}, trace defect {:.1e}, min eigenvalue {:.1e})",
                    v.join(", "),
                    d.hermiticity_defect,
                    d.trace_defect,
                    d.min_eigenvalue
                )
            },
        )
    })
}

pub fn checks(m: &RunManifest) -> Result<Vec<Check>> {
    let config = m.config.experiment(m.seed)?;
    let mut out = vec![
        check("rate arithmetic", rate_arithmetic),
        check("ideal fringes", ideal_fringes),
        check("noiseless fringe fit", noiseless_fit),
        check("engine vs closed form", || engine_oracle(m, &config)),
        check("partition merge", || partition_merge(&config)),
        check("linear inversion round trip", || linear_round_trip(&config)),
        check("maximum-likelihood round trip", || mle_round_trip(&config)),
        check("engine tomography round trip", || engine_tomography(&config)),
        check("Monte Carlo reproducibility", || monte_carlo_repeatable(&config)),
    ];
    for p in &m.config.file.validate.fixtures {
        out.push(fixture(m, p));
    }
    Ok(out)
}

pub(super) fn run(m: &RunManifest, dir: &mut RunDir) -> Result<(String, Option<Error>)> {
    let checks = checks(m)?;
    match dir.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for c in &checks {
                w.serialize(c).expect("in-memory write");
            }
            let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output");
            dir.write("validate.csv", &text)?;
        }
        Format::Json => dir.write_json("validate.json", &checks)?,
    }
    let mut summary = String::new();
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        summary.push_str(&format!("{mark} {}: {}\n", c.name, c.detail));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let failure = (failed > 0).then_some(Error::Invariant {
        failed,
        total: checks.len(),
    });
    Ok((summary, failure))
}
