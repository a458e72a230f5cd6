//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

mod common;

use std::time::Instant;

use common::{pair_density, pass_probabilities, polarizer_ket, twofold_probability, z_score};
use sagnac_core::fringes::{
    chsh_violation, fit_fringe, predict_fringe, visibility_of, FringeData, FringeKind, FringeModel,
    CHSH_VISIBILITY_BOUND,
};
use sagnac_core::optics::tomography_settings;
use sagnac_core::qstate::{bell_phi_plus, density_from_pure, fidelity, multiphoton_state, validate_density};
use sagnac_core::rng::{poisson, stream_rng};
use sagnac_core::simulator::{
    generation_rate_from_detected, loss_budget, pairs_per_pulse, run_tomography_experiment, simulate_counts,
    ChannelPair, ExperimentConfig,
};
use sagnac_core::tomography::{
    linear_inversion, mle_reconstruct, monte_carlo_fidelity, CountRecord, MleOptions, MonteCarloOptions,
};
use sagnac_core::{DensityMatrix, SourceParams, WaveplateSetting as W};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bell() -> DensityMatrix {
    density_from_pure(&bell_phi_plus())
}

fn rate_arithmetic() -> Outcome {
    let l2 = loss_budget(&[("coupler", 5.0), ("manipulation", 4.3), ("filters", 6.0), ("detector", 0.7)])
        .map_err(|e| e.to_string())?;
    let l4 = loss_budget(&[("coupler", 5.0), ("manipulation", 4.3), ("filters", 5.0), ("detector", 0.7)])
        .map_err(|e| e.to_string())?;
    ensure((l2 - 16.0).abs() < 1e-12, format!("two-photon budget {l2}"))?;
    ensure((l4 - 15.0).abs() < 1e-12, format!("four-photon budget {l4}"))?;
    let g = generation_rate_from_detected(0.34, 15.0, 4).map_err(|e| e.to_string())?;
    ensure((g - 340e3).abs() <= 0.01 * 340e3, format!("generation rate {g}"))?;
    let mu = pairs_per_pulse(270e3, 100e6).map_err(|e| e.to_string())?;
    ensure(mu == 0.0027, format!("pairs per pulse {mu}"))?;
    Ok(format!("16 dB, 15 dB, {:.1} kHz, {mu} per pulse", g / 1e3))
}

fn ideal_fringes() -> Outcome {
    let sweep: Vec<f64> = (0..=360).map(|i| i as f64 * 0.5).collect();
    let mut worst: f64 = 0.0;
    for basis in [0.0, 45.0] {
        let curve = predict_fringe(&bell(), &[basis], &sweep, true).map_err(|e| e.to_string())?;
        let v = visibility_of(&curve).map_err(|e| e.to_string())?;
        worst = worst.max((v - 1.0).abs());
        ensure(chsh_violation(v).margin > 0.0, "CHSH margin not positive")?;
    }
    ensure(worst <= 1e-9, format!("|V − 1| = {worst:e}"))?;
    Ok(format!("max |V − 1| = {worst:.1e} in 0° and 45° bases"))
}

fn chsh_gate() -> Outcome {
    let a = chsh_violation(0.961);
    let b = chsh_violation(0.930);
    let c = chsh_violation(0.70);
    ensure(a.violates && b.violates && !c.violates, "verdicts")?;
    ensure(CHSH_VISIBILITY_BOUND == std::f64::consts::FRAC_1_SQRT_2, "bound")?;
    Ok(format!("margins {:.4}, {:.4}, {:.4}", a.margin, b.margin, c.margin))
}

fn model(kind: FringeKind, v: f64, scale: f64) -> Result<FringeModel, String> {
    let period = match kind {
        FringeKind::TwoPhoton => 90.0,
        FringeKind::FourPhoton => 180.0,
    };
    FringeModel::new(kind, scale, v, 17.0, period).map_err(|e| e.to_string())
}

fn fringe_fit_recovery() -> Outcome {
    let xs: Vec<f64> = (0..36).map(|i| i as f64 * 5.0).collect();
    let mut worst_rel: f64 = 0.0;
    for kind in [FringeKind::TwoPhoton, FringeKind::FourPhoton] {
        for v in [0.6, 0.8, 1.0] {
            let m = model(kind, v, 1000.0)?;
            let ys: Vec<f64> = xs.iter().map(|&x| m.eval(x)).collect();
            let data = FringeData::from_counts(&xs, &ys, 0.0, kind.n_fold()).map_err(|e| e.to_string())?;
            let fit = fit_fringe(&data).map_err(|e| e.to_string())?;
            worst_rel = worst_rel.max((fit.model.visibility - v).abs() / v);
        }
    }
    ensure(worst_rel <= 1e-6, format!("noiseless relative error {worst_rel:e}"))?;

    // Poisson noise around a mean of ~50 counts per point, at the measured visibilities
    let mut coverage = Vec::new();
    for (kind, v) in [(FringeKind::TwoPhoton, 0.961), (FringeKind::FourPhoton, 0.965)] {
        let m = model(kind, v, 50.0)?;
        let mut covered = 0;
        let trials = 100;
        for seed in 0..trials {
            let mut rng = stream_rng(1000 + seed, 0);
            let ys: Vec<f64> = xs.iter().map(|&x| poisson(&mut rng, m.eval(x)) as f64).collect();
            let data = FringeData::from_counts(&xs, &ys, 0.0, kind.n_fold()).map_err(|e| e.to_string())?;
            if let Ok(fit) = fit_fringe(&data) {
                // ±3σ on the fitted amplitude, mapped to V (the identity for two-photon)
                let (lo, hi) = fit.visibility_interval(3.0);
                if lo <= v && v <= hi {
                    covered += 1;
                }
            }
        }
        ensure(covered >= 95, format!("{kind:?} 3σ coverage {covered}/{trials}"))?;
        coverage.push(covered);
    }
    Ok(format!(
        "noiseless rel. error {worst_rel:.1e}; 3σ coverage {}/100 (two-photon), {}/100 (four-photon)",
        coverage[0], coverage[1]
    ))
}

fn tomography_two_photon() -> Outcome {
    let rho = bell();
    let settings = tomography_settings(2).map_err(|e| e.to_string())?;
    let noisy = CountRecord::sample_poisson(&rho, settings.clone(), 1e4, 2024).map_err(|e| e.to_string())?;
    let fit = mle_reconstruct(&noisy, &MleOptions::default()).map_err(|e| e.to_string())?;
    let f = fidelity(&fit.density, &rho).map_err(|e| e.to_string())?;
    ensure(f >= 0.99, format!("MLE fidelity {f}"))?;
    let exact = CountRecord::expected(&rho, settings, 1e4).map_err(|e| e.to_string())?;
    let lin = linear_inversion(&exact).map_err(|e| e.to_string())?;
    let err = lin.max_abs_diff(rho.matrix());
    ensure(err <= 1e-6, format!("linear inversion error {err:e}"))?;
    Ok(format!("F = {f:.5}, linear inversion error {err:.1e}"))
}

fn tomography_four_photon() -> Outcome {
    let psi = multiphoton_state(&[SourceParams::maximally_entangled(); 2]).map_err(|e| e.to_string())?;
    let rho = density_from_pure(&psi);
    let settings = tomography_settings(4).map_err(|e| e.to_string())?;
    let record = CountRecord::sample_poisson(&rho, settings, 1e3, 4).map_err(|e| e.to_string())?;
    let fit = mle_reconstruct(&record, &MleOptions::default()).map_err(|e| e.to_string())?;
    let f = fidelity(&fit.density, &rho).map_err(|e| e.to_string())?;
    let report = validate_density(fit.density.matrix()).map_err(|e| e.to_string())?;
    ensure(f >= 0.98, format!("MLE fidelity {f}"))?;
    ensure(report.is_valid(), format!("violations {:?}", report.violations()))?;
    Ok(format!(
        "F = {f:.4}, min eigenvalue {:.1e}, {} evaluations",
        report.min_eigenvalue, fit.evaluations
    ))
}

fn monte_carlo_errors() -> Outcome {
    let rho = bell();
    let settings = tomography_settings(2).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut stds = Vec::new();
        for exposure in [1e3, 1e4, 1e5] {
            let record = CountRecord::sample_poisson(&rho, settings.clone(), exposure, seed).map_err(|e| e.to_string())?;
            let opts = MonteCarloOptions {
                runs: 100,
                seed,
                ..Default::default()
            };
            let mc = monte_carlo_fidelity(&record, &rho, &opts).map_err(|e| e.to_string())?;
            if exposure == 1e4 {
                let again = monte_carlo_fidelity(&record, &rho, &opts).map_err(|e| e.to_string())?;
                let same = mc.samples.iter().zip(&again.samples).all(|(a, b)| a.to_bits() == b.to_bits());
                ensure(same && mc.samples.len() == again.samples.len(), "not bit-reproducible")?;
            }
            stds.push(mc.std);
        }
        ensure(
            stds[0] > stds[1] && stds[1] > stds[2],
            format!("seed {seed}: F_std not decreasing {stds:?}"),
        )?;
        rows.push(format!("[{:.1e} {:.1e} {:.1e}]", stds[0], stds[1], stds[2]));
    }
    Ok(format!("F_std at 1e3/1e4/1e5 per seed: {}", rows.join(" ")))
}

fn engine_oracle() -> Outcome {
    let settings = [("HH", 0.0, 0.0), ("HV", 0.0, 45.0), ("DD", 22.5, 22.5), ("DA", 22.5, -22.5)];
    let seeds = 10u64;
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    for mu in [0.0, 0.0027, 0.1] {
        let n_pulses: u64 = if mu == 0.0027 { 20_000_000 } else { 1_000_000 };
        for loss in [0.0, 10.0, 16.0] {
            for (name, hs, hi) in settings {
                let mut c = ExperimentConfig::single_pair(mu, SourceParams::maximally_entangled(), n_pulses);
                c.loss_db_per_photon = loss;
                c.dark_rate_hz = 100.0;
                let mut total = 0u64;
                for seed in 0..seeds {
                    c.seed = seed;
                    let r = simulate_counts(&c, &[W::polarizer(2.0 * hs), W::polarizer(2.0 * hi)], 2)
                        .map_err(|e| e.to_string())?;
                    total += r.coincidences;
                }
                let pass = pass_probabilities(&pair_density(1.0, 0.0), Some(polarizer_ket(hs)), Some(polarizer_ket(hi)));
                let dark = 100.0 * 0.8e-9;
                let p = twofold_probability(mu, 10f64.powf(-loss / 10.0), dark, pass);
                let z = z_score(total as f64, (seeds * n_pulses) as f64, p);
                ensure(z < 3.0, format!("mu={mu} loss={loss} {name}: {total} vs {:.2} (z={z:.2})", p * (seeds * n_pulses) as f64))?;
                worst = worst.max(z);
                configs += 1;
            }
        }
    }
    Ok(format!("{configs} configs × {seeds} seeds, max |z| = {worst:.2}"))
}

fn noise_phenomenology() -> Outcome {
    let levels = [0.0, 1.0, 2.0, 3.5, 5.0];
    let seeds = [11u64, 12, 13, 14];
    let target = bell();
    let mut means = Vec::new();
    for &sigma in &levels {
        let mut total = 0.0;
        for &seed in &seeds {
            let mut c = ExperimentConfig::single_pair(0.01, SourceParams::maximally_entangled(), 10_000_000);
            c.angle_jitter_sigma_deg = sigma;
            c.seed = seed;
            let record = run_tomography_experiment(&c, 2).map_err(|e| e.to_string())?;
            let fit = mle_reconstruct(&record, &MleOptions::default()).map_err(|e| e.to_string())?;
            total += fidelity(&fit.density, &target).map_err(|e| e.to_string())?;
        }
        means.push(total / seeds.len() as f64);
    }
    let text: Vec<String> = levels.iter().zip(&means).map(|(s, f)| format!("{s}°→{f:.4}")).collect();
    ensure(means.windows(2).all(|w| w[1] < w[0]), format!("not strictly decreasing: {}", text.join(", ")))?;
    Ok(text.join(", "))
}

fn four_fold_factorization() -> Outcome {
    let mut c = ExperimentConfig::single_pair(0.05, SourceParams::maximally_entangled(), 4_000_000);
    c.channel_pairs.push(ChannelPair {
        signal_channel: 2,
        idler_channel: -2,
        mu: 0.05,
        source: SourceParams::maximally_entangled(),
    });
    let mut worst: f64 = 0.0;
    let cases = [[W::H, W::H, W::H, W::H], [W::H, W::H, W::D, W::D], [W::D, W::D, W::D, W::D], [W::R, W::polarizer(30.0), W::D, W::A]];
    for (k, settings) in cases.iter().enumerate() {
        c.seed = 500 + k as u64;
        let r = simulate_counts(&c, settings, 4).map_err(|e| e.to_string())?;
        let n = r.n_pulses as f64;
        let pa = r.twofold(0, 1) as f64 / n;
        let pb = r.twofold(2, 3) as f64 / n;
        let p4 = r.coincidences as f64 / n;
        // delta-method standard error of p4 − pa·pb
        let sigma = ((p4 * (1.0 - p4)) / n + (pb * pb * pa * (1.0 - pa)) / n + (pa * pa * pb * (1.0 - pb)) / n).sqrt();
        let z = if sigma > 0.0 { (p4 - pa * pb).abs() / sigma } else { 0.0 };
        ensure(z < 3.0, format!("case {k}: p4={p4:e} pa·pb={:e} z={z:.2}", pa * pb))?;
        worst = worst.max(z);
    }
    Ok(format!("{} settings, max |z| = {worst:.2}", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("rate arithmetic", rate_arithmetic),
        ("ideal fringes", ideal_fringes),
        ("CHSH gate", chsh_gate),
        ("fringe-fit recovery", fringe_fit_recovery),
        ("tomography round trip n=2", tomography_two_photon),
        ("tomography round trip n=4", tomography_four_photon),
        ("Monte Carlo errors", monte_carlo_errors),
        ("stochastic-engine oracle", engine_oracle),
        ("noise phenomenology", noise_phenomenology),
        ("four-photon factorization", four_fold_factorization),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
