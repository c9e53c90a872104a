//! Fast internal invariants for the `selfcheck` subcommand.
//!
//! Each check is cheap enough to run on every install; together they
//! cover the properties the rest of the toolchain silently relies on:
//! replayable random streams, a trustworthy normal quantile, frozen
//! divergence values, CSV ingestion, and scheduling-independent
//! experiment results.

use ci_robust_core::rng::RngStream;
use ci_robust_core::stats::{std_normal_cdf, std_normal_quantile};
use ci_robust_core::theory::{gaussian_chi2_shift, gaussian_tv};
use ci_robust_core::Float;

use crate::config::{parse_config_text, ExperimentConfig};
use crate::ingest;
use crate::runner::{run_experiment, HarnessError};

/// Runs every check, printing one `ok:`/`FAILED:` line each, and errors
/// if any of them failed.
pub fn run_selfcheck() -> Result<(), HarnessError> {
    let checks: [(&str, fn() -> Result<(), String>); 5] = [
        ("random streams replay identically", stream_determinism),
        ("normal quantile inverts the cdf", quantile_round_trip),
        ("gaussian divergences match frozen values", frozen_divergences),
        ("csv ingestion round-trips", csv_round_trip),
        ("experiments ignore the thread count", experiment_invariance),
    ];
    let mut failures = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok: {name}"),
            Err(reason) => {
                println!("FAILED: {name}: {reason}");
                failures.push(name);
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::SelfCheck(failures.join(", ")))
    }
}

fn stream_determinism() -> Result<(), String> {
    let draw_eight = || -> Vec<f64> {
        let mut rng = RngStream::new(7, 1).rng();
        (0..8).map(|_| f64::standard_normal(&mut rng)).collect()
    };
    let first = draw_eight();
    let second = draw_eight();
    if first == second {
        Ok(())
    } else {
        Err("two rngs built from the same stream disagreed".to_string())
    }
}

fn quantile_round_trip() -> Result<(), String> {
    for q in [0.01, 0.1, 0.5, 0.9, 0.975, 0.999] {
        let x = std_normal_quantile(q).map_err(|e| e.to_string())?;
        let back: f64 = std_normal_cdf(x);
        if (back - q).abs() > 1e-8 {
            return Err(format!("cdf(quantile({q})) = {back}"));
        }
    }
    Ok(())
}

fn frozen_divergences() -> Result<(), String> {
    // 2 Phi(1) - 1 for a mean shift of 2 at unit scale.
    let tv = gaussian_tv::<f64>(2.0, 1.0);
    if (tv - 0.682_689_492_137_085_9).abs() > 1e-12 {
        return Err(format!("gaussian_tv(2, 1) = {tv}"));
    }
    // exp(1) - 1 for a unit mean shift.
    let chi2 = gaussian_chi2_shift::<f64>(1.0);
    if (chi2 - 1.718_281_828_459_045_2).abs() > 1e-12 {
        return Err(format!("gaussian_chi2_shift(1) = {chi2}"));
    }
    Ok(())
}

fn csv_round_trip() -> Result<(), String> {
    let path = std::env::temp_dir().join("ci_robust_selfcheck.csv");
    std::fs::write(&path, "x,y,z\n1.5,2,0\n-3,4.25,1\n").map_err(|e| e.to_string())?;
    let cols = |name: &str| vec![name.to_string()];
    let data = ingest::load_csv(&path, &cols("x"), &cols("y"), &cols("z"))
        .map_err(|e| e.to_string())?;
    if data.n_rows() != 2 || data.x().get(1, 0) != -3.0 || data.y().get(1, 0) != 4.25 {
        return Err("loaded values do not match the file".to_string());
    }
    let expanded = ingest::one_hot(&data.z().col_vec(0));
    if expanded.cols() != 2 || expanded.get(0, 0) != 1.0 || expanded.get(1, 1) != 1.0 {
        return Err("one-hot expansion scrambled the levels".to_string());
    }
    Ok(())
}

fn experiment_invariance() -> Result<(), String> {
    let config = ExperimentConfig::from_raw(
        parse_config_text(
            "method = stfr\n\
             dgp = quadratic\n\
             d_z = 2\n\
             n_train = 40\n\
             n_test = 20\n\
             replications = 3\n\
             param_draws = 2\n\
             rho_scale = 0.05\n\
             base_seed = 123\n",
        )
        .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let mut serial = run_experiment(&config, 1).map_err(|e| e.to_string())?;
    let mut threaded = run_experiment(&config, 2).map_err(|e| e.to_string())?;
    serial.strip_timing();
    threaded.strip_timing();
    if serial != threaded {
        return Err("1-thread and 2-thread runs disagree".to_string());
    }
    let point = &serial.points[0];
    if point.p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err("a p-value fell outside [0, 1]".to_string());
    }
    let recomputed = point.p_values.iter().filter(|&&p| p <= config.alpha).count() as f64 / 6.0;
    if recomputed != point.rejection_rate {
        return Err("the dumped p-values do not reproduce the rejection rate".to_string());
    }
    Ok(())
}
