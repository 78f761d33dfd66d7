//! Experiment harness behind the `qimlab` binary.
//!
//! Outputs are deterministic given the configuration and seed: trials run in
//! parallel but are gathered in index order, CSV floats use Rust's shortest
//! round-trip formatting and JSON objects have sorted keys.

mod config;
mod experiments;

pub use config::{parse_snr, Command, ExperimentConfig, Overrides};
pub use experiments::{
    convergence, fit_slope, noise, success_rate, ConvergenceRow, Experimental, NoiseRow, SuccessRow,
    WF_POWER_ITERS,
};

use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::landscape::{run_landscape, LandscapeConfig, LandscapeReport};
use crate::oracles::{run_oracle_suite, OracleConfig, OracleReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    CheckFailed,
}

/// Output bytes of one command plus its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: Vec<u8>,
    pub status: Status,
    pub warnings: Vec<String>,
}

pub fn success_rate_csv(rows: &[SuccessRow]) -> String {
    let mut s = String::from("model,n,m,trials,successes,rate\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.model, r.n, r.m, r.trials, r.successes, r.rate);
    }
    s
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("algorithm,trial,iter,rel_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:e}", r.algorithm, r.trial, r.iter, r.rel_error);
    }
    s
}

pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut s = String::from("model,snr_db,trials,mse_db,slope\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.model, r.snr_db, r.trials, r.mse_db, r.slope);
    }
    s
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn landscape_reports(cfg: &ExperimentConfig) -> Result<Vec<LandscapeReport>> {
    cfg.models
        .iter()
        .map(|&model| {
            let mut lc = LandscapeConfig::new(model, cfg.n, cfg.ms[0], cfg.seed);
            lc.census_trials = cfg.trials;
            lc.gd.step_mu = cfg.step_for(model);
            lc.gd.max_iters = cfg.max_iters;
            lc.gd.tol = cfg.tol;
            run_landscape(&lc)
        })
        .collect()
}

pub fn oracle_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    run_oracle_suite(&OracleConfig {
        seed: cfg.seed,
        mc_samples: cfg.mc_samples,
        betas: cfg.betas.clone(),
        radii: cfg.radii.clone(),
        qim3: cfg.models[0],
        ..OracleConfig::default()
    })
}

/// Run the configured command and render its output.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut warnings = Vec::new();
    let mut status = Status::Pass;
    let text = match cfg.command {
        Command::SuccessRate => success_rate_csv(&success_rate(cfg)?),
        Command::Convergence => convergence_csv(&convergence(cfg)?),
        Command::Noise => noise_csv(&noise(cfg)?),
        Command::Landscape => {
            let reports = landscape_reports(cfg)?;
            for r in &reports {
                let v = r.violations();
                if v == 0 {
                    continue;
                }
                if r.below_threshold {
                    warnings.push(format!(
                        "{}: {v} check(s) failed with m = {} < 4n (below-threshold regime, not a contradiction)",
                        r.model, r.m
                    ));
                } else {
                    status = Status::CheckFailed;
                    warnings.push(format!("{}: {v} check(s) failed", r.model));
                }
            }
            sorted_json(&reports)?
        }
        Command::OracleCheck => {
            let report = oracle_report(cfg)?;
            if !report.all_pass() {
                status = Status::CheckFailed;
                for c in report.checks.iter().filter(|c| !c.pass) {
                    warnings.push(format!("oracle check failed: {}", c.name));
                }
            }
            sorted_json(&report)?
        }
    };
    Ok(Outcome {
        output: text.into_bytes(),
        status,
        warnings,
    })
}

/// Write the output to `cfg.out`, or to stdout when unset.
pub fn write_output(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.output)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&outcome.output)?;
            out.flush()?;
        }
    }
    Ok(())
}
