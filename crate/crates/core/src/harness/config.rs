//! Experiment configuration: per-command defaults, a JSON file, then flags.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{QimError, Result};
use crate::losses::QimModel;
use crate::measurements::EnsembleKind;
use crate::scalar::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SuccessRate,
    Convergence,
    Noise,
    Landscape,
    OracleCheck,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SuccessRate => "success-rate",
            Command::Convergence => "convergence",
            Command::Noise => "noise",
            Command::Landscape => "landscape",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub models: Vec<QimModel>,
    pub field: Field,
    pub ensemble: EnsembleKind,
    pub n: usize,
    /// Measurement counts, one run per entry.
    pub ms: Vec<usize>,
    pub trials: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// SNR grid in dB; `inf` means noiseless.
    pub snr_db: Vec<f64>,
    /// Overrides every model's default step when set.
    pub step: Option<f64>,
    pub mc_samples: usize,
    pub betas: Vec<f64>,
    pub radii: Vec<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Optional settings, as read from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub models: Option<Vec<String>>,
    pub field: Option<Field>,
    pub ensemble: Option<EnsembleKind>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub ratios: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub snr_db: Option<Vec<Value>>,
    pub step: Option<f64>,
    pub mc_samples: Option<usize>,
    pub betas: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| QimError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those set here.
    pub fn merge(self, over: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            models, field, ensemble, n, m, ratios, trials, max_iters, tol, seed, snr_db, step,
            mc_samples, betas, radii, out, threads
        )
    }
}

/// `inf`, `+inf` or `infinity` (any case) for the noiseless sentinel, else a number.
pub fn parse_snr(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let v = match t.trim_start_matches('+') {
        "inf" | "infinity" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| QimError::Config(format!("bad SNR value '{s}'")))?,
    };
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(QimError::Config(format!("SNR must be a number or inf, got '{s}'")));
    }
    Ok(v)
}

fn snr_from_json(v: &Value) -> Result<f64> {
    match v {
        Value::Number(x) => x
            .as_f64()
            .ok_or_else(|| QimError::Config(format!("bad SNR value {x}"))),
        Value::String(s) => parse_snr(s),
        other => Err(QimError::Config(format!("bad SNR value {other}"))),
    }
}

fn half_steps(lo: f64, hi: f64) -> Vec<f64> {
    let k = ((hi - lo) / 0.5).round() as usize;
    (0..=k).map(|i| lo + 0.5 * i as f64).collect()
}

impl ExperimentConfig {
    /// Resolve `over` against the defaults for `command` and validate.
    pub fn resolve(command: Command, over: Overrides) -> Result<Self> {
        let (models, n, default_ratios, trials, tol): (&[&str], usize, Vec<f64>, usize, f64) = match command {
            Command::SuccessRate => (&["qim2", "qim3"], 128, half_steps(1.0, 10.0), 100, 1e-5),
            Command::Convergence => (&["qim2", "qim3"], 128, vec![6.0], 1, 1e-10),
            Command::Noise => (&["qim2", "qim3"], 128, vec![8.0], 10, 1e-15),
            Command::Landscape => (&["qim1", "qim2", "qim3"], 64, vec![10.0], 50, 1e-5),
            Command::OracleCheck => (&["qim3"], 1, vec![1.0], 1, 1e-5),
        };
        let models = match over.models {
            Some(list) => list,
            None => models.iter().map(|s| s.to_string()).collect(),
        };
        let models = models
            .iter()
            .flat_map(|s| s.split(',').map(str::to_string).collect::<Vec<_>>())
            .filter(|s| !s.trim().is_empty())
            .map(|s| QimModel::from_str(&s))
            .collect::<Result<Vec<_>>>()?;
        let n = over.n.unwrap_or(n);
        let ms = match (over.m, over.ratios) {
            (Some(m), _) => vec![m],
            (None, ratios) => {
                let ratios = ratios.unwrap_or(default_ratios);
                ratios
                    .iter()
                    .map(|r| {
                        if !(*r > 0.0) || !r.is_finite() {
                            return Err(QimError::Config(format!("ratio must be positive, got {r}")));
                        }
                        Ok(((r * n as f64).round() as usize).max(1))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let snr_db = match over.snr_db {
            Some(v) => v.iter().map(snr_from_json).collect::<Result<Vec<_>>>()?,
            None => (0..=8).map(|i| 20.0 + 5.0 * i as f64).collect(),
        };
        let cfg = ExperimentConfig {
            command,
            models,
            field: over.field.unwrap_or(Field::Real),
            ensemble: over.ensemble.unwrap_or(EnsembleKind::ExplicitGaussian),
            n,
            ms,
            trials: over.trials.unwrap_or(trials),
            max_iters: over.max_iters.unwrap_or(2500),
            tol: over.tol.unwrap_or(tol),
            seed: over.seed.unwrap_or(1),
            snr_db,
            step: over.step,
            mc_samples: over.mc_samples.unwrap_or(1_000_000),
            betas: over.betas.unwrap_or_else(|| vec![0.1, 0.5, 1.0, 2.0, 10.0]),
            radii: over.radii.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]),
            out: over.out,
            threads: over.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QimError::Config(msg));
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.n == 0 || self.ms.iter().any(|&m| m == 0) {
            return bad("n and m must be at least 1".into());
        }
        if self.trials == 0 || self.max_iters == 0 || self.mc_samples == 0 {
            return bad("trials, iteration and sample counts must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                return bad(format!("step must be positive, got {step}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("the SNR grid is empty".into());
        }
        let model_ok = |m: &QimModel| *m != QimModel::Intensity;
        match self.command {
            Command::Landscape => {
                if self.field != Field::Real || self.ensemble != EnsembleKind::ExplicitGaussian {
                    return bad("landscape probes run on real Gaussian ensembles only".into());
                }
                if self.n < 2 {
                    return bad("landscape probes need n >= 2".into());
                }
                if !self.models.iter().all(model_ok) {
                    return bad("landscape probes cover qim1, qim2 and qim3".into());
                }
            }
            Command::OracleCheck => {
                if self.betas.iter().chain(&self.radii).any(|v| !(*v > 0.0)) {
                    return bad("beta and R grids must be positive".into());
                }
                if !self.models.iter().all(|m| matches!(m, QimModel::Qim3 { .. })) {
                    return bad("oracle-check takes a single qim3 model for the angular checks".into());
                }
            }
            _ => {}
        }
        if self.command != Command::SuccessRate && self.ms.len() != 1 {
            return bad(format!("{} takes a single m", self.command.as_str()));
        }
        if self.ensemble == EnsembleKind::Cdp {
            if self.field != Field::Complex {
                return bad("coded diffraction patterns need --field complex".into());
            }
            if let Some(m) = self.ms.iter().find(|&&m| m % self.n != 0) {
                return bad(format!("CDP needs m to be a multiple of n, got m={m}, n={}", self.n));
            }
        }
        Ok(())
    }

    /// Step for `model`: the override if set, else the model default.
    pub fn step_for(&self, model: QimModel) -> f64 {
        self.step.unwrap_or(model.default_step())
    }
}
