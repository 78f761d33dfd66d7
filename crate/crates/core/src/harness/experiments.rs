//! The recovery experiments: success rate, convergence traces and noise.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{QimError, Result};
use crate::losses::{Objective, QimModel};
use crate::measurements::{EnsembleKind, IntensityData, SensingEnsemble};
use crate::optimizers::{gradient_descent, random_init, wirtinger_flow_baseline, GdConfig, RunResult};
use crate::rng::SeedTree;
use crate::scalar::{norm_sqr, Field, Scalar};

/// Power iterations for the Wirtinger Flow spectral start.
pub const WF_POWER_ITERS: usize = 50;

/// Scalars the harness can build ensembles for.
pub trait Experimental: Scalar {
    fn ensemble(kind: EnsembleKind, n: usize, m: usize, seed: u64) -> Result<SensingEnsemble<Self>>;
}

impl Experimental for f64 {
    fn ensemble(kind: EnsembleKind, n: usize, m: usize, seed: u64) -> Result<SensingEnsemble<f64>> {
        match kind {
            EnsembleKind::ExplicitGaussian => SensingEnsemble::gaussian(n, m, seed),
            EnsembleKind::Cdp => Err(QimError::Config("coded diffraction patterns are complex".into())),
        }
    }
}

impl Experimental for Complex64 {
    fn ensemble(kind: EnsembleKind, n: usize, m: usize, seed: u64) -> Result<SensingEnsemble<Complex64>> {
        match kind {
            EnsembleKind::ExplicitGaussian => SensingEnsemble::gaussian(n, m, seed),
            EnsembleKind::Cdp => SensingEnsemble::cdp(n, m / n, seed),
        }
    }
}

/// One problem: ensemble and unit-norm signal, drawn from `tree`.
struct Instance<S> {
    ens: SensingEnsemble<S>,
    x: Vec<S>,
}

fn instance<S: Experimental>(cfg: &ExperimentConfig, m: usize, tree: &SeedTree) -> Result<Instance<S>> {
    let ens = S::ensemble(cfg.ensemble, cfg.n, m, tree.child(0).seed())?;
    let x = random_init::<S>(cfg.n, tree.child(1).seed(), None)?;
    Ok(Instance { ens, x })
}

fn gd_config(cfg: &ExperimentConfig, model: QimModel) -> GdConfig {
    GdConfig::new(cfg.step_for(model), cfg.max_iters, cfg.tol)
}

/// Descent on `model` from a random start scaled by the data.
fn run_model<S: Scalar>(
    cfg: &ExperimentConfig,
    model: QimModel,
    inst: &Instance<S>,
    data: &IntensityData,
    init_seed: u64,
) -> Result<RunResult<S>> {
    let obj = Objective::new(model, &inst.ens, &data.y)?;
    let u0 = random_init::<S>(cfg.n, init_seed, Some(data))?;
    gradient_descent(&obj, &inst.x, &gd_config(cfg, model), u0)
}

/// A blown-up iterate counts as a failed trial rather than an error.
fn final_error<S>(run: Result<RunResult<S>>) -> Result<Option<RunResult<S>>> {
    match run {
        Ok(r) => Ok(Some(r)),
        Err(QimError::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRow {
    pub model: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Fraction of random starts that reach `tol` relative error, for every
/// model and measurement count. Trial `t` at count `m` sees the same
/// ensemble, signal and start for every model.
pub fn success_rate(cfg: &ExperimentConfig) -> Result<Vec<SuccessRow>> {
    match cfg.field {
        Field::Real => success_rate_in::<f64>(cfg),
        Field::Complex => success_rate_in::<Complex64>(cfg),
    }
}

fn success_rate_in<S: Experimental>(cfg: &ExperimentConfig) -> Result<Vec<SuccessRow>> {
    let root = SeedTree::new(cfg.seed).child(0);
    let mut rows = Vec::new();
    for &m in &cfg.ms {
        let jobs: Vec<(usize, usize)> = (0..cfg.trials)
            .flat_map(|t| (0..cfg.models.len()).map(move |k| (t, k)))
            .collect();
        let ok: Vec<bool> = jobs
            .into_par_iter()
            .map(|(t, k)| {
                let tree = root.path(&[m as u64, t as u64]);
                let inst = instance::<S>(cfg, m, &tree)?;
                let data = inst.ens.intensities(&inst.x)?;
                let run = final_error(run_model(cfg, cfg.models[k], &inst, &data, tree.child(2).seed()))?;
                Ok(run.is_some_and(|r| r.converged))
            })
            .collect::<Result<_>>()?;
        for (k, model) in cfg.models.iter().enumerate() {
            let successes = (0..cfg.trials)
                .filter(|t| ok[t * cfg.models.len() + k])
                .count();
            rows.push(SuccessRow {
                model: model.to_string(),
                n: cfg.n,
                m,
                trials: cfg.trials,
                successes,
                rate: successes as f64 / cfg.trials as f64,
            });
        }
    }
    rows.sort_by(|a, b| {
        let ka = cfg.models.iter().position(|m| m.to_string() == a.model);
        let kb = cfg.models.iter().position(|m| m.to_string() == b.model);
        ka.cmp(&kb).then(a.m.cmp(&b.m))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub algorithm: String,
    pub trial: usize,
    pub iter: usize,
    pub rel_error: f64,
}

/// Relative-error traces for every model from a random start and for the
/// Wirtinger Flow baseline from its spectral start.
pub fn convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    match cfg.field {
        Field::Real => convergence_in::<f64>(cfg),
        Field::Complex => convergence_in::<Complex64>(cfg),
    }
}

fn convergence_in<S: Experimental>(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    let root = SeedTree::new(cfg.seed).child(1);
    let m = cfg.ms[0];
    let algorithms = cfg.models.len() + 1;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| (0..algorithms).map(move |k| (t, k)))
        .collect();
    let traces: Vec<Vec<ConvergenceRow>> = jobs
        .into_par_iter()
        .map(|(t, k)| {
            let tree = root.child(t as u64);
            let inst = instance::<S>(cfg, m, &tree)?;
            let data = inst.ens.intensities(&inst.x)?;
            let (name, run) = match cfg.models.get(k) {
                Some(model) => (model.to_string(), run_model(cfg, *model, &inst, &data, tree.child(2).seed())?),
                None => {
                    // The baseline keeps its own step; `--step` only retunes the models.
                    let gd = GdConfig::new(QimModel::Intensity.default_step(), cfg.max_iters, cfg.tol);
                    let run = wirtinger_flow_baseline(&inst.ens, &data, &inst.x, &gd, WF_POWER_ITERS, tree.child(3).seed())?;
                    ("wf".to_string(), run)
                }
            };
            Ok(run
                .trajectory
                .iter()
                .map(|&(iter, rel_error)| ConvergenceRow {
                    algorithm: name.clone(),
                    trial: t,
                    iter,
                    rel_error,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(traces.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRow {
    pub model: String,
    pub snr_db: f64,
    pub trials: usize,
    /// `10 log10` of the trial mean of `dist^2 / |x|^2`.
    pub mse_db: f64,
    /// Least-squares slope of `mse_db` against finite `snr_db` for this model.
    pub slope: f64,
}

/// Least-squares slope of `y` on `x`; NaN with fewer than two points.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Reconstruction error against SNR under additive amplitude noise. Each
/// trial keeps its ensemble, signal and start across the SNR grid.
pub fn noise(cfg: &ExperimentConfig) -> Result<Vec<NoiseRow>> {
    match cfg.field {
        Field::Real => noise_in::<f64>(cfg),
        Field::Complex => noise_in::<Complex64>(cfg),
    }
}

fn noise_in<S: Experimental>(cfg: &ExperimentConfig) -> Result<Vec<NoiseRow>> {
    let root = SeedTree::new(cfg.seed).child(2);
    let m = cfg.ms[0];
    let (nm, ns) = (cfg.models.len(), cfg.snr_db.len());
    let jobs: Vec<(usize, usize, usize)> = (0..nm)
        .flat_map(|k| (0..ns).flat_map(move |j| (0..cfg.trials).map(move |t| (k, j, t))))
        .collect();
    let errs: Vec<f64> = jobs
        .into_par_iter()
        .map(|(k, j, t)| {
            let tree = root.child(t as u64);
            let inst = instance::<S>(cfg, m, &tree)?;
            let data = inst.ens.add_amplitude_noise(&inst.x, cfg.snr_db[j], tree.path(&[3, j as u64]).seed())?;
            let run = final_error(run_model(cfg, cfg.models[k], &inst, &data, tree.child(2).seed()))?;
            Ok(match run {
                Some(r) => S::dist_mod_phase(&r.final_point, &inst.x).powi(2) / norm_sqr(&inst.x),
                None => f64::INFINITY,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, model) in cfg.models.iter().enumerate() {
        let mse_db: Vec<f64> = (0..ns)
            .map(|j| {
                let block = &errs[(k * ns + j) * cfg.trials..(k * ns + j + 1) * cfg.trials];
                10.0 * (block.iter().sum::<f64>() / cfg.trials as f64).log10()
            })
            .collect();
        let finite: Vec<(f64, f64)> = cfg
            .snr_db
            .iter()
            .zip(&mse_db)
            .filter(|(s, e)| s.is_finite() && e.is_finite())
            .map(|(s, e)| (*s, *e))
            .collect();
        let slope = fit_slope(&finite);
        for (j, &snr_db) in cfg.snr_db.iter().enumerate() {
            rows.push(NoiseRow {
                model: model.to_string(),
                snr_db,
                trials: cfg.trials,
                mse_db: mse_db[j],
                slope,
            });
        }
    }
    Ok(rows)
}
