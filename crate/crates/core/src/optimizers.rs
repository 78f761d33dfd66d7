//! Gradient descent, initializers and the Wirtinger-Flow baseline.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{QimError, Result};
use crate::losses::{Objective, QimModel};
use crate::measurements::{IntensityData, SensingEnsemble};
use crate::rng::SeedTree;
use crate::scalar::{norm, Scalar};

/// How the step `mu` multiplies the derivative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `u <- u - mu * d(f/2)/d(conj u)`, i.e. `mu/4` times the Euclidean
    /// gradient for real signals. This is the convention under which the
    /// experiment step sizes are stable.
    #[default]
    HalfWirtinger,
    /// `u <- u - mu * gradient(u)` with `gradient` as returned by the losses.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub step_mu: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub record_every: usize,
    #[serde(default)]
    pub step_rule: StepRule,
    /// Abort once the relative error exceeds this.
    pub divergence: f64,
}

impl GdConfig {
    pub fn new(step_mu: f64, max_iters: usize, tol: f64) -> Self {
        GdConfig {
            step_mu,
            max_iters,
            tol,
            record_every: 1,
            step_rule: StepRule::HalfWirtinger,
            divergence: 1e6,
        }
    }

    /// Default step for `model`, 2500 iterations, tolerance 1e-5.
    pub fn for_model(model: QimModel) -> Self {
        Self::new(model.default_step(), 2500, 1e-5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_mu > 0.0 && self.step_mu.is_finite()) {
            return Err(QimError::Config(format!("step must be positive, got {}", self.step_mu)));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(QimError::Config("iteration counts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(QimError::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<S> {
    pub iterates_used: usize,
    pub final_dist_rel: f64,
    /// `(iteration, relative error)`, every `record_every` steps plus the last.
    pub trajectory: Vec<(usize, f64)>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Seconds. Never written to deterministic outputs.
    pub wall_time: f64,
    pub final_point: Vec<S>,
}

impl<S> RunResult<S> {
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,rel_error")?;
        for (it, e) in &self.trajectory {
            writeln!(w, "{it},{e:e}")?;
        }
        Ok(())
    }
}

/// Uniform direction on the sphere, scaled by `sqrt(mean y)` when data is
/// given and left at unit norm otherwise.
pub fn random_init<S: Scalar>(
    n: usize,
    seed: u64,
    data: Option<&IntensityData>,
) -> Result<Vec<S>> {
    if n == 0 {
        return Err(QimError::ZeroDimension { n, m: 0 });
    }
    let mut g = SeedTree::new(seed).normals();
    let mut v: Vec<S> = (0..n).map(|_| S::sample(&mut g)).collect();
    let mut len = norm(&v);
    while len == 0.0 {
        v = (0..n).map(|_| S::sample(&mut g)).collect();
        len = norm(&v);
    }
    let scale = data.map_or(1.0, |d| d.mean().sqrt());
    Ok(v.into_iter().map(|s| s.scale(scale / len)).collect())
}

/// Leading eigenvector of `(1/m) sum y_k a_k a_k^*` by power iteration,
/// scaled to `sqrt(mean y)`.
pub fn spectral_init<S: Scalar>(
    ens: &SensingEnsemble<S>,
    data: &IntensityData,
    power_iters: usize,
    seed: u64,
) -> Result<Vec<S>> {
    if power_iters == 0 {
        return Err(QimError::Config("power_iters must be at least 1".into()));
    }
    if data.y.len() != ens.m() {
        return Err(QimError::DimensionMismatch {
            what: "intensity data",
            expected: ens.m(),
            got: data.y.len(),
        });
    }
    let mut v: Vec<S> = random_init(ens.n(), seed, None)?;
    let mut z = vec![S::zero(); ens.m()];
    let mut w = vec![S::zero(); ens.n()];
    for _ in 0..power_iters {
        ens.forward_into(&v, &mut z);
        z.iter_mut().zip(&data.y).for_each(|(zk, yk)| *zk = zk.scale(*yk));
        ens.adjoint_into(&z, &mut w);
        let len = norm(&w);
        if len == 0.0 {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b.scale(1.0 / len));
    }
    let scale = data.mean().sqrt();
    Ok(v.into_iter().map(|s| s.scale(scale)).collect())
}

fn descend<S: Scalar>(
    obj: &Objective<'_, S>,
    x_truth: &[S],
    cfg: &GdConfig,
    u0: Vec<S>,
    step: f64,
) -> Result<RunResult<S>> {
    cfg.validate()?;
    if u0.len() != x_truth.len() {
        return Err(QimError::DimensionMismatch {
            what: "initial point",
            expected: x_truth.len(),
            got: u0.len(),
        });
    }
    let x_norm = norm(x_truth);
    if x_norm == 0.0 {
        return Err(QimError::ZeroSignal);
    }
    let start = Instant::now();
    let rel = |u: &[S]| S::dist_mod_phase(u, x_truth) / x_norm;

    let mut u = u0;
    let mut err = rel(&u);
    let mut trajectory = vec![(0, err)];
    let mut iter = 0;
    let mut reason = if err <= cfg.tol {
        StopReason::Converged
    } else {
        StopReason::MaxIters
    };
    while reason == StopReason::MaxIters && iter < cfg.max_iters {
        iter += 1;
        let g = match cfg.step_rule {
            StepRule::HalfWirtinger => obj.descent_direction(&u)?,
            StepRule::Raw => obj.gradient(&u)?,
        };
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui -= gi.scale(step);
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(QimError::NonFinite { iter });
        }
        err = rel(&u);
        if err <= cfg.tol {
            reason = StopReason::Converged;
        } else if err > cfg.divergence {
            reason = StopReason::Diverged;
        }
        if iter % cfg.record_every == 0 {
            trajectory.push((iter, err));
        }
    }
    if trajectory.last().map(|t| t.0) != Some(iter) {
        trajectory.push((iter, err));
    }
    Ok(RunResult {
        iterates_used: iter,
        final_dist_rel: err,
        trajectory,
        converged: reason == StopReason::Converged,
        stop_reason: reason,
        wall_time: start.elapsed().as_secs_f64(),
        final_point: u,
    })
}

/// Fixed-step gradient descent from `u0`, stopping at `cfg.tol` relative
/// error, `cfg.max_iters` iterations or divergence.
pub fn gradient_descent<S: Scalar>(
    obj: &Objective<'_, S>,
    x_truth: &[S],
    cfg: &GdConfig,
    u0: Vec<S>,
) -> Result<RunResult<S>> {
    descend(obj, x_truth, cfg, u0, cfg.step_mu)
}

/// Descent on the plain intensity loss from `u0` with step `mu / |u0|^2`.
pub fn wirtinger_flow_from<S: Scalar>(
    ens: &SensingEnsemble<S>,
    data: &IntensityData,
    x_truth: &[S],
    cfg: &GdConfig,
    u0: Vec<S>,
) -> Result<RunResult<S>> {
    let obj = Objective::new(QimModel::Intensity, ens, &data.y)?;
    let s0 = crate::scalar::norm_sqr(&u0);
    if s0 == 0.0 {
        return Err(QimError::ZeroSignal);
    }
    descend(&obj, x_truth, cfg, u0, cfg.step_mu / s0)
}

/// Wirtinger Flow: spectral initialization followed by fixed-step descent on
/// the intensity loss.
pub fn wirtinger_flow_baseline<S: Scalar>(
    ens: &SensingEnsemble<S>,
    data: &IntensityData,
    x_truth: &[S],
    cfg: &GdConfig,
    power_iters: usize,
    seed: u64,
) -> Result<RunResult<S>> {
    let u0 = spectral_init(ens, data, power_iters, seed)?;
    wirtinger_flow_from(ens, data, x_truth, cfg, u0)
}
