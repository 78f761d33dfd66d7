//! Empirical landscape probes for the real-field losses.
//!
//! Each probe evaluates the finite-sample loss at coordinates chosen from a
//! regime where the theory predicts a sign, and records the value together
//! with those coordinates.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::error::{QimError, Result};
use crate::losses::{Objective, PolarPoint, QimModel};
use crate::measurements::SensingEnsemble;
use crate::optimizers::{gradient_descent, random_init, GdConfig, StopReason};
use crate::rng::SeedTree;
use crate::scalar::{norm, Field};

/// Dense eigendecompositions are used up to this dimension.
pub const DENSE_LIMIT: usize = 256;

/// Saddle-candidate thresholds: relative gradient norm and curvature.
pub const STATIONARY_TOL: f64 = 1e-6;
pub const NEGATIVE_CURVATURE_TOL: f64 = -1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let len = norm(&v);
    if len == 0.0 || !len.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= len);
    Some(v)
}

/// Uniform direction on the unit sphere.
pub fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut g = SeedTree::new(seed).normals();
    loop {
        let mut v = vec![0.0; n];
        g.fill(&mut v);
        if let Some(u) = normalized(v) {
            return u;
        }
    }
}

/// Component of `v` orthogonal to the unit vector `x_hat`, normalized.
/// Two Gram-Schmidt passes keep the residual overlap at rounding level.
fn orthogonal_part(v: &[f64], x_hat: &[f64]) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        let d = dot(&w, x_hat);
        w.iter_mut().zip(x_hat).for_each(|(a, b)| *a -= d * b);
        w = normalized(w)?;
    }
    Some(w)
}

/// Some unit vector orthogonal to `x_hat`, built from the coordinate axis
/// where `x_hat` is smallest.
fn any_orthogonal(x_hat: &[f64]) -> Vec<f64> {
    let j = (0..x_hat.len())
        .min_by(|&a, &b| x_hat[a].abs().total_cmp(&x_hat[b].abs()))
        .unwrap_or(0);
    let mut e = vec![0.0; x_hat.len()];
    e[j] = 1.0;
    orthogonal_part(&e, x_hat).expect("n >= 2 leaves an orthogonal axis")
}

/// Polar coordinates of the ray through `u_hat`: `theta = angle(u_hat, x)`.
pub fn polar_on_ray(x: &[f64], u_hat: &[f64], r: f64) -> Result<PolarPoint> {
    let x_hat = normalized(x.to_vec()).ok_or(QimError::ZeroSignal)?;
    let u_hat = normalized(u_hat.to_vec())
        .ok_or_else(|| QimError::Domain("direction must be nonzero".into()))?;
    let c = dot(&u_hat, &x_hat).clamp(-1.0, 1.0);
    let e_perp = match orthogonal_part(&u_hat, &x_hat) {
        Some(e) if (1.0 - c * c).sqrt() > 1e-10 => e,
        _ => any_orthogonal(&x_hat),
    };
    PolarPoint::new(x, r, c.acos(), &e_perp)
}

/// Largest and smallest eigenvalue of a symmetric matrix.
fn extreme_eigs(h: DMatrix<f64>) -> (f64, f64) {
    let ev = SymmetricEigen::new(h).eigenvalues;
    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Power iteration on `v -> H v + shift v`, returning the Rayleigh quotient
/// of `H` at the final vector.
fn power_rayleigh(
    hv: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    n: usize,
    shift: f64,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut v = random_unit(n, seed);
    for _ in 0..iters {
        let mut w = hv(&v)?;
        w.iter_mut().zip(&v).for_each(|(a, b)| *a += shift * b);
        match normalized(w) {
            Some(u) => v = u,
            None => break,
        }
    }
    Ok(dot(&v, &hv(&v)?))
}

/// Largest eigenvalue of the Hessian at `u` without forming it.
pub fn power_max_eig(obj: &Objective<'_, f64>, u: &[f64], iters: usize, seed: u64) -> Result<f64> {
    let hv = |v: &[f64]| obj.hessian_vector(u, v);
    let n = u.len();
    // Shifting by the spectral radius makes every eigenvalue nonnegative.
    let radius = power_rayleigh(&hv, n, 0.0, iters, seed)?.abs() * 1.01;
    power_rayleigh(&hv, n, radius, iters, SeedTree::new(seed).child(1).seed())
}

/// Smallest eigenvalue of the Hessian at `u` without forming it.
pub fn power_min_eig(obj: &Objective<'_, f64>, u: &[f64], iters: usize, seed: u64) -> Result<f64> {
    let hv = |v: &[f64]| obj.hessian_vector(u, v);
    let n = u.len();
    let radius = power_rayleigh(&hv, n, 0.0, iters, seed)?.abs() * 1.01;
    let neg = |v: &[f64]| -> Result<Vec<f64>> { Ok(hv(v)?.into_iter().map(|a| -a).collect()) };
    power_rayleigh(&neg, n, radius, iters, SeedTree::new(seed).child(1).seed()).map(|l| -l)
}

const POWER_ITERS: usize = 300;

fn require_real_dense(obj: &Objective<'_, f64>) -> Result<()> {
    if obj.ensemble().rows().is_none() {
        return Err(QimError::Domain("landscape probes need explicit real rows".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OriginCurvature {
    pub probes: usize,
    /// Max of `H_xi,xi(0)` over the probe directions.
    pub probe_max: f64,
    /// Exact top eigenvalue of `H(0)` (dense for small n, power method above).
    pub max_eigenvalue: f64,
    pub dense: bool,
    pub expected: Option<f64>,
}

/// Population value of `H_xi,xi(0)` for unit `xi` and `|x| = 1`, when it is
/// known in closed form.
pub fn expected_origin_curvature(model: QimModel) -> Option<f64> {
    match model {
        QimModel::Qim1 => Some(-4.0),
        QimModel::Qim2 { beta } => Some(-2.0 * (beta + 2.0)),
        QimModel::Qim3 { beta1, beta2 } => {
            Some(2.0 * (-1.0 / (beta2 * beta2) - (beta1 + 2.0 * beta2) / (beta2 * beta2)))
        }
        QimModel::Intensity => None,
    }
}

/// Directional curvature at the origin over `probes` random directions, and
/// the top Hessian eigenvalue there.
pub fn curvature_at_zero(obj: &Objective<'_, f64>, probes: usize, seed: u64) -> Result<OriginCurvature> {
    require_real_dense(obj)?;
    if probes == 0 {
        return Err(QimError::Config("at least one probe direction is needed".into()));
    }
    let n = obj.ensemble().n();
    let zero = vec![0.0; n];
    let tree = SeedTree::new(seed);
    let curv: Vec<f64> = (0..probes)
        .into_par_iter()
        .map(|i| obj.dir_curvature(&zero, &random_unit(n, tree.child(i as u64).seed())))
        .collect::<Result<_>>()?;
    let probe_max = curv.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let dense = n <= DENSE_LIMIT;
    let max_eigenvalue = if dense {
        extreme_eigs(obj.hessian(&zero)?).0
    } else {
        power_max_eig(obj, &zero, POWER_ITERS, tree.child(u64::MAX).seed())?
    };
    Ok(OriginCurvature {
        probes,
        probe_max,
        max_eigenvalue,
        dense,
        expected: expected_origin_curvature(obj.model()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn holds(self, v: f64) -> bool {
        match self {
            Sign::Positive => v > 0.0,
            Sign::Negative => v < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub tag: String,
    pub u_hat: Vec<f64>,
}

/// The aligned and anti-aligned directions, `orthogonal` random directions
/// orthogonal to `x` and `random` uniform directions.
pub fn direction_set(x: &[f64], orthogonal: usize, random: usize, seed: u64) -> Result<Vec<Direction>> {
    let x_hat = normalized(x.to_vec()).ok_or(QimError::ZeroSignal)?;
    let n = x.len();
    let tree = SeedTree::new(seed);
    let mut dirs = vec![
        Direction { tag: "aligned".into(), u_hat: x_hat.clone() },
        Direction { tag: "anti-aligned".into(), u_hat: x_hat.iter().map(|v| -v).collect() },
    ];
    for i in 0..orthogonal {
        let v = random_unit(n, tree.path(&[0, i as u64]).seed());
        let u_hat = orthogonal_part(&v, &x_hat).unwrap_or_else(|| any_orthogonal(&x_hat));
        dirs.push(Direction { tag: format!("orthogonal-{i}"), u_hat });
    }
    for i in 0..random {
        dirs.push(Direction {
            tag: format!("random-{i}"),
            u_hat: random_unit(n, tree.path(&[1, i as u64]).seed()),
        });
    }
    Ok(dirs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialRegimes {
    /// `d_R f > 0` for `R >= 1 + eps0`, every model and direction.
    pub eps0: f64,
    /// QIM3 only: `d_R f < 0` for `R <= r_small`.
    pub r_small: f64,
    /// QIM3 only, directions with `|cos angle(u, x)| >= aligned_cos`:
    /// negative on `[c1, 1 - eps0]`.
    pub c1: f64,
    pub aligned_cos: f64,
}

impl Default for RadialRegimes {
    fn default() -> Self {
        RadialRegimes {
            eps0: 0.1,
            r_small: 0.01,
            c1: 0.25,
            aligned_cos: 0.99,
        }
    }
}

impl RadialRegimes {
    pub fn predict(&self, model: QimModel, r: f64, cos_to_x: f64) -> Option<Sign> {
        if r >= 1.0 + self.eps0 {
            return Some(Sign::Positive);
        }
        if let QimModel::Qim3 { .. } = model {
            if r <= self.r_small {
                return Some(Sign::Negative);
            }
            if cos_to_x.abs() >= self.aligned_cos && r >= self.c1 && r <= 1.0 - self.eps0 {
                return Some(Sign::Negative);
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialRecord {
    pub r: f64,
    pub tag: String,
    pub cos_to_x: f64,
    pub d_r: f64,
    pub prediction: Option<Sign>,
    /// True when there is no prediction or the sign matches it.
    pub sign_ok: bool,
}

/// `d_R f` along every direction at every radius, with regime predictions.
pub fn radial_sign_scan(
    obj: &Objective<'_, f64>,
    x: &[f64],
    r_grid: &[f64],
    directions: &[Direction],
    regimes: &RadialRegimes,
) -> Result<Vec<RadialRecord>> {
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0)) {
        return Err(QimError::Domain(format!("radii must be positive, got {r}")));
    }
    let x_norm = norm(x);
    if x_norm == 0.0 {
        return Err(QimError::ZeroSignal);
    }
    let jobs: Vec<(f64, &Direction)> = r_grid
        .iter()
        .flat_map(|&r| directions.iter().map(move |d| (r, d)))
        .collect();
    jobs.into_par_iter()
        .map(|(r, d)| {
            let p = polar_on_ray(x, &d.u_hat, r)?;
            let cos_to_x = p.theta.cos();
            let d_r = obj.polar_eval(&p)?.d_r;
            let prediction = regimes.predict(obj.model(), r, cos_to_x);
            Ok(RadialRecord {
                r,
                tag: d.tag.clone(),
                cos_to_x,
                d_r,
                prediction,
                sign_ok: prediction.is_none_or(|s| s.holds(d_r)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquatorRecord {
    pub r: f64,
    pub theta: f64,
    pub tag: String,
    /// `d_theta,theta f` for QIM2/QIM3; for QIM1, `H_{x,x}` at the radial
    /// critical point on the equator.
    pub curvature: f64,
    pub sign_ok: bool,
}

/// Smallest `R` in `(0, r_hi]` with `d_R f = 0` on the ray `theta`, by bisection.
fn radial_root(obj: &Objective<'_, f64>, x: &[f64], e_perp: &[f64], theta: f64, r_hi: f64) -> Result<Option<f64>> {
    let d_r = |r: f64| -> Result<f64> { Ok(obj.polar_eval(&PolarPoint::new(x, r, theta, e_perp)?)?.d_r) };
    let (mut lo, mut hi) = (1e-12, r_hi);
    if d_r(lo)? >= 0.0 || d_r(hi)? <= 0.0 {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if d_r(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Curvature in the angular direction near the equator `theta = pi/2`.
///
/// For QIM1 the radial critical point on each equatorial ray is located
/// first and the curvature along `x` is recorded there instead.
pub fn equator_curvature_check(
    obj: &Objective<'_, f64>,
    x: &[f64],
    r_grid: &[f64],
    offsets: &[f64],
    directions: &[Direction],
) -> Result<Vec<EquatorRecord>> {
    if let Some(t) = offsets.iter().find(|t| t.abs() >= 0.2) {
        return Err(QimError::Config(format!("equator offsets must lie in (-0.2, 0.2), got {t}")));
    }
    let x_hat = normalized(x.to_vec()).ok_or(QimError::ZeroSignal)?;
    let perps: Vec<(String, Vec<f64>)> = directions
        .iter()
        .map(|d| {
            let e = orthogonal_part(&d.u_hat, &x_hat).unwrap_or_else(|| any_orthogonal(&x_hat));
            (d.tag.clone(), e)
        })
        .collect();
    if obj.model() == QimModel::Qim1 {
        return perps
            .par_iter()
            .map(|(tag, e)| {
                let r = radial_root(obj, x, e, FRAC_PI_2, 100.0)?
                    .ok_or_else(|| QimError::Domain(format!("no radial critical point on ray {tag}")))?;
                let u = PolarPoint::new(x, r, FRAC_PI_2, e)?.to_cartesian();
                let curvature = obj.dir_curvature(&u, &x_hat)?;
                Ok(EquatorRecord {
                    r,
                    theta: FRAC_PI_2,
                    tag: tag.clone(),
                    curvature,
                    sign_ok: curvature < 0.0,
                })
            })
            .collect();
    }
    let mut jobs: Vec<(f64, f64, &(String, Vec<f64>))> = Vec::new();
    for &r in r_grid {
        for &t in offsets {
            jobs.extend(perps.iter().map(|p| (r, t, p)));
        }
    }
    jobs.into_par_iter()
        .map(|(r, t, (tag, e))| {
            let theta = FRAC_PI_2 + t;
            let curvature = obj.polar_eval(&PolarPoint::new(x, r, theta, e)?)?.d_thetatheta;
            Ok(EquatorRecord {
                r,
                theta,
                tag: tag.clone(),
                curvature,
                sign_ok: curvature < 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvexityKind {
    /// Minimum Hessian eigenvalue.
    Full,
    /// Curvature along the direction to the nearer of `x`, `-x`.
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityPoint {
    pub sign: i8,
    pub offset: f64,
    pub restricted: Option<f64>,
    pub full_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub kind: ConvexityKind,
    pub radius: f64,
    /// Minimum of the asserted quantity over all sample points.
    pub min_value: f64,
    /// Minimum full-Hessian eigenvalue, recorded for every model.
    pub min_full_eig: f64,
    pub points: Vec<ConvexityPoint>,
}

/// Curvature on the ball of relative `radius` around `x` and `-x`.
///
/// The centres are always included. QIM2 is assessed along `(u - x)/|u - x|`
/// (restricted); the other models by the minimum eigenvalue.
pub fn convexity_near_truth(
    obj: &Objective<'_, f64>,
    x: &[f64],
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    require_real_dense(obj)?;
    if !(radius > 0.0 && radius <= 0.1) {
        return Err(QimError::Config(format!("ball radius must lie in (0, 0.1], got {radius}")));
    }
    if samples == 0 {
        return Err(QimError::Config("at least one sample point is needed".into()));
    }
    let n = x.len();
    let x_norm = norm(x);
    if x_norm == 0.0 {
        return Err(QimError::ZeroSignal);
    }
    let kind = match obj.model() {
        QimModel::Qim2 { .. } => ConvexityKind::Restricted,
        _ => ConvexityKind::Full,
    };
    let tree = SeedTree::new(seed);
    let jobs: Vec<(i8, usize)> = [1i8, -1]
        .iter()
        .flat_map(|&s| (0..=samples).map(move |i| (s, i)))
        .collect();
    let points: Vec<ConvexityPoint> = jobs
        .into_par_iter()
        .map(|(sign, i)| {
            let centre: Vec<f64> = x.iter().map(|v| sign as f64 * v).collect();
            // Sample 0 is the centre; the others are uniform in the ball.
            let (dir, offset) = if i == 0 {
                (vec![0.0; n], 0.0)
            } else {
                let t = tree.path(&[sign as u64, i as u64]);
                let u01: f64 = t.child(1).rng().random();
                (random_unit(n, t.seed()), radius * x_norm * u01.powf(1.0 / n as f64))
            };
            let u: Vec<f64> = centre.iter().zip(&dir).map(|(c, d)| c + offset * d).collect();
            let full_min_eig = if n <= DENSE_LIMIT {
                extreme_eigs(obj.hessian(&u)?).1
            } else {
                power_min_eig(obj, &u, POWER_ITERS, tree.path(&[2, i as u64]).seed())?
            };
            let restricted = match kind {
                ConvexityKind::Restricted if offset > 0.0 => Some(obj.dir_curvature(&u, &dir)?),
                ConvexityKind::Restricted => Some(full_min_eig),
                ConvexityKind::Full => None,
            };
            Ok(ConvexityPoint {
                sign,
                offset: offset / x_norm,
                restricted,
                full_min_eig,
            })
        })
        .collect::<Result<_>>()?;
    let min_full_eig = points.iter().map(|p| p.full_min_eig).fold(f64::INFINITY, f64::min);
    let min_value = match kind {
        ConvexityKind::Full => min_full_eig,
        ConvexityKind::Restricted => points
            .iter()
            .filter_map(|p| p.restricted)
            .fold(f64::INFINITY, f64::min),
    };
    Ok(ConvexityReport {
        kind,
        radius,
        min_value,
        min_full_eig,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Endpoint {
    pub trial: usize,
    pub dist_rel: f64,
    pub grad_norm_rel: f64,
    pub min_curvature: f64,
    pub saddle_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinCensus {
    pub trials: usize,
    pub reached_truth: usize,
    pub reached_other: usize,
    pub nonconverged: usize,
    /// Endpoints classified `reached_other`.
    pub others: Vec<Endpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Truth,
    Other,
    Stalled,
}

/// Gradient descent from `trials` random starts. An endpoint away from `±x`
/// counts as `reached_other` when its gradient norm is at most
/// `STATIONARY_TOL * sqrt(mean y)`, and as `nonconverged` otherwise.
pub fn basin_census(
    obj: &Objective<'_, f64>,
    x: &[f64],
    trials: usize,
    cfg: &GdConfig,
    seed: u64,
) -> Result<BasinCensus> {
    if trials == 0 {
        return Err(QimError::Config("trials must be at least 1".into()));
    }
    let data = crate::measurements::IntensityData::from_y(obj.data().to_vec());
    let tree = SeedTree::new(seed);
    let inits = (0..trials)
        .map(|t| random_init::<f64>(x.len(), tree.child(t as u64).seed(), Some(&data)))
        .collect::<Result<Vec<_>>>()?;
    basin_census_from(obj, x, inits, cfg)
}

/// As [`basin_census`], from the given starting points.
pub fn basin_census_from(
    obj: &Objective<'_, f64>,
    x: &[f64],
    inits: Vec<Vec<f64>>,
    cfg: &GdConfig,
) -> Result<BasinCensus> {
    require_real_dense(obj)?;
    if inits.is_empty() {
        return Err(QimError::Config("trials must be at least 1".into()));
    }
    cfg.validate()?;
    let y = obj.data();
    let scale = (y.iter().sum::<f64>() / y.len() as f64).sqrt();
    let trials = inits.len();
    let runs: Vec<(Outcome, Option<Endpoint>)> = inits
        .into_par_iter()
        .enumerate()
        .map(|(t, u0)| classify(obj, x, cfg, u0, t, scale))
        .collect::<Result<_>>()?;
    let count = |o: Outcome| runs.iter().filter(|r| r.0 == o).count();
    Ok(BasinCensus {
        trials,
        reached_truth: count(Outcome::Truth),
        reached_other: count(Outcome::Other),
        nonconverged: count(Outcome::Stalled),
        others: runs.into_iter().filter_map(|r| r.1).collect(),
    })
}

/// Run one descent from `u0` and classify the endpoint.
fn classify(
    obj: &Objective<'_, f64>,
    x: &[f64],
    cfg: &GdConfig,
    u0: Vec<f64>,
    trial: usize,
    scale: f64,
) -> Result<(Outcome, Option<Endpoint>)> {
    let run = match gradient_descent(obj, x, cfg, u0) {
        Ok(run) => run,
        Err(QimError::NonFinite { .. }) => return Ok((Outcome::Stalled, None)),
        Err(e) => return Err(e),
    };
    match run.stop_reason {
        StopReason::Converged => Ok((Outcome::Truth, None)),
        StopReason::Diverged => Ok((Outcome::Stalled, None)),
        StopReason::MaxIters => {
            let u = run.final_point;
            let grad_norm_rel = norm(&obj.gradient(&u)?) / scale;
            if !(grad_norm_rel <= STATIONARY_TOL) {
                return Ok((Outcome::Stalled, None));
            }
            let min_curvature = if u.len() <= DENSE_LIMIT {
                extreme_eigs(obj.hessian(&u)?).1
            } else {
                power_min_eig(obj, &u, POWER_ITERS, trial as u64)?
            };
            Ok((
                Outcome::Other,
                Some(Endpoint {
                    trial,
                    dist_rel: run.final_dist_rel,
                    grad_norm_rel,
                    min_curvature,
                    saddle_candidate: min_curvature <= NEGATIVE_CURVATURE_TOL,
                }),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeConfig {
    pub model: QimModel,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub origin_probes: usize,
    pub radial_directions: usize,
    pub r_grid: Vec<f64>,
    pub regimes: RadialRegimes,
    pub equator_r: Vec<f64>,
    pub equator_offsets: Vec<f64>,
    pub equator_directions: usize,
    pub ball_radius: f64,
    pub ball_samples: usize,
    pub census_trials: usize,
    pub gd: GdConfig,
}

impl LandscapeConfig {
    pub fn new(model: QimModel, n: usize, m: usize, seed: u64) -> Self {
        LandscapeConfig {
            model,
            n,
            m,
            seed,
            origin_probes: 20,
            radial_directions: 200,
            r_grid: vec![0.01, 0.1, 0.25, 0.5, 0.8, 1.2, 2.0, 4.0, 10.0],
            regimes: RadialRegimes::default(),
            equator_r: vec![0.25, 0.5, 1.0, 2.0],
            equator_offsets: vec![-0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15],
            equator_directions: 5,
            ball_radius: 0.05,
            ball_samples: 20,
            census_trials: 50,
            gd: GdConfig::for_model(model),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model == QimModel::Intensity {
            return Err(QimError::Config("landscape probes cover qim1, qim2 and qim3".into()));
        }
        if self.n < 2 || self.m == 0 {
            return Err(QimError::Config(format!("need n >= 2 and m >= 1, got n={} m={}", self.n, self.m)));
        }
        if self.origin_probes == 0 || self.radial_directions == 0 || self.census_trials == 0 {
            return Err(QimError::Config("probe and trial counts must be at least 1".into()));
        }
        self.gd.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub violations: usize,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeReport {
    pub model: QimModel,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// `m < 4n`: the sampling regime where no guarantee is claimed.
    pub below_threshold: bool,
    pub origin: OriginCurvature,
    pub radial_scan: Vec<RadialRecord>,
    pub equator_curvatures: Vec<EquatorRecord>,
    pub convexity: ConvexityReport,
    pub basin_census: BasinCensus,
    pub checks: Vec<CheckSummary>,
}

impl LandscapeReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Ratio `m/n` below which a failed check is reported but not treated as a
/// contradiction.
pub const SAMPLING_THRESHOLD: usize = 4;

/// Every probe on a fresh Gaussian problem with a random unit-norm signal.
pub fn run_landscape(cfg: &LandscapeConfig) -> Result<LandscapeReport> {
    cfg.validate()?;
    let tree = SeedTree::new(cfg.seed);
    let ens = SensingEnsemble::<f64>::gaussian(cfg.n, cfg.m, tree.child(0).seed())?;
    let x = random_unit(cfg.n, tree.child(1).seed());
    let data = ens.intensities(&x)?;
    let obj = Objective::new(cfg.model, &ens, &data.y)?;
    debug_assert_eq!(ens.field(), Field::Real);

    let origin = curvature_at_zero(&obj, cfg.origin_probes, tree.child(2).seed())?;
    let dirs = direction_set(&x, 0, cfg.radial_directions, tree.child(3).seed())?;
    let radial_scan = radial_sign_scan(&obj, &x, &cfg.r_grid, &dirs, &cfg.regimes)?;
    let eq_dirs = direction_set(&x, cfg.equator_directions, 0, tree.child(4).seed())?;
    let equator_curvatures =
        equator_curvature_check(&obj, &x, &cfg.equator_r, &cfg.equator_offsets, &eq_dirs[2..])?;
    let convexity = convexity_near_truth(&obj, &x, cfg.ball_radius, cfg.ball_samples, tree.child(5).seed())?;
    let basin_census = basin_census(&obj, &x, cfg.census_trials, &cfg.gd, tree.child(6).seed())?;

    let predicted = radial_scan.iter().filter(|r| r.prediction.is_some()).count();
    let convexity_floor = if cfg.model == QimModel::Qim1 { 1.0 } else { 0.0 };
    let checks = vec![
        CheckSummary {
            name: "origin_curvature_negative".into(),
            violations: usize::from(!(origin.max_eigenvalue < 0.0)),
            evaluated: 1,
        },
        CheckSummary {
            name: "radial_sign".into(),
            violations: radial_scan.iter().filter(|r| !r.sign_ok).count(),
            evaluated: predicted,
        },
        CheckSummary {
            name: "equator_curvature".into(),
            violations: equator_curvatures.iter().filter(|r| !r.sign_ok).count(),
            evaluated: equator_curvatures.len(),
        },
        CheckSummary {
            name: "convexity_near_truth".into(),
            violations: convexity
                .points
                .iter()
                .filter(|p| !(p.restricted.unwrap_or(p.full_min_eig) > convexity_floor))
                .count(),
            evaluated: convexity.points.len(),
        },
        CheckSummary {
            name: "no_spurious_minima".into(),
            violations: basin_census.reached_other,
            evaluated: basin_census.trials,
        },
    ];
    Ok(LandscapeReport {
        model: cfg.model,
        n: cfg.n,
        m: cfg.m,
        seed: cfg.seed,
        below_threshold: cfg.m < SAMPLING_THRESHOLD * cfg.n,
        origin,
        radial_scan,
        equator_curvatures,
        convexity,
        basin_census,
        checks,
    })
}
