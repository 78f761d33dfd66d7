//! Quotient intensity losses and their derivatives.
//!
//! Every model is a mean of per-measurement terms `G(q_k, s; y_k)` with
//! `q_k = |a_k . u|^2` and `s = |u|^2`:
//!
//! | model     | G                                   |
//! |-----------|-------------------------------------|
//! | QIM1      | (q - y)^2 / y                       |
//! | QIM2      | (q - y)^2 / (beta s + y)            |
//! | QIM3      | (q - y)^2 / (s + beta1 q + beta2 y) |
//! | INTENSITY | (q - y)^2                           |
//!
//! Gradients, directional curvatures, Hessians and the polar derivatives are
//! all assembled from the partials of `G` in `q` and `s`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QimError, Result};
use crate::measurements::{IntensityData, SensingEnsemble};
use crate::scalar::{norm, norm_sqr, Scalar};

/// Relative threshold below which a QIM1 denominator counts as singular.
pub const QIM1_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum QimModel {
    Qim1,
    Qim2 { beta: f64 },
    Qim3 { beta1: f64, beta2: f64 },
    Intensity,
}

impl QimModel {
    pub const DEFAULT_QIM2: QimModel = QimModel::Qim2 { beta: 1.0 };
    pub const DEFAULT_QIM3: QimModel = QimModel::Qim3 {
        beta1: 0.1,
        beta2: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            QimModel::Qim2 { beta } if !ok(beta) => Err(QimError::Config(format!(
                "QIM2 needs beta > 0, got {beta}"
            ))),
            QimModel::Qim3 { beta1, beta2 } if !ok(beta1) || !ok(beta2) => {
                Err(QimError::Config(format!(
                    "QIM3 needs beta1, beta2 > 0, got {beta1}, {beta2}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Short name without parameters.
    pub fn name(&self) -> &'static str {
        match self {
            QimModel::Qim1 => "qim1",
            QimModel::Qim2 { .. } => "qim2",
            QimModel::Qim3 { .. } => "qim3",
            QimModel::Intensity => "intensity",
        }
    }

    /// Step size used in the experiments. For QIM1 and the intensity loss
    /// these are our own choices.
    pub fn default_step(&self) -> f64 {
        match self {
            QimModel::Qim1 => 0.2,
            QimModel::Qim2 { .. } => 0.4,
            QimModel::Qim3 { .. } => 0.3,
            QimModel::Intensity => 0.1,
        }
    }

    /// Value and partials of the per-measurement term.
    #[inline]
    pub fn partials(&self, q: f64, s: f64, y: f64) -> Partials {
        let r = q - y;
        match *self {
            QimModel::Qim1 => Partials {
                g: r * r / y,
                q: 2.0 * r / y,
                qq: 2.0 / y,
                ..Partials::default()
            },
            QimModel::Intensity => Partials {
                g: r * r,
                q: 2.0 * r,
                qq: 2.0,
                ..Partials::default()
            },
            QimModel::Qim2 { beta } => {
                let d = beta * s + y;
                let (d2, d3) = (d * d, d * d * d);
                Partials {
                    g: r * r / d,
                    q: 2.0 * r / d,
                    qq: 2.0 / d,
                    s: -beta * r * r / d2,
                    ss: 2.0 * beta * beta * r * r / d3,
                    qs: -2.0 * beta * r / d2,
                }
            }
            QimModel::Qim3 { beta1, beta2 } => {
                let d = s + beta1 * q + beta2 * y;
                let (d2, d3) = (d * d, d * d * d);
                let r2 = r * r;
                Partials {
                    g: r2 / d,
                    q: 2.0 * r / d - beta1 * r2 / d2,
                    qq: 2.0 / d - 4.0 * beta1 * r / d2 + 2.0 * beta1 * beta1 * r2 / d3,
                    s: -r2 / d2,
                    ss: 2.0 * r2 / d3,
                    qs: -2.0 * r / d2 + 2.0 * beta1 * r2 / d3,
                }
            }
        }
    }
}

impl fmt::Display for QimModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QimModel::Qim2 { beta } => write!(f, "qim2:{beta}"),
            QimModel::Qim3 { beta1, beta2 } => write!(f, "qim3:{beta1}:{beta2}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for QimModel {
    type Err = QimError;

    /// Accepts `qim1`, `qim2[:beta]`, `qim3[:beta1:beta2]`, `intensity` (or `wf`).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| QimError::Config(format!("bad model parameter '{t}' in '{s}'")))
        };
        let model = match parts.as_slice() {
            ["qim1"] => QimModel::Qim1,
            ["intensity"] | ["wf"] => QimModel::Intensity,
            ["qim2"] => QimModel::DEFAULT_QIM2,
            ["qim2", b] => QimModel::Qim2 { beta: num(b)? },
            ["qim3"] => QimModel::DEFAULT_QIM3,
            ["qim3", b1, b2] => QimModel::Qim3 {
                beta1: num(b1)?,
                beta2: num(b2)?,
            },
            _ => return Err(QimError::Config(format!("unknown model '{s}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Per-measurement term `G` and its partial derivatives in `q` and `s`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partials {
    pub g: f64,
    pub q: f64,
    pub s: f64,
    pub qq: f64,
    pub ss: f64,
    pub qs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    /// Fail on a singular QIM1 denominator.
    #[default]
    Error,
    /// Leave singular measurements out of the mean.
    Drop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulation {
    /// Left to right over k. Bit-reproducible.
    #[default]
    Sequential,
    /// Pairwise tree over k; agrees with sequential to about 1e-12 relative.
    Pairwise,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObjectiveOptions {
    pub guard: GuardPolicy,
    pub accumulation: Accumulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<S> {
    pub value: f64,
    pub gradient: Option<Vec<S>>,
    /// QIM1 measurements whose intensity fell below the guard.
    pub singular_hits: usize,
}

/// A loss bound to an ensemble and data.
#[derive(Debug, Clone)]
pub struct Objective<'a, S> {
    model: QimModel,
    ens: &'a SensingEnsemble<S>,
    y: &'a [f64],
    active: Option<Vec<bool>>,
    m_active: usize,
    singular: usize,
    opts: ObjectiveOptions,
}

fn pairwise(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise(a) + pairwise(b)
    }
}

impl<'a, S: Scalar> Objective<'a, S> {
    pub fn new(model: QimModel, ens: &'a SensingEnsemble<S>, y: &'a [f64]) -> Result<Self> {
        Self::with_options(model, ens, y, ObjectiveOptions::default())
    }

    pub fn with_options(
        model: QimModel,
        ens: &'a SensingEnsemble<S>,
        y: &'a [f64],
        opts: ObjectiveOptions,
    ) -> Result<Self> {
        model.validate()?;
        if y.len() != ens.m() {
            return Err(QimError::DimensionMismatch {
                what: "intensity data",
                expected: ens.m(),
                got: y.len(),
            });
        }
        let mut obj = Objective {
            model,
            ens,
            y,
            active: None,
            m_active: y.len(),
            singular: 0,
            opts,
        };
        if model == QimModel::Qim1 {
            let guard = QIM1_GUARD * y.iter().sum::<f64>() / y.len() as f64;
            let singular: Vec<usize> = (0..y.len()).filter(|&k| y[k] <= guard).collect();
            if let Some(&k) = singular.first() {
                match opts.guard {
                    GuardPolicy::Error => {
                        return Err(QimError::SingularDenominator {
                            index: k,
                            value: y[k],
                            guard,
                        })
                    }
                    GuardPolicy::Drop => {
                        let mut active = vec![true; y.len()];
                        singular.iter().for_each(|&k| active[k] = false);
                        obj.m_active = y.len() - singular.len();
                        obj.singular = singular.len();
                        obj.active = Some(active);
                        if obj.m_active == 0 {
                            return Err(QimError::SingularDenominator {
                                index: k,
                                value: y[k],
                                guard,
                            });
                        }
                    }
                }
            }
        }
        Ok(obj)
    }

    pub fn model(&self) -> QimModel {
        self.model
    }

    pub fn ensemble(&self) -> &'a SensingEnsemble<S> {
        self.ens
    }

    pub fn data(&self) -> &'a [f64] {
        self.y
    }

    pub fn singular_hits(&self) -> usize {
        self.singular
    }

    /// Number of measurements entering the mean.
    pub fn active_count(&self) -> usize {
        self.m_active
    }

    #[inline]
    fn is_active(&self, k: usize) -> bool {
        self.active.as_ref().is_none_or(|a| a[k])
    }

    fn check(&self, u: &[S]) -> Result<()> {
        if u.len() != self.ens.n() {
            return Err(QimError::DimensionMismatch {
                what: "signal",
                expected: self.ens.n(),
                got: u.len(),
            });
        }
        Ok(())
    }

    fn sum(&self, terms: &[f64]) -> f64 {
        match self.opts.accumulation {
            Accumulation::Sequential => terms.iter().sum(),
            Accumulation::Pairwise => pairwise(terms),
        }
    }

    fn partials_at(&self, z: &[S], s: f64) -> Vec<Option<Partials>> {
        z.iter()
            .enumerate()
            .map(|(k, zk)| {
                self.is_active(k)
                    .then(|| self.model.partials(zk.abs_sqr(), s, self.y[k]))
            })
            .collect()
    }

    /// Loss value, and the gradient if requested.
    pub fn eval(&self, u: &[S], with_gradient: bool) -> Result<LossEval<S>> {
        self.check(u)?;
        let mut z = vec![S::zero(); self.ens.m()];
        self.ens.forward_into(u, &mut z);
        let s = norm_sqr(u);
        let parts = self.partials_at(&z, s);
        let inv_m = 1.0 / self.m_active as f64;
        let g: Vec<f64> = parts.iter().map(|p| p.map_or(0.0, |p| p.g)).collect();
        let value = self.sum(&g) * inv_m;

        let gradient = with_gradient.then(|| {
            let mut w = z;
            for (wk, p) in w.iter_mut().zip(&parts) {
                *wk = wk.scale(p.map_or(0.0, |p| p.q));
            }
            let mut out = vec![S::zero(); self.ens.n()];
            self.ens.adjoint_into(&w, &mut out);
            let gs: Vec<f64> = parts.iter().map(|p| p.map_or(0.0, |p| p.s)).collect();
            let gs = self.sum(&gs);
            let c = S::GRADIENT_FACTOR * inv_m;
            for (o, ui) in out.iter_mut().zip(u) {
                *o = (*o + ui.scale(gs)).scale(c);
            }
            out
        });
        Ok(LossEval {
            value,
            gradient,
            singular_hits: self.singular,
        })
    }

    pub fn value(&self, u: &[S]) -> Result<f64> {
        Ok(self.eval(u, false)?.value)
    }

    /// Euclidean gradient for real signals; Wirtinger derivative df/d(conj u)
    /// for complex signals.
    pub fn gradient(&self, u: &[S]) -> Result<Vec<S>> {
        Ok(self
            .eval(u, true)?
            .gradient
            .expect("gradient was requested"))
    }

    /// The update direction used by gradient descent: the Wirtinger derivative
    /// of `f/2`. For real signals this is a quarter of the Euclidean gradient.
    pub fn descent_direction(&self, u: &[S]) -> Result<Vec<S>> {
        let c = 0.5 / S::GRADIENT_FACTOR;
        Ok(self.gradient(u)?.into_iter().map(|g| g.scale(c)).collect())
    }
}

impl Objective<'_, f64> {
    fn real_rows(&self) -> Result<&[f64]> {
        self.ens
            .rows()
            .ok_or_else(|| QimError::Domain("second-order quantities need explicit rows".into()))
    }

    /// Second derivative of `t -> f(u + t xi)` at `t = 0`, for unit `xi`.
    pub fn dir_curvature(&self, u: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.check(xi)?;
        if (norm(xi) - 1.0).abs() > 1e-8 {
            return Err(QimError::Domain(format!(
                "direction must have unit norm, got {}",
                norm(xi)
            )));
        }
        let z = self.ens.forward(u)?;
        let b = self.ens.forward(xi)?;
        let s = norm_sqr(u);
        let p: f64 = u.iter().zip(xi).map(|(a, c)| a * c).sum();
        let terms: Vec<f64> = (0..z.len())
            .map(|k| {
                if !self.is_active(k) {
                    return 0.0;
                }
                let g = self.model.partials(z[k] * z[k], s, self.y[k]);
                let (zk, bk) = (z[k], b[k]);
                2.0 * g.q * bk * bk
                    + 2.0 * g.s
                    + 4.0 * g.qq * zk * zk * bk * bk
                    + 8.0 * g.qs * zk * bk * p
                    + 4.0 * g.ss * p * p
            })
            .collect();
        Ok(self.sum(&terms) / self.m_active as f64)
    }

    /// Dense Hessian. Intended for n up to a few hundred.
    pub fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check(u)?;
        let rows = self.real_rows()?;
        let (n, m) = (self.ens.n(), self.ens.m());
        let z = self.ens.forward(u)?;
        let s = norm_sqr(u);
        let a = DMatrix::from_row_slice(m, n, rows);
        let mut weighted = a.clone();
        let mut v = DVector::zeros(n);
        let (mut gs, mut gss) = (0.0, 0.0);
        for k in 0..m {
            let wk = if self.is_active(k) {
                let g = self.model.partials(z[k] * z[k], s, self.y[k]);
                gs += g.s;
                gss += g.ss;
                for j in 0..n {
                    v[j] += 4.0 * g.qs * z[k] * rows[k * n + j];
                }
                2.0 * g.q + 4.0 * g.qq * z[k] * z[k]
            } else {
                0.0
            };
            weighted.row_mut(k).scale_mut(wk);
        }
        let uv = DVector::from_column_slice(u);
        let mut h = a.transpose() * weighted;
        h += &v * uv.transpose() + &uv * v.transpose();
        h += &uv * uv.transpose() * (4.0 * gss);
        for j in 0..n {
            h[(j, j)] += 2.0 * gs;
        }
        Ok(h / self.m_active as f64)
    }

    /// Hessian-vector product without forming the matrix.
    pub fn hessian_vector(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        self.check(v)?;
        let z = self.ens.forward(u)?;
        let av = self.ens.forward(v)?;
        let s = norm_sqr(u);
        let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let m = self.ens.m();
        let mut w1 = vec![0.0; m];
        let (mut gs, mut gss, mut cross) = (0.0, 0.0, 0.0);
        for k in 0..m {
            if !self.is_active(k) {
                continue;
            }
            let g = self.model.partials(z[k] * z[k], s, self.y[k]);
            w1[k] = (2.0 * g.q + 4.0 * g.qq * z[k] * z[k]) * av[k] + 4.0 * g.qs * z[k] * uv;
            cross += 4.0 * g.qs * z[k] * av[k];
            gs += g.s;
            gss += g.ss;
        }
        let mut out = self.ens.adjoint(&w1)?;
        for j in 0..out.len() {
            out[j] += cross * u[j] + 2.0 * gs * v[j] + 4.0 * gss * uv * u[j];
            out[j] /= self.m_active as f64;
        }
        Ok(out)
    }

    /// Loss and derivatives in the polar frame of `p`.
    pub fn polar_eval(&self, p: &PolarPoint) -> Result<PolarDerivatives> {
        self.check(&p.x_hat)?;
        let xa = self.ens.forward(&p.x_hat)?;
        let ya = self.ens.forward(&p.e_perp)?;
        let (st, ct) = p.theta.sin_cos();
        let c = p.x_norm * p.x_norm;
        let s = p.r * c;
        let interior = (0.01..=std::f64::consts::PI - 0.01).contains(&p.theta);
        let (mut f, mut fr, mut frr, mut ft, mut ftt) = (vec![], vec![], vec![], vec![], vec![]);
        for k in 0..xa.len() {
            if !self.is_active(k) {
                continue;
            }
            let zk = ct * xa[k] + st * ya[k];
            let wk = if interior {
                zk * ct / st - xa[k] / st
            } else {
                -st * xa[k] + ct * ya[k]
            };
            let g = self.model.partials(s * zk * zk, s, self.y[k]);
            let dq = 2.0 * p.r * c * zk * wk;
            f.push(g.g);
            fr.push(g.q * c * zk * zk + g.s * c);
            frr.push(c * c * (g.qq * zk.powi(4) + 2.0 * g.qs * zk * zk + g.ss));
            ft.push(g.q * dq);
            ftt.push(g.qq * dq * dq + g.q * 2.0 * p.r * c * (wk * wk - zk * zk));
        }
        let mean = |v: &[f64]| self.sum(v) / self.m_active as f64;
        Ok(PolarDerivatives {
            f: mean(&f),
            d_r: mean(&fr),
            d_rr: mean(&frr),
            d_theta: mean(&ft),
            d_thetatheta: mean(&ftt),
        })
    }
}

/// `u = sqrt(R) |x| (x_hat cos(theta) + e_perp sin(theta))`.
///
/// `R` is measured in units of `|x|^2`, so `R = 1, theta = 0` is `u = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
    pub x_hat: Vec<f64>,
    pub e_perp: Vec<f64>,
    pub x_norm: f64,
}

impl PolarPoint {
    pub fn new(x: &[f64], r: f64, theta: f64, e_perp: &[f64]) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(QimError::Domain(format!("R must be positive, got {r}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(QimError::Domain(format!("theta must lie in [0, pi], got {theta}")));
        }
        if x.len() != e_perp.len() {
            return Err(QimError::DimensionMismatch {
                what: "orthogonal direction",
                expected: x.len(),
                got: e_perp.len(),
            });
        }
        let x_norm = norm(x);
        if x_norm == 0.0 {
            return Err(QimError::ZeroSignal);
        }
        let x_hat: Vec<f64> = x.iter().map(|v| v / x_norm).collect();
        let dot: f64 = x_hat.iter().zip(e_perp).map(|(a, b)| a * b).sum();
        if dot.abs() > 1e-12 || (norm(e_perp) - 1.0).abs() > 1e-12 {
            return Err(QimError::Domain(
                "e_perp must be a unit vector orthogonal to x".into(),
            ));
        }
        Ok(PolarPoint {
            r,
            theta,
            x_hat,
            e_perp: e_perp.to_vec(),
            x_norm,
        })
    }

    pub fn to_cartesian(&self) -> Vec<f64> {
        let (st, ct) = self.theta.sin_cos();
        let rho = self.r.sqrt() * self.x_norm;
        self.x_hat
            .iter()
            .zip(&self.e_perp)
            .map(|(a, b)| rho * (ct * a + st * b))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarDerivatives {
    pub f: f64,
    pub d_r: f64,
    pub d_rr: f64,
    pub d_theta: f64,
    pub d_thetatheta: f64,
}

pub fn loss<S: Scalar>(
    model: QimModel,
    ens: &SensingEnsemble<S>,
    data: &IntensityData,
    u: &[S],
) -> Result<LossEval<S>> {
    Objective::new(model, ens, &data.y)?.eval(u, false)
}

pub fn gradient<S: Scalar>(
    model: QimModel,
    ens: &SensingEnsemble<S>,
    data: &IntensityData,
    u: &[S],
) -> Result<Vec<S>> {
    Objective::new(model, ens, &data.y)?.gradient(u)
}

pub fn dir_curvature(
    model: QimModel,
    ens: &SensingEnsemble<f64>,
    data: &IntensityData,
    u: &[f64],
    xi: &[f64],
) -> Result<f64> {
    Objective::new(model, ens, &data.y)?.dir_curvature(u, xi)
}

pub fn polar_eval(
    model: QimModel,
    ens: &SensingEnsemble<f64>,
    data: &IntensityData,
    p: &PolarPoint,
) -> Result<PolarDerivatives> {
    Objective::new(model, ens, &data.y)?.polar_eval(p)
}

pub fn dist_mod_phase<S: Scalar>(u: &[S], x: &[S]) -> f64 {
    S::dist_mod_phase(u, x)
}
