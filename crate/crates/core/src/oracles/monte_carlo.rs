//! Monte Carlo over the two-dimensional reduction `(X, Y) = (a.e1, a.e_perp)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QimError, Result};
use crate::losses::QimModel;
use crate::rng::SeedTree;

/// Evaluations per parallel chunk. Chunk `i` always draws from seed path
/// `(seed, i)`, so the result does not depend on the thread count.
pub const CHUNK: usize = 1 << 16;

pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|mean - target| <= k * std_error`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimates {
    pub samples: usize,
    pub f: Estimate,
    pub d_theta: Estimate,
    pub d_thetatheta: Estimate,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: f64,
    mean: [f64; 3],
    m2: [f64; 3],
}

impl Acc {
    fn push(&mut self, v: [f64; 3]) {
        self.n += 1.0;
        for i in 0..3 {
            let d = v[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v[i] - self.mean[i]);
        }
    }

    fn merge(self, o: Acc) -> Acc {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let mut out = Acc { n, ..Acc::default() };
        for i in 0..3 {
            let d = o.mean[i] - self.mean[i];
            out.mean[i] = self.mean[i] + d * o.n / n;
            out.m2[i] = self.m2[i] + o.m2[i] + d * d * self.n * o.n / n;
        }
        out
    }

    fn estimate(&self, i: usize) -> Estimate {
        let var = if self.n > 1.0 { self.m2[i] / (self.n - 1.0) } else { 0.0 };
        Estimate {
            mean: self.mean[i],
            std_error: (var / self.n).sqrt(),
        }
    }
}

/// `f`, `d_theta f` and `d_thetatheta f` for one sample with `|x| = 1`.
#[inline]
fn integrand(model: &QimModel, r: f64, st: f64, ct: f64, x: f64, y: f64) -> [f64; 3] {
    let z = ct * x + st * y;
    let w = -st * x + ct * y;
    let g = model.partials(r * z * z, r, x * x);
    let dq = 2.0 * r * z * w;
    [g.g, g.q * dq, g.qq * dq * dq + g.q * 2.0 * r * (w * w - z * z)]
}

/// Monte Carlo estimates of `E f`, `E d_theta f`, `E d_thetatheta f` at the
/// polar point `(R, theta)` with `x = e1`.
///
/// With `antithetic`, samples come in pairs `(X, Y), (X, -Y)` and each pair
/// mean counts as one observation.
pub fn mc_expectation_2d(
    model: QimModel,
    r: f64,
    theta: f64,
    samples: usize,
    seed: u64,
    antithetic: bool,
) -> Result<MomentEstimates> {
    model.validate()?;
    if model == QimModel::Qim1 {
        return Err(QimError::Domain(
            "the QIM1 expectation is infinite away from theta = 0 (E 1/X^2 diverges)".into(),
        ));
    }
    if !(r > 0.0) {
        return Err(QimError::Domain(format!("R must be positive, got {r}")));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(QimError::Domain(format!("theta must lie in [0, pi], got {theta}")));
    }
    if samples < MIN_SAMPLES {
        return Err(QimError::Config(format!("at least {MIN_SAMPLES} samples are needed, got {samples}")));
    }
    let (st, ct) = theta.sin_cos();
    let tree = SeedTree::new(seed);
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut g = tree.child(c as u64).normals();
            let mut acc = Acc::default();
            if antithetic {
                for _ in 0..count / 2 {
                    let (x, y) = (g.next_normal(), g.next_normal());
                    let a = integrand(&model, r, st, ct, x, y);
                    let b = integrand(&model, r, st, ct, x, -y);
                    acc.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]);
                }
            } else {
                for _ in 0..count {
                    let (x, y) = (g.next_normal(), g.next_normal());
                    acc.push(integrand(&model, r, st, ct, x, y));
                }
            }
            acc
        })
        .collect();
    let total = partial.into_iter().fold(Acc::default(), Acc::merge);
    Ok(MomentEstimates {
        samples,
        f: total.estimate(0),
        d_theta: total.estimate(1),
        d_thetatheta: total.estimate(2),
    })
}
