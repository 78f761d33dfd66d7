//! Closed-form Gaussian expectations for QIM2 and the one-dimensional
//! integrals behind them.

use serde::Serialize;
use std::f64::consts::PI;

use super::erfcx::erfcx_unchecked;
use super::quadrature::integrate_to_infinity;
use crate::error::{QimError, Result};

/// Quadrature tolerance for coefficient integrals.
pub const COEFF_QUAD_TOL: f64 = 1e-10;

/// `E f = (sqrt(2 pi)/pi) R (c1 s^2 + 2 c2 s + c3)` with `s = cos^2 theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Qim2Coefficients {
    pub beta: f64,
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Qim2Coefficients {
    pub fn expected_loss(&self, theta: f64) -> f64 {
        let s = theta.cos().powi(2);
        (2.0 * PI).sqrt() / PI * self.r * (self.c1 * s * s + 2.0 * self.c2 * s + self.c3)
    }

    pub fn signs_hold(&self) -> bool {
        self.c1 > 0.0 && self.c2 < 0.0 && self.c1 + self.c2 < 0.0
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(QimError::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// `int_0^inf exp(-x^2/2) p(x) / (a + x^2) dx` by quadrature.
pub fn damped_integral(a: f64, p: impl Fn(f64) -> f64) -> f64 {
    integrate_to_infinity(
        |x| (-0.5 * x * x).exp() * p(x) / (a + x * x),
        0.0,
        1e-15,
        COEFF_QUAD_TOL * 1e-2,
    )
    .value
}

/// `E[1 / (a + X^2)]` for standard normal X, `a > 0`.
pub fn mean_inverse(a: f64) -> f64 {
    (PI / (2.0 * a)).sqrt() * erfcx_unchecked((0.5 * a).sqrt())
}

/// `E[X^2 / (a + X^2)]`.
pub fn mean_ratio(a: f64) -> f64 {
    1.0 - a * mean_inverse(a)
}

/// `E[X^4 / (a + X^2)]`.
pub fn mean_fourth_ratio(a: f64) -> f64 {
    1.0 - a * mean_ratio(a)
}

/// c1 and c2 in closed form, c3 by quadrature.
pub fn qim2_expected_coeffs(beta: f64, r: f64) -> Result<Qim2Coefficients> {
    check_positive("beta", beta)?;
    check_positive("R", r)?;
    let a = beta * r;
    let e = erfcx_unchecked((0.5 * a).sqrt());
    let sqrt_2pi = (2.0 * PI).sqrt();
    let c1 = (-sqrt_2pi * a * (5.0 + a) + PI * a.sqrt() * (3.0 + a * (6.0 + a)) * e) / (2.0 * beta);
    let c2 = (3.0 + beta) / (2.0 * beta) * (a * sqrt_2pi - PI * a.sqrt() * (1.0 + a) * e);
    let c3 = damped_integral(a, |x| {
        let x2 = x * x;
        3.0 * r * r - 2.0 * r * x2 + x2 * x2
    }) / r;
    Ok(Qim2Coefficients { beta, r, c1, c2, c3 })
}

/// All three coefficients straight from their defining integrals.
pub fn qim2_coeffs_by_quadrature(beta: f64, r: f64) -> Result<Qim2Coefficients> {
    check_positive("beta", beta)?;
    check_positive("R", r)?;
    let a = beta * r;
    let c1 = r * damped_integral(a, |x| {
        let x2 = x * x;
        3.0 - 6.0 * x2 + x2 * x2
    });
    let c2 = damped_integral(a, |x| (3.0 * r - x * x) * (x * x - 1.0));
    let c3 = damped_integral(a, |x| {
        let x2 = x * x;
        3.0 * r * r - 2.0 * r * x2 + x2 * x2
    }) / r;
    Ok(Qim2Coefficients { beta, r, c1, c2, c3 })
}
