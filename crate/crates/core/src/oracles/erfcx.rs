//! Scaled complementary error function `erfcx(x) = exp(x^2) erfc(x)`.
//!
//! W. J. Cody's rational approximations (Math. Comp. 23, 1969): a series-like
//! rational in `x^2` below 0.46875, a rational in `x` on (0.46875, 4] and an
//! asymptotic rational in `1/x^2` beyond 4. None of the branches forms
//! `exp(x^2)` for large x, so there is no overflow.

use crate::error::{QimError, Result};

const A: [f64; 5] = [
    3.1611237438705656,
    113.864154151050156,
    377.485237685302021,
    3209.37758913846947,
    0.185777706184603153,
];
const B: [f64; 4] = [
    23.6012909523441209,
    244.024637934444173,
    1282.61652607737228,
    2844.23683343917062,
];
const C: [f64; 9] = [
    0.564188496988670089,
    8.88314979438837594,
    66.1191906371416295,
    298.635138197400131,
    881.95222124176909,
    1712.04761263407058,
    2051.07837782607147,
    1230.33935479799725,
    2.15311535474403846e-8,
];
const D: [f64; 8] = [
    15.7449261107098347,
    117.693950891312499,
    537.181101862009858,
    1621.38957456669019,
    3290.79923573345963,
    4362.61909014324716,
    3439.36767414372164,
    1230.33935480374942,
];
const P: [f64; 6] = [
    0.305326634961232344,
    0.360344899949804439,
    0.125781726111229246,
    0.0160837851487422766,
    6.58749161529837803e-4,
    0.0163153871373020978,
];
const Q: [f64; 5] = [
    2.56852019228982242,
    1.87295284992346047,
    0.527905102951428412,
    0.0605183413124413191,
    0.00233520497626869185,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SMALL: f64 = 0.46875;

/// erf(x)/x for |x| <= 0.46875, as a rational in z = x^2.
fn erf_over_x(z: f64) -> f64 {
    ((((A[4] * z + A[0]) * z + A[1]) * z + A[2]) * z + A[3])
        / ((((z + B[0]) * z + B[1]) * z + B[2]) * z + B[3])
}

fn middle(y: f64) -> f64 {
    let num = C[..8].iter().fold(C[8], |acc, c| acc * y + c);
    let den = D.iter().fold(1.0, |acc, d| acc * y + d);
    num / den
}

fn tail(y: f64) -> f64 {
    let z = 1.0 / (y * y);
    let num = P[..5].iter().fold(P[5], |acc, p| acc * z + p);
    let den = Q.iter().fold(1.0, |acc, q| acc * z + q);
    (FRAC_1_SQRT_PI - z * num / den) / y
}

/// `erfcx(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(QimError::Domain(format!("erfcx needs x >= 0, got {x}")));
    }
    Ok(erfcx_unchecked(x))
}

pub(crate) fn erfcx_unchecked(x: f64) -> f64 {
    if x <= SMALL {
        let z = x * x;
        z.exp() * (1.0 - x * erf_over_x(z))
    } else if x <= 4.0 {
        middle(x)
    } else if x.is_infinite() {
        0.0
    } else {
        tail(x)
    }
}

/// `g(x) = exp(x^2) int_x^inf exp(-t^2) dt = (sqrt(pi)/2) erfcx(x)`.
pub fn mills_g(x: f64) -> Result<f64> {
    Ok(0.5 * std::f64::consts::PI.sqrt() * erfcx(x)?)
}
