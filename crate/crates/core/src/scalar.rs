//! Real and complex scalars behind one trait.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use crate::rng::NormalSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(format!("unknown field '{other}' (expected real or complex)")),
        }
    }
}

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    const FIELD: Field;
    /// Ratio between the gradient reported by `Objective::gradient` and the
    /// half-sum `A^H (G_q z) + (sum G_s) u` the losses compute internally.
    /// Real: full Euclidean gradient (2). Complex: Wirtinger derivative (1).
    const GRADIENT_FACTOR: f64;
    /// Number of f64 values per scalar in flat storage.
    const WIDTH: usize;

    fn zero() -> Self;
    fn from_re(re: f64) -> Self;
    fn re(self) -> f64;
    fn conj(self) -> Self;
    fn abs_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;
    /// One draw with E|s|^2 = 1: N(0,1) for reals, N(0,1/2) + i N(0,1/2) for complex.
    fn sample<R: rand::Rng>(normals: &mut NormalSampler<R>) -> Self;
    fn push_f64s(self, out: &mut Vec<f64>);
    fn from_f64s(v: &[f64]) -> Self;

    /// Distance to `x` after removing the best global phase (sign for reals).
    fn dist_mod_phase(u: &[Self], x: &[Self]) -> f64;

    /// View as complex numbers when the scalar type is complex.
    fn as_complex(v: &[Self]) -> Option<&[Complex64]>;
    fn as_complex_mut(v: &mut [Self]) -> Option<&mut [Complex64]>;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;
    const GRADIENT_FACTOR: f64 = 2.0;
    const WIDTH: usize = 1;

    fn zero() -> Self {
        0.0
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn re(self) -> f64 {
        self
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sample<R: rand::Rng>(normals: &mut NormalSampler<R>) -> Self {
        normals.next_normal()
    }
    fn push_f64s(self, out: &mut Vec<f64>) {
        out.push(self);
    }
    fn from_f64s(v: &[f64]) -> Self {
        v[0]
    }

    fn dist_mod_phase(u: &[f64], x: &[f64]) -> f64 {
        let (mut minus, mut plus) = (0.0, 0.0);
        for (a, b) in u.iter().zip(x) {
            minus += (a - b) * (a - b);
            plus += (a + b) * (a + b);
        }
        minus.min(plus).sqrt()
    }

    fn as_complex(_: &[f64]) -> Option<&[Complex64]> {
        None
    }
    fn as_complex_mut(_: &mut [f64]) -> Option<&mut [Complex64]> {
        None
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;
    const GRADIENT_FACTOR: f64 = 1.0;
    const WIDTH: usize = 2;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn sample<R: rand::Rng>(normals: &mut NormalSampler<R>) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(h * normals.next_normal(), h * normals.next_normal())
    }
    fn push_f64s(self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }
    fn from_f64s(v: &[f64]) -> Self {
        Complex64::new(v[0], v[1])
    }

    fn dist_mod_phase(u: &[Complex64], x: &[Complex64]) -> f64 {
        // Align x to u, then measure the residual directly; the expanded form
        // |u|^2 + |x|^2 - 2|x^H u| loses all digits near the solution.
        let inner: Complex64 = x.iter().zip(u).map(|(a, b)| a.conj() * b).sum();
        let norm = inner.norm();
        let phase = if norm > 0.0 {
            inner / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        u.iter()
            .zip(x)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn as_complex(v: &[Complex64]) -> Option<&[Complex64]> {
        Some(v)
    }
    fn as_complex_mut(v: &mut [Complex64]) -> Option<&mut [Complex64]> {
        Some(v)
    }
}

pub fn norm_sqr<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|s| s.abs_sqr()).sum()
}

pub fn norm<S: Scalar>(v: &[S]) -> f64 {
    norm_sqr(v).sqrt()
}

/// Hermitian inner product sum conj(a_i) b_i.
pub fn inner<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + x.conj() * *y)
}
