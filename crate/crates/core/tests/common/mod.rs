#![allow(dead_code)]

use qimlab::rng::SeedTree;
use qimlab::scalar::Scalar;

pub fn random_vec<S: Scalar>(len: usize, seed: u64) -> Vec<S> {
    let mut g = SeedTree::new(seed).normals();
    (0..len).map(|_| S::sample(&mut g)).collect()
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

pub fn e1(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// Random unit vector orthogonal to `x`.
pub fn orthogonal_unit(x: &[f64], seed: u64) -> Vec<f64> {
    let xn = unit(x.to_vec());
    let mut v: Vec<f64> = random_vec(x.len(), seed);
    let d: f64 = v.iter().zip(&xn).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&xn).for_each(|(a, b)| *a -= d * b);
    let v = unit(v);
    // One more pass removes the residual component left by rounding.
    let d: f64 = v.iter().zip(&xn).map(|(a, b)| a * b).sum();
    unit(v.iter().zip(&xn).map(|(a, b)| a - d * b).collect())
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + q).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    diff / scale
}

/// Central first difference of a scalar function.
pub fn fd1(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Second difference with one Richardson step.
pub fn fd2(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}
