//! Sensing ensembles, the forward map and intensity data.

mod cdp;
mod container;

pub use cdp::{octanary_symbol, CdpOperator};
pub use container::{load_ensemble, read_header, save_ensemble, ContainerHeader};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QimError, Result};
use crate::rng::SeedTree;
use crate::scalar::{Field, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    ExplicitGaussian,
    Cdp,
}

#[derive(Debug, Clone)]
enum Operator<S> {
    /// Row-major m x n matrix.
    Dense(Vec<S>),
    Cdp(CdpOperator),
}

/// A linear measurement operator `u -> (a_k . u)_k`.
///
/// `a_k . u` means the plain (non-conjugated) sum `sum_j A_kj u_j`.
#[derive(Debug, Clone)]
pub struct SensingEnsemble<S> {
    n: usize,
    m: usize,
    seed: u64,
    op: Operator<S>,
}

impl<S: Scalar> SensingEnsemble<S> {
    /// I.i.d. Gaussian rows with E|a_kj|^2 = 1.
    pub fn gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(QimError::ZeroDimension { n, m });
        }
        let mut normals = SeedTree::new(seed).normals();
        let rows = (0..n * m).map(|_| S::sample(&mut normals)).collect();
        Ok(SensingEnsemble {
            n,
            m,
            seed,
            op: Operator::Dense(rows),
        })
    }

    /// Explicit rows, row-major. Mainly a test fixture.
    pub fn from_rows(n: usize, rows: Vec<S>) -> Result<Self> {
        if n == 0 || rows.is_empty() {
            return Err(QimError::ZeroDimension {
                n,
                m: rows.len() / n.max(1),
            });
        }
        if rows.len() % n != 0 {
            return Err(QimError::DimensionMismatch {
                what: "row storage",
                expected: n * (rows.len() / n + 1),
                got: rows.len(),
            });
        }
        Ok(SensingEnsemble {
            n,
            m: rows.len() / n,
            seed: 0,
            op: Operator::Dense(rows),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn field(&self) -> Field {
        S::FIELD
    }

    pub fn kind(&self) -> EnsembleKind {
        match self.op {
            Operator::Dense(_) => EnsembleKind::ExplicitGaussian,
            Operator::Cdp(_) => EnsembleKind::Cdp,
        }
    }

    /// Row-major rows for explicit ensembles.
    pub fn rows(&self) -> Option<&[S]> {
        match &self.op {
            Operator::Dense(r) => Some(r),
            Operator::Cdp(_) => None,
        }
    }

    pub fn cdp_operator(&self) -> Option<&CdpOperator> {
        match &self.op {
            Operator::Dense(_) => None,
            Operator::Cdp(c) => Some(c),
        }
    }

    /// Materialize the operator as a row-major m x n matrix.
    pub fn to_dense(&self) -> Vec<S> {
        match &self.op {
            Operator::Dense(r) => r.clone(),
            Operator::Cdp(_) => {
                let mut out = vec![S::zero(); self.m * self.n];
                let mut e = vec![S::zero(); self.n];
                let mut col = vec![S::zero(); self.m];
                for j in 0..self.n {
                    e[j] = S::from_re(1.0);
                    self.forward_into(&e, &mut col);
                    e[j] = S::zero();
                    for (k, c) in col.iter().enumerate() {
                        out[k * self.n + j] = *c;
                    }
                }
                out
            }
        }
    }

    fn check_len(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(QimError::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }

    pub fn forward(&self, u: &[S]) -> Result<Vec<S>> {
        self.check_len("signal", self.n, u.len())?;
        let mut out = vec![S::zero(); self.m];
        self.forward_into(u, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, v: &[S]) -> Result<Vec<S>> {
        self.check_len("measurement vector", self.m, v.len())?;
        let mut out = vec![S::zero(); self.n];
        self.adjoint_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked forward map; lengths must already agree.
    pub(crate) fn forward_into(&self, u: &[S], out: &mut [S]) {
        match &self.op {
            Operator::Dense(rows) => {
                for (o, row) in out.iter_mut().zip(rows.chunks_exact(self.n)) {
                    *o = row
                        .iter()
                        .zip(u)
                        .fold(S::zero(), |acc, (a, b)| acc + *a * *b);
                }
            }
            Operator::Cdp(c) => {
                let (u, out) = complex_pair(u, out);
                c.forward_into(u, out);
            }
        }
    }

    /// Unchecked adjoint `A^H v`.
    pub(crate) fn adjoint_into(&self, v: &[S], out: &mut [S]) {
        match &self.op {
            Operator::Dense(rows) => {
                out.fill(S::zero());
                for (vk, row) in v.iter().zip(rows.chunks_exact(self.n)) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a.conj() * *vk;
                    }
                }
            }
            Operator::Cdp(c) => {
                let (v, out) = complex_pair(v, out);
                c.adjoint_into(v, out);
            }
        }
    }

    /// Noiseless data `y_k = |a_k . x|^2`.
    pub fn intensities(&self, x: &[S]) -> Result<IntensityData> {
        let z = self.forward(x)?;
        Ok(IntensityData {
            y: z.iter().map(|v| v.abs_sqr()).collect(),
            amplitudes: None,
            noise: None,
            clamped: 0,
        })
    }

    /// Noisy data from `b_k = |a_k . x| + eta_k` with `eta` Gaussian, rescaled so
    /// that `10 log10(sum |a_k . x|^2 / |eta|^2)` equals `target_snr_db`.
    /// Negative amplitudes are clamped to zero before squaring.
    /// An infinite target returns noiseless data.
    pub fn add_amplitude_noise(
        &self,
        x: &[S],
        target_snr_db: f64,
        seed: u64,
    ) -> Result<IntensityData> {
        if target_snr_db.is_nan() || target_snr_db == f64::NEG_INFINITY {
            return Err(QimError::Domain(format!(
                "target SNR must be finite or +inf, got {target_snr_db}"
            )));
        }
        let z = self.forward(x)?;
        let clean: Vec<f64> = z.iter().map(|v| v.abs_sqr().sqrt()).collect();
        let signal: f64 = clean.iter().map(|b| b * b).sum();
        if signal == 0.0 {
            return Err(QimError::ZeroSignal);
        }
        if target_snr_db == f64::INFINITY {
            let mut data = self.intensities(x)?;
            data.amplitudes = Some(clean);
            data.noise = Some(vec![0.0; self.m]);
            return Ok(data);
        }
        let mut normals = SeedTree::new(seed).normals();
        let mut eta = vec![0.0; self.m];
        normals.fill(&mut eta);
        let raw: f64 = eta.iter().map(|e| e * e).sum();
        let target = signal / 10f64.powf(target_snr_db / 10.0);
        let scale = (target / raw).sqrt();
        eta.iter_mut().for_each(|e| *e *= scale);

        let mut clamped = 0;
        let mut amplitudes = Vec::with_capacity(self.m);
        let mut y = Vec::with_capacity(self.m);
        for (b, e) in clean.iter().zip(&eta) {
            let mut v = b + e;
            if v < 0.0 {
                v = 0.0;
                clamped += 1;
            }
            amplitudes.push(v);
            y.push(v * v);
        }
        Ok(IntensityData {
            y,
            amplitudes: Some(amplitudes),
            noise: Some(eta),
            clamped,
        })
    }
}

impl<S: Scalar> SensingEnsemble<S> {
    /// SNR in dB recomputed from the noise stored in `data`.
    pub fn realized_snr_db(&self, x: &[S], data: &IntensityData) -> Result<Option<f64>> {
        let Some(eta) = data.noise.as_ref() else {
            return Ok(None);
        };
        let signal: f64 = self.forward(x)?.iter().map(|v| v.abs_sqr()).sum();
        let noise: f64 = eta.iter().map(|e| e * e).sum();
        Ok(Some(10.0 * (signal / noise).log10()))
    }
}

impl SensingEnsemble<Complex64> {
    /// Coded diffraction patterns with `patterns` octanary masks; m = patterns * n.
    pub fn cdp(n: usize, patterns: usize, seed: u64) -> Result<Self> {
        let op = CdpOperator::random(n, patterns, seed)?;
        Ok(Self::from_cdp(op, seed))
    }

    pub fn from_cdp(op: CdpOperator, seed: u64) -> Self {
        SensingEnsemble {
            n: op.n(),
            m: op.n() * op.patterns(),
            seed,
            op: Operator::Cdp(op),
        }
    }
}

fn complex_pair<'a, S: Scalar>(
    a: &'a [S],
    b: &'a mut [S],
) -> (&'a [Complex64], &'a mut [Complex64]) {
    match (S::as_complex(a), S::as_complex_mut(b)) {
        (Some(a), Some(b)) => (a, b),
        _ => unreachable!("coded diffraction operators exist only over the complex field"),
    }
}

/// Measured intensities, plus the noisy amplitude record when noise was added.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityData {
    pub y: Vec<f64>,
    pub amplitudes: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    /// Number of amplitudes clamped at zero.
    pub clamped: usize,
}

impl IntensityData {
    pub fn from_y(y: Vec<f64>) -> Self {
        IntensityData {
            y,
            amplitudes: None,
            noise: None,
            clamped: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rows_return_entries() {
        let e = SensingEnsemble::from_rows(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        assert_eq!(e.forward(&[4.0, -5.0, 6.0]).unwrap(), vec![4.0, -5.0, 6.0]);
    }

    #[test]
    fn scalar_product() {
        let e = SensingEnsemble::from_rows(1, vec![2.0]).unwrap();
        assert_eq!(e.forward(&[3.0]).unwrap(), vec![6.0]);
        assert_eq!(e.intensities(&[2.0]).unwrap().y, vec![16.0]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            SensingEnsemble::<f64>::gaussian(0, 5, 1),
            Err(QimError::ZeroDimension { .. })
        ));
        assert!(matches!(
            SensingEnsemble::<f64>::gaussian(3, 0, 1),
            Err(QimError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let e = SensingEnsemble::<f64>::gaussian(4, 8, 1).unwrap();
        assert!(matches!(
            e.forward(&[1.0; 3]),
            Err(QimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cdp_size() {
        let e = SensingEnsemble::cdp(16, 7, 5).unwrap();
        assert_eq!(e.m(), 112);
        assert_eq!(e.kind(), EnsembleKind::Cdp);
    }

    #[test]
    fn noise_infinite_snr_is_clean() {
        let e = SensingEnsemble::<f64>::gaussian(8, 32, 2).unwrap();
        let x = vec![1.0; 8];
        let clean = e.intensities(&x).unwrap();
        let noisy = e.add_amplitude_noise(&x, f64::INFINITY, 9).unwrap();
        assert_eq!(clean.y, noisy.y);
        assert_eq!(noisy.clamped, 0);
    }

    #[test]
    fn noise_zero_signal() {
        let e = SensingEnsemble::<f64>::gaussian(8, 32, 2).unwrap();
        assert!(matches!(
            e.add_amplitude_noise(&[0.0; 8], 20.0, 1),
            Err(QimError::ZeroSignal)
        ));
    }
}
