//! Coded diffraction patterns: `z_l = F (d_l ⊙ u)` for L random masks.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{QimError, Result};
use crate::rng::SeedTree;

/// Draw one octanary symbol `b1 * b2` with `b1` uniform on {1, -1, i, -i}
/// and `b2 = sqrt(2)/2` w.p. 4/5, `sqrt(3)` w.p. 1/5, so that E|d|^2 = 1.
pub fn octanary_symbol<R: Rng>(rng: &mut R) -> Complex64 {
    let b1 = match rng.random_range(0..4u8) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(-1.0, 0.0),
        2 => Complex64::new(0.0, 1.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let b2 = if rng.random::<f64>() < 0.8 {
        std::f64::consts::FRAC_1_SQRT_2
    } else {
        3f64.sqrt()
    };
    b1 * b2
}

#[derive(Clone)]
pub struct CdpOperator {
    n: usize,
    masks: Vec<Vec<Complex64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CdpOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdpOperator")
            .field("n", &self.n)
            .field("patterns", &self.masks.len())
            .finish()
    }
}

impl CdpOperator {
    pub fn random(n: usize, patterns: usize, seed: u64) -> Result<Self> {
        if n == 0 || patterns == 0 {
            return Err(QimError::ZeroDimension { n, m: n * patterns });
        }
        let mut rng = SeedTree::new(seed).rng();
        let masks = (0..patterns)
            .map(|_| (0..n).map(|_| octanary_symbol(&mut rng)).collect())
            .collect();
        Self::from_masks(n, masks)
    }

    /// Build from explicit masks (each of length n).
    pub fn from_masks(n: usize, masks: Vec<Vec<Complex64>>) -> Result<Self> {
        if n == 0 || masks.is_empty() {
            return Err(QimError::ZeroDimension { n, m: n * masks.len() });
        }
        if let Some(bad) = masks.iter().find(|d| d.len() != n) {
            return Err(QimError::DimensionMismatch {
                what: "mask length",
                expected: n,
                got: bad.len(),
            });
        }
        let mut planner = FftPlanner::new();
        Ok(CdpOperator {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            masks,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn patterns(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[Vec<Complex64>] {
        &self.masks
    }

    pub(crate) fn forward_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        for (d, block) in self.masks.iter().zip(out.chunks_exact_mut(self.n)) {
            for ((o, di), ui) in block.iter_mut().zip(d).zip(u) {
                *o = di * ui;
            }
            self.fft.process(block);
        }
    }

    /// `sum_l conj(d_l) ⊙ F^{-1}_unnormalized v_l`, the exact adjoint of `forward_into`.
    pub(crate) fn adjoint_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (d, block) in self.masks.iter().zip(v.chunks_exact(self.n)) {
            buf.copy_from_slice(block);
            self.ifft.process(&mut buf);
            for ((o, di), b) in out.iter_mut().zip(d).zip(&buf) {
                *o += di.conj() * b;
            }
        }
    }
}
