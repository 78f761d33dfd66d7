//! Binary ensemble container.
//!
//! Layout: 8-byte magic, u32 LE header length, UTF-8 JSON header, then the
//! payload as little-endian f64 values (complex entries interleaved re, im).
//! Explicit ensembles store the m x n rows; CDP ensembles store the L masks.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CdpOperator, EnsembleKind, SensingEnsemble};
use crate::error::{QimError, Result};
use crate::scalar::{Field, Scalar};

const MAGIC: &[u8; 8] = b"QIMENS\0\x01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub kind: EnsembleKind,
    pub field: Field,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub patterns: Option<usize>,
}

pub fn save_ensemble<S: Scalar, W: Write>(e: &SensingEnsemble<S>, mut w: W) -> Result<()> {
    let header = ContainerHeader {
        kind: e.kind(),
        field: S::FIELD,
        n: e.n(),
        m: e.m(),
        seed: e.seed(),
        patterns: e.cdp_operator().map(CdpOperator::patterns),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;

    let mut flat = Vec::new();
    match e.cdp_operator() {
        Some(c) => c
            .masks()
            .iter()
            .flatten()
            .for_each(|d| d.push_f64s(&mut flat)),
        None => e
            .rows()
            .unwrap_or_default()
            .iter()
            .for_each(|a| a.push_f64s(&mut flat)),
    }
    for v in flat {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R) -> Result<ContainerHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(QimError::Format("bad magic bytes".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    Ok(serde_json::from_slice(&json)?)
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Load an ensemble whose stored field must match `S`.
pub fn load_ensemble<S: Scalar, R: Read>(mut r: R) -> Result<SensingEnsemble<S>> {
    let h = read_header(&mut r)?;
    if h.field != S::FIELD {
        return Err(QimError::Format(format!(
            "container holds a {} ensemble, requested {}",
            h.field.as_str(),
            S::FIELD.as_str()
        )));
    }
    match h.kind {
        EnsembleKind::ExplicitGaussian => {
            let flat = read_f64s(&mut r, h.n * h.m * S::WIDTH)?;
            let rows = flat.chunks_exact(S::WIDTH).map(S::from_f64s).collect();
            let mut e = SensingEnsemble::from_rows(h.n, rows)?;
            e.seed = h.seed;
            Ok(e)
        }
        EnsembleKind::Cdp => {
            let patterns = h
                .patterns
                .ok_or_else(|| QimError::Format("cdp header without pattern count".into()))?;
            if h.m != h.n * patterns {
                return Err(QimError::Format("cdp header has m != L n".into()));
            }
            let flat = read_f64s(&mut r, h.n * patterns * 2)?;
            let symbols: Vec<Complex64> =
                flat.chunks_exact(2).map(Complex64::from_f64s).collect();
            let masks = symbols.chunks_exact(h.n).map(<[_]>::to_vec).collect();
            let op = CdpOperator::from_masks(h.n, masks)?;
            Ok(SensingEnsemble::<S> {
                n: h.n,
                m: h.m,
                seed: h.seed,
                op: super::Operator::Cdp(op),
            })
        }
    }
}
