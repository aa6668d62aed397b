//! Binary checkpoints: an 8-byte magic, then `arch, d, N, H` as little-endian
//! u64, then every parameter block row-major as little-endian f64.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Arch, LogitModel, MlpModel, Model};
use crate::error::{Error, Result};
use crate::predictors::ProbClassifier;
use crate::tasks::Features;

const MAGIC: &[u8; 8] = b"MEMLAB01";

/// A trained model of either architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Logit(LogitModel),
    Mlp(MlpModel),
}

impl ProbClassifier for AnyModel {
    fn num_classes(&self) -> usize {
        match self {
            AnyModel::Logit(m) => m.num_classes(),
            AnyModel::Mlp(m) => m.num_classes(),
        }
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        match self {
            AnyModel::Logit(m) => m.predict_proba(x),
            AnyModel::Mlp(m) => m.predict_proba(x),
        }
    }

    fn predict_proba_batch(&self, xs: &[&Features]) -> Result<Vec<Vec<f64>>> {
        match self {
            AnyModel::Logit(m) => m.predict_proba_batch(xs),
            AnyModel::Mlp(m) => m.predict_proba_batch(xs),
        }
    }

    fn name(&self) -> String {
        match self {
            AnyModel::Logit(m) => m.name(),
            AnyModel::Mlp(m) => m.name(),
        }
    }
}

pub fn write_checkpoint<M: Model>(m: &M) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 8 * m.num_params());
    out.extend_from_slice(MAGIC);
    let arch = match m.arch() {
        Arch::Logit => 0u64,
        Arch::Mlp => 1,
    };
    for v in [arch, m.d() as u64, m.num_classes() as u64, m.hidden() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for block in m.param_slices() {
        for p in block {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        msg: msg.into(),
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<AnyModel> {
    if bytes.len() < 40 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap()) as usize;
    let (arch, d, n_cls, h) = (word(0), word(1), word(2), word(3));
    let body = &bytes[40..];
    if !body.len().is_multiple_of(8) {
        return Err(bad("truncated parameter block"));
    }
    let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |len: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = vals.by_ref().take(len).collect();
        if v.len() == len {
            Ok(v)
        } else {
            Err(bad("truncated parameter block"))
        }
    };
    let shape_err = |e: ndarray::ShapeError| bad(e.to_string());
    let model = match arch {
        0 => {
            let w = Array2::from_shape_vec((n_cls, d), take(n_cls * d)?).map_err(shape_err)?;
            let b = Array1::from(take(n_cls)?);
            AnyModel::Logit(LogitModel::from_arrays(w, b))
        }
        1 => {
            let w1 = Array2::from_shape_vec((h, d), take(h * d)?).map_err(shape_err)?;
            let b1 = Array1::from(take(h)?);
            let w2 = Array2::from_shape_vec((n_cls, h), take(n_cls * h)?).map_err(shape_err)?;
            let b2 = Array1::from(take(n_cls)?);
            AnyModel::Mlp(MlpModel::from_arrays(w1, b1, w2, b2))
        }
        other => return Err(bad(format!("unknown architecture code {other}"))),
    };
    if vals.next().is_some() {
        return Err(bad("trailing bytes after parameters"));
    }
    Ok(model)
}

pub fn save_checkpoint<M: Model>(m: &M, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(m))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AnyModel> {
    read_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_both_architectures() {
        let mut rng = RngStream::new(1, 0);
        let l = LogitModel::init(4, 9, 0.3, &mut rng);
        assert_eq!(
            read_checkpoint(&write_checkpoint(&l)).unwrap(),
            AnyModel::Logit(l.clone())
        );
        let m = MlpModel::init(4, 9, 6, 0.3, &mut rng);
        let bytes = write_checkpoint(&m);
        assert_eq!(bytes.len(), 40 + 8 * (6 * 9 + 6 + 4 * 6 + 4));
        assert_eq!(read_checkpoint(&bytes).unwrap(), AnyModel::Mlp(m));
        let mut cut = write_checkpoint(&l);
        cut.truncate(cut.len() - 8);
        assert!(read_checkpoint(&cut).is_err());
        assert!(read_checkpoint(b"garbage").is_err());
    }

    #[test]
    fn header_is_little_endian() {
        let l = LogitModel::init(3, 5, 0.0, &mut RngStream::new(1, 0));
        let bytes = write_checkpoint(&l);
        assert_eq!(&bytes[16..24], &5u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &3u64.to_le_bytes());
    }
}
