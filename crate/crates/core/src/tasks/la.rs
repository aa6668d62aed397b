use rand::Rng;

use super::{check_subpop, Features, LabeledExample};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_ALPHABET_CONSTANT: f64 = 4.0;

/// Large-alphabet cluster identification: subpopulation `j` always shows the
/// symbol `sigma_j` at position `i_j`; every other position is uniform on `[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaInstance {
    d: usize,
    t: u32,
    key_index: Vec<usize>,
    key_symbol: Vec<u32>,
}

impl LaInstance {
    pub fn from_parts(d: usize, t: u32, key_index: Vec<usize>, key_symbol: Vec<u32>) -> Result<Self> {
        if t < 2 {
            return domain(format!("alphabet size t = {t} must be at least 2"));
        }
        if key_index.len() != key_symbol.len() {
            return Err(Error::LengthMismatch {
                expected: key_index.len(),
                found: key_symbol.len(),
            });
        }
        if key_index.iter().any(|i| *i >= d) || key_symbol.iter().any(|s| *s >= t) {
            return domain("key index or symbol out of range");
        }
        Ok(LaInstance {
            d,
            t,
            key_index,
            key_symbol,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn num_subpops(&self) -> usize {
        self.key_index.len()
    }

    pub fn key_index(&self, j: usize) -> usize {
        self.key_index[j]
    }

    pub fn key_symbol(&self, j: usize) -> u32 {
        self.key_symbol[j]
    }
}

/// Samples an instance with alphabet size `t = ceil(c * N * d)`.
pub fn sample_la_instance(n_subpops: usize, d: usize, c_alphabet: f64, rng: &mut RngStream) -> Result<LaInstance> {
    if d == 0 || n_subpops == 0 {
        return domain("N and d must be positive");
    }
    let t = (c_alphabet * n_subpops as f64 * d as f64).ceil();
    if !(t >= 2.0) {
        return domain(format!("alphabet size {t} must be at least 2"));
    }
    if t > u32::MAX as f64 {
        return Err(Error::TooLarge(format!("alphabet size {t} exceeds u32")));
    }
    let t = t as u32;
    let key_index = (0..n_subpops).map(|_| rng.random_range(0..d)).collect();
    let key_symbol = (0..n_subpops).map(|_| rng.random_range(0..t)).collect();
    LaInstance::from_parts(d, t, key_index, key_symbol)
}

pub fn sample_la_example(inst: &LaInstance, j: usize, rng: &mut RngStream) -> Result<LabeledExample> {
    check_subpop(j, inst.num_subpops())?;
    let mut z: Vec<u32> = (0..inst.d).map(|_| rng.random_range(0..inst.t)).collect();
    z[inst.key_index[j]] = inst.key_symbol[j];
    Ok(LabeledExample {
        features: Features::Symbols(z),
        label: j,
        subpop: j,
    })
}
