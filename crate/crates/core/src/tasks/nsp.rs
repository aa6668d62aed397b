use rand::Rng;

use super::{check_subpop, Features, LabeledExample};
use crate::bits::BitString;
use crate::error::{domain, Error, Result};
use crate::prob::bsc_unchecked;
use crate::rng::RngStream;

/// Next-symbol prediction: each subpopulation owns a reference string, and an
/// example is a noisy prefix of it labeled by the noisy next bit.
#[derive(Clone, Debug, PartialEq)]
pub struct NspInstance {
    d: usize,
    delta: f64,
    refs: Vec<BitString>,
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        domain(format!("delta = {delta} is not in [0, 1)"))
    }
}

impl NspInstance {
    pub fn from_parts(d: usize, delta: f64, refs: Vec<BitString>) -> Result<Self> {
        check_delta(delta)?;
        if d == 0 {
            return domain("d must be positive");
        }
        if let Some(r) = refs.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                found: r.len(),
            });
        }
        Ok(NspInstance { d, delta, refs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_subpops(&self) -> usize {
        self.refs.len()
    }

    pub fn reference(&self, j: usize) -> &BitString {
        &self.refs[j]
    }
}

pub fn sample_nsp_instance(n_subpops: usize, d: usize, delta: f64, rng: &mut RngStream) -> Result<NspInstance> {
    let refs = (0..n_subpops).map(|_| BitString::random(d, rng)).collect();
    NspInstance::from_parts(d, delta, refs)
}

/// Draws `l` uniformly from `0..d` and returns the example for that length.
pub fn sample_nsp_example(inst: &NspInstance, j: usize, rng: &mut RngStream) -> Result<LabeledExample> {
    let ell = rng.random_range(0..inst.d);
    sample_nsp_example_at(inst, j, ell, rng)
}

/// Example with prefix length `ell`: features `(j, BSC(c_j[..ell]))`, label
/// `BSC(c_j[ell])`, both with flip probability `delta / 2`.
pub fn sample_nsp_example_at(inst: &NspInstance, j: usize, ell: usize, rng: &mut RngStream) -> Result<LabeledExample> {
    check_subpop(j, inst.num_subpops())?;
    if ell >= inst.d {
        return domain(format!("prefix length {ell} must be below d = {}", inst.d));
    }
    let q = inst.delta / 2.0;
    let c = &inst.refs[j];
    let prefix = bsc_unchecked(&c.prefix(ell), q, rng);
    let flip = q > 0.0 && rng.random::<f64>() < q;
    let label = (c.get(ell) ^ flip) as usize;
    Ok(LabeledExample {
        features: Features::Prefix { subpop: j, prefix },
        label,
        subpop: j,
    })
}
