use std::cmp::Ordering;

use rand::Rng;

use super::{Features, LabeledExample};
use crate::bits::BitString;
use crate::error::{domain, Result};
use crate::rng::RngStream;

/// Threshold over `{0,1}^d` read as big-endian integers.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdInstance {
    c: BitString,
}

impl ThresholdInstance {
    pub fn new(c: BitString) -> Result<Self> {
        if c.is_empty() {
            return domain("threshold must have positive length");
        }
        Ok(ThresholdInstance { c })
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn threshold(&self) -> &BitString {
        &self.c
    }

    /// `1` iff `c >= z`.
    pub fn label(&self, z: &BitString) -> Result<usize> {
        Ok((self.c.cmp_big_endian(z)? != Ordering::Less) as usize)
    }
}

pub fn sample_threshold_instance(d: usize, rng: &mut RngStream) -> Result<ThresholdInstance> {
    ThresholdInstance::new(BitString::random(d, rng))
}

pub fn sample_threshold_example(inst: &ThresholdInstance, rng: &mut RngStream) -> LabeledExample {
    sample_threshold_example_with(inst, None, None, rng).expect("unforced draw is always valid")
}

/// Draws `z = p 1 0...0` with `|p| = l`, where `p` copies the first `l` bits of
/// the threshold or is uniform (fair coin). `ell` and `copy` force the
/// corresponding choice.
pub fn sample_threshold_example_with(
    inst: &ThresholdInstance,
    ell: Option<usize>,
    copy: Option<bool>,
    rng: &mut RngStream,
) -> Result<LabeledExample> {
    let d = inst.d();
    let ell = match ell {
        Some(l) if l >= d => return domain(format!("prefix length {l} must be below d = {d}")),
        Some(l) => l,
        None => rng.random_range(0..d),
    };
    let copy = copy.unwrap_or_else(|| rng.random::<bool>());
    let mut z = BitString::zeros(d);
    let random_prefix = (!copy).then(|| BitString::random(ell, rng));
    for i in 0..ell {
        let b = match &random_prefix {
            Some(p) => p.get(i),
            None => inst.c.get(i),
        };
        z.set(i, b);
    }
    z.set(ell, true);
    let label = inst.label(&z)?;
    Ok(LabeledExample {
        features: Features::Bits(z),
        label,
        subpop: 0,
    })
}

/// A string `x` and two prefix lengths `j`, `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLengthInstance {
    x: BitString,
    j: usize,
    k: usize,
}

impl TwoLengthInstance {
    pub fn new(x: BitString, j: usize, k: usize) -> Result<Self> {
        if j >= x.len() || k >= x.len() {
            return domain(format!("lengths ({j}, {k}) must be below d = {}", x.len()));
        }
        Ok(TwoLengthInstance { x, j, k })
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn string(&self) -> &BitString {
        &self.x
    }

    pub fn lengths(&self) -> (usize, usize) {
        (self.j, self.k)
    }
}

pub fn sample_two_length_instance(d: usize, rng: &mut RngStream) -> Result<TwoLengthInstance> {
    if d == 0 {
        return domain("d must be positive");
    }
    let x = BitString::random(d, rng);
    let j = rng.random_range(0..d);
    let k = rng.random_range(0..d);
    TwoLengthInstance::new(x, j, k)
}

/// `(x[..j], x[j])` or `(x[..k], x[k])` with probability one half each.
pub fn sample_two_length_example(inst: &TwoLengthInstance, rng: &mut RngStream) -> LabeledExample {
    let len = if rng.random::<bool>() { inst.j } else { inst.k };
    LabeledExample {
        features: Features::Prefix {
            subpop: 0,
            prefix: inst.x.prefix(len),
        },
        label: inst.x.get(len) as usize,
        subpop: 0,
    }
}

/// What the multi-sample learner knows after seeing its samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoLengthKnowledge {
    /// Both prefix lengths (ascending) and the bits that follow them.
    Known {
        lengths: (usize, usize),
        next_bits: (usize, usize),
    },
    Unknown,
}

/// Learns both lengths as soon as two samples of different lengths appear.
pub fn two_length_learner(samples: &[LabeledExample]) -> TwoLengthKnowledge {
    let mut first: Option<(usize, usize)> = None;
    for s in samples {
        let len = match &s.features {
            Features::Prefix { prefix, .. } => prefix.len(),
            Features::Bits(b) => b.len(),
            Features::Symbols(v) => v.len(),
        };
        match first {
            None => first = Some((len, s.label)),
            Some((l0, b0)) if l0 != len => {
                let (a, b) = if l0 < len {
                    ((l0, b0), (len, s.label))
                } else {
                    ((len, s.label), (l0, b0))
                };
                return TwoLengthKnowledge::Known {
                    lengths: (a.0, b.0),
                    next_bits: (a.1, b.1),
                };
            }
            Some(_) => {}
        }
    }
    TwoLengthKnowledge::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(e: &LabeledExample) -> &BitString {
        e.features.as_bits().unwrap()
    }

    #[test]
    fn worked_case() {
        let c: BitString = "1001011".parse().unwrap();
        let inst = ThresholdInstance::new(c).unwrap();
        let e = sample_threshold_example_with(&inst, Some(4), Some(true), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(bits(&e).to_string(), "1001100");
        assert_eq!(e.label, 0);
    }

    #[test]
    fn empty_prefix_boundary() {
        let mut rng = RngStream::new(2, 0);
        let d = 9;
        for _ in 0..200 {
            let inst = sample_threshold_instance(d, &mut rng).unwrap();
            let e = sample_threshold_example_with(&inst, Some(0), None, &mut rng).unwrap();
            assert_eq!(bits(&e).to_u64(), 1 << (d - 1));
            let expect = (inst.threshold().to_u64() >= 1 << (d - 1)) as usize;
            assert_eq!(e.label, expect);
        }
    }

    #[test]
    fn copy_branch_label_is_next_threshold_bit() {
        let mut rng = RngStream::new(3, 0);
        for d in 1..=12 {
            let inst = sample_threshold_instance(d, &mut rng).unwrap();
            for _ in 0..(100_000 / 12) {
                let e = sample_threshold_example_with(&inst, None, Some(true), &mut rng).unwrap();
                let z = bits(&e);
                let ell = (0..d).rev().find(|i| z.get(*i)).unwrap();
                assert_eq!(e.label, inst.threshold().get(ell) as usize);
            }
        }
    }

    #[test]
    fn label_matches_integer_comparison() {
        let mut rng = RngStream::new(4, 0);
        for _ in 0..2000 {
            let inst = sample_threshold_instance(16, &mut rng).unwrap();
            let e = sample_threshold_example(&inst, &mut rng);
            let expect = (inst.threshold().to_u64() >= bits(&e).to_u64()) as usize;
            assert_eq!(e.label, expect);
        }
    }

    #[test]
    fn equal_lengths_give_identical_branches() {
        let mut rng = RngStream::new(5, 0);
        let x = BitString::random(30, &mut rng);
        let inst = TwoLengthInstance::new(x, 11, 11).unwrap();
        let first = sample_two_length_example(&inst, &mut rng);
        for _ in 0..50 {
            assert_eq!(sample_two_length_example(&inst, &mut rng), first);
        }
    }

    #[test]
    fn branches_are_fair_and_labels_follow_prefix() {
        let mut rng = RngStream::new(6, 0);
        let x = BitString::random(40, &mut rng);
        let inst = TwoLengthInstance::new(x.clone(), 5, 30).unwrap();
        let draws = 100_000;
        let mut short = 0;
        for _ in 0..draws {
            let e = sample_two_length_example(&inst, &mut rng);
            let Features::Prefix { prefix, .. } = &e.features else {
                panic!()
            };
            assert_eq!(e.label, x.get(prefix.len()) as usize);
            assert_eq!(prefix, &x.prefix(prefix.len()));
            short += (prefix.len() == 5) as usize;
        }
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((short as f64 - draws as f64 / 2.0).abs() < 5.0 * sigma);
    }

    fn prefix_example(len: usize, label: usize) -> LabeledExample {
        LabeledExample {
            features: Features::Prefix {
                subpop: 0,
                prefix: BitString::zeros(len),
            },
            label,
            subpop: 0,
        }
    }

    #[test]
    fn learner_cases() {
        let known = two_length_learner(&[prefix_example(7, 1), prefix_example(3, 0)]);
        assert_eq!(
            known,
            TwoLengthKnowledge::Known {
                lengths: (3, 7),
                next_bits: (0, 1)
            }
        );
        let same = vec![prefix_example(4, 1); 5];
        assert_eq!(two_length_learner(&same), TwoLengthKnowledge::Unknown);
        assert_eq!(two_length_learner(&[]), TwoLengthKnowledge::Unknown);
    }

    #[test]
    fn learner_failure_rate() {
        let mut rng = RngStream::new(7, 0);
        let (n, d, trials) = (10, 100, 100_000);
        let mut failures = 0;
        for _ in 0..trials {
            let inst = sample_two_length_instance(d, &mut rng).unwrap();
            let samples: Vec<_> = (0..n).map(|_| sample_two_length_example(&inst, &mut rng)).collect();
            failures += (two_length_learner(&samples) == TwoLengthKnowledge::Unknown) as usize;
        }
        let bound = 1.0 / d as f64 + 2f64.powi(1 - n);
        let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
        let rate = failures as f64 / trials as f64;
        assert!(rate <= bound + 3.0 * sigma, "rate {rate} bound {bound}");
    }
}
