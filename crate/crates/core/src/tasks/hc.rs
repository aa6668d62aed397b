use rand::Rng;

use super::{check_subpop, Features, LabeledExample};
use crate::bits::BitString;
use crate::error::{check_probability, Result};
use crate::rng::RngStream;

/// Hypercube clusters: subpopulation `j` fixes the coordinates in a random set
/// `I_j` to random values and leaves the rest uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct HcInstance {
    d: usize,
    rho: f64,
    /// Indicator of `I_j`.
    masks: Vec<BitString>,
    /// Fixed values `b_j`; zero outside `I_j`.
    values: Vec<BitString>,
}

impl HcInstance {
    /// Builds an instance from explicit fixed sets and values. Bits of
    /// `values[j]` outside `masks[j]` are ignored.
    pub fn from_parts(d: usize, rho: f64, masks: Vec<BitString>, values: Vec<BitString>) -> Result<Self> {
        check_probability("rho", rho)?;
        if masks.len() != values.len() {
            return Err(crate::Error::LengthMismatch {
                expected: masks.len(),
                found: values.len(),
            });
        }
        for s in masks.iter().chain(&values) {
            if s.len() != d {
                return Err(crate::Error::LengthMismatch {
                    expected: d,
                    found: s.len(),
                });
            }
        }
        let values = masks
            .iter()
            .zip(&values)
            .map(|(m, v)| BitString::zeros(d).overlay(m, v))
            .collect();
        Ok(HcInstance { d, rho, masks, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn num_subpops(&self) -> usize {
        self.masks.len()
    }

    pub fn fixed_mask(&self, j: usize) -> &BitString {
        &self.masks[j]
    }

    pub fn fixed_values(&self, j: usize) -> &BitString {
        &self.values[j]
    }

    /// `|I_j|`.
    pub fn fixed_count(&self, j: usize) -> usize {
        self.masks[j].count_ones()
    }
}

pub fn sample_hc_instance(n_subpops: usize, d: usize, rho: f64, rng: &mut RngStream) -> Result<HcInstance> {
    check_probability("rho", rho)?;
    let mut masks = Vec::with_capacity(n_subpops);
    let mut values = Vec::with_capacity(n_subpops);
    for _ in 0..n_subpops {
        let mask = if rho == 1.0 {
            BitString::ones(d)
        } else {
            let mut m = BitString::zeros(d);
            for i in 0..d {
                if rng.random::<f64>() < rho {
                    m.set(i, true);
                }
            }
            m
        };
        let v = BitString::zeros(d).overlay(&mask, &BitString::random(d, rng));
        masks.push(mask);
        values.push(v);
    }
    Ok(HcInstance { d, rho, masks, values })
}

/// Uniform point of the subcube of subpopulation `j`, labeled `j`.
pub fn sample_hc_example(inst: &HcInstance, j: usize, rng: &mut RngStream) -> Result<LabeledExample> {
    check_subpop(j, inst.num_subpops())?;
    let z = BitString::random(inst.d, rng).overlay(&inst.masks[j], &inst.values[j]);
    Ok(LabeledExample {
        features: Features::Bits(z),
        label: j,
        subpop: j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(e: &LabeledExample) -> &BitString {
        e.features.as_bits().unwrap()
    }

    #[test]
    fn extreme_rho() {
        let mut rng = RngStream::new(1, 0);
        let inst = sample_hc_instance(20, 50, 0.0, &mut rng).unwrap();
        assert!((0..20).all(|j| inst.fixed_count(j) == 0));
        let inst = sample_hc_instance(20, 50, 1.0, &mut rng).unwrap();
        assert!((0..20).all(|j| inst.fixed_count(j) == 50));
        for j in 0..20 {
            let e = sample_hc_example(&inst, j, &mut rng).unwrap();
            assert_eq!(bits(&e), inst.fixed_values(j));
            assert_eq!(e.label, j);
        }
        assert!(sample_hc_instance(2, 5, 1.5, &mut rng).is_err());
        assert!(sample_hc_example(&inst, 20, &mut rng).is_err());
    }

    #[test]
    fn fixed_set_size_is_binomial() {
        let mut rng = RngStream::new(2, 0);
        let (n, d, rho) = (10_000, 100, 0.17);
        let inst = sample_hc_instance(n, d, rho, &mut rng).unwrap();
        let total: usize = (0..n).map(|j| inst.fixed_count(j)).sum();
        let trials = (n * d) as f64;
        let sigma = (trials * rho * (1.0 - rho)).sqrt();
        assert!((total as f64 - trials * rho).abs() < 5.0 * sigma);
    }

    #[test]
    fn fixed_positions_constant_and_free_positions_fair() {
        let mut rng = RngStream::new(3, 0);
        let (d, draws) = (200, 2000);
        let inst = sample_hc_instance(3, d, 0.4, &mut rng).unwrap();
        for j in 0..3 {
            let mask = inst.fixed_mask(j);
            let mut ones = vec![0usize; d];
            for _ in 0..draws {
                let e = sample_hc_example(&inst, j, &mut rng).unwrap();
                let z = bits(&e);
                for (i, count) in ones.iter_mut().enumerate() {
                    if mask.get(i) {
                        assert_eq!(z.get(i), inst.fixed_values(j).get(i));
                    }
                    *count += z.get(i) as usize;
                }
            }
            // pooled bias over the free positions
            let free: Vec<usize> = (0..d).filter(|i| !mask.get(*i)).collect();
            let total: usize = free.iter().map(|i| ones[*i]).sum();
            let trials = (free.len() * draws) as f64;
            let sigma = (trials * 0.25).sqrt();
            assert!((total as f64 - trials / 2.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn pair_agreement_rate() {
        let mut rng = RngStream::new(4, 0);
        let (n_subpops, d, rho) = (50, 400, 0.3);
        let inst = sample_hc_instance(n_subpops, d, rho, &mut rng).unwrap();
        let mut agree = 0usize;
        let pairs = 200;
        for j in 0..n_subpops {
            for _ in 0..pairs {
                let a = sample_hc_example(&inst, j, &mut rng).unwrap();
                let b = sample_hc_example(&inst, j, &mut rng).unwrap();
                agree += d - bits(&a).hamming(bits(&b)).unwrap();
            }
        }
        let trials = (n_subpops * pairs * d) as f64;
        let p = (1.0 + rho) / 2.0;
        // binomial spread of the draws plus the spread of |I_j| across subpopulations
        let draw_var = trials * p * (1.0 - p);
        let set_var = (pairs * pairs) as f64 / 4.0 * (n_subpops * d) as f64 * rho * (1.0 - rho);
        let sigma = (draw_var + set_var).sqrt();
        assert!(
            (agree as f64 - trials * p).abs() < 5.0 * sigma,
            "agree rate {}",
            agree as f64 / trials
        );
    }
}
