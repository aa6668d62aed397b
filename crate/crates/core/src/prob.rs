//! Probability and coding-theory primitives shared by the other modules.

use std::f64::consts::{PI, SQRT_2};

use log::warn;
use rand::Rng;

use crate::bits::BitString;
use crate::error::{check_probability, domain, Error, Result};

/// `-p log2 p - (1-p) log2 (1-p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(h2(p))
}

/// Unchecked binary entropy for callers that already validated `p`.
pub(crate) fn h2(p: f64) -> f64 {
    xlog2x(p) + xlog2x(1.0 - p)
}

/// `-x log2 x`, zero at `x = 0`.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Sends `x` through a binary symmetric channel that flips each bit
/// independently with probability `flip_prob`.
pub fn bsc_apply<R: Rng + ?Sized>(x: &BitString, flip_prob: f64, rng: &mut R) -> Result<BitString> {
    check_probability("flip_prob", flip_prob)?;
    Ok(bsc_unchecked(x, flip_prob, rng))
}

pub(crate) fn bsc_unchecked<R: Rng + ?Sized>(x: &BitString, flip_prob: f64, rng: &mut R) -> BitString {
    if flip_prob == 0.0 {
        return x.clone();
    }
    if flip_prob == 1.0 {
        return x.complement();
    }
    let noise = if flip_prob == 0.5 {
        BitString::random(x.len(), rng)
    } else {
        let mut noise = BitString::zeros(x.len());
        for i in 0..x.len() {
            if rng.random::<f64>() < flip_prob {
                noise.set(i, true);
            }
        }
        noise
    };
    x.xor(&noise)
}

/// Littlewood's approximation to `Pr[Bin(d, 1/2) <= d/2 - x sqrt(d/4)]`:
/// `exp(-x^2/2) / (sqrt(2 pi) x)`.
///
/// The approximation is meant for `1 << x << d^(1/4)`; outside `1 < x < d^(1/4)`
/// a warning is logged and the value is still returned.
pub fn littlewood_tail(d: u64, x: f64) -> Result<f64> {
    if d == 0 {
        return domain("d must be positive");
    }
    if !(x > 0.0) {
        return domain(format!("x = {x} must be positive"));
    }
    let upper = (d as f64).powf(0.25);
    if x <= 1.0 || x >= upper {
        warn!("littlewood_tail: x = {x} outside validity range (1, {upper:.3}) for d = {d}");
    }
    Ok((-x * x / 2.0).exp() / ((2.0 * PI).sqrt() * x))
}

/// Standard normal CDF.
pub fn normal_cdf(a: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-a / SQRT_2)
}

/// Both sides of the weighted Jensen inequality
/// `E[X f(g(X))] <= E[X] f(E[X g(X)] / E[X])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JensenCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the weighted Jensen inequality for a concave `f` under the
/// empirical distribution that puts mass `1/len` on each pair `(xs[i], gs[i])`.
pub fn weighted_jensen_holds<F: Fn(f64) -> f64>(xs: &[f64], gs: &[f64], f: F) -> Result<JensenCheck> {
    if xs.is_empty() {
        return Err(Error::Degenerate("xs is empty".into()));
    }
    if xs.len() != gs.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: gs.len(),
        });
    }
    if let Some(x) = xs.iter().find(|x| !(**x >= 0.0)) {
        return domain(format!("xs must be nonnegative, found {x}"));
    }
    let m = xs.len() as f64;
    let ex: f64 = xs.iter().sum::<f64>() / m;
    if ex == 0.0 {
        return Err(Error::Degenerate("all xs are zero".into()));
    }
    let lhs = xs.iter().zip(gs).map(|(x, g)| x * f(*g)).sum::<f64>() / m;
    let exg = xs.iter().zip(gs).map(|(x, g)| x * g).sum::<f64>() / m;
    let rhs = ex * f(exg / ex);
    Ok(JensenCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}
