//! Mixture weights over subpopulations and singleton statistics.
//!
//! A [`Prior`] is a list of frequencies with multiplicity. Each subpopulation
//! draws a frequency uniformly from the list and the draws are normalized into
//! [`MixtureWeights`]. [`mixture_stats`] estimates how often the test point lands
//! in a singleton (or empty) subpopulation and how many singletons a data set
//! of size `n` contains.

use std::fmt::Write as _;

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

const MAX_WEIGHT_RETRIES: usize = 16;

/// Default cap on the number of subpopulations a bimodal prior may request.
pub const DEFAULT_N_MAX: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Uniform,
    Bimodal,
    Custom,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::Bimodal => "bimodal",
            PriorKind::Custom => "custom",
        }
    }
}

/// Which heavy-bin probability the bimodal prior uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BimodalVariant {
    /// Heavy value drawn with probability `n 2^-n`.
    #[default]
    ManyHeavy,
    /// One heavy copy among `n 2^n` entries, i.e. probability `1 / (n 2^n)`.
    OneHeavy,
}

/// A list of nonnegative frequencies, stored as `(value, multiplicity)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    entries: Vec<(f64, u64)>,
    kind: PriorKind,
    total: u64,
}

impl Prior {
    pub fn new(entries: Vec<(f64, u64)>, kind: PriorKind) -> Result<Self> {
        let entries: Vec<(f64, u64)> = entries.into_iter().filter(|(_, c)| *c > 0).collect();
        if entries.is_empty() {
            return Err(Error::Degenerate("prior has no entries".into()));
        }
        if let Some((v, _)) = entries.iter().find(|(v, _)| !(*v >= 0.0) || !v.is_finite()) {
            return domain(format!("prior value {v} is not a finite nonnegative number"));
        }
        if entries.iter().all(|(v, _)| *v == 0.0) {
            return Err(Error::Degenerate("every prior value is zero".into()));
        }
        let total = entries
            .iter()
            .try_fold(0u64, |acc, (_, c)| acc.checked_add(*c))
            .ok_or_else(|| Error::TooLarge("prior multiplicities overflow u64".into()))?;
        Ok(Prior { entries, kind, total })
    }

    /// The single-entry prior `(1/N)`, which yields the uniform mixture.
    pub fn uniform(n_subpops: usize) -> Result<Self> {
        if n_subpops == 0 {
            return domain("N must be positive");
        }
        Prior::new(vec![(1.0 / n_subpops as f64, 1)], PriorKind::Uniform)
    }

    pub fn entries(&self) -> &[(f64, u64)] {
        &self.entries
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    /// One uniform draw from the list (respecting multiplicity).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random_range(0..self.total);
        for &(v, c) in &self.entries {
            if u < c {
                return v;
            }
            u -= c;
        }
        unreachable!("draw index exceeds total multiplicity")
    }

    /// Serializes as `value count` lines preceded by a kind header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# prior kind={}\n", self.kind.name());
        for (v, c) in &self.entries {
            let _ = writeln!(out, "{v} {c}");
        }
        out
    }

    /// Parses the `value count` format. Blank lines and `#` comments are
    /// skipped; a `# prior kind=...` header sets the kind (default custom).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = PriorKind::Custom;
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("prior kind=") {
                    kind = match k.trim() {
                        "uniform" => PriorKind::Uniform,
                        "bimodal" => PriorKind::Bimodal,
                        "custom" => PriorKind::Custom,
                        other => {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: format!("unknown prior kind {other:?}"),
                            })
                        }
                    };
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(v), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `value count`".into(),
                });
            };
            let v: f64 = v.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad value {v:?}"),
            })?;
            let c: u64 = c.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad count {c:?}"),
            })?;
            entries.push((v, c));
        }
        Prior::new(entries, kind)
    }
}

/// Bimodal prior for `N = 2^n` subpopulations: heavy value `1/(2n)` and light
/// value `1/(2 * 2^n)`.
pub fn build_bimodal_prior(n: u32, variant: BimodalVariant, n_max: usize) -> Result<Prior> {
    if n < 2 {
        return domain(format!("bimodal prior needs n >= 2, got {n}"));
    }
    let big_n = 1u64
        .checked_shl(n)
        .filter(|v| *v <= n_max as u64)
        .ok_or_else(|| Error::TooLarge(format!("2^{n} subpopulations exceeds N_max = {n_max}")))?;
    let heavy = 1.0 / (2.0 * n as f64);
    let light = 1.0 / (2.0 * big_n as f64);
    let entries = match variant {
        BimodalVariant::ManyHeavy => vec![(heavy, n as u64), (light, big_n - n as u64)],
        BimodalVariant::OneHeavy => vec![(heavy, 1), (light, n as u64 * big_n - 1)],
    };
    Prior::new(entries, PriorKind::Bimodal)
}

/// Normalized mixture weights `D(j)` with an alias table for O(1) sampling.
#[derive(Clone)]
pub struct MixtureWeights {
    weights: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl std::fmt::Debug for MixtureWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MixtureWeights")
            .field("weights", &self.weights)
            .finish()
    }
}

impl MixtureWeights {
    /// Normalizes nonnegative raw masses.
    pub fn from_unnormalized(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Degenerate("no subpopulations".into()));
        }
        if let Some(v) = raw.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return domain(format!("mixture mass {v} is not finite and nonnegative"));
        }
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            return Err(Error::Degenerate("all mixture masses are zero".into()));
        }
        let weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let alias =
            WeightedAliasIndex::new(weights.clone()).map_err(|e| Error::Degenerate(format!("alias table: {e}")))?;
        Ok(MixtureWeights { weights, alias })
    }

    pub fn uniform(n_subpops: usize) -> Result<Self> {
        Self::from_unnormalized(&vec![1.0; n_subpops])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws a subpopulation id `j ~ D`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }
}

/// Draws `delta_j ~ Uniform(prior)` for each of `n_subpops` subpopulations and
/// normalizes. An all-zero draw is retried a bounded number of times.
pub fn sample_weights(prior: &Prior, n_subpops: usize, rng: &mut RngStream) -> Result<MixtureWeights> {
    if n_subpops == 0 {
        return domain("N must be positive");
    }
    if prior.kind == PriorKind::Uniform && prior.entries.len() == 1 {
        return MixtureWeights::uniform(n_subpops);
    }
    for _ in 0..MAX_WEIGHT_RETRIES {
        let raw: Vec<f64> = (0..n_subpops).map(|_| prior.draw(rng)).collect();
        if raw.iter().any(|v| *v > 0.0) {
            return MixtureWeights::from_unnormalized(&raw);
        }
    }
    Err(Error::Degenerate(format!(
        "all sampled frequencies were zero after {MAX_WEIGHT_RETRIES} attempts"
    )))
}

/// Singleton statistics.
///
/// `tau1` is the probability the test point comes from a given subpopulation
/// that holds exactly one data point, `mu1` the expected fraction of the data
/// set made of singletons. `tau0`/`mu0` are the same for empty subpopulations.
/// Standard errors are zero for closed-form values; a rate is NaN when its
/// conditioning event never occurred.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureStats {
    pub tau0: f64,
    pub tau1: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub tau0_se: f64,
    pub tau1_se: f64,
    pub mu0_se: f64,
    pub mu1_se: f64,
    pub trials: usize,
    pub closed_form: bool,
}

/// Closed forms for the uniform mixture with `N = n`.
pub fn uniform_stats(n: usize) -> MixtureStats {
    let nf = n as f64;
    MixtureStats {
        tau0: 1.0 / nf,
        tau1: 1.0 / nf,
        mu0: (1.0 - 1.0 / nf).powi(n as i32),
        mu1: (1.0 - 1.0 / nf).powi(n as i32 - 1),
        tau0_se: 0.0,
        tau1_se: 0.0,
        mu0_se: 0.0,
        mu1_se: 0.0,
        trials: 0,
        closed_form: true,
    }
}

/// Singleton statistics, using the closed forms for a uniform prior with
/// `N = n` and Monte Carlo otherwise.
pub fn mixture_stats(
    prior: &Prior,
    n: usize,
    n_subpops: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<MixtureStats> {
    if prior.kind == PriorKind::Uniform && n_subpops == n && n > 0 {
        return Ok(uniform_stats(n));
    }
    mixture_stats_monte_carlo(prior, n, n_subpops, trials, rng)
}

#[derive(Default)]
struct RatioAccumulator {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RatioAccumulator {
    fn push(&mut self, num: f64, den: f64) {
        self.num.push(num);
        self.den.push(den);
    }

    /// Ratio-of-sums estimate and its delta-method standard error.
    fn estimate(&self) -> (f64, f64) {
        let t = self.den.len() as f64;
        let sum_den: f64 = self.den.iter().sum();
        if sum_den == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let ratio = self.num.iter().sum::<f64>() / sum_den;
        if self.den.len() < 2 {
            return (ratio, f64::NAN);
        }
        let mean_den = sum_den / t;
        let resid_var = self
            .num
            .iter()
            .zip(&self.den)
            .map(|(a, b)| (a - ratio * b).powi(2))
            .sum::<f64>()
            / (t - 1.0);
        (ratio, (resid_var / t).sqrt() / mean_den)
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Monte Carlo estimates: repeatedly sample weights, throw `n` balls into the
/// `N` bins and record which bins end up with zero or one ball.
///
/// `tau` is estimated by averaging `D(j)` over the conditioned bins, which
/// equals the probability that the test point lands in `j`.
pub fn mixture_stats_monte_carlo(
    prior: &Prior,
    n: usize,
    n_subpops: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<MixtureStats> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if n == 0 {
        return domain("n must be positive");
    }
    let mut tau0 = RatioAccumulator::default();
    let mut tau1 = RatioAccumulator::default();
    let mut k0s = Vec::with_capacity(trials);
    let mut k1s = Vec::with_capacity(trials);
    let mut counts = vec![0u32; n_subpops];
    for _ in 0..trials {
        let weights = sample_weights(prior, n_subpops, rng)?;
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[weights.sample(rng)] += 1;
        }
        let (mut k0, mut k1, mut s0, mut s1) = (0usize, 0usize, 0.0f64, 0.0f64);
        for (c, w) in counts.iter().zip(weights.weights()) {
            match c {
                0 => {
                    k0 += 1;
                    s0 += w;
                }
                1 => {
                    k1 += 1;
                    s1 += w;
                }
                _ => {}
            }
        }
        tau0.push(s0, k0 as f64);
        tau1.push(s1, k1 as f64);
        k0s.push(k0 as f64 / n as f64);
        k1s.push(k1 as f64 / n as f64);
    }
    let (tau0, tau0_se) = tau0.estimate();
    let (tau1, tau1_se) = tau1.estimate();
    let (mu0, mu0_se) = mean_and_se(&k0s);
    let (mu1, mu1_se) = mean_and_se(&k1s);
    Ok(MixtureStats {
        tau0,
        tau1,
        mu0,
        mu1,
        tau0_se,
        tau1_se,
        mu0_se,
        mu1_se,
        trials,
        closed_form: false,
    })
}
