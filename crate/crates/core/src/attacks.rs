//! Black-box reconstruction of singleton training points from a classifier.
//!
//! Attacks only see [`ProbClassifier`] outputs. Queries are batched so a
//! model can answer many of them with one matrix product; the answers are the
//! same as issuing them one at a time.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::bits::BitString;
use crate::error::{domain, Error, Result};
use crate::predictors::ProbClassifier;
use crate::rng::RngStream;
use crate::tasks::{Dataset, Features};

const QUERY_BATCH: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    /// Coordinate ascent with `iterations` single-bit steps.
    Coordinate { iterations: usize },
    /// Per-bit majority vote over `probes` random strings.
    GradientSign { probes: usize },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Coordinate { .. } => "coordinate",
            AttackKind::GradientSign { .. } => "gradient",
        }
    }

    /// `T = 2d` or `k = 32`.
    pub fn default_for(name: &str, d: usize) -> Result<Self> {
        match name {
            "coordinate" => Ok(AttackKind::Coordinate { iterations: 2 * d }),
            "gradient" => Ok(AttackKind::GradientSign { probes: 32 }),
            other => domain(format!("unknown attack {other:?}")),
        }
    }
}

fn target_scores<C: ProbClassifier + ?Sized>(f: &C, queries: &[Features], targets: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(queries.len());
    for (chunk_idx, chunk) in queries.chunks(QUERY_BATCH).enumerate() {
        let refs: Vec<&Features> = chunk.iter().collect();
        let probs = f.predict_proba_batch(&refs)?;
        for (i, p) in probs.iter().enumerate() {
            let t = targets[chunk_idx * QUERY_BATCH + i];
            out.push(*p.get(t).ok_or(Error::BadSubpop { id: t, count: p.len() })?);
        }
    }
    Ok(out)
}

/// Final estimate and the objective `f(x)_target` after every step.
#[derive(Clone, Debug, PartialEq)]
pub struct AscentTrace {
    pub estimate: BitString,
    pub objective: Vec<f64>,
}

/// Coordinate ascent run on several targets side by side; `rngs[m]` supplies
/// the random start for `targets[m]`.
pub fn coordinate_ascent_many<C: ProbClassifier + ?Sized>(
    f: &C,
    targets: &[usize],
    d: usize,
    iterations: usize,
    rngs: &mut [RngStream],
) -> Result<Vec<AscentTrace>> {
    if targets.len() != rngs.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            found: rngs.len(),
        });
    }
    if d == 0 {
        return domain("d must be positive");
    }
    let mut xs: Vec<BitString> = rngs.iter_mut().map(|r| BitString::random(d, r)).collect();
    let mut objective = vec![Vec::with_capacity(iterations); targets.len()];
    let pair_targets: Vec<usize> = targets.iter().flat_map(|t| [*t, *t]).collect();
    for t in 1..=iterations {
        let i = t % d;
        let queries: Vec<Features> = xs
            .iter()
            .flat_map(|x| {
                [
                    Features::Bits(x.with_bit(i, false)),
                    Features::Bits(x.with_bit(i, true)),
                ]
            })
            .collect();
        let scores = target_scores(f, &queries, &pair_targets)?;
        for (m, x) in xs.iter_mut().enumerate() {
            let (s0, s1) = (scores[2 * m], scores[2 * m + 1]);
            let bit = s0 < s1;
            x.set(i, bit);
            let best = if bit { s1 } else { s0 };
            if let Some(prev) = objective[m].last() {
                debug_assert!(best >= prev - 1e-12, "objective fell at step {t}");
            }
            objective[m].push(best);
        }
    }
    Ok(xs
        .into_iter()
        .zip(objective)
        .map(|(estimate, objective)| AscentTrace { estimate, objective })
        .collect())
}

/// Starts from a uniform random string; at step `t` sets bit `t mod d` to the
/// value with the larger target probability (0 on ties).
pub fn coordinate_ascent_attack<C: ProbClassifier + ?Sized>(
    f: &C,
    target: usize,
    d: usize,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<BitString> {
    let mut rngs = [rng.clone()];
    let out = coordinate_ascent_many(f, &[target], d, iterations, &mut rngs)?;
    *rng = rngs[0].clone();
    Ok(out.into_iter().next().unwrap().estimate)
}

/// For each bit, `k` uniform probes vote for 0 when setting the bit to 0 does
/// not lower the target probability; the bit is 1 iff fewer than `k/2` votes
/// went to 0.
pub fn gradient_sign_attack<C: ProbClassifier + ?Sized>(
    f: &C,
    target: usize,
    d: usize,
    k: usize,
    rng: &mut RngStream,
) -> Result<BitString> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    let mut x = BitString::zeros(d);
    let bits_per_batch = (QUERY_BATCH / (2 * k)).max(1);
    let mut start = 0;
    while start < d {
        let end = (start + bits_per_batch).min(d);
        let mut queries = Vec::with_capacity((end - start) * 2 * k);
        for i in start..end {
            for _ in 0..k {
                let y = BitString::random(d, rng);
                queries.push(Features::Bits(y.with_bit(i, false)));
                queries.push(Features::Bits(y.with_bit(i, true)));
            }
        }
        let scores = target_scores(f, &queries, &vec![target; queries.len()])?;
        for (off, i) in (start..end).enumerate() {
            let votes = (0..k)
                .filter(|l| {
                    let q = 2 * (off * k + l);
                    scores[q] >= scores[q + 1]
                })
                .count();
            if (votes as f64) < k as f64 / 2.0 {
                x.set(i, true);
            }
        }
        start = end;
    }
    Ok(x)
}

/// `100 x` mean over targets of the fraction of wrong bits.
pub fn recovery_error(estimates: &[BitString], truths: &[BitString]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::Degenerate("no targets".into()));
    }
    let mut total = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        if t.is_empty() {
            return Err(Error::Degenerate("empty target string".into()));
        }
        total += e.hamming(t)? as f64 / t.len() as f64;
    }
    Ok(100.0 * total / estimates.len() as f64)
}

/// Test classifier whose target probability falls linearly with Hamming
/// distance from a planted string: `f(x)_target = (d - |x - s|) / d`.
pub struct MonotoneOracle {
    pub planted: BitString,
    pub target: usize,
    pub num_classes: usize,
}

impl ProbClassifier for MonotoneOracle {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        let d = self.planted.len() as f64;
        let p = (d - x.as_bits()?.hamming(&self.planted)? as f64) / d;
        let rest = (1.0 - p) / (self.num_classes - 1) as f64;
        let mut v = vec![rest; self.num_classes];
        v[self.target] = p;
        Ok(v)
    }

    fn name(&self) -> String {
        "monotone_oracle".into()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetResult {
    pub subpop: usize,
    pub truth: BitString,
    pub estimate: BitString,
    pub bit_errors: usize,
}

impl TargetResult {
    pub fn fraction(&self) -> f64 {
        self.bit_errors as f64 / self.truth.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub targets: Vec<TargetResult>,
    /// Mean bit-error percentage; `None` without targets.
    pub recovery_error: Option<f64>,
}

pub const ATTACK_CSV_HEADER: &str = "trial,classifier,attack,target,d,bit_errors,bit_error_fraction";

impl AttackReport {
    /// Per-target rows (1-based subpopulation ids). `trial` of `None` marks
    /// an aggregate row.
    pub fn csv_rows(&self, trial: usize, classifier: &str) -> String {
        let mut out = String::new();
        for t in &self.targets {
            let _ = writeln!(
                out,
                "{trial},{classifier},{},{},{},{},{:.6}",
                self.attack.name(),
                t.subpop + 1,
                t.truth.len(),
                t.bit_errors,
                t.fraction()
            );
        }
        out
    }
}

/// Example indices of up to `max` singletons, chosen uniformly without
/// replacement and returned in increasing order.
pub fn select_targets(ds: &Dataset, max: usize, rng: &mut RngStream) -> Vec<usize> {
    let singles: Vec<usize> = (0..ds.len()).filter(|i| ds.singleton_mask[*i]).collect();
    let m = max.min(singles.len());
    let mut picked: Vec<usize> = sample(rng, singles.len(), m).into_iter().map(|i| singles[i]).collect();
    picked.sort_unstable();
    picked
}

/// Attacks every selected training example, targeting its label. Each target
/// gets its own substream of `rng`.
pub fn run_attack<C: ProbClassifier + ?Sized>(
    f: &C,
    ds: &Dataset,
    example_ids: &[usize],
    attack: AttackKind,
    rng: &RngStream,
) -> Result<AttackReport> {
    let truths = example_ids
        .iter()
        .map(|&i| ds.examples[i].features.as_bits().cloned())
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = example_ids.iter().map(|&i| ds.examples[i].label).collect();
    let mut rngs: Vec<RngStream> = (0..example_ids.len()).map(|m| rng.substream(m as u64)).collect();
    let estimates = match attack {
        AttackKind::Coordinate { iterations } => {
            let d = truths.first().map_or(0, |t| t.len());
            if d == 0 {
                Vec::new()
            } else {
                coordinate_ascent_many(f, &labels, d, iterations, &mut rngs)?
                    .into_iter()
                    .map(|t| t.estimate)
                    .collect()
            }
        }
        AttackKind::GradientSign { probes } => labels
            .par_iter()
            .zip(&truths)
            .zip(rngs.par_iter_mut())
            .map(|((&l, t), r)| gradient_sign_attack(f, l, t.len(), probes, r))
            .collect::<Result<Vec<_>>>()?,
    };
    let recovery = if truths.is_empty() {
        None
    } else {
        Some(recovery_error(&estimates, &truths)?)
    };
    let targets = example_ids
        .iter()
        .zip(truths)
        .zip(estimates)
        .map(|((&i, truth), estimate)| TargetResult {
            subpop: ds.examples[i].subpop,
            bit_errors: truth.hamming_unchecked(&estimate),
            truth,
            estimate,
        })
        .collect();
    Ok(AttackReport {
        attack,
        targets,
        recovery_error: recovery,
    })
}
