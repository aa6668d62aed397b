//! Bayes-optimal and baseline predictors, and the error evaluation shared by
//! every classifier.

use std::fmt::Write as _;

use rand::Rng;

use crate::bits::BitString;
use crate::error::{domain, Error, Result};
use crate::mixture::MixtureWeights;
use crate::prob::bsc_unchecked;
use crate::rng::RngStream;
use crate::tasks::{rho_for, Dataset, Features, HcInstance, LabeledExample, TaskInstance};

/// Anything that maps features to a distribution over class labels.
pub trait ProbClassifier: Sync {
    fn num_classes(&self) -> usize;

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>>;

    fn predict_proba_batch(&self, xs: &[&Features]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.predict_proba(x)).collect()
    }

    fn name(&self) -> String {
        "classifier".into()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Decision of a classifier: argmax of its probabilities.
pub fn predict_label<C: ProbClassifier + ?Sized>(c: &C, x: &Features) -> Result<usize> {
    Ok(argmax(&c.predict_proba(x)?))
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn check_nonempty(ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

fn bits_of(e: &LabeledExample) -> Result<&BitString> {
    e.features.as_bits()
}

/// Label of the training example closest to `z` in Hamming distance; ties go
/// to the lowest example index.
pub fn nn_predict_hc(ds: &Dataset, z: &BitString) -> Result<usize> {
    check_nonempty(ds)?;
    let mut best = (usize::MAX, 0usize);
    for e in &ds.examples {
        let dist = bits_of(e)?.hamming(z)?;
        if dist < best.0 {
            best = (dist, e.label);
        }
    }
    Ok(best.1)
}

/// The two-representative baseline: a label whose (first two) examples both
/// lie within `tau = d/2 - 3 rho d / 8` of `z` wins (lowest label first);
/// otherwise the nearest singleton label, otherwise the nearest example.
pub fn baseline_hc_predict(ds: &Dataset, z: &BitString, rho: f64) -> Result<usize> {
    check_nonempty(ds)?;
    let d = z.len() as f64;
    let tau = d / 2.0 - 3.0 * rho * d / 8.0;
    let dists = ds
        .examples
        .iter()
        .map(|e| bits_of(e)?.hamming(z))
        .collect::<Result<Vec<_>>>()?;
    let num_labels = ds.examples.iter().map(|e| e.label).max().unwrap_or(0) + 1;
    let mut seen = vec![0usize; num_labels];
    let mut pair_ok = vec![true; num_labels];
    for (e, &dist) in ds.examples.iter().zip(&dists) {
        let l = e.label;
        if seen[l] < 2 {
            pair_ok[l] &= dist as f64 <= tau;
        }
        seen[l] += 1;
    }
    if let Some(l) = (0..num_labels).find(|&l| seen[l] >= 2 && pair_ok[l]) {
        return Ok(l);
    }
    let nearest = |filter: &dyn Fn(usize) -> bool| {
        ds.examples
            .iter()
            .zip(&dists)
            .filter(|(e, _)| filter(e.label))
            .fold(None::<(usize, usize)>, |acc, (e, &dist)| match acc {
                Some((bd, _)) if bd <= dist => acc,
                _ => Some((dist, e.label)),
            })
            .map(|(_, l)| l)
    };
    Ok(nearest(&|l| seen[l] == 1)
        .or_else(|| nearest(&|_| true))
        .expect("dataset is nonempty"))
}

/// The stored example for subpopulation `j` with the longest string
/// (prefix followed by its label), lowest index on ties.
fn longest_stored(ds: &Dataset, j: usize) -> Option<BitString> {
    let mut best: Option<BitString> = None;
    for e in &ds.examples {
        if let Features::Prefix { subpop, prefix } = &e.features {
            if *subpop == j && best.as_ref().is_none_or(|b| b.len() < prefix.len() + 1) {
                let mut s = prefix.clone();
                s.push(e.label == 1);
                best = Some(s);
            }
        }
    }
    best
}

/// Next-bit prediction from the longest stored string of the queried
/// subpopulation, or a fair coin when nothing long enough is stored.
pub fn nsp_predict(ds: &Dataset, subpop: usize, prefix: &BitString, rng: &mut RngStream) -> usize {
    match longest_stored(ds, subpop) {
        Some(s) if s.len() > prefix.len() => s.get(prefix.len()) as usize,
        _ => rng.random::<bool>() as usize,
    }
}

/// Label of the training example agreeing with `z` on the most positions.
pub fn la_predict(ds: &Dataset, z: &[u32]) -> Result<usize> {
    check_nonempty(ds)?;
    let mut best = (0usize, None::<usize>);
    for e in &ds.examples {
        let Features::Symbols(s) = &e.features else {
            return Err(Error::FeatureKind(format!(
                "expected symbols, found {}",
                e.features.kind_name()
            )));
        };
        if s.len() != z.len() {
            return Err(Error::LengthMismatch {
                expected: s.len(),
                found: z.len(),
            });
        }
        let m = s.iter().zip(z).filter(|(a, b)| a == b).count();
        if best.1.is_none() || m > best.0 {
            best = (m, Some(e.label));
        }
    }
    Ok(best.1.expect("dataset is nonempty"))
}

/// Nearest neighbour over an HC data set, as a one-hot classifier.
pub struct NnHc<'a> {
    pub dataset: &'a Dataset,
    pub num_classes: usize,
}

impl ProbClassifier for NnHc<'_> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        Ok(one_hot(self.num_classes, nn_predict_hc(self.dataset, x.as_bits()?)?))
    }

    fn name(&self) -> String {
        "nn".into()
    }
}

pub struct BaselineHc<'a> {
    pub dataset: &'a Dataset,
    pub num_classes: usize,
    pub rho: f64,
}

impl ProbClassifier for BaselineHc<'_> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        Ok(one_hot(
            self.num_classes,
            baseline_hc_predict(self.dataset, x.as_bits()?, self.rho)?,
        ))
    }

    fn name(&self) -> String {
        "baseline".into()
    }
}

pub struct LaNearest<'a> {
    pub dataset: &'a Dataset,
    pub num_classes: usize,
}

impl ProbClassifier for LaNearest<'_> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        let Features::Symbols(z) = x else {
            return Err(Error::FeatureKind(format!("expected symbols, found {}", x.kind_name())));
        };
        Ok(one_hot(self.num_classes, la_predict(self.dataset, z)?))
    }

    fn name(&self) -> String {
        "la_nearest".into()
    }
}

/// Next-bit predictor as a classifier over {0, 1}. Where [`nsp_predict`]
/// would flip a coin this returns `[0.5, 0.5]`.
pub struct NspLongest<'a> {
    pub dataset: &'a Dataset,
}

impl ProbClassifier for NspLongest<'_> {
    fn num_classes(&self) -> usize {
        2
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        let Features::Prefix { subpop, prefix } = x else {
            return Err(Error::FeatureKind(format!("expected prefix, found {}", x.kind_name())));
        };
        Ok(match longest_stored(self.dataset, *subpop) {
            Some(s) if s.len() > prefix.len() => one_hot(2, s.get(prefix.len()) as usize),
            _ => vec![0.5, 0.5],
        })
    }

    fn name(&self) -> String {
        "nsp_longest".into()
    }
}

/// Uniform distribution over the classes.
pub struct UniformClassifier(pub usize);

impl ProbClassifier for UniformClassifier {
    fn num_classes(&self) -> usize {
        self.0
    }

    fn predict_proba(&self, _x: &Features) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.0 as f64; self.0])
    }

    fn name(&self) -> String {
        "uniform".into()
    }
}

/// Posterior over subpopulations for an HC point when the instance itself is
/// known: `D(j) 2^|I_j|` on the subcubes containing `z`.
pub struct HcInstanceBayes<'a> {
    pub instance: &'a HcInstance,
    pub weights: &'a MixtureWeights,
}

impl ProbClassifier for HcInstanceBayes<'_> {
    fn num_classes(&self) -> usize {
        self.instance.num_subpops()
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        let z = x.as_bits()?;
        let inst = self.instance;
        let mut logp = vec![f64::NEG_INFINITY; inst.num_subpops()];
        for (j, lp) in logp.iter_mut().enumerate() {
            let mask = inst.fixed_mask(j);
            let consistent = z.overlay(mask, inst.fixed_values(j)) == *z;
            let w = self.weights.weights()[j];
            if consistent && w > 0.0 {
                *lp = w.ln() + inst.fixed_count(j) as f64 * std::f64::consts::LN_2;
            }
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Degenerate("point lies in no subcube of positive weight".into()));
        }
        let mut p: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Ok(p)
    }

    fn name(&self) -> String {
        "instance_bayes".into()
    }
}

/// Misclassifications over a stratum. `count == 0` means the stratum was empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Rate {
    pub errors: usize,
    pub count: usize,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        (self.count > 0).then(|| self.errors as f64 / self.count as f64)
    }

    /// Percentage with one decimal, or `NA`.
    pub fn display_pct(&self) -> String {
        self.value().map_or("NA".into(), |v| format!("{:.1}", 100.0 * v))
    }

    pub fn merge(&self, other: &Rate) -> Rate {
        Rate {
            errors: self.errors + other.errors,
            count: self.count + other.count,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ErrorReport {
    pub train: Rate,
    pub test: Rate,
    pub represented: Rate,
    pub singletons: Rate,
}

/// Identifying fields of a CSV error row.
#[derive(Clone, Debug)]
pub struct ReportMeta<'a> {
    pub task: &'a str,
    pub n: usize,
    pub num_subpops: usize,
    pub d: usize,
    pub param: f64,
    pub classifier: &'a str,
    pub seed: u64,
    /// Trial index, or `None` for an aggregate row.
    pub trial: Option<usize>,
}

pub const CSV_HEADER: &str = "task,n,N,d,param,classifier,train,test,represented,singletons,seed,trial";

impl ErrorReport {
    pub fn merge(&self, o: &ErrorReport) -> ErrorReport {
        ErrorReport {
            train: self.train.merge(&o.train),
            test: self.test.merge(&o.test),
            represented: self.represented.merge(&o.represented),
            singletons: self.singletons.merge(&o.singletons),
        }
    }

    /// One CSV row; rates are fractions, empty strata are `NA`.
    pub fn to_csv_row(&self, meta: &ReportMeta<'_>) -> String {
        let fmt = |r: &Rate| r.value().map_or("NA".to_string(), |v| format!("{v:.6}"));
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            meta.task,
            meta.n,
            meta.num_subpops,
            meta.d,
            meta.param,
            meta.classifier,
            fmt(&self.train),
            fmt(&self.test),
            fmt(&self.represented),
            fmt(&self.singletons),
            meta.seed,
            meta.trial.map_or("mean".to_string(), |t| t.to_string()),
        );
        row
    }
}

const EVAL_CHUNK: usize = 1024;

fn count_errors<C: ProbClassifier + ?Sized>(c: &C, examples: &[LabeledExample]) -> Result<Rate> {
    let mut errors = 0;
    for chunk in examples.chunks(EVAL_CHUNK) {
        let xs: Vec<&Features> = chunk.iter().map(|e| &e.features).collect();
        let probs = c.predict_proba_batch(&xs)?;
        errors += probs.iter().zip(chunk).filter(|(p, e)| argmax(p) != e.label).count();
    }
    Ok(Rate {
        errors,
        count: examples.len(),
    })
}

/// `num` fresh draws from `D` restricted to subpopulations where `keep` holds;
/// `None` if that set has no mass.
fn draw_stratum(
    instance: &TaskInstance,
    weights: &MixtureWeights,
    keep: impl Fn(usize) -> bool,
    num: usize,
    rng: &mut RngStream,
) -> Result<Option<Vec<LabeledExample>>> {
    let restricted: Vec<f64> = weights
        .weights()
        .iter()
        .enumerate()
        .map(|(j, w)| if keep(j) { *w } else { 0.0 })
        .collect();
    if restricted.iter().all(|w| *w == 0.0) {
        return Ok(None);
    }
    let sub = MixtureWeights::from_unnormalized(&restricted)?;
    let draws = (0..num)
        .map(|_| instance.sample_example(sub.sample(rng), rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(draws))
}

/// Train, test, represented and singleton error of a classifier.
///
/// The represented (singleton) stratum draws test points from `D`
/// conditioned on subpopulations with at least one (exactly one) training
/// example. Decisions are argmax of `predict_proba`, lowest class on ties.
pub fn evaluate_errors<C: ProbClassifier + ?Sized>(
    classifier: &C,
    instance: &TaskInstance,
    weights: &MixtureWeights,
    ds: &Dataset,
    num_test: usize,
    rng: &mut RngStream,
) -> Result<ErrorReport> {
    if num_test == 0 {
        return domain("num_test must be at least 1");
    }
    if weights.len() != instance.num_subpops() || ds.num_subpops != instance.num_subpops() {
        return Err(Error::LengthMismatch {
            expected: instance.num_subpops(),
            found: weights.len(),
        });
    }
    let counts = ds.counts();
    let train = count_errors(classifier, &ds.examples)?;
    let mut strata = Vec::with_capacity(3);
    for keep in [
        &(|_: usize| true) as &dyn Fn(usize) -> bool,
        &|j| counts[j] >= 1,
        &|j| counts[j] == 1,
    ] {
        strata.push(match draw_stratum(instance, weights, keep, num_test, rng)? {
            Some(draws) => count_errors(classifier, &draws)?,
            None => Rate::default(),
        });
    }
    Ok(ErrorReport {
        train,
        test: strata[0],
        represented: strata[1],
        singletons: strata[2],
    })
}

/// Monte Carlo error of nearest neighbour on `k` uniform points when the
/// query is the BSC_{(1-rho)/2} image of one of them, with
/// `rho = sqrt((2 ln(a k) - ln ln k) / d)`.
pub fn sing_error_estimate(k: usize, d: usize, a: f64, trials: usize, rng: &mut RngStream) -> Result<f64> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    let rho = rho_for(k, 1.0, a, d)?;
    let q = (1.0 - rho) / 2.0;
    let mut errors = 0usize;
    let mut points: Vec<BitString> = Vec::with_capacity(k);
    for _ in 0..trials {
        points.clear();
        points.extend((0..k).map(|_| BitString::random(d, rng)));
        let target = rng.random_range(0..k);
        let z = bsc_unchecked(&points[target], q, rng);
        let mut best = (usize::MAX, 0usize);
        for (i, p) in points.iter().enumerate() {
            let dist = p.hamming_unchecked(&z);
            if dist < best.0 {
                best = (dist, i);
            }
        }
        errors += (best.1 != target) as usize;
    }
    Ok(errors as f64 / trials as f64)
}
