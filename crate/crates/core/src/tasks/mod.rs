//! Generative processes for the learning tasks and data set assembly.

mod hc;
mod io;
mod la;
mod nsp;
mod threshold;

pub use hc::{sample_hc_example, sample_hc_instance, HcInstance};
pub use io::{read_dataset, read_instance, write_dataset, write_instance, DatasetHeader};
pub use la::{sample_la_example, sample_la_instance, LaInstance, DEFAULT_ALPHABET_CONSTANT};
pub use nsp::{sample_nsp_example, sample_nsp_example_at, sample_nsp_instance, NspInstance};
pub use threshold::{
    sample_threshold_example, sample_threshold_example_with, sample_threshold_instance, sample_two_length_example,
    sample_two_length_instance, two_length_learner, ThresholdInstance, TwoLengthInstance, TwoLengthKnowledge,
};

use crate::bits::BitString;
use crate::error::{domain, Error, Result};
use crate::mixture::MixtureWeights;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Hc,
    Nsp,
    La,
    Threshold,
    TwoLength,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Hc => "hc",
            TaskKind::Nsp => "nsp",
            TaskKind::La => "la",
            TaskKind::Threshold => "threshold",
            TaskKind::TwoLength => "two_length",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "hc" => TaskKind::Hc,
            "nsp" => TaskKind::Nsp,
            "la" => TaskKind::La,
            "threshold" => TaskKind::Threshold,
            "two_length" => TaskKind::TwoLength,
            other => return domain(format!("unknown task {other:?}")),
        })
    }
}

/// Input to a predictor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Features {
    Bits(BitString),
    /// A subpopulation identifier paired with a (noisy) prefix.
    Prefix {
        subpop: usize,
        prefix: BitString,
    },
    /// Symbols over `[t]`, 0-based.
    Symbols(Vec<u32>),
}

impl Features {
    pub fn as_bits(&self) -> Result<&BitString> {
        match self {
            Features::Bits(b) => Ok(b),
            other => Err(Error::FeatureKind(format!(
                "expected bits, found {}",
                other.kind_name()
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Features::Bits(_) => "bits",
            Features::Prefix { .. } => "prefix",
            Features::Symbols(_) => "symbols",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledExample {
    pub features: Features,
    pub label: usize,
    /// The generating subpopulation. Hidden from learners.
    pub subpop: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskInstance {
    Hc(HcInstance),
    Nsp(NspInstance),
    La(LaInstance),
    Threshold(ThresholdInstance),
    TwoLength(TwoLengthInstance),
}

impl TaskInstance {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskInstance::Hc(_) => TaskKind::Hc,
            TaskInstance::Nsp(_) => TaskKind::Nsp,
            TaskInstance::La(_) => TaskKind::La,
            TaskInstance::Threshold(_) => TaskKind::Threshold,
            TaskInstance::TwoLength(_) => TaskKind::TwoLength,
        }
    }

    /// Number of subpopulations. The single-distribution tasks report 1.
    pub fn num_subpops(&self) -> usize {
        match self {
            TaskInstance::Hc(i) => i.num_subpops(),
            TaskInstance::Nsp(i) => i.num_subpops(),
            TaskInstance::La(i) => i.num_subpops(),
            TaskInstance::Threshold(_) | TaskInstance::TwoLength(_) => 1,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            TaskInstance::Hc(i) => i.num_subpops(),
            TaskInstance::La(i) => i.num_subpops(),
            _ => 2,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            TaskInstance::Hc(i) => i.d(),
            TaskInstance::Nsp(i) => i.d(),
            TaskInstance::La(i) => i.d(),
            TaskInstance::Threshold(i) => i.d(),
            TaskInstance::TwoLength(i) => i.d(),
        }
    }

    pub fn sample_example(&self, j: usize, rng: &mut RngStream) -> Result<LabeledExample> {
        match self {
            TaskInstance::Hc(i) => sample_hc_example(i, j, rng),
            TaskInstance::Nsp(i) => sample_nsp_example(i, j, rng),
            TaskInstance::La(i) => sample_la_example(i, j, rng),
            TaskInstance::Threshold(i) => {
                check_subpop(j, 1)?;
                Ok(sample_threshold_example(i, rng))
            }
            TaskInstance::TwoLength(i) => {
                check_subpop(j, 1)?;
                Ok(sample_two_length_example(i, rng))
            }
        }
    }
}

pub(crate) fn check_subpop(j: usize, count: usize) -> Result<()> {
    if j < count {
        Ok(())
    } else {
        Err(Error::BadSubpop { id: j, count })
    }
}

/// `n` labeled examples with singleton bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub singleton_mask: Vec<bool>,
    /// Number of singleton examples.
    pub k: usize,
    pub num_subpops: usize,
}

impl Dataset {
    /// Builds the singleton mask from the examples' subpopulation ids.
    pub fn new(examples: Vec<LabeledExample>, num_subpops: usize) -> Result<Self> {
        let counts = subpop_counts(&examples, num_subpops)?;
        let singleton_mask: Vec<bool> = examples.iter().map(|e| counts[e.subpop] == 1).collect();
        let k = singleton_mask.iter().filter(|s| **s).count();
        Ok(Dataset {
            examples,
            singleton_mask,
            k,
            num_subpops,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of examples per subpopulation.
    pub fn counts(&self) -> Vec<usize> {
        subpop_counts(&self.examples, self.num_subpops).expect("ids validated at construction")
    }
}

fn subpop_counts(examples: &[LabeledExample], num_subpops: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; num_subpops];
    for e in examples {
        check_subpop(e.subpop, num_subpops)?;
        counts[e.subpop] += 1;
    }
    Ok(counts)
}

/// Draws `n` i.i.d. examples: `j ~ D`, then an example from subpopulation `j`.
pub fn generate_dataset(
    instance: &TaskInstance,
    weights: &MixtureWeights,
    n: usize,
    rng: &mut RngStream,
) -> Result<Dataset> {
    if weights.len() != instance.num_subpops() {
        return Err(Error::LengthMismatch {
            expected: instance.num_subpops(),
            found: weights.len(),
        });
    }
    let examples = (0..n)
        .map(|_| {
            let j = weights.sample(rng);
            instance.sample_example(j, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(examples, instance.num_subpops())
}

/// `sqrt((2 ln(a mu1 n) - ln ln n) / d)`, the fixed-feature probability that
/// puts singleton error near a constant set by `a`.
pub fn rho_for(n: usize, mu1: f64, a: f64, d: usize) -> Result<f64> {
    if n < 3 {
        return domain(format!("n = {n} must be at least 3"));
    }
    if d == 0 {
        return domain("d must be positive");
    }
    let amn = a * mu1 * n as f64;
    if !(amn > 1.0) {
        return domain(format!("a * mu1 * n = {amn} must exceed 1"));
    }
    let radicand = (2.0 * amn.ln() - (n as f64).ln().ln()) / d as f64;
    if !(radicand >= 0.0) {
        return domain(format!("radicand {radicand} is negative"));
    }
    let rho = radicand.sqrt();
    if rho > 1.0 {
        return domain(format!("rho = {rho} exceeds 1; increase d"));
    }
    Ok(rho)
}
