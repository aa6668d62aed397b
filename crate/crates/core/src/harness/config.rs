//! Experiment configuration files.
//!
//! A config is a small TOML document with three flat sections:
//!
//! ```toml
//! [experiment]
//! task = "hc"
//! n = 500
//! N = 500
//! d = 1000
//! a = 50000.0
//! trials = 20
//!
//! [train]
//! classifier = "logit"
//!
//! [attack]
//! kind = "coordinate"
//! ```
//!
//! Omitted keys take the defaults of the selected classifier and attack.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::attacks::AttackKind;
use crate::error::{domain, Error, Result};
use crate::mixture::{build_bimodal_prior, mixture_stats, BimodalVariant, Prior, DEFAULT_N_MAX};
use crate::rng::RngStream;
use crate::tasks::{rho_for, TaskKind, DEFAULT_ALPHABET_CONSTANT};
use crate::train::TrainConfig;

/// Trials used to estimate `mu1` for `a`-based rho under a non-uniform prior.
const MU1_TRIALS: usize = 200;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    task: Option<String>,
    n: Option<usize>,
    #[serde(rename = "N")]
    num_subpops: Option<usize>,
    d: Option<usize>,
    prior: Option<String>,
    rho: Option<f64>,
    a: Option<f64>,
    delta: Option<f64>,
    alphabet_c: Option<f64>,
    trials: Option<usize>,
    targets: Option<usize>,
    num_test: Option<usize>,
    seed: Option<u64>,
    out: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    classifier: Option<String>,
    learning_rate: Option<f64>,
    momentum: Option<f64>,
    nesterov: Option<bool>,
    updates: Option<usize>,
    lr_decay: Option<f64>,
    init_scale: Option<f64>,
    hidden: Option<usize>,
    snapshot_every: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: Option<String>,
    iterations: Option<usize>,
    probes: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    attack: RawAttack,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    Uniform,
    Bimodal(BimodalVariant),
    File(PathBuf),
}

impl PriorSpec {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" => PriorSpec::Uniform,
            "bimodal" => PriorSpec::Bimodal(BimodalVariant::ManyHeavy),
            "bimodal-one-heavy" => PriorSpec::Bimodal(BimodalVariant::OneHeavy),
            other => match other.strip_prefix("file:") {
                Some(p) => PriorSpec::File(PathBuf::from(p)),
                None => return domain(format!("unknown prior {other:?}")),
            },
        })
    }

    pub fn name(&self) -> String {
        match self {
            PriorSpec::Uniform => "uniform".into(),
            PriorSpec::Bimodal(BimodalVariant::ManyHeavy) => "bimodal".into(),
            PriorSpec::Bimodal(BimodalVariant::OneHeavy) => "bimodal-one-heavy".into(),
            PriorSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn build(&self, n: usize) -> Result<Prior> {
        match self {
            PriorSpec::Uniform => Prior::uniform(n),
            PriorSpec::Bimodal(v) => build_bimodal_prior(n as u32, *v, DEFAULT_N_MAX),
            PriorSpec::File(p) => Prior::from_text(&std::fs::read_to_string(p)?),
        }
    }
}

/// How the hypercube fixed-feature probability is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoSpec {
    Fixed(f64),
    /// `rho_for(n, mu1, a, d)`.
    FromA(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierKind {
    Logit,
    Mlp,
    /// Nearest neighbour (longest stored string for NSP, symbol match for LA).
    Nn,
    Baseline,
    /// Bayes posterior with the instance known.
    Bayes,
    /// Monotone oracle planted at each attack target; attack plumbing only.
    Oracle,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "logit" => ClassifierKind::Logit,
            "mlp" => ClassifierKind::Mlp,
            "nn" => ClassifierKind::Nn,
            "baseline" => ClassifierKind::Baseline,
            "bayes" => ClassifierKind::Bayes,
            "oracle" => ClassifierKind::Oracle,
            other => return domain(format!("unknown classifier {other:?}")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Logit => "logit",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Nn => "nn",
            ClassifierKind::Baseline => "baseline",
            ClassifierKind::Bayes => "bayes",
            ClassifierKind::Oracle => "oracle",
        }
    }

    pub fn is_trained(self) -> bool {
        matches!(self, ClassifierKind::Logit | ClassifierKind::Mlp)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub n: usize,
    pub num_subpops: usize,
    pub d: usize,
    pub prior: PriorSpec,
    pub rho: RhoSpec,
    pub delta: f64,
    pub alphabet_c: f64,
    pub classifier: ClassifierKind,
    pub train: TrainConfig,
    pub hidden: usize,
    /// Curve snapshot interval in updates; 0 disables snapshots.
    pub snapshot_every: usize,
    pub attack: AttackKind,
    pub trials: usize,
    pub targets: usize,
    pub num_test: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// 1-based line of byte offset `pos` in `text`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key =` assignment, for validation errors.
fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.split('=').next().is_some_and(|k| k.trim() == key))
        .map_or(0, |i| i + 1)
}

impl ExperimentConfig {
    /// Paper-scale hypercube experiment with logistic regression.
    pub fn paper_logit() -> Self {
        ExperimentConfig {
            task: TaskKind::Hc,
            n: 500,
            num_subpops: 500,
            d: 1000,
            prior: PriorSpec::Uniform,
            rho: RhoSpec::FromA(50000.0),
            delta: 0.0,
            alphabet_c: DEFAULT_ALPHABET_CONSTANT,
            classifier: ClassifierKind::Logit,
            train: TrainConfig::logit_default(),
            hidden: 0,
            snapshot_every: 5,
            attack: AttackKind::Coordinate { iterations: 2000 },
            trials: 20,
            targets: 20,
            num_test: 2000,
            seed: 1,
            out: PathBuf::from("results"),
        }
    }

    /// Paper-scale hypercube experiment with a 1500-unit MLP.
    pub fn paper_mlp() -> Self {
        ExperimentConfig {
            classifier: ClassifierKind::Mlp,
            train: TrainConfig::mlp_default(),
            hidden: 1500,
            snapshot_every: 100,
            attack: AttackKind::GradientSign { probes: 32 },
            ..Self::paper_logit()
        }
    }

    /// `n = N = 100`, `d = 300` version of [`paper_logit`](Self::paper_logit).
    pub fn desk_logit() -> Self {
        ExperimentConfig {
            n: 100,
            num_subpops: 100,
            d: 300,
            attack: AttackKind::Coordinate { iterations: 600 },
            trials: 5,
            ..Self::paper_logit()
        }
    }

    /// `n = N = 100`, `d = 300`, `H = 300`, 500 updates.
    pub fn desk_mlp() -> Self {
        let train = TrainConfig {
            updates: 500,
            init_scale: 0.1,
            ..TrainConfig::mlp_default()
        };
        ExperimentConfig {
            hidden: 300,
            snapshot_every: 25,
            train,
            ..Self::paper_mlp()
        }
        .with_scale(100, 300, 5)
    }

    fn with_scale(mut self, n: usize, d: usize, trials: usize) -> Self {
        self.n = n;
        self.num_subpops = n;
        self.d = d;
        self.trials = trials;
        self
    }

    /// Built-in configurations: `logit` or `mlp`, desk or paper scale.
    pub fn preset(name: &str, paper_scale: bool) -> Result<Self> {
        match (name, paper_scale) {
            ("logit", false) => Ok(Self::desk_logit()),
            ("logit", true) => Ok(Self::paper_logit()),
            ("mlp", false) => Ok(Self::desk_mlp()),
            ("mlp", true) => Ok(Self::paper_mlp()),
            _ => domain(format!("unknown preset {name:?} (expected logit or mlp)")),
        }
    }

    /// Parses a config; every error names the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let at = |key: &'static str| {
            let line = key_line(text, key);
            move |e: Error| Error::Parse {
                line,
                msg: format!("{key}: {e}"),
            }
        };
        let ex = raw.experiment;
        let task = TaskKind::parse(ex.task.as_deref().unwrap_or("hc")).map_err(at("task"))?;
        let classifier =
            ClassifierKind::parse(raw.train.classifier.as_deref().unwrap_or("logit")).map_err(at("classifier"))?;
        let mut base = if classifier == ClassifierKind::Mlp {
            Self::paper_mlp()
        } else {
            Self::paper_logit()
        };
        base.task = task;
        base.classifier = classifier;
        macro_rules! take {
            ($src:expr, $field:ident => $dst:expr) => {
                if let Some(v) = $src.$field {
                    $dst = v;
                }
            };
        }
        take!(ex, n => base.n);
        base.num_subpops = ex.num_subpops.unwrap_or(base.n);
        take!(ex, d => base.d);
        take!(ex, trials => base.trials);
        take!(ex, targets => base.targets);
        take!(ex, num_test => base.num_test);
        take!(ex, seed => base.seed);
        take!(ex, delta => base.delta);
        take!(ex, alphabet_c => base.alphabet_c);
        if let Some(o) = ex.out {
            base.out = PathBuf::from(o);
        }
        if let Some(p) = ex.prior {
            base.prior = PriorSpec::parse(&p).map_err(at("prior"))?;
        }
        base.rho = match (ex.rho, ex.a) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    line: key_line(text, "a"),
                    msg: "give either rho or a, not both".into(),
                })
            }
            (Some(r), None) => RhoSpec::Fixed(r),
            (None, Some(a)) => RhoSpec::FromA(a),
            (None, None) => base.rho,
        };
        let tr = raw.train;
        take!(tr, learning_rate => base.train.learning_rate);
        take!(tr, momentum => base.train.momentum);
        take!(tr, nesterov => base.train.nesterov);
        take!(tr, updates => base.train.updates);
        take!(tr, lr_decay => base.train.lr_decay);
        take!(tr, init_scale => base.train.init_scale);
        take!(tr, hidden => base.hidden);
        take!(tr, snapshot_every => base.snapshot_every);
        let at_kind = raw.attack.kind.as_deref().unwrap_or(base.attack.name());
        base.attack = AttackKind::default_for(at_kind, base.d).map_err(at("kind"))?;
        match &mut base.attack {
            AttackKind::Coordinate { iterations } => {
                if raw.attack.probes.is_some() {
                    return Err(Error::Parse {
                        line: key_line(text, "probes"),
                        msg: "probes applies to the gradient attack only".into(),
                    });
                }
                take!(raw.attack, iterations => *iterations);
            }
            AttackKind::GradientSign { probes } => {
                if raw.attack.iterations.is_some() {
                    return Err(Error::Parse {
                        line: key_line(text, "iterations"),
                        msg: "iterations applies to the coordinate attack only".into(),
                    });
                }
                take!(raw.attack, probes => *probes);
            }
        }
        base.validate_with(|key, e| at(key)(e))?;
        Ok(base)
    }

    /// Reads a config file; a prior file path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if let PriorSpec::File(p) = &cfg.prior {
            if p.is_relative() {
                let dir = path.parent().unwrap_or(Path::new(""));
                cfg.prior = PriorSpec::File(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_, e| e)
    }

    fn validate_with(&self, wrap: impl Fn(&'static str, Error) -> Error) -> Result<()> {
        let check = |key: &'static str, ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(wrap(key, Error::Domain(msg)))
            }
        };
        check("n", self.n >= 1, "n must be at least 1".into())?;
        check("d", self.d >= 1, "d must be at least 1".into())?;
        check("N", self.num_subpops >= 1, "N must be at least 1".into())?;
        check("num_test", self.num_test >= 1, "num_test must be at least 1".into())?;
        check(
            "delta",
            (0.0..1.0).contains(&self.delta),
            format!("delta = {} must be in [0, 1)", self.delta),
        )?;
        if let RhoSpec::Fixed(r) = self.rho {
            check("rho", (0.0..=1.0).contains(&r), format!("rho = {r} must be in [0, 1]"))?;
        }
        self.train.validate().map_err(|e| wrap("learning_rate", e))?;
        if self.classifier == ClassifierKind::Mlp {
            check("hidden", self.hidden >= 1, "hidden must be at least 1".into())?;
        }
        if let AttackKind::GradientSign { probes } = self.attack {
            check("probes", probes >= 1, "probes must be at least 1".into())?;
        }
        let bits = !matches!(self.task, TaskKind::La | TaskKind::Nsp);
        if self.classifier.is_trained() || self.classifier == ClassifierKind::Oracle {
            check(
                "classifier",
                bits,
                format!(
                    "{} needs bit-string features; task {} has none",
                    self.classifier.name(),
                    self.task.name()
                ),
            )?;
        }
        if matches!(self.classifier, ClassifierKind::Baseline | ClassifierKind::Bayes) {
            check(
                "classifier",
                self.task == TaskKind::Hc,
                format!("{} is defined for the hc task only", self.classifier.name()),
            )?;
        }
        Ok(())
    }

    /// Concrete rho for the hypercube task.
    pub fn resolve_rho(&self) -> Result<f64> {
        match self.rho {
            RhoSpec::Fixed(r) => Ok(r),
            RhoSpec::FromA(a) => {
                let prior = self.prior.build(self.num_subpops)?;
                let mut rng = RngStream::new(self.seed, u64::MAX);
                let mu1 = mixture_stats(&prior, self.n, self.num_subpops, MU1_TRIALS, &mut rng)?.mu1;
                rho_for(self.n, mu1, a, self.d)
            }
        }
    }

    /// Canonical text form; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        let rho = match self.rho {
            RhoSpec::Fixed(r) => format!("rho = {r:?}"),
            RhoSpec::FromA(a) => format!("a = {a:?}"),
        };
        let attack = match self.attack {
            AttackKind::Coordinate { iterations } => {
                format!("kind = \"coordinate\"\niterations = {iterations}")
            }
            AttackKind::GradientSign { probes } => {
                format!("kind = \"gradient\"\nprobes = {probes}")
            }
        };
        let t = &self.train;
        format!(
            "[experiment]\ntask = \"{}\"\nn = {}\nN = {}\nd = {}\nprior = \"{}\"\n{rho}\ndelta = {:?}\nalphabet_c = {:?}\n\
             trials = {}\ntargets = {}\nnum_test = {}\nseed = {}\nout = \"{}\"\n\n\
             [train]\nclassifier = \"{}\"\nlearning_rate = {:?}\nmomentum = {:?}\nnesterov = {}\nupdates = {}\n\
             lr_decay = {:?}\ninit_scale = {:?}\nhidden = {}\nsnapshot_every = {}\n\n[attack]\n{attack}\n",
            self.task.name(),
            self.n,
            self.num_subpops,
            self.d,
            self.prior.name(),
            self.delta,
            self.alphabet_c,
            self.trials,
            self.targets,
            self.num_test,
            self.seed,
            self.out.display(),
            self.classifier.name(),
            t.learning_rate,
            t.momentum,
            t.nesterov,
            t.updates,
            t.lr_decay,
            t.init_scale,
            self.hidden,
            self.snapshot_every,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for c in [
            ExperimentConfig::paper_logit(),
            ExperimentConfig::paper_mlp(),
            ExperimentConfig::desk_logit(),
            ExperimentConfig::desk_mlp(),
        ] {
            assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        }
    }

    #[test]
    fn paper_rho_is_about_017() {
        let rho = ExperimentConfig::paper_logit().resolve_rho().unwrap();
        assert!((rho - 0.17).abs() < 0.005, "{rho}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_key = "[experiment]\nn = 10\n\nbogus = 3\n";
        match ExperimentConfig::parse(bad_key) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad_type = "[experiment]\nn = \"ten\"\n";
        match ExperimentConfig::parse(bad_type) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad_value = "[experiment]\nd = 5\n[train]\nclassifier = \"logit\"\nmomentum = 1.5\n";
        assert!(matches!(ExperimentConfig::parse(bad_value), Err(Error::Parse { .. })));
        let bad_task = "[experiment]\n\n\ntask = \"cube\"\n";
        match ExperimentConfig::parse(bad_task) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classifier_defaults_follow_kind() {
        let c = ExperimentConfig::parse("[train]\nclassifier = \"mlp\"\n").unwrap();
        assert_eq!(c.train, TrainConfig::mlp_default());
        assert_eq!(c.hidden, 1500);
        assert_eq!(c.attack, AttackKind::GradientSign { probes: 32 });
        let c = ExperimentConfig::parse("[experiment]\nd = 40\n[attack]\nkind = \"coordinate\"\n").unwrap();
        assert_eq!(c.attack, AttackKind::Coordinate { iterations: 80 });
    }

    #[test]
    fn incompatible_classifier_rejected() {
        assert!(ExperimentConfig::parse("[experiment]\ntask = \"la\"\n[train]\nclassifier = \"logit\"\n").is_err());
        assert!(ExperimentConfig::parse("[experiment]\ntask = \"nsp\"\n[train]\nclassifier = \"nn\"\n").is_ok());
    }
}
