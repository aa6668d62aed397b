//! The experiment pipeline: generate, train, attack and curve.
//!
//! Trial `i` draws everything from `RngStream::new(seed, i)`, so trials can
//! run in any order on any number of threads and still write the same bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;

use super::config::{ClassifierKind, ExperimentConfig};
use crate::attacks::{run_attack, select_targets, AttackReport, MonotoneOracle, ATTACK_CSV_HEADER};
use crate::error::{domain, Error, Result};
use crate::mixture::{sample_weights, MixtureWeights};
use crate::predictors::{
    evaluate_errors, BaselineHc, ErrorReport, HcInstanceBayes, LaNearest, NnHc, NspLongest, ProbClassifier, Rate,
    ReportMeta, CSV_HEADER,
};
use crate::rng::RngStream;
use crate::tasks::{
    generate_dataset, read_dataset, read_instance, sample_hc_instance, sample_la_instance, sample_nsp_instance,
    sample_threshold_instance, sample_two_length_instance, write_dataset, write_instance, Dataset, DatasetHeader,
    TaskInstance, TaskKind,
};
use crate::train::{
    dataset_arrays, load_checkpoint, save_checkpoint, train_model, AnyModel, LogitModel, MlpModel, Model,
};

// substream tags under each trial's stream
const S_WEIGHTS: u64 = 0;
const S_INSTANCE: u64 = 1;
const S_DATASET: u64 = 2;
const S_EVAL: u64 = 3;
const S_TARGETS: u64 = 4;
const S_ATTACK: u64 = 5;
const S_INIT: u64 = 6;

pub const ERRORS_FILE: &str = "errors.csv";
pub const ATTACK_FILE: &str = "attack.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const CURVE_CSV_HEADER: &str = "trial,step,train,test,represented,singletons,recovery";

pub fn instance_path(out: &Path, trial: usize) -> PathBuf {
    out.join(format!("trial_{trial:03}.instance"))
}

pub fn dataset_path(out: &Path, trial: usize) -> PathBuf {
    out.join(format!("trial_{trial:03}.data"))
}

pub fn checkpoint_path(out: &Path, trial: usize) -> PathBuf {
    out.join(format!("trial_{trial:03}.ckpt"))
}

fn trial_stream(cfg: &ExperimentConfig, trial: usize) -> RngStream {
    RngStream::new(cfg.seed, trial as u64)
}

/// Everything one trial draws before any learning happens.
pub struct TrialData {
    pub trial: usize,
    pub instance: TaskInstance,
    pub weights: MixtureWeights,
    pub dataset: Dataset,
    /// rho, delta or t, as recorded in the data set header.
    pub param: f64,
}

/// Draws trial `trial`'s mixture weights, instance and training set.
pub fn build_trial(cfg: &ExperimentConfig, trial: usize, rho: f64) -> Result<TrialData> {
    let root = trial_stream(cfg, trial);
    let (instance, param) = match cfg.task {
        TaskKind::Hc => (
            TaskInstance::Hc(sample_hc_instance(
                cfg.num_subpops,
                cfg.d,
                rho,
                &mut root.substream(S_INSTANCE),
            )?),
            rho,
        ),
        TaskKind::Nsp => (
            TaskInstance::Nsp(sample_nsp_instance(
                cfg.num_subpops,
                cfg.d,
                cfg.delta,
                &mut root.substream(S_INSTANCE),
            )?),
            cfg.delta,
        ),
        TaskKind::La => {
            let inst = sample_la_instance(cfg.num_subpops, cfg.d, cfg.alphabet_c, &mut root.substream(S_INSTANCE))?;
            let t = inst.t() as f64;
            (TaskInstance::La(inst), t)
        }
        TaskKind::Threshold => (
            TaskInstance::Threshold(sample_threshold_instance(cfg.d, &mut root.substream(S_INSTANCE))?),
            0.0,
        ),
        TaskKind::TwoLength => (
            TaskInstance::TwoLength(sample_two_length_instance(cfg.d, &mut root.substream(S_INSTANCE))?),
            0.0,
        ),
    };
    let weights = if instance.num_subpops() == 1 {
        MixtureWeights::uniform(1)?
    } else {
        let prior = cfg.prior.build(cfg.num_subpops)?;
        sample_weights(&prior, cfg.num_subpops, &mut root.substream(S_WEIGHTS))?
    };
    let dataset = generate_dataset(&instance, &weights, cfg.n, &mut root.substream(S_DATASET))?;
    Ok(TrialData {
        trial,
        instance,
        weights,
        dataset,
        param,
    })
}

fn header_for(cfg: &ExperimentConfig, t: &TrialData) -> DatasetHeader {
    DatasetHeader {
        task: cfg.task,
        n: cfg.n,
        num_subpops: t.instance.num_subpops(),
        d: cfg.d,
        param: t.param,
        seed: cfg.seed,
        trial: t.trial,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn load_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialData> {
    let read = |p: PathBuf| {
        std::fs::read_to_string(&p).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e} (run `generate` first)", p.display()),
            ))
        })
    };
    let (instance, weights) = read_instance(&read(instance_path(&cfg.out, trial))?)?;
    let (header, dataset) = read_dataset(&read(dataset_path(&cfg.out, trial))?)?;
    if header.task != cfg.task || header.d != cfg.d || header.n != cfg.n || header.seed != cfg.seed {
        return domain(format!(
            "trial {trial}: data set on disk was generated with a different config"
        ));
    }
    Ok(TrialData {
        trial,
        instance,
        weights,
        dataset,
        param: header.param,
    })
}

/// Outcome of one trial. `note` explains a skipped or failed stage.
#[derive(Clone, Debug, Default)]
pub struct TrialOutcome {
    pub trial: usize,
    pub errors: Option<ErrorReport>,
    pub attack: Option<AttackReport>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub trials: Vec<TrialOutcome>,
    /// Wall-clock seconds per stage, summed over trials.
    pub stage_seconds: Vec<(String, f64)>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

impl RunReport {
    /// Mean over trials of one error stratum; trials without it are skipped.
    pub fn mean_error(&self, pick: impl Fn(&ErrorReport) -> Rate) -> Option<f64> {
        mean(
            self.trials
                .iter()
                .filter_map(|t| t.errors.as_ref().and_then(|e| pick(e).value())),
        )
    }

    /// Mean over trials of the recovery error in percent.
    pub fn mean_recovery(&self) -> Option<f64> {
        mean(
            self.trials
                .iter()
                .filter_map(|t| t.attack.as_ref().and_then(|a| a.recovery_error)),
        )
    }

    fn add_stage(&mut self, name: &str, secs: f64) {
        match self.stage_seconds.iter_mut().find(|(n, _)| n == name) {
            Some((_, s)) => *s += secs,
            None => self.stage_seconds.push((name.to_string(), secs)),
        }
    }

    fn log_stages(&self) {
        for (name, secs) in &self.stage_seconds {
            info!("stage {name}: {secs:.2} s");
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed().as_secs_f64())
}

/// Writes the instance and data set files of every trial.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let rho = if cfg.task == TaskKind::Hc {
        cfg.resolve_rho()?
    } else {
        0.0
    };
    let results: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let (t, secs) = timed(|| build_trial(cfg, i, rho));
            let t = t?;
            write_file(&instance_path(&cfg.out, i), write_instance(&t.instance, &t.weights))?;
            write_file(
                &dataset_path(&cfg.out, i),
                write_dataset(&header_for(cfg, &t), &t.dataset),
            )?;
            Ok(secs)
        })
        .collect();
    let mut report = RunReport::default();
    for (i, r) in results.into_iter().enumerate() {
        report.add_stage("generate", r?);
        report.trials.push(TrialOutcome {
            trial: i,
            ..Default::default()
        });
    }
    report.log_stages();
    Ok(report)
}

/// Runs `f` with the classifier the config names, built over trial `t`.
fn with_classifier<R>(
    cfg: &ExperimentConfig,
    t: &TrialData,
    model: Option<&AnyModel>,
    f: impl FnOnce(&dyn ProbClassifier) -> Result<R>,
) -> Result<R> {
    let ds = &t.dataset;
    let num_classes = t.instance.num_classes();
    match (cfg.classifier, &t.instance) {
        (ClassifierKind::Logit | ClassifierKind::Mlp, _) => match model {
            Some(m) => f(m),
            None => domain("trained classifier requested without a model"),
        },
        (ClassifierKind::Nn, TaskInstance::Nsp(_)) => f(&NspLongest { dataset: ds }),
        (ClassifierKind::Nn, TaskInstance::La(_)) => f(&LaNearest {
            dataset: ds,
            num_classes,
        }),
        (ClassifierKind::Nn, _) => f(&NnHc {
            dataset: ds,
            num_classes,
        }),
        (ClassifierKind::Baseline, TaskInstance::Hc(h)) => f(&BaselineHc {
            dataset: ds,
            num_classes,
            rho: h.rho(),
        }),
        (ClassifierKind::Bayes, TaskInstance::Hc(h)) => f(&HcInstanceBayes {
            instance: h,
            weights: &t.weights,
        }),
        (kind, inst) => domain(format!(
            "classifier {} is not available for task {}",
            kind.name(),
            inst.kind().name()
        )),
    }
}

fn init_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    trial_stream(cfg, trial).substream(S_INIT).random()
}

fn initial_model(cfg: &ExperimentConfig, t: &TrialData) -> Result<AnyModel> {
    let mut rng = RngStream::new(init_seed(cfg, t.trial), 0);
    let n_cls = t.instance.num_classes();
    Ok(match cfg.classifier {
        ClassifierKind::Logit => AnyModel::Logit(LogitModel::init(n_cls, cfg.d, cfg.train.init_scale, &mut rng)),
        ClassifierKind::Mlp => AnyModel::Mlp(MlpModel::init(n_cls, cfg.d, cfg.hidden, cfg.train.init_scale, &mut rng)),
        other => return domain(format!("{} is not trained", other.name())),
    })
}

/// Trains from the config's initialization, calling `snap` at snapshots.
fn fit(
    cfg: &ExperimentConfig,
    t: &TrialData,
    snapshot_every: Option<usize>,
    snap: &mut dyn FnMut(usize, &AnyModel) -> Result<()>,
) -> Result<AnyModel> {
    let (x, y) = dataset_arrays(&t.dataset, cfg.d, t.instance.num_classes())?;
    fn go<M: Model>(
        m: M,
        x: ndarray::ArrayView2<'_, f64>,
        y: &[usize],
        cfg: &ExperimentConfig,
        every: Option<usize>,
        snap: &mut dyn FnMut(usize, &AnyModel) -> Result<()>,
        wrap: fn(M) -> AnyModel,
    ) -> Result<AnyModel> {
        let (m, _) = train_model(m, x, y, &cfg.train, every, &mut |s, m: &M| snap(s, &wrap(m.clone())))?;
        Ok(wrap(m))
    }
    match initial_model(cfg, t)? {
        AnyModel::Logit(m) => go(m, x.view(), &y, cfg, snapshot_every, snap, AnyModel::Logit),
        AnyModel::Mlp(m) => go(m, x.view(), &y, cfg, snapshot_every, snap, AnyModel::Mlp),
    }
}

fn meta<'a>(cfg: &'a ExperimentConfig, param: f64, trial: Option<usize>) -> ReportMeta<'a> {
    ReportMeta {
        task: cfg.task.name(),
        n: cfg.n,
        num_subpops: cfg.num_subpops,
        d: cfg.d,
        param,
        classifier: cfg.classifier.name(),
        seed: cfg.seed,
        trial,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |v| format!("{v:.6}"))
}

/// Trains (or builds) the configured classifier for every trial, saves
/// checkpoints of trained models and writes `errors.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    if cfg.classifier == ClassifierKind::Oracle {
        return domain("the oracle classifier exists for attacks only");
    }
    type Out = (TrialOutcome, f64, f64, f64);
    let results: Vec<Result<Out>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let t = load_trial(cfg, i)?;
            let mut outcome = TrialOutcome {
                trial: i,
                ..Default::default()
            };
            let mut train_secs = 0.0;
            let model = if cfg.classifier.is_trained() {
                let (m, secs) = timed(|| fit(cfg, &t, None, &mut |_, _| Ok(())));
                train_secs = secs;
                match m {
                    Ok(m) => {
                        match &m {
                            AnyModel::Logit(l) => save_checkpoint(l, &checkpoint_path(&cfg.out, i))?,
                            AnyModel::Mlp(l) => save_checkpoint(l, &checkpoint_path(&cfg.out, i))?,
                        }
                        Some(m)
                    }
                    Err(e @ Error::Divergence { .. }) => {
                        warn!("trial {i}: {e}");
                        outcome.note = Some(e.to_string());
                        return Ok((outcome, train_secs, 0.0, t.param));
                    }
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let (rep, eval_secs) = timed(|| {
                with_classifier(cfg, &t, model.as_ref(), |c| {
                    evaluate_errors(
                        c,
                        &t.instance,
                        &t.weights,
                        &t.dataset,
                        cfg.num_test,
                        &mut trial_stream(cfg, i).substream(S_EVAL),
                    )
                })
            });
            outcome.errors = Some(rep?);
            Ok((outcome, train_secs, eval_secs, t.param))
        })
        .collect();
    let mut report = RunReport::default();
    let mut csv = format!("{CSV_HEADER}\n");
    let mut param = 0.0;
    for r in results {
        let (outcome, ts, es, p) = r?;
        param = p;
        report.add_stage("train", ts);
        report.add_stage("evaluate", es);
        match &outcome.errors {
            Some(e) => csv.push_str(&e.to_csv_row(&meta(cfg, p, Some(outcome.trial)))),
            None => csv.push_str(&ErrorReport::default().to_csv_row(&meta(cfg, p, Some(outcome.trial)))),
        }
        csv.push('\n');
        report.trials.push(outcome);
    }
    if !report.trials.is_empty() {
        let m = meta(cfg, param, None);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},mean",
            m.task,
            m.n,
            m.num_subpops,
            m.d,
            m.param,
            m.classifier,
            fmt_opt(report.mean_error(|e| e.train)),
            fmt_opt(report.mean_error(|e| e.test)),
            fmt_opt(report.mean_error(|e| e.represented)),
            fmt_opt(report.mean_error(|e| e.singletons)),
            m.seed,
        );
    }
    write_file(&cfg.out.join(ERRORS_FILE), csv)?;
    report.log_stages();
    Ok(report)
}

/// Attacks one trial's classifier on its chosen targets.
fn attack_trial(cfg: &ExperimentConfig, t: &TrialData, model: Option<&AnyModel>) -> Result<Option<AttackReport>> {
    let root = trial_stream(cfg, t.trial);
    let ids = select_targets(&t.dataset, cfg.targets, &mut root.substream(S_TARGETS));
    if ids.is_empty() {
        return Ok(None);
    }
    let rng = root.substream(S_ATTACK);
    if cfg.classifier == ClassifierKind::Oracle {
        let mut targets = Vec::with_capacity(ids.len());
        for (m, &id) in ids.iter().enumerate() {
            let ex = &t.dataset.examples[id];
            let oracle = MonotoneOracle {
                planted: ex.features.as_bits()?.clone(),
                target: ex.label,
                num_classes: t.instance.num_classes(),
            };
            targets.extend(run_attack(&oracle, &t.dataset, &[id], cfg.attack, &rng.substream(m as u64))?.targets);
        }
        let recovery = 100.0 * targets.iter().map(|r| r.fraction()).sum::<f64>() / targets.len() as f64;
        return Ok(Some(AttackReport {
            attack: cfg.attack,
            targets,
            recovery_error: Some(recovery),
        }));
    }
    with_classifier(cfg, t, model, |c| run_attack(c, &t.dataset, &ids, cfg.attack, &rng)).map(Some)
}

fn attack_rows(cfg: &ExperimentConfig, report: &RunReport) -> String {
    let mut csv = format!("{ATTACK_CSV_HEADER}\n");
    for t in &report.trials {
        if let Some(a) = &t.attack {
            csv.push_str(&a.csv_rows(t.trial, cfg.classifier.name()));
        }
    }
    let attacked: Vec<&AttackReport> = report.trials.iter().filter_map(|t| t.attack.as_ref()).collect();
    if !attacked.is_empty() {
        let bits = mean(
            attacked
                .iter()
                .map(|a| a.targets.iter().map(|r| r.bit_errors as f64).sum::<f64>() / a.targets.len() as f64),
        );
        let _ = writeln!(
            csv,
            "mean,{},{},NA,{},{},{}",
            cfg.classifier.name(),
            cfg.attack.name(),
            cfg.d,
            fmt_opt(bits),
            fmt_opt(report.mean_recovery().map(|r| r / 100.0)),
        );
    }
    csv
}

/// Attacks min(`targets`, K) random singletons per trial and writes
/// `attack.csv`. Trained classifiers are read from their checkpoints.
pub fn cmd_attack(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let results: Vec<Result<(TrialOutcome, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let t = load_trial(cfg, i)?;
            let model = if cfg.classifier.is_trained() {
                let path = checkpoint_path(&cfg.out, i);
                if !path.exists() {
                    let note = format!("no checkpoint at {}; trial skipped", path.display());
                    warn!("trial {i}: {note}");
                    return Ok((
                        TrialOutcome {
                            trial: i,
                            note: Some(note),
                            ..Default::default()
                        },
                        0.0,
                    ));
                }
                Some(load_checkpoint(&path)?)
            } else {
                None
            };
            let (a, secs) = timed(|| attack_trial(cfg, &t, model.as_ref()));
            let a = a?;
            let note = a.is_none().then(|| {
                warn!("trial {i}: no singletons to attack; trial skipped");
                "no singletons".to_string()
            });
            Ok((
                TrialOutcome {
                    trial: i,
                    attack: a,
                    note,
                    ..Default::default()
                },
                secs,
            ))
        })
        .collect();
    let mut report = RunReport::default();
    for r in results {
        let (o, secs) = r?;
        report.add_stage("attack", secs);
        report.trials.push(o);
    }
    write_file(&cfg.out.join(ATTACK_FILE), attack_rows(cfg, &report))?;
    report.log_stages();
    Ok(report)
}

/// One snapshot of an over-training curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub trial: usize,
    pub step: usize,
    pub errors: ErrorReport,
    pub recovery: Option<f64>,
}

/// Retrains every trial, evaluating and attacking the model every
/// `snapshot_every` updates, and writes `curve.csv`. Each snapshot of a
/// trial reuses the same test draws, targets and attack randomness.
pub fn cmd_curve(cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    if !cfg.classifier.is_trained() {
        return domain("curves need a trained classifier (logit or mlp)");
    }
    let mut csv = format!("{CURVE_CSV_HEADER}\n");
    if cfg.snapshot_every == 0 {
        write_file(&cfg.out.join(CURVE_FILE), csv)?;
        return Ok(Vec::new());
    }
    let results: Vec<Result<Vec<CurvePoint>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let t = load_trial(cfg, i)?;
            let mut points = Vec::new();
            let r = fit(cfg, &t, Some(cfg.snapshot_every), &mut |step, m| {
                let errors = evaluate_errors(
                    m,
                    &t.instance,
                    &t.weights,
                    &t.dataset,
                    cfg.num_test,
                    &mut trial_stream(cfg, i).substream(S_EVAL),
                )?;
                let recovery = attack_trial(cfg, &t, Some(m))?.and_then(|a| a.recovery_error);
                info!("trial {i} step {step}: recovery {recovery:?}");
                points.push(CurvePoint {
                    trial: i,
                    step,
                    errors,
                    recovery,
                });
                Ok(())
            });
            match r {
                Ok(_) => {}
                Err(e @ Error::Divergence { .. }) => warn!("trial {i}: {e}; curve truncated"),
                Err(e) => return Err(e),
            }
            Ok(points)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    let pct = |r: Rate| fmt_opt(r.value());
    for p in &all {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.trial,
            p.step,
            pct(p.errors.train),
            pct(p.errors.test),
            pct(p.errors.represented),
            pct(p.errors.singletons),
            fmt_opt(p.recovery.map(|r| r / 100.0)),
        );
    }
    let mut steps: Vec<usize> = all.iter().map(|p| p.step).collect();
    steps.sort_unstable();
    steps.dedup();
    for s in steps {
        let at: Vec<&CurvePoint> = all.iter().filter(|p| p.step == s).collect();
        let m = |f: &dyn Fn(&CurvePoint) -> Option<f64>| fmt_opt(mean(at.iter().filter_map(|p| f(p))));
        let _ = writeln!(
            csv,
            "mean,{s},{},{},{},{},{}",
            m(&|p| p.errors.train.value()),
            m(&|p| p.errors.test.value()),
            m(&|p| p.errors.represented.value()),
            m(&|p| p.errors.singletons.value()),
            m(&|p| p.recovery.map(|r| r / 100.0)),
        );
    }
    write_file(&cfg.out.join(CURVE_FILE), csv)?;
    Ok(all)
}
