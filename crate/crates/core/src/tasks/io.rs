//! Plain-text serialization of instances and data sets.
//!
//! Subpopulation ids and LA symbols are 1-based on disk. Data set rows are
//! `subpop<TAB>label<TAB>features`; class labels of the multiclass tasks are
//! subpopulation ids and so are 1-based too, binary labels are written as 0/1.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    Dataset, Features, HcInstance, LaInstance, LabeledExample, NspInstance, TaskInstance, TaskKind, ThresholdInstance,
    TwoLengthInstance,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::mixture::MixtureWeights;

/// Metadata recorded in the first line of a data set file.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub task: TaskKind,
    pub n: usize,
    pub num_subpops: usize,
    pub d: usize,
    /// rho (hc), delta (nsp), t (la); unused otherwise.
    pub param: f64,
    pub seed: u64,
    pub trial: usize,
}

fn param_key(task: TaskKind) -> Option<&'static str> {
    match task {
        TaskKind::Hc => Some("rho"),
        TaskKind::Nsp => Some("delta"),
        TaskKind::La => Some("t"),
        TaskKind::Threshold | TaskKind::TwoLength => None,
    }
}

fn multiclass(task: TaskKind) -> bool {
    matches!(task, TaskKind::Hc | TaskKind::La)
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

fn parse_kv(line: usize, text: &str, prefix: &str) -> Result<HashMap<String, String>> {
    let Some(rest) = text.trim().strip_prefix(prefix) else {
        return perr(line, format!("expected header starting with {prefix:?}"));
    };
    let mut map = HashMap::new();
    for tok in rest.split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else {
            return perr(line, format!("malformed header field {tok:?}"));
        };
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

fn field<T: std::str::FromStr>(line: usize, map: &HashMap<String, String>, key: &str) -> Result<T> {
    let Some(v) = map.get(key) else {
        return perr(line, format!("missing header field {key}"));
    };
    v.parse().or_else(|_| perr(line, format!("bad value {v:?} for {key}")))
}

fn parse_usize(line: usize, s: &str, what: &str) -> Result<usize> {
    s.trim().parse().or_else(|_| perr(line, format!("bad {what} {s:?}")))
}

fn parse_id(line: usize, s: &str, what: &str) -> Result<usize> {
    match parse_usize(line, s, what)? {
        0 => perr(line, format!("{what} ids are 1-based, found 0")),
        v => Ok(v - 1),
    }
}

fn parse_bits(line: usize, s: &str) -> Result<BitString> {
    s.parse().or_else(|e: Error| perr(line, e.to_string()))
}

fn features_field(f: &Features) -> String {
    match f {
        Features::Bits(b) => b.to_string(),
        Features::Prefix { prefix, .. } => prefix.to_string(),
        Features::Symbols(s) => s.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(" "),
    }
}

pub fn write_dataset(header: &DatasetHeader, ds: &Dataset) -> String {
    let mut out = format!(
        "# task={} n={} N={} d={}",
        header.task.name(),
        header.n,
        header.num_subpops,
        header.d
    );
    if let Some(k) = param_key(header.task) {
        let _ = write!(out, " {k}={}", header.param);
    }
    let _ = writeln!(out, " seed={} trial={}", header.seed, header.trial);
    for e in &ds.examples {
        let label = if multiclass(header.task) { e.label + 1 } else { e.label };
        let _ = writeln!(out, "{}\t{}\t{}", e.subpop + 1, label, features_field(&e.features));
    }
    out
}

pub fn read_dataset(text: &str) -> Result<(DatasetHeader, Dataset)> {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return perr(1, "empty file");
    };
    let map = parse_kv(1, first, "#")?;
    let task = TaskKind::parse(&field::<String>(1, &map, "task")?).or_else(|e| perr(1, e.to_string()))?;
    let header = DatasetHeader {
        task,
        n: field(1, &map, "n")?,
        num_subpops: field(1, &map, "N")?,
        d: field(1, &map, "d")?,
        param: match param_key(task) {
            Some(k) => field(1, &map, k)?,
            None => 0.0,
        },
        seed: field(1, &map, "seed")?,
        trial: field(1, &map, "trial")?,
    };
    let mut examples = Vec::new();
    for (idx, raw) in lines {
        let ln = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 3 {
            return perr(ln, format!("expected 3 tab-separated columns, found {}", cols.len()));
        }
        let subpop = parse_id(ln, cols[0], "subpopulation")?;
        if subpop >= header.num_subpops {
            return perr(
                ln,
                format!("subpopulation {} exceeds N = {}", subpop + 1, header.num_subpops),
            );
        }
        let label = if multiclass(task) {
            parse_id(ln, cols[1], "label")?
        } else {
            match cols[1].trim() {
                "0" => 0,
                "1" => 1,
                other => return perr(ln, format!("binary label must be 0 or 1, found {other:?}")),
            }
        };
        let features = match task {
            TaskKind::Hc | TaskKind::Threshold => Features::Bits(parse_bits(ln, cols[2])?),
            TaskKind::Nsp | TaskKind::TwoLength => Features::Prefix {
                subpop,
                prefix: parse_bits(ln, cols[2])?,
            },
            TaskKind::La => Features::Symbols(
                cols[2]
                    .split_whitespace()
                    .map(|s| parse_id(ln, s, "symbol").map(|v| v as u32))
                    .collect::<Result<_>>()?,
            ),
        };
        if let Features::Bits(b) = &features {
            if b.len() != header.d {
                return perr(ln, format!("feature length {} differs from d = {}", b.len(), header.d));
            }
        }
        examples.push(LabeledExample {
            features,
            label,
            subpop,
        });
    }
    if examples.len() != header.n {
        return perr(
            1,
            format!("header says n = {} but file has {} rows", header.n, examples.len()),
        );
    }
    let ds = Dataset::new(examples, header.num_subpops)?;
    Ok((header, ds))
}

fn hc_pattern(inst: &HcInstance, j: usize) -> String {
    let (m, v) = (inst.fixed_mask(j), inst.fixed_values(j));
    (0..inst.d())
        .map(|i| match (m.get(i), v.get(i)) {
            (false, _) => '*',
            (true, false) => '0',
            (true, true) => '1',
        })
        .collect()
}

/// Instance parameters plus the mixture weights, one record per line.
pub fn write_instance(inst: &TaskInstance, weights: &MixtureWeights) -> String {
    let mut out = format!(
        "# instance task={} N={} d={}",
        inst.kind().name(),
        inst.num_subpops(),
        inst.d()
    );
    match inst {
        TaskInstance::Hc(i) => {
            let _ = writeln!(out, " rho={}", i.rho());
            for j in 0..i.num_subpops() {
                let _ = writeln!(out, "hc\t{}\t{}", j + 1, hc_pattern(i, j));
            }
        }
        TaskInstance::Nsp(i) => {
            let _ = writeln!(out, " delta={}", i.delta());
            for j in 0..i.num_subpops() {
                let _ = writeln!(out, "ref\t{}\t{}", j + 1, i.reference(j));
            }
        }
        TaskInstance::La(i) => {
            let _ = writeln!(out, " t={}", i.t());
            for j in 0..i.num_subpops() {
                let _ = writeln!(out, "key\t{}\t{}\t{}", j + 1, i.key_index(j) + 1, i.key_symbol(j) + 1);
            }
        }
        TaskInstance::Threshold(i) => {
            let _ = writeln!(out, "\nthreshold\t{}", i.threshold());
        }
        TaskInstance::TwoLength(i) => {
            let (j, k) = i.lengths();
            let _ = writeln!(out, "\nstring\t{}\t{}\t{}", i.string(), j, k);
        }
    }
    for (j, w) in weights.weights().iter().enumerate() {
        let _ = writeln!(out, "w\t{}\t{}", j + 1, w);
    }
    out
}

pub fn read_instance(text: &str) -> Result<(TaskInstance, MixtureWeights)> {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return perr(1, "empty file");
    };
    let map = parse_kv(1, first, "# instance")?;
    let task = TaskKind::parse(&field::<String>(1, &map, "task")?).or_else(|e| perr(1, e.to_string()))?;
    let big_n: usize = field(1, &map, "N")?;
    let d: usize = field(1, &map, "d")?;
    let mut weights = vec![f64::NAN; big_n];
    let mut masks = vec![None; big_n];
    let mut values = vec![None; big_n];
    let mut refs = vec![None; big_n];
    let mut keys = vec![None; big_n];
    let mut single: Option<TaskInstance> = None;
    for (idx, raw) in lines {
        let ln = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let want = match cols[0] {
            "hc" | "ref" | "w" => 3,
            "key" | "string" => 4,
            "threshold" => 2,
            other => return perr(ln, format!("unknown record {other:?}")),
        };
        if cols.len() != want {
            return perr(ln, format!("record {:?} needs {want} columns", cols[0]));
        }
        let id = || -> Result<usize> {
            let j = parse_id(ln, cols[1], "subpopulation")?;
            if j >= big_n {
                return perr(ln, format!("subpopulation {} exceeds N = {big_n}", j + 1));
            }
            Ok(j)
        };
        match cols[0] {
            "w" => {
                weights[id()?] = cols[2]
                    .parse()
                    .or_else(|_| perr(ln, format!("bad weight {:?}", cols[2])))?;
            }
            "hc" => {
                let j = id()?;
                let pat = cols[2];
                if pat.chars().count() != d {
                    return perr(ln, format!("pattern length differs from d = {d}"));
                }
                let mut m = BitString::zeros(d);
                let mut v = BitString::zeros(d);
                for (i, ch) in pat.chars().enumerate() {
                    match ch {
                        '*' => {}
                        '0' => m.set(i, true),
                        '1' => {
                            m.set(i, true);
                            v.set(i, true);
                        }
                        other => return perr(ln, format!("bad pattern character {other:?}")),
                    }
                }
                masks[j] = Some(m);
                values[j] = Some(v);
            }
            "ref" => {
                let j = id()?;
                refs[j] = Some(parse_bits(ln, cols[2])?);
            }
            "key" => {
                let j = id()?;
                let i = parse_id(ln, cols[2], "key index")?;
                let s = parse_id(ln, cols[3], "key symbol")? as u32;
                keys[j] = Some((i, s));
            }
            "threshold" => {
                single = Some(TaskInstance::Threshold(
                    ThresholdInstance::new(parse_bits(ln, cols[1])?).or_else(|e| perr(ln, e.to_string()))?,
                ));
            }
            "string" => {
                let x = parse_bits(ln, cols[1])?;
                let j = parse_usize(ln, cols[2], "length")?;
                let k = parse_usize(ln, cols[3], "length")?;
                single = Some(TaskInstance::TwoLength(
                    TwoLengthInstance::new(x, j, k).or_else(|e| perr(ln, e.to_string()))?,
                ));
            }
            _ => unreachable!(),
        }
    }
    fn all<T>(v: Vec<Option<T>>, what: &str) -> Result<Vec<T>> {
        v.into_iter()
            .enumerate()
            .map(|(j, x)| {
                x.ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("missing {what} for subpopulation {}", j + 1),
                })
            })
            .collect()
    }
    let inst = match task {
        TaskKind::Hc => TaskInstance::Hc(HcInstance::from_parts(
            d,
            field(1, &map, "rho")?,
            all(masks, "pattern")?,
            all(values, "pattern")?,
        )?),
        TaskKind::Nsp => TaskInstance::Nsp(NspInstance::from_parts(
            d,
            field(1, &map, "delta")?,
            all(refs, "reference")?,
        )?),
        TaskKind::La => {
            let keys = all(keys, "key")?;
            TaskInstance::La(LaInstance::from_parts(
                d,
                field(1, &map, "t")?,
                keys.iter().map(|k| k.0).collect(),
                keys.iter().map(|k| k.1).collect(),
            )?)
        }
        TaskKind::Threshold | TaskKind::TwoLength => single.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing instance record".into(),
        })?,
    };
    if inst.kind() != task {
        return perr(1, "instance record does not match task");
    }
    if let Some(j) = weights.iter().position(|w| w.is_nan()) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("missing weight for subpopulation {}", j + 1),
        });
    }
    Ok((inst, MixtureWeights::from_unnormalized(&weights)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{sample_weights, Prior};
    use crate::rng::RngStream;
    use crate::tasks::*;

    fn round_trip(inst: TaskInstance, n: usize, param: f64) {
        let mut rng = RngStream::new(11, 0);
        let big_n = inst.num_subpops();
        let prior = Prior::new(vec![(1.0, 2), (3.0, 1)], crate::mixture::PriorKind::Custom).unwrap();
        let w = sample_weights(&prior, big_n, &mut rng).unwrap();
        let ds = generate_dataset(&inst, &w, n, &mut rng).unwrap();
        let header = DatasetHeader {
            task: inst.kind(),
            n,
            num_subpops: big_n,
            d: inst.d(),
            param,
            seed: 11,
            trial: 2,
        };
        let text = write_dataset(&header, &ds);
        let (h2, ds2) = read_dataset(&text).unwrap();
        assert_eq!(h2, header);
        assert_eq!(ds2, ds);
        let (inst2, w2) = read_instance(&write_instance(&inst, &w)).unwrap();
        assert_eq!(inst2, inst);
        for (a, b) in w.weights().iter().zip(w2.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trips_every_task() {
        let mut rng = RngStream::new(12, 0);
        round_trip(
            TaskInstance::Hc(sample_hc_instance(6, 20, 0.3, &mut rng).unwrap()),
            15,
            0.3,
        );
        round_trip(
            TaskInstance::Nsp(sample_nsp_instance(6, 20, 0.2, &mut rng).unwrap()),
            15,
            0.2,
        );
        let la = sample_la_instance(6, 5, 4.0, &mut rng).unwrap();
        let t = la.t() as f64;
        round_trip(TaskInstance::La(la), 15, t);
        round_trip(
            TaskInstance::Threshold(sample_threshold_instance(12, &mut rng).unwrap()),
            15,
            0.0,
        );
        round_trip(
            TaskInstance::TwoLength(sample_two_length_instance(12, &mut rng).unwrap()),
            15,
            0.0,
        );
    }

    #[test]
    fn ids_are_one_based_on_disk() {
        let inst = TaskInstance::Hc(
            HcInstance::from_parts(3, 0.5, vec!["101".parse().unwrap()], vec!["100".parse().unwrap()]).unwrap(),
        );
        let text = write_instance(&inst, &MixtureWeights::uniform(1).unwrap());
        assert!(text.contains("hc\t1\t1*0\n"), "{text}");
    }

    #[test]
    fn parse_errors_report_lines() {
        let text = "# task=hc n=1 N=2 d=3 rho=0.5 seed=1 trial=0\n3\t1\t010\n";
        assert!(matches!(read_dataset(text), Err(Error::Parse { line: 2, .. })));
        let text = "# task=hc n=1 N=2 d=3 rho=0.5 seed=1 trial=0\n1\t1\t01\n";
        assert!(matches!(read_dataset(text), Err(Error::Parse { line: 2, .. })));
        let text = "# task=hc n=2 N=2 d=3 rho=0.5 seed=1 trial=0\n1\t1\t010\n";
        assert!(matches!(read_dataset(text), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_dataset("# task=zz\n"), Err(Error::Parse { line: 1, .. })));
    }
}
