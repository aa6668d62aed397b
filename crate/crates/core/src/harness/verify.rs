//! Self-checks run by `memlab verify`. Each check compares a measured value
//! against an independently computed expectation.

use std::fmt;

use rand::Rng;

use crate::attacks::{coordinate_ascent_attack, gradient_sign_attack, MonotoneOracle};
use crate::bits::BitString;
use crate::error::{domain, Result};
use crate::info::{
    channel_from_map, dp_info_bound, fano_lower, hc_comm_bound, mutual_information, nsp_oneshot_bound, sdpi_check,
};
use crate::mixture::{mixture_stats_monte_carlo, sample_weights, uniform_stats, Prior};
use crate::predictors::{argmax, nn_predict_hc, nsp_predict, sing_error_estimate};
use crate::prob::{binary_entropy, bsc_apply, normal_cdf};
use crate::rng::RngStream;
use crate::tasks::{
    generate_dataset, sample_hc_example, sample_hc_instance, sample_nsp_example_at, sample_nsp_instance, Dataset,
    Features, TaskInstance,
};
use crate::train::{feature_matrix, grad_check, Arch, LogitModel, MlpModel};

pub const SUITES: &[&str] = &[
    "prob",
    "mixture",
    "tasks",
    "predictors",
    "train",
    "attacks",
    "info",
    "all",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    fn new(
        suite: &'static str,
        name: impl Into<String>,
        measured: impl fmt::Display,
        expected: impl fmt::Display,
        pass: bool,
    ) -> Self {
        Check {
            suite,
            name: name.into(),
            measured: measured.to_string(),
            expected: expected.to_string(),
            pass,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: measured {} expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.expected
        )
    }
}

/// Runs one suite (or `all`) and returns its checks in order.
pub fn cmd_verify(suite: &str) -> Result<Vec<Check>> {
    let seed = 20_240_601;
    let mut out = Vec::new();
    let all = suite == "all";
    if !SUITES.contains(&suite) {
        return domain(format!(
            "unknown suite {suite:?}; expected one of {}",
            SUITES.join(", ")
        ));
    }
    if all || suite == "prob" {
        out.extend(prob_checks(seed)?);
    }
    if all || suite == "mixture" {
        out.extend(singleton_stats(500, 200, seed)?);
    }
    if all || suite == "tasks" {
        out.extend(task_checks(seed)?);
    }
    if all || suite == "predictors" {
        out.push(oracle_equivalence(1000, seed)?);
        for delta in [0.0, 0.2, 0.5] {
            out.push(nsp_closed_form(delta, 100_000, seed)?);
        }
        out.push(sing_constant_error(2000, seed)?);
    }
    if all || suite == "train" {
        out.push(gradient_check(Arch::Logit, 20, seed)?);
        out.push(gradient_check(Arch::Mlp, 20, seed)?);
    }
    if all || suite == "attacks" {
        out.extend(monotone_oracle(200, 100, seed)?);
    }
    if all || suite == "info" {
        out.extend(info_checks());
        for rho in [0.1, 0.3] {
            out.push(sdpi_random_maps(8, rho, 100, seed)?);
        }
        out.extend(bound_identities()?);
    }
    Ok(out)
}

fn prob_checks(seed: u64) -> Result<Vec<Check>> {
    let q: f64 = 0.11;
    let h = -q * q.log2() - (1.0 - q) * (1.0 - q).log2();
    let got = binary_entropy(q)?;
    let mut rng = RngStream::new(seed, 1);
    let d = 100_000;
    let x = BitString::zeros(d);
    let flips = bsc_apply(&x, 0.2, &mut rng)?.count_ones() as f64 / d as f64;
    let se = (0.2f64 * 0.8 / d as f64).sqrt();
    Ok(vec![
        Check::new("prob", "binary_entropy(0.11)", got, h, (got - h).abs() < 1e-15),
        Check::new(
            "prob",
            "binary_entropy(1/2)",
            binary_entropy(0.5)?,
            1,
            binary_entropy(0.5)? == 1.0,
        ),
        Check::new(
            "prob",
            "bsc flip rate q=0.2",
            flips,
            "0.2 +- 4 se",
            (flips - 0.2).abs() < 4.0 * se,
        ),
        Check::new("prob", "normal_cdf(0)", normal_cdf(0.0), 0.5, normal_cdf(0.0) == 0.5),
    ])
}

/// Mean singleton fraction and Monte Carlo `tau1` for the uniform mixture
/// with `N = n`, over `datasets` draws.
pub fn singleton_stats(n: usize, datasets: usize, seed: u64) -> Result<Vec<Check>> {
    let prior = Prior::uniform(n)?;
    let mc = mixture_stats_monte_carlo(&prior, n, n, datasets, &mut RngStream::new(seed, 2))?;
    let exact_mu1 = (1.0 - 1.0 / n as f64).powi(n as i32 - 1);
    let tol = (3.0 * mc.tau1_se).max(1e-12);
    Ok(vec![
        Check::new(
            "mixture",
            format!("mean K/n (n = N = {n}, {datasets} datasets)"),
            mc.mu1,
            format!("{exact_mu1} +- 0.02"),
            (mc.mu1 - exact_mu1).abs() <= 0.02,
        ),
        Check::new(
            "mixture",
            "Monte Carlo tau1",
            mc.tau1,
            format!("{} +- {tol:.3e}", 1.0 / n as f64),
            (mc.tau1 - 1.0 / n as f64).abs() <= tol,
        ),
        Check::new(
            "mixture",
            "closed form mu1",
            uniform_stats(n).mu1,
            exact_mu1,
            uniform_stats(n).mu1 == exact_mu1,
        ),
    ])
}

fn task_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = RngStream::new(seed, 3);
    let (n, d, rho) = (200, 400, 0.3);
    let inst = sample_hc_instance(n, d, rho, &mut rng)?;
    let fixed = (0..n).map(|j| inst.fixed_count(j)).sum::<usize>() as f64 / (n * d) as f64;
    let se = (rho * (1.0 - rho) / (n * d) as f64).sqrt();
    let weights = sample_weights(&Prior::uniform(n)?, n, &mut rng)?;
    let ti = TaskInstance::Hc(inst);
    let ds = generate_dataset(&ti, &weights, n, &mut rng)?;
    let counts = ds.counts();
    let mask_ok = ds
        .examples
        .iter()
        .zip(&ds.singleton_mask)
        .all(|(e, &s)| s == (counts[e.subpop] == 1));
    let again = generate_dataset(&ti, &weights, n, &mut RngStream::new(seed, 3).substream(9))?;
    let again2 = generate_dataset(&ti, &weights, n, &mut RngStream::new(seed, 3).substream(9))?;
    Ok(vec![
        Check::new(
            "tasks",
            "hc fixed-feature fraction",
            fixed,
            format!("{rho} +- 4 se"),
            (fixed - rho).abs() < 4.0 * se,
        ),
        Check::new("tasks", "singleton mask agrees with counts", mask_ok, true, mask_ok),
        Check::new("tasks", "generator determinism", again == again2, true, again == again2),
    ])
}

/// Probability that a single draw from the subpopulation of `x` equals `z`
/// jointly with `x`, summed over every fixed-index set.
fn same_subpop_likelihood(x: &BitString, z: &BitString, rho: f64) -> f64 {
    let d = x.len();
    let mut total = 0.0;
    for set in 0u32..(1 << d) {
        let size = set.count_ones() as i32;
        let mut p = rho.powi(size) * (1.0 - rho).powi(d as i32 - size);
        for i in 0..d {
            p *= if set >> i & 1 == 1 {
                if x.get(i) == z.get(i) {
                    0.5
                } else {
                    0.0
                }
            } else {
                0.25
            };
        }
        total += p;
    }
    total
}

/// Nearest neighbour against the exhaustive posterior argmax on singleton
/// data sets with `d = 10`, `k = 4`, `rho = 1/2`.
pub fn oracle_equivalence(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = RngStream::new(seed, 4);
    let (k, d, rho) = (4, 10, 0.5);
    let (mut checked, mut agree) = (0, 0);
    for _ in 0..instances {
        let inst = sample_hc_instance(k, d, rho, &mut rng)?;
        let examples = (0..k)
            .map(|j| sample_hc_example(&inst, j, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let ds = Dataset::new(examples, k)?;
        let target = rng.random_range(0..k);
        let z = sample_hc_example(&inst, target, &mut rng)?;
        let z = z.features.as_bits()?;
        let post: Vec<f64> = ds
            .examples
            .iter()
            .map(|e| e.features.as_bits().map(|x| same_subpop_likelihood(x, z, rho)))
            .collect::<Result<_>>()?;
        let best = argmax(&post);
        if post
            .iter()
            .enumerate()
            .all(|(i, p)| i == best || *p < post[best] * (1.0 - 1e-9))
        {
            checked += 1;
            agree += (nn_predict_hc(&ds, z)? == ds.examples[best].label) as usize;
        }
    }
    Ok(Check::new(
        "predictors",
        format!("nn = posterior argmax ({checked} unique cases)"),
        agree,
        checked,
        agree == checked && checked > 0,
    ))
}

/// NSP error conditioned on exactly one stored example, `d = 1000`.
pub fn nsp_closed_form(delta: f64, trials: usize, seed: u64) -> Result<Check> {
    let d = 1000;
    let mut rng = RngStream::new(seed, 5).substream((delta * 1000.0) as u64);
    let mut errors = 0;
    for _ in 0..trials {
        let inst = sample_nsp_instance(1, d, delta, &mut rng)?;
        let la = rng.random_range(0..d);
        let lb = rng.random_range(0..d);
        let ds = Dataset::new(vec![sample_nsp_example_at(&inst, 0, la, &mut rng)?], 1)?;
        let query = sample_nsp_example_at(&inst, 0, lb, &mut rng)?;
        let Features::Prefix { prefix, .. } = &query.features else {
            return domain("nsp query without a prefix");
        };
        errors += (nsp_predict(&ds, 0, prefix, &mut rng) != query.label) as usize;
    }
    let err = errors as f64 / trials as f64;
    let expect = 0.5 - (1.0 - delta) * (1.0 - delta) / 4.0;
    Ok(Check::new(
        "predictors",
        format!("nsp singleton error delta={delta}"),
        err,
        format!("{expect} +- 0.005"),
        (err - expect).abs() <= 0.005,
    ))
}

/// `sing_error_estimate(500, 1000, a)` is a constant in `(0.01, 0.5)` at
/// `a = 2` and falls at `a = 50` on the same seed.
pub fn sing_constant_error(trials: usize, seed: u64) -> Result<Check> {
    let e2 = sing_error_estimate(500, 1000, 2.0, trials, &mut RngStream::new(seed, 6))?;
    let e50 = sing_error_estimate(500, 1000, 50.0, trials, &mut RngStream::new(seed, 6))?;
    Ok(Check::new(
        "predictors",
        "singletons error a=2 / a=50",
        format!("{e2} / {e50}"),
        "0.01 < a=2 < 0.5 and a=50 < a=2",
        e2 > 0.01 && e2 < 0.5 && e50 < e2,
    ))
}

/// Worst relative gradient deviation over `instances` random small problems.
pub fn gradient_check(arch: Arch, instances: usize, seed: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = RngStream::new(seed, 7).substream(i as u64);
        let n = rng.random_range(3..10);
        let d = rng.random_range(2..15);
        let classes = rng.random_range(2..6);
        let xs: Vec<Features> = (0..n).map(|_| Features::Bits(BitString::random(d, &mut rng))).collect();
        let refs: Vec<&Features> = xs.iter().collect();
        let x = feature_matrix(&refs, d)?;
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let dev = match arch {
            Arch::Logit => grad_check(&LogitModel::init(classes, d, 0.5, &mut rng), x.view(), &y, 1e-5),
            Arch::Mlp => {
                let h = rng.random_range(2..8);
                grad_check(&MlpModel::init(classes, d, h, 0.5, &mut rng), x.view(), &y, 1e-5)
            }
        };
        worst = worst.max(dev);
    }
    Ok(Check::new(
        "train",
        format!(
            "{} gradient vs central differences ({instances} instances)",
            arch.name()
        ),
        format!("{worst:.3e}"),
        "<= 1e-4",
        worst <= 1e-4,
    ))
}

/// Both attacks against a monotone oracle planted at a random string.
pub fn monotone_oracle(d: usize, runs: usize, seed: u64) -> Result<Vec<Check>> {
    let (mut coord, mut grad) = (0, 0);
    for r in 0..runs {
        let mut rng = RngStream::new(seed, 8).substream(r as u64);
        let f = MonotoneOracle {
            planted: BitString::random(d, &mut rng),
            target: 0,
            num_classes: 2,
        };
        coord += (coordinate_ascent_attack(&f, 0, d, 2 * d, &mut rng)? == f.planted) as usize;
        grad += (gradient_sign_attack(&f, 0, d, 32, &mut rng)? == f.planted) as usize;
    }
    Ok(vec![
        Check::new(
            "attacks",
            format!("coordinate ascent exact recoveries (d={d})"),
            coord,
            runs,
            coord == runs,
        ),
        Check::new(
            "attacks",
            format!("gradient sign exact recoveries (d={d})"),
            grad,
            runs,
            grad == runs,
        ),
    ])
}

fn info_checks() -> Vec<Check> {
    let uniform = vec![1.0 / 256.0; 256];
    let id = channel_from_map(&uniform, |x| x)
        .map(|j| mutual_information(&j))
        .unwrap_or(f64::NAN);
    let parity = channel_from_map(&[0.25; 4], |x| (x.count_ones() % 2) as usize)
        .map(|j| mutual_information(&j))
        .unwrap_or(f64::NAN);
    vec![
        Check::new("info", "I(X; X), X uniform on 8 bits", id, 8, (id - 8.0).abs() < 1e-12),
        Check::new(
            "info",
            "I(X; parity(X)), 2 bits",
            parity,
            1,
            (parity - 1.0).abs() < 1e-12,
        ),
    ]
}

/// Exact SDPI over `maps` random deterministic maps into up to 32 messages.
pub fn sdpi_random_maps(d: usize, rho: f64, maps: usize, seed: u64) -> Result<Check> {
    let mut rng = RngStream::new(seed, 9).substream((rho * 1000.0) as u64);
    let mut violations = 0;
    for _ in 0..maps {
        let alphabet = rng.random_range(2..=32u64);
        let table: Vec<u64> = (0..1u64 << d).map(|_| rng.random_range(0..alphabet)).collect();
        violations += (!sdpi_check(|x| table[x as usize], d, rho)?.holds) as usize;
    }
    Ok(Check::new(
        "info",
        format!("SDPI violations (d={d}, rho={rho}, {maps} maps)"),
        violations,
        0,
        violations == 0,
    ))
}

/// Boundary identities of the bound calculators, compared exactly.
pub fn bound_identities() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in [1u64, 99, 1000] {
        for delta in [0.0, 0.25, 0.5] {
            let v = nsp_oneshot_bound(d, delta, 0.0).value;
            let e = (d as f64 + 1.0) / 2.0;
            out.push(Check::new(
                "info",
                format!("nsp_oneshot({d}, {delta}, 0)"),
                v,
                e,
                v == e,
            ));
        }
    }
    let v = nsp_oneshot_bound(99, 0.5, 0.0625).value;
    out.push(Check::new("info", "nsp_oneshot at eps = (1-delta)^2/4", v, 0, v == 0.0));
    for (n, d) in [(1u64, 1u64), (500, 1000)] {
        let v = dp_info_bound(0.0, 0.0, n, d).value;
        out.push(Check::new("info", format!("dp_info(0, 0, {n}, {d})"), v, 0, v == 0.0));
    }
    // smallest eps with h(eps) >= 1/2
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if binary_entropy(mid)? >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let v = hc_comm_bound(500, 1000, 500, 1.5, hi).value;
    out.push(Check::new(
        "info",
        format!("hc_comm at h(eps) = 1/2 (eps = {hi:.6})"),
        v,
        0,
        v == 0.0,
    ));
    let v = fano_lower(500, 0.0)?.value;
    let e = 500f64.log2();
    out.push(Check::new("info", "fano(500, 0)", v, e, v == e));
    Ok(out)
}
