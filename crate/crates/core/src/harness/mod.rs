//! Experiment configuration, orchestration and the checks behind the CLI.

mod commands;
mod config;
mod verify;

pub use commands::{
    build_trial, checkpoint_path, cmd_attack, cmd_curve, cmd_generate, cmd_train, dataset_path, instance_path,
    CurvePoint, RunReport, TrialData, TrialOutcome, ATTACK_FILE, CURVE_CSV_HEADER, CURVE_FILE, ERRORS_FILE,
};
pub use config::{ClassifierKind, ExperimentConfig, PriorSpec, RhoSpec};
pub use verify::{
    bound_identities, cmd_verify, gradient_check, monotone_oracle, nsp_closed_form, oracle_equivalence,
    sdpi_random_maps, sing_constant_error, singleton_stats, Check, SUITES,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::info::{
    dp_info_bound, fano_lower, gh_alpha_lower, gh_product_bound, hc_comm_bound, nsp_oneshot_bound, BoundResult,
    BERRY_ESSEEN, BOUNDS_CSV_HEADER,
};

/// Evaluates a bounds request file.
///
/// Each non-blank line not starting with `#` names a calculator followed by
/// `key=value` inputs, e.g. `nsp_oneshot d=99 delta=0 eps=0.05`. Calculators:
/// `fano k err`, `nsp_oneshot d delta eps`, `hc_comm k d n c eps`,
/// `dp_info alpha beta n d`, `gh_product H_X log_Nmax log_Xsize eps alpha`,
/// `gh_alpha c p d [K1 K2]` (`d=inf` allowed).
pub fn cmd_bounds(text: &str) -> Result<String> {
    let mut out = format!("{BOUNDS_CSV_HEADER}\n");
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line, msg };
        let mut toks = body.split_whitespace();
        let name = toks.next().unwrap_or_default();
        let mut args: HashMap<&str, f64> = HashMap::new();
        for tok in toks {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {tok:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| err(format!("{k}: cannot parse {v:?} as a number")))?;
            if args.insert(k, v).is_some() {
                return Err(err(format!("{k} given twice")));
            }
        }
        let allowed: &[&str] = match name {
            "fano" => &["k", "err"],
            "nsp_oneshot" => &["d", "delta", "eps"],
            "hc_comm" => &["k", "d", "n", "c", "eps"],
            "dp_info" => &["alpha", "beta", "n", "d"],
            "gh_product" => &["H_X", "log_Nmax", "log_Xsize", "eps", "alpha"],
            "gh_alpha" => &["c", "p", "d", "K1", "K2"],
            other => return Err(err(format!("unknown calculator {other:?}"))),
        };
        if let Some(k) = args.keys().find(|k| !allowed.contains(k)) {
            return Err(err(format!("{name} takes no input {k:?}")));
        }
        let get = |k: &str| args.get(k).copied().ok_or_else(|| err(format!("{name} needs {k}")));
        let count = |k: &str| -> Result<u64> {
            let v = get(k)?;
            if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(err(format!("{k} = {v} must be a nonnegative integer")))
            }
        };
        let r: BoundResult = match name {
            "fano" => fano_lower(count("k")?, get("err")?).map_err(|e| err(e.to_string()))?,
            "nsp_oneshot" => nsp_oneshot_bound(count("d")?, get("delta")?, get("eps")?),
            "hc_comm" => hc_comm_bound(count("k")?, count("d")?, count("n")?, get("c")?, get("eps")?),
            "dp_info" => dp_info_bound(get("alpha")?, get("beta")?, count("n")?, count("d")?),
            "gh_product" => gh_product_bound(
                get("H_X")?,
                get("log_Nmax")?,
                get("log_Xsize")?,
                get("eps")?,
                get("alpha")?,
            ),
            _ => gh_alpha_lower(
                get("c")?,
                get("p")?,
                get("d")?,
                args.get("K1").copied().unwrap_or(BERRY_ESSEEN),
                args.get("K2").copied().unwrap_or(BERRY_ESSEEN),
            ),
        };
        out.push_str(&r.to_string());
        out.push('\n');
    }
    Ok(out)
}
