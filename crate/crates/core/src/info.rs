//! Exact information quantities on small instances and calculators for the
//! closed-form information bounds.
//!
//! Everything is in bits. Bound calculators never fail on out-of-range
//! inputs; they report the problem in [`BoundResult::flags`] instead.

use std::collections::HashMap;
use std::fmt;

use crate::error::{check_probability, domain, Error, Result};
use crate::prob::{h2, normal_cdf, xlog2x};

/// Berry-Esseen constant used by [`gh_alpha_lower`] unless overridden.
pub const BERRY_ESSEEN: f64 = 0.56;

/// Largest `d` for which [`sdpi_check`] enumerates `{0,1}^d x {0,1}^d`.
pub const SDPI_MAX_D: usize = 12;

/// Largest `k d` for which [`empirical_singleton_mi`] enumerates inputs.
pub const SINGLETON_MAX_BITS: usize = 16;

/// Largest point dimension accepted by [`empirical_singleton_mi`].
pub const SINGLETON_MAX_D: usize = 4;

/// Finite joint distribution of `(X, M)`, stored row-major by `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPMF {
    nx: usize,
    nm: usize,
    p: Vec<f64>,
}

impl JointPMF {
    pub fn new(nx: usize, nm: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != nx * nm {
            return Err(Error::LengthMismatch {
                expected: nx * nm,
                found: p.len(),
            });
        }
        if nx == 0 || nm == 0 {
            return domain("empty support");
        }
        if let Some(bad) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return domain(format!("probability entry {bad} is invalid"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(JointPMF { nx, nm, p })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nm(&self) -> usize {
        self.nm
    }

    pub fn get(&self, x: usize, m: usize) -> f64 {
        self.p[x * self.nm + m]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.p.chunks(self.nm).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_m(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nm];
        for row in self.p.chunks(self.nm) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }
}

/// `sum p(x,m) log2 [p(x,m) / (p(x) p(m))]`, never negative.
pub fn mutual_information(joint: &JointPMF) -> f64 {
    let px = joint.marginal_x();
    let pm = joint.marginal_m();
    let mut total = 0.0;
    for (x, row) in joint.p.chunks(joint.nm).enumerate() {
        for (m, &pxm) in row.iter().enumerate() {
            if pxm > 0.0 {
                total += pxm * (pxm / (px[x] * pm[m])).log2();
            }
        }
    }
    total.max(0.0)
}

/// Joint law of `(X, map(X))`. Message ids are `map`'s outputs, so the message
/// alphabet has size `1 + max map(x)`.
pub fn channel_from_map<F: Fn(usize) -> usize>(input: &[f64], map: F) -> Result<JointPMF> {
    let msgs: Vec<usize> = (0..input.len()).map(&map).collect();
    let nm = msgs.iter().max().map_or(1, |m| m + 1);
    let mut p = vec![0.0; input.len() * nm];
    for (x, (&px, &m)) in input.iter().zip(&msgs).enumerate() {
        p[x * nm + m] = px;
    }
    JointPMF::new(input.len(), nm, p)
}

fn entropy_of(counts: impl Iterator<Item = f64>) -> f64 {
    counts.map(xlog2x).sum()
}

/// `P(BSC_q(x) = y)` indexed by the Hamming distance between them.
fn bsc_profile(d: usize, q: f64) -> Vec<f64> {
    (0..=d)
        .map(|h| q.powi(h as i32) * (1.0 - q).powi((d - h) as i32))
        .collect()
}

/// Both sides of the strong data processing inequality for one message map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpiCheck {
    pub info_my: f64,
    /// `rho^2 I(M;X)`.
    pub scaled_info_mx: f64,
    pub holds: bool,
}

/// With `X` uniform on `{0,1}^d` (as the integers `0..2^d`), `M = map(X)` and
/// `Y = BSC_{(1-rho)/2}(X)`, computes `I(M;Y)` and `rho^2 I(M;X)` by full
/// enumeration and checks `I(M;Y) <= rho^2 I(M;X) + 1e-9`.
pub fn sdpi_check<F: Fn(u64) -> u64>(map: F, d: usize, rho: f64) -> Result<SdpiCheck> {
    if d > SDPI_MAX_D {
        return Err(Error::TooLarge(format!("exact SDPI needs d <= {SDPI_MAX_D}, got {d}")));
    }
    check_probability("rho", rho)?;
    let size = 1usize << d;
    let mut classes: HashMap<u64, Vec<u64>> = HashMap::new();
    for x in 0..size as u64 {
        classes.entry(map(x)).or_default().push(x);
    }
    let mut keys: Vec<u64> = classes.keys().copied().collect();
    keys.sort_unstable();
    let px = 1.0 / size as f64;
    let info_mx = entropy_of(keys.iter().map(|k| classes[k].len() as f64 * px));

    // I(M;Y) = sum_m p(m) D(P_{Y|m} || uniform)
    let profile = bsc_profile(d, (1.0 - rho) / 2.0);
    let mut info_my = 0.0;
    let mut py = vec![0.0; size];
    for k in &keys {
        let class = &classes[k];
        let pm = class.len() as f64 * px;
        py.iter_mut().for_each(|v| *v = 0.0);
        for &x in class {
            for (y, v) in py.iter_mut().enumerate() {
                *v += profile[(x ^ y as u64).count_ones() as usize];
            }
        }
        let inv = size as f64 / class.len() as f64;
        let div: f64 = py.iter().map(|v| -xlog2x(v * inv)).sum::<f64>() * px;
        info_my += pm * div;
    }
    let info_my = info_my.max(0.0);
    let scaled = rho * rho * info_mx + 0.0;
    Ok(SdpiCheck {
        info_my,
        scaled_info_mx: scaled,
        holds: info_my <= scaled + 1e-9,
    })
}

/// Exact singletons-only game outcome for one compressor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingletonMi {
    /// `I(X;M)` for uniform `X`.
    pub info_bits: f64,
    /// Error of the Bayes-optimal responder who sees `M` and `z`.
    pub responder_error: f64,
}

/// Alice holds `k` uniform points of `{0,1}^d` and sends `compressor(points)`;
/// Bob sees the message and `z = BSC_{(1-rho)/2}(x_j)` for a uniform `j` and
/// names `j`. Points are passed to the compressor as `d`-bit integers.
pub fn empirical_singleton_mi<F: Fn(&[u64]) -> u64>(
    k: usize,
    d: usize,
    rho: f64,
    compressor: F,
) -> Result<SingletonMi> {
    if k == 0 || d == 0 {
        return domain("k and d must be positive");
    }
    if d > SINGLETON_MAX_D || k * d > SINGLETON_MAX_BITS {
        return Err(Error::TooLarge(format!(
            "exact enumeration needs d <= {SINGLETON_MAX_D} and k d <= {SINGLETON_MAX_BITS}, got k = {k}, d = {d}"
        )));
    }
    check_probability("rho", rho)?;
    let mask = (1u64 << d) - 1;
    let total = 1u64 << (k * d);
    let unpack = |x: u64| -> Vec<u64> { (0..k).map(|j| (x >> (j * d)) & mask).collect() };
    let mut classes: HashMap<u64, Vec<u64>> = HashMap::new();
    for x in 0..total {
        classes.entry(compressor(&unpack(x))).or_default().push(x);
    }
    let mut keys: Vec<u64> = classes.keys().copied().collect();
    keys.sort_unstable();
    let px = 1.0 / total as f64;
    let info = entropy_of(keys.iter().map(|m| classes[m].len() as f64 * px));

    let profile = bsc_profile(d, (1.0 - rho) / 2.0);
    let nz = 1usize << d;
    let mut acc = vec![0.0; nz * k];
    let mut success = 0.0;
    for m in &keys {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for &x in &classes[m] {
            for (j, point) in unpack(x).into_iter().enumerate() {
                for z in 0..nz {
                    acc[z * k + j] += profile[(point ^ z as u64).count_ones() as usize];
                }
            }
        }
        success += acc
            .chunks(k)
            .map(|row| row.iter().cloned().fold(0.0, f64::max))
            .sum::<f64>();
    }
    let responder_error = (1.0 - success * px / k as f64).clamp(0.0, 1.0);
    Ok(SingletonMi {
        info_bits: info,
        responder_error,
    })
}

/// A bound value in bits plus the inputs that produced it. Non-empty `flags`
/// mean the bound's preconditions fail; `value` is then the raw formula (NaN
/// where the formula itself is undefined).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundResult {
    pub name: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
    pub value: f64,
    pub flags: Vec<String>,
}

impl BoundResult {
    fn new(name: &'static str, inputs: Vec<(&'static str, f64)>) -> Self {
        BoundResult {
            name,
            inputs,
            value: f64::NAN,
            flags: Vec::new(),
        }
    }

    fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }

    /// Stores `v` clamped at zero; a negative formula value is flagged
    /// vacuous.
    fn set(mut self, v: f64) -> Self {
        if v < 0.0 {
            self.flag("vacuous: formula is negative");
            self.value = 0.0;
        } else {
            self.value = v;
        }
        self
    }

    pub fn is_valid(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn inputs_string(&self) -> String {
        self.inputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for BoundResult {
    /// `name,inputs,value,flags` with `;`-separated lists.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.name,
            self.inputs_string(),
            self.value,
            self.flags.join(";")
        )
    }
}

pub const BOUNDS_CSV_HEADER: &str = "name,inputs,value,flags";

/// `log2 k - (err log2 k + h(err))`.
pub fn fano_lower(k: u64, err: f64) -> Result<BoundResult> {
    if k < 2 {
        return domain(format!("fano_lower needs k >= 2, got {k}"));
    }
    let mut r = BoundResult::new("fano_lower", vec![("k", k as f64), ("err", err)]);
    if !(0.0..=1.0).contains(&err) {
        r.flag("err outside [0, 1]");
        return Ok(r);
    }
    let lk = (k as f64).log2();
    Ok(r.set(lk - (err * lk + h2(err))))
}

/// `(d+1)/2 (1 - h(2 eps / (1-delta)^2))`, applicable for
/// `eps <= (1-delta)^2 / 4`.
pub fn nsp_oneshot_bound(d: u64, delta: f64, eps: f64) -> BoundResult {
    let mut r = BoundResult::new("nsp_oneshot", vec![("d", d as f64), ("delta", delta), ("eps", eps)]);
    if !(0.0..1.0).contains(&delta) || !(eps >= 0.0) {
        r.flag("delta must be in [0, 1) and eps >= 0");
        return r;
    }
    let gap = (1.0 - delta) * (1.0 - delta);
    let arg = 2.0 * eps / gap;
    if arg > 1.0 {
        r.flag("eps exceeds (1-delta)^2/2: entropy argument above 1");
        return r;
    }
    if eps > gap / 4.0 {
        r.flag("eps > (1-delta)^2/4");
    }
    r.set((d as f64 + 1.0) / 2.0 * (1.0 - h2(arg)))
}

/// `(k d / (c^2 ln 2)) (log2 k / log2 n) (1 - 2 h(eps))`.
pub fn hc_comm_bound(k: u64, d: u64, n: u64, c: f64, eps: f64) -> BoundResult {
    let mut r = BoundResult::new(
        "hc_comm",
        vec![
            ("k", k as f64),
            ("d", d as f64),
            ("n", n as f64),
            ("c", c),
            ("eps", eps),
        ],
    );
    if n < 2 || k == 0 || !(c > 0.0) || !(0.0..=1.0).contains(&eps) {
        r.flag("need n >= 2, k >= 1, c > 0, eps in [0, 1]");
        return r;
    }
    if c <= std::f64::consts::SQRT_2 {
        r.flag("c <= sqrt(2)");
    }
    if eps > 0.1 {
        r.flag("eps > 1/10");
    }
    if k > n {
        r.flag("k > n");
    }
    let kd = k as f64 * d as f64;
    let ratio = (k as f64).log2() / (n as f64).log2();
    r.set(kd / (c * c * std::f64::consts::LN_2) * ratio * (1.0 - 2.0 * h2(eps)))
}

/// `n (2 alpha tanh(alpha) + beta d + h(beta))`, an upper bound on the
/// information an `(alpha, beta)`-DP learner keeps about `n` records.
pub fn dp_info_bound(alpha: f64, beta: f64, n: u64, d: u64) -> BoundResult {
    let mut r = BoundResult::new(
        "dp_info",
        vec![("alpha", alpha), ("beta", beta), ("n", n as f64), ("d", d as f64)],
    );
    if !(alpha >= 0.0) || !alpha.is_finite() || !(0.0..=1.0).contains(&beta) {
        r.flag("need alpha >= 0 and beta in [0, 1]");
        return r;
    }
    r.set(n as f64 * (2.0 * alpha * alpha.tanh() + beta * d as f64 + h2(beta)))
}

/// `H_X - log N_max - 1 - (2 eps / alpha)(log |X| - log N_max)`.
pub fn gh_product_bound(h_x: f64, log_nmax: f64, log_xsize: f64, eps: f64, alpha: f64) -> BoundResult {
    let mut r = BoundResult::new(
        "gh_product",
        vec![
            ("H_X", h_x),
            ("log_Nmax", log_nmax),
            ("log_Xsize", log_xsize),
            ("eps", eps),
            ("alpha", alpha),
        ],
    );
    if !(alpha > 0.0) {
        r.flag("alpha must be positive");
        return r;
    }
    if log_nmax > log_xsize {
        r.flag("log_Nmax > log_Xsize");
    }
    r.set(h_x - log_nmax - 1.0 - (2.0 * eps / alpha) * (log_xsize - log_nmax))
}

/// Lower bound on the disagreement probability `alpha` with Berry-Esseen
/// corrections `k1 / sqrt(d(1-p))` and `k2 / sqrt(d p)`; `d` may be infinite.
pub fn gh_alpha_lower(c: f64, p: f64, d: f64, k1: f64, k2: f64) -> BoundResult {
    let mut r = BoundResult::new("gh_alpha", vec![("c", c), ("p", p), ("d", d), ("K1", k1), ("K2", k2)]);
    if !(c > 0.0) || !(p > 0.0 && p < 1.0) || !(d > 0.0) {
        r.flag("need c > 0, 0 < p < 1, d > 0");
        return r;
    }
    let first = 1.0 - 2.0 * normal_cdf(-c / (1.0 - p).sqrt()) - k1 / (d * (1.0 - p)).sqrt();
    let second = 2.0 * normal_cdf(-3.0 * c / p.sqrt()) - k2 / (d * p).sqrt();
    if first <= 0.0 || second <= 0.0 {
        r.flag("degenerate: a factor is not positive");
        r.value = 0.0;
        return r;
    }
    r.value = (first * second).clamp(0.0, 1.0);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn h(p: f64) -> f64 {
        if p == 0.0 || p == 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    #[test]
    fn identity_and_constant_channels() {
        for d in 1..=6 {
            let n = 1 << d;
            let input = vec![1.0 / n as f64; n];
            let id = channel_from_map(&input, |x| x).unwrap();
            assert!((mutual_information(&id) - d as f64).abs() < 1e-12);
            for (x, p) in input.iter().enumerate() {
                assert_eq!(id.get(x, x), *p);
            }
            let c = channel_from_map(&input, |_| 0).unwrap();
            assert_eq!(c.nm(), 1);
            assert_eq!(mutual_information(&c), 0.0);
        }
    }

    #[test]
    fn bsc_pair_information() {
        let q = 0.11;
        let j = JointPMF::new(2, 2, vec![(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]).unwrap();
        assert!((mutual_information(&j) - (1.0 - h(q))).abs() < 1e-12);
    }

    #[test]
    fn parity_map_carries_one_bit() {
        let j = channel_from_map(&[0.25; 4], |x| (x.count_ones() % 2) as usize).unwrap();
        assert!((mutual_information(&j) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_pmfs_rejected() {
        assert!(JointPMF::new(2, 2, vec![0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(JointPMF::new(2, 1, vec![1.5, -0.5]).is_err());
        assert!(JointPMF::new(2, 2, vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn information_is_bounded(nx in 1usize..6, nm in 1usize..6, raw in prop::collection::vec(0.0f64..1.0, 36)) {
            let mut p: Vec<f64> = raw[..nx * nm].to_vec();
            let s: f64 = p.iter().sum();
            prop_assume!(s > 1e-6);
            p.iter_mut().for_each(|v| *v /= s);
            let fix: f64 = 1.0 - p.iter().sum::<f64>();
            p[0] = (p[0] + fix).max(0.0);
            let j = JointPMF::new(nx, nm, p).unwrap();
            let i = mutual_information(&j);
            prop_assert!(i >= 0.0);
            prop_assert!(i <= (nx as f64).log2().min((nm as f64).log2()) + 1e-9);
        }
    }

    #[test]
    fn sdpi_constant_and_identity() {
        let c = sdpi_check(|_| 7, 6, 0.4).unwrap();
        assert_eq!((c.info_my, c.scaled_info_mx, c.holds), (0.0, 0.0, true));
        let id = sdpi_check(|x| x, 8, 0.3).unwrap();
        assert!((id.info_my - 8.0 * (1.0 - h(0.35))).abs() < 1e-9);
        assert!((id.scaled_info_mx - 0.09 * 8.0).abs() < 1e-12);
        assert!(id.holds);
        assert!(sdpi_check(|x| x, 13, 0.3).is_err());
    }

    #[test]
    fn sdpi_random_maps() {
        let mut rng = RngStream::new(11, 0);
        for rho in [0.1, 0.3] {
            for _ in 0..100 {
                let alphabet = rng.random_range(2..=32u64);
                let table: Vec<u64> = (0..256).map(|_| rng.random_range(0..alphabet)).collect();
                let r = sdpi_check(|x| table[x as usize], 8, rho).unwrap();
                assert!(r.holds, "{r:?}");
            }
        }
    }

    #[test]
    fn singleton_identity_and_constant() {
        let id = empirical_singleton_mi(2, 3, 0.5, |xs| xs[0] | (xs[1] << 3)).unwrap();
        assert_eq!(id.info_bits, 6.0);
        let c = empirical_singleton_mi(3, 2, 0.5, |_| 0).unwrap();
        assert_eq!(c.info_bits, 0.0);
        assert!((c.responder_error - 2.0 / 3.0).abs() < 1e-12);
        assert!(id.responder_error < c.responder_error);
        assert!(empirical_singleton_mi(5, 4, 0.5, |_| 0).is_err());
    }

    #[test]
    fn singleton_responder_matches_brute_force() {
        // oracle: enumerate x, j and z directly; Bob's guess is the j with the
        // largest joint mass among all x sharing the message
        let (k, d, rho) = (2usize, 2usize, 0.4f64);
        let comp = |xs: &[u64]| (xs[0] & 1) | ((xs[1] & 1) << 1);
        let q = (1.0 - rho) / 2.0;
        let pz = |x: u64, z: u64| {
            let hd = (x ^ z).count_ones() as i32;
            q.powi(hd) * (1.0 - q).powi(d as i32 - hd)
        };
        let mut score: HashMap<(u64, u64, usize), f64> = HashMap::new();
        for x in 0..16u64 {
            let pts = [x & 3, x >> 2];
            for j in 0..k {
                for z in 0..4 {
                    *score.entry((comp(&pts), z, j)).or_default() += pz(pts[j], z) / 16.0 / k as f64;
                }
            }
        }
        let mut win = 0.0;
        for m in 0..4 {
            for z in 0..4 {
                win += (0..k)
                    .map(|j| score.get(&(m, z, j)).copied().unwrap_or(0.0))
                    .fold(0.0, f64::max);
            }
        }
        let got = empirical_singleton_mi(k, d, rho, comp).unwrap();
        assert!((got.responder_error - (1.0 - win)).abs() < 1e-12);
        assert_eq!(got.info_bits, 2.0);
    }

    #[test]
    fn singleton_prefix_compressor_consistent_with_fano() {
        let r = empirical_singleton_mi(2, 4, 0.6, |xs| (xs[0] & 3) | ((xs[1] & 3) << 2)).unwrap();
        assert!((r.info_bits - 4.0).abs() < 1e-12);
        let f = fano_lower(2, r.responder_error).unwrap();
        assert!(f.value <= r.info_bits + 1e-9);
    }

    #[test]
    fn fano_values() {
        assert_eq!(fano_lower(500, 0.0).unwrap().value, (500f64).log2());
        let v = fano_lower(500, 0.1).unwrap();
        let lk = (500f64).log2();
        assert!((v.value - (0.9 * lk - h(0.1))).abs() < 1e-12);
        let vac = fano_lower(2, 0.5).unwrap();
        assert_eq!(vac.value, 0.0);
        assert!(!vac.is_valid());
        assert!(fano_lower(1, 0.1).is_err());
    }

    #[test]
    fn nsp_bound_boundaries() {
        for d in [1u64, 10, 999] {
            for delta in [0.0, 0.3] {
                let r = nsp_oneshot_bound(d, delta, 0.0);
                assert_eq!(r.value, (d as f64 + 1.0) / 2.0);
                assert!(r.is_valid());
            }
        }
        let edge = nsp_oneshot_bound(99, 0.0, 0.25);
        assert_eq!(edge.value, 0.0);
        let mid = nsp_oneshot_bound(99, 0.0, 0.05);
        assert!((mid.value - 50.0 * (1.0 - h(0.1))).abs() < 1e-12);
        assert!(!nsp_oneshot_bound(99, 0.0, 0.3).is_valid());
        assert!(nsp_oneshot_bound(99, 0.0, 0.6).value.is_nan());
    }

    #[test]
    fn hc_bound_values() {
        // h(eps) = 1/2 at eps ~ 0.110028; bisect keeping h(hi) >= 1/2
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if h(mid) >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_eq!(hc_comm_bound(500, 1000, 500, 1.5, hi).value, 0.0);
        let r = hc_comm_bound(500, 1000, 500, 1.5, 0.05);
        let expect = 500.0 * 1000.0 / (2.25 * 2f64.ln()) * (1.0 - 2.0 * h(0.05));
        assert!((r.value - expect).abs() < 1e-9 * expect);
        assert!(r.is_valid());
        assert!(!hc_comm_bound(500, 1000, 500, 1.2, 0.05).is_valid());
        assert!(!hc_comm_bound(600, 1000, 500, 1.5, 0.05).is_valid());
    }

    #[test]
    fn dp_bound_values() {
        assert_eq!(dp_info_bound(0.0, 0.0, 7, 9).value, 0.0);
        let e2 = 2f64.exp();
        assert!((dp_info_bound(1.0, 0.0, 1, 5).value - 2.0 * (e2 - 1.0) / (e2 + 1.0)).abs() < 1e-15);
        let mut prev = -1.0;
        for i in 0..50 {
            let v = dp_info_bound(i as f64 * 0.1, 0.01, 10, 20).value;
            assert!(v > prev);
            prev = v;
        }
        assert!(!dp_info_bound(-1.0, 0.0, 1, 1).is_valid());
    }

    #[test]
    fn product_bound_values() {
        assert_eq!(gh_product_bound(100.0, 40.0, 90.0, 0.0, 0.2).value, 59.0);
        assert_eq!(gh_product_bound(100.0, 40.0, 40.0, 0.3, 0.2).value, 59.0);
        let d = 1000.0;
        let ln = d * h(0.1);
        let r = gh_product_bound(d, ln, d, 0.01, 0.2);
        assert!((r.value - (d - ln - 1.0 - 0.1 * (d - ln))).abs() < 1e-9);
        assert!(gh_product_bound(1.0, 0.0, 1.0, 0.1, 0.0).value.is_nan());
    }

    #[test]
    fn alpha_bound_values() {
        let phi = |a: f64| 0.5 * (1.0 + libm_erf(a / 2f64.sqrt()));
        let lim = gh_alpha_lower(0.5, 0.1, f64::INFINITY, BERRY_ESSEEN, BERRY_ESSEEN);
        let expect = (1.0 - 2.0 * phi(-0.5 / 0.9f64.sqrt())) * 2.0 * phi(-1.5 / 0.1f64.sqrt());
        assert!((lim.value - expect).abs() < 1e-9);
        // at c = 0.5, p = 0.1 the second factor's correction 0.56/sqrt(1e5)
        // swamps 2 Phi(-4.74), so the bound is degenerate
        let second = 2.0 * phi(-1.5 / 0.1f64.sqrt()) - 0.56 / (1e6 * 0.1f64).sqrt();
        assert!(second < 0.0);
        let fin = gh_alpha_lower(0.5, 0.1, 1e6, BERRY_ESSEEN, BERRY_ESSEEN);
        assert_eq!(fin.value, 0.0);
        assert!(!fin.is_valid());
        let ok = gh_alpha_lower(0.1, 0.5, 1e6, BERRY_ESSEEN, BERRY_ESSEEN);
        let expect = (1.0 - 2.0 * phi(-0.1 / 0.5f64.sqrt()) - 0.56 / (1e6 * 0.5f64).sqrt())
            * (2.0 * phi(-0.3 / 0.5f64.sqrt()) - 0.56 / (1e6 * 0.5f64).sqrt());
        assert!((ok.value - expect).abs() < 1e-9);
        assert!(ok.is_valid());
        assert!(ok.value < gh_alpha_lower(0.1, 0.5, f64::INFINITY, 0.56, 0.56).value);
        assert!(!gh_alpha_lower(0.5, 1.0, 1e6, 0.56, 0.56).is_valid());
        assert!(!gh_alpha_lower(0.5, 0.999999, 1e3, 0.56, 0.56).is_valid());
    }

    // Abramowitz-Stegun 7.1.26 is too coarse; use a series for |a| < 3 and
    // the continued fraction beyond.
    fn libm_erf(a: f64) -> f64 {
        if a.abs() < 3.0 {
            let mut term = a;
            let mut sum = a;
            for n in 1..200 {
                term *= -a * a / n as f64;
                sum += term / (2 * n + 1) as f64;
            }
            2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            let x = a.abs();
            let mut f = 0.0;
            for n in (1..80).rev() {
                f = n as f64 / 2.0 / (x + f);
            }
            let erfc = (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f);
            a.signum() * (1.0 - erfc)
        }
    }

    proptest! {
        #[test]
        fn calculators_never_negative(a in -2.0f64..3.0, b in -0.5f64..1.5, k in 2u64..1000) {
            for r in [
                fano_lower(k, b).unwrap(),
                nsp_oneshot_bound(k, b.abs().min(0.99), a.abs() / 10.0),
                hc_comm_bound(k, 50, 1000, a.abs() + 0.1, b),
                dp_info_bound(a, b, k, 10),
                gh_product_bound(a * 10.0, b, 2.0, a.abs(), b),
                gh_alpha_lower(a, b, k as f64, BERRY_ESSEEN, BERRY_ESSEEN),
            ] {
                prop_assert!(r.value.is_nan() || r.value >= 0.0, "{}", r);
                prop_assert!(!r.is_valid() || r.value.is_finite());
                prop_assert!(!r.value.is_nan() || !r.is_valid());
            }
        }
    }
}
