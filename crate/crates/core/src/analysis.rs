//! Figures of merit: how many times a blob can be used before a coalition
//! can publish an untraceable pirate copy that still yields keys with
//! probability at least `gamma`.

use alloc::vec::Vec;

use crate::combinatorics::{bino_tail, inv_bino_tail, scaled_missing_threshold, visit_stats};
use crate::error::{domain, Result};
use crate::scheme::Mode;
use crate::tardos::sufficient_length;

/// Erasure fraction at which `t` tracing positions shrink to `l_suff`
/// effective positions: `1 - sqrt(l_suff / t)`.
pub fn epsilon_star(l_suff: u64, t: u64) -> Result<f64> {
    if l_suff == 0 {
        return Err(domain!("epsilon_star: l_suff must be positive"));
    }
    if t < l_suff {
        return Err(domain!("epsilon_star: t = {t} below l_suff = {l_suff}"));
    }
    Ok(epsilon_star_real(l_suff as f64, t as f64))
}

fn epsilon_star_real(l_suff: f64, t: f64) -> f64 {
    1.0 - libm::sqrt(l_suff / t)
}

/// Probability that a random non-tracing index is missing from the pirate
/// blob after `visited` distinct functional indices have been revealed.
pub fn p_miss(epsilon_star: f64, entry_count: u64, t: u64, visited: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon_star) {
        return Err(domain!("p_miss: epsilon_star = {epsilon_star} outside [0, 1]"));
    }
    let pop = entry_count
        .checked_sub(t)
        .filter(|&p| p > 0)
        .ok_or_else(|| domain!("p_miss: t = {t} must be below N = {entry_count}"))?;
    if visited > pop {
        return Err(domain!("p_miss: visited = {visited} exceeds N - t = {pop}"));
    }
    Ok(epsilon_star * (pop - visited) as f64 / pop as f64)
}

/// Which closed form produced a [`MeritResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Variant {
    /// Exact expression (single-use count or the multi-use logarithm ratio).
    Exact,
    /// First-order expansion of the multi-use denominator.
    Approximation,
    /// The multi-use closed form specialised to one entry per key.
    EllOne,
}

/// Parameters of a figure-of-merit evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeritInputs {
    /// Blob size `M` in bits.
    pub blob_bits: u64,
    /// Key size `k`.
    pub key_bits: u32,
    /// Brute-force-hard key size `k0`.
    pub hard_key_bits: u32,
    /// Entries per key `ell`; must divide `k`.
    pub entries_per_key: u32,
    pub gamma: f64,
    /// Effective code length needed to trace the anticipated coalition.
    pub l_suff: u64,
    /// Tracing positions; derived in single-use mode, free in multi-use.
    pub tracing_count: Option<u64>,
    pub mode: Mode,
}

impl MeritInputs {
    /// Pay-TV sizing: `M = 2^24`, `k = 128`, `k0 = 96`, `gamma = 0.1`.
    pub fn pay_tv(l_suff: u64, entries_per_key: u32, mode: Mode) -> Self {
        Self {
            blob_bits: 1 << 24,
            key_bits: 128,
            hard_key_bits: 96,
            entries_per_key,
            gamma: 0.1,
            l_suff,
            tracing_count: None,
            mode,
        }
    }

    pub fn with_ell(mut self, entries_per_key: u32) -> Self {
        self.entries_per_key = entries_per_key;
        self
    }

    pub fn with_t(mut self, t: u64) -> Self {
        self.tracing_count = Some(t);
        self
    }

    /// Entry width `w = k / ell`.
    pub fn entry_width(&self) -> u32 {
        self.key_bits / self.entries_per_key
    }

    /// Entry count `N = M / w`.
    pub fn entry_count(&self) -> u64 {
        self.blob_bits / self.entry_width() as u64
    }

    /// `ceil(ell * k0 / k)`, the missing-entry count that defeats brute force.
    pub fn missing_threshold(&self) -> u64 {
        scaled_missing_threshold(
            self.entries_per_key as u64,
            self.hard_key_bits as u64,
            self.key_bits as u64,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (k, ell) = (self.key_bits, self.entries_per_key);
        if k == 0 || ell == 0 || k % ell != 0 {
            return Err(domain!("ell = {ell} must divide k = {k}"));
        }
        if self.hard_key_bits == 0 || self.hard_key_bits > k {
            return Err(domain!("k0 = {} must lie in [1, k = {k}]", self.hard_key_bits));
        }
        let w = self.entry_width() as u64;
        if self.blob_bits == 0 || self.blob_bits % w != 0 {
            return Err(domain!("M = {} must be a positive multiple of w = {w}", self.blob_bits));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(domain!("gamma = {} outside (0, 1)", self.gamma));
        }
        if self.l_suff == 0 {
            return Err(domain!("l_suff must be positive"));
        }
        Ok(())
    }

    fn key_fraction(&self) -> Result<f64> {
        inv_bino_tail(self.entries_per_key as u64, self.missing_threshold(), self.gamma)
    }
}

/// A figure of merit evaluated at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeritResult {
    /// Number of safe uses, clamped at 0.
    pub n_max: f64,
    /// Unclamped value; may be negative.
    pub raw: f64,
    pub clamped: bool,
    pub epsilon_star: f64,
    pub t_used: u64,
    pub variant: Variant,
}

impl MeritResult {
    fn new(raw: f64, epsilon_star: f64, t_used: u64, variant: Variant) -> Self {
        let clamped = !(raw >= 0.0);
        Self {
            n_max: if clamped { 0.0 } else { raw },
            raw,
            clamped,
            epsilon_star,
            t_used,
            variant,
        }
    }
}

/// Tracing positions needed in single-use mode:
/// `ceil(l_suff / (1 - InvBinoTail(ell, ceil(ell k0/k), gamma))^2)`.
pub fn required_t_single(inputs: &MeritInputs) -> Result<u64> {
    inputs.validate()?;
    let x = inputs.key_fraction()?;
    Ok(libm::ceil(inputs.l_suff as f64 / ((1.0 - x) * (1.0 - x))) as u64)
}

/// Single-use figure of merit `M/k - t/ell` with `t` at its borderline
/// real value. Independent of the number of uses.
pub fn nmax_single(inputs: &MeritInputs) -> Result<MeritResult> {
    inputs.validate()?;
    let x = inputs.key_fraction()?;
    let t = inputs.l_suff as f64 / ((1.0 - x) * (1.0 - x));
    let raw = inputs.blob_bits as f64 / inputs.key_bits as f64 - t / inputs.entries_per_key as f64;
    let t_used = libm::ceil(t) as u64;
    Ok(MeritResult::new(
        raw,
        epsilon_star_real(inputs.l_suff as f64, t_used as f64),
        t_used,
        Variant::Exact,
    ))
}

/// Single-use figure of merit with one-bit entries (`ell = k`), written
/// without reference to `ell`.
pub fn nmax_single_full_width(
    blob_bits: u64,
    key_bits: u32,
    hard_key_bits: u32,
    gamma: f64,
    l_suff: u64,
) -> Result<MeritResult> {
    let inputs = MeritInputs {
        blob_bits,
        key_bits,
        hard_key_bits,
        entries_per_key: key_bits,
        gamma,
        l_suff,
        tracing_count: None,
        mode: Mode::SingleUse,
    };
    inputs.validate()?;
    let x = inv_bino_tail(key_bits as u64, hard_key_bits as u64, gamma)?;
    let k = key_bits as f64;
    let t = l_suff as f64 / ((1.0 - x) * (1.0 - x));
    let raw = blob_bits as f64 / k - l_suff as f64 / k / ((1.0 - x) * (1.0 - x));
    let t_used = libm::ceil(t) as u64;
    Ok(MeritResult::new(
        raw,
        epsilon_star_real(l_suff as f64, t_used as f64),
        t_used,
        Variant::Exact,
    ))
}

/// Multi-use figure of merit at the `t` in `inputs`.
///
/// Requires `l_suff/(1-gamma)^2 < t < N`. [`Variant::EllOne`] requires
/// `ell = 1`.
pub fn nmax_multi(inputs: &MeritInputs, variant: Variant) -> Result<MeritResult> {
    inputs.validate()?;
    let t = inputs
        .tracing_count
        .ok_or_else(|| domain!("nmax_multi: t must be given"))?;
    let lo = multi_t_floor(inputs);
    if (t as f64) <= lo {
        return Err(domain!(
            "nmax_multi: t = {t} violates t > l_suff/(1-gamma)^2 = {lo:.3}"
        ));
    }
    let n = inputs.entry_count();
    if t >= n {
        return Err(domain!("nmax_multi: t = {t} must be below N = {n}"));
    }
    if variant == Variant::EllOne && inputs.entries_per_key != 1 {
        return Err(domain!(
            "nmax_multi: the single-entry form needs ell = 1, got {}",
            inputs.entries_per_key
        ));
    }
    let x = inputs.key_fraction()?;
    let raw = multi_raw(inputs, x, t as f64, variant);
    Ok(MeritResult::new(
        raw,
        epsilon_star_real(inputs.l_suff as f64, t as f64),
        t,
        variant,
    ))
}

fn multi_t_floor(inputs: &MeritInputs) -> f64 {
    let g = 1.0 - inputs.gamma;
    inputs.l_suff as f64 / (g * g)
}

fn multi_raw(inputs: &MeritInputs, key_fraction: f64, t: f64, variant: Variant) -> f64 {
    let l = inputs.l_suff as f64;
    let ell = inputs.entries_per_key as f64;
    let eps = epsilon_star_real(l, t);
    match variant {
        Variant::Exact => {
            let pop = inputs.entry_count() as f64 - t;
            libm::log(eps / key_fraction) / (-ell * libm::log1p(-1.0 / pop))
        }
        Variant::Approximation => {
            let m_over_k = inputs.blob_bits as f64 / inputs.key_bits as f64;
            (m_over_k - t / ell) * libm::log(eps / key_fraction)
        }
        Variant::EllOne => {
            let m_over_k = inputs.blob_bits as f64 / inputs.key_bits as f64;
            (libm::log(eps) + libm::log(1.0 / inputs.gamma)) / -libm::log1p(-1.0 / (m_over_k - t))
        }
    }
}

fn canonical_multi_variant(ell: u32) -> Variant {
    if ell == 1 {
        Variant::EllOne
    } else {
        Variant::Exact
    }
}

/// Divisors of `k` in increasing order.
pub fn divisors(k: u32) -> Vec<u32> {
    (1..=k).filter(|d| k % d == 0).collect()
}

/// Best single-use `ell` among the divisors of `k`; ties go to the
/// smaller `ell`.
pub fn optimize_ell_single(inputs: &MeritInputs) -> Result<(u32, MeritResult)> {
    let mut best: Option<(u32, MeritResult)> = None;
    for ell in divisors(inputs.key_bits) {
        let r = nmax_single(&inputs.with_ell(ell))?;
        if best.is_none_or(|(_, b)| r.raw > b.raw) {
            best = Some((ell, r));
        }
    }
    best.ok_or_else(|| domain!("optimize_ell_single: k has no divisors"))
}

/// Coarse grid size for the `t` search.
pub const T_GRID_POINTS: usize = 200;

/// Feasible integer range `(l_suff/(1-gamma)^2, N)` for multi-use `t`.
pub fn multi_t_range(inputs: &MeritInputs) -> Result<(u64, u64)> {
    inputs.validate()?;
    let lo = libm::floor(multi_t_floor(inputs)) as u64 + 1;
    let hi = inputs.entry_count().saturating_sub(1);
    if lo > hi {
        return Err(domain!(
            "no feasible t: l_suff/(1-gamma)^2 = {:.1} leaves nothing below N = {}",
            multi_t_floor(inputs),
            inputs.entry_count()
        ));
    }
    Ok((lo, hi))
}

/// Best multi-use `t` at the given `ell` (the `t` in `inputs` is ignored).
///
/// A 200-point grid locates the peak, golden-section search narrows the
/// bracket, and a final integer scan picks `t`; ties go to the smaller `t`.
pub fn optimize_t_multi(inputs: &MeritInputs) -> Result<(u64, MeritResult)> {
    let (lo, hi) = multi_t_range(inputs)?;
    let x = inputs.key_fraction()?;
    let variant = canonical_multi_variant(inputs.entries_per_key);
    let f = |t: f64| multi_raw(inputs, x, t, variant);

    let span = hi - lo;
    let points = (T_GRID_POINTS as u64).min(span + 1);
    let grid: Vec<u64> = (0..points)
        .map(|j| lo + if points == 1 { 0 } else { span * j / (points - 1) })
        .collect();
    let mut b = 0;
    for (j, &t) in grid.iter().enumerate() {
        if f(t as f64) > f(grid[b] as f64) {
            b = j;
        }
    }
    let mut a = grid[b.saturating_sub(1)] as f64;
    let mut c = grid[(b + 1).min(grid.len() - 1)] as f64;

    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = c - phi * (c - a);
    let mut x2 = a + phi * (c - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while c - a > 4.0 {
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - phi * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (c - a);
            f2 = f(x2);
        }
    }

    let from = (libm::floor(a) as u64).max(lo);
    let to = (libm::ceil(c) as u64).min(hi);
    let mut best_t = from;
    for t in from..=to {
        if f(t as f64) > f(best_t as f64) {
            best_t = t;
        }
    }
    let r = nmax_multi(&inputs.with_t(best_t), variant)?;
    Ok((best_t, r))
}

/// Best multi-use `ell` among the divisors of `k` at the fixed `t` in
/// `inputs`; ties go to the smaller `ell`.
pub fn optimize_ell_multi(inputs: &MeritInputs) -> Result<(u32, MeritResult)> {
    let mut best: Option<(u32, MeritResult)> = None;
    for ell in divisors(inputs.key_bits) {
        let probe = inputs.with_ell(ell);
        let Some(t) = probe.tracing_count else {
            return Err(domain!("optimize_ell_multi: t must be given"));
        };
        if t >= probe.entry_count() {
            continue;
        }
        let r = nmax_multi(&probe, Variant::Exact)?;
        if best.is_none_or(|(_, b)| r.raw > b.raw) {
            best = Some((ell, r));
        }
    }
    best.ok_or_else(|| domain!("optimize_ell_multi: no divisor of k admits t"))
}

/// Joint multi-use optimum over `ell` (divisors of `k`) and `t`.
pub fn optimize_multi(inputs: &MeritInputs) -> Result<(u32, u64, MeritResult)> {
    let mut best: Option<(u32, u64, MeritResult)> = None;
    for ell in divisors(inputs.key_bits) {
        let Ok((t, r)) = optimize_t_multi(&inputs.with_ell(ell)) else {
            continue;
        };
        if best.is_none_or(|(_, _, b)| r.raw > b.raw) {
            best = Some((ell, t, r));
        }
    }
    best.ok_or_else(|| domain!("optimize_multi: no feasible (ell, t)"))
}

/// Lower bound on the multi-use failure probability after `uses` rounds:
/// the binomial tail evaluated at the expected surviving erasure fraction
/// `eps * (1 - 1/(N-t))^(uses*ell)`.
pub fn fail_probability_bound(
    entries_per_key: u64,
    missing_threshold: u64,
    epsilon: f64,
    population: u64,
    uses: u64,
) -> Result<f64> {
    if population == 0 {
        return Err(domain!("fail_probability_bound: empty population"));
    }
    let r = (uses as f64) * entries_per_key as f64;
    let p = epsilon * libm::exp(r * libm::log1p(-1.0 / population as f64));
    bino_tail(entries_per_key, missing_threshold, p)
}

/// Multi-use failure probability averaged over the exact distribution of
/// the number of revealed indices.
pub fn fail_probability_exact(
    entries_per_key: u64,
    missing_threshold: u64,
    epsilon: f64,
    population: u64,
    uses: u64,
) -> Result<f64> {
    let stats = visit_stats(population, uses * entries_per_key)?;
    let mut total = 0.0;
    for (s, &w) in stats.pmf.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let p = epsilon * (population - s as u64) as f64 / population as f64;
        total += w * bino_tail(entries_per_key, missing_threshold, p)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// One row of a coalition-size scan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossoverRow {
    pub coalition: u32,
    pub l_suff: u64,
    /// Single-use with one-bit entries.
    pub nmax_single: f64,
    /// Multi-use with `ell = 1` at its best `t`; 0 when no `t` is feasible.
    pub nmax_multi: f64,
    pub t_multi: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossoverTable {
    pub rows: Vec<CrossoverRow>,
    /// Smallest coalition size at which single-use is strictly better.
    pub crossover: Option<u32>,
}

/// Compares both schemes over `coalitions`, sizing the code for each `c`.
pub fn crossover_scan(
    blob_bits: u64,
    key_bits: u32,
    hard_key_bits: u32,
    gamma: f64,
    users_over_false_positive: f64,
    coalitions: &[u32],
) -> Result<CrossoverTable> {
    if coalitions.is_empty() {
        return Err(domain!("crossover_scan: empty coalition range"));
    }
    let mut rows = Vec::with_capacity(coalitions.len());
    for &c in coalitions {
        let l_suff = sufficient_length(c, users_over_false_positive)?;
        let single = nmax_single_full_width(blob_bits, key_bits, hard_key_bits, gamma, l_suff)?;
        let multi_inputs = MeritInputs {
            blob_bits,
            key_bits,
            hard_key_bits,
            entries_per_key: 1,
            gamma,
            l_suff,
            tracing_count: None,
            mode: Mode::MultiUse,
        };
        let (nmax_multi, t_multi) = match optimize_t_multi(&multi_inputs) {
            Ok((t, r)) => (r.n_max, Some(t)),
            Err(_) => (0.0, None),
        };
        rows.push(CrossoverRow {
            coalition: c,
            l_suff,
            nmax_single: single.n_max,
            nmax_multi,
            t_multi,
        });
    }
    let crossover = rows
        .iter()
        .find(|r| r.nmax_single > r.nmax_multi)
        .map(|r| r.coalition);
    Ok(CrossoverTable { rows, crossover })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PAY_TV: f64 = (1u64 << 30) as f64;

    fn single(l_suff: u64, ell: u32) -> MeritInputs {
        MeritInputs::pay_tv(l_suff, ell, Mode::SingleUse)
    }

    fn multi(l_suff: u64, ell: u32, t: u64) -> MeritInputs {
        MeritInputs::pay_tv(l_suff, ell, Mode::MultiUse).with_t(t)
    }

    /// Binomial upper tail by forward pmf recurrence, independent of the
    /// log-space implementation.
    fn tail_by_recurrence(n: u64, a: u64, p: f64) -> f64 {
        let mut pmf = libm::pow(1.0 - p, n as f64);
        let mut tail = if a == 0 { pmf } else { 0.0 };
        for j in 1..=n {
            pmf *= (n - j + 1) as f64 / j as f64 * p / (1.0 - p);
            if j >= a {
                tail += pmf;
            }
        }
        tail
    }

    fn bisect_epsilon(n: u64, a: u64, gamma: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tail_by_recurrence(n, a, mid) < gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn epsilon_star_examples() {
        assert_eq!(epsilon_star(6600, 6600).unwrap(), 0.0);
        assert_eq!(epsilon_star(6600, 26400).unwrap(), 0.5);
        let e = epsilon_star(6566, 100_000).unwrap();
        assert!((e - 0.7437).abs() < 1e-4);
        // 30-digit evaluation: 0.7437579269...
        assert!((e - 0.743757927).abs() < 1e-9);
        assert!(epsilon_star(6600, 6599).is_err());
    }

    #[test]
    fn p_miss_examples() {
        assert_eq!(p_miss(0.3, 5000, 1000, 0).unwrap(), 0.3);
        assert_eq!(p_miss(0.3, 5000, 1000, 4000).unwrap(), 0.0);
        assert_eq!(p_miss(0.5, 1500, 500, 250).unwrap(), 0.375);
        assert!(p_miss(0.5, 1500, 500, 1001).is_err());
    }

    #[test]
    fn required_t_one_entry_full_key() {
        let mut inputs = single(5000, 1);
        inputs.hard_key_bits = 128;
        let g = 1.0 - inputs.gamma;
        let expect = libm::ceil(5000.0 / (g * g)) as u64;
        assert_eq!(required_t_single(&inputs).unwrap(), expect);
    }

    #[test]
    fn required_t_matches_bisection_oracle() {
        let eps = bisect_epsilon(128, 96, 0.1);
        let expect = libm::ceil(6566.0 / ((1.0 - eps) * (1.0 - eps))) as u64;
        assert_eq!(required_t_single(&single(6566, 128)).unwrap(), expect);
        // at that t the pirate's best erasure fraction fails with probability gamma
        let t = expect as f64;
        let star = 1.0 - libm::sqrt(6566.0 / t);
        assert!(tail_by_recurrence(128, 96, star) >= 0.1 * (1.0 - 1e-6));
    }

    #[test]
    fn required_t_ignores_blob_size() {
        let a = required_t_single(&single(6566, 64)).unwrap();
        let mut b = single(6566, 64);
        b.blob_bits = 1 << 30;
        assert_eq!(required_t_single(&b).unwrap(), a);
    }

    #[test]
    fn nmax_single_without_tracing_cost() {
        let r = nmax_single(&single(1, 128)).unwrap();
        assert!((r.n_max - 131072.0).abs() < 0.1);
        assert!(r.n_max < 131072.0);
    }

    #[test]
    fn nmax_single_pay_tv_magnitude() {
        let l = sufficient_length(8, PAY_TV).unwrap();
        let r = nmax_single(&single(l, 128)).unwrap();
        assert!((1.0e5..=1.32e5).contains(&r.n_max));
        let eps = bisect_epsilon(128, 96, 0.1);
        let oracle = 131072.0 - l as f64 / 128.0 / ((1.0 - eps) * (1.0 - eps));
        assert!((r.n_max - oracle).abs() < 1e-6 * oracle);
        assert!(!r.clamped);
    }

    #[test]
    fn full_width_form_agrees() {
        let mut rng = crate::rng::fast(b"eq9", "draws", 0);
        use rand::Rng;
        for _ in 0..20 {
            let k = [8u32, 16, 32, 64, 128][rng.random_range(0..5)];
            let k0 = rng.random_range(1..=k);
            let gamma = rng.random_range(0.01..0.9);
            let l = rng.random_range(1..200_000);
            let m = (k as u64) << rng.random_range(8..30);
            let mut inputs = single(l, k);
            inputs.blob_bits = m;
            inputs.key_bits = k;
            inputs.hard_key_bits = k0;
            inputs.gamma = gamma;
            let a = nmax_single(&inputs).unwrap();
            let b = nmax_single_full_width(m, k, k0, gamma, l).unwrap();
            assert!((a.raw - b.raw).abs() <= 1e-12 * a.raw.abs().max(1.0), "{a:?} vs {b:?}");
            assert_eq!(a.t_used, b.t_used);
        }
    }

    #[test]
    fn negative_values_clamp_and_flag() {
        let r = nmax_single(&single(10_000_000, 128)).unwrap();
        assert_eq!(r.n_max, 0.0);
        assert!(r.clamped && r.raw < 0.0);
    }

    #[test]
    fn multi_near_the_constraint_boundary() {
        let l = 6561;
        let t = libm::floor(l as f64 / 0.81) as u64 + 1;
        let r = nmax_multi(&multi(l, 1, t), Variant::EllOne).unwrap();
        assert!(r.n_max < 1e-3 * 131072.0, "{r:?}");
        assert!(nmax_multi(&multi(l, 1, t - 1), Variant::EllOne).is_err());
    }

    #[test]
    fn single_entry_form_matches_exact() {
        let mut rng = crate::rng::fast(b"eq17", "draws", 0);
        use rand::Rng;
        let mut checked = 0;
        while checked < 20 {
            let l = rng.random_range(100..40_000);
            let mut inputs = multi(l, 1, 0);
            inputs.gamma = rng.random_range(0.02..0.5);
            let Ok((lo, hi)) = multi_t_range(&inputs) else { continue };
            let t = rng.random_range(lo..=hi.min(lo + 100_000));
            let inputs = inputs.with_t(t);
            let a = nmax_multi(&inputs, Variant::Exact).unwrap();
            let b = nmax_multi(&inputs, Variant::EllOne).unwrap();
            assert!((a.raw - b.raw).abs() <= 1e-9 * a.raw.abs().max(1e-300), "{a:?} vs {b:?}");
            checked += 1;
        }
    }

    #[test]
    fn single_entry_form_needs_ell_one() {
        assert!(nmax_multi(&multi(5000, 2, 40_000), Variant::EllOne).is_err());
    }

    #[test]
    fn approximation_error_is_order_inverse_population() {
        let mut rng = crate::rng::fast(b"eq16", "draws", 0);
        use rand::Rng;
        let mut checked = 0;
        while checked < 100 {
            let ell = [1u32, 2, 4, 8, 16, 32, 64, 128][rng.random_range(0..8)];
            let mut inputs = multi(rng.random_range(100..50_000), ell, 0);
            inputs.blob_bits = 1 << rng.random_range(14..26);
            let Ok((lo, hi)) = multi_t_range(&inputs) else { continue };
            let t = rng.random_range(lo..=hi);
            let pop = inputs.entry_count() - t;
            if pop < 1000 {
                continue;
            }
            let inputs = inputs.with_t(t);
            let exact = nmax_multi(&inputs, Variant::Exact).unwrap().raw;
            let approx = nmax_multi(&inputs, Variant::Approximation).unwrap().raw;
            if exact == 0.0 {
                continue;
            }
            assert!(((exact - approx) / exact).abs() <= 5.0 / pop as f64);
            checked += 1;
        }
    }

    #[test]
    fn single_use_prefers_one_bit_entries() {
        for l in [5000, 40_000, 80_000] {
            let (ell, best) = optimize_ell_single(&single(l, 1)).unwrap();
            assert_eq!(ell, 128, "l_suff = {l}");
            for d in divisors(128) {
                assert!(nmax_single(&single(l, d)).unwrap().raw <= best.raw);
            }
        }
    }

    #[test]
    fn single_use_known_curve_values() {
        // reference values from an independent high-precision evaluation
        let cases = [(5000, 1, 124_899.0), (5000, 128, 130_654.0), (80_000, 1, 32_307.0), (80_000, 128, 124_386.0)];
        for (l, ell, want) in cases {
            let got = nmax_single(&single(l, ell)).unwrap().n_max;
            assert!((got - want).abs() < 1.0, "l={l} ell={ell}: {got}");
        }
    }

    #[test]
    fn multi_use_prefers_one_entry_at_fixed_t() {
        for (l, t) in [(5000, 40_000), (20_000, 50_000)] {
            let (ell, r) = optimize_ell_multi(&multi(l, 1, t)).unwrap();
            assert_eq!(ell, 1);
            assert!(!r.clamped);
        }
        // reference values from an independent high-precision evaluation
        let r = nmax_multi(&multi(5000, 1, 40_000), Variant::Exact).unwrap();
        assert!((r.n_max - 169_969.0).abs() < 1.0, "{r:?}");
        let r = nmax_multi(&multi(5000, 64, 40_000), Variant::Exact).unwrap();
        assert!(r.clamped && (r.raw + 4154.0).abs() < 1.0, "{r:?}");
    }

    #[test]
    fn t_optimizer_beats_dense_scan_and_random_search() {
        let l = sufficient_length(8, PAY_TV).unwrap();
        let inputs = multi(l, 1, 0);
        let (t_star, best) = optimize_t_multi(&inputs).unwrap();
        let (lo, hi) = multi_t_range(&inputs).unwrap();
        let mut scan_best = f64::MIN;
        for t in (lo..=hi).step_by(7) {
            scan_best = scan_best.max(nmax_multi(&inputs.with_t(t), Variant::EllOne).unwrap().raw);
        }
        assert!(best.raw >= scan_best);
        assert_eq!(best.t_used, t_star);
        for dt in [1u64, 2, 5] {
            assert!(nmax_multi(&inputs.with_t(t_star - dt), Variant::EllOne).unwrap().raw <= best.raw);
            assert!(nmax_multi(&inputs.with_t(t_star + dt), Variant::EllOne).unwrap().raw <= best.raw);
        }

        let (_, _, joint) = optimize_multi(&inputs).unwrap();
        let mut rng = crate::rng::fast(b"random-search", "draws", 0);
        use rand::Rng;
        let mut drawn = 0;
        while drawn < 50 {
            let ell = divisors(128)[rng.random_range(0..8)];
            let probe = inputs.with_ell(ell);
            let Ok((lo, hi)) = multi_t_range(&probe) else { continue };
            let t = rng.random_range(lo..=hi);
            let r = nmax_multi(&probe.with_t(t), Variant::Exact).unwrap();
            assert!(joint.raw >= r.raw);
            drawn += 1;
        }
    }

    #[test]
    fn multi_use_curve_is_unimodal_in_t() {
        for c in [2, 4, 8, 16, 25] {
            let inputs = multi(sufficient_length(c, PAY_TV).unwrap(), 1, 0);
            let (lo, hi) = multi_t_range(&inputs).unwrap();
            let values: Vec<f64> = (0..400u64)
                .map(|j| lo + (hi - lo) * j / 399)
                .map(|t| nmax_multi(&inputs.with_t(t), Variant::EllOne).unwrap().raw)
                .collect();
            let peak = values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!(values[..=peak].windows(2).all(|w| w[1] >= w[0]), "c = {c}");
            assert!(values[peak..].windows(2).all(|w| w[1] <= w[0]), "c = {c}");
        }
    }

    #[test]
    fn crossover_between_small_and_large_coalitions() {
        let cs: Vec<u32> = (2..=30).collect();
        let table = crossover_scan(1 << 24, 128, 96, 0.1, PAY_TV, &cs).unwrap();
        let first = table.rows.first().unwrap();
        let last = table.rows.last().unwrap();
        assert!(first.nmax_multi > first.nmax_single);
        assert!(last.nmax_single > last.nmax_multi);
        let c = table.crossover.unwrap();
        assert!((2..=30).contains(&c));
        let row = table.rows.iter().find(|r| r.coalition == c).unwrap();
        assert!(row.nmax_single > row.nmax_multi);
        let prev = table.rows.iter().find(|r| r.coalition == c - 1).unwrap();
        assert!(prev.nmax_multi >= prev.nmax_single);
        assert!(crossover_scan(1 << 24, 128, 96, 0.1, PAY_TV, &[]).is_err());
    }

    #[test]
    fn infeasible_multi_reports_zero() {
        let table = crossover_scan(1 << 24, 128, 96, 0.1, PAY_TV, &[40]).unwrap();
        assert_eq!(table.rows[0].nmax_multi, 0.0);
        assert_eq!(table.rows[0].t_multi, None);
    }

    #[test]
    fn jensen_bound_is_below_exact_average() {
        // the bound uses the mean revealed count; the tail is convex in the
        // miss probability below a/ell, so averaging first underestimates
        for (ell, a, eps) in [(4u64, 3u64, 0.6), (8, 6, 0.7), (2, 2, 0.9), (1, 1, 0.5)] {
            for uses in [0u64, 5, 20, 60] {
                let bound = fail_probability_bound(ell, a, eps, 200, uses).unwrap();
                let exact = fail_probability_exact(ell, a, eps, 200, uses).unwrap();
                assert!(bound <= exact + 1e-12, "ell={ell} uses={uses}: {bound} > {exact}");
                if ell == 1 {
                    assert!((bound - exact).abs() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn single_use_monotone(l in 1u64..200_000, dl in 0u64..50_000, ell_ix in 0usize..8, shift in 18u32..28) {
            let ell = divisors(128)[ell_ix];
            let base = nmax_single(&single(l, ell)).unwrap();
            prop_assert!(nmax_single(&single(l + dl, ell)).unwrap().raw <= base.raw);
            let mut bigger = single(l, ell);
            bigger.blob_bits = 1 << shift;
            let mut smaller = bigger;
            smaller.blob_bits = 1 << (shift - 1);
            prop_assert!(nmax_single(&bigger).unwrap().raw > nmax_single(&smaller).unwrap().raw);
            prop_assert!(base.n_max >= 0.0);
        }

        #[test]
        fn multi_use_nonnegative(l in 1u64..60_000, ell_ix in 0usize..8, frac in 0.0f64..1.0) {
            let inputs = multi(l, divisors(128)[ell_ix], 0);
            if let Ok((lo, hi)) = multi_t_range(&inputs) {
                let t = lo + ((hi - lo) as f64 * frac) as u64;
                for v in [Variant::Exact, Variant::Approximation] {
                    prop_assert!(nmax_multi(&inputs.with_t(t), v).unwrap().n_max >= 0.0);
                }
            }
        }
    }
}
