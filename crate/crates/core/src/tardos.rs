//! Binary bias-based (Tardos) fingerprinting code.
//!
//! Each tracing position `i` gets a secret bias `p_i` drawn from the arcsine
//! density on `(delta, 1 - delta)` and two distinct `w`-bit alphabet values.
//! User `u` receives the value selected by codeword bit `z_u,i ~ Bern(p_i)`.
//! A pirate copy is traced with the symmetric score, summed over the
//! positions where the pirate kept one of the two alphabet values.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::bits::{mask_to_width, EntryValue};
use crate::error::{domain, Error, Result};
use crate::rng;
use crate::scheme::{EntrySource, SchemeParams};

/// `ceil((pi^2 / 2) c^2 ln(U / P_FP))`: sufficient binary code length for
/// coalitions of size `c`.
pub fn sufficient_length(coalition: u32, users_over_false_positive: f64) -> Result<u64> {
    if coalition == 0 {
        return Err(domain!("sufficient_length: coalition size must be positive"));
    }
    if !(users_over_false_positive > 1.0) {
        return Err(domain!(
            "sufficient_length: U/P_FP = {users_over_false_positive} must exceed 1"
        ));
    }
    let c = coalition as f64;
    let pi = core::f64::consts::PI;
    Ok(libm::ceil(pi * pi / 2.0 * c * c * libm::log(users_over_false_positive)) as u64)
}

/// `ceil(base / (1 - epsilon)^2)`: code length needed when a fraction
/// `epsilon` of the undetectable positions is erased.
pub fn erasure_adjusted_length(base: u64, epsilon: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(domain!(
            "erasure_adjusted_length: epsilon = {epsilon} outside [0, 1)"
        ));
    }
    let keep = 1.0 - epsilon;
    Ok(libm::ceil(base as f64 / (keep * keep)) as u64)
}

/// The operator's tracing secret.
#[derive(Debug, Clone, PartialEq)]
pub struct TracingCode {
    entry_count: u64,
    entry_width: u32,
    users: u32,
    cutoff: f64,
    positions: Vec<u64>,
    biases: Vec<f64>,
    alphabet: Vec<[EntryValue; 2]>,
    codewords: Vec<u64>,
}

impl TracingCode {
    /// Assembles a code from stored parts, checking every invariant.
    /// `codewords` holds one row of `ceil(t/64)` words per user.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        entry_count: u64,
        entry_width: u32,
        users: u32,
        cutoff: f64,
        positions: Vec<u64>,
        biases: Vec<f64>,
        alphabet: Vec<[EntryValue; 2]>,
        codewords: Vec<u64>,
    ) -> Result<Self> {
        let t = positions.len();
        let bad = |m: alloc::string::String| Err(Error::Shape(m));
        if biases.len() != t || alphabet.len() != t {
            return bad(format!(
                "code has {t} positions but {} biases and {} alphabet pairs",
                biases.len(),
                alphabet.len()
            ));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("tracing positions must be strictly increasing".into());
        }
        if positions.last().is_some_and(|&p| p >= entry_count) {
            return bad("tracing position outside the blob".into());
        }
        if let Some(p) = biases.iter().find(|&&p| !(p > cutoff && p < 1.0 - cutoff)) {
            return bad(format!("bias {p} outside ({cutoff}, {})", 1.0 - cutoff));
        }
        for pair in &alphabet {
            if pair[0] == pair[1]
                || mask_to_width(pair[0], entry_width) != pair[0]
                || mask_to_width(pair[1], entry_width) != pair[1]
            {
                return bad("alphabet pair must hold two distinct w-bit values".into());
            }
        }
        let stride = t.div_ceil(64);
        if codewords.len() != stride * users as usize {
            return bad(format!(
                "codeword table has {} words, expected {}",
                codewords.len(),
                stride * users as usize
            ));
        }
        Ok(Self {
            entry_count,
            entry_width,
            users,
            cutoff,
            positions,
            biases,
            alphabet,
            codewords,
        })
    }

    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    pub fn entry_width(&self) -> u32 {
        self.entry_width
    }

    pub fn users(&self) -> u32 {
        self.users
    }

    /// Bias cutoff `delta`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Number of tracing positions `t`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Blob indices of the tracing positions, ascending.
    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// `(B0, B1)` for each tracing position.
    pub fn alphabet(&self) -> &[[EntryValue; 2]] {
        &self.alphabet
    }

    /// Raw codeword table, one row of `ceil(t/64)` words per user.
    pub fn codeword_words(&self) -> &[u64] {
        &self.codewords
    }

    fn stride(&self) -> usize {
        self.positions.len().div_ceil(64)
    }

    /// Codeword bit `z_u,i`.
    #[inline]
    pub fn bit(&self, user: u32, i: usize) -> bool {
        let row = user as usize * self.stride();
        (self.codewords[row + i / 64] >> (i % 64)) & 1 == 1
    }

    /// Value user `u` holds at tracing position `i`.
    #[inline]
    pub fn user_value(&self, user: u32, i: usize) -> EntryValue {
        self.alphabet[i][self.bit(user, i) as usize]
    }

    /// Index into [`Self::positions`] of blob index `index`, if it traces.
    pub fn rank_of(&self, index: u64) -> Option<usize> {
        self.positions.binary_search(&index).ok()
    }
}

/// Draws a tracing code for `params`, deterministically from `seed`.
pub fn generate_code(params: &SchemeParams, seed: &[u8]) -> Result<TracingCode> {
    let n = params.entry_count;
    let t = params.tracing_count;
    if t > n {
        return Err(domain!("generate_code: t = {t} exceeds N = {n}"));
    }
    if params.users == 0 {
        return Err(domain!("generate_code: at least one user is required"));
    }
    let width = params.entry_width;
    let cutoff = params.bias_cutoff();

    let mut pos_rng = rng::chacha(seed, "tardos/positions", 0);
    // Floyd's algorithm: t distinct indices, uniform over subsets
    let mut chosen = BTreeSet::new();
    for j in n - t..n {
        let r = pos_rng.random_range(0..=j);
        if !chosen.insert(r) {
            chosen.insert(j);
        }
    }
    let positions: Vec<u64> = chosen.into_iter().collect();

    let mut bias_rng = rng::chacha(seed, "tardos/biases", 0);
    let r_min = libm::asin(libm::sqrt(cutoff));
    let r_max = core::f64::consts::FRAC_PI_2 - r_min;
    let biases: Vec<f64> = (0..t)
        .map(|_| loop {
            let r = bias_rng.random_range(r_min..r_max);
            let s = libm::sin(r);
            let p = s * s;
            if p > cutoff && p < 1.0 - cutoff {
                break p;
            }
        })
        .collect();

    let mut alpha_rng = rng::chacha(seed, "tardos/alphabet", 0);
    let draw_value = |rng: &mut dyn RngCore| {
        let v = (rng.next_u64() as u128) | ((rng.next_u64() as u128) << 64);
        mask_to_width(v, width)
    };
    let alphabet: Vec<[EntryValue; 2]> = (0..t)
        .map(|_| {
            let first = draw_value(&mut alpha_rng);
            let second = loop {
                let v = draw_value(&mut alpha_rng);
                if v != first {
                    break v;
                }
            };
            [first, second]
        })
        .collect();

    let stride = (t as usize).div_ceil(64);
    let mut codewords = vec![0u64; stride * params.users as usize];
    for u in 0..params.users as usize {
        let mut cw_rng = rng::chacha(seed, "tardos/codeword", u as u64);
        let row = &mut codewords[u * stride..(u + 1) * stride];
        for (i, &p) in biases.iter().enumerate() {
            if cw_rng.random::<f64>() < p {
                row[i / 64] |= 1 << (i % 64);
            }
        }
    }

    TracingCode::from_parts(n, width, params.users, cutoff, positions, biases, alphabet, codewords)
}

/// Per-position contribution to a user's accusation score.
pub trait ScoreFunction {
    /// Score for a pirate symbol `symbol` against a user bit at bias `bias`.
    fn score(&self, symbol: bool, user_bit: bool, bias: f64) -> f64;

    /// Largest `|score|` at bias `bias`, used by the analytic threshold.
    fn bound(&self, bias: f64) -> f64;
}

/// Symmetric score: a match on symbol 1 earns `sqrt((1-p)/p)`, a mismatch
/// costs `sqrt(p/(1-p))`, mirrored for symbol 0. Innocent scores have mean 0
/// and unit variance per position.
#[derive(Debug, Clone, Copy, Default)]
pub struct SymmetricScore;

impl ScoreFunction for SymmetricScore {
    #[inline]
    fn score(&self, symbol: bool, user_bit: bool, p: f64) -> f64 {
        let rare_one = libm::sqrt((1.0 - p) / p);
        let rare_zero = libm::sqrt(p / (1.0 - p));
        match (symbol, user_bit) {
            (true, true) => rare_one,
            (true, false) => -rare_zero,
            (false, false) => rare_zero,
            (false, true) => -rare_one,
        }
    }

    fn bound(&self, p: f64) -> f64 {
        libm::sqrt((1.0 - p) / p).max(libm::sqrt(p / (1.0 - p)))
    }
}

/// How the accusation threshold is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    /// Bernstein bound on the innocent score tail at level `P_FP / U`,
    /// using the number of scored positions.
    Analytic,
    /// Empirical `1 - P_FP/U` quantile of simulated innocent scores.
    Calibrated(Calibration),
    Fixed(f64),
}

/// Monte Carlo threshold calibration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub seed: Vec<u8>,
    /// Simulated innocents per unit of `U / P_FP`.
    pub oversampling: f64,
    pub min_samples: usize,
}

impl Calibration {
    pub fn new(seed: &[u8]) -> Self {
        Self {
            seed: seed.to_vec(),
            oversampling: 8.0,
            min_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccusationConfig {
    pub policy: ThresholdPolicy,
    /// Overall false-accusation probability `P_FP`.
    pub false_positive: f64,
}

/// Classification of the pirate's value at one tracing position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Symbol(bool),
    Erased,
    /// A value outside the position's alphabet.
    SymbolError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccusationReport {
    /// Score of every user, indexed by user id.
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Users with `score > threshold`, ascending.
    pub accused: Vec<u32>,
    /// Erased tracing positions over all tracing positions.
    pub erasure_fraction: f64,
    /// Blob indices of tracing positions holding a symbol error.
    pub symbol_error_positions: Vec<u64>,
    /// Tracing positions that entered the scores.
    pub scored_positions: u64,
}

/// Classifies the pirate's value at every tracing position.
pub fn observe<S: EntrySource + ?Sized>(code: &TracingCode, pirate: &S) -> Result<Vec<Observation>> {
    if pirate.entry_count() != code.entry_count() {
        return Err(Error::Shape(format!(
            "pirate blob has {} entries, code expects {}",
            pirate.entry_count(),
            code.entry_count()
        )));
    }
    if pirate.entry_width() != code.entry_width() {
        return Err(Error::Shape(format!(
            "pirate blob has {}-bit entries, code expects {}",
            pirate.entry_width(),
            code.entry_width()
        )));
    }
    Ok(code
        .positions()
        .iter()
        .zip(code.alphabet())
        .map(|(&index, pair)| match pirate.lookup(index) {
            None => Observation::Erased,
            Some(v) if v == pair[0] => Observation::Symbol(false),
            Some(v) if v == pair[1] => Observation::Symbol(true),
            Some(_) => Observation::SymbolError,
        })
        .collect())
}

/// Traces `pirate` with the symmetric score.
pub fn accuse<S: EntrySource + ?Sized>(
    code: &TracingCode,
    pirate: &S,
    config: &AccusationConfig,
) -> Result<AccusationReport> {
    accuse_with(code, pirate, config, &SymmetricScore)
}

/// Traces `pirate` with a caller-chosen score function.
pub fn accuse_with<S: EntrySource + ?Sized, F: ScoreFunction>(
    code: &TracingCode,
    pirate: &S,
    config: &AccusationConfig,
    score_fn: &F,
) -> Result<AccusationReport> {
    if !(config.false_positive > 0.0 && config.false_positive < 1.0) {
        return Err(domain!("accuse: P_FP = {} outside (0, 1)", config.false_positive));
    }
    let observations = observe(code, pirate)?;
    let mut scored: Vec<(usize, bool)> = Vec::new();
    let mut erased = 0u64;
    let mut symbol_errors = Vec::new();
    for (i, obs) in observations.iter().enumerate() {
        match *obs {
            Observation::Symbol(y) => scored.push((i, y)),
            Observation::Erased => erased += 1,
            Observation::SymbolError => symbol_errors.push(code.positions()[i]),
        }
    }

    let biases = code.biases();
    let scores: Vec<f64> = (0..code.users())
        .map(|u| {
            scored
                .iter()
                .map(|&(i, y)| score_fn.score(y, code.bit(u, i), biases[i]))
                .sum()
        })
        .collect();

    let level = config.false_positive / code.users() as f64;
    let threshold = match &config.policy {
        ThresholdPolicy::Fixed(z) => *z,
        ThresholdPolicy::Analytic => {
            let bound = scored
                .iter()
                .map(|&(i, _)| score_fn.bound(biases[i]))
                .fold(0.0, f64::max);
            bernstein_threshold(scored.len() as f64, bound, -libm::log(level))
        }
        ThresholdPolicy::Calibrated(cal) => {
            let samples = libm::ceil(cal.oversampling / level).max(cal.min_samples as f64) as usize;
            calibrate(&scored, biases, score_fn, level, samples, &cal.seed)
        }
    };

    let accused = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(u, _)| u as u32)
        .collect();

    let t = code.len() as f64;
    Ok(AccusationReport {
        scores,
        threshold,
        accused,
        erasure_fraction: if code.is_empty() { 0.0 } else { erased as f64 / t },
        symbol_error_positions: symbol_errors,
        scored_positions: scored.len() as u64,
    })
}

/// Smallest `z` with `exp(-z^2 / (2 (m + b z / 3))) <= exp(-lambda)`.
fn bernstein_threshold(m: f64, bound: f64, lambda: f64) -> f64 {
    let a = bound * lambda / 3.0;
    a + libm::sqrt(a * a + 2.0 * m * lambda)
}

/// Empirical `1 - level` quantile of innocent scores: fresh codeword bits
/// are drawn at each scored position with the position's bias.
fn calibrate<F: ScoreFunction>(
    scored: &[(usize, bool)],
    biases: &[f64],
    score_fn: &F,
    level: f64,
    samples: usize,
    seed: &[u8],
) -> f64 {
    // fixed-point bias: bit is 1 iff a uniform 32-bit draw falls below it
    let cuts: Vec<u64> = scored
        .iter()
        .map(|&(i, _)| libm::floor(biases[i] * 4294967296.0) as u64)
        .collect();
    let if_zero: Vec<f64> = scored
        .iter()
        .map(|&(i, y)| score_fn.score(y, false, biases[i]))
        .collect();
    let delta: Vec<f64> = scored
        .iter()
        .zip(&if_zero)
        .map(|(&(i, y), z)| score_fn.score(y, true, biases[i]) - z)
        .collect();
    let base: f64 = if_zero.iter().sum();

    // Samples run in blocks with positions in the outer loop, so the inner
    // loop is a branch-free select-and-add over independent accumulators.
    // A bit is set iff a 16-bit draw falls below the upper half of its
    // 32-bit cut; a tie is settled by a second 16-bit draw against the
    // lower half, which keeps the probability exact at 32-bit resolution.
    const BLOCK: usize = 256;
    let mut rng = rng::fast(seed, "tardos/calibration", 0);
    let mut ties = rng::fast(seed, "tardos/calibration-ties", 0);
    let delta_bits: Vec<u64> = delta.iter().map(|d| d.to_bits()).collect();
    let mut draws = Vec::with_capacity(samples.div_ceil(BLOCK) * BLOCK);
    let mut acc = [0.0f64; BLOCK];
    let mut r16 = [0u16; BLOCK];
    while draws.len() < samples {
        acc.fill(base);
        for (&cut, &bits) in cuts.iter().zip(&delta_bits) {
            let hi = (cut >> 16) as u16;
            let lo = (cut & 0xffff) as u16;
            for chunk in r16.chunks_exact_mut(4) {
                let r = rng.next_u64();
                chunk[0] = r as u16;
                chunk[1] = (r >> 16) as u16;
                chunk[2] = (r >> 32) as u16;
                chunk[3] = (r >> 48) as u16;
            }
            let mut tie = false;
            for (a, &r) in acc.iter_mut().zip(&r16) {
                *a += f64::from_bits(bits & ((r < hi) as u64).wrapping_neg());
                tie |= r == hi;
            }
            if tie {
                for (a, &r) in acc.iter_mut().zip(&r16) {
                    if r == hi && (ties.next_u64() as u16) < lo {
                        *a += f64::from_bits(bits);
                    }
                }
            }
        }
        draws.extend_from_slice(&acc);
    }
    draws.truncate(samples);
    let rank = (libm::ceil((1.0 - level) * samples as f64) as usize).clamp(1, samples) - 1;
    let (_, q, _) = draws.select_nth_unstable_by(rank, f64::total_cmp);
    *q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{Mode, SchemeParams};
    use proptest::prelude::*;

    fn small(users: u32, t: u64) -> SchemeParams {
        let mut p = SchemeParams::new(1, 4096, 8, t, Mode::SingleUse);
        p.hard_key_bits = 6;
        p.users = users;
        p
    }

    #[test]
    fn sufficient_length_examples() {
        assert_eq!(sufficient_length(1, core::f64::consts::E).unwrap(), 5);
        assert_eq!(sufficient_length(2, (1u64 << 30) as f64).unwrap(), 411);
        // (pi^2/2) * 64 * 30 ln 2 = 6567.44..., evaluated at 50 digits
        assert_eq!(sufficient_length(8, (1u64 << 30) as f64).unwrap(), 6568);
        assert!(sufficient_length(8, 1.0).is_err());
        assert!(sufficient_length(0, 10.0).is_err());
    }

    #[test]
    fn erasure_adjusted_examples() {
        assert_eq!(erasure_adjusted_length(1000, 0.0).unwrap(), 1000);
        assert_eq!(erasure_adjusted_length(1000, 0.5).unwrap(), 4000);
        assert_eq!(erasure_adjusted_length(6566, 0.1).unwrap(), 8107);
        assert!(erasure_adjusted_length(10, 1.0).is_err());
    }

    #[test]
    fn length_scales_quadratically() {
        let x = (1u64 << 30) as f64;
        let a = sufficient_length(8, x).unwrap() as f64;
        let b = sufficient_length(16, x).unwrap() as f64;
        assert!((b / a - 4.0).abs() < 4.0 / a);
    }

    proptest! {
        #[test]
        fn sufficient_length_monotone(c in 1u32..64, x in 1.5f64..1e12, dc in 0u32..8, fx in 1.0f64..100.0) {
            let base = sufficient_length(c, x).unwrap();
            prop_assert!(sufficient_length(c + dc, x).unwrap() >= base);
            prop_assert!(sufficient_length(c, x * fx).unwrap() >= base);
        }
    }

    #[test]
    fn empty_code_is_valid() {
        let code = generate_code(&small(3, 0), b"seed").unwrap();
        assert!(code.is_empty());
        assert!(code.codeword_words().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let p = small(2, 100);
        let a = generate_code(&p, b"s").unwrap();
        assert_eq!(a, generate_code(&p, b"s").unwrap());
        assert_ne!(a, generate_code(&p, b"t").unwrap());
    }

    #[test]
    fn code_invariants_hold() {
        let mut p = SchemeParams::new(5, 2000, 4, 300, Mode::MultiUse);
        p.hard_key_bits = 12;
        p.users = 7;
        let code = generate_code(&p, b"inv").unwrap();
        assert_eq!(code.len(), 300);
        assert!(code.positions().windows(2).all(|w| w[0] < w[1]));
        assert!(code.positions().iter().all(|&i| i < 2000));
        let d = code.cutoff();
        assert!(code.biases().iter().all(|&b| b > d && b < 1.0 - d));
        assert!(code.alphabet().iter().all(|a| a[0] != a[1] && a[0] < 32 && a[1] < 32));
    }

    #[test]
    fn t_above_n_rejected() {
        let mut p = small(2, 10);
        p.tracing_count = 5000;
        assert!(generate_code(&p, b"x").is_err());
    }

    #[test]
    fn column_means_follow_biases() {
        let mut p = SchemeParams::new(1, 4096, 8, 1000, Mode::SingleUse);
        p.hard_key_bits = 6;
        p.users = 10_000;
        let code = generate_code(&p, b"columns").unwrap();
        let u = p.users as f64;
        let mut outside = 0;
        for (i, &b) in code.biases().iter().enumerate() {
            let ones = (0..p.users).filter(|&user| code.bit(user, i)).count() as f64;
            if (ones / u - b).abs() > 4.0 * libm::sqrt(b * (1.0 - b) / u) {
                outside += 1;
            }
        }
        // 4-sigma excursions occur with probability ~6e-5 per column
        assert!(outside <= 2, "{outside} columns outside 4 standard errors");
    }

    #[test]
    fn biases_follow_arcsine_law() {
        let mut p = small(1, 4000);
        p.coalition = 4;
        let code = generate_code(&p, b"arcsine").unwrap();
        // arcsine CDF restricted to (d, 1-d): F(x) = (asin sqrt x - r0) / (pi/2 - 2 r0)
        let r0 = libm::asin(libm::sqrt(code.cutoff()));
        let cdf = |x: f64| (libm::asin(libm::sqrt(x)) - r0) / (core::f64::consts::FRAC_PI_2 - 2.0 * r0);
        let mut sorted = code.biases().to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (cdf(x) - i as f64 / n).abs().max((cdf(x) - (i + 1) as f64 / n).abs()))
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at alpha = 0.001
        assert!(ks < 1.95 / libm::sqrt(n), "KS statistic {ks}");
    }

    struct Fake {
        width: u32,
        values: Vec<Option<EntryValue>>,
    }

    impl EntrySource for Fake {
        fn entry_count(&self) -> u64 {
            self.values.len() as u64
        }
        fn entry_width(&self) -> u32 {
            self.width
        }
        fn lookup(&self, index: u64) -> Option<EntryValue> {
            self.values[index as usize]
        }
    }

    fn user_copy(code: &TracingCode, user: u32) -> Fake {
        let mut values = vec![Some(0); code.entry_count() as usize];
        for (i, &pos) in code.positions().iter().enumerate() {
            values[pos as usize] = Some(code.user_value(user, i));
        }
        Fake {
            width: code.entry_width(),
            values,
        }
    }

    fn analytic(p_fp: f64) -> AccusationConfig {
        AccusationConfig {
            policy: ThresholdPolicy::Analytic,
            false_positive: p_fp,
        }
    }

    #[test]
    fn all_erased_gives_no_evidence() {
        let code = generate_code(&small(5, 500), b"erase").unwrap();
        let mut pirate = user_copy(&code, 2);
        for &pos in code.positions() {
            pirate.values[pos as usize] = None;
        }
        let r = accuse(&code, &pirate, &analytic(1e-3)).unwrap();
        assert!(r.scores.iter().all(|&s| s == 0.0));
        assert!(r.accused.is_empty());
        assert_eq!(r.erasure_fraction, 1.0);
        assert_eq!(r.scored_positions, 0);
    }

    #[test]
    fn symbol_errors_are_recorded_not_scored() {
        let mut p = SchemeParams::new(3, 1000, 2, 50, Mode::SingleUse);
        p.hard_key_bits = 4;
        p.users = 3;
        let code = generate_code(&p, b"err").unwrap();
        let mut pirate = user_copy(&code, 0);
        let pos = code.positions()[7];
        let pair = code.alphabet()[7];
        let bad = (0..8).find(|v| *v != pair[0] && *v != pair[1]).unwrap();
        pirate.values[pos as usize] = Some(bad);
        let r = accuse(&code, &pirate, &analytic(1e-3)).unwrap();
        assert_eq!(r.symbol_error_positions, vec![pos]);
        assert_eq!(r.scored_positions, 49);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let code = generate_code(&small(2, 10), b"shape").unwrap();
        let pirate = Fake {
            width: 1,
            values: vec![Some(0); 100],
        };
        assert!(matches!(accuse(&code, &pirate, &analytic(0.1)), Err(Error::Shape(_))));
    }

    #[test]
    fn single_user_copy_is_traced() {
        let p_fp = 1.0 / 1024.0;
        let users = 64u32;
        let l = sufficient_length(1, users as f64 / p_fp).unwrap();
        let mut p = SchemeParams::new(1, 8192, 8, l, Mode::SingleUse);
        p.hard_key_bits = 6;
        p.users = users;
        p.coalition = 1;
        for s in 0..100u64 {
            let code = generate_code(&p, &s.to_le_bytes()).unwrap();
            let u = (s % users as u64) as u32;
            let cfg = AccusationConfig {
                policy: ThresholdPolicy::Calibrated(Calibration::new(&s.to_le_bytes())),
                false_positive: p_fp,
            };
            let r = accuse(&code, &user_copy(&code, u), &cfg).unwrap();
            assert_eq!(r.accused, vec![u], "seed {s}");
        }
    }

    #[test]
    fn analytic_threshold_bounds_innocent_scores() {
        // scores are sums of m bounded terms; the bound must sit above any
        // plausible innocent score yet below the guilty mean for long codes
        let mut p = small(200, 3000);
        p.coalition = 1;
        let code = generate_code(&p, b"bern").unwrap();
        let r = accuse(&code, &user_copy(&code, 5), &analytic(1e-3)).unwrap();
        assert_eq!(r.accused, vec![5]);
        let worst_innocent = (0..200)
            .filter(|&u| u != 5)
            .map(|u| r.scores[u])
            .fold(f64::MIN, f64::max);
        assert!(worst_innocent < r.threshold);
    }

    #[test]
    fn accused_are_exactly_those_above_threshold() {
        let code = generate_code(&small(40, 400), b"thr").unwrap();
        let pirate = user_copy(&code, 3);
        for z in [-5.0, 0.0, 3.0, 10.0, 1e9] {
            let cfg = AccusationConfig {
                policy: ThresholdPolicy::Fixed(z),
                false_positive: 0.01,
            };
            let r = accuse(&code, &pirate, &cfg).unwrap();
            let expect: Vec<u32> = (0..40).filter(|&u| r.scores[u as usize] > z).collect();
            assert_eq!(r.accused, expect);
        }
    }

    #[test]
    fn innocent_scores_have_zero_mean_unit_variance() {
        let mut p = small(2000, 1000);
        p.coalition = 2;
        let code = generate_code(&p, b"innocent").unwrap();
        // the pirate is user 0; everybody else is innocent
        let r = accuse(&code, &user_copy(&code, 0), &analytic(0.01)).unwrap();
        let innocent = &r.scores[1..];
        let n = innocent.len() as f64;
        let m = r.scored_positions as f64;
        let mean = innocent.iter().sum::<f64>() / n;
        // per-user variance is m, so the mean has standard error sqrt(m / n)
        assert!(mean.abs() < 4.0 * libm::sqrt(m / n), "mean {mean}");
        let var = innocent.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        assert!((var / m - 1.0).abs() < 0.15, "variance ratio {}", var / m);
    }

    #[test]
    fn calibrated_threshold_is_deterministic_and_sane() {
        let mut p = small(64, 800);
        p.coalition = 2;
        let code = generate_code(&p, b"cal").unwrap();
        let pirate = user_copy(&code, 9);
        let cfg = AccusationConfig {
            policy: ThresholdPolicy::Calibrated(Calibration::new(b"c")),
            false_positive: 0.01,
        };
        let a = accuse(&code, &pirate, &cfg).unwrap();
        assert_eq!(a, accuse(&code, &pirate, &cfg).unwrap());
        // the 1 - 1.6e-4 quantile of an approximately N(0, m) score
        let sd = libm::sqrt(a.scored_positions as f64);
        assert!(a.threshold > 2.5 * sd && a.threshold < 5.5 * sd, "{} vs sd {sd}", a.threshold);
        let analytic_z = accuse(&code, &pirate, &analytic(0.01)).unwrap().threshold;
        assert!(a.threshold < analytic_z);
    }

    #[test]
    fn bernstein_matches_its_defining_equation() {
        let (m, b, lambda) = (5000.0, 17.0, 12.0);
        let z = bernstein_threshold(m, b, lambda);
        let exponent = z * z / (2.0 * (m + b * z / 3.0));
        assert!((exponent - lambda).abs() < 1e-9);
    }
}
