//! Binomial tails, falling factorials, Stirling numbers of the second kind
//! and the occupancy statistics of repeated uniform index draws.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};

/// Rows up to this size are computed with exact integers before taking logs.
pub const EXACT_STIRLING_MAX_N: u64 = 64;

const INV_TAIL_MAX_ITERATIONS: usize = 200;
const INV_TAIL_TOLERANCE: f64 = 1e-12;

/// `ceil(a / b)` in exact integer arithmetic. Panics when `b == 0`.
pub fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Number of missing entries that leaves fewer than `hard_key_bits` known
/// key bits: `ceil(k0 / w)`.
pub fn missing_entries_threshold(hard_key_bits: u64, entry_width: u64) -> u64 {
    ceil_div(hard_key_bits, entry_width)
}

/// The same threshold written in terms of key size: `ceil(ell * k0 / k)`.
/// Coincides with [`missing_entries_threshold`] whenever `k = ell * w`.
pub fn scaled_missing_threshold(entries_per_key: u64, hard_key_bits: u64, key_bits: u64) -> u64 {
    ceil_div(entries_per_key * hard_key_bits, key_bits)
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Right tail of a binomial distribution,
/// `sum_{j=a}^{ell} C(ell, j) p^j (1-p)^(ell-j)`.
///
/// Terms are summed in log space from the requested side only, so the
/// result keeps full relative precision for `p` close to 0 or 1.
pub fn bino_tail(ell: u64, a: u64, p: f64) -> Result<f64> {
    if a > ell + 1 {
        return Err(domain!("bino_tail: a = {a} exceeds ell + 1 = {}", ell + 1));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain!("bino_tail: p = {p} outside [0, 1]"));
    }
    if a == 0 {
        return Ok(1.0);
    }
    if a == ell + 1 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let ln_p = libm::log(p);
    let ln_q = libm::log1p(-p);
    let ln_coeff = ln_binomial_row(ell);
    let log_term = |j: u64| ln_coeff(j) + j as f64 * ln_p + (ell - j) as f64 * ln_q;
    // the terms are unimodal with the peak at floor((ell+1)p); sum whichever
    // side of `a` excludes the peak so that a result near 1 loses no
    // relative precision and a result near 0 keeps all of it
    let mode = (((ell + 1) as f64 * p) as u64).min(ell);
    let (range, complement) = if a > mode {
        (a..=ell, false)
    } else {
        (0..=a - 1, true)
    };
    let anchor = if complement { a - 1 } else { a };
    let peak = log_term(anchor);
    let mut sum = 0.0;
    for j in range {
        sum += libm::exp(log_term(j) - peak);
    }
    let side = libm::exp(peak + libm::log(sum));
    let value = if complement { 1.0 - side } else { side };
    Ok(value.clamp(0.0, 1.0))
}

/// Returns `j -> ln C(n, j)`, exact up to rounding for `n <= 131` (where
/// every coefficient fits in a `u128`) and via log-gamma above.
fn ln_binomial_row(n: u64) -> impl Fn(u64) -> f64 {
    let exact: Option<Vec<f64>> = (n <= 131).then(|| {
        let mut row = Vec::with_capacity(n as usize + 1);
        let mut c: u128 = 1;
        for j in 0..=n {
            row.push(libm::log(c as f64));
            if j < n {
                // C(n, j+1) = C(n, j) (n - j) / (j + 1), split to avoid overflow
                let (d, m) = ((j + 1) as u128, (n - j) as u128);
                c = (c / d) * m + (c % d) * m / d;
            }
        }
        row
    });
    move |j| match &exact {
        Some(row) => row[j as usize],
        None => ln_binomial(n, j),
    }
}

/// Inverse of [`bino_tail`] in its probability argument.
///
/// Bisection on `[0, 1]`; stops once the tail matches `target` to within
/// `1e-12 * target` or the bracket can no longer be split.
pub fn inv_bino_tail(ell: u64, a: u64, target: f64) -> Result<f64> {
    if a == 0 {
        return Err(domain!("inv_bino_tail: a = 0 gives a constant tail"));
    }
    if a > ell {
        return Err(domain!("inv_bino_tail: a = {a} exceeds ell = {ell}"));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(domain!("inv_bino_tail: target {target} outside (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut f_lo, mut f_hi) = (0.0f64, 1.0f64);
    for _ in 0..INV_TAIL_MAX_ITERATIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = bino_tail(ell, a, mid)?;
        if (f - target).abs() <= INV_TAIL_TOLERANCE * target {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    Ok(if target - f_lo <= f_hi - target { lo } else { hi })
}

/// Falling factorial `x! / (x-k)!`, exactly; zero when `k > x`.
pub fn falling_factorial(x: u64, k: u64) -> BigUint {
    if k > x {
        return BigUint::zero();
    }
    (x - k + 1..=x).fold(BigUint::one(), |acc, f| acc * f)
}

/// `ln((x)_k)`; negative infinity when `k > x`.
pub fn ln_falling_factorial(x: u64, k: u64) -> f64 {
    if k > x {
        return f64::NEG_INFINITY;
    }
    if k == 0 {
        return 0.0;
    }
    if x <= EXACT_STIRLING_MAX_N {
        return big_ln(&falling_factorial(x, k));
    }
    ln_factorial(x) - ln_factorial(x - k)
}

/// Stirling number of the second kind `S(n, k)`, exactly.
pub fn stirling2(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    stirling2_row(n).swap_remove(k as usize)
}

/// The full row `S(n, 0..=n)` from `S(i,j) = j S(i-1,j) + S(i-1,j-1)`.
pub fn stirling2_row(n: u64) -> Vec<BigUint> {
    let n = n as usize;
    let mut row = vec![BigUint::zero(); n + 1];
    row[0] = BigUint::one();
    for i in 1..=n {
        for j in (1..=i).rev() {
            let carried = core::mem::take(&mut row[j]) * j as u64;
            row[j] = carried + &row[j - 1];
        }
        row[0] = BigUint::zero();
    }
    row
}

/// `ln S(n, k)` for one `k`.
pub fn ln_stirling2(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_stirling2_row(n, n)[k as usize]
}

/// `ln S(n, k)` for `k = 0..=k_max` (clamped to `n`).
///
/// Uses exact integers for `n <= 64`; above that the recurrence is run
/// directly in log space.
pub fn ln_stirling2_row(n: u64, k_max: u64) -> Vec<f64> {
    let k_max = k_max.min(n) as usize;
    if n <= EXACT_STIRLING_MAX_N {
        let mut row: Vec<f64> = stirling2_row(n).iter().map(big_ln).collect();
        row.truncate(k_max + 1);
        return row;
    }
    let mut row = vec![f64::NEG_INFINITY; k_max + 1];
    row[0] = 0.0;
    for i in 1..=n as usize {
        let top = i.min(k_max);
        for j in (1..=top).rev() {
            row[j] = log_add_exp(libm::log(j as f64) + row[j], row[j - 1]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row
}

fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    match x.to_f64() {
        Some(v) if v.is_finite() => libm::log(v),
        _ => {
            // shift down into f64 range first
            let bits = x.bits();
            let shift = bits - 1000;
            let head = (x >> shift).to_f64().unwrap_or(f64::MAX);
            libm::log(head) + shift as f64 * core::f64::consts::LN_2
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Distribution of the number of distinct positions hit by `draws`
/// independent uniform draws from `population` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitStats {
    pub population: u64,
    pub draws: u64,
    /// `pmf[s] = Pr[|visited| = s]` for `s = 0..=min(draws, population)`.
    pub pmf: Vec<f64>,
    /// `sum_s s * pmf[s]`.
    pub mean: f64,
}

/// Size cap for the exact distribution, in Stirling-table cells
/// (`draws * min(draws, population)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisitLimits {
    pub max_cells: u64,
}

impl Default for VisitLimits {
    fn default() -> Self {
        Self {
            max_cells: 50_000_000,
        }
    }
}

/// Closed-form expected number of visited positions,
/// `population * (1 - (1 - 1/population)^draws)`.
pub fn expected_visited(population: u64, draws: u64) -> f64 {
    if draws == 0 || population == 0 {
        return 0.0;
    }
    let pop = population as f64;
    pop * -libm::expm1(draws as f64 * libm::log1p(-1.0 / pop))
}

/// Exact visited-position distribution with the default size cap.
pub fn visit_stats(population: u64, draws: u64) -> Result<VisitStats> {
    visit_stats_with(population, draws, VisitLimits::default())
}

/// Exact visited-position distribution:
/// `Pr[s] = (population)_s * S(draws, s) / population^draws`.
pub fn visit_stats_with(population: u64, draws: u64, limits: VisitLimits) -> Result<VisitStats> {
    if population == 0 {
        return Err(domain!("visit_stats: population must be positive"));
    }
    let top = draws.min(population);
    let cells = draws.saturating_mul(top);
    if cells > limits.max_cells {
        return Err(Error::ResourceLimit(format!(
            "visit_stats: {cells} table cells exceed the cap of {}",
            limits.max_cells
        )));
    }
    let ln_s = ln_stirling2_row(draws, top);
    let ln_total = draws as f64 * libm::log(population as f64);
    let mut pmf = Vec::with_capacity(top as usize + 1);
    let mut ln_ff = 0.0;
    for s in 0..=top {
        if s > 0 {
            ln_ff += libm::log((population - s + 1) as f64);
        }
        let lp = ln_ff + ln_s[s as usize] - ln_total;
        pmf.push(if lp == f64::NEG_INFINITY { 0.0 } else { libm::exp(lp) });
    }
    let mean = pmf.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
    Ok(VisitStats {
        population,
        draws,
        pmf,
        mean,
    })
}
