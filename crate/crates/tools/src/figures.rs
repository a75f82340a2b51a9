//! Figure data at the pay-TV sizing (`M = 2^24`, `k = 128`, `k0 = 96`,
//! `gamma = 0.1`, `U/P_FP = 2^30`).

use std::path::{Path, PathBuf};

use blob_core::analysis::{
    crossover_scan, divisors, epsilon_star, multi_t_range, nmax_multi, nmax_single, CrossoverTable,
    MeritInputs, Variant, T_GRID_POINTS,
};
use blob_core::scheme::Mode;
use blob_core::tardos::sufficient_length;

use crate::error::{CliError, Result};

pub const U_OVER_PFP: f64 = (1u64 << 30) as f64;
pub const BLOB_BITS: u64 = 1 << 24;
pub const FIG3_L_SUFF: [u64; 3] = [5_000, 40_000, 80_000];
pub const FIG5_COALITIONS: [u32; 5] = [2, 4, 8, 12, 16];
/// `(L_suff, t)` of the two multi-use curves over `ell`.
pub const MULTI_ELL_CURVES: [(u64, u64); 2] = [(5_000, 40_000), (20_000, 50_000)];

fn l_suff(c: u32) -> u64 {
    sufficient_length(c, U_OVER_PFP).expect("positive coalition")
}

/// `epsilon_star` against `t`, from `t = L_suff(c = 8)` up to `M / k`.
pub fn fig2() -> Vec<(u64, f64)> {
    let l = l_suff(8);
    let hi = BLOB_BITS / 128;
    let mut rows: Vec<(u64, f64)> = (0..T_GRID_POINTS)
        .map(|i| l + ((hi - l) as f64 * i as f64 / (T_GRID_POINTS - 1) as f64).round() as u64)
        .map(|t| (t, epsilon_star(l, t).expect("t >= L")))
        .collect();
    rows.dedup_by_key(|r| r.0);
    rows
}

/// Single-use `n_max` against `ell` for each `L_suff`: `(ell, nmax, l_suff)`.
pub fn fig3() -> Result<Vec<(u32, f64, u64)>> {
    let mut rows = Vec::new();
    for l in FIG3_L_SUFF {
        for ell in divisors(128) {
            let r = nmax_single(&MeritInputs::pay_tv(l, ell, Mode::SingleUse))?;
            rows.push((ell, r.n_max, l));
        }
    }
    Ok(rows)
}

/// Single-use `n_max` at `ell = k` against coalition size.
pub fn fig4() -> Result<Vec<(u32, f64)>> {
    (1..=30)
        .map(|c| {
            let r = nmax_single(&MeritInputs::pay_tv(l_suff(c), 128, Mode::SingleUse))?;
            Ok((c, r.n_max))
        })
        .collect()
}

/// Multi-use `n_max` at `ell = 1` against `t`: `(t, nmax, c)`.
pub fn fig5() -> Result<Vec<(u64, f64, u32)>> {
    let mut rows = Vec::new();
    for c in FIG5_COALITIONS {
        let base = MeritInputs::pay_tv(l_suff(c), 1, Mode::MultiUse);
        let (lo, hi) = multi_t_range(&base)?;
        let mut last = None;
        for i in 0..T_GRID_POINTS {
            let t = lo + ((hi - lo) as f64 * i as f64 / (T_GRID_POINTS - 1) as f64).round() as u64;
            if last == Some(t) {
                continue;
            }
            last = Some(t);
            let r = nmax_multi(&base.with_t(t), Variant::EllOne)?;
            rows.push((t, r.n_max, c));
        }
    }
    Ok(rows)
}

/// Both schemes against coalition size, `c = 2..=30`.
pub fn fig6() -> Result<CrossoverTable> {
    let cs: Vec<u32> = (2..=30).collect();
    Ok(crossover_scan(BLOB_BITS, 128, 96, 0.1, U_OVER_PFP, &cs)?)
}

/// Multi-use `n_max` against `ell` at fixed `(L_suff, t)`:
/// `(ell, nmax, l_suff, t)`.
pub fn multi_ell() -> Result<Vec<(u32, f64, u64, u64)>> {
    let mut rows = Vec::new();
    for (l, t) in MULTI_ELL_CURVES {
        for ell in divisors(128) {
            let inputs = MeritInputs::pay_tv(l, ell, Mode::MultiUse).with_t(t);
            let r = nmax_multi(&inputs, Variant::Exact)?;
            rows.push((ell, r.n_max, l, t));
        }
    }
    Ok(rows)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes every figure file into `dir` and returns their paths.
pub fn write_all(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = |name: &str| dir.join(name);
    let mut written = Vec::new();

    let p = path("fig2.csv");
    write_csv(&p, &["t", "epsilon_star"], fig2().into_iter().map(|(t, e)| vec![t.to_string(), e.to_string()]))?;
    written.push(p);

    let p = path("fig3.csv");
    write_csv(
        &p,
        &["ell", "nmax", "l_suff"],
        fig3()?.into_iter().map(|(e, n, l)| vec![e.to_string(), n.to_string(), l.to_string()]),
    )?;
    written.push(p);

    let p = path("fig4.csv");
    write_csv(&p, &["c", "nmax"], fig4()?.into_iter().map(|(c, n)| vec![c.to_string(), n.to_string()]))?;
    written.push(p);

    let p = path("fig5.csv");
    write_csv(
        &p,
        &["t", "nmax", "c"],
        fig5()?.into_iter().map(|(t, n, c)| vec![t.to_string(), n.to_string(), c.to_string()]),
    )?;
    written.push(p);

    let p = path("fig6.csv");
    write_csv(
        &p,
        &["c", "nmax_single", "nmax_multi"],
        fig6()?.rows.into_iter().map(|r| {
            vec![r.coalition.to_string(), r.nmax_single.to_string(), r.nmax_multi.to_string()]
        }),
    )?;
    written.push(p);

    let p = path("multi_ell.csv");
    write_csv(
        &p,
        &["ell", "nmax", "l_suff", "t"],
        multi_ell()?
            .into_iter()
            .map(|(e, n, l, t)| vec![e.to_string(), n.to_string(), l.to_string(), t.to_string()]),
    )?;
    written.push(p);

    Ok(written)
}
