#![allow(dead_code)]

use std::collections::HashSet;

use blob_core::attack::{
    evaluate_next_key_failure, run_collusion, AttackSetup, DetectedStrategy, FailureEstimate,
};
use blob_core::bits::IndexSet;
use blob_core::scheme::{initialise, Mode, OperatorState, SchemeParams};
use blob_core::tardos::{Calibration, ThresholdPolicy};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Visited-count distribution by enumerating all `population^draws`
/// sequences.
pub fn exhaustive_visit_pmf(population: u64, draws: u64) -> Vec<f64> {
    let mut counts = vec![0u64; draws.min(population) as usize + 1];
    let total = population.pow(draws as u32);
    let mut seq = vec![0u64; draws as usize];
    for code in 0..total {
        let mut c = code;
        for d in seq.iter_mut() {
            *d = c % population;
            c /= population;
        }
        let mut mask = 0u64;
        for &d in &seq {
            mask |= 1 << d;
        }
        counts[mask.count_ones() as usize] += 1;
    }
    counts.iter().map(|&n| n as f64 / total as f64).collect()
}

/// Multi-use deployment with `population` functional entries.
pub fn multi_use_deployment(population: u64, ell: u32, width: u32) -> OperatorState {
    let t = 24;
    let mut p = SchemeParams::new(width, population + t, ell, t, Mode::MultiUse);
    p.users = 4;
    p.hard_key_bits = p.hard_key_bits.min(p.key_bits);
    initialise(&p, b"visits").unwrap().0
}

/// Distinct functional indices revealed by `rounds` control messages, one
/// count per seeded trial.
pub fn protocol_visit_counts(state: &OperatorState, rounds: u64, trials: u64) -> Vec<u64> {
    let p = state.params();
    let mut seen = HashSet::new();
    (0..trials)
        .map(|trial| {
            let mut s = state.clone();
            let seed = trial.to_le_bytes();
            seen.clear();
            for _ in 0..rounds {
                let msg = s.next_control_message(&seed).unwrap();
                seen.extend(msg.indices(p.entry_count, p.entries_per_key).unwrap());
            }
            seen.len() as u64
        })
        .collect()
}

/// Pearson chi-square p-value of `samples` against `pmf`, merging
/// neighbouring cells until each expects at least five observations.
pub fn chi_square_p(samples: &[u64], pmf: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mut observed = vec![0f64; pmf.len()];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &pr) in observed.iter().zip(pmf) {
        o += ob;
        e += pr * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Single-use desk deployment attacked by one colluder erasing a fraction
/// `epsilon`, then probed with `trials` fresh keys. Also returns the
/// realised erased fraction among functional entries.
pub fn single_use_failure(epsilon: f64, trials: u64, seed: &[u8]) -> (FailureEstimate, f64) {
    let mut p = SchemeParams::desk(Mode::SingleUse);
    p.users = 2;
    let (state, blobs) = initialise(&p, seed).unwrap();
    let pirate = run_collusion(
        &[&blobs[0]],
        &IndexSet::new(p.entry_count),
        epsilon,
        DetectedStrategy::default(),
        seed,
    )
    .unwrap();
    let functional_erased = pirate
        .erased()
        .iter()
        .filter(|&i| !state.tracing_positions().contains(i))
        .count();
    let fraction = functional_erased as f64 / p.functional_count() as f64;
    let estimate = evaluate_next_key_failure(&state, &pirate, trials, seed).unwrap();
    (estimate, fraction)
}

/// Desk tracing experiment: `c0 = 4`, `t = 2048` tracing positions, 64
/// users, single-use, calibrated threshold.
pub fn desk_tracing_setup(uses: u64) -> AttackSetup {
    let mut params = SchemeParams::new(1, 1 << 16, 128, 2048, Mode::SingleUse);
    params.users = 64;
    params.coalition = 4;
    AttackSetup {
        params,
        coalition: 4,
        uses,
        strategy: DetectedStrategy::UniformRandom,
        policy: ThresholdPolicy::Calibrated(Calibration::new(b"desk calibration")),
        failure_trials: 200,
    }
}
