//! Two-step collusion attack on blobs and the measures of its success.
//!
//! Step one merges the colluders' copies under the Marking Assumption:
//! where every copy agrees the common value is kept, and at detected
//! positions one of the observed values is output. Step two erases a random
//! fraction of the remaining undetected, not-yet-used positions to dilute
//! the fingerprint, at the cost of destroying key material.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::IteratorRandom;
use rand::{Rng, RngCore};

use crate::bits::{mask_to_width, EntryValue, IndexSet, PackedEntries};
use crate::error::{domain, Error, Result};
use crate::rng;
use crate::scheme::{initialise, Blob, EntrySource, Mode, OperatorState, SchemeParams};
use crate::tardos::{accuse, AccusationConfig, AccusationReport, ThresholdPolicy};

/// Symbol choice at detected positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectedStrategy {
    /// Uniform over the distinct observed values.
    #[default]
    UniformRandom,
    /// Most frequent observed value, ties broken at random.
    Majority,
    /// The first colluder's value.
    FirstColluder,
    /// A uniformly random `w`-bit value. Violates the Marking Assumption
    /// and risks symbol errors; kept for experiments only.
    RandomOutput,
}

/// Attack output: every entry is a `w`-bit value or erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PirateBlob {
    entries: PackedEntries,
    erased: IndexSet,
    detected: Vec<u64>,
}

impl PirateBlob {
    /// Erased entries must hold zero in `entries`.
    pub fn from_parts(entries: PackedEntries, erased: IndexSet, detected: Vec<u64>) -> Result<Self> {
        if erased.universe() != entries.len() {
            return Err(Error::Shape("erasure bitmap does not cover the blob".into()));
        }
        if detected.windows(2).any(|w| w[0] >= w[1])
            || detected.last().is_some_and(|&d| d >= entries.len())
        {
            return Err(Error::Shape("detected positions must be increasing and in range".into()));
        }
        Ok(Self {
            entries,
            erased,
            detected,
        })
    }

    /// Raw entry storage; erased slots read as zero.
    pub fn entries(&self) -> &PackedEntries {
        &self.entries
    }

    /// The erasure set `E`.
    pub fn erased(&self) -> &IndexSet {
        &self.erased
    }

    /// Positions `D` where the colluders saw differing values, ascending.
    pub fn detected(&self) -> &[u64] {
        &self.detected
    }

    pub fn value(&self, i: u64) -> Option<EntryValue> {
        self.lookup(i)
    }
}

impl EntrySource for PirateBlob {
    fn entry_count(&self) -> u64 {
        self.entries.len()
    }

    fn entry_width(&self) -> u32 {
        self.entries.width()
    }

    fn lookup(&self, index: u64) -> Option<EntryValue> {
        (index < self.entries.len() && !self.erased.contains(index))
            .then(|| self.entries.get(index))
    }
}

/// Runs both attack steps on the colluders' `blobs`.
///
/// `visible_used` is the set of indices the colluders have seen in control
/// messages; those entries are kept intact. Exactly
/// `floor(epsilon * (N - |V| - |D|))` entries are erased, chosen uniformly
/// among the unused undetected positions.
pub fn run_collusion(
    blobs: &[&Blob],
    visible_used: &IndexSet,
    epsilon: f64,
    strategy: DetectedStrategy,
    seed: &[u8],
) -> Result<PirateBlob> {
    let first = *blobs
        .first()
        .ok_or_else(|| domain!("run_collusion: the coalition is empty"))?;
    let (n, width) = (first.len(), first.width());
    if let Some(b) = blobs.iter().find(|b| b.len() != n || b.width() != width) {
        return Err(Error::DeploymentMismatch(format!(
            "colluder blob of {} x {}-bit entries does not match {n} x {width}",
            b.len(),
            b.width()
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(domain!("run_collusion: epsilon = {epsilon} outside [0, 1]"));
    }
    if visible_used.universe() != n {
        return Err(Error::Shape("used-index set does not cover the blob".into()));
    }

    let mut rng = rng::fast(seed, "attack/merge", 0);
    let mut entries = first.entries().clone();
    let mut detected = Vec::new();
    let mut observed: Vec<EntryValue> = Vec::with_capacity(blobs.len());
    for i in 0..n {
        let v0 = first.entry(i);
        if blobs[1..].iter().all(|b| b.entry(i) == v0) {
            continue;
        }
        detected.push(i);
        observed.clear();
        observed.extend(blobs.iter().map(|b| b.entry(i)));
        let choice = match strategy {
            DetectedStrategy::FirstColluder => v0,
            DetectedStrategy::UniformRandom => {
                let distinct: BTreeSet<EntryValue> = observed.iter().copied().collect();
                *distinct.iter().choose(&mut rng).expect("non-empty")
            }
            DetectedStrategy::Majority => majority(&observed, &mut rng),
            DetectedStrategy::RandomOutput => {
                let v = (rng.next_u64() as u128) | ((rng.next_u64() as u128) << 64);
                mask_to_width(v, width)
            }
        };
        entries.set(i, choice);
    }

    let detected_set = IndexSet::from_indices(n, detected.iter().copied());
    let candidates = (0..n).filter(|&i| !visible_used.contains(i) && !detected_set.contains(i));
    let pool = candidates.clone().count() as u64;
    let target = libm::floor(epsilon * pool as f64) as u64;
    let mut erase_rng = rng::fast(seed, "attack/erase", 0);
    let mut erased = IndexSet::new(n);
    // selection sampling: uniform over all subsets of the target size
    let (mut needed, mut remaining) = (target, pool);
    for i in candidates {
        if needed == 0 {
            break;
        }
        if erase_rng.random_range(0..remaining) < needed {
            erased.insert(i);
            entries.set(i, 0);
            needed -= 1;
        }
        remaining -= 1;
    }

    PirateBlob::from_parts(entries, erased, detected)
}

fn majority<R: Rng + ?Sized>(observed: &[EntryValue], rng: &mut R) -> EntryValue {
    let mut counts: Vec<(EntryValue, usize)> = Vec::new();
    for &v in observed {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|&(_, c)| c).max().unwrap_or(0);
    counts
        .iter()
        .filter(|&&(_, c)| c == best)
        .map(|&(v, _)| v)
        .choose(rng)
        .expect("non-empty")
}

/// Empirical next-key failure count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailureEstimate {
    pub failures: u64,
    pub trials: u64,
}

impl FailureEstimate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.failures as f64 / self.trials as f64
        }
    }
}

/// Draws `trials` fresh control messages from `state` and counts those for
/// which at least `ceil(k0/w)` addressed slots are erased in `pirate`.
pub fn evaluate_next_key_failure(
    state: &OperatorState,
    pirate: &PirateBlob,
    trials: u64,
    seed: &[u8],
) -> Result<FailureEstimate> {
    let params = state.params();
    if pirate.entry_count() != params.entry_count {
        return Err(Error::Shape("pirate blob does not match the deployment".into()));
    }
    let threshold = params.missing_threshold();
    let mut rng = rng::fast(seed, "attack/next-key", 0);
    let mut failures = 0;
    for _ in 0..trials {
        let indices = state.draw_indices(&mut rng)?;
        let missing = indices.iter().filter(|&&i| pirate.erased().contains(i)).count() as u64;
        if missing >= threshold {
            failures += 1;
        }
    }
    Ok(FailureEstimate { failures, trials })
}

/// Erasure fraction an attacker picks: the untraceability threshold plus
/// `margin`, capped at 1.
///
/// With `t_public == false` the attacker does not know `t` and assumes the
/// largest admissible value, `N - ell`.
pub fn attacker_epsilon(params: &SchemeParams, l_suff: u64, margin: f64, t_public: bool) -> f64 {
    let t = if t_public {
        params.tracing_count
    } else {
        params.entry_count - params.entries_per_key as u64
    };
    let star = crate::analysis::epsilon_star(l_suff, t).unwrap_or(0.0);
    (star + margin).min(1.0)
}

/// Everything fixed across the trials of an attack experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSetup {
    pub params: SchemeParams,
    /// Number of colluders `c`, drawn at random from the users.
    pub coalition: u32,
    /// Rounds observed before the attack.
    pub uses: u64,
    pub strategy: DetectedStrategy,
    pub policy: ThresholdPolicy,
    /// Fresh control messages drawn to estimate next-key failure.
    pub failure_trials: u64,
}

/// Result of one attack trial.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub pirate: PirateBlob,
    pub coalition: Vec<u32>,
    pub epsilon_used: f64,
    /// At least one colluder was accused.
    pub traced: bool,
    pub falsely_accused: Vec<u32>,
    pub report: AccusationReport,
    pub next_key_failures: u64,
    pub trials: u64,
}

/// Picks `c` distinct users uniformly.
pub fn choose_coalition(users: u32, c: u32, seed: &[u8]) -> Result<Vec<u32>> {
    if c == 0 || c > users {
        return Err(domain!("coalition of {c} from {users} users"));
    }
    let mut rng = rng::chacha(seed, "attack/coalition", 0);
    let mut members = (0..users).choose_multiple(&mut rng, c as usize);
    members.sort_unstable();
    Ok(members)
}

/// Initialises a fresh deployment, runs `uses` rounds, attacks, traces and
/// estimates next-key failure.
pub fn run_attack_trial(setup: &AttackSetup, epsilon: f64, seed: &[u8]) -> Result<AttackOutcome> {
    let (mut state, blobs) = initialise(&setup.params, &rng::derive_seed(seed, "trial/init", 0))?;
    let n = setup.params.entry_count;
    // the colluders record every index they see broadcast
    let mut seen = IndexSet::new(n);
    let round_seed = rng::derive_seed(seed, "trial/rounds", 0);
    for _ in 0..setup.uses {
        let msg = state.next_control_message(&round_seed)?;
        for i in msg.indices(n, setup.params.entries_per_key)? {
            seen.insert(i);
        }
    }
    debug_assert!(setup.params.mode == Mode::MultiUse || seen == *state.used());

    let coalition = choose_coalition(setup.params.users, setup.coalition, seed)?;
    let members: Vec<&Blob> = coalition.iter().map(|&u| &blobs[u as usize]).collect();
    let pirate = run_collusion(
        &members,
        &seen,
        epsilon,
        setup.strategy,
        &rng::derive_seed(seed, "trial/collusion", 0),
    )?;

    let policy = match &setup.policy {
        ThresholdPolicy::Calibrated(cal) => {
            let mut cal = cal.clone();
            cal.seed = rng::derive_seed(&cal.seed, "trial/calibration", 0).to_vec();
            cal.seed.extend_from_slice(seed);
            ThresholdPolicy::Calibrated(cal)
        }
        other => other.clone(),
    };
    let config = AccusationConfig {
        policy,
        false_positive: setup.params.false_positive,
    };
    let report = accuse(state.code(), &pirate, &config)?;
    let traced = report.accused.iter().any(|u| coalition.contains(u));
    let falsely_accused = report
        .accused
        .iter()
        .copied()
        .filter(|u| !coalition.contains(u))
        .collect();

    let failure = evaluate_next_key_failure(
        &state,
        &pirate,
        setup.failure_trials,
        &rng::derive_seed(seed, "trial/failure", 0),
    )?;

    Ok(AttackOutcome {
        pirate,
        coalition,
        epsilon_used: epsilon,
        traced,
        falsely_accused,
        report,
        next_key_failures: failure.failures,
        trials: failure.trials,
    })
}

/// Aggregate over the trials at one erasure fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub trials: u32,
    /// Fraction of trials in which a colluder was accused.
    pub traced_rate: f64,
    /// Fraction of trials with at least one innocent accused.
    pub false_positive_rate: f64,
    /// Pooled next-key failure rate.
    pub fail_rate: f64,
    pub uses: u64,
    pub coalition: u32,
}

/// Runs `trials` independent attack trials at one erasure fraction.
pub fn sweep_point(setup: &AttackSetup, epsilon: f64, trials: u32, seed: &[u8]) -> Result<SweepPoint> {
    if trials == 0 {
        return Err(domain!("sweep: at least one trial is required"));
    }
    let (mut traced, mut framed, mut failures, mut draws) = (0u32, 0u32, 0u64, 0u64);
    for trial in 0..trials {
        let tseed = rng::derive_seed(seed, "sweep/trial", trial as u64);
        let out = run_attack_trial(setup, epsilon, &tseed)?;
        traced += out.traced as u32;
        framed += !out.falsely_accused.is_empty() as u32;
        failures += out.next_key_failures;
        draws += out.trials;
    }
    Ok(SweepPoint {
        epsilon,
        trials,
        traced_rate: traced as f64 / trials as f64,
        false_positive_rate: framed as f64 / trials as f64,
        fail_rate: if draws == 0 { 0.0 } else { failures as f64 / draws as f64 },
        uses: setup.uses,
        coalition: setup.coalition,
    })
}

/// Runs [`sweep_point`] for every erasure fraction in `epsilons`.
pub fn sweep_attack(
    setup: &AttackSetup,
    epsilons: &[f64],
    trials: u32,
    seed: &[u8],
) -> Result<Vec<SweepPoint>> {
    if let Some(e) = epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(domain!("sweep: epsilon {e} outside [0, 1]"));
    }
    epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            sweep_point(setup, eps, trials, &rng::derive_seed(seed, "sweep/epsilon", k as u64))
        })
        .collect()
}
