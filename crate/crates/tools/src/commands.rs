//! Command implementations behind the `blob` binary. Each returns a
//! serialisable report, which the binary prints as JSON.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use blob_core::analysis::{optimize_t_multi, nmax_single, MeritInputs};
use blob_core::attack::{
    attacker_epsilon, evaluate_next_key_failure, run_attack_trial, run_collusion, AttackSetup,
    DetectedStrategy, SweepPoint,
};
use blob_core::bits::IndexSet;
use blob_core::error::Error;
use blob_core::rng;
use blob_core::scheme::{decrypt, initialise, Aes128Gcm, ControlForm, Mode, SchemeParams};
use blob_core::tardos::{
    accuse, sufficient_length, AccusationConfig, Calibration, ThresholdPolicy,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deployment::{self as dep, TRANSCRIPT};
use crate::error::{CliError, Result};
use crate::figures;
use crate::format;
use crate::profile;

pub const PIRATE: &str = "pirate.blob";
pub const ATTACK_REPORT: &str = "attack.json";
pub const TRACE_REPORT: &str = "trace.json";
pub const SWEEP_RECORDS: &str = "sweep.jsonl";
pub const TABLE1_REPORT: &str = "table1.json";

/// Parses a root seed of exactly 32 hex digits.
pub fn parse_seed(text: &str) -> Result<[u8; 16]> {
    let mut seed = [0u8; 16];
    hex::decode_to_slice(text.trim(), &mut seed).map_err(|e| {
        CliError::Validation(format!("seed must be 32 hex digits (16 bytes): {e}"))
    })?;
    Ok(seed)
}

/// Parses a comma-separated user list such as `1,5,9`.
pub fn parse_coalition(text: &str) -> Result<Vec<u32>> {
    let mut users: Vec<u32> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("bad user id {s:?} in coalition")))
        })
        .collect::<Result<_>>()?;
    users.sort_unstable();
    users.dedup();
    if users.is_empty() {
        return Err(CliError::Validation("coalition is empty".into()));
    }
    Ok(users)
}

/// Parses a comma-separated list of erasure fractions.
pub fn parse_epsilons(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| match s.trim().parse::<f64>() {
            Ok(e) if (0.0..=1.0).contains(&e) => Ok(e),
            _ => Err(CliError::Validation(format!("epsilon {s:?} is not in [0, 1]"))),
        })
        .collect()
}

fn params_hash(params: &SchemeParams) -> String {
    format::sha256_hex(&serde_json::to_vec(params).expect("serialisable"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub deployment_id: String,
    pub params: SchemeParams,
    pub blob_bytes: u64,
    pub code_sha256: String,
    pub master_sha256: String,
    pub users: Vec<dep::UserFile>,
}

pub fn init(dir: &Path, params: &SchemeParams, seed: &[u8; 16], form: ControlForm) -> Result<InitReport> {
    params.validate()?;
    profile::check_deployment_size(params)?;
    let (mut state, blobs) = initialise(params, seed)?;
    state.set_control_form(form);
    let manifest = dep::save(dir, &state, &blobs)?;
    Ok(InitReport {
        deployment_id: manifest.deployment_id,
        params: manifest.params,
        blob_bytes: (params.entry_count * params.entry_width as u64).div_ceil(8),
        code_sha256: manifest.code_sha256,
        master_sha256: manifest.master_sha256,
        users: manifest.users,
    })
}

/// One broadcast in `transcript.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub round: u64,
    /// Hex of the encoded control message.
    pub control: String,
    pub descriptor_bits: u64,
    pub wire_bytes: u64,
    pub payload_sha256: String,
    pub decrypted_by: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub deployment_id: String,
    pub first_round: u64,
    pub rounds: u64,
    pub issued: u64,
    pub remaining_entries: u64,
    pub descriptor_bits_total: u64,
    pub descriptor_bits_max: u64,
}

/// Runs `rounds` encrypt/decrypt rounds from the stored state and checks
/// that every user recovers every payload.
pub fn run(dir: &Path, seed: &[u8; 16], rounds: u64) -> Result<RunReport> {
    let (mut state, manifest) = dep::load_operator(dir)?;
    let params = state.params().clone();
    let blobs = (0..params.users)
        .map(|u| dep::load_user(dir, &manifest, u))
        .collect::<Result<Vec<_>>>()?;
    let round_seed = rng::derive_seed(seed, "cli/rounds", 0);
    let transcript_path = dir.join(TRANSCRIPT);
    let mut transcript = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&transcript_path)
        .map_err(|e| CliError::io(&transcript_path, e))?;

    let first_round = state.issued();
    let (mut bits_total, mut bits_max) = (0u64, 0u64);
    let mut outcome = Ok(());
    for _ in 0..rounds {
        let round = state.issued();
        let mut plaintext = [0u8; 32];
        rand::RngCore::fill_bytes(&mut rng::chacha(seed, "cli/plaintext", round), &mut plaintext);
        let ct = match state.encrypt(&Aes128Gcm, &plaintext, &round_seed) {
            Ok(ct) => ct,
            Err(e @ Error::Exhausted(_)) => {
                outcome = Err(CliError::Validation(format!("round {round}: {e}")));
                break;
            }
            Err(e) => return Err(e.into()),
        };
        for (u, blob) in blobs.iter().enumerate() {
            match decrypt(&params, blob, &ct, &Aes128Gcm) {
                Ok(pt) if pt == plaintext => {}
                Ok(_) => {
                    return Err(CliError::Protocol(format!(
                        "round {round}: user {u} decrypted a wrong payload"
                    )))
                }
                Err(e) => {
                    return Err(CliError::Protocol(format!(
                        "round {round}: user {u} failed to decrypt: {e}"
                    )))
                }
            }
        }
        let control = format::encode_control(&ct.control);
        let bits = ct.control.descriptor_bits(params.entry_count);
        bits_total += bits;
        bits_max = bits_max.max(bits);
        let line = TranscriptLine {
            round,
            wire_bytes: (control.len() + ct.nonce.len() + ct.payload.len()) as u64,
            control: hex::encode(control),
            descriptor_bits: bits,
            payload_sha256: format::sha256_hex(&ct.payload),
            decrypted_by: params.users,
        };
        let mut text = serde_json::to_vec(&line).expect("serialisable");
        text.push(b'\n');
        transcript
            .write_all(&text)
            .map_err(|e| CliError::io(&transcript_path, e))?;
    }
    dep::save_state(dir, &state, &manifest)?;
    outcome?;
    Ok(RunReport {
        deployment_id: manifest.deployment_id,
        first_round,
        rounds: state.issued() - first_round,
        issued: state.issued(),
        remaining_entries: state.remaining(),
        descriptor_bits_total: bits_total,
        descriptor_bits_max: bits_max,
    })
}

/// Indices the colluders have seen broadcast, read from the transcript.
pub fn visible_indices(dir: &Path, params: &SchemeParams) -> Result<IndexSet> {
    let mut seen = IndexSet::new(params.entry_count);
    let path = dir.join(TRANSCRIPT);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(seen),
        Err(e) => return Err(CliError::io(&path, e)),
    };
    for (n, line) in text.lines().enumerate() {
        let bad = |msg: String| CliError::Validation(format!("{}:{}: {msg}", path.display(), n + 1));
        let entry: TranscriptLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let bytes = hex::decode(&entry.control).map_err(|e| bad(e.to_string()))?;
        let msg = format::decode_control(&bytes, params.entries_per_key).map_err(|e| bad(e.to_string()))?;
        for i in msg.indices(params.entry_count, params.entries_per_key)? {
            seen.insert(i);
        }
    }
    Ok(seen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Uniform,
    Majority,
    First,
}

impl From<StrategyArg> for DetectedStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Uniform => DetectedStrategy::UniformRandom,
            StrategyArg::Majority => DetectedStrategy::Majority,
            StrategyArg::First => DetectedStrategy::FirstColluder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextKey {
    pub failures: u64,
    pub trials: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub deployment_id: String,
    pub coalition: Vec<u32>,
    pub epsilon: f64,
    pub strategy: StrategyArg,
    pub visible_used: u64,
    pub detected: u64,
    pub erased: u64,
    pub pirate_sha256: String,
    pub next_key: NextKey,
}

pub struct AttackArgs {
    pub coalition: Vec<u32>,
    /// Defaults to the untraceability threshold plus 0.01.
    pub epsilon: Option<f64>,
    pub strategy: StrategyArg,
    pub trials: u64,
}

/// Builds a pirate blob from the coalition's files and writes it with a
/// report next to the deployment.
pub fn attack(dir: &Path, seed: &[u8; 16], args: &AttackArgs) -> Result<AttackReport> {
    let (state, manifest) = dep::load_operator(dir)?;
    let params = state.params();
    let blobs = args
        .coalition
        .iter()
        .map(|&u| dep::load_user(dir, &manifest, u))
        .collect::<Result<Vec<_>>>()?;
    let seen = visible_indices(dir, params)?;
    let epsilon = match args.epsilon {
        Some(e) => e,
        None => {
            let l = sufficient_length(params.coalition, params.users_over_false_positive())?;
            attacker_epsilon(params, l, 0.01, true)
        }
    };
    let members: Vec<_> = blobs.iter().collect();
    let pirate = run_collusion(
        &members,
        &seen,
        epsilon,
        args.strategy.into(),
        &rng::derive_seed(seed, "cli/attack", 0),
    )?;
    let failure = evaluate_next_key_failure(
        &state,
        &pirate,
        args.trials,
        &rng::derive_seed(seed, "cli/next-key", 0),
    )?;
    let bytes = format::encode_pirate(&pirate);
    dep::write(&dir.join(PIRATE), &bytes)?;
    let report = AttackReport {
        deployment_id: manifest.deployment_id,
        coalition: args.coalition.clone(),
        epsilon,
        strategy: args.strategy,
        visible_used: seen.len(),
        detected: pirate.detected().len() as u64,
        erased: pirate.erased().len(),
        pirate_sha256: format::sha256_hex(&bytes),
        next_key: NextKey {
            failures: failure.failures,
            trials: failure.trials,
            rate: failure.rate(),
        },
    };
    dep::write_json(&dir.join(ATTACK_REPORT), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdArg {
    Calibrated,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub deployment_id: String,
    pub threshold_policy: ThresholdArg,
    pub threshold: f64,
    pub accused: Vec<u32>,
    pub erasure_fraction: f64,
    pub scored_positions: u64,
    pub symbol_error_positions: Vec<u64>,
    /// The ten highest scores, `(user, score)`.
    pub top_scores: Vec<(u32, f64)>,
}

fn policy(arg: ThresholdArg, seed: &[u8]) -> ThresholdPolicy {
    match arg {
        ThresholdArg::Calibrated => ThresholdPolicy::Calibrated(Calibration::new(seed)),
        ThresholdArg::Analytic => ThresholdPolicy::Analytic,
    }
}

/// Accuses users from a pirate blob. If an attack report sits next to the
/// pirate file it must name this deployment.
pub fn trace(dir: &Path, seed: &[u8; 16], pirate_path: &Path, threshold: ThresholdArg) -> Result<TraceReport> {
    let (state, manifest) = dep::load_operator(dir)?;
    let bytes = dep::read(pirate_path)?;
    let report_path = pirate_path.with_file_name(ATTACK_REPORT);
    if report_path.exists() {
        let attack: AttackReport = dep::read_json(&report_path)?;
        if attack.deployment_id != manifest.deployment_id {
            return Err(CliError::Validation(format!(
                "deployment hash mismatch: {} was made for deployment {}, not {}",
                pirate_path.display(),
                attack.deployment_id,
                manifest.deployment_id
            )));
        }
        if attack.pirate_sha256 != format::sha256_hex(&bytes) {
            return Err(CliError::Validation(format!(
                "{} does not match the digest in {}",
                pirate_path.display(),
                report_path.display()
            )));
        }
    }
    let pirate = format::decode_pirate(&bytes).map_err(|e| CliError::format(pirate_path, e))?;
    let params = state.params();
    if pirate.entries().len() != params.entry_count || pirate.entries().width() != params.entry_width {
        return Err(CliError::Validation(format!(
            "{}: pirate blob shape does not match the deployment",
            pirate_path.display()
        )));
    }
    let config = AccusationConfig {
        policy: policy(threshold, &rng::derive_seed(seed, "cli/trace", 0)),
        false_positive: params.false_positive,
    };
    let r = accuse(state.code(), &pirate, &config)?;
    let mut ranked: Vec<(u32, f64)> = r.scores.iter().enumerate().map(|(u, &s)| (u as u32, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(10);
    let report = TraceReport {
        deployment_id: manifest.deployment_id,
        threshold_policy: threshold,
        threshold: r.threshold,
        accused: r.accused,
        erasure_fraction: r.erasure_fraction,
        scored_positions: r.scored_positions,
        symbol_error_positions: r.symbol_error_positions,
        top_scores: ranked,
    };
    dep::write_json(&dir.join(TRACE_REPORT), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiguresReport {
    pub files: Vec<PathBuf>,
    pub crossover: Option<u32>,
}

pub fn figures(dir: &Path) -> Result<FiguresReport> {
    let files = figures::write_all(dir)?;
    Ok(FiguresReport {
        files,
        crossover: figures::fig6()?.crossover,
    })
}

/// Uses wanted over a decoder lifetime: 7 years of half-hourly key updates.
pub const TARGET_USES: u64 = 7 * 365 * 24 * 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub entries_per_key: u32,
    pub tracing_count: u64,
    pub n_max: f64,
    pub meets_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub l_suff_c8: u64,
    /// `L_suff` rounds to the tabulated `6.6e3` at two significant digits.
    pub l_suff_matches_table: bool,
    pub target_uses: u64,
    pub target_log2: f64,
    pub single_use: SchemeSummary,
    pub multi_use: SchemeSummary,
    pub crossover: Option<u32>,
}

/// Checks the pay-TV parameter table for internal consistency.
pub fn table1(dir: &Path) -> Result<Table1Report> {
    let l = sufficient_length(8, figures::U_OVER_PFP)?;
    let single = nmax_single(&MeritInputs::pay_tv(l, 128, Mode::SingleUse))?;
    let (t_multi, multi) = optimize_t_multi(&MeritInputs::pay_tv(l, 1, Mode::MultiUse))?;
    let report = Table1Report {
        l_suff_c8: l,
        l_suff_matches_table: (6_550..6_650).contains(&l),
        target_uses: TARGET_USES,
        target_log2: (TARGET_USES as f64).log2(),
        single_use: SchemeSummary {
            entries_per_key: 128,
            tracing_count: single.t_used,
            n_max: single.n_max,
            meets_target: single.n_max >= TARGET_USES as f64,
        },
        multi_use: SchemeSummary {
            entries_per_key: 1,
            tracing_count: t_multi,
            n_max: multi.n_max,
            meets_target: multi.n_max >= TARGET_USES as f64,
        },
        crossover: figures::fig6()?.crossover,
    };
    dep::write_json(&dir.join(TABLE1_REPORT), &report)?;
    Ok(report)
}

/// One JSON line of `sweep.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub trials: u32,
    pub traced_rate: f64,
    pub false_positive_rate: f64,
    pub fail_rate: f64,
    pub n: u64,
    pub c: u32,
    pub params_hash: String,
}

pub struct SweepArgs {
    pub epsilons: Vec<f64>,
    pub trials: u32,
    pub colluders: u32,
    pub uses: u64,
    pub strategy: StrategyArg,
    pub threshold: ThresholdArg,
    pub failure_trials: u64,
}

/// Attack sweep over erasure fractions. Trials run in parallel but use the
/// same seed derivation as the sequential library sweep, so results do not
/// depend on the thread count.
pub fn sweep(dir: &Path, params: &SchemeParams, seed: &[u8; 16], args: &SweepArgs) -> Result<Vec<SweepRecord>> {
    if args.trials == 0 {
        return Err(CliError::Validation("--trials must be at least 1".into()));
    }
    let setup = AttackSetup {
        params: params.clone(),
        coalition: args.colluders,
        uses: args.uses,
        strategy: args.strategy.into(),
        policy: policy(args.threshold, &rng::derive_seed(seed, "cli/sweep-calibration", 0)),
        failure_trials: args.failure_trials,
    };
    let jobs: Vec<(usize, u32)> = (0..args.epsilons.len())
        .flat_map(|k| (0..args.trials).map(move |i| (k, i)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(k, i)| {
            let eps_seed = rng::derive_seed(seed, "sweep/epsilon", k as u64);
            let trial_seed = rng::derive_seed(&eps_seed, "sweep/trial", i as u64);
            run_attack_trial(&setup, args.epsilons[k], &trial_seed)
                .map(|o| (o.traced, !o.falsely_accused.is_empty(), o.next_key_failures, o.trials))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let hash = params_hash(params);
    let records: Vec<SweepRecord> = args
        .epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let chunk = &outcomes[k * args.trials as usize..(k + 1) * args.trials as usize];
            let n = args.trials as f64;
            let traced = chunk.iter().filter(|o| o.0).count() as f64;
            let framed = chunk.iter().filter(|o| o.1).count() as f64;
            let failures: u64 = chunk.iter().map(|o| o.2).sum();
            let draws: u64 = chunk.iter().map(|o| o.3).sum();
            let point = SweepPoint {
                epsilon,
                trials: args.trials,
                traced_rate: traced / n,
                false_positive_rate: framed / n,
                fail_rate: if draws == 0 { 0.0 } else { failures as f64 / draws as f64 },
                uses: args.uses,
                coalition: args.colluders,
            };
            SweepRecord {
                epsilon: point.epsilon,
                trials: point.trials,
                traced_rate: point.traced_rate,
                false_positive_rate: point.false_positive_rate,
                fail_rate: point.fail_rate,
                n: point.uses,
                c: point.coalition,
                params_hash: hash.clone(),
            }
        })
        .collect();
    let mut text = Vec::new();
    for r in &records {
        text.extend(serde_json::to_vec(r).expect("serialisable"));
        text.push(b'\n');
    }
    dep::write(&dir.join(SWEEP_RECORDS), &text)?;
    Ok(records)
}
