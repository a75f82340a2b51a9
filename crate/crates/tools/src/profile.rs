//! Parameter profiles and `--params-file` loading.

use std::path::Path;

use blob_core::analysis::{optimize_t_multi, required_t_single, MeritInputs};
use blob_core::scheme::{Mode, SchemeParams};
use blob_core::tardos::sufficient_length;

use crate::error::{CliError, Result};

/// Largest deployment `init` will write, in bytes of user blobs.
pub const MAX_DEPLOYMENT_BYTES: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// `N = 2^16` one-bit entries, 64 users, `t = 2^12`.
    Desk,
    /// Pay-TV sizing: `M = 2^24`, 2^20 users, 8 colluders, `P_FP = 2^-10`.
    PayTv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Single,
    Multi,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Single => Mode::SingleUse,
            ModeArg::Multi => Mode::MultiUse,
        }
    }
}

/// Pay-TV parameters. Single-use takes one-bit entries and the `t` it
/// requires; multi-use takes full-key entries at the best `t`.
pub fn pay_tv_params(mode: Mode) -> SchemeParams {
    let users: u32 = 1 << 20;
    let p_fp = 1.0 / 1024.0;
    let l_suff = sufficient_length(8, users as f64 / p_fp).expect("valid sizing");
    let (width, ell) = match mode {
        Mode::SingleUse => (1, 128),
        Mode::MultiUse => (128, 1),
    };
    let inputs = MeritInputs::pay_tv(l_suff, ell, mode);
    let t = match mode {
        Mode::SingleUse => required_t_single(&inputs).expect("feasible"),
        Mode::MultiUse => optimize_t_multi(&inputs).expect("feasible").0,
    };
    let mut p = SchemeParams::new(width, (1 << 24) / width as u64, ell, t, mode);
    p.users = users;
    p.coalition = 8;
    p.false_positive = p_fp;
    p
}

pub fn profile_params(profile: Profile, mode: Mode) -> SchemeParams {
    match profile {
        Profile::Desk => SchemeParams::desk(mode),
        Profile::PayTv => pay_tv_params(mode),
    }
}

/// Resolves the parameter set: a params file wins over the profile, and an
/// explicit mode overrides either.
pub fn resolve(profile: Profile, params_file: Option<&Path>, mode: Option<ModeArg>) -> Result<SchemeParams> {
    let mut params = match params_file {
        Some(path) => {
            let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_slice::<SchemeParams>(&text).map_err(|e| {
                CliError::Validation(format!("{}: not a parameter set: {e}", path.display()))
            })?
        }
        None => profile_params(profile, mode.map_or(Mode::SingleUse, Mode::from)),
    };
    if let Some(m) = mode {
        params.mode = m.into();
    }
    params.validate()?;
    Ok(params)
}

/// Rejects deployments too large to write out.
pub fn check_deployment_size(params: &SchemeParams) -> Result<()> {
    let per_user = (params.entry_count * params.entry_width as u64).div_ceil(8);
    let total = per_user.saturating_mul(params.users as u64);
    if total > MAX_DEPLOYMENT_BYTES {
        return Err(CliError::Validation(format!(
            "deployment of {} users x {per_user} bytes exceeds the {MAX_DEPLOYMENT_BYTES}-byte limit; \
             use the desk profile or a smaller --params-file",
            params.users
        )));
    }
    Ok(())
}
