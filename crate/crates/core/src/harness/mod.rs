//! Configuration, file formats and the command implementations behind the
//! `shearflow` binary. Every command writes its tables under the configured
//! output directory and returns a short human-readable summary.

mod commands;
pub mod config;
pub mod io;

pub use commands::{
    cmd_ablate, cmd_earlywarn, cmd_fit, cmd_lifetime, cmd_plam, cmd_predict, cmd_simulate, cmd_train,
    load_model, one_step_nrmse, CommandOutput,
};
pub use config::RunConfig;
pub use io::{CommentHeader, DatasetManifest};

use std::path::PathBuf;

use thiserror::Error;

use crate::esn::EsnError;
use crate::experiments::ExperimentError;
use crate::mfe::MfeError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_STATISTICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing or unreadable input: {0}")]
    Input(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("checksum mismatch for {path}: manifest says {expected}, file hashes to {found}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("training window is not turbulence-only: {0}")]
    TrainingWindow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mfe(#[from] MfeError),
    #[error(transparent)]
    Esn(#[from] EsnError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn mfe_code(e: &MfeError) -> i32 {
    match e {
        MfeError::BlowUp { .. } | MfeError::DegenerateDraw => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn esn_code(e: &EsnError) -> i32 {
    match e {
        EsnError::DegenerateReservoir(_)
        | EsnError::NonFiniteInput { .. }
        | EsnError::RankDeficient { .. }
        | EsnError::Diverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

impl HarnessError {
    /// Process exit code: 1 usage or configuration, 2 numerical failure,
    /// 3 statistical precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Mfe(e) => mfe_code(e),
            HarnessError::Esn(e) => esn_code(e),
            HarnessError::Experiment(e) => match e {
                ExperimentError::Mfe(e) => mfe_code(e),
                ExperimentError::Esn(e) => esn_code(e),
                e if e.is_statistical() => EXIT_STATISTICAL,
                _ => EXIT_USAGE,
            },
            _ => EXIT_USAGE,
        }
    }
}
