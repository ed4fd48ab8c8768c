use std::path::PathBuf;

use spjopt::colorwidth::ColorError;
use spjopt::keys::KeyError;
use spjopt::plan::PlanError;
use spjopt::structure::StructureError;
use spjopt::synthesis::SynthesisError;
use spjopt::witness::WitnessError;
use spjopt::PipelineError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Cap(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Cap(_) => EXIT_CAP,
            _ => EXIT_INPUT,
        }
    }

    pub fn input(path: &std::path::Path, e: impl ToString) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_resource_cap() {
            CliError::Cap(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<ColorError> for CliError {
    fn from(e: ColorError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        match e {
            WitnessError::Color(c) => c.into(),
            WitnessError::TooManyColors(_) => CliError::Cap(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        })*
    };
}

invalid_from!(PlanError, KeyError, StructureError);
