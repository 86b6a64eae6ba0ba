//! Experiment driver behind the `ehrelay` binary: flat config files, CSV
//! output and the canned figure sweeps.

pub mod config;
pub mod experiment;
pub mod figures;

use std::path::PathBuf;

pub use config::{parse_config, ExperimentConfig, Mode};
pub use experiment::{format_sig, run_experiment, write_csv, ResultRow, CSV_HEADER};
pub use figures::{figures, Figure, FigureOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    Malformed {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("incompatible `{key}`: {reason}")]
    Incompatible { key: String, reason: String },
    #[error("unknown figure `{0}` (expected fig2, fig3, fig4 or fig5)")]
    UnknownFigure(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ehrelay::Error),
}
