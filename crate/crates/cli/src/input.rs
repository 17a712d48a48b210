use std::path::PathBuf;

use clap::Args;
use sha2::{Digest, Sha256};
use spdmeans::fixtures::{self, DEFAULT_SEED, FIXTURE_NAMES};
use spdmeans::tuple_file::{self, format_matrices};
use spdmeans::MatrixTuple;

use crate::CliError;

pub const SEED_ENV: &str = "SPDMEANS_SEED";

#[derive(Debug, Args)]
pub struct TupleSource {
    /// Tuple file: header `n m`, then n*m rows of m numbers
    #[arg(value_name = "FILE")]
    pub file: Option<PathBuf>,

    /// Built-in tuple instead of a file
    #[arg(long, conflicts_with = "file")]
    pub fixture: Option<String>,

    /// Seed for seeded fixtures (default: $SPDMEANS_SEED, then 2010)
    #[arg(long)]
    pub seed: Option<u64>,
}

pub struct LoadedTuple {
    pub label: String,
    pub tuple: MatrixTuple,
}

/// `--seed`, then `$SPDMEANS_SEED`, then the built-in default.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

impl TupleSource {
    pub fn is_given(&self) -> bool {
        self.file.is_some() || self.fixture.is_some()
    }

    pub fn load(&self) -> Result<LoadedTuple, CliError> {
        if let Some(path) = &self.file {
            let tuple = tuple_file::read_tuple(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            return Ok(LoadedTuple {
                label: path.display().to_string(),
                tuple,
            });
        }
        let name = self
            .fixture
            .as_deref()
            .ok_or_else(|| CliError::Input("give a tuple file or --fixture NAME".to_string()))?;
        let seed = resolve_seed(self.seed)?;
        let tuple = fixtures::by_name(name, seed).ok_or_else(|| {
            CliError::Input(format!(
                "unknown fixture {name:?}; known: {}",
                FIXTURE_NAMES.join(", ")
            ))
        })?;
        Ok(LoadedTuple {
            label: format!("fixture:{name}"),
            tuple,
        })
    }
}

/// SHA-256 of the tuple in file format, so equal inputs hash equally
/// whatever their source.
pub fn digest(tuple: &MatrixTuple) -> String {
    Sha256::digest(format_matrices(tuple.items()).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
