//! Shared argument groups, dataset loading and the CLI error type.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sos_core::io::{read_dataset, validate_dataset};
use sos_core::metrics::{ReferenceOptions, ScoreOptions};
use sos_core::prompts::SOURCE_LANGUAGE;
use sos_core::Dataset;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sos_core::Error),

    #[error("{0}")]
    Input(String),

    #[error("dataset failed validation with {0} violation(s)")]
    Invalid(usize),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Record manifest (JSON Lines)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Embedding matrix: binary `.sosm`, or `.csv` with an id column then values
    #[arg(long)]
    pub matrix: PathBuf,
}

impl DatasetArgs {
    /// Reads the dataset and rejects it when any invariant is violated.
    pub fn load(&self) -> CliResult<Dataset> {
        let ds = read_dataset(&self.manifest, &self.matrix)?;
        let report = validate_dataset(&ds.records, &ds.matrix);
        if !report.is_valid() {
            for v in &report.violations {
                log::error!("{v}");
            }
            return Err(CliError::Invalid(report.violations.len()));
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoringArgs {
    /// Average raw embeddings instead of unit-normalized ones
    #[arg(long)]
    pub no_normalize: bool,

    /// Build reference vectors per model instead of pooling across models
    #[arg(long)]
    pub per_model_refs: bool,

    /// Aggregate (culture, language) groups across models
    #[arg(long)]
    pub pool_models: bool,

    /// Concept whose images are analysed
    #[arg(long, default_value = "person")]
    pub concept: String,

    /// Drop English prompts before building references
    #[arg(long)]
    pub no_english: bool,
}

impl ScoringArgs {
    pub fn options(&self) -> ScoreOptions {
        ScoreOptions {
            references: ReferenceOptions {
                normalize: !self.no_normalize,
                pool_across_models: !self.per_model_refs,
            },
            aggregate_across_models: self.pool_models,
        }
    }

    /// Records of every concept, with English removed when requested.
    pub fn scope_all_concepts(&self, ds: &Dataset) -> CliResult<Dataset> {
        let scoped = ds.filter(|r| !(self.no_english && r.language == SOURCE_LANGUAGE));
        if scoped.records.is_empty() {
            return Err(CliError::Input("no records left after filtering".into()));
        }
        Ok(scoped)
    }

    /// Records of the selected concept, with English removed when requested.
    pub fn scope(&self, ds: &Dataset) -> CliResult<Dataset> {
        let scoped = ds.filter(|r| r.concept == self.concept && !(self.no_english && r.language == SOURCE_LANGUAGE));
        if scoped.records.is_empty() {
            return Err(CliError::Input(format!(
                "no records for concept '{}' after filtering",
                self.concept
            )));
        }
        Ok(scoped)
    }
}

/// Comma-separated list argument parser.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
