//! Description-term contrasts and stereotype coverage.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use sos_core::io::{read_descriptions, read_manifest, StereotypeLexicon};
use sos_core::terms::{
    analyze_terms, stereotype_coverage, FightingWordsConfig, PriorSource, TermAnalysis, TermCorpus, Tokenizer,
};

use crate::common::{CliError, CliResult};
use crate::output::OutDir;

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    /// Frequencies of the other languages of the same model
    Rest,
    /// Frequencies of target and other languages combined
    Pooled,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TermsArgs {
    /// Record manifest (JSON Lines)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Image descriptions (JSON Lines of {id, text})
    #[arg(long)]
    pub descriptions: PathBuf,

    /// Total prior strength
    #[arg(long, default_value_t = 100.0)]
    pub alpha0: f64,

    /// Source of the prior token frequencies
    #[arg(long, value_enum, default_value = "rest")]
    pub prior: Prior,

    /// Pseudo-count giving tokens absent from the prior source a positive prior
    #[arg(long, default_value_t = 0.01)]
    pub prior_floor: f64,

    /// Significant terms reported per document
    #[arg(long, short = 'k', default_value_t = 10)]
    pub k: usize,

    /// Minimum z-score of a significant term
    #[arg(long, default_value_t = 1.96)]
    pub z_threshold: f64,

    /// Replace the built-in stoplist (one word per line)
    #[arg(long)]
    pub stoplist: Option<PathBuf>,

    /// Replace the built-in generic-term filter (one word per line)
    #[arg(long)]
    pub filter: Option<PathBuf>,
}

fn word_list(path: &Path) -> CliResult<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

impl TermsArgs {
    fn analyze(&self) -> CliResult<(TermCorpus, TermAnalysis)> {
        if self.alpha0.is_nan() || self.alpha0 <= 0.0 {
            return Err(CliError::Input("--alpha0 must be positive".into()));
        }
        let mut tokenizer = Tokenizer::default();
        if let Some(p) = &self.stoplist {
            tokenizer.stoplist = word_list(p)?;
        }
        if let Some(p) = &self.filter {
            tokenizer.filter = word_list(p)?;
        }
        let records = read_manifest(&self.manifest)?;
        let descriptions = read_descriptions(&self.descriptions)?;
        let corpus = TermCorpus::build(&records, &descriptions, &tokenizer);
        let cfg = FightingWordsConfig {
            alpha0: self.alpha0,
            prior: match self.prior {
                Prior::Rest => PriorSource::Rest,
                Prior::Pooled => PriorSource::Pooled,
            },
            prior_floor: self.prior_floor,
        };
        let analysis = analyze_terms(&corpus, &cfg, self.k, self.z_threshold)?;
        Ok((corpus, analysis))
    }
}

#[derive(Serialize)]
struct SignificantTerms<'a> {
    language: &'a str,
    model: &'a str,
    tokens: Vec<&'a str>,
}

#[derive(Serialize)]
struct TermsSummary<'a> {
    documents: usize,
    unmatched_descriptions: &'a [String],
    skipped_documents: Vec<SignificantTerms<'a>>,
    significant: Vec<SignificantTerms<'a>>,
}

pub fn terms(a: &TermsArgs, out: &mut OutDir) -> CliResult {
    let (corpus, analysis) = a.analyze()?;
    out.write_csv("terms.csv", &analysis.rows)?;
    out.write_json(
        "terms.json",
        &TermsSummary {
            documents: corpus.image_terms.len(),
            unmatched_descriptions: &corpus.unmatched,
            skipped_documents: analysis
                .skipped
                .iter()
                .map(|k| SignificantTerms {
                    language: &k.language,
                    model: &k.model,
                    tokens: Vec::new(),
                })
                .collect(),
            significant: analysis
                .significant
                .iter()
                .map(|(k, t)| SignificantTerms {
                    language: &k.language,
                    model: &k.model,
                    tokens: t.iter().map(String::as_str).collect(),
                })
                .collect(),
        },
    )
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoverageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub terms: TermsArgs,

    /// Stereotype lexicon (JSON object of language -> terms)
    #[arg(long)]
    pub lexicon: PathBuf,
}

#[derive(Serialize)]
struct CoverageRow<'a> {
    language: &'a str,
    model: &'a str,
    coverage_pct: f64,
}

/// Coverage counts every significant term, not only the reported top k.
pub fn coverage(a: &CoverageArgs, out: &mut OutDir) -> CliResult {
    let lexicon = StereotypeLexicon::read(&a.lexicon)?;
    let (_, analysis) = a.terms.analyze()?;
    let mut rows = Vec::new();
    for (key, detected) in &analysis.significant {
        match stereotype_coverage(detected, &lexicon, &key.language) {
            Ok(pct) => rows.push(CoverageRow {
                language: &key.language,
                model: &key.model,
                coverage_pct: pct,
            }),
            Err(e) => log::warn!("skipping ({}, {}): {e}", key.language, key.model),
        }
    }
    out.write_csv("coverage.csv", rows)
}
