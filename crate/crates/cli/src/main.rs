//! `sos` command-line front end.
//!
//! Every subcommand reads its inputs, writes CSV/JSON reports into `--out` and
//! finishes with a `run.json` manifest describing the invocation. Exit codes:
//! 0 success, 1 data or validation failure, 2 usage error.

mod cmd;
mod common;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::common::CliError;
use crate::output::OutDir;

#[derive(Debug, Parser)]
#[command(
    name = "sos",
    version,
    about = "Semantic-versus-surface analysis of text-to-image embeddings"
)]
struct Cli {
    /// Output directory for reports (created if missing)
    #[arg(long, short, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SOS_JOBS")]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Check a dataset against the manifest and matrix invariants
    Validate(cmd::dataset::ValidateArgs),
    /// Build English prompts and apply a translation table
    Prompts(cmd::prompts::PromptsArgs),
    /// Write semantic and surface reference vectors
    Refs(cmd::dataset::RefsArgs),
    /// Score every image and aggregate per (culture, language, model)
    Sos(cmd::dataset::SosArgs),
    /// Flag model-language pairs with a strong surface tendency
    Flags(cmd::dataset::SosArgs),
    /// Pearson correlation of group scores between languages
    Corr(cmd::dataset::SosArgs),
    /// Mean score per text-encoder layer and language
    Layers(cmd::dataset::SosArgs),
    /// MAD and Pearson correlation between template subsets and between concepts
    Robustness(cmd::dataset::SosArgs),
    /// Mean score with confidence interval per language and person term
    Segments(cmd::dataset::SegmentsArgs),
    /// Weighted log-odds of description terms per language and model
    Terms(cmd::terms::TermsArgs),
    /// Stereotype-lexicon coverage of significant description terms
    Coverage(cmd::terms::CoverageArgs),
    /// Draw a stratified annotation packet with five options per image
    Sample(cmd::annotate::SampleArgs),
    /// Inter-annotator agreement report
    Agree(cmd::annotate::AgreeArgs),
    /// Compare score-based and CLIPScore predictions with human majority labels
    ValidateMetric(cmd::annotate::ValidateMetricArgs),
    /// Dominant colors per image and HSV value histograms
    Colors(cmd::colors::ColorsArgs),
    /// Two-component PCA of image embeddings
    Pca(cmd::dataset::PcaArgs),
    /// Generate a synthetic dataset with a known semantic/surface mix
    Synth(cmd::synth::SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Prompts(_) => "prompts",
            Command::Refs(_) => "refs",
            Command::Sos(_) => "sos",
            Command::Flags(_) => "flags",
            Command::Corr(_) => "corr",
            Command::Layers(_) => "layers",
            Command::Robustness(_) => "robustness",
            Command::Segments(_) => "segments",
            Command::Terms(_) => "terms",
            Command::Coverage(_) => "coverage",
            Command::Sample(_) => "sample",
            Command::Agree(_) => "agree",
            Command::ValidateMetric(_) => "validate-metric",
            Command::Colors(_) => "colors",
            Command::Pca(_) => "pca",
            Command::Synth(_) => "synth",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut out = OutDir::create(&cli.out)?;
    let seed = cli.seed;
    let result = match &cli.command {
        Command::Validate(a) => cmd::dataset::validate(a, &mut out),
        Command::Prompts(a) => cmd::prompts::prompts(a, &mut out),
        Command::Refs(a) => cmd::dataset::refs(a, &mut out),
        Command::Sos(a) => cmd::dataset::sos(a, &mut out),
        Command::Flags(a) => cmd::dataset::flags(a, &mut out),
        Command::Corr(a) => cmd::dataset::corr(a, &mut out),
        Command::Layers(a) => cmd::dataset::layers(a, &mut out),
        Command::Robustness(a) => cmd::dataset::robustness(a, &mut out),
        Command::Segments(a) => cmd::dataset::segments(a, &mut out),
        Command::Terms(a) => cmd::terms::terms(a, &mut out),
        Command::Coverage(a) => cmd::terms::coverage(a, &mut out),
        Command::Sample(a) => cmd::annotate::sample(a, seed, &mut out),
        Command::Agree(a) => cmd::annotate::agree(a, &mut out),
        Command::ValidateMetric(a) => cmd::annotate::validate_metric(a, &mut out),
        Command::Colors(a) => cmd::colors::colors(a, seed, &mut out),
        Command::Pca(a) => cmd::dataset::pca(a, &mut out),
        Command::Synth(a) => cmd::synth::synth(a, seed, &mut out),
    };
    // the manifest is written even when validation fails, so the report is traceable
    if result.is_ok() || matches!(result, Err(CliError::Invalid(_))) {
        out.write_manifest(cli.command.name(), seed, &cli.command)?;
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.jobs {
        Some(0) => Err(CliError::Input("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Input(format!("cannot start {n} workers: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
