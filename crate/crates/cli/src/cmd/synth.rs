//! Synthetic dataset generation.

use clap::Args;
use serde::Serialize;
use sos_core::io::write_dataset;
use sos_core::synth::{generate_mixture_dataset, MixtureConfig};

use crate::common::{split_list, CliError, CliResult};
use crate::output::OutDir;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Embedding dimension
    #[arg(long, default_value_t = 256)]
    pub dim: usize,

    /// Semantic mixing fraction in [0, 1]
    #[arg(long)]
    pub alpha: f64,

    /// Standard deviation of the Gaussian noise
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,

    /// Comma-separated culture names
    #[arg(long, default_value = "Japanese,Nigerian,Peruvian,Finnish,German,Indian")]
    pub cultures: String,

    /// Comma-separated language codes
    #[arg(long, default_value = "ja,yo,es,fi,de,hi")]
    pub languages: String,

    /// Images per (culture, language) cell
    #[arg(long, default_value_t = 9)]
    pub images_per_cell: usize,

    /// Use standard basis vectors as anchors
    #[arg(long)]
    pub orthogonal: bool,
}

#[derive(Serialize)]
struct TruthRow<'a> {
    culture: &'a str,
    language: &'a str,
    alpha: f64,
}

pub fn synth(a: &SynthArgs, seed: u64, out: &mut OutDir) -> CliResult {
    let cfg = MixtureConfig {
        dim: a.dim,
        alpha: a.alpha,
        noise_sigma: a.sigma,
        seed,
        cultures: split_list(&a.cultures),
        languages: split_list(&a.languages),
        images_per_cell: a.images_per_cell,
        orthogonal: a.orthogonal,
    };
    let data = generate_mixture_dataset(&cfg).map_err(|e| CliError::Input(e.to_string()))?;
    let manifest = out.path("manifest.jsonl");
    let matrix = out.path("matrix.sosm");
    write_dataset(&data.dataset, manifest, matrix)?;
    out.write_csv(
        "truth.csv",
        data.truth.iter().map(|((c, l), &alpha)| TruthRow {
            culture: c,
            language: l,
            alpha,
        }),
    )
}
