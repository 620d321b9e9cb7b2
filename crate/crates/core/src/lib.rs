//! Cross-lingual semantic-versus-surface analysis of text-to-image generations.
//!
//! The crate scores each generated image by how much closer its embedding sits to
//! the culture it was prompted for than to the language the prompt was written in,
//! and provides the statistics, term analysis and color analytics around that score.

pub mod error;
pub mod io;
pub mod layers;
pub mod metrics;
pub mod prompts;
pub mod stats;
pub mod synth;
pub mod terms;
pub mod visual;

pub use error::{Error, Result};
pub use io::{
    AnnotationOption, AnnotationRecord, Dataset, DescriptionRecord, EmbeddingMatrix, EmbeddingRecord, OptionRole,
    PacketItem, PersonTerm, StereotypeLexicon, Template, ValidationReport,
};
pub use metrics::{GroupKey, ImageScore, ReferenceOptions, ScoreOptions, ScoreReport, SoSResult};
pub use stats::{HumanLabel, PairedSeries, Tendency};
pub use synth::{MixtureConfig, SynthDataset};
pub use terms::{FightingWordsConfig, TermCorpus, TermDocument, TermScore};
pub use visual::{ColorOptions, ColorProfile, ColorSpace, Rgb};
