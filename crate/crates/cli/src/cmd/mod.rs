pub mod annotate;
pub mod colors;
pub mod dataset;
pub mod prompts;
pub mod synth;
pub mod terms;
