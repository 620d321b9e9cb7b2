//! Prompt grid construction and translation coverage.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sos_core::prompts::{
    apply_translations, build_prompts, read_cultures, read_translations, write_prompts, SOURCE_LANGUAGE,
};
use sos_core::{PersonTerm, Template};

use crate::common::CliResult;
use crate::output::OutDir;

#[derive(Debug, Clone, Args, Serialize)]
pub struct PromptsArgs {
    /// Newline-delimited culture names
    #[arg(long)]
    pub cultures: PathBuf,

    /// Translation CSV (culture, person_term, template, language, text)
    #[arg(long)]
    pub translations: Option<PathBuf>,

    /// Target languages; defaults to English plus every language in the translation table
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,

    /// Templates to render
    #[arg(long, value_delimiter = ',', default_values = ["a", "b", "c"])]
    pub templates: Vec<Template>,

    /// Person terms to render
    #[arg(long, value_delimiter = ',', default_values = ["person", "woman", "man"])]
    pub person_terms: Vec<PersonTerm>,
}

pub fn prompts(a: &PromptsArgs, out: &mut OutDir) -> CliResult {
    let cultures = read_cultures(&a.cultures)?;
    let english = build_prompts(&cultures, &a.person_terms, &a.templates)?;
    let table = match &a.translations {
        Some(path) => read_translations(path)?,
        None => Default::default(),
    };
    let languages = if a.languages.is_empty() {
        let mut set: BTreeSet<String> = table.keys().map(|k| k.language.clone()).collect();
        set.insert(SOURCE_LANGUAGE.to_string());
        set.into_iter().collect()
    } else {
        a.languages.clone()
    };
    let all = apply_translations(&english, &table, &languages)?;
    log::info!("{} prompts", all.len());
    write_prompts(out.path("prompts.csv"), &all)?;
    Ok(())
}
