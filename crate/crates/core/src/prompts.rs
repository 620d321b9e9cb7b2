//! Multilingual prompt construction from templates, culture terms and
//! human-provided translation tables.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{PersonTerm, Template};

pub const SOURCE_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PromptSpec {
    pub culture: String,
    pub person_term: PersonTerm,
    pub template: Template,
    pub language: String,
    pub text: String,
}

/// Renders the English base template.
pub fn render_english(template: Template, culture: &str, person_term: PersonTerm) -> String {
    match template {
        Template::A => format!("A photo of a {culture} {person_term}"),
        Template::B => format!("A {culture} {person_term}"),
        Template::C => format!("A photorealistic image of a {culture} {person_term}"),
    }
}

fn check_unique<T: Ord + Clone + std::fmt::Debug>(what: &str, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Empty(format!("no {what} given")));
    }
    let mut seen = BTreeSet::new();
    for it in items {
        if !seen.insert(it.clone()) {
            return Err(Error::Invariant(format!("duplicate {what}: {it:?}")));
        }
    }
    Ok(())
}

/// All English prompts for the cross product of the inputs, culture-major.
///
/// Culture names are compared case-insensitively after trimming, so "Dutch" and
/// "dutch " count as duplicates.
pub fn build_prompts(
    cultures: &[String],
    person_terms: &[PersonTerm],
    templates: &[Template],
) -> Result<Vec<PromptSpec>> {
    let normalized: Vec<String> = cultures.iter().map(|c| c.trim().to_lowercase()).collect();
    if normalized.iter().any(String::is_empty) {
        return Err(Error::Invariant("empty culture name".into()));
    }
    check_unique("culture", &normalized)?;
    check_unique("person term", person_terms)?;
    check_unique("template", templates)?;

    let mut out = Vec::with_capacity(cultures.len() * person_terms.len() * templates.len());
    for culture in cultures {
        let culture = culture.trim();
        for &template in templates {
            for &person_term in person_terms {
                out.push(PromptSpec {
                    culture: culture.to_string(),
                    person_term,
                    template,
                    language: SOURCE_LANGUAGE.to_string(),
                    text: render_english(template, culture, person_term),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TranslationKey {
    pub culture: String,
    pub person_term: PersonTerm,
    pub template: Template,
    pub language: String,
}

impl std::fmt::Display for TranslationKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.culture, self.person_term, self.template, self.language
        )
    }
}

pub type TranslationTable = BTreeMap<TranslationKey, String>;

#[derive(Debug, Serialize, Deserialize)]
struct TranslationRow {
    culture: String,
    person_term: PersonTerm,
    template: Template,
    language: String,
    text: String,
}

/// Reads a translation CSV with columns `culture, person_term, template, language, text`.
pub fn read_translations(path: impl AsRef<Path>) -> Result<TranslationTable> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut table = TranslationTable::new();
    for row in reader.deserialize() {
        let row: TranslationRow = row?;
        let key = TranslationKey {
            culture: row.culture.trim().to_string(),
            person_term: row.person_term,
            template: row.template,
            language: row.language.trim().to_string(),
        };
        if table.insert(key.clone(), row.text).is_some() {
            return Err(Error::Invariant(format!("duplicate translation for {key}")));
        }
    }
    Ok(table)
}

/// Newline-delimited culture list; blank lines are ignored.
pub fn read_cultures(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// One prompt per (source prompt, language), language-major.
///
/// English is passed through from the source prompts. Every other language must be
/// covered by `table`; all missing keys are reported together.
pub fn apply_translations(
    prompts: &[PromptSpec],
    table: &TranslationTable,
    languages: &[String],
) -> Result<Vec<PromptSpec>> {
    let mut seen = HashSet::new();
    if let Some(p) = prompts.iter().find(|p| p.language != SOURCE_LANGUAGE) {
        return Err(Error::Invariant(format!("source prompt '{}' is not English", p.text)));
    }
    let mut out = Vec::with_capacity(prompts.len() * languages.len());
    let mut missing = Vec::new();
    for language in languages {
        if !seen.insert(language.as_str()) {
            return Err(Error::Invariant(format!("duplicate language '{language}'")));
        }
        for p in prompts {
            if language == SOURCE_LANGUAGE {
                out.push(p.clone());
                continue;
            }
            let key = TranslationKey {
                culture: p.culture.clone(),
                person_term: p.person_term,
                template: p.template,
                language: language.clone(),
            };
            match table.get(&key).filter(|t| !t.trim().is_empty()) {
                Some(text) => out.push(PromptSpec {
                    language: language.clone(),
                    text: text.clone(),
                    ..p.clone()
                }),
                None => missing.push(key.to_string()),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    Ok(out)
}

pub fn write_prompts(path: impl AsRef<Path>, prompts: &[PromptSpec]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for p in prompts {
        w.serialize(TranslationRow {
            culture: p.culture.clone(),
            person_term: p.person_term,
            template: p.template,
            language: p.language.clone(),
            text: p.text.clone(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
