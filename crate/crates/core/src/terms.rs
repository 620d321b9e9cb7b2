//! Lexical analysis of image descriptions.
//!
//! Descriptions are reduced to per-image token sets, grouped into one document per
//! (language, model) pair, IDF-weighted, and contrasted against the pooled
//! documents of all other languages of the same model with weighted log-odds
//! under an informative Dirichlet prior. Tokens are ranked by z-score.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{DescriptionRecord, EmbeddingRecord, StereotypeLexicon};

/// Common English function words.
pub const DEFAULT_STOPLIST: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "aren",
    "around",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "couldn",
    "did",
    "didn",
    "do",
    "does",
    "doesn",
    "doing",
    "don",
    "down",
    "during",
    "each",
    "either",
    "etc",
    "few",
    "for",
    "from",
    "further",
    "had",
    "hadn",
    "has",
    "hasn",
    "have",
    "haven",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "however",
    "i",
    "if",
    "in",
    "into",
    "is",
    "isn",
    "it",
    "its",
    "itself",
    "just",
    "like",
    "ll",
    "may",
    "me",
    "might",
    "more",
    "most",
    "must",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "one",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "re",
    "same",
    "she",
    "should",
    "shouldn",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "upon",
    "us",
    "ve",
    "very",
    "was",
    "wasn",
    "we",
    "were",
    "weren",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "whose",
    "why",
    "will",
    "with",
    "within",
    "without",
    "won",
    "would",
    "wouldn",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

/// Generic description terms without a visual referent that are filtered by default.
pub const DEFAULT_FILTER: &[&str] = &[
    // generic image describing terms
    "item",
    "product",
    "object",
    "hardship",
    "abandonment",
    "character",
    "couple",
    "text",
    "word",
    "font",
    "title",
    "subject",
    "depiction",
    "complexity",
    "texture",
    "photograph",
    "uneven",
    "person",
    "contours",
    "picturesque",
    "population",
    "highrise",
    "collage",
    "room",
    "portrait",
    "individual",
    "illustration",
    "figure",
    "abstract",
    "forehead",
    "mood",
    "outfit",
    "hair",
    "face",
    "wall",
    "pose",
    "shoulder",
    "people",
    "shirt",
    "head",
    "wrap",
    "group",
    "pack",
    "mute",
    // quantitative and temporal
    "20th",
    "19th",
    "century",
    "archival",
    "digital",
    "historical",
    // generic adjectives
    "richly",
    "tall",
    "dynamic",
    "dapple",
    "official",
    "blackandwhite",
    "updo",
    "minimalist",
    "welllit",
    "scenic",
    "simple",
    "chaotic",
    "fantastical",
    "bright",
    "vibrant",
    "grand",
    "unsettling",
    "classical",
    "clear",
    "long",
    "short",
    "intense",
    "densely",
    "rough",
    "neutral",
    "plain",
    "undisturbed",
    "gridlike",
    "casual",
    "peaceful",
    "tightly",
    "contemplative",
    "sparse",
    "richness",
    "heavy",
    "overcast",
    "dark",
    "soft",
    "brown",
    "detailed",
    "traditional",
    // directional and relational
    "north",
    "south",
    "east",
    "underneath",
    "outermost",
    "central",
    "directly",
    "fourth",
    "second",
    // generic verbs
    "elaborate",
    "crash",
    "wear",
    "stand",
    "enchanting",
    "help",
    "desolate",
    "use",
    "neglect",
    "highlight",
    "stamp",
    // pronouns and person identifiers
    "man",
    "mans",
];

pub const MIN_TOKEN_LEN: usize = 3;

/// Unique lowercase alphabetic tokens of `text`, minus stopwords and filtered terms.
pub fn extract_terms(text: &str, stoplist: &HashSet<String>, filter: &HashSet<String>) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN)
        .map(str::to_lowercase)
        .filter(|t| !stoplist.contains(t) && !filter.contains(t))
        .collect()
}

/// Stoplist and filter list bundled for repeated extraction.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub stoplist: HashSet<String>,
    pub filter: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            stoplist: DEFAULT_STOPLIST.iter().map(|s| s.to_string()).collect(),
            filter: DEFAULT_FILTER.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Tokenizer {
    pub fn terms(&self, text: &str) -> BTreeSet<String> {
        extract_terms(text, &self.stoplist, &self.filter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DocKey {
    pub language: String,
    pub model: String,
}

/// Image counts per token for one (language, model) pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TermDocument {
    pub counts: BTreeMap<String, u64>,
    pub n_images: u64,
}

impl TermDocument {
    pub fn from_image_terms<'a>(images: impl IntoIterator<Item = &'a BTreeSet<String>>) -> Self {
        let mut doc = TermDocument::default();
        for terms in images {
            doc.n_images += 1;
            for t in terms {
                *doc.counts.entry(t.clone()).or_default() += 1;
            }
        }
        doc
    }

    /// Sum of several documents.
    pub fn pooled<'a>(docs: impl IntoIterator<Item = &'a TermDocument>) -> Self {
        let mut out = TermDocument::default();
        for d in docs {
            out.n_images += d.n_images;
            for (t, c) in &d.counts {
                *out.counts.entry(t.clone()).or_default() += c;
            }
        }
        out
    }

    fn weighted(&self, idf: Option<&BTreeMap<String, f64>>) -> BTreeMap<&str, f64> {
        self.counts
            .iter()
            .map(|(t, &c)| {
                let w = idf.and_then(|m| m.get(t)).copied().unwrap_or(1.0);
                (t.as_str(), c as f64 * w)
            })
            .collect()
    }
}

/// Per-image token sets grouped into documents.
#[derive(Debug, Clone, Default)]
pub struct TermCorpus {
    pub image_terms: BTreeMap<DocKey, Vec<BTreeSet<String>>>,
    /// Description ids without a manifest record.
    pub unmatched: Vec<String>,
}

impl TermCorpus {
    /// Joins descriptions to records by id and tokenizes them.
    pub fn build(records: &[EmbeddingRecord], descriptions: &[DescriptionRecord], tokenizer: &Tokenizer) -> Self {
        let by_id: BTreeMap<&str, &EmbeddingRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut corpus = TermCorpus::default();
        let mut sorted: Vec<&DescriptionRecord> = descriptions.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for d in sorted {
            match by_id.get(d.id.as_str()) {
                Some(r) => corpus
                    .image_terms
                    .entry(DocKey {
                        language: r.language.clone(),
                        model: r.model.clone(),
                    })
                    .or_default()
                    .push(tokenizer.terms(&d.text)),
                None => corpus.unmatched.push(d.id.clone()),
            }
        }
        if !corpus.unmatched.is_empty() {
            log::warn!("{} description(s) have no manifest record", corpus.unmatched.len());
        }
        corpus
    }

    pub fn documents(&self) -> BTreeMap<DocKey, TermDocument> {
        self.image_terms
            .iter()
            .map(|(k, imgs)| (k.clone(), TermDocument::from_image_terms(imgs)))
            .collect()
    }
}

/// Smoothed inverse document frequency `ln((1+N)/(1+df)) + 1`.
pub fn idf_weights<'a>(documents: impl IntoIterator<Item = &'a TermDocument>) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    let mut n = 0u64;
    for d in documents {
        n += 1;
        for (t, &c) in &d.counts {
            if c > 0 {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    df.into_iter()
        .map(|(t, k)| (t.to_string(), ((1.0 + n as f64) / (1.0 + k as f64)).ln() + 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSource {
    /// Relative frequencies of the contrast document.
    Rest,
    /// Relative frequencies of target and contrast combined.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FightingWordsConfig {
    /// Total prior strength.
    pub alpha0: f64,
    pub prior: PriorSource,
    /// Pseudo-count added to every vocabulary token of the prior source, so tokens
    /// absent from it keep a positive prior. Zero gives the unsmoothed prior.
    pub prior_floor: f64,
}

impl Default for FightingWordsConfig {
    fn default() -> Self {
        Self {
            alpha0: 100.0,
            prior: PriorSource::Rest,
            prior_floor: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermScore {
    pub token: String,
    pub delta: f64,
    pub z: f64,
}

/// Weighted log-odds of every token in `target` against `rest`.
///
/// Counts are multiplied by `idf` (missing tokens weigh 1). With prior frequencies
/// `f_w` the per-token prior is `alpha_w = alpha0 * f_w`, and
///
/// ```text
/// delta_w = ln((y_t + a) / (n_t + alpha0 - y_t - a)) - ln((y_r + a) / (n_r + alpha0 - y_r - a))
/// var_w   = 1 / (y_t + a) + 1 / (y_r + a)
/// z_w     = delta_w / sqrt(var_w)
/// ```
///
/// Output is in token order.
pub fn weighted_log_odds(
    target: &TermDocument,
    rest: &TermDocument,
    idf: Option<&BTreeMap<String, f64>>,
    cfg: &FightingWordsConfig,
) -> Result<Vec<TermScore>> {
    if cfg.alpha0.is_nan() || cfg.alpha0 <= 0.0 {
        return Err(Error::Domain(format!("alpha0 must be positive, got {}", cfg.alpha0)));
    }
    if cfg.prior_floor < 0.0 {
        return Err(Error::Domain("prior floor must be non-negative".into()));
    }
    let yt = target.weighted(idf);
    let yr = rest.weighted(idf);
    if yt.is_empty() || yr.is_empty() {
        return Err(Error::Empty("weighted log-odds needs non-empty documents".into()));
    }
    let vocab: BTreeSet<&str> = yt.keys().chain(yr.keys()).copied().collect();
    let prior_count = |w: &str| match cfg.prior {
        PriorSource::Rest => yr.get(w).copied().unwrap_or(0.0),
        PriorSource::Pooled => yr.get(w).copied().unwrap_or(0.0) + yt.get(w).copied().unwrap_or(0.0),
    };
    let prior_total: f64 = vocab.iter().map(|w| prior_count(w) + cfg.prior_floor).sum();
    if prior_total <= 0.0 {
        return Err(Error::Numeric("prior distribution has no mass".into()));
    }
    let nt: f64 = yt.values().sum();
    let nr: f64 = yr.values().sum();

    let mut out = Vec::with_capacity(vocab.len());
    for w in vocab {
        let alpha = cfg.alpha0 * (prior_count(w) + cfg.prior_floor) / prior_total;
        let t = yt.get(w).copied().unwrap_or(0.0);
        let r = yr.get(w).copied().unwrap_or(0.0);
        if alpha == 0.0 && t == 0.0 {
            continue;
        }
        let (a1, b1) = (t + alpha, nt + cfg.alpha0 - t - alpha);
        let (a2, b2) = (r + alpha, nr + cfg.alpha0 - r - alpha);
        if a1 <= 0.0 || b1 <= 0.0 || a2 <= 0.0 || b2 <= 0.0 {
            return Err(Error::Numeric(format!(
                "non-positive log argument for '{w}' (alpha0 {} too small?)",
                cfg.alpha0
            )));
        }
        let delta = (a1 / b1).ln() - (a2 / b2).ln();
        let sigma = (1.0 / a1 + 1.0 / a2).sqrt();
        out.push(TermScore {
            token: w.to_string(),
            delta,
            z: delta / sigma,
        });
    }
    Ok(out)
}

/// Tokens with `z > z_threshold`, by descending z then token, at most `k`.
pub fn top_terms(scores: &[TermScore], k: usize, z_threshold: f64) -> Vec<TermScore> {
    let mut sig = significant_terms(scores, z_threshold);
    sig.truncate(k);
    sig
}

/// Every token with `z > z_threshold`, ranked like [`top_terms`].
pub fn significant_terms(scores: &[TermScore], z_threshold: f64) -> Vec<TermScore> {
    let mut sig: Vec<TermScore> = scores.iter().filter(|s| s.z > z_threshold).cloned().collect();
    sig.sort_by(|a, b| b.z.total_cmp(&a.z).then_with(|| a.token.cmp(&b.token)));
    sig
}

/// Percentage of images whose term set contains `token`.
pub fn term_image_frequency(token: &str, image_terms: &[BTreeSet<String>]) -> Result<f64> {
    if image_terms.is_empty() {
        return Err(Error::Empty("term frequency over an empty group".into()));
    }
    let hits = image_terms.iter().filter(|s| s.contains(token)).count();
    Ok(100.0 * hits as f64 / image_terms.len() as f64)
}

fn matches_term(detected: &str, term: &str) -> bool {
    detected == term || detected.strip_suffix('s') == Some(term)
}

/// Percentage of the language's lexicon terms matched by at least one detected term.
/// A detected term also matches after stripping one trailing "s".
pub fn stereotype_coverage(detected: &BTreeSet<String>, lexicon: &StereotypeLexicon, language: &str) -> Result<f64> {
    let terms = lexicon
        .get(language)
        .ok_or_else(|| Error::Domain(format!("no lexicon entry for language '{language}'")))?;
    if terms.is_empty() {
        return Err(Error::Empty(format!("lexicon for '{language}' is empty")));
    }
    let matched = terms
        .iter()
        .filter(|t| detected.iter().any(|d| matches_term(&d.to_lowercase(), t)))
        .count();
    Ok(100.0 * matched as f64 / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermReportRow {
    pub language: String,
    pub model: String,
    pub token: String,
    pub delta: f64,
    pub z: f64,
    pub image_frequency_pct: f64,
}

/// Result of contrasting every document against the other languages of its model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TermAnalysis {
    /// Top-k rows per document, in document order.
    pub rows: Vec<TermReportRow>,
    /// All significant tokens per document.
    pub significant: BTreeMap<DocKey, BTreeSet<String>>,
    /// Documents without any other language for the same model.
    pub skipped: Vec<DocKey>,
}

pub fn analyze_terms(
    corpus: &TermCorpus,
    cfg: &FightingWordsConfig,
    k: usize,
    z_threshold: f64,
) -> Result<TermAnalysis> {
    let docs = corpus.documents();
    let idf = idf_weights(docs.values());
    let mut out = TermAnalysis::default();
    for (key, doc) in &docs {
        let rest = TermDocument::pooled(
            docs.iter()
                .filter(|(k, _)| k.model == key.model && k.language != key.language)
                .map(|(_, d)| d),
        );
        if rest.n_images == 0 || rest.counts.is_empty() || doc.counts.is_empty() {
            out.skipped.push(key.clone());
            continue;
        }
        let scores = weighted_log_odds(doc, &rest, Some(&idf), cfg)?;
        let sig = significant_terms(&scores, z_threshold);
        let images = &corpus.image_terms[key];
        for s in sig.iter().take(k) {
            out.rows.push(TermReportRow {
                language: key.language.clone(),
                model: key.model.clone(),
                token: s.token.clone(),
                delta: s.delta,
                z: s.z,
                image_frequency_pct: term_image_frequency(&s.token, images)?,
            });
        }
        out.significant
            .insert(key.clone(), sig.into_iter().map(|s| s.token).collect());
    }
    if !out.skipped.is_empty() {
        log::warn!("{} document(s) had no contrast languages", out.skipped.len());
    }
    Ok(out)
}
