//! Layer-wise scoring for images generated from intermediate text-encoder layers.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::metrics::{score_dataset, ReferenceOptions, ScoreOptions};

/// Mean score per (layer, language) for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerTable {
    pub model: String,
    pub cells: BTreeMap<(u32, String), f64>,
    pub supports: BTreeMap<(u32, String), usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerOptions {
    pub normalize: bool,
    /// Language dropped before any reference is built (e.g. `en`).
    pub exclude_language: Option<String>,
}

impl Default for LayerOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            exclude_language: None,
        }
    }
}

/// One table per model, in model order.
///
/// References come from each (layer, model) stratum alone; a cell averages every
/// image of its stratum and language over cultures, seeds, templates and person terms.
pub fn layer_sos_table(dataset: &Dataset, opts: &LayerOptions) -> Result<Vec<LayerTable>> {
    let layered = dataset.records.iter().filter(|r| r.layer.is_some()).count();
    if layered == 0 {
        return Err(Error::Invariant("no records carry a layer index".into()));
    }
    if layered != dataset.records.len() {
        return Err(Error::Invariant(format!(
            "mixed dataset: {layered} layered and {} unlayered records",
            dataset.records.len() - layered
        )));
    }
    let scoped = match &opts.exclude_language {
        Some(lang) => dataset.filter(|r| &r.language != lang),
        None => dataset.clone(),
    };
    if scoped.records.is_empty() {
        return Err(Error::Empty("no records left after language exclusion".into()));
    }
    let report = score_dataset(
        &scoped,
        ScoreOptions {
            references: ReferenceOptions {
                normalize: opts.normalize,
                pool_across_models: false,
            },
            aggregate_across_models: false,
        },
    )?;

    // id-ordered accumulation keeps cells independent of record order
    type Cells<'a> = BTreeMap<(u32, String), BTreeMap<&'a str, f64>>;
    let mut acc: BTreeMap<String, Cells> = BTreeMap::new();
    for img in &report.images {
        let layer = img.layer.expect("checked above");
        acc.entry(img.model.clone())
            .or_default()
            .entry((layer, img.language.clone()))
            .or_default()
            .insert(&img.id, img.sos);
    }
    Ok(acc
        .into_iter()
        .map(|(model, cells)| {
            let mut table = LayerTable {
                model,
                cells: BTreeMap::new(),
                supports: BTreeMap::new(),
            };
            for (key, scores) in cells {
                let n = scores.len();
                table.cells.insert(key.clone(), scores.values().sum::<f64>() / n as f64);
                table.supports.insert(key, n);
            }
            table
        })
        .collect())
}
