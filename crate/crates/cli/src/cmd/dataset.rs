//! Subcommands that score an embedding dataset.

use std::collections::{BTreeMap, BTreeSet};

use clap::Args;
use serde::Serialize;
use sos_core::io::{read_dataset, read_manifest, validate_dataset, EmbeddingMatrix};
use sos_core::layers::{layer_sos_table, LayerOptions};
use sos_core::metrics::{
    heatmaps, model_language_medians, reference_vectors, score_dataset, strong_surface_flags, Axis, ImageScore,
};
use sos_core::stats::{mad_pairs, mean, mean_ci, pearson, PairedSeries};
use sos_core::visual::pca2;
use sos_core::{PersonTerm, Template};

use crate::common::{CliError, CliResult, DatasetArgs, ScoringArgs};
use crate::output::{cell, OutDir};

/// Label used in reports for groups aggregated over all models.
const ALL_MODELS: &str = "*";

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SosArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub scoring: ScoringArgs,
}

pub type RefsArgs = SosArgs;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub base: SosArgs,

    /// Confidence level of the interval
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PcaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub base: SosArgs,

    /// Only project images of this model
    #[arg(long)]
    pub model: Option<String>,

    /// Only project images of this language
    #[arg(long)]
    pub language: Option<String>,
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    valid: bool,
    records: usize,
    rows: usize,
    dim: usize,
    violations: &'a [sos_core::io::Violation],
}

pub fn validate(a: &ValidateArgs, out: &mut OutDir) -> CliResult {
    let is_csv = a.data.matrix.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (records, matrix) = if is_csv {
        let ds = read_dataset(&a.data.manifest, &a.data.matrix)?;
        (ds.records, ds.matrix)
    } else {
        // read separately so bad row indices are reported rather than fatal
        (read_manifest(&a.data.manifest)?, EmbeddingMatrix::read(&a.data.matrix)?)
    };
    let report = validate_dataset(&records, &matrix);
    out.write_json(
        "validation.json",
        &ValidationSummary {
            valid: report.is_valid(),
            records: records.len(),
            rows: matrix.rows(),
            dim: matrix.dim(),
            violations: &report.violations,
        },
    )?;
    if report.is_valid() {
        Ok(())
    } else {
        for v in &report.violations {
            log::error!("{v}");
        }
        Err(CliError::Invalid(report.violations.len()))
    }
}

pub fn refs(a: &RefsArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope(&a.data.load()?)?;
    let opts = a.scoring.options().references;
    let mut all = Vec::new();
    for axis in [Axis::Semantic, Axis::Surface] {
        all.extend(reference_vectors(&ds, axis, opts)?.into_values());
    }
    out.write_json("references.json", &all)
}

#[derive(Serialize)]
struct SosRow<'a> {
    culture: &'a str,
    language: &'a str,
    model: &'a str,
    layer: Option<u32>,
    n: usize,
    mean_sos: f64,
}

pub fn sos(a: &SosArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope(&a.data.load()?)?;
    let report = score_dataset(&ds, a.scoring.options())?;
    out.write_csv(
        "sos.csv",
        report.groups.iter().map(|g| SosRow {
            culture: &g.key.culture,
            language: &g.key.language,
            model: g.key.model.as_deref().unwrap_or(ALL_MODELS),
            layer: g.key.layer,
            n: g.per_image.len(),
            mean_sos: g.mean,
        }),
    )?;
    out.write_csv("images.csv", &report.images)?;
    out.write_json("heatmaps.json", &heatmaps(&report.groups))
}

#[derive(Serialize)]
struct FlagRow<'a> {
    model: &'a str,
    language: &'a str,
    median_sos: f64,
    flagged: bool,
}

#[derive(Serialize)]
struct FlagSummary<'a> {
    p25: f64,
    flagged: Vec<&'a (String, String)>,
}

pub fn flags(a: &SosArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope(&a.data.load()?)?;
    let report = score_dataset(&ds, a.scoring.options())?;
    let medians = model_language_medians(&report.groups)?;
    let flags = strong_surface_flags(&medians)?;
    out.write_csv(
        "flags.csv",
        medians.iter().map(|(k, &m)| FlagRow {
            model: &k.0,
            language: &k.1,
            median_sos: m,
            flagged: flags.flagged.contains(k),
        }),
    )?;
    out.write_json(
        "flags.json",
        &FlagSummary {
            p25: flags.p25,
            flagged: flags.flagged.iter().collect(),
        },
    )
}

/// Group identity shared across languages or subsets.
type CellKey = (String, Option<String>, Option<u32>);

/// Mean score per (culture, model, layer) for every value of `split`, summed in id order.
fn split_means<S: Ord>(
    images: &[ImageScore],
    pooled_models: bool,
    split: impl Fn(&ImageScore) -> Option<S>,
) -> BTreeMap<S, BTreeMap<CellKey, f64>> {
    let mut acc: BTreeMap<S, BTreeMap<CellKey, BTreeMap<&str, f64>>> = BTreeMap::new();
    for img in images {
        let Some(s) = split(img) else { continue };
        let key = (
            img.culture.clone(),
            (!pooled_models).then(|| img.model.clone()),
            img.layer,
        );
        acc.entry(s)
            .or_default()
            .entry(key)
            .or_default()
            .insert(&img.id, img.sos);
    }
    acc.into_iter()
        .map(|(s, cells)| {
            let means = cells
                .into_iter()
                .map(|(k, v)| (k, v.values().sum::<f64>() / v.len() as f64))
                .collect();
            (s, means)
        })
        .collect()
}

fn pcc_or_none<K>(s: &PairedSeries<K>) -> Option<f64> {
    pearson(s).map_err(|e| log::warn!("correlation undefined: {e}")).ok()
}

pub fn corr(a: &SosArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope(&a.data.load()?)?;
    let languages: BTreeSet<&str> = ds.records.iter().map(|r| r.language.as_str()).collect();
    if languages.len() < 2 {
        return Err(CliError::Input("need ≥2 languages".into()));
    }
    let report = score_dataset(&ds, a.scoring.options())?;
    // one vector per language over (culture, model, layer) cells, culture index implied
    let by_lang = split_means(&report.images, a.scoring.pool_models, |img| Some(img.language.clone()));
    let langs: Vec<&String> = by_lang.keys().collect();
    let mut header = vec!["language".to_string()];
    header.extend(langs.iter().map(|l| l.to_string()));
    let rows: Vec<Vec<String>> = langs
        .iter()
        .map(|la| {
            let mut row = vec![la.to_string()];
            row.extend(langs.iter().map(|lb| {
                let s = PairedSeries::join(&by_lang[*la], &by_lang[*lb]);
                cell(pcc_or_none(&s))
            }));
            row
        })
        .collect();
    out.write_table("corr.csv", &header, &rows)
}

#[derive(Serialize)]
struct LayerRow<'a> {
    model: &'a str,
    layer: u32,
    language: &'a str,
    n: usize,
    mean_sos: f64,
}

pub fn layers(a: &SosArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope(&a.data.load()?)?;
    let tables = layer_sos_table(
        &ds,
        &LayerOptions {
            normalize: !a.scoring.no_normalize,
            exclude_language: None,
        },
    )?;
    let rows: Vec<LayerRow> = tables
        .iter()
        .flat_map(|t| {
            t.cells.iter().map(|((layer, language), &m)| LayerRow {
                model: &t.model,
                layer: *layer,
                language,
                n: t.supports[&(*layer, language.clone())],
                mean_sos: m,
            })
        })
        .collect();
    out.write_csv("layers.csv", rows)
}

#[derive(Serialize)]
struct RobustnessRow {
    factor: &'static str,
    a: String,
    b: String,
    n: usize,
    mad: Option<f64>,
    pcc: Option<f64>,
}

fn compare_subsets<S: Ord + ToString>(
    factor: &'static str,
    subsets: &BTreeMap<S, BTreeMap<(String, CellKey), f64>>,
) -> Vec<RobustnessRow> {
    let keys: Vec<&S> = subsets.keys().collect();
    let mut rows = Vec::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let s = PairedSeries::join(&subsets[*a], &subsets[*b]);
            rows.push(RobustnessRow {
                factor,
                a: a.to_string(),
                b: b.to_string(),
                n: s.len(),
                mad: mad_pairs(&s).ok(),
                pcc: pcc_or_none(&s),
            });
        }
    }
    rows
}

pub fn robustness(a: &SosArgs, out: &mut OutDir) -> CliResult {
    let ds = a.scoring.scope_all_concepts(&a.data.load()?)?;
    let report = score_dataset(&ds, a.scoring.options())?;
    let pooled = a.scoring.pool_models;
    let keyed = |m: BTreeMap<String, BTreeMap<CellKey, f64>>| -> BTreeMap<(String, CellKey), f64> {
        m.into_iter()
            .flat_map(|(lang, cells)| cells.into_iter().map(move |(k, v)| ((lang.clone(), k), v)))
            .collect()
    };

    let mut templates: BTreeMap<Template, BTreeMap<(String, CellKey), f64>> = BTreeMap::new();
    for t in Template::ALL {
        let per_lang = split_means(&report.images, pooled, |img| {
            (img.template == t && img.concept == a.scoring.concept).then(|| img.language.clone())
        });
        if !per_lang.is_empty() {
            templates.insert(t, keyed(per_lang));
        }
    }
    let concept_names: BTreeSet<&str> = ds.records.iter().map(|r| r.concept.as_str()).collect();
    let mut concepts: BTreeMap<String, BTreeMap<(String, CellKey), f64>> = BTreeMap::new();
    for c in &concept_names {
        let per_lang = split_means(&report.images, pooled, |img| {
            (img.concept == *c).then(|| img.language.clone())
        });
        concepts.insert(c.to_string(), keyed(per_lang));
    }
    if concepts.len() < 2 {
        log::info!("single concept in dataset; no concept comparison");
    }
    let mut rows = compare_subsets("template", &templates);
    rows.extend(compare_subsets("concept", &concepts));
    out.write_csv("robustness.csv", rows)
}

#[derive(Serialize)]
struct SegmentRow<'a> {
    language: &'a str,
    person_term: PersonTerm,
    n: usize,
    mean: f64,
    half_width: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

pub fn segments(a: &SegmentsArgs, out: &mut OutDir) -> CliResult {
    let ds = a.base.scoring.scope(&a.base.data.load()?)?;
    let report = score_dataset(&ds, a.base.scoring.options())?;
    let mut acc: BTreeMap<(&str, PersonTerm), BTreeMap<&str, f64>> = BTreeMap::new();
    for img in &report.images {
        acc.entry((&img.language, img.person_term))
            .or_default()
            .insert(&img.id, img.sos);
    }
    let mut rows = Vec::new();
    for ((language, person_term), scores) in &acc {
        let values: Vec<f64> = scores.values().copied().collect();
        let m = mean(&values)?;
        let hw = if values.len() >= 2 {
            Some(mean_ci(&values, a.level)?.1)
        } else {
            None
        };
        rows.push(SegmentRow {
            language,
            person_term: *person_term,
            n: values.len(),
            mean: m,
            half_width: hw,
            ci_low: hw.map(|h| m - h),
            ci_high: hw.map(|h| m + h),
        });
    }
    out.write_csv("segments.csv", rows)
}

#[derive(Serialize)]
struct PcaRow<'a> {
    id: &'a str,
    culture: &'a str,
    language: &'a str,
    model: &'a str,
    pc1: f64,
    pc2: f64,
}

#[derive(Serialize)]
struct PcaSummary {
    n: usize,
    dim: usize,
    explained_variance: [f64; 2],
}

pub fn pca(a: &PcaArgs, out: &mut OutDir) -> CliResult {
    let ds = a.base.scoring.scope(&a.base.data.load()?)?;
    let ds = ds.filter(|r| {
        a.model.as_ref().is_none_or(|m| &r.model == m) && a.language.as_ref().is_none_or(|l| &r.language == l)
    });
    let rows: Vec<Vec<f64>> = ds
        .records
        .iter()
        .map(|r| {
            let v = ds.matrix.row_f64(r.row);
            if a.base.scoring.no_normalize {
                v
            } else {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            }
        })
        .collect();
    let p = pca2(&rows)?;
    out.write_csv(
        "pca.csv",
        ds.records.iter().zip(&p.projections).map(|(r, xy)| PcaRow {
            id: &r.id,
            culture: &r.culture,
            language: &r.language,
            model: &r.model,
            pc1: xy[0],
            pc2: xy[1],
        }),
    )?;
    out.write_json(
        "pca.json",
        &PcaSummary {
            n: rows.len(),
            dim: ds.matrix.dim(),
            explained_variance: p.explained,
        },
    )
}
