//! Annotation packets, inter-annotator agreement and metric validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sos_core::io::{
    read_annotations, write_packet, AnnotationOption, AnnotationRecord, EmbeddingMatrix, OptionRole, PacketItem,
};
use sos_core::metrics::{clip_baseline_choice, score_dataset, GroupKey, CLIP_SCORE_WEIGHT};
use sos_core::prompts::SOURCE_LANGUAGE;
use sos_core::stats::{
    annotator_cosine, fleiss_kappa, majority_label, pairwise_label_agreement, stratified_sample, validation_metrics,
    HumanLabel, Tendency, ValidationOutcome,
};
use sos_core::EmbeddingRecord;

use crate::cmd::dataset::SosArgs;
use crate::common::{CliError, CliResult};
use crate::output::OutDir;

const DISTRACTORS: usize = 3;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub base: SosArgs,

    /// CSV (language, culture) naming the culture associated with each prompt language
    #[arg(long)]
    pub surface_cultures: PathBuf,

    /// Number of groups to sample
    #[arg(long, short, default_value_t = 50)]
    pub n: usize,

    /// Equal-width score bins for stratification
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Deserialize)]
struct SurfaceRow {
    language: String,
    culture: String,
}

fn read_surface_cultures(path: &PathBuf) -> CliResult<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut map = BTreeMap::new();
    for row in reader.deserialize() {
        let row: SurfaceRow = row?;
        if map.insert(row.language.clone(), row.culture).is_some() {
            return Err(CliError::Input(format!("language '{}' listed twice", row.language)));
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct SampleRow<'a> {
    culture: &'a str,
    language: &'a str,
    model: &'a str,
    layer: Option<u32>,
    mean_sos: f64,
    image_id: &'a str,
}

/// Groups whose culture is the one associated with their own language are skipped:
/// the semantic and surface options would coincide.
pub fn sample(a: &SampleArgs, seed: u64, out: &mut OutDir) -> CliResult {
    let ds = a.base.scoring.scope(&a.base.data.load()?)?;
    let surface = read_surface_cultures(&a.surface_cultures)?;
    let report = score_dataset(&ds, a.base.scoring.options())?;

    let mut eligible: BTreeMap<GroupKey, f64> = BTreeMap::new();
    let (mut unmapped, mut coinciding) = (0usize, 0usize);
    for g in &report.groups {
        match surface.get(&g.key.language) {
            None => unmapped += 1,
            Some(c) if *c == g.key.culture => coinciding += 1,
            Some(_) => {
                eligible.insert(g.key.clone(), g.mean);
            }
        }
    }
    if unmapped > 0 {
        log::warn!("{unmapped} group(s) skipped: language has no surface culture");
    }
    if coinciding > 0 {
        log::info!("{coinciding} group(s) skipped: culture matches its language");
    }
    if eligible.is_empty() {
        return Err(CliError::Input("no eligible groups to sample".into()));
    }
    let chosen = stratified_sample(&eligible, a.n, a.bins, seed)?;

    let pool: BTreeSet<&str> = ds
        .records
        .iter()
        .map(|r| r.culture.as_str())
        .chain(surface.values().map(String::as_str))
        .collect();
    let groups: BTreeMap<&GroupKey, &BTreeMap<String, f64>> =
        report.groups.iter().map(|g| (&g.key, &g.per_image)).collect();

    // separate stream from the one used for stratification
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut items = Vec::with_capacity(chosen.len());
    let mut rows = Vec::with_capacity(chosen.len());
    for key in &chosen {
        let ids: Vec<&String> = groups[key].keys().collect();
        let image_id = ids[rng.random_range(0..ids.len())];
        let semantic = key.culture.as_str();
        let surface_culture = surface[&key.language].as_str();
        let candidates: Vec<&str> = pool
            .iter()
            .copied()
            .filter(|c| *c != semantic && *c != surface_culture)
            .collect();
        if candidates.len() < DISTRACTORS {
            return Err(CliError::Input(format!(
                "need at least {DISTRACTORS} distractor cultures, have {}",
                candidates.len()
            )));
        }
        let mut options = vec![
            AnnotationOption {
                culture: semantic.to_string(),
                role: OptionRole::Semantic,
            },
            AnnotationOption {
                culture: surface_culture.to_string(),
                role: OptionRole::Surface,
            },
        ];
        let mut picks = index::sample(&mut rng, candidates.len(), DISTRACTORS).into_vec();
        picks.sort_unstable();
        options.extend(picks.into_iter().map(|i| AnnotationOption {
            culture: candidates[i].to_string(),
            role: OptionRole::Distractor,
        }));
        options.shuffle(&mut rng);
        items.push(PacketItem {
            image_id: image_id.clone(),
            options,
        });
        rows.push(SampleRow {
            culture: semantic,
            language: &key.language,
            model: key.model.as_deref().unwrap_or("*"),
            layer: key.layer,
            mean_sos: eligible[key],
            image_id,
        });
    }
    write_packet(out.path("packet.csv"), &items)?;
    out.write_csv("sample.csv", rows)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AgreeArgs {
    /// Annotation CSV (image_id, annotator_id, chosen_culture, opt1..opt5, role1..role5)
    #[arg(long)]
    pub annotations: PathBuf,
}

/// Annotations grouped by image, then annotator.
type ByImage = BTreeMap<String, BTreeMap<String, AnnotationRecord>>;

fn group_annotations(records: Vec<AnnotationRecord>) -> CliResult<ByImage> {
    let mut by: ByImage = BTreeMap::new();
    for r in records {
        let entry = by.entry(r.item.image_id.clone()).or_default();
        if let Some(other) = entry.values().next() {
            if other.item != r.item {
                return Err(CliError::Input(format!(
                    "image '{}' has different options across annotators",
                    r.item.image_id
                )));
            }
        }
        let image = r.item.image_id.clone();
        let annotator = r.annotator_id.clone();
        if entry.insert(annotator.clone(), r).is_some() {
            return Err(CliError::Input(format!(
                "annotator '{annotator}' labeled image '{image}' twice"
            )));
        }
    }
    if by.is_empty() {
        return Err(CliError::Input("no annotations".into()));
    }
    Ok(by)
}

fn majority_of(annotations: &BTreeMap<String, AnnotationRecord>) -> Option<HumanLabel> {
    let roles: Vec<OptionRole> = annotations.values().map(|r| r.chosen_role()).collect();
    majority_label(&roles).map(HumanLabel::from)
}

#[derive(Serialize)]
struct LabelKappa {
    semantic: Option<f64>,
    surface: Option<f64>,
    distractor: Option<f64>,
}

#[derive(Serialize)]
struct PairAgreement<'a> {
    a: &'a str,
    b: &'a str,
    items: usize,
    cosine: Option<f64>,
    label_kappa: LabelKappa,
}

#[derive(Serialize, Default)]
struct MajorityCounts {
    semantic: usize,
    surface: usize,
    other: usize,
    tied: usize,
}

#[derive(Serialize)]
struct AgreementReport<'a> {
    items: usize,
    annotators: Vec<&'a str>,
    fleiss_kappa: Option<f64>,
    fleiss_items: usize,
    pairs: Vec<PairAgreement<'a>>,
    majority: MajorityCounts,
    per_label_statistic: &'static str,
}

fn undefined_as_none(r: sos_core::Result<f64>) -> Option<f64> {
    r.map_err(|e| log::warn!("{e}")).ok()
}

pub fn agree(a: &AgreeArgs, out: &mut OutDir) -> CliResult {
    let by = group_annotations(read_annotations(&a.annotations)?)?;
    let annotators: Vec<&str> = by
        .values()
        .flat_map(|m| m.keys().map(String::as_str))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Fleiss needs every rater on every item, so only complete items count
    let complete: Vec<Vec<usize>> = by
        .values()
        .filter(|m| m.len() == annotators.len())
        .map(|m| m.values().map(|r| r.chosen_index()).collect())
        .collect();
    let fleiss = if annotators.len() >= 2 && !complete.is_empty() {
        undefined_as_none(fleiss_kappa(&complete))
    } else {
        None
    };

    let mut pairs = Vec::new();
    for (i, x) in annotators.iter().enumerate() {
        for y in &annotators[i + 1..] {
            let shared: Vec<(&AnnotationRecord, &AnnotationRecord)> =
                by.values().filter_map(|m| Some((m.get(*x)?, m.get(*y)?))).collect();
            let idx = |f: fn(&(&AnnotationRecord, &AnnotationRecord)) -> usize| -> Vec<usize> {
                shared.iter().map(f).collect()
            };
            let (ix, iy) = (idx(|p| p.0.chosen_index()), idx(|p| p.1.chosen_index()));
            let rx: Vec<OptionRole> = shared.iter().map(|p| p.0.chosen_role()).collect();
            let ry: Vec<OptionRole> = shared.iter().map(|p| p.1.chosen_role()).collect();
            let kappa = |role| {
                if shared.is_empty() {
                    None
                } else {
                    undefined_as_none(pairwise_label_agreement(&rx, &ry, &role))
                }
            };
            pairs.push(PairAgreement {
                a: x,
                b: y,
                items: shared.len(),
                cosine: if shared.is_empty() {
                    None
                } else {
                    undefined_as_none(annotator_cosine(&ix, &iy, sos_core::io::OPTIONS_PER_ITEM))
                },
                label_kappa: LabelKappa {
                    semantic: kappa(OptionRole::Semantic),
                    surface: kappa(OptionRole::Surface),
                    distractor: kappa(OptionRole::Distractor),
                },
            });
        }
    }

    let mut majority = MajorityCounts::default();
    for m in by.values() {
        match majority_of(m) {
            Some(HumanLabel::Semantic) => majority.semantic += 1,
            Some(HumanLabel::Surface) => majority.surface += 1,
            Some(HumanLabel::Other) => majority.other += 1,
            None => majority.tied += 1,
        }
    }
    out.write_json(
        "agreement.json",
        &AgreementReport {
            items: by.len(),
            annotators: annotators.clone(),
            fleiss_kappa: fleiss,
            fleiss_items: complete.len(),
            pairs,
            majority,
            per_label_statistic: "cohen_kappa_binarized",
        },
    )
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateMetricArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub base: SosArgs,

    /// Annotation CSV with human choices
    #[arg(long)]
    pub annotations: PathBuf,

    /// Caption index (JSON Lines of {culture, row}) for the CLIPScore baseline
    #[arg(long, requires = "caption_matrix")]
    pub caption_index: Option<PathBuf>,

    /// Caption embedding matrix for the CLIPScore baseline
    #[arg(long, requires = "caption_index")]
    pub caption_matrix: Option<PathBuf>,

    /// CLIPScore weight
    #[arg(long, default_value_t = CLIP_SCORE_WEIGHT)]
    pub clip_weight: f64,
}

#[derive(Deserialize)]
struct CaptionEntry {
    culture: String,
    row: usize,
}

fn read_captions(index: &PathBuf, matrix: &PathBuf) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let m = EmbeddingMatrix::read(matrix)?;
    let text =
        std::fs::read_to_string(index).map_err(|e| CliError::Input(format!("cannot read {}: {e}", index.display())))?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let e: CaptionEntry = serde_json::from_str(line)?;
        if e.row >= m.rows() {
            return Err(CliError::Input(format!(
                "caption row {} for '{}' outside matrix with {} rows",
                e.row,
                e.culture,
                m.rows()
            )));
        }
        if out.insert(e.culture.clone(), m.row_f64(e.row)).is_some() {
            return Err(CliError::Input(format!("duplicate caption for '{}'", e.culture)));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct ItemRow<'a> {
    image_id: &'a str,
    culture: &'a str,
    language: &'a str,
    model: &'a str,
    group_mean_sos: f64,
    sos_choice: Tendency,
    clip_choice: Option<Tendency>,
    human_majority: Option<HumanLabel>,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    method: &'a str,
    subset: &'a str,
    accuracy: Option<f64>,
    precision_surface: Option<f64>,
    precision_semantic: Option<f64>,
    n_used: usize,
    n_tied: usize,
}

pub fn validate_metric(a: &ValidateMetricArgs, out: &mut OutDir) -> CliResult {
    let scoring = &a.base.scoring;
    let ds = scoring.scope(&a.base.data.load()?)?;
    let report = score_dataset(&ds, scoring.options())?;
    let by = group_annotations(read_annotations(&a.annotations)?)?;
    let captions = match (&a.caption_index, &a.caption_matrix) {
        (Some(i), Some(m)) => Some(read_captions(i, m)?),
        _ => None,
    };
    let records: BTreeMap<&str, &EmbeddingRecord> = ds.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let means: BTreeMap<&GroupKey, f64> = report.groups.iter().map(|g| (&g.key, g.mean)).collect();

    let mut rows = Vec::with_capacity(by.len());
    for (image_id, annotations) in &by {
        let r = records
            .get(image_id.as_str())
            .ok_or_else(|| CliError::Input(format!("annotated image '{image_id}' is not in the scored dataset")))?;
        let key = GroupKey {
            concept: r.concept.clone(),
            culture: r.culture.clone(),
            language: r.language.clone(),
            model: (!scoring.pool_models).then(|| r.model.clone()),
            layer: r.layer,
        };
        let mean = means[&key];
        let item = &annotations.values().next().expect("non-empty group").item;
        let clip_choice = match &captions {
            None => None,
            Some(caps) => {
                let caption = |role| {
                    let culture = item.culture_with(role).expect("checked item");
                    caps.get(culture)
                        .ok_or_else(|| CliError::Input(format!("no caption embedding for '{culture}'")))
                };
                let e = ds.matrix.row_f64(r.row);
                Some(clip_baseline_choice(
                    &e,
                    caption(OptionRole::Semantic)?,
                    caption(OptionRole::Surface)?,
                    a.clip_weight,
                )?)
            }
        };
        rows.push(ItemRow {
            image_id,
            culture: &r.culture,
            language: &r.language,
            model: &r.model,
            group_mean_sos: mean,
            sos_choice: Tendency::from_sos(mean),
            clip_choice,
            human_majority: majority_of(annotations),
        });
    }

    let mut metrics = Vec::new();
    let mut push = |method: &'static str, subset: &'static str, outcome: ValidationOutcome| {
        metrics.push(MetricRow {
            method,
            subset,
            accuracy: outcome.accuracy,
            precision_surface: outcome.precision_surface,
            precision_semantic: outcome.precision_semantic,
            n_used: outcome.n_used,
            n_tied: outcome.n_tied,
        });
    };
    for (subset, keep) in [("all", false), ("no_english", true)] {
        let scoped: Vec<&ItemRow> = rows
            .iter()
            .filter(|r| !(keep && r.language == SOURCE_LANGUAGE))
            .collect();
        let truth: Vec<Option<HumanLabel>> = scoped.iter().map(|r| r.human_majority).collect();
        let sos_preds: Vec<Tendency> = scoped.iter().map(|r| r.sos_choice).collect();
        push("sos", subset, validation_metrics(&sos_preds, &truth)?);
        if captions.is_some() {
            let clip: Vec<Tendency> = scoped.iter().map(|r| r.clip_choice.expect("computed")).collect();
            push("clipscore", subset, validation_metrics(&clip, &truth)?);
        }
    }
    out.write_csv("validation_metrics.csv", metrics)?;
    out.write_csv("validation_items.csv", rows)
}
