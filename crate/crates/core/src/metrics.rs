//! Surface-over-semantics scoring.
//!
//! Every image embedding `e` is compared against two reference centroids: the
//! semantic reference of the culture named in its prompt and the surface
//! reference of the prompt language. The per-image score is
//! `cos(sem, e) - cos(sur, e)`; negative values mean the image sits closer to
//! what the language produces than to what the culture produces.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{Dataset, EmbeddingRecord, PersonTerm, Template};
use crate::stats::{median, percentile, Tendency};

/// Default CLIPScore weight.
pub const CLIP_SCORE_WEIGHT: f64 = 2.5;

/// Cosine similarity of two equal-length, nonzero vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Domain(format!("dimension mismatch: {} vs {}", u.len(), v.len())));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine with a zero vector".into()));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("cannot normalize a zero vector".into()));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Keyed by prompt language.
    Surface,
    /// Keyed by culture.
    Semantic,
}

/// Identifies one reference centroid.
///
/// `model` is `None` for references pooled across models. Layered records are
/// always referenced within their own (layer, model) stratum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RefKey {
    pub axis: Axis,
    pub value: String,
    pub concept: String,
    pub model: Option<String>,
    pub layer: Option<u32>,
}

impl RefKey {
    pub fn for_record(record: &EmbeddingRecord, axis: Axis, pool_across_models: bool) -> Self {
        let value = match axis {
            Axis::Surface => record.language.clone(),
            Axis::Semantic => record.culture.clone(),
        };
        let per_model = !pool_across_models || record.layer.is_some();
        RefKey {
            axis,
            value,
            concept: record.concept.clone(),
            model: per_model.then(|| record.model.clone()),
            layer: record.layer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceVector {
    pub key: RefKey,
    pub vector: Vec<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceOptions {
    /// Unit-normalize embeddings before averaging.
    pub normalize: bool,
    pub pool_across_models: bool,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            pool_across_models: true,
        }
    }
}

/// Mean embedding per group along `axis`.
///
/// Members of a group are summed in id order, so the result does not depend on
/// record order.
pub fn reference_vectors(
    dataset: &Dataset,
    axis: Axis,
    opts: ReferenceOptions,
) -> Result<BTreeMap<RefKey, ReferenceVector>> {
    let mut groups: BTreeMap<RefKey, Vec<&EmbeddingRecord>> = BTreeMap::new();
    for r in &dataset.records {
        groups
            .entry(RefKey::for_record(r, axis, opts.pool_across_models))
            .or_default()
            .push(r);
    }
    let dim = dataset.matrix.dim();
    let mut out = BTreeMap::new();
    for (key, mut members) in groups {
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut sum = vec![0.0f64; dim];
        for r in &members {
            let row = dataset.matrix.row_f64(r.row);
            let row = if opts.normalize {
                unit(&row).map_err(|_| Error::Domain(format!("zero embedding for '{}'", r.id)))?
            } else {
                row
            };
            for (s, v) in sum.iter_mut().zip(&row) {
                *s += v;
            }
        }
        let support = members.len();
        let vector: Vec<f64> = sum.into_iter().map(|s| s / support as f64).collect();
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::Domain(format!(
                "reference for {:?} '{}' is the zero vector",
                key.axis, key.value
            )));
        }
        out.insert(key.clone(), ReferenceVector { key, vector, support });
    }
    Ok(out)
}

/// Score of one image. `out_of_range` is set when the raw difference leaves `[-1, 1]`;
/// the value itself is never clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageSos {
    pub value: f64,
    pub out_of_range: bool,
}

pub fn sos_image(e: &[f64], sem: &[f64], sur: &[f64]) -> Result<ImageSos> {
    let value = cosine(sem, e)? - cosine(sur, e)?;
    Ok(ImageSos {
        value,
        out_of_range: !(-1.0..=1.0).contains(&value),
    })
}

/// Groups per-image scores for aggregation. `model` is `None` when aggregated
/// across models.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub concept: String,
    pub culture: String,
    pub language: String,
    pub model: Option<String>,
    pub layer: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoSResult {
    pub key: GroupKey,
    pub per_image: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Mean of a group's per-image scores, summed in id order.
pub fn sos_aggregate(key: GroupKey, per_image: BTreeMap<String, f64>) -> Result<SoSResult> {
    if per_image.is_empty() {
        return Err(Error::Empty(format!(
            "no images for ({}, {})",
            key.culture, key.language
        )));
    }
    let mean = per_image.values().sum::<f64>() / per_image.len() as f64;
    Ok(SoSResult { key, per_image, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreOptions {
    pub references: ReferenceOptions,
    /// Aggregate (culture, language) over all models instead of per model.
    pub aggregate_across_models: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageScore {
    pub id: String,
    pub concept: String,
    pub culture: String,
    pub language: String,
    pub model: String,
    pub layer: Option<u32>,
    pub template: Template,
    pub person_term: PersonTerm,
    pub sos: f64,
    pub out_of_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    /// Per-image scores in record order.
    pub images: Vec<ImageScore>,
    /// Group means in key order.
    pub groups: Vec<SoSResult>,
    pub out_of_range: usize,
}

/// Builds both reference sets, scores every image and aggregates per group.
///
/// Images are scored in parallel on the current rayon pool; all reductions are
/// sequential in a fixed order.
pub fn score_dataset(dataset: &Dataset, opts: ScoreOptions) -> Result<ScoreReport> {
    let refs = opts.references;
    let sem = reference_vectors(dataset, Axis::Semantic, refs)?;
    let sur = reference_vectors(dataset, Axis::Surface, refs)?;

    let images: Vec<ImageScore> = dataset
        .records
        .par_iter()
        .map(|r| {
            let s = &sem[&RefKey::for_record(r, Axis::Semantic, refs.pool_across_models)];
            let l = &sur[&RefKey::for_record(r, Axis::Surface, refs.pool_across_models)];
            let e = dataset.matrix.row_f64(r.row);
            let score = sos_image(&e, &s.vector, &l.vector).map_err(|err| Error::Domain(format!("{}: {err}", r.id)))?;
            Ok(ImageScore {
                id: r.id.clone(),
                concept: r.concept.clone(),
                culture: r.culture.clone(),
                language: r.language.clone(),
                model: r.model.clone(),
                layer: r.layer,
                template: r.template,
                person_term: r.person_term,
                sos: score.value,
                out_of_range: score.out_of_range,
            })
        })
        .collect::<Result<_>>()?;

    let mut grouped: BTreeMap<GroupKey, BTreeMap<String, f64>> = BTreeMap::new();
    for img in &images {
        let key = GroupKey {
            concept: img.concept.clone(),
            culture: img.culture.clone(),
            language: img.language.clone(),
            model: (!opts.aggregate_across_models).then(|| img.model.clone()),
            layer: img.layer,
        };
        grouped.entry(key).or_default().insert(img.id.clone(), img.sos);
    }
    let groups = grouped
        .into_iter()
        .map(|(k, v)| sos_aggregate(k, v))
        .collect::<Result<Vec<_>>>()?;
    let out_of_range = images.iter().filter(|i| i.out_of_range).count();
    if out_of_range > 0 {
        log::warn!("{out_of_range} image score(s) fall outside [-1, 1]");
    }
    Ok(ScoreReport {
        images,
        groups,
        out_of_range,
    })
}

/// Heatmap data for one model: rows are cultures, columns languages sorted by
/// their mean score (ascending, ties by name).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub model: Option<String>,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn heatmaps(groups: &[SoSResult]) -> Vec<Heatmap> {
    let mut by_model: BTreeMap<Option<String>, Vec<&SoSResult>> = BTreeMap::new();
    for g in groups {
        by_model.entry(g.key.model.clone()).or_default().push(g);
    }
    by_model
        .into_iter()
        .map(|(model, gs)| {
            let rows: Vec<String> = gs
                .iter()
                .map(|g| g.key.culture.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut col_vals: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            let mut cell: BTreeMap<(&str, &str), f64> = BTreeMap::new();
            for g in &gs {
                col_vals.entry(&g.key.language).or_default().push(g.mean);
                cell.insert((&g.key.culture, &g.key.language), g.mean);
            }
            let mut cols: Vec<(&str, f64)> = col_vals
                .iter()
                .map(|(l, v)| (*l, v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            cols.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
            let values = rows
                .iter()
                .map(|c| cols.iter().map(|(l, _)| cell.get(&(c.as_str(), *l)).copied()).collect())
                .collect();
            Heatmap {
                model,
                rows,
                cols: cols.into_iter().map(|(l, _)| l.to_string()).collect(),
                values,
            }
        })
        .collect()
}

/// CLIPScore: `weight * max(0, cos(image, caption))`.
pub fn clip_score(image: &[f64], caption: &[f64], weight: f64) -> Result<f64> {
    Ok(weight * cosine(image, caption)?.max(0.0))
}

/// Higher score wins; ties go to semantic.
pub fn choice_from_scores(semantic: f64, surface: f64) -> Tendency {
    if surface > semantic {
        Tendency::Surface
    } else {
        Tendency::Semantic
    }
}

/// Picks the caption (semantic culture vs surface culture) with the higher CLIPScore.
pub fn clip_baseline_choice(
    image: &[f64],
    caption_semantic: &[f64],
    caption_surface: &[f64],
    weight: f64,
) -> Result<Tendency> {
    if weight <= 0.0 {
        return Err(Error::Domain(format!(
            "CLIPScore weight must be positive, got {weight}"
        )));
    }
    Ok(choice_from_scores(
        clip_score(image, caption_semantic, weight)?,
        clip_score(image, caption_surface, weight)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongFlags<K> {
    pub p25: f64,
    pub flagged: BTreeSet<K>,
}

/// Flags every pair whose median is at or below the 25th percentile of all medians.
pub fn strong_surface_flags<K: Ord + Clone>(medians: &BTreeMap<K, f64>) -> Result<StrongFlags<K>> {
    let values: Vec<f64> = medians.values().copied().collect();
    let p25 = percentile(&values, 0.25)?;
    let flagged = medians
        .iter()
        .filter(|(_, &m)| m <= p25)
        .map(|(k, _)| k.clone())
        .collect();
    Ok(StrongFlags { p25, flagged })
}

/// Median of the (culture, language) group means for every (model, language) pair.
pub fn model_language_medians(groups: &[SoSResult]) -> Result<BTreeMap<(String, String), f64>> {
    let mut by: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for g in groups {
        let model = g.key.model.clone().unwrap_or_else(|| "*".into());
        by.entry((model, g.key.language.clone())).or_default().push(g.mean);
    }
    by.into_iter().map(|(k, v)| Ok((k, median(&v)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::EmbeddingMatrix;
    use proptest::prelude::*;

    fn rec(id: &str, model: &str, lang: &str, culture: &str, row: usize) -> EmbeddingRecord {
        EmbeddingRecord {
            id: id.into(),
            model: model.into(),
            language: lang.into(),
            culture: culture.into(),
            concept: "person".into(),
            template: Template::A,
            person_term: PersonTerm::Person,
            layer: None,
            seed: None,
            row,
        }
    }

    #[test]
    fn cosine_fixtures() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!((cosine(&[3.0, 4.0], &[4.0, 3.0]).unwrap() - 0.96).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sos_image_fixtures() {
        let (sem, sur) = ([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(sos_image(&[1.0, 0.0], &sem, &sur).unwrap().value, 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(sos_image(&[h, h], &sem, &sur).unwrap().value.abs() < 1e-15);
        let s = sos_image(&[0.6, 0.8], &sem, &sur).unwrap();
        assert!((s.value + 0.2).abs() < 1e-12);
        assert!(!s.out_of_range);
        // opposite references can leave [-1, 1]
        let wide = sos_image(&[1.0, 0.0], &[1.0, 0.0], &[-1.0, 0.0]).unwrap();
        assert_eq!(wide.value, 2.0);
        assert!(wide.out_of_range);
    }

    #[test]
    fn two_point_surface_reference() {
        let ds = Dataset {
            records: vec![rec("a", "m", "fi", "X", 0), rec("b", "m", "fi", "Y", 1)],
            matrix: EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap(),
        };
        let refs = reference_vectors(&ds, Axis::Surface, ReferenceOptions::default()).unwrap();
        let r = refs.values().next().unwrap();
        assert_eq!(r.vector, vec![0.5, 0.5]);
        assert_eq!(r.support, 2);
        assert_eq!(r.key.model, None);

        let sem = reference_vectors(&ds, Axis::Semantic, ReferenceOptions::default()).unwrap();
        assert_eq!(sem.len(), 2);
        assert_eq!(sem.values().next().unwrap().vector, vec![1.0, 0.0]);
    }

    #[test]
    fn pooled_reference_over_three_rows() {
        let rows = vec![vec![1.0, 2.0, 2.0], vec![0.0, 3.0, 4.0], vec![2.0, 0.0, 0.0]];
        let ds = Dataset {
            records: vec![
                rec("a", "m1", "de", "German", 0),
                rec("b", "m2", "fi", "German", 1),
                rec("c", "m2", "de", "German", 2),
            ],
            matrix: EmbeddingMatrix::from_rows(&rows, 3).unwrap(),
        };
        let opts = ReferenceOptions {
            normalize: false,
            pool_across_models: true,
        };
        let refs = reference_vectors(&ds, Axis::Semantic, opts).unwrap();
        assert_eq!(refs.len(), 1);
        let r = refs.values().next().unwrap();
        assert_eq!(r.support, 3);
        assert_eq!(r.vector, vec![1.0, 5.0 / 3.0, 2.0]);

        let per_model = reference_vectors(
            &ds,
            Axis::Semantic,
            ReferenceOptions {
                pool_across_models: false,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(per_model.len(), 2);
    }

    #[test]
    fn aggregate_fixtures() {
        let key = GroupKey {
            concept: "person".into(),
            culture: "c".into(),
            language: "l".into(),
            model: None,
            layer: None,
        };
        let m =
            |v: &[f64]| -> BTreeMap<String, f64> { v.iter().enumerate().map(|(i, x)| (format!("{i}"), *x)).collect() };
        assert_eq!(sos_aggregate(key.clone(), m(&[0.2, -0.2])).unwrap().mean, 0.0);
        assert_eq!(sos_aggregate(key.clone(), m(&[0.37])).unwrap().mean, 0.37);
        let nine = [0.1, -0.3, 0.05, 0.2, -0.15, 0.0, 0.33, -0.07, 0.12];
        let mut oracle = 0.0;
        for v in nine {
            oracle += v;
        }
        let got = sos_aggregate(key.clone(), m(&nine)).unwrap().mean;
        assert!((got - oracle / 9.0).abs() < 1e-15);
        assert!(sos_aggregate(key, BTreeMap::new()).is_err());
    }

    #[test]
    fn clip_choice_fixtures() {
        // image (1,0); captions at cosine 0.3 and 0.2
        let cap = |c: f64| [c, (1.0 - c * c).sqrt()];
        let img = [1.0, 0.0];
        assert_eq!(
            clip_baseline_choice(&img, &cap(0.3), &cap(0.2), 2.5).unwrap(),
            Tendency::Semantic
        );
        for w in [0.01, 1.0, 2.5, 100.0] {
            assert_eq!(
                clip_baseline_choice(&img, &cap(0.2), &cap(0.3), w).unwrap(),
                Tendency::Surface
            );
        }
        assert_eq!(
            clip_baseline_choice(&img, &cap(0.4), &cap(0.4), 2.5).unwrap(),
            Tendency::Semantic
        );
        assert!(clip_baseline_choice(&img, &[0.0, 0.0], &cap(0.4), 2.5).is_err());
    }

    #[test]
    fn strong_flag_fixtures() {
        let vals = [-0.08, -0.06, -0.04, -0.03, -0.02, -0.01, 0.0, 0.01];
        let medians: BTreeMap<usize, f64> = vals.iter().copied().enumerate().collect();
        let f = strong_surface_flags(&medians).unwrap();
        assert!((f.p25 + 0.045).abs() < 1e-12);
        assert_eq!(f.flagged, [0, 1].into_iter().collect());

        let equal: BTreeMap<usize, f64> = (0..4).map(|i| (i, -0.02)).collect();
        assert_eq!(strong_surface_flags(&equal).unwrap().flagged.len(), 4);
        let one: BTreeMap<&str, f64> = [("x", 0.3)].into_iter().collect();
        assert_eq!(strong_surface_flags(&one).unwrap().flagged.len(), 1);
    }

    #[test]
    fn heatmap_columns_sorted_by_language_mean() {
        let g = |c: &str, l: &str, m: f64| SoSResult {
            key: GroupKey {
                concept: "person".into(),
                culture: c.into(),
                language: l.into(),
                model: Some("m".into()),
                layer: None,
            },
            per_image: BTreeMap::new(),
            mean: m,
        };
        let hm = heatmaps(&[
            g("A", "de", 0.1),
            g("B", "de", 0.1),
            g("A", "fi", -0.2),
            g("B", "zh", 0.0),
        ]);
        assert_eq!(hm.len(), 1);
        assert_eq!(hm[0].cols, vec!["fi", "zh", "de"]);
        assert_eq!(hm[0].rows, vec!["A", "B"]);
        assert_eq!(hm[0].values[1], vec![None, Some(0.0), Some(0.1)]);
    }

    fn small_dataset(rows: Vec<Vec<f32>>, labels: Vec<(u8, u8, u8)>) -> Dataset {
        let dim = rows[0].len();
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, (m, l, c))| {
                rec(
                    &format!("img{i:02}"),
                    &format!("m{m}"),
                    &format!("l{l}"),
                    &format!("c{c}"),
                    i,
                )
            })
            .collect();
        Dataset {
            records,
            matrix: EmbeddingMatrix::from_rows(&rows, dim).unwrap(),
        }
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        (2usize..6, 2usize..20).prop_flat_map(|(dim, n)| {
            (
                prop::collection::vec(
                    prop::collection::vec(-1.0f32..1.0, dim)
                        .prop_filter("nonzero", |r| r.iter().any(|v| v.abs() > 1e-3)),
                    n,
                ),
                prop::collection::vec((0u8..3, 0u8..3, 0u8..3), n),
            )
                .prop_map(|(rows, labels)| small_dataset(rows, labels))
        })
    }

    proptest! {
        #[test]
        fn pooled_equals_support_weighted_per_model(ds in dataset_strategy()) {
            for axis in [Axis::Semantic, Axis::Surface] {
                let pooled = reference_vectors(&ds, axis, ReferenceOptions::default()).unwrap();
                let per = reference_vectors(&ds, axis, ReferenceOptions { pool_across_models: false, ..Default::default() }).unwrap();
                for (k, r) in &pooled {
                    let parts: Vec<_> = per.values().filter(|p| p.key.value == k.value).collect();
                    let support: usize = parts.iter().map(|p| p.support).sum();
                    prop_assert_eq!(support, r.support);
                    for d in 0..r.vector.len() {
                        let w: f64 = parts.iter().map(|p| p.vector[d] * p.support as f64).sum::<f64>() / support as f64;
                        prop_assert!((w - r.vector[d]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn reordering_records_changes_nothing(ds in dataset_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = ds.clone();
            shuffled.records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = score_dataset(&ds, ScoreOptions::default()).unwrap();
            let b = score_dataset(&shuffled, ScoreOptions::default()).unwrap();
            prop_assert_eq!(&a.groups, &b.groups);
        }

        #[test]
        fn unit_references_bound_scores(ds in dataset_strategy()) {
            let r = score_dataset(&ds, ScoreOptions::default()).unwrap();
            prop_assert!(r.images.iter().all(|i| i.sos.abs() <= 2.0));
        }

        #[test]
        fn aggregate_idempotent_under_duplication(vals in prop::collection::vec(-1.0f64..1.0, 1..30)) {
            let m = crate::stats::mean(&vals).unwrap();
            let doubled: Vec<f64> = vals.iter().chain(vals.iter()).copied().collect();
            prop_assert!((crate::stats::mean(&doubled).unwrap() - m).abs() < 1e-12);
        }

        #[test]
        fn clip_choice_invariant_under_scaling(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 1e-3f64..1e3) {
            prop_assert_eq!(choice_from_scores(a.max(0.0), b.max(0.0)), choice_from_scores(c * a.max(0.0), c * b.max(0.0)));
        }
    }
}
