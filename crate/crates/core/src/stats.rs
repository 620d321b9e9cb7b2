//! Shared statistics: percentiles, correlation, agreement coefficients,
//! majority voting, validation metrics and stratified sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::io::OptionRole;

/// Percentile with linear interpolation between closest ranks at index `(n-1)*p`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of empty sequence".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("percentile fraction {p} outside [0,1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("percentile input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 0.5)
}

/// Arithmetic mean accumulated in slice order.
pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean of empty sequence".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Two aligned series with their composite keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSeries<K> {
    pub keys: Vec<K>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl<K: Ord + Clone> PairedSeries<K> {
    pub fn new(keys: Vec<K>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if keys.len() != x.len() || x.len() != y.len() {
            return Err(Error::Invariant(format!(
                "unaligned series: {} keys, {} x, {} y",
                keys.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(Self { keys, x, y })
    }

    /// Inner join on keys, in key order.
    pub fn join(left: &BTreeMap<K, f64>, right: &BTreeMap<K, f64>) -> Self {
        let mut s = Self {
            keys: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        };
        for (k, &x) in left {
            if let Some(&y) = right.get(k) {
                s.keys.push(k.clone());
                s.x.push(x);
                s.y.push(y);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Sample Pearson correlation.
pub fn pearson<K>(s: &PairedSeries<K>) -> Result<f64> {
    pearson_slices(&s.x, &s.y)
}

pub fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Invariant("pearson on unaligned series".into()));
    }
    if x.len() < 2 {
        return Err(Error::Undefined(format!(
            "pearson needs at least 2 pairs, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean absolute deviation between paired values.
pub fn mad_pairs<K>(s: &PairedSeries<K>) -> Result<f64> {
    if s.x.is_empty() {
        return Err(Error::Empty("mad of empty series".into()));
    }
    let total: f64 = s.x.iter().zip(&s.y).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / s.x.len() as f64)
}

/// Mean and normal-approximation confidence half-width `z * s / sqrt(n)`.
///
/// The 0.95 level uses z = 1.96 exactly.
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0,1)")));
    }
    let m = mean(values)?;
    if values.len() < 2 {
        return Err(Error::Undefined("confidence interval needs n >= 2".into()));
    }
    let n = values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let z = if (level - 0.95).abs() < 1e-12 {
        1.96
    } else {
        Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0)
    };
    Ok((m, z * var.sqrt() / n.sqrt()))
}

/// Fleiss' kappa for `items x raters` labels over the categories that occur.
pub fn fleiss_kappa<L: Ord>(items: &[Vec<L>]) -> Result<f64> {
    let Some(first) = items.first() else {
        return Err(Error::Empty("fleiss kappa needs at least one item".into()));
    };
    let raters = first.len();
    if raters < 2 {
        return Err(Error::Undefined("fleiss kappa needs at least 2 raters".into()));
    }
    if items.iter().any(|i| i.len() != raters) {
        return Err(Error::Invariant("items have different rater counts".into()));
    }
    let n = raters as f64;
    let mut totals: BTreeMap<&L, f64> = BTreeMap::new();
    let mut p_bar = 0.0;
    for item in items {
        let mut counts: BTreeMap<&L, f64> = BTreeMap::new();
        for l in item {
            *counts.entry(l).or_default() += 1.0;
            *totals.entry(l).or_default() += 1.0;
        }
        let sq: f64 = counts.values().map(|c| c * c).sum();
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    let n_items = items.len() as f64;
    p_bar /= n_items;
    let p_e: f64 = totals.values().map(|c| (c / (n_items * n)).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::Undefined("fleiss kappa with chance agreement 1".into()));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Cohen's kappa for two aligned label sequences.
pub fn cohen_kappa<L: Ord>(a: &[L], b: &[L]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Invariant("cohen kappa on unaligned sequences".into()));
    }
    if a.is_empty() {
        return Err(Error::Empty("cohen kappa of empty sequences".into()));
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ca: BTreeMap<&L, f64> = BTreeMap::new();
    let mut cb: BTreeMap<&L, f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
    }
    let p_e: f64 = ca
        .iter()
        .map(|(l, c)| c / n * cb.get(l).copied().unwrap_or(0.0) / n)
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::Undefined("cohen kappa with chance agreement 1".into()));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Cohen's kappa on the indicator `label == target`.
pub fn pairwise_label_agreement<L: PartialEq>(a1: &[L], a2: &[L], target: &L) -> Result<f64> {
    let bin = |s: &[L]| s.iter().map(|l| l == target).collect::<Vec<_>>();
    cohen_kappa(&bin(a1), &bin(a2))
}

/// Cosine between the concatenated one-hot choice vectors of two annotators.
///
/// Each choice is an option index in `0..k`.
pub fn annotator_cosine(a1: &[usize], a2: &[usize], k: usize) -> Result<f64> {
    if a1.len() != a2.len() {
        return Err(Error::Invariant("annotator choices are unaligned".into()));
    }
    if a1.is_empty() {
        return Err(Error::Empty("no annotated items".into()));
    }
    if let Some(&bad) = a1.iter().chain(a2).find(|&&c| c >= k) {
        return Err(Error::Domain(format!("choice index {bad} outside 0..{k}")));
    }
    // one-hot rows: dot = #matches, each norm = sqrt(#items)
    let dot = a1.iter().zip(a2).filter(|(x, y)| x == y).count() as f64;
    Ok(dot / a1.len() as f64)
}

/// Label chosen by a strict majority, or `None`.
pub fn majority_label<L: Ord + Clone>(choices: &[L]) -> Option<L> {
    let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
    for c in choices {
        *counts.entry(c).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|&(_, n)| 2 * n > choices.len())
        .map(|(l, _)| l.clone())
}

/// Predicted tendency of an image or group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tendency {
    Surface,
    Semantic,
}

impl Tendency {
    /// Negative scores are surface-guided.
    pub fn from_sos(score: f64) -> Self {
        if score < 0.0 {
            Tendency::Surface
        } else {
            Tendency::Semantic
        }
    }
}

/// Human majority label: one of the two tendencies or a distractor culture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanLabel {
    Surface,
    Semantic,
    Other,
}

impl From<OptionRole> for HumanLabel {
    fn from(role: OptionRole) -> Self {
        match role {
            OptionRole::Semantic => HumanLabel::Semantic,
            OptionRole::Surface => HumanLabel::Surface,
            OptionRole::Distractor => HumanLabel::Other,
        }
    }
}

impl HumanLabel {
    fn matches(self, t: Tendency) -> bool {
        matches!(
            (self, t),
            (HumanLabel::Surface, Tendency::Surface) | (HumanLabel::Semantic, Tendency::Semantic)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub accuracy: Option<f64>,
    pub precision_surface: Option<f64>,
    pub precision_semantic: Option<f64>,
    pub n_used: usize,
    pub n_tied: usize,
}

/// Accuracy and per-class precision of predictions against human majority labels.
/// Items whose majority is tied (`None`) are skipped and counted.
pub fn validation_metrics(predicted: &[Tendency], truth: &[Option<HumanLabel>]) -> Result<ValidationOutcome> {
    if predicted.len() != truth.len() {
        return Err(Error::Invariant(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut n_used = 0usize;
    let mut n_tied = 0usize;
    let mut correct = 0usize;
    let mut pred_count: BTreeMap<Tendency, usize> = BTreeMap::new();
    let mut tp: BTreeMap<Tendency, usize> = BTreeMap::new();
    for (&p, t) in predicted.iter().zip(truth) {
        let Some(t) = t else {
            n_tied += 1;
            continue;
        };
        n_used += 1;
        *pred_count.entry(p).or_default() += 1;
        if t.matches(p) {
            correct += 1;
            *tp.entry(p).or_default() += 1;
        }
    }
    let precision = |c: Tendency| {
        pred_count
            .get(&c)
            .map(|&n| tp.get(&c).copied().unwrap_or(0) as f64 / n as f64)
    };
    Ok(ValidationOutcome {
        accuracy: (n_used > 0).then(|| correct as f64 / n_used as f64),
        precision_surface: precision(Tendency::Surface),
        precision_semantic: precision(Tendency::Semantic),
        n_used,
        n_tied,
    })
}

/// Per-bin sample counts: proportional to bin size, at least one per non-empty bin
/// when `n` allows, summing to exactly `n` (largest-remainder rounding).
pub(crate) fn allocate(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let n = n.min(total);
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let nonempty = sizes.iter().filter(|&&s| s > 0).count();
    let floor_min = |s: usize| usize::from(n >= nonempty && s > 0);
    let quota: Vec<f64> = sizes.iter().map(|&s| n as f64 * s as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = sizes
        .iter()
        .zip(&quota)
        .map(|(&s, &q)| (q.floor() as usize).max(floor_min(s)).min(s))
        .collect();
    let mut sum: usize = alloc.iter().sum();
    while sum < n {
        let i = (0..sizes.len())
            .filter(|&i| alloc[i] < sizes[i])
            .max_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .total_cmp(&(quota[b] - alloc[b] as f64))
                    .then(b.cmp(&a))
            })
            .expect("room remains while sum < n <= total");
        alloc[i] += 1;
        sum += 1;
    }
    while sum > n {
        let i = (0..sizes.len())
            .filter(|&i| alloc[i] > floor_min(sizes[i]))
            .min_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .total_cmp(&(quota[b] - alloc[b] as f64))
                    .then(a.cmp(&b))
            })
            .expect("some bin is above its minimum while sum > n");
        alloc[i] -= 1;
        sum -= 1;
    }
    alloc
}

/// Equal-width bin index of every score over `[min, max]`.
pub(crate) fn bin_index(value: f64, min: f64, max: f64, bins: usize) -> usize {
    if max <= min {
        return 0;
    }
    let b = ((value - min) / (max - min) * bins as f64).floor() as usize;
    b.min(bins - 1)
}

/// Seeded stratified sample of `n` groups spanning the score range.
///
/// Scores are split into `bins` equal-width bins; the per-bin allocation is
/// proportional to bin size with at least one group from every non-empty bin.
/// Members within a bin are drawn uniformly from a ChaCha8 stream seeded with `seed`.
/// When `n` exceeds the population every group is returned.
pub fn stratified_sample<K: Ord + Clone>(
    group_scores: &BTreeMap<K, f64>,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<BTreeSet<K>> {
    if bins == 0 {
        return Err(Error::Domain("bins must be at least 1".into()));
    }
    if group_scores.values().any(|v| !v.is_finite()) {
        return Err(Error::Domain("group scores must be finite".into()));
    }
    if n >= group_scores.len() {
        if n > group_scores.len() {
            log::warn!(
                "requested {n} groups but only {} exist; returning all",
                group_scores.len()
            );
        }
        return Ok(group_scores.keys().cloned().collect());
    }
    let min = group_scores.values().copied().fold(f64::INFINITY, f64::min);
    let max = group_scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut members: Vec<Vec<&K>> = vec![Vec::new(); bins];
    for (k, &v) in group_scores {
        members[bin_index(v, min, max, bins)].push(k);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeSet::new();
    for (bin, &take) in members.iter().zip(&alloc) {
        for i in index::sample(&mut rng, bin.len(), take).into_vec() {
            out.insert(bin[i].clone());
        }
    }
    Ok(out)
}
