//! Synthetic embedding datasets with a known semantic/surface mix.
//!
//! Every image embedding is `normalize(alpha * u_c + (1 - alpha) * v_l + sigma * g)`
//! for a culture anchor `u_c`, a language anchor `v_l` and standard Gaussian noise `g`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Dataset, EmbeddingMatrix, EmbeddingRecord, PersonTerm, Template};

pub const SYNTH_MODEL: &str = "synth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub dim: usize,
    pub alpha: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub cultures: Vec<String>,
    pub languages: Vec<String>,
    pub images_per_cell: usize,
    /// Use standard basis vectors as anchors instead of random unit vectors.
    pub orthogonal: bool,
}

impl MixtureConfig {
    fn check(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Invariant(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Invariant(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Invariant(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.cultures.is_empty() || self.languages.is_empty() || self.images_per_cell == 0 {
            return Err(Error::Invariant(
                "cultures x languages x images must be non-empty".into(),
            ));
        }
        let distinct = |v: &[String]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        if !distinct(&self.cultures) || !distinct(&self.languages) {
            return Err(Error::Invariant("duplicate culture or language".into()));
        }
        if self.orthogonal && self.dim < self.cultures.len() + self.languages.len() {
            return Err(Error::Invariant(format!(
                "orthogonal anchors need dim >= {}",
                self.cultures.len() + self.languages.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dataset: Dataset,
    /// Mixing fraction per (culture, language) cell.
    pub truth: BTreeMap<(String, String), f64>,
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Numeric("cannot normalize a zero vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws anchors then images from one seeded stream, culture-major.
pub fn generate_mixture_dataset(cfg: &MixtureConfig) -> Result<SynthDataset> {
    cfg.check()?;
    let anchors = cfg.cultures.len() + cfg.languages.len();
    if !cfg.orthogonal && cfg.dim < 4 * anchors {
        log::warn!(
            "dim {} is small for {anchors} anchors; anchors may be far from orthogonal",
            cfg.dim
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut anchor = |i: usize| -> Result<Vec<f64>> {
        if cfg.orthogonal {
            let mut v = vec![0.0; cfg.dim];
            v[i] = 1.0;
            Ok(v)
        } else {
            let mut v = gaussian(&mut rng, cfg.dim);
            normalize(&mut v)?;
            Ok(v)
        }
    };
    let u: Vec<Vec<f64>> = (0..cfg.cultures.len()).map(&mut anchor).collect::<Result<_>>()?;
    let v: Vec<Vec<f64>> = (cfg.cultures.len()..anchors).map(&mut anchor).collect::<Result<_>>()?;

    let n = cfg.cultures.len() * cfg.languages.len() * cfg.images_per_cell;
    let mut records = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * cfg.dim);
    let mut truth = BTreeMap::new();
    for (ci, culture) in cfg.cultures.iter().enumerate() {
        for (li, language) in cfg.languages.iter().enumerate() {
            truth.insert((culture.clone(), language.clone()), cfg.alpha);
            for k in 0..cfg.images_per_cell {
                let mut e: Vec<f64> = (0..cfg.dim)
                    .map(|j| cfg.alpha * u[ci][j] + (1.0 - cfg.alpha) * v[li][j])
                    .collect();
                if cfg.noise_sigma > 0.0 {
                    for (x, g) in e.iter_mut().zip(gaussian(&mut rng, cfg.dim)) {
                        *x += cfg.noise_sigma * g;
                    }
                }
                normalize(&mut e)?;
                let row = records.len();
                records.push(EmbeddingRecord {
                    id: format!("c{ci:03}-{language}-{k:04}"),
                    model: SYNTH_MODEL.to_string(),
                    language: language.clone(),
                    culture: culture.clone(),
                    concept: "person".to_string(),
                    template: Template::ALL[(k / PersonTerm::ALL.len()) % Template::ALL.len()],
                    person_term: PersonTerm::ALL[k % PersonTerm::ALL.len()],
                    layer: None,
                    seed: Some((k / (Template::ALL.len() * PersonTerm::ALL.len())) as i64),
                    row,
                });
                values.extend(e.iter().map(|&x| x as f32));
            }
        }
    }
    let matrix = EmbeddingMatrix::new(records.len(), cfg.dim, values)?;
    Ok(SynthDataset {
        dataset: Dataset { records, matrix },
        truth,
    })
}
