//! Dominant-color profiles of generated images.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sos_core::io::read_manifest;
use sos_core::visual::{
    dominant_colors, hsv_value_histogram, load_pixels, ColorCluster, ColorOptions, ColorProfile, ColorSpace,
};

use crate::common::{CliError, CliResult};
use crate::output::OutDir;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Rgb,
    Lab,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ColorsArgs {
    /// Record manifest (JSON Lines)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Directory holding `<id>.png` / `<id>.jpg` images
    #[arg(long)]
    pub images: PathBuf,

    /// Clusters per image
    #[arg(long, short = 'k', default_value_t = 8)]
    pub k: usize,

    /// Pixels clustered per image at most
    #[arg(long, default_value_t = 100_000)]
    pub max_pixels: usize,

    /// Color space used for clustering
    #[arg(long, value_enum, default_value = "rgb")]
    pub space: Space,

    /// HSV value histogram bins
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

fn find_image(dir: &Path, id: &str) -> Option<PathBuf> {
    EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

#[derive(Serialize)]
struct ImageColors<'a> {
    id: &'a str,
    clusters: &'a [ColorCluster],
}

#[derive(Serialize)]
struct GroupColors<'a> {
    language: &'a str,
    model: &'a str,
    culture: &'a str,
    images: Vec<ImageColors<'a>>,
}

#[derive(Serialize)]
struct ColorsReport<'a> {
    groups: Vec<GroupColors<'a>>,
    missing: Vec<&'a str>,
    undecodable: Vec<&'a str>,
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    group: &'a str,
    bin_low: f64,
    bin_high: f64,
    mass: f64,
}

pub fn colors(a: &ColorsArgs, seed: u64, out: &mut OutDir) -> CliResult {
    if a.k == 0 || a.max_pixels == 0 || a.bins == 0 {
        return Err(CliError::Input("--k, --max-pixels and --bins must be positive".into()));
    }
    let mut records = read_manifest(&a.manifest)?;
    records.sort_by(|x, y| x.id.cmp(&y.id));
    let opts = ColorOptions {
        k: a.k,
        seed,
        max_pixels: a.max_pixels,
        space: match a.space {
            Space::Rgb => ColorSpace::Rgb,
            Space::Lab => ColorSpace::Lab,
        },
        ..Default::default()
    };

    enum Outcome {
        Missing,
        Undecodable,
        Profile(ColorProfile),
    }
    let outcomes: Vec<Outcome> = records
        .par_iter()
        .map(|r| {
            let Some(path) = find_image(&a.images, &r.id) else {
                return Ok(Outcome::Missing);
            };
            match load_pixels(&path) {
                Ok(px) => Ok(Outcome::Profile(dominant_colors(&px, &opts)?)),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    Ok(Outcome::Undecodable)
                }
            }
        })
        .collect::<sos_core::Result<_>>()?;

    let mut groups: BTreeMap<(&str, &str, &str), Vec<ImageColors>> = BTreeMap::new();
    let mut by_language: BTreeMap<&str, Vec<ColorProfile>> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut undecodable = Vec::new();
    for (r, o) in records.iter().zip(&outcomes) {
        match o {
            Outcome::Missing => missing.push(r.id.as_str()),
            Outcome::Undecodable => undecodable.push(r.id.as_str()),
            Outcome::Profile(p) => {
                groups
                    .entry((&r.language, &r.model, &r.culture))
                    .or_default()
                    .push(ImageColors {
                        id: &r.id,
                        clusters: &p.clusters,
                    });
                by_language.entry(&r.language).or_default().push(p.clone());
            }
        }
    }
    if !missing.is_empty() {
        log::warn!("{} record(s) have no image file", missing.len());
    }
    if by_language.is_empty() {
        return Err(CliError::Input("no decodable images found".into()));
    }

    let mut hist = Vec::new();
    for (lang, profiles) in &by_language {
        for b in hsv_value_histogram(profiles, a.bins)? {
            hist.push(HistogramRow {
                group: lang,
                bin_low: b.low,
                bin_high: b.high,
                mass: b.mass,
            });
        }
    }
    out.write_json(
        "colors.json",
        &ColorsReport {
            groups: groups
                .into_iter()
                .map(|((language, model, culture), images)| GroupColors {
                    language,
                    model,
                    culture,
                    images,
                })
                .collect(),
            missing,
            undecodable,
        },
    )?;
    out.write_csv("histogram.csv", hist)
}
