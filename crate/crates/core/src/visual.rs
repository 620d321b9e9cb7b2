//! Image-side analytics: dominant colors, HSV value distributions and a
//! two-component PCA of embeddings.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// RGB triple with components in `[0, 1]`.
pub type Rgb = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorOptions {
    pub k: usize,
    pub seed: u64,
    pub max_pixels: usize,
    pub space: ColorSpace,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for ColorOptions {
    fn default() -> Self {
        Self {
            k: 8,
            seed: 42,
            max_pixels: 100_000,
            space: ColorSpace::Rgb,
            max_iter: 100,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColorCluster {
    pub center: Rgb,
    pub share: f64,
}

/// Dominant colors of an image, sorted by hue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColorProfile {
    pub clusters: Vec<ColorCluster>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Vec<[f64; 3]>,
    pub counts: Vec<usize>,
    /// Sum of squared distances after every assignment step.
    pub inertia_history: Vec<f64>,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(p: &[f64; 3], centers: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's k-means with k-means++ seeding. Fewer than `k` centers are returned when
/// the data has fewer distinct points.
pub fn kmeans(points: &[[f64; 3]], k: usize, seed: u64, max_iter: usize, tolerance: f64) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::Empty("k-means on no points".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
    }

    let mut assign = vec![0usize; points.len()];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut inertia = 0.0;
        for (a, p) in assign.iter_mut().zip(points) {
            let (i, d) = nearest(p, &centers);
            *a = i;
            inertia += d;
        }
        history.push(inertia);

        let mut sums = vec![[0.0f64; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for j in 0..3 {
                sums[a][j] += p[j];
            }
        }
        let mut shift: f64 = 0.0;
        for (i, c) in centers.iter_mut().enumerate() {
            if counts[i] == 0 {
                continue;
            }
            let n = counts[i] as f64;
            let new = [sums[i][0] / n, sums[i][1] / n, sums[i][2] / n];
            shift = shift.max(dist2(c, &new).sqrt());
            *c = new;
        }
        if shift < tolerance {
            break;
        }
    }
    let mut counts = vec![0usize; centers.len()];
    let mut inertia = 0.0;
    for p in points {
        let (i, d) = nearest(p, &centers);
        counts[i] += 1;
        inertia += d;
    }
    history.push(inertia);
    Ok(KMeansFit {
        centers,
        counts,
        inertia_history: history,
    })
}

/// The `k` most prominent colors of `pixels` with their pixel shares.
///
/// At most `max_pixels` pixels are clustered, drawn without replacement from a
/// seeded stream. Empty clusters are dropped.
pub fn dominant_colors(pixels: &[Rgb], opts: &ColorOptions) -> Result<ColorProfile> {
    if pixels.is_empty() {
        return Err(Error::Empty("no pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sample: Vec<Rgb> = if pixels.len() > opts.max_pixels {
        let mut idx = index::sample(&mut rng, pixels.len(), opts.max_pixels).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pixels[i]).collect()
    } else {
        pixels.to_vec()
    };
    let points: Vec<[f64; 3]> = match opts.space {
        ColorSpace::Rgb => sample,
        ColorSpace::Lab => sample.iter().map(|p| srgb_to_lab(*p)).collect(),
    };
    let fit = kmeans(&points, opts.k, opts.seed, opts.max_iter, opts.tolerance)?;
    let total = points.len() as f64;
    let mut clusters: Vec<ColorCluster> = fit
        .centers
        .iter()
        .zip(&fit.counts)
        .filter(|(_, &n)| n > 0)
        .map(|(c, &n)| ColorCluster {
            center: match opts.space {
                ColorSpace::Rgb => *c,
                ColorSpace::Lab => lab_to_srgb(*c),
            },
            share: n as f64 / total,
        })
        .collect();
    clusters.sort_by(|a, b| {
        let (ha, hb) = (hsv_unchecked(a.center), hsv_unchecked(b.center));
        ha.0.total_cmp(&hb.0)
            .then(ha.1.total_cmp(&hb.1))
            .then(ha.2.total_cmp(&hb.2))
    });
    Ok(ColorProfile { clusters })
}

/// Decodes a PNG or JPEG into RGB pixels in `[0, 1]`.
pub fn load_pixels(path: impl AsRef<Path>) -> Result<Vec<Rgb>> {
    let img = image::open(path.as_ref())?.to_rgb8();
    Ok(img
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect())
}

fn hsv_unchecked([r, g, b]: Rgb) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (if h >= 360.0 { h - 360.0 } else { h }, s, max)
}

/// Hue in `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(rgb: Rgb) -> Result<(f64, f64, f64)> {
    if rgb.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::Domain(format!("rgb component outside [0,1]: {rgb:?}")));
    }
    Ok(hsv_unchecked(rgb))
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

// sRGB <-> CIELAB (D65)
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_lab(rgb: Rgb) -> [f64; 3] {
    let lin = rgb.map(|c| {
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    });
    let xyz = [
        0.4124564 * lin[0] + 0.3575761 * lin[1] + 0.1804375 * lin[2],
        0.2126729 * lin[0] + 0.7151522 * lin[1] + 0.0721750 * lin[2],
        0.0193339 * lin[0] + 0.1191920 * lin[1] + 0.9503041 * lin[2],
    ];
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(xyz[0] / WHITE[0]), f(xyz[1] / WHITE[1]), f(xyz[2] / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_to_srgb([l, a, b]: [f64; 3]) -> Rgb {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let inv = |t: f64| {
        if t.powi(3) > 216.0 / 24389.0 {
            t.powi(3)
        } else {
            (116.0 * t - 16.0) * 27.0 / 24389.0
        }
    };
    let xyz = [inv(fx) * WHITE[0], inv(fy) * WHITE[1], inv(fz) * WHITE[2]];
    let lin = [
        3.2404542 * xyz[0] - 1.5371385 * xyz[1] - 0.4985314 * xyz[2],
        -0.9692660 * xyz[0] + 1.8760108 * xyz[1] + 0.0415560 * xyz[2],
        0.0556434 * xyz[0] - 0.2040259 * xyz[1] + 1.0572252 * xyz[2],
    ];
    lin.map(|c| {
        let c = if c <= 0.0031308 {
            12.92 * c
        } else {
            1.055 * c.powf(1.0 / 2.4) - 0.055
        };
        c.clamp(0.0, 1.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub mass: f64,
}

/// Share-weighted histogram of cluster-center HSV values over equal bins of `[0, 1]`.
/// Each profile contributes total mass `1 / profiles.len()`.
pub fn hsv_value_histogram(profiles: &[ColorProfile], bins: usize) -> Result<Vec<HistogramBin>> {
    if profiles.is_empty() {
        return Err(Error::Empty("no color profiles".into()));
    }
    if bins == 0 {
        return Err(Error::Domain("bins must be at least 1".into()));
    }
    let mut mass = vec![0.0; bins];
    let per_profile = 1.0 / profiles.len() as f64;
    for p in profiles {
        for c in &p.clusters {
            let (_, _, v) = rgb_to_hsv(c.center)?;
            let b = ((v * bins as f64).floor() as usize).min(bins - 1);
            mass[b] += c.share * per_profile;
        }
    }
    Ok(mass
        .into_iter()
        .enumerate()
        .map(|(i, m)| HistogramBin {
            low: i as f64 / bins as f64,
            high: (i + 1) as f64 / bins as f64,
            mass: m,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pca2 {
    pub projections: Vec<[f64; 2]>,
    pub explained: [f64; 2],
    pub components: [Vec<f64>; 2],
}

/// Projects mean-centered rows onto their top two principal directions.
///
/// Each direction is signed so its largest-magnitude loading is positive.
pub fn pca2(rows: &[Vec<f64>]) -> Result<Pca2> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::Domain(format!("PCA needs at least 3 rows, got {n}")));
    }
    let d = rows[0].len();
    if d < 2 {
        return Err(Error::Domain(format!("PCA needs dim >= 2, got {d}")));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Invariant("rows have different lengths".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if total <= f64::EPSILON * n as f64 {
        return Err(Error::Domain("PCA on zero-variance data".into()));
    }

    // (variance, direction) pairs, descending
    let mut pairs: Vec<(f64, DVector<f64>)> = if n >= d {
        let eig = SymmetricEigen::new(centered.transpose() * &centered);
        (0..d)
            .map(|i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).into_owned()))
            .collect()
    } else {
        let svd = centered.clone().svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        (0..svd.singular_values.len())
            .map(|i| (svd.singular_values[i].powi(2), vt.row(i).transpose()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut components: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut explained = [0.0; 2];
    for c in 0..2 {
        let (var, mut v) = pairs.get(c).cloned().unwrap_or((0.0, DVector::zeros(d)));
        let mut big = 0;
        for j in 0..d {
            if v[j].abs() > v[big].abs() {
                big = j;
            }
        }
        if v[big] < 0.0 {
            v = -v;
        }
        explained[c] = var / total;
        components[c] = v.iter().copied().collect();
    }
    let projections = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let p = |c: &Vec<f64>| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [p(&components[0]), p(&components[1])]
        })
        .collect();
    Ok(Pca2 {
        projections,
        explained,
        components,
    })
}
