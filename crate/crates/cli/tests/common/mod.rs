//! Fixture files shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sos_core::io::{
    write_annotations, write_dataset, write_descriptions, AnnotationOption, AnnotationRecord, DescriptionRecord,
    EmbeddingMatrix, OptionRole, PacketItem,
};
use sos_core::synth::{generate_mixture_dataset, MixtureConfig};
use sos_core::Dataset;

pub const CULTURES: [&str; 6] = ["Japanese", "Nigerian", "Peruvian", "Finnish", "German", "Indian"];
pub const LANGUAGES: [&str; 7] = ["ja", "yo", "es", "fi", "de", "hi", "en"];
pub const SURFACE: [(&str, &str); 7] = [
    ("ja", "Japanese"),
    ("yo", "Nigerian"),
    ("es", "Spanish"),
    ("fi", "Finnish"),
    ("de", "German"),
    ("hi", "Indian"),
    ("en", "American"),
];

pub fn sos() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sos"))
}

pub fn run(args: &[&str]) -> Output {
    sos().args(args).output().expect("spawn sos")
}

pub fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

pub struct Fixture {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub matrix: PathBuf,
    pub layered_manifest: PathBuf,
    pub layered_matrix: PathBuf,
    pub descriptions: PathBuf,
    pub lexicon: PathBuf,
    pub cultures: PathBuf,
    pub translations: PathBuf,
    pub surface: PathBuf,
    pub annotations: PathBuf,
    pub caption_index: PathBuf,
    pub caption_matrix: PathBuf,
    pub images: PathBuf,
}

fn mixture(seed: u64, alpha: f64) -> Dataset {
    generate_mixture_dataset(&MixtureConfig {
        dim: 32,
        alpha,
        noise_sigma: 0.15,
        seed,
        cultures: CULTURES.map(String::from).to_vec(),
        languages: LANGUAGES.map(String::from).to_vec(),
        images_per_cell: 9,
        orthogonal: false,
    })
    .unwrap()
    .dataset
}

/// Concatenates datasets, prefixing ids and renaming models and concepts.
fn concat(parts: Vec<(Dataset, &str, &str, Option<u32>)>) -> Dataset {
    let dim = parts[0].0.matrix.dim();
    let mut records = Vec::new();
    let mut values = Vec::new();
    for (ds, model, concept, layer) in parts {
        for r in &ds.records {
            let mut r = r.clone();
            r.id = format!("{model}-{concept}-{}-{}", layer.unwrap_or(0), r.id);
            r.model = model.to_string();
            r.concept = concept.to_string();
            r.layer = layer;
            values.extend_from_slice(ds.matrix.row(r.row));
            r.row = records.len();
            records.push(r);
        }
    }
    let matrix = EmbeddingMatrix::new(records.len(), dim, values).unwrap();
    Dataset { records, matrix }
}

const COMMON_WORDS: [&str; 8] = [
    "portrait",
    "smiling",
    "wearing",
    "shirt",
    "background",
    "hair",
    "light",
    "standing",
];

fn language_words(lang: &str) -> &'static [&'static str] {
    match lang {
        "fi" => &["snow", "trees", "sauna", "forest"],
        "ja" => &["kimono", "cherry", "temple"],
        "hi" => &["saree", "temple", "colorful"],
        "yo" => &["market", "colorful", "dusty"],
        "es" => &["poncho", "mountains"],
        "de" => &["beer", "castle"],
        _ => &["city", "street"],
    }
}

pub fn build(dir: &Path) -> Fixture {
    fs::create_dir_all(dir).unwrap();
    let p = |name: &str| dir.join(name);

    let main = concat(vec![
        (mixture(1, 0.35), "m1", "person", None),
        (mixture(2, 0.6), "m2", "person", None),
        (mixture(3, 0.4), "m1", "house", None),
    ]);
    write_dataset(&main, p("manifest.jsonl"), p("matrix.sosm")).unwrap();

    let layered = concat(vec![
        (mixture(4, 0.2), "m1", "person", Some(4)),
        (mixture(5, 0.4), "m1", "person", Some(8)),
        (mixture(6, 0.6), "m1", "person", Some(12)),
    ]);
    write_dataset(&layered, p("layered.jsonl"), p("layered.sosm")).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let descriptions: Vec<DescriptionRecord> = main
        .records
        .iter()
        .filter(|r| r.concept == "person")
        .map(|r| {
            let mut words: Vec<&str> = COMMON_WORDS.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            words.extend(
                language_words(&r.language)
                    .iter()
                    .copied()
                    .filter(|_| rng.random_bool(0.6)),
            );
            DescriptionRecord {
                id: r.id.clone(),
                text: format!("The image shows a person. {}.", words.join(", ")),
            }
        })
        .collect();
    write_descriptions(p("descriptions.jsonl"), &descriptions).unwrap();

    fs::write(
        p("lexicon.json"),
        r#"{"fi": ["sauna", "snow", "reindeer"], "ja": ["kimono", "sushi"], "hi": ["saree"], "de": ["beer", "lederhosen"], "es": ["poncho"], "yo": ["market"], "en": ["burger"]}"#,
    )
    .unwrap();

    fs::write(p("cultures.txt"), CULTURES.join("\n") + "\n").unwrap();
    let mut tr = csv::Writer::from_path(p("translations.csv")).unwrap();
    tr.write_record(["culture", "person_term", "template", "language", "text"])
        .unwrap();
    for lang in ["fi", "de"] {
        for c in CULTURES {
            for t in ["a", "b", "c"] {
                for pt in ["person", "woman", "man"] {
                    tr.write_record([c, pt, t, lang, &format!("[{lang}] {t} {c} {pt}")])
                        .unwrap();
                }
            }
        }
    }
    tr.flush().unwrap();

    let mut sf = csv::Writer::from_path(p("surface.csv")).unwrap();
    sf.write_record(["language", "culture"]).unwrap();
    for (l, c) in SURFACE {
        sf.write_record([l, c]).unwrap();
    }
    sf.flush().unwrap();

    // three annotators over 40 person images of model m1
    let surface: BTreeMap<&str, &str> = SURFACE.into_iter().collect();
    let mut pool: Vec<&str> = CULTURES.to_vec();
    pool.extend(["Spanish", "American", "Brazilian", "Korean"]);
    pool.sort_unstable();
    let candidates: Vec<_> = main
        .records
        .iter()
        .filter(|r| r.concept == "person" && r.model == "m1" && surface[r.language.as_str()] != r.culture)
        .collect();
    let mut annotations = Vec::new();
    for k in index::sample(&mut rng, candidates.len(), 40).into_vec() {
        let r = candidates[k];
        let sur = surface[r.language.as_str()];
        let others: Vec<&str> = pool.iter().copied().filter(|c| *c != r.culture && *c != sur).collect();
        let mut options = vec![
            AnnotationOption {
                culture: r.culture.clone(),
                role: OptionRole::Semantic,
            },
            AnnotationOption {
                culture: sur.to_string(),
                role: OptionRole::Surface,
            },
        ];
        for i in index::sample(&mut rng, others.len(), 3) {
            options.push(AnnotationOption {
                culture: others[i].to_string(),
                role: OptionRole::Distractor,
            });
        }
        let item = PacketItem {
            image_id: r.id.clone(),
            options,
        };
        for annotator in ["ann1", "ann2", "ann3"] {
            let u: f64 = rng.random();
            let idx = if u < 0.45 {
                0
            } else if u < 0.85 {
                1
            } else {
                rng.random_range(2..5)
            };
            annotations.push(AnnotationRecord {
                item: item.clone(),
                annotator_id: annotator.to_string(),
                chosen_culture: item.options[idx].culture.clone(),
            });
        }
    }
    write_annotations(p("annotations.csv"), &annotations).unwrap();

    let mut caption_rows = Vec::new();
    let mut index_lines = String::new();
    for (i, c) in pool.iter().enumerate() {
        caption_rows.push((0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<f32>>());
        index_lines.push_str(&format!("{{\"culture\": \"{c}\", \"row\": {i}}}\n"));
    }
    fs::write(p("captions.jsonl"), index_lines).unwrap();
    EmbeddingMatrix::from_rows(&caption_rows, 32)
        .unwrap()
        .write(p("captions.sosm"))
        .unwrap();

    let images = p("images");
    fs::create_dir_all(&images).unwrap();
    for r in main
        .records
        .iter()
        .filter(|r| r.concept == "person" && r.model == "m1")
        .step_by(20)
    {
        let shade = (LANGUAGES.iter().position(|l| *l == r.language).unwrap() * 35) as u8;
        let img = image::RgbImage::from_fn(16, 16, |x, y| {
            if (x + y) % 3 == 0 {
                image::Rgb([shade, 200 - shade / 2, 40])
            } else {
                image::Rgb([20, 60, shade])
            }
        });
        img.save(images.join(format!("{}.png", r.id))).unwrap();
    }

    Fixture {
        dir: dir.to_path_buf(),
        manifest: p("manifest.jsonl"),
        matrix: p("matrix.sosm"),
        layered_manifest: p("layered.jsonl"),
        layered_matrix: p("layered.sosm"),
        descriptions: p("descriptions.jsonl"),
        lexicon: p("lexicon.json"),
        cultures: p("cultures.txt"),
        translations: p("translations.csv"),
        surface: p("surface.csv"),
        annotations: p("annotations.csv"),
        caption_index: p("captions.jsonl"),
        caption_matrix: p("captions.sosm"),
        images,
    }
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

impl Fixture {
    fn data(&self) -> Vec<String> {
        vec![
            "--manifest".into(),
            s(&self.manifest),
            "--matrix".into(),
            s(&self.matrix),
        ]
    }

    fn terms(&self) -> Vec<String> {
        vec![
            "--manifest".into(),
            s(&self.manifest),
            "--descriptions".into(),
            s(&self.descriptions),
        ]
    }

    /// Arguments for every subcommand, without `--out`.
    pub fn invocations(&self) -> Vec<(&'static str, Vec<String>)> {
        let with = |name: &'static str, base: Vec<String>, extra: &[String]| {
            let mut v = vec![name.to_string()];
            v.extend(base);
            v.extend(extra.iter().cloned());
            (name, v)
        };
        let d = self.data();
        vec![
            with("validate", d.clone(), &[]),
            with(
                "prompts",
                vec![
                    "--cultures".into(),
                    s(&self.cultures),
                    "--translations".into(),
                    s(&self.translations),
                ],
                &[],
            ),
            with("refs", d.clone(), &[]),
            with("sos", d.clone(), &[]),
            with("flags", d.clone(), &[]),
            with("corr", d.clone(), &[]),
            with(
                "layers",
                vec![
                    "--manifest".into(),
                    s(&self.layered_manifest),
                    "--matrix".into(),
                    s(&self.layered_matrix),
                ],
                &["--no-english".into()],
            ),
            with("robustness", d.clone(), &[]),
            with("segments", d.clone(), &[]),
            with("terms", self.terms(), &[]),
            with("coverage", self.terms(), &["--lexicon".into(), s(&self.lexicon)]),
            with(
                "sample",
                d.clone(),
                &["--surface-cultures".into(), s(&self.surface), "--n".into(), "20".into()],
            ),
            with("agree", vec!["--annotations".into(), s(&self.annotations)], &[]),
            with(
                "validate-metric",
                d.clone(),
                &[
                    "--annotations".into(),
                    s(&self.annotations),
                    "--caption-index".into(),
                    s(&self.caption_index),
                    "--caption-matrix".into(),
                    s(&self.caption_matrix),
                ],
            ),
            with(
                "colors",
                vec![
                    "--manifest".into(),
                    s(&self.manifest),
                    "--images".into(),
                    s(&self.images),
                ],
                &[],
            ),
            with("pca", d, &[]),
            with(
                "synth",
                vec!["--alpha".into(), "0.3".into(), "--dim".into(), "64".into()],
                &[],
            ),
        ]
    }
}

/// Every file under `dir` with its bytes, by relative name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            out.insert(
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            );
        }
    }
    out
}
