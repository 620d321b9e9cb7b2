//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sos_core::io::{read_dataset, write_dataset, EmbeddingMatrix, EmbeddingRecord};
use sos_core::metrics::{
    choice_from_scores, clip_baseline_choice, cosine, score_dataset, strong_surface_flags, ScoreOptions,
};
use sos_core::prompts::build_prompts;
use sos_core::stats::{fleiss_kappa, mad_pairs, pairwise_label_agreement, pearson, percentile, PairedSeries};
use sos_core::synth::{generate_mixture_dataset, MixtureConfig};
use sos_core::terms::{stereotype_coverage, weighted_log_odds, FightingWordsConfig, PriorSource, TermDocument};
use sos_core::{Dataset, PersonTerm, StereotypeLexicon, Template};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);
type GroupMeans = BTreeMap<(String, String, String), f64>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure(
        (got - want).abs() <= tol,
        format!("{what}: got {got}, want {want} ± {tol}"),
    )
}

// ---------- score oracle ----------

fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.random_range(2..=30);
    let dim = rng.random_range(2..=16);
    let models = ["m1", "m2", "m3"];
    let langs = ["fi", "de", "ja"];
    let cultures = ["Finnish", "German", "Japanese", "Dutch"];
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        records.push(EmbeddingRecord {
            id: format!("img{:02}", n - 1 - i),
            model: models[rng.random_range(0..models.len())].into(),
            language: langs[rng.random_range(0..langs.len())].into(),
            culture: cultures[rng.random_range(0..cultures.len())].into(),
            concept: "person".into(),
            template: Template::ALL[rng.random_range(0..3)],
            person_term: PersonTerm::ALL[rng.random_range(0..3)],
            layer: None,
            seed: None,
            row: i,
        });
        rows.push((0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<_>>());
    }
    // ids run opposite to record order so id-ordered reductions are exercised
    Dataset {
        records,
        matrix: EmbeddingMatrix::from_rows(&rows, dim).unwrap(),
    }
}

/// Independent recomputation: normalize, average per culture and per language
/// over all models, difference of cosines, then mean per (culture, language, model).
fn brute_force(ds: &Dataset) -> (BTreeMap<String, f64>, GroupMeans) {
    let unit = |r: &EmbeddingRecord| {
        let v: Vec<f64> = ds.matrix.row(r.row).iter().map(|&x| x as f64).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let centroid = |pick: &dyn Fn(&EmbeddingRecord) -> bool| {
        let mut members: Vec<&EmbeddingRecord> = ds.records.iter().filter(|r| pick(r)).collect();
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut c = vec![0.0; ds.matrix.dim()];
        for r in &members {
            for (a, b) in c.iter_mut().zip(unit(r)) {
                *a += b;
            }
        }
        c.iter().map(|x| x / members.len() as f64).collect::<Vec<f64>>()
    };
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut per_image = BTreeMap::new();
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in &ds.records {
        let sem = centroid(&|o| o.culture == r.culture);
        let sur = centroid(&|o| o.language == r.language);
        let e: Vec<f64> = ds.matrix.row(r.row).iter().map(|&x| x as f64).collect();
        let s = cos(&sem, &e) - cos(&sur, &e);
        per_image.insert(r.id.clone(), s);
        groups
            .entry((r.culture.clone(), r.language.clone(), r.model.clone()))
            .or_default()
            .push(s);
    }
    let means = groups
        .into_iter()
        .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    (per_image, means)
}

fn score_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let ds = random_dataset(&mut rng);
        let report = score_dataset(&ds, ScoreOptions::default()).map_err(|e| e.to_string())?;
        let (images, groups) = brute_force(&ds);
        ensure(report.images.len() == images.len(), "image count mismatch")?;
        for img in &report.images {
            worst = worst.max((img.sos - images[&img.id]).abs());
        }
        ensure(report.groups.len() == groups.len(), "group count mismatch")?;
        for g in &report.groups {
            let key = (
                g.key.culture.clone(),
                g.key.language.clone(),
                g.key.model.clone().unwrap(),
            );
            worst = worst.max((g.mean - groups[&key]).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!(
        "50 datasets, max deviation {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------- synthetic discrimination ----------

fn synthetic_discrimination() -> Check {
    let start = Instant::now();
    let mut means = Vec::new();
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    for &alpha in &alphas {
        let cfg = MixtureConfig {
            dim: 256,
            alpha,
            noise_sigma: 0.05,
            seed: 42,
            cultures: ["Japanese", "Nigerian", "Peruvian", "Finnish", "German", "Indian"]
                .map(String::from)
                .to_vec(),
            languages: ["ja", "yo", "es", "fi", "de", "hi"].map(String::from).to_vec(),
            images_per_cell: 9,
            orthogonal: false,
        };
        let data = generate_mixture_dataset(&cfg).map_err(|e| e.to_string())?;
        let report = score_dataset(&data.dataset, ScoreOptions::default()).map_err(|e| e.to_string())?;
        ensure(report.out_of_range == 0, "score outside [-1, 1] on synthetic data")?;
        let m = report.groups.iter().map(|g| g.mean).sum::<f64>() / report.groups.len() as f64;
        means.push(m);
    }
    let elapsed = start.elapsed();
    ensure(
        means.windows(2).all(|w| w[0] < w[1]),
        format!("not strictly increasing: {means:?}"),
    )?;
    for (a, m) in alphas.iter().zip(&means) {
        if *a != 0.5 {
            ensure(
                (a - 0.5).signum() == m.signum(),
                format!("sign mismatch at alpha {a}: {m}"),
            )?;
        }
    }
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:+.3}")).collect();
    Ok(format!("means {} in {:.2}s", shown.join(" "), elapsed.as_secs_f64()))
}

// ---------- strong flags ----------

fn strong_flags() -> Check {
    let vals = [-0.08, -0.06, -0.04, -0.03, -0.02, -0.01, 0.0, 0.01];
    let medians: BTreeMap<(String, String), f64> = vals
        .iter()
        .enumerate()
        .map(|(i, &v)| (("m".to_string(), format!("l{i}")), v))
        .collect();
    let flags = strong_surface_flags(&medians).map_err(|e| e.to_string())?;
    close(flags.p25, -0.045, 1e-12, "P25")?;
    let want: BTreeSet<(String, String)> = [("m".to_string(), "l0".to_string()), ("m".into(), "l1".into())].into();
    ensure(flags.flagged == want, format!("flagged {:?}", flags.flagged))?;
    Ok(format!("P25 = {}, flagged l0 and l1", flags.p25))
}

// ---------- statistics ----------

fn stats_oracles() -> Check {
    let e = |r: sos_core::Result<f64>| r.map_err(|e| e.to_string());
    let s = PairedSeries::new(vec![0, 1, 2], vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0]).unwrap();
    // hand formula: r = 3 / sqrt(2 * 4.6667)
    let r = e(pearson(&s))?;
    close(r, 3.0 / (2.0f64 * 14.0 / 3.0).sqrt(), 1e-12, "pearson vs hand formula")?;
    close(r, 0.982, 1e-3, "pearson")?;
    let k = e(fleiss_kappa(&[vec!['A', 'A', 'B'], vec!['A', 'B', 'B']]))?;
    close(k, -1.0 / 3.0, 1e-9, "fleiss")?;
    let ck = e(pairwise_label_agreement(&['S', 'S', 'M'], &['S', 'M', 'M'], &'S'))?;
    close(ck, 0.4, 1e-9, "pairwise kappa")?;
    let mad = e(mad_pairs(
        &PairedSeries::new(vec![0, 1], vec![0.0, 2.0], vec![1.0, 2.0]).unwrap(),
    ))?;
    ensure(mad == 0.5, format!("mad {mad}"))?;
    ensure(e(percentile(&[1.0, 2.0, 3.0, 4.0], 0.5))? == 2.5, "P50")?;
    ensure(e(percentile(&[0.0, 1.0, 2.0, 3.0], 0.25))? == 0.75, "P25")?;
    ensure(e(percentile(&[3.0, -1.0, 7.0], 0.0))? == -1.0, "P0")?;
    Ok(format!(
        "pearson {r:.4}, fleiss {k:.6}, kappa {ck}, mad {mad}, percentiles exact"
    ))
}

// ---------- fighting words ----------

fn doc(pairs: &[(&str, u64)], n: u64) -> TermDocument {
    TermDocument {
        counts: pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
        n_images: n,
    }
}

fn random_doc(rng: &mut ChaCha8Rng) -> TermDocument {
    let vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"];
    let mut counts = BTreeMap::new();
    while counts.len() < 2 {
        for w in vocab {
            if rng.random_bool(0.6) {
                counts.insert(w.to_string(), rng.random_range(1..50));
            }
        }
    }
    let n = *counts.values().max().unwrap() + rng.random_range(0..10);
    TermDocument { counts, n_images: n }
}

fn fighting_words() -> Check {
    let e = |r: sos_core::Result<Vec<sos_core::TermScore>>| r.map_err(|e| e.to_string());
    let cfg = FightingWordsConfig {
        alpha0: 2.0,
        ..Default::default()
    };
    let scores = e(weighted_log_odds(
        &doc(&[("x", 9), ("y", 1)], 10),
        &doc(&[("x", 1), ("y", 9)], 10),
        None,
        &cfg,
    ))?;
    let x = scores.iter().find(|s| s.token == "x").ok_or("x missing")?;
    close(x.delta, 3.387, 0.01, "delta_x")?;
    close(x.z, 3.49, 0.01, "z_x")?;

    for (pairs, alpha0) in [
        (vec![("x", 5), ("y", 5)], 2.0),
        (vec![("a", 3), ("b", 7), ("c", 1)], 100.0),
        (vec![("sauna", 40), ("snow", 2)], 10.0),
    ] {
        let d = doc(&pairs, 50);
        for prior in [PriorSource::Rest, PriorSource::Pooled] {
            let c = FightingWordsConfig {
                alpha0,
                prior,
                ..Default::default()
            };
            for s in e(weighted_log_odds(&d, &d, None, &c))? {
                ensure(
                    s.delta == 0.0,
                    format!("symmetric fixture gave delta {} for {}", s.delta, s.token),
                )?;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let shared = FightingWordsConfig {
        prior: PriorSource::Pooled,
        ..Default::default()
    };
    for _ in 0..100 {
        let (t, r) = (random_doc(&mut rng), random_doc(&mut rng));
        let ab = e(weighted_log_odds(&t, &r, None, &shared))?;
        let ba = e(weighted_log_odds(&r, &t, None, &shared))?;
        for (p, q) in ab.iter().zip(&ba) {
            ensure(
                p.token == q.token && (p.delta + q.delta).abs() < 1e-12,
                format!("antisymmetry broken for {}", p.token),
            )?;
        }
    }
    Ok(format!(
        "delta_x {:.4}, z_x {:.4}; symmetric fixtures 0; 100 antisymmetric corpora",
        x.delta, x.z
    ))
}

// ---------- coverage ----------

fn coverage() -> Check {
    let lex = |lang: &str, terms: &[&str]| {
        let raw = [(lang.to_string(), terms.iter().map(|s| s.to_string()).collect())].into();
        StereotypeLexicon::from_raw(raw).0
    };
    let set = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let e = |r: sos_core::Result<f64>| r.map_err(|e| e.to_string());
    ensure(
        e(stereotype_coverage(&set(&["sauna"]), &lex("fi", &["sauna"]), "fi"))? == 100.0,
        "sauna",
    )?;
    ensure(
        e(stereotype_coverage(
            &set(&["elephants"]),
            &lex("hi", &["elephant"]),
            "hi",
        ))? == 100.0,
        "plural strip",
    )?;
    ensure(
        e(stereotype_coverage(&set(&[]), &lex("fi", &["sauna"]), "fi"))? == 0.0,
        "empty detection",
    )?;
    Ok("sauna 100.0, plural matched, empty 0.0".into())
}

// ---------- CLI determinism ----------

fn determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = common::build(&root.path().join("fixture"));
    let mut names = Vec::new();
    for (name, args) in fx.invocations() {
        let mut snapshots = Vec::new();
        for (run, jobs) in [("a", "1"), ("b", "4")] {
            let out = root.path().join(format!("{name}-{run}"));
            let mut full = common::strs(&args);
            let out_s = out.to_str().unwrap().to_string();
            full.extend(["--out", &out_s, "--jobs", jobs]);
            let o = common::run(&full);
            ensure(
                o.status.success(),
                format!("{name} failed: {}", String::from_utf8_lossy(&o.stderr)),
            )?;
            snapshots.push(common::snapshot(&out));
        }
        ensure(snapshots[0].len() > 1, format!("{name} wrote no reports"))?;
        ensure(
            snapshots[0] == snapshots[1],
            format!("{name} outputs differ between runs"),
        )?;
        names.push(name);
    }
    Ok(format!(
        "{} subcommands byte-identical across runs and job counts",
        names.len()
    ))
}

// ---------- format round trip ----------

fn round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (m1, x1) = (dir.path().join("a.jsonl"), dir.path().join("a.sosm"));
    let (m2, x2) = (dir.path().join("b.jsonl"), dir.path().join("b.sosm"));
    for i in 0..1000 {
        let n = rng.random_range(0..12);
        let dim = rng.random_range(1..9);
        let records: Vec<EmbeddingRecord> = (0..n)
            .map(|k| EmbeddingRecord {
                id: format!("r{i}-{k}"),
                model: "m".into(),
                language: "fi".into(),
                culture: "Finnish".into(),
                concept: "person".into(),
                template: Template::ALL[k % 3],
                person_term: PersonTerm::ALL[k % 3],
                layer: (k % 2 == 0).then_some(k as u32),
                seed: Some(k as i64 - 3),
                row: n - 1 - k,
            })
            .collect();
        let values: Vec<f32> = (0..n * dim)
            .map(|_| {
                let v: f32 = rng.random_range(-1e3..1e3);
                if v == 0.0 {
                    1.0
                } else {
                    v
                }
            })
            .collect();
        let ds = Dataset {
            records,
            matrix: EmbeddingMatrix::new(n, dim, values).unwrap(),
        };
        write_dataset(&ds, &m1, &x1).map_err(|e| e.to_string())?;
        let back = read_dataset(&m1, &x1).map_err(|e| e.to_string())?;
        ensure(back == ds, format!("dataset {i} changed on read"))?;
        write_dataset(&back, &m2, &x2).map_err(|e| e.to_string())?;
        let same = |a, b| std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
        ensure(
            same(&x1, &x2) && same(&m1, &m2),
            format!("dataset {i} not byte-identical"),
        )?;
    }
    Ok("1000 datasets byte-identical".into())
}

// ---------- prompts ----------

fn prompt_count() -> Check {
    let cultures: Vec<String> = (0..171).map(|i| format!("Culture{i:03}")).collect();
    let prompts = build_prompts(&cultures, &PersonTerm::ALL, &Template::ALL).map_err(|e| e.to_string())?;
    ensure(prompts.len() == 1539, format!("{} prompts", prompts.len()))?;
    Ok("171 x 3 x 3 = 1539".into())
}

// ---------- CLIPScore argmax ----------

fn clip_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..1000 {
        let dim = rng.random_range(2..12);
        let mut v = || (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (img, sem, sur) = (v(), v(), v());
        let (w1, w2): (f64, f64) = (rng.random_range(1e-3..100.0), rng.random_range(1e-3..100.0));
        let a = clip_baseline_choice(&img, &sem, &sur, w1).map_err(|e| e.to_string())?;
        let b = clip_baseline_choice(&img, &sem, &sur, w2).map_err(|e| e.to_string())?;
        ensure(a == b, format!("trial {t}: weight changed the choice"))?;
        let (cs, cu) = (cosine(&img, &sem).unwrap(), cosine(&img, &sur).unwrap());
        let c: f64 = rng.random_range(1e-3..1e3);
        ensure(
            choice_from_scores(cs, cu) == choice_from_scores(c * cs, c * cu),
            format!("trial {t}: rescaled cosines changed the choice"),
        )?;
    }
    Ok("1000 trials".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("score oracle equivalence", score_oracle),
        ("synthetic discrimination", synthetic_discrimination),
        ("strong-flag rule", strong_flags),
        ("statistics oracles", stats_oracles),
        ("fighting-words oracle", fighting_words),
        ("coverage fixtures", coverage),
        ("CLI determinism", determinism),
        ("format round-trip", round_trip),
        ("prompt count", prompt_count),
        ("CLIPScore argmax invariance", clip_invariance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
