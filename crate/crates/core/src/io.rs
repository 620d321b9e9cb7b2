//! Dataset model and the portable on-disk formats.
//!
//! A dataset is a JSON Lines manifest of [`EmbeddingRecord`]s plus a binary
//! matrix file holding one embedding per row. The matrix layout is
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SOSM"
//! 4       4     version (u32 LE, = 1)
//! 8       8     row count (u64 LE)
//! 16      4     dim (u32 LE)
//! 20      1     dtype code (1 = f32 LE)
//! 21      3     zero padding
//! 24      ..    row-major values
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"SOSM";
pub const MATRIX_VERSION: u32 = 1;
pub const DTYPE_F32_LE: u8 = 1;
pub const MATRIX_HEADER_LEN: usize = 24;

/// Prompt template identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    A,
    B,
    C,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::A, Template::B, Template::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::A => "a",
            Template::B => "b",
            Template::C => "c",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Template::A),
            "b" => Ok(Template::B),
            "c" => Ok(Template::C),
            other => Err(Error::Format(format!("unknown template '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonTerm {
    Person,
    Woman,
    Man,
}

impl PersonTerm {
    pub const ALL: [PersonTerm; 3] = [PersonTerm::Person, PersonTerm::Woman, PersonTerm::Man];

    pub fn as_str(self) -> &'static str {
        match self {
            PersonTerm::Person => "person",
            PersonTerm::Woman => "woman",
            PersonTerm::Man => "man",
        }
    }
}

impl fmt::Display for PersonTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "person" => Ok(PersonTerm::Person),
            "woman" => Ok(PersonTerm::Woman),
            "man" => Ok(PersonTerm::Man),
            other => Err(Error::Format(format!("unknown person term '{other}'"))),
        }
    }
}

fn default_concept() -> String {
    "person".to_string()
}

/// Metadata for one generated image; `row` points into the embedding matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub model: String,
    pub language: String,
    pub culture: String,
    #[serde(default = "default_concept")]
    pub concept: String,
    pub template: Template,
    pub person_term: PersonTerm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    pub row: usize,
}

/// Row-major `rows x dim` matrix of 32-bit embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(dim) != Some(values.len()) {
            return Err(Error::Integrity(format!(
                "matrix {rows}x{dim} needs {} values, got {}",
                rows.saturating_mul(dim),
                values.len()
            )));
        }
        Ok(Self { rows, dim, values })
    }

    /// Builds a matrix from equal-length rows. `dim` is used when `rows` is empty.
    pub fn from_rows(rows: &[Vec<f32>], dim: usize) -> Result<Self> {
        let dim = rows.first().map_or(dim, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Integrity(format!(
                    "row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Row widened to f64; all arithmetic downstream runs in 64-bit.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(DTYPE_F32_LE);
        out.extend_from_slice(&[0u8; 3]);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary layout. Rejects non-finite values.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MATRIX_HEADER_LEN {
            return Err(Error::Format(format!("matrix file too short ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MATRIX_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"SOSM\"",
                String::from_utf8_lossy(&bytes[0..4])
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MATRIX_VERSION {
            return Err(Error::Format(format!("unsupported matrix version {version}")));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        if bytes[20] != DTYPE_F32_LE {
            return Err(Error::Format(format!("unsupported dtype code {}", bytes[20])));
        }
        if bytes[21..24] != [0, 0, 0] {
            return Err(Error::Format("nonzero header padding".into()));
        }
        let rows = usize::try_from(rows).map_err(|_| Error::Format(format!("row count {rows} too large")))?;
        let expected = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        let payload = &bytes[MATRIX_HEADER_LEN..];
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!(
                "non-finite value at row {}, column {}",
                pos / dim.max(1),
                pos % dim.max(1)
            )));
        }
        Self::new(rows, dim, values)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads the CSV fixture form: first column `id`, then `dim` numeric columns.
    /// Returns the ids in file order alongside the matrix.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Self)> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let dim = reader.headers()?.len().saturating_sub(1);
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Format(format!(
                    "csv row {} has {} columns, expected {}",
                    line + 1,
                    rec.len(),
                    dim + 1
                )));
            }
            ids.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                let v: f32 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("csv row {}: bad number '{field}'", line + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Integrity(format!("csv row {}: non-finite value", line + 1)));
                }
                values.push(v);
            }
        }
        let rows = ids.len();
        Ok((ids, Self::new(rows, dim, values)?))
    }
}

/// Records plus the matrix they index into.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<EmbeddingRecord>,
    pub matrix: EmbeddingMatrix,
}

impl Dataset {
    pub fn embedding(&self, record: &EmbeddingRecord) -> &[f32] {
        self.matrix.row(record.row)
    }

    /// New dataset holding only the records accepted by `keep`. The matrix is shared
    /// unchanged, so row indices stay valid.
    pub fn filter(&self, keep: impl Fn(&EmbeddingRecord) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            matrix: self.matrix.clone(),
        }
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    read_jsonl(path.as_ref())
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

/// Loads a manifest and its matrix and joins them.
///
/// A matrix path ending in `.csv` is read as the CSV fixture form; each record is then
/// joined by id and its `row` is set to the matching CSV row.
pub fn read_dataset(manifest_path: impl AsRef<Path>, matrix_path: impl AsRef<Path>) -> Result<Dataset> {
    let mut records = read_manifest(manifest_path)?;
    let matrix_path = matrix_path.as_ref();
    let is_csv = matrix_path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let matrix = if is_csv {
        let (ids, matrix) = EmbeddingMatrix::read_csv(matrix_path)?;
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for r in &mut records {
            r.row = *index.get(r.id.as_str()).ok_or_else(|| {
                Error::Integrity(format!("record '{}' has no row in {}", r.id, matrix_path.display()))
            })?;
        }
        matrix
    } else {
        EmbeddingMatrix::read(matrix_path)?
    };
    if let Some(r) = records.iter().find(|r| r.row >= matrix.rows()) {
        return Err(Error::Integrity(format!(
            "record '{}' points at row {} but matrix has {} rows",
            r.id,
            r.row,
            matrix.rows()
        )));
    }
    Ok(Dataset { records, matrix })
}

/// Writes both files after checking every dataset invariant.
pub fn write_dataset(dataset: &Dataset, manifest_path: impl AsRef<Path>, matrix_path: impl AsRef<Path>) -> Result<()> {
    let report = validate_dataset(&dataset.records, &dataset.matrix);
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Invariant(msgs.join("; ")));
    }
    write_manifest(manifest_path, &dataset.records)?;
    dataset.matrix.write(matrix_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    RowOutOfBounds,
    DuplicateId,
    EmptyField,
    NonFinite,
    ZeroRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub id: Option<String>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "{id}: {}", self.detail),
            None => f.write_str(&self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every invariant violation. Never fails.
pub fn validate_dataset(records: &[EmbeddingRecord], matrix: &EmbeddingMatrix) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |id: Option<&str>, kind, detail: String| {
        violations.push(Violation {
            id: id.map(str::to_string),
            kind,
            detail,
        })
    };

    let mut seen = HashSet::new();
    let mut referenced = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            push(
                Some(&r.id),
                ViolationKind::DuplicateId,
                format!("duplicate id '{}'", r.id),
            );
        }
        if r.language.trim().is_empty() {
            push(Some(&r.id), ViolationKind::EmptyField, "empty language".into());
        }
        if r.culture.trim().is_empty() {
            push(Some(&r.id), ViolationKind::EmptyField, "empty culture".into());
        }
        if r.row >= matrix.rows() {
            push(
                Some(&r.id),
                ViolationKind::RowOutOfBounds,
                format!("row {} out of bounds for {} rows", r.row, matrix.rows()),
            );
            continue;
        }
        referenced.insert(r.row);
        check_row(matrix.row(r.row), r.row, Some(&r.id), &mut push);
    }
    for i in (0..matrix.rows()).filter(|i| !referenced.contains(i)) {
        check_row(matrix.row(i), i, None, &mut push);
    }
    ValidationReport { violations }
}

fn check_row(row: &[f32], index: usize, id: Option<&str>, push: &mut impl FnMut(Option<&str>, ViolationKind, String)) {
    if row.iter().any(|v| !v.is_finite()) {
        push(
            id,
            ViolationKind::NonFinite,
            format!("row {index} has non-finite values"),
        );
    } else if row.iter().all(|&v| v == 0.0) {
        push(id, ViolationKind::ZeroRow, format!("row {index} is all zeros"));
    }
}

/// One VQA description of an image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub id: String,
    pub text: String,
}

pub fn read_descriptions(path: impl AsRef<Path>) -> Result<Vec<DescriptionRecord>> {
    read_jsonl(path.as_ref())
}

pub fn write_descriptions(path: impl AsRef<Path>, records: &[DescriptionRecord]) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

/// Single-token lowercase stereotype terms per language code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StereotypeLexicon {
    terms: BTreeMap<String, BTreeSet<String>>,
}

impl StereotypeLexicon {
    /// Normalizes terms to lowercase and drops multi-token entries. Returns the dropped
    /// `(language, term)` pairs next to the lexicon.
    pub fn from_raw(raw: BTreeMap<String, Vec<String>>) -> (Self, Vec<(String, String)>) {
        let mut terms = BTreeMap::new();
        let mut dropped = Vec::new();
        for (lang, list) in raw {
            let set: &mut BTreeSet<String> = terms.entry(lang.clone()).or_default();
            for t in list {
                let t = t.trim().to_lowercase();
                if t.is_empty() || t.split_whitespace().count() > 1 {
                    dropped.push((lang.clone(), t));
                } else {
                    set.insert(t);
                }
            }
        }
        (Self { terms }, dropped)
    }

    pub fn get(&self, language: &str) -> Option<&BTreeSet<String>> {
        self.terms.get(language)
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
        let (lexicon, dropped) = Self::from_raw(raw);
        if !dropped.is_empty() {
            log::warn!("dropped {} multi-token lexicon entries", dropped.len());
        }
        Ok(lexicon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionRole {
    Semantic,
    Surface,
    Distractor,
}

impl OptionRole {
    pub fn as_str(self) -> &'static str {
        match self {
            OptionRole::Semantic => "semantic",
            OptionRole::Surface => "surface",
            OptionRole::Distractor => "distractor",
        }
    }
}

impl FromStr for OptionRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "semantic" => Ok(OptionRole::Semantic),
            "surface" => Ok(OptionRole::Surface),
            "distractor" => Ok(OptionRole::Distractor),
            other => Err(Error::Format(format!("unknown option role '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationOption {
    pub culture: String,
    pub role: OptionRole,
}

pub const OPTIONS_PER_ITEM: usize = 5;

/// One image with its five candidate cultures, as shown to annotators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketItem {
    pub image_id: String,
    pub options: Vec<AnnotationOption>,
}

impl PacketItem {
    pub fn check(&self) -> Result<()> {
        if self.options.len() != OPTIONS_PER_ITEM {
            return Err(Error::Invariant(format!(
                "{}: expected {OPTIONS_PER_ITEM} options, got {}",
                self.image_id,
                self.options.len()
            )));
        }
        for role in [OptionRole::Semantic, OptionRole::Surface] {
            let n = self.options.iter().filter(|o| o.role == role).count();
            if n != 1 {
                return Err(Error::Invariant(format!(
                    "{}: expected exactly one {} option, got {n}",
                    self.image_id,
                    role.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn role_of(&self, culture: &str) -> Option<OptionRole> {
        self.options.iter().find(|o| o.culture == culture).map(|o| o.role)
    }

    pub fn culture_with(&self, role: OptionRole) -> Option<&str> {
        self.options.iter().find(|o| o.role == role).map(|o| o.culture.as_str())
    }
}

/// One annotator's choice for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub item: PacketItem,
    pub annotator_id: String,
    pub chosen_culture: String,
}

impl AnnotationRecord {
    pub fn check(&self) -> Result<()> {
        self.item.check()?;
        if self.item.role_of(&self.chosen_culture).is_none() {
            return Err(Error::Invariant(format!(
                "{}: chosen culture '{}' is not among the options",
                self.item.image_id, self.chosen_culture
            )));
        }
        Ok(())
    }

    /// Role of the chosen option.
    pub fn chosen_role(&self) -> OptionRole {
        self.item
            .role_of(&self.chosen_culture)
            .expect("checked on construction")
    }

    pub fn chosen_index(&self) -> usize {
        self.item
            .options
            .iter()
            .position(|o| o.culture == self.chosen_culture)
            .expect("checked on construction")
    }
}

fn annotation_header() -> Vec<String> {
    let mut h = vec!["image_id".to_string(), "annotator_id".into(), "chosen_culture".into()];
    h.extend((1..=OPTIONS_PER_ITEM).map(|i| format!("opt{i}")));
    h.extend((1..=OPTIONS_PER_ITEM).map(|i| format!("role{i}")));
    h
}

fn write_annotation_rows<'a>(
    path: &Path,
    rows: impl Iterator<Item = (&'a PacketItem, &'a str, &'a str)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(annotation_header())?;
    for (item, annotator, chosen) in rows {
        let mut rec = vec![item.image_id.as_str(), annotator, chosen];
        rec.extend(item.options.iter().map(|o| o.culture.as_str()));
        rec.extend(item.options.iter().map(|o| o.role.as_str()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes an annotation packet: annotation CSV layout with empty annotator and choice.
pub fn write_packet(path: impl AsRef<Path>, items: &[PacketItem]) -> Result<()> {
    for item in items {
        item.check()?;
    }
    write_annotation_rows(path.as_ref(), items.iter().map(|i| (i, "", "")))
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> Result<()> {
    for r in records {
        r.check()?;
    }
    write_annotation_rows(
        path.as_ref(),
        records
            .iter()
            .map(|r| (&r.item, r.annotator_id.as_str(), r.chosen_culture.as_str())),
    )
}

/// Reads annotation CSV rows (`image_id, annotator_id, chosen_culture, opt1..opt5, role1..role5`).
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != annotation_header() {
        return Err(Error::Format(format!(
            "unexpected annotation header: {}",
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let options = (0..OPTIONS_PER_ITEM)
            .map(|i| {
                Ok(AnnotationOption {
                    culture: rec[3 + i].to_string(),
                    role: rec[3 + OPTIONS_PER_ITEM + i].parse()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = AnnotationRecord {
            item: PacketItem {
                image_id: rec[0].to_string(),
                options,
            },
            annotator_id: rec[1].to_string(),
            chosen_culture: rec[2].to_string(),
        };
        record.check()?;
        out.push(record);
    }
    Ok(out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
