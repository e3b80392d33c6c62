//! Sample records, corpora and their JSONL representation.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"a","scores":{"m1":0.9,"m2":0.4},"gold":1,"premise":null,"hypothesis":null,"dataset":"xsum"}
//! ```
//!
//! Labeled output adds `p_pos` and, after unification, `votes`. A source that
//! did not run on a sample is simply absent from `scores` (a `null` score is
//! read the same way).

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub scores: IndexMap<String, f64>,
    pub gold: Option<u8>,
    pub premise: Option<String>,
    pub hypothesis: Option<String>,
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_pos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<IndexMap<String, i8>>,
}

impl SampleRecord {
    pub fn new(id: impl Into<String>) -> Self {
        SampleRecord {
            id: id.into(),
            scores: IndexMap::new(),
            gold: None,
            premise: None,
            hypothesis: None,
            dataset: None,
            p_pos: None,
            votes: None,
        }
    }

    pub fn with_score(mut self, source: impl Into<String>, score: f64) -> Self {
        self.scores.insert(source.into(), score);
        self
    }

    pub fn with_gold(mut self, gold: u8) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn with_dataset(mut self, dataset: impl Into<String>) -> Self {
        self.dataset = Some(dataset.into());
        self
    }

    pub fn with_text(mut self, premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        self.premise = Some(premise.into());
        self.hypothesis = Some(hypothesis.into());
        self
    }

    fn validate(&self) -> Result<()> {
        for (source, &score) in &self.scores {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Validation(format!(
                    "record '{}': score {score} for source '{source}' is outside [0,1]",
                    self.id
                )));
            }
        }
        if let Some(g) = self.gold {
            if g > 1 {
                return Err(Error::Validation(format!(
                    "record '{}': gold label {g} is not 0 or 1",
                    self.id
                )));
            }
        }
        if let Some(p) = self.p_pos {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "record '{}': p_pos {p} is outside [0,1]",
                    self.id
                )));
            }
        }
        if let Some(votes) = &self.votes {
            for (source, &v) in votes {
                if !(-1..=1).contains(&v) {
                    return Err(Error::Validation(format!(
                        "record '{}': vote {v} for source '{source}' is not in {{-1,0,1}}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Wire form of a record; tolerates `null` scores and omitted optional keys.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    scores: IndexMap<String, Option<f64>>,
    #[serde(default)]
    gold: Option<i64>,
    #[serde(default)]
    premise: Option<String>,
    #[serde(default)]
    hypothesis: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    p_pos: Option<f64>,
    #[serde(default)]
    votes: Option<IndexMap<String, i64>>,
}

impl RawRecord {
    /// Score keys as written, including ones whose value is `null`.
    fn declared_sources(&self) -> impl Iterator<Item = &String> {
        self.scores.keys()
    }

    fn into_record(self) -> std::result::Result<SampleRecord, String> {
        let gold = match self.gold {
            None => None,
            Some(g @ 0..=1) => Some(g as u8),
            Some(g) => return Err(format!("gold label {g} is not 0 or 1")),
        };
        let votes = match self.votes {
            None => None,
            Some(v) => Some(
                v.into_iter()
                    .map(|(k, x)| match x {
                        -1..=1 => Ok((k, x as i8)),
                        _ => Err(format!("vote {x} for source '{k}' is not in {{-1,0,1}}")),
                    })
                    .collect::<std::result::Result<_, _>>()?,
            ),
        };
        Ok(SampleRecord {
            id: self.id,
            scores: self
                .scores
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .collect(),
            gold,
            premise: self.premise,
            hypothesis: self.hypothesis,
            dataset: self.dataset,
            p_pos: self.p_pos,
            votes,
        })
    }
}

/// An ordered, validated collection of records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    records: Vec<SampleRecord>,
    sources: Vec<String>,
}

impl Corpus {
    /// Validates every record and derives the source list (order of first appearance).
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        Corpus::with_sources(records, Vec::new())
    }

    /// Like [`Corpus::new`], but `declared` sources come first even when no
    /// record has a present score for them (e.g. every value was `null`).
    pub fn with_sources(records: Vec<SampleRecord>, declared: Vec<String>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(records.len());
        let mut sources: IndexMap<String, ()> = declared.into_iter().map(|s| (s, ())).collect();
        for r in &records {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id '{}'", r.id)));
            }
            for k in r.scores.keys() {
                if !sources.contains_key(k) {
                    sources.insert(k.clone(), ());
                }
            }
        }
        Ok(Corpus {
            records,
            sources: sources.into_keys().collect(),
        })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<SampleRecord> {
        self.records
    }

    fn rebuild(&self, records: Vec<SampleRecord>) -> Result<Corpus> {
        Corpus::with_sources(records, self.sources.clone())
    }

    /// Replaces the records, keeping this corpus's source list in front.
    pub fn map_records(&self, f: impl FnMut(&SampleRecord) -> SampleRecord) -> Result<Corpus> {
        self.rebuild(self.records.iter().map(f).collect())
    }

    /// Returns a copy with `p_pos` set on every record.
    pub fn with_labels(&self, labels: &[f64]) -> Result<Corpus> {
        if labels.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: self.records.len(),
                actual: labels.len(),
            });
        }
        let records = self
            .records
            .iter()
            .zip(labels)
            .map(|(r, &p)| SampleRecord {
                p_pos: Some(p),
                ..r.clone()
            })
            .collect();
        self.rebuild(records)
    }

    /// Keeps the records at `indices` (which must be increasing), preserving order.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        self.rebuild(indices.iter().map(|&i| self.records[i].clone()).collect())
            .expect("subset of a valid corpus is valid")
    }

    /// Serializes the corpus as JSONL.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses JSONL text. Blank lines are skipped; `origin` is used in error messages.
    pub fn from_jsonl(text: &str, origin: &Path) -> Result<Corpus> {
        let mut builder = CorpusBuilder::default();
        for (i, line) in text.lines().enumerate() {
            builder.push_line(line, origin, i + 1)?;
        }
        builder.finish()
    }
}

#[derive(Default)]
struct CorpusBuilder {
    records: Vec<SampleRecord>,
    declared: IndexMap<String, ()>,
}

impl CorpusBuilder {
    fn push_line(&mut self, line: &str, origin: &Path, line_no: usize) -> Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        let malformed = |message: String| Error::Malformed {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        for s in raw.declared_sources() {
            if !self.declared.contains_key(s) {
                self.declared.insert(s.clone(), ());
            }
        }
        for s in raw.votes.iter().flat_map(|v| v.keys()) {
            if !self.declared.contains_key(s) {
                self.declared.insert(s.clone(), ());
            }
        }
        let record = raw.into_record().map_err(malformed)?;
        record.validate().map_err(|e| malformed(e.to_string()))?;
        self.records.push(record);
        Ok(())
    }

    fn finish(self) -> Result<Corpus> {
        Corpus::with_sources(self.records, self.declared.into_keys().collect())
    }
}

/// Reads a corpus from a JSONL file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut builder = CorpusBuilder::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        builder.push_line(&line, path, i + 1)?;
    }
    builder.finish()
}

/// Writes `corpus` with `p_pos` attached to each record.
pub fn save_labeled(corpus: &Corpus, labels: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let labeled = corpus.with_labels(labels)?;
    write_atomic(path, labeled.to_jsonl().as_bytes())
}

/// Writes a corpus as-is.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, corpus.to_jsonl().as_bytes())
}

/// Per-sample feature vectors keyed by sample id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    dim: usize,
    rows: IndexMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FeatureLine<'a> {
    id: std::borrow::Cow<'a, str>,
    features: std::borrow::Cow<'a, [f64]>,
}

impl FeatureTable {
    pub fn new(rows: IndexMap<String, Vec<f64>>) -> Result<Self> {
        let dim = rows.values().next().map_or(0, Vec::len);
        for (id, v) in &rows {
            if v.len() != dim {
                return Err(Error::Validation(format!(
                    "features for '{id}' have dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "features for '{id}' contain non-finite values"
                )));
            }
        }
        Ok(FeatureTable { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.rows {
            let line = FeatureLine {
                id: id.as_str().into(),
                features: v.as_slice().into(),
            };
            out.push_str(&serde_json::to_string(&line).expect("features always serialize"));
            out.push('\n');
        }
        out
    }
}

/// Reads a feature file (`{"id": ..., "features": [...]}` per line).
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = IndexMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FeatureLine = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = parsed.id.into_owned();
        if rows.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate feature id '{id}'")));
        }
        rows.insert(id, parsed.features.into_owned());
    }
    FeatureTable::new(rows)
}

pub fn save_features(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, table.to_jsonl().as_bytes())
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// failure never leaves a half-written artifact behind.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = temp_sibling(path);
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value always serializes");
    bytes.push(b'\n');
    bytes
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Corpus> {
        Corpus::from_jsonl(text, Path::new("test.jsonl"))
    }

    #[test]
    fn parses_schema_line() {
        let c = parse(r#"{"id":"a","scores":{"m1":0.9},"gold":1}"#).unwrap();
        assert_eq!(c.len(), 1);
        let r = &c.records()[0];
        assert_eq!(r.id, "a");
        assert_eq!(r.scores["m1"], 0.9);
        assert_eq!(r.gold, Some(1));
        assert_eq!(c.sources(), ["m1"]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = parse("").unwrap();
        assert!(c.is_empty());
        assert!(c.sources().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err =
            parse("{\"id\":\"a\",\"scores\":{}}\n{\"id\":\"a\",\"scores\":{}}\n").unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("duplicate")),
            "{err}"
        );
    }

    #[test]
    fn out_of_range_score_rejected() {
        let err = parse(r#"{"id":"a","scores":{"m1":1.5}}"#).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }), "{err}");
        let err = parse(r#"{"id":"a","scores":{"m1":-0.01}}"#).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }), "{err}");
        let direct = Corpus::new(vec![SampleRecord::new("a").with_score("m1", 1.5)]);
        assert!(matches!(direct, Err(Error::Validation(_))));
    }

    #[test]
    fn bad_gold_rejected() {
        let err = parse(r#"{"id":"a","scores":{},"gold":2}"#).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse("{\"id\":\"a\",\"scores\":{}}\n\nnot json\n").unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn null_score_is_missing_but_declares_source() {
        let c = parse(r#"{"id":"a","scores":{"m1":null,"m2":0.3}}"#).unwrap();
        assert!(!c.records()[0].scores.contains_key("m1"));
        assert_eq!(c.sources(), ["m1", "m2"]);
    }

    #[test]
    fn sources_in_first_appearance_order() {
        let c = parse(
            "{\"id\":\"a\",\"scores\":{\"z\":0.1}}\n{\"id\":\"b\",\"scores\":{\"a\":0.2,\"z\":0.3}}\n",
        )
        .unwrap();
        assert_eq!(c.sources(), ["z", "a"]);
    }

    #[test]
    fn labeled_line_contains_p_pos() {
        let c = parse(r#"{"id":"a","scores":{}}"#).unwrap();
        let text = c.with_labels(&[0.5]).unwrap().to_jsonl();
        assert!(text.contains("\"p_pos\":0.5"), "{text}");
    }

    #[test]
    fn short_labels_rejected() {
        let c = parse("{\"id\":\"a\",\"scores\":{}}\n{\"id\":\"b\",\"scores\":{}}").unwrap();
        let err = c.with_labels(&[0.5]).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 2,
                actual: 1,
                ..
            }
        ));
    }

    #[test]
    fn save_and_load_labeled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.jsonl");
        let c = Corpus::new(vec![
            SampleRecord::new("a").with_score("m1", 0.1).with_gold(0),
            SampleRecord::new("b")
                .with_score("m2", 0.7)
                .with_dataset("d")
                .with_text("p", "h"),
        ])
        .unwrap();
        save_labeled(&c, &[0.25, 1.0 / 3.0], &path).unwrap();
        let back = load_corpus(&path).unwrap();
        assert_eq!(back, c.with_labels(&[0.25, 1.0 / 3.0]).unwrap());
    }

    #[test]
    fn feature_dimensions_must_agree() {
        let mut rows = IndexMap::new();
        rows.insert("a".to_string(), vec![1.0, 2.0]);
        rows.insert("b".to_string(), vec![1.0]);
        assert!(FeatureTable::new(rows).is_err());
    }
}
