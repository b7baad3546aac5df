//! Documents, JSON-lines I/O, validation, and candidate spans.

mod spans;
mod synthetic;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use spans::{enumerate_spans, expected_span_count, gold_coverage, CandidateSpan};
pub use synthetic::{generate_synthetic, SyntheticConfig, CUE_MARKER, PRONOUN};

pub const NUM_GENRES: usize = 7;

/// Inclusive token span `[start, end]`, serialized as `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn contains(&self, token: usize) -> bool {
        self.start <= token && token <= self.end
    }

    /// True when the spans overlap without one containing the other.
    pub fn crosses(&self, other: &Span) -> bool {
        (self.start < other.start && other.start <= self.end && self.end < other.end)
            || (other.start < self.start && self.start <= other.end && other.end < self.end)
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

pub type Cluster = Vec<Span>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
    #[serde(rename = "sentences")]
    pub sentence_bounds: Vec<Span>,
    #[serde(rename = "speakers")]
    pub speaker_ids: Vec<i64>,
    #[serde(rename = "genre")]
    pub genre_id: usize,
    #[serde(rename = "clusters")]
    pub gold_clusters: Vec<Cluster>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    /// Index of the sentence containing `token`.
    pub fn sentence_of(&self, token: usize) -> Option<usize> {
        self.sentence_bounds.iter().position(|s| s.contains(token))
    }

    pub fn speaker_of(&self, span: Span) -> i64 {
        self.speaker_ids[span.start]
    }
}

/// Lists every invariant the document breaks; empty when valid.
pub fn validate_document(doc: &Document) -> Vec<String> {
    let mut v = Vec::new();
    let n = doc.tokens.len();

    if doc.speaker_ids.len() != n {
        v.push(format!(
            "speakers has {} entries for {n} tokens",
            doc.speaker_ids.len()
        ));
    }
    if doc.genre_id >= NUM_GENRES {
        v.push(format!("genre {} outside [0,{NUM_GENRES})", doc.genre_id));
    }

    let mut expected_start = 0;
    for s in &doc.sentence_bounds {
        if s.start > s.end {
            v.push(format!("inverted sentence {s}"));
        }
        if s.start != expected_start {
            v.push(format!(
                "sentence {s} does not start at token {expected_start} (sentences must tile the document)"
            ));
        }
        expected_start = s.end + 1;
    }
    if expected_start != n {
        v.push(format!(
            "sentences cover [0,{expected_start}) but the document has {n} tokens"
        ));
    }

    let mut seen = HashSet::new();
    for (k, cluster) in doc.gold_clusters.iter().enumerate() {
        if cluster.len() < 2 {
            v.push(format!("cluster {k}: cluster size < 2"));
        }
        for &span in cluster {
            if span.start > span.end {
                v.push(format!("cluster {k}: inverted span {span}"));
                continue;
            }
            if span.end >= n {
                v.push(format!("cluster {k}: span {span} out of range for {n} tokens"));
                continue;
            }
            if doc.sentence_of(span.start) != doc.sentence_of(span.end) {
                v.push(format!("cluster {k}: span {span} crosses a sentence boundary"));
            }
            if !seen.insert(span) {
                v.push(format!("cluster {k}: span {span} appears more than once"));
            }
        }
    }
    v
}

fn check(doc: &Document) -> Result<()> {
    let violations = validate_document(doc);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation {
            doc_id: doc.doc_id.clone(),
            violations,
        })
    }
}

/// Reads one document per non-blank line and validates each.
pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        check(&doc)?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_documents(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// The `doc_id` and `clusters` of a JSON-lines record; other fields are
/// ignored, so both full documents and bare predictions parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub doc_id: String,
    pub clusters: Vec<Cluster>,
}

pub fn load_cluster_records(path: impl AsRef<Path>) -> Result<Vec<ClusterRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClusterRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn small_doc() -> Document {
        Document {
            doc_id: "d0".into(),
            tokens: "John saw Mary . He waved"
                .split(' ')
                .map(String::from)
                .collect(),
            sentence_bounds: vec![Span::new(0, 3), Span::new(4, 5)],
            speaker_ids: vec![0; 6],
            genre_id: 2,
            gold_clusters: vec![vec![Span::new(0, 0), Span::new(4, 4)]],
        }
    }

    #[test]
    fn valid_document_has_no_violations() {
        assert!(validate_document(&small_doc()).is_empty());
    }

    #[test]
    fn inverted_span() {
        let mut doc = small_doc();
        doc.tokens.extend(["a", "b"].map(String::from));
        doc.speaker_ids.extend([0, 0]);
        doc.sentence_bounds[1] = Span::new(4, 7);
        doc.gold_clusters[0].push(Span::new(5, 3));
        let v = validate_document(&doc);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("inverted span (5,3)"));
    }

    #[test]
    fn singleton_cluster() {
        let mut doc = small_doc();
        doc.gold_clusters.push(vec![Span::new(2, 2)]);
        let v = validate_document(&doc);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("cluster size < 2"));
    }

    #[test]
    fn crossing_sentence_boundary() {
        let mut doc = small_doc();
        doc.gold_clusters[0].push(Span::new(3, 4));
        let v = validate_document(&doc);
        assert!(v.iter().any(|m| m.contains("(3,4) crosses a sentence boundary")), "{v:?}");
    }

    #[test]
    fn duplicate_span_across_clusters() {
        let mut doc = small_doc();
        doc.gold_clusters.push(vec![Span::new(0, 0), Span::new(2, 2)]);
        let v = validate_document(&doc);
        assert!(v.iter().any(|m| m.contains("appears more than once")));
    }

    #[test]
    fn sentence_tiling_and_metadata() {
        let mut doc = small_doc();
        doc.sentence_bounds = vec![Span::new(0, 2), Span::new(4, 5)];
        doc.genre_id = 7;
        doc.speaker_ids.pop();
        let v = validate_document(&doc);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn span_crossing() {
        let a = Span::new(2, 5);
        assert!(a.crosses(&Span::new(4, 7)));
        assert!(Span::new(0, 3).crosses(&a));
        assert!(!a.crosses(&Span::new(3, 4)));
        assert!(!a.crosses(&Span::new(2, 5)));
        assert!(!a.crosses(&Span::new(6, 8)));
    }

    #[test]
    fn json_field_names() {
        let json = serde_json::to_string(&small_doc()).unwrap();
        assert_eq!(
            json,
            r#"{"doc_id":"d0","tokens":["John","saw","Mary",".","He","waved"],"sentences":[[0,3],[4,5]],"speakers":[0,0,0,0,0,0],"genre":2,"clusters":[[[0,0],[4,4]]]}"#
        );
    }
}
