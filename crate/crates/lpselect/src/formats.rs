//! On-disk schemas. Everything except manifests and reports is UTF-8 JSONL,
//! one object per line:
//!
//! | file        | line schema                                                       |
//! |-------------|-------------------------------------------------------------------|
//! | corpus      | `{"id", "instruction", "input", "output"}` (`input` may be absent) |
//! | trace       | `{"id", "ppl": [P_0, P_1, ..., P_n]}`                              |
//! | embedding   | `{"id", "vec": [f64, ...]}`                                        |
//! | assignment  | `{"id", "cluster": int}`                                           |
//! | score       | `{"id", "metric": "lp"\|"lp_app", "epoch", "value", "degenerate"}` |
//!
//! Emitted JSON is canonical: keys sorted, floats in shortest round-trip
//! form, so equal data always serializes to equal bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use lpselect_core::{
    Bucket, ClusterAssignment, EmbeddingRecord, Metric, PerplexityTrace, SampleRecord, ScoreRecord, SelectionManifest,
    SelectionMode, SelectionParams,
};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, FormatError, Result};

type Object = Map<String, Value>;

/// Streams `path` line by line; `f` sees 1-based line numbers.
fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<(), FormatError>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        f(i + 1, &line).map_err(|e| Error::format(path, e))?;
    }
    Ok(())
}

fn parse_object(line: usize, text: &str) -> Result<Object, FormatError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(FormatError::MalformedLine { line, reason: "not a JSON object".into() }),
        Err(e) => Err(FormatError::MalformedLine { line, reason: e.to_string() }),
    }
}

fn req_str(obj: &Object, field: &'static str, line: usize) -> Result<String, FormatError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        _ => Err(FormatError::MissingField { field, line }),
    }
}

fn req_id(obj: &Object, line: usize) -> Result<String, FormatError> {
    let id = req_str(obj, "id", line)?;
    if id.is_empty() {
        return Err(FormatError::InvalidValue { line, what: "id must be non-empty".into() });
    }
    Ok(id)
}

fn req_u64(obj: &Object, field: &'static str, line: usize) -> Result<u64, FormatError> {
    obj.get(field).and_then(Value::as_u64).ok_or(FormatError::MissingField { field, line })
}

fn req_f64(obj: &Object, field: &'static str, line: usize) -> Result<f64, FormatError> {
    obj.get(field).and_then(Value::as_f64).ok_or(FormatError::MissingField { field, line })
}

fn req_f64_array(obj: &Object, field: &'static str, line: usize) -> Result<Vec<f64>, FormatError> {
    let arr = obj.get(field).and_then(Value::as_array).ok_or(FormatError::MissingField { field, line })?;
    arr.iter().map(|v| v.as_f64().ok_or(FormatError::MissingField { field, line })).collect()
}

/// One canonical JSON line (no trailing newline).
pub fn canonical_line<T: Serialize>(value: &T) -> String {
    // Value's map is a BTreeMap, so keys come out sorted
    serde_json::to_value(value).expect("record types serialize").to_string()
}

pub fn write_jsonl<T: Serialize>(items: &[T], out: &mut dyn Write) -> std::io::Result<()> {
    for item in items {
        out.write_all(canonical_line(item).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Loads a corpus. The whole file is rejected on the first malformed line or
/// duplicate id. A missing `input` field reads as the empty string.
pub fn load_corpus(path: &Path) -> Result<Vec<SampleRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line, text| {
        let obj = parse_object(line, text)?;
        let id = req_id(&obj, line)?;
        let instruction = req_str(&obj, "instruction", line)?;
        let input = match obj.get("input") {
            None | Some(Value::Null) => String::new(),
            Some(_) => req_str(&obj, "input", line)?,
        };
        let output = req_str(&obj, "output", line)?;
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { id, line });
        }
        records.push(SampleRecord { id, instruction, input, output });
        Ok(())
    })?;
    Ok(records)
}

/// SHA-256 over the concatenated canonical lines of the corpus, hex encoded.
pub fn corpus_hash(corpus: &[SampleRecord]) -> String {
    let mut hasher = Sha256::new();
    for r in corpus {
        hasher.update(canonical_line(r).as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Perplexity traces in file order together with their common epoch count.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub traces: Vec<PerplexityTrace>,
    pub epochs: usize,
}

/// Loads traces; with `corpus` given, every trace id must belong to it.
pub fn load_traces(path: &Path, corpus: Option<&[SampleRecord]>) -> Result<TraceFile> {
    let known: Option<HashSet<&str>> = corpus.map(|c| c.iter().map(|r| r.id.as_str()).collect());
    let mut traces: Vec<PerplexityTrace> = Vec::new();
    let mut seen = HashSet::new();
    let mut len = None;
    for_each_line(path, |line, text| {
        let obj = parse_object(line, text)?;
        let id = req_id(&obj, line)?;
        let ppl = req_f64_array(&obj, "ppl", line)?;
        if let Some(known) = &known {
            if !known.contains(id.as_str()) {
                return Err(FormatError::UnknownId { id, line });
            }
        }
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { id, line });
        }
        let expected = *len.get_or_insert(ppl.len());
        if ppl.len() != expected {
            return Err(FormatError::InconsistentEpochCount { line, expected, got: ppl.len() });
        }
        let trace = PerplexityTrace::new(id, ppl).map_err(|source| FormatError::InvalidTrace { line, source })?;
        traces.push(trace);
        Ok(())
    })?;
    match len {
        Some(n) => Ok(TraceFile { traces, epochs: n - 1 }),
        None => Err(Error::format(path, FormatError::Empty)),
    }
}

pub fn load_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let mut out: Vec<EmbeddingRecord> = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line, text| {
        let obj = parse_object(line, text)?;
        let id = req_id(&obj, line)?;
        let vec = req_f64_array(&obj, "vec", line)?;
        if vec.is_empty() {
            return Err(FormatError::InvalidValue { line, what: "embedding must have dimension >= 1".into() });
        }
        if let Some(first) = out.first() {
            if first.dim() != vec.len() {
                return Err(FormatError::DimensionMismatch { line, expected: first.dim(), got: vec.len() });
            }
        }
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { id, line });
        }
        out.push(EmbeddingRecord { id, vec });
        Ok(())
    })?;
    if out.is_empty() {
        return Err(Error::format(path, FormatError::Empty));
    }
    Ok(out)
}

/// Loads cluster assignments; labels must be dense in `[0, K)`. With
/// `corpus` given, ids must match the corpus exactly.
pub fn load_assignments(path: &Path, corpus: Option<&[SampleRecord]>) -> Result<Vec<ClusterAssignment>> {
    let known: Option<HashSet<&str>> = corpus.map(|c| c.iter().map(|r| r.id.as_str()).collect());
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line, text| {
        let obj = parse_object(line, text)?;
        let id = req_id(&obj, line)?;
        let cluster = req_u64(&obj, "cluster", line)? as usize;
        if let Some(known) = &known {
            if !known.contains(id.as_str()) {
                return Err(FormatError::UnknownId { id, line });
            }
        }
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { id, line });
        }
        out.push(ClusterAssignment { id, cluster });
        Ok(())
    })?;
    let labels: BTreeSet<usize> = out.iter().map(|a| a.cluster).collect();
    if let Some(&max) = labels.last() {
        if max + 1 != labels.len() {
            let missing = (0..=max).find(|c| !labels.contains(c)).unwrap_or(max);
            return Err(Error::format(
                path,
                FormatError::SparseClusters(format!("label {missing} unused but {max} present")),
            ));
        }
    }
    if let Some(corpus) = corpus {
        if let Some(r) = corpus.iter().find(|r| !seen.contains(&r.id)) {
            return Err(Error::format(path, FormatError::MissingId(r.id.clone())));
        }
    }
    Ok(out)
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line, text| {
        let obj = parse_object(line, text)?;
        let id = req_id(&obj, line)?;
        let metric: Metric = req_str(&obj, "metric", line)?
            .parse()
            .map_err(|_| FormatError::InvalidValue { line, what: "metric must be lp or lp_app".into() })?;
        let epoch = req_u64(&obj, "epoch", line)? as usize;
        if epoch < 1 {
            return Err(FormatError::InvalidValue { line, what: "epoch must be >= 1".into() });
        }
        let value = req_f64(&obj, "value", line)?;
        let degenerate = obj
            .get("degenerate")
            .and_then(Value::as_bool)
            .ok_or(FormatError::MissingField { field: "degenerate", line })?;
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { id, line });
        }
        out.push(ScoreRecord { id, metric, epoch, value, degenerate });
        Ok(())
    })?;
    Ok(out)
}

fn manifest_value(m: &SelectionManifest) -> Value {
    let p = &m.params;
    let mut params = Map::new();
    params.insert("mode".into(), p.mode.as_str().into());
    params.insert("metric".into(), p.metric.as_str().into());
    params.insert("epoch".into(), p.epoch.into());
    if let Some(f) = p.fraction_percent {
        params.insert("fraction_percent".into(), f.into());
    }
    if let Some(b) = p.bucket {
        params.insert("bucket".into(), b.as_str().into());
    }
    if let Some(s) = p.seed {
        params.insert("seed".into(), s.into());
    }
    params.insert("ranking_source_tag".into(), p.ranking_source_tag.clone().into());
    params.insert("corpus_hash".into(), p.corpus_hash.clone().into());
    let mut doc = Map::new();
    doc.insert("ids".into(), m.ids.clone().into());
    doc.insert("params".into(), Value::Object(params));
    doc.insert("created_at".into(), m.created_at.clone().into());
    Value::Object(doc)
}

/// Canonical manifest document, newline terminated. Validates first.
pub fn manifest_to_string(m: &SelectionManifest) -> Result<String> {
    m.validate()?;
    let mut s = serde_json::to_string_pretty(&manifest_value(m)).expect("manifest serializes");
    s.push('\n');
    Ok(s)
}

pub fn write_manifest(m: &SelectionManifest, path: &Path) -> Result<()> {
    let text = manifest_to_string(m)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_manifest(text: &str) -> Result<SelectionManifest, FormatError> {
    let doc = parse_object(1, text)?;
    let ids = doc
        .get("ids")
        .and_then(Value::as_array)
        .ok_or(FormatError::MissingField { field: "ids", line: 1 })?
        .iter()
        .map(|v| v.as_str().map(String::from).ok_or(FormatError::MissingField { field: "ids", line: 1 }))
        .collect::<Result<Vec<_>, _>>()?;
    let created_at = req_str(&doc, "created_at", 1)?;
    let p = match doc.get("params") {
        Some(Value::Object(p)) => p,
        _ => return Err(FormatError::MissingField { field: "params", line: 1 }),
    };
    let invalid = |what: &str| FormatError::InvalidValue { line: 1, what: what.into() };
    let mode: SelectionMode = req_str(p, "mode", 1)?.parse().map_err(|_| invalid("unknown mode"))?;
    let metric: Metric = req_str(p, "metric", 1)?.parse().map_err(|_| invalid("unknown metric"))?;
    let bucket = match p.get("bucket") {
        None => None,
        Some(v) => Some(v.as_str().and_then(|s| s.parse::<Bucket>().ok()).ok_or_else(|| invalid("unknown bucket"))?),
    };
    let params = SelectionParams {
        mode,
        metric,
        epoch: req_u64(p, "epoch", 1)? as usize,
        fraction_percent: p.get("fraction_percent").and_then(Value::as_f64),
        bucket,
        seed: p.get("seed").and_then(Value::as_u64),
        ranking_source_tag: req_str(p, "ranking_source_tag", 1)?,
        corpus_hash: req_str(p, "corpus_hash", 1)?,
    };
    Ok(SelectionManifest { ids, params, created_at })
}

pub fn read_manifest(path: &Path) -> Result<SelectionManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m = parse_manifest(&text).map_err(|e| Error::format(path, e))?;
    m.validate()?;
    Ok(m)
}

/// Errors unless every manifest id is in `corpus` and the hashes agree.
pub fn check_manifest_against(m: &SelectionManifest, corpus: &[SampleRecord]) -> Result<()> {
    let hash = corpus_hash(corpus);
    if m.params.corpus_hash != hash {
        return Err(Error::Invalid(format!(
            "manifest corpus_hash {} does not match corpus ({hash})",
            m.params.corpus_hash
        )));
    }
    let ids: HashSet<&str> = corpus.iter().map(|r| r.id.as_str()).collect();
    if let Some(id) = m.ids.iter().find(|id| !ids.contains(id.as_str())) {
        return Err(Error::Invalid(format!("manifest id {id} is not in the corpus")));
    }
    Ok(())
}

/// Traces as `{"id", "ppl"}` lines.
pub fn write_traces(traces: &[PerplexityTrace], out: &mut dyn Write) -> std::io::Result<()> {
    write_jsonl(traces, out)
}

/// Pretty canonical JSON document with a trailing newline.
pub fn canonical_document<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

/// Map keyed by cluster index rendered with string keys, as JSON requires.
pub fn cluster_counts_value(counts: &BTreeMap<usize, usize>) -> Value {
    Value::Object(counts.iter().map(|(k, v)| (k.to_string(), Value::from(*v))).collect())
}
