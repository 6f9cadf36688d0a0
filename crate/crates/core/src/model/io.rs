//! Readers and writers for the on-disk formats.
//!
//! * dataset: one JSON object per line with `id`, `question`, `options`,
//!   `answer_index` and optional `subset`;
//! * predictions: a header line `{"model", "mode"}` followed by
//!   `{"example_id", "probs"}` rows;
//! * embeddings: `SMEB1\n`, u32 LE count, u32 LE dim, then `count * dim`
//!   f32 LE values row-major, plus a manifest with one id per line. A text
//!   variant with one JSON float array per line is accepted on read;
//! * Elo: `model,elo` lines, optional header;
//! * ledger: one JSON object per line, sorted by id.
//!
//! The `parse_*` functions never panic on malformed input.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Dataset, EloTable, EmbeddingSet, Example, Ledger, LedgerEntry, PredictionSet, PromptMode,
    RunConfig, PROB_SUM_TOLERANCE,
};
use crate::error::{Error, Result};

pub const EMB_MAGIC: &[u8; 6] = b"SMEB1\n";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Iterates non-blank lines with their 1-based line numbers.
fn numbered_lines<R: BufRead>(
    reader: R,
    what: &'static str,
) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(move |(i, line)| {
            line.map(|l| (i + 1, l))
                .map_err(|e| Error::parse(what, i + 1, e))
        })
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

// ---------------------------------------------------------------------------
// Dataset

pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for item in numbered_lines(reader, "dataset") {
        let (line, text) = item?;
        let example: Example =
            serde_json::from_str(&text).map_err(|e| Error::parse("dataset", line, e))?;
        example.validate().map_err(|e| match e {
            Error::Parse { what, message, .. } => Error::Parse {
                what,
                line,
                message,
            },
            other => other,
        })?;
        if !seen.insert(example.id.clone()) {
            return Err(Error::DuplicateId {
                id: example.id,
                line,
            });
        }
        examples.push(example);
    }
    Dataset::new(examples)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(open(path)?)
}

pub fn write_examples<'a, W: Write>(
    mut writer: W,
    examples: impl IntoIterator<Item = &'a Example>,
) -> std::io::Result<()> {
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset) -> std::io::Result<()> {
    write_examples(writer, dataset.examples())
}

// ---------------------------------------------------------------------------
// Predictions

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionHeader {
    model: String,
    mode: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRow {
    example_id: String,
    probs: Vec<f64>,
}

pub fn parse_predictions<R: BufRead>(reader: R) -> Result<PredictionSet> {
    let mut lines = numbered_lines(reader, "predictions");
    let (line, header) = match lines.next() {
        Some(item) => item?,
        None => return Err(Error::parse("predictions", 1, "missing header record")),
    };
    let header: PredictionHeader =
        serde_json::from_str(&header).map_err(|e| Error::parse("predictions", line, e))?;
    if header.model.is_empty() {
        return Err(Error::parse("predictions", line, "empty model name"));
    }
    let mode: PromptMode = header.mode.parse()?;

    let mut entries = BTreeMap::new();
    for item in lines {
        let (line, text) = item?;
        let row: PredictionRow =
            serde_json::from_str(&text).map_err(|e| Error::parse("predictions", line, e))?;
        if row.example_id.is_empty() {
            return Err(Error::parse("predictions", line, "empty example_id"));
        }
        if row.probs.is_empty() {
            return Err(Error::parse(
                "predictions",
                line,
                "empty probability vector",
            ));
        }
        if let Some(p) = row.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::parse(
                "predictions",
                line,
                format!("probability {p} outside [0, 1]"),
            ));
        }
        let sum: f64 = row.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::ProbabilitySum {
                example_id: row.example_id,
                line,
                sum,
            });
        }
        if entries.contains_key(&row.example_id) {
            return Err(Error::DuplicateId {
                id: row.example_id,
                line,
            });
        }
        entries.insert(row.example_id, row.probs);
    }
    Ok(PredictionSet {
        model: header.model,
        mode,
        entries,
    })
}

pub fn load_predictions(path: &Path) -> Result<PredictionSet> {
    parse_predictions(open(path)?)
}

/// Loads every `*.jsonl` file in `dir`, ordered by (model, mode).
pub fn load_prediction_dir(dir: &Path) -> Result<Vec<PredictionSet>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    let mut sets = Vec::with_capacity(paths.len());
    for path in &paths {
        let set = load_predictions(path).map_err(|e| match e {
            Error::Parse {
                what,
                line,
                message,
            } => Error::Parse {
                what,
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        sets.push(set);
    }
    sets.sort_by(|a, b| (&a.model, a.mode).cmp(&(&b.model, b.mode)));
    Ok(sets)
}

pub fn write_predictions<W: Write>(mut writer: W, set: &PredictionSet) -> std::io::Result<()> {
    let header = PredictionHeader {
        model: set.model.clone(),
        mode: set.mode.as_str().to_string(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;
    for (id, probs) in &set.entries {
        serde_json::to_writer(
            &mut writer,
            &PredictionRow {
                example_id: id.clone(),
                probs: probs.clone(),
            },
        )?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

// ---------------------------------------------------------------------------
// Embeddings

fn parse_manifest(manifest: &str) -> Vec<String> {
    let mut ids: Vec<String> = manifest
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    if ids.last().is_some_and(String::is_empty) {
        ids.pop();
    }
    ids
}

/// Parses an embedding payload (binary or text variant) and its manifest.
pub fn parse_embeddings(payload: &[u8], manifest: &str) -> Result<EmbeddingSet> {
    let ids = parse_manifest(manifest);
    let first = payload.iter().find(|b| !b.is_ascii_whitespace());
    let (dim, data) = if payload.starts_with(EMB_MAGIC) {
        parse_emb1(&payload[EMB_MAGIC.len()..], ids.len())?
    } else if first == Some(&b'[') {
        parse_embedding_text(payload, ids.len())?
    } else {
        return Err(Error::EmbeddingMagic);
    };
    EmbeddingSet::new(dim, ids, data)
}

fn parse_emb1(body: &[u8], manifest_len: usize) -> Result<(usize, Vec<f32>)> {
    if body.len() < 8 {
        return Err(Error::EmbeddingSize {
            count: 0,
            dim: 0,
            payload_bytes: body.len(),
        });
    }
    let count = u32::from_le_bytes(body[0..4].try_into().expect("4 bytes"));
    let dim = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    let payload = &body[8..];
    let expected = u128::from(count) * u128::from(dim) * 4;
    if expected != payload.len() as u128 {
        return Err(Error::EmbeddingSize {
            count: count.into(),
            dim: dim.into(),
            payload_bytes: payload.len(),
        });
    }
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    if count as usize != manifest_len {
        return Err(Error::ManifestLength {
            count: count as usize,
            manifest: manifest_len,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((dim as usize, data))
}

fn parse_embedding_text(payload: &[u8], manifest_len: usize) -> Result<(usize, Vec<f32>)> {
    let mut dim = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for item in numbered_lines(payload, "embeddings") {
        let (line, text) = item?;
        let row: Vec<f32> =
            serde_json::from_str(&text).map_err(|e| Error::parse("embeddings", line, e))?;
        match dim {
            None if row.is_empty() => {
                return Err(Error::parse("embeddings", line, "empty vector"));
            }
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: row.len(),
                });
            }
            Some(_) => {}
        }
        data.extend(row);
        rows += 1;
    }
    if rows != manifest_len {
        return Err(Error::ManifestLength {
            count: rows,
            manifest: manifest_len,
        });
    }
    match dim {
        Some(d) => Ok((d, data)),
        None => Err(Error::parse("embeddings", 1, "no vectors")),
    }
}

pub fn load_embeddings(path: &Path, manifest_path: &Path) -> Result<EmbeddingSet> {
    let payload = read_bytes(path)?;
    let manifest = read_text(manifest_path)?;
    parse_embeddings(&payload, &manifest)
}

/// Encodes `set` as EMB1 bytes plus manifest text.
pub fn encode_embeddings(set: &EmbeddingSet) -> (Vec<u8>, String) {
    let mut bytes = Vec::with_capacity(EMB_MAGIC.len() + 8 + set.raw().len() * 4);
    bytes.extend_from_slice(EMB_MAGIC);
    bytes.extend_from_slice(&(set.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for x in set.raw() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    let mut manifest = String::new();
    for id in set.ids() {
        manifest.push_str(id);
        manifest.push('\n');
    }
    (bytes, manifest)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path, manifest_path: &Path) -> Result<()> {
    let (bytes, manifest) = encode_embeddings(set);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    fs::write(manifest_path, manifest).map_err(|e| Error::io(manifest_path, e))
}

// ---------------------------------------------------------------------------
// Elo

pub fn parse_elo(text: &str) -> Result<EloTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut scores = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::parse("elo", line, e))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::parse("elo", line, "expected two columns: model,elo"));
        }
        let (model, elo) = (&record[0], &record[1]);
        if line == 1 && model.eq_ignore_ascii_case("model") {
            continue;
        }
        if model.is_empty() {
            return Err(Error::parse("elo", line, "empty model name"));
        }
        let score: f64 = elo
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse("elo", line, format!("invalid score {elo:?}")))?;
        if scores.insert(model.to_string(), score).is_some() {
            return Err(Error::DuplicateId {
                id: model.to_string(),
                line,
            });
        }
    }
    Ok(EloTable { scores })
}

pub fn load_elo(path: &Path) -> Result<EloTable> {
    parse_elo(&read_text(path)?)
}

// ---------------------------------------------------------------------------
// Ledger

pub fn parse_ledger<R: BufRead>(reader: R) -> Result<Ledger> {
    let mut entries: Vec<LedgerEntry> = Vec::new();
    for item in numbered_lines(reader, "ledger") {
        let (line, text) = item?;
        let entry: LedgerEntry =
            serde_json::from_str(&text).map_err(|e| Error::parse("ledger", line, e))?;
        entry.check().map_err(|e| match e {
            Error::Parse { what, message, .. } => Error::Parse {
                what,
                line,
                message,
            },
            other => other,
        })?;
        if let Some(prev) = entries.last() {
            if prev.id >= entry.id {
                return Err(Error::parse("ledger", line, "ids not strictly increasing"));
            }
        }
        entries.push(entry);
    }
    Ok(Ledger { entries })
}

pub fn load_ledger(path: &Path) -> Result<Ledger> {
    parse_ledger(open(path)?)
}

pub fn write_ledger<W: Write>(mut writer: W, ledger: &Ledger) -> std::io::Result<()> {
    for entry in &ledger.entries {
        serde_json::to_writer(&mut writer, entry)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

// ---------------------------------------------------------------------------
// Config

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_toml(&read_text(path)?)
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    f(&mut writer)
        .and_then(|()| writer.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"id":"q1","question":"What?","options":["a","b","c","d"],"answer_index":0,"subset":"s1"}
{"id":"q2","question":"Why?","options":["a","b","c","d"],"answer_index":3}
{"id":"q3","question":"How?","options":["a","b"],"answer_index":1,"subset":null}
"#;

    #[test]
    fn parses_three_records() {
        let ds = parse_dataset(THREE.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.get("q1").unwrap().subset.as_deref(), Some("s1"));
        assert_eq!(ds.get("q2").unwrap().subset, None);
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let bad = r#"{"id":"q1","question":"x","options":["a","b","c","d"],"answer_index":0}
{"id":"q2","question":"x","options":["a","b","c","d"],"answer_index":4}"#;
        let err = parse_dataset(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("gold_index out of range"), "{err}");

        let dup = r#"{"id":"q1","question":"x","options":["a","b"],"answer_index":0}

{"id":"q1","question":"y","options":["a","b"],"answer_index":1}"#;
        match parse_dataset(dup.as_bytes()).unwrap_err() {
            Error::DuplicateId { id, line } => {
                assert_eq!(id, "q1");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }

        let broken = "{\"id\":\"q1\"\n";
        assert!(matches!(
            parse_dataset(broken.as_bytes()).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn prediction_sums_are_checked() {
        let ok = "{\"model\":\"m\",\"mode\":\"full_prompt\"}\n{\"example_id\":\"q1\",\"probs\":[0.1,0.2,0.3,0.4]}\n";
        let set = parse_predictions(ok.as_bytes()).unwrap();
        assert_eq!(set.mode, PromptMode::FullPrompt);
        assert_eq!(set.probs("q1").unwrap().len(), 4);

        let bad = "{\"model\":\"m\",\"mode\":\"full_prompt\"}\n{\"example_id\":\"q1\",\"probs\":[0.5,0.5,0.5,0.5]}\n";
        assert!(matches!(
            parse_predictions(bad.as_bytes()).unwrap_err(),
            Error::ProbabilitySum { line: 2, .. }
        ));

        let mode = "{\"model\":\"m\",\"mode\":\"choices_only\"}\n";
        assert_eq!(
            parse_predictions(mode.as_bytes()).unwrap().mode,
            PromptMode::ChoicesOnly
        );

        let unknown = "{\"model\":\"m\",\"mode\":\"zero_shot\"}\n";
        assert!(matches!(
            parse_predictions(unknown.as_bytes()).unwrap_err(),
            Error::UnknownMode(_)
        ));
    }

    #[test]
    fn prediction_sum_tolerance_boundary() {
        let within = "{\"model\":\"m\",\"mode\":\"full_prompt\"}\n{\"example_id\":\"q1\",\"probs\":[0.5,0.5009]}\n";
        assert!(parse_predictions(within.as_bytes()).is_ok());
        let outside = "{\"model\":\"m\",\"mode\":\"full_prompt\"}\n{\"example_id\":\"q1\",\"probs\":[0.5,0.5011]}\n";
        assert!(parse_predictions(outside.as_bytes()).is_err());
    }

    fn emb1(count: u32, dim: u32, values: &[f32]) -> Vec<u8> {
        let mut bytes = EMB_MAGIC.to_vec();
        bytes.extend_from_slice(&count.to_le_bytes());
        bytes.extend_from_slice(&dim.to_le_bytes());
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn emb1_parses_and_checks_manifest() {
        let payload = emb1(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let set = parse_embeddings(&payload, "a\nb\n").unwrap();
        assert_eq!(set.dim(), 3);
        assert_eq!(set.vector("b").unwrap(), &[4.0, 5.0, 6.0]);

        assert!(matches!(
            parse_embeddings(&payload, "a\n").unwrap_err(),
            Error::ManifestLength {
                count: 2,
                manifest: 1
            }
        ));
        let zero = emb1(2, 3, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            parse_embeddings(&zero, "a\nb\n").unwrap_err(),
            Error::ZeroVector { .. }
        ));
        let short = emb1(2, 3, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            parse_embeddings(&short, "a\nb\n").unwrap_err(),
            Error::EmbeddingSize { .. }
        ));
        let mut bad_magic = payload.clone();
        bad_magic[4] = b'X';
        assert!(matches!(
            parse_embeddings(&bad_magic, "a\nb\n").unwrap_err(),
            Error::EmbeddingMagic
        ));
    }

    #[test]
    fn emb1_header_overflow_is_rejected() {
        let payload = emb1(u32::MAX, u32::MAX, &[1.0]);
        assert!(parse_embeddings(&payload, "a\n").is_err());
    }

    #[test]
    fn text_embeddings() {
        let set = parse_embeddings(b"[1, 0]\n[0.5, 0.5]\n", "x\ny").unwrap();
        assert_eq!(set.len(), 2);
        assert!(matches!(
            parse_embeddings(b"[1, 0]\n[0.5]\n", "x\ny").unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn elo_table() {
        let elo = parse_elo("model,elo\nalpha,1250.5\nbeta, 1190\n\n").unwrap();
        assert_eq!(elo.get("alpha"), Some(1250.5));
        assert_eq!(elo.get("beta"), Some(1190.0));
        assert!(parse_elo("alpha,1\nalpha,2\n").is_err());
        assert!(parse_elo("alpha,high\n").is_err());
        assert!(parse_elo("alpha,1,2\n").is_err());
    }
}
