//! File formats of the harness.
//!
//! Features travel either as CSV (one sample per row, decimal reals) or as a
//! raw little-endian binary with a 16-byte header: the magic `GZSL`, a u32
//! format version, then u32 row and column counts, followed by row-major
//! f64 values. The binary form is the authoritative one for round-trips.
//! Labels are one integer per line; the partition is a JSON document with
//! `seen` and `unseen` id arrays; semantic tables are CSV rows keyed by a
//! leading class id column.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use gzsl_core::data::{ClassId, ClassPartition, SemanticKind, SemanticTable};
use gzsl_core::metrics::{SucCurve, SucPoint};

use crate::error::{CliError, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"GZSL";
pub const FEATURE_VERSION: u32 = 1;

/// How a feature file is encoded on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

/// Picks the format from an explicit setting or the file extension
/// (`.bin` means binary, anything else CSV).
pub fn feature_format(path: &Path, explicit: Option<FeatureFormat>) -> FeatureFormat {
    explicit.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e == "bin") {
            FeatureFormat::Binary
        } else {
            FeatureFormat::Csv
        }
    })
}

pub fn write_features_binary(path: &Path, features: ArrayView2<'_, f64>) -> Result<()> {
    let (n, d) = features.dim();
    let mut bytes = Vec::with_capacity(16 + n * d * 8);
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    for v in features.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_features_binary(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() < 16 {
        return Err(CliError::parse_byte(path, bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != FEATURE_MAGIC {
        return Err(CliError::parse_byte(path, 0, "bad magic, expected GZSL"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(CliError::parse_byte(
            path,
            4,
            format!("unsupported version {version}"),
        ));
    }
    let n = word(8) as usize;
    let d = word(12) as usize;
    let expected = 16 + n * d * 8;
    if bytes.len() != expected {
        return Err(CliError::parse_byte(
            path,
            bytes.len().min(expected),
            format!(
                "expected {expected} bytes for {n}x{d} values, found {}",
                bytes.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(n * d);
    for chunk in bytes[16..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Array2::from_shape_vec((n, d), values)
        .map_err(|e| CliError::parse_byte(path, 16, e.to_string()))
}

pub fn write_features_csv(path: &Path, features: ArrayView2<'_, f64>) -> Result<()> {
    let mut out = String::new();
    for row in features.outer_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse_line(path, lineno + 1, format!("not a number: {field:?}"))
            })?;
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(CliError::parse_line(
                    path,
                    lineno + 1,
                    format!("row has {count} values, expected {w}"),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| CliError::parse_line(path, 1, "empty feature file"))?;
    Array2::from_shape_vec((rows, width), values)
        .map_err(|e| CliError::parse_line(path, 1, e.to_string()))
}

pub fn read_features(path: &Path, format: Option<FeatureFormat>) -> Result<Array2<f64>> {
    match feature_format(path, format) {
        FeatureFormat::Binary => read_features_binary(path),
        FeatureFormat::Csv => read_features_csv(path),
    }
}

pub fn write_labels(path: &Path, labels: &[ClassId]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<ClassId>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse().map_err(|_| {
            CliError::parse_line(path, lineno + 1, format!("not a class id: {line:?}"))
        })?);
    }
    Ok(labels)
}

pub fn write_partition(path: &Path, partition: &ClassPartition) -> Result<()> {
    let text =
        serde_json::to_string_pretty(partition).map_err(|e| CliError::Numeric(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_partition(path: &Path) -> Result<ClassPartition> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse_line(path, e.line().max(1), e.to_string()))
}

/// Semantic CSV rows: `class_id,v1,...,vE`.
pub fn write_semantics_csv(path: &Path, table: &SemanticTable) -> Result<()> {
    let mut out = String::new();
    for (id, row) in table
        .class_ids()
        .iter()
        .zip(table.embeddings().outer_iter())
    {
        out.push_str(&id.to_string());
        for v in row.iter() {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_semantics_csv(path: &Path, kind: SemanticKind) -> Result<SemanticTable> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id_field = fields.next().unwrap_or_default().trim();
        let id: ClassId = id_field.parse().map_err(|_| {
            CliError::parse_line(path, lineno + 1, format!("not a class id: {id_field:?}"))
        })?;
        let mut count = 0usize;
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse_line(path, lineno + 1, format!("not a number: {field:?}"))
            })?;
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(CliError::parse_line(
                    path,
                    lineno + 1,
                    format!("row has {count} values, expected {w}"),
                ));
            }
            _ => {}
        }
        ids.push(id);
    }
    let width = width.ok_or_else(|| CliError::parse_line(path, 1, "empty semantics file"))?;
    if width == 0 {
        return Err(CliError::parse_line(path, 1, "semantic rows need values"));
    }
    let n = ids.len();
    let embeddings = Array2::from_shape_vec((n, width), values)
        .map_err(|e| CliError::parse_line(path, 1, e.to_string()))?;
    Ok(SemanticTable::new(ids, embeddings, kind)?)
}

/// Top-1 predictions: `sample_index,predicted_class_id`.
pub fn write_predictions_csv(path: &Path, predictions: &[ClassId]) -> Result<()> {
    let mut out = String::from("sample_index,predicted_class_id\n");
    for (i, c) in predictions.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Ranked predictions: `sample_index,predicted_class_id,rank`, rank 1 first.
pub fn write_topk_csv(path: &Path, topk: &[Vec<ClassId>]) -> Result<()> {
    let mut out = String::from("sample_index,predicted_class_id,rank\n");
    for (i, row) in topk.iter().enumerate() {
        for (rank, c) in row.iter().enumerate() {
            out.push_str(&format!("{i},{c},{}\n", rank + 1));
        }
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Novelty scores: `sample_index,score`.
pub fn write_novelty_csv(path: &Path, scores: &[f64]) -> Result<()> {
    let mut out = String::from("sample_index,score\n");
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub const CURVE_HEADER: &str = "gamma,acc_seen_T,acc_unseen_T";

pub fn write_curve_csv(path: &Path, curve: &SucCurve) -> Result<()> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.gamma, p.acc_seen_joint, p.acc_unseen_joint
        ));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<SucPoint>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CURVE_HEADER => {}
        _ => return Err(CliError::parse_line(path, 1, "missing curve header")),
    }
    let mut points = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::parse_line(path, lineno + 1, "expected 3 columns"));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| CliError::parse_line(path, lineno + 1, format!("not a number: {s:?}")))
        };
        points.push(SucPoint {
            gamma: parse(fields[0])?,
            acc_seen_joint: parse(fields[1])?,
            acc_unseen_joint: parse(fields[2])?,
        });
    }
    Ok(points)
}

/// Serializes JSON with object keys in sorted order and every float printed
/// with 17 significant digits, so identical values produce identical bytes.
pub fn canonical_json(value: &serde_json::Value) -> Result<String> {
    let mut out = String::new();
    write_value(value, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn write_value(value: &serde_json::Value, indent: usize, out: &mut String) -> Result<()> {
    use serde_json::Value;
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if !f.is_finite() {
                    return Err(CliError::Numeric("non-finite value in summary".into()));
                }
                out.push_str(&format!("{f:.16e}"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(item, indent + 1, out)?;
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            // serde_json's default map is a BTreeMap: keys already sorted.
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("key serialization"));
                out.push_str(": ");
                write_value(item, indent + 1, out)?;
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
    Ok(())
}

pub fn write_canonical_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = canonical_json(value)?;
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

/// Serializes a model or report with serde's shortest round-trip floats.
pub fn write_json_document<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json_document<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse_line(path, e.line().max(1), e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let features = array![[1.0, -0.25, 1e-300], [f64::MIN_POSITIVE, 3.5, -0.0]];
        write_features_binary(&path, features.view()).unwrap();
        let back = read_features_binary(&path).unwrap();
        for (a, b) in features.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_round_trip_is_exact_with_shortest_floats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let features = array![[0.1, 2.0 / 3.0], [-1e-9, 12345.678]];
        write_features_csv(&path, features.view()).unwrap();
        let back = read_features_csv(&path).unwrap();
        for (a, b) in features.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_feature_row_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        match read_features_csv(&path) {
            Err(CliError::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        std::fs::write(
            &path,
            b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00",
        )
        .unwrap();
        assert!(matches!(
            read_features_binary(&path),
            Err(CliError::Parse { .. })
        ));
    }

    #[test]
    fn overlapping_partition_fails_to_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, r#"{"seen": [0, 1], "unseen": [1]}"#).unwrap();
        assert!(read_partition(&path).is_err());
    }

    #[test]
    fn semantics_and_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sem_path = dir.path().join("s.csv");
        let table = SemanticTable::new(
            vec![3, 7, 1],
            ndarray::array![[0.6, 0.8], [1.0, 0.0], [-0.1234567891234, 0.5]],
            SemanticKind::GAttr,
        )
        .unwrap();
        write_semantics_csv(&sem_path, &table).unwrap();
        let back = read_semantics_csv(&sem_path, SemanticKind::GAttr).unwrap();
        assert_eq!(back.class_ids(), table.class_ids());
        for (a, b) in table.embeddings().iter().zip(back.embeddings().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let label_path = dir.path().join("l.txt");
        let labels = vec![0u32, 5, 2, 2, 9];
        write_labels(&label_path, &labels).unwrap();
        assert_eq!(read_labels(&label_path).unwrap(), labels);
    }

    #[test]
    fn curve_round_trips_including_infinities() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let curve = SucCurve {
            points: vec![
                SucPoint {
                    gamma: f64::NEG_INFINITY,
                    acc_seen_joint: 0.75,
                    acc_unseen_joint: 0.0,
                },
                SucPoint {
                    gamma: 0.5,
                    acc_seen_joint: 0.25,
                    acc_unseen_joint: 0.5,
                },
                SucPoint {
                    gamma: f64::INFINITY,
                    acc_seen_joint: 0.0,
                    acc_unseen_joint: 0.5,
                },
            ],
            ausuc: 0.0,
            direct_stacking: SucPoint {
                gamma: 0.0,
                acc_seen_joint: 0.0,
                acc_unseen_joint: 0.0,
            },
            breakpoints: 1,
        };
        write_curve_csv(&path, &curve).unwrap();
        let points = read_curve_csv(&path).unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(points[0].gamma, f64::NEG_INFINITY);
        assert_eq!(points[2].gamma, f64::INFINITY);
        assert_eq!(points[1].acc_unseen_joint, 0.5);
    }

    #[test]
    fn canonical_json_sorts_keys_and_fixes_float_digits() {
        let value = serde_json::json!({
            "zeta": 0.5,
            "alpha": {"b": 1, "a": 2.0},
        });
        let text = canonical_json(&value).unwrap();
        let alpha = text.find("\"alpha\"").unwrap();
        let zeta = text.find("\"zeta\"").unwrap();
        assert!(alpha < zeta);
        assert!(text.contains("5.0000000000000000e-1"));
        assert!(text.contains("\"b\": 1"));
    }
}
