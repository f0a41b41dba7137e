//! File formats. Every artifact is JSON carrying `"schema": 1`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{GeneratorSpec, PRNG_ID};
use crate::embedding::{Direction, Embedding, EmbeddingMetadata, SelectionRecord};
use crate::metric_space::{validate_space, FiniteMetricSpace, MetricError, ValidateOptions};
use crate::params::EmbeddingParams;
use crate::verify::DistortionReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: unsupported schema {found}, expected {SCHEMA_VERSION}")]
    Schema { path: PathBuf, found: u32 },
    #[error("{path}: {source}")]
    Metric { path: PathBuf, source: MetricError },
}

/// Distances either as nested rows or flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distances {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub schema: u32,
    pub labels: Vec<String>,
    pub distances: Distances,
    /// Present on generated spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
}

impl SpaceFile {
    pub fn from_space(space: &FiniteMetricSpace<f64>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            labels: space.labels().to_vec(),
            distances: Distances::Rows(space.to_rows()),
            generator: None,
            prng: None,
        }
    }

    pub fn generated(space: &FiniteMetricSpace<f64>, spec: &GeneratorSpec) -> Self {
        Self {
            generator: Some(spec.clone()),
            prng: Some(PRNG_ID.to_string()),
            ..Self::from_space(space)
        }
    }

    fn rows(self, path: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>), IoError> {
        let rows = match self.distances {
            Distances::Rows(r) => r,
            Distances::Flat(flat) => {
                let n = self.labels.len();
                if n == 0 || flat.len() != n * n {
                    return Err(IoError::Metric {
                        path: path.to_path_buf(),
                        source: MetricError::NotSquare {
                            row: 0,
                            len: flat.len(),
                            expected: n * n,
                        },
                    });
                }
                flat.chunks(n).map(<[f64]>::to_vec).collect()
            }
        };
        Ok((rows, self.labels))
    }
}

/// Embedding artifact as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub schema: u32,
    pub params: EmbeddingParams,
    pub metadata: EmbeddingMetadata,
    pub dimension: usize,
    pub coords: Vec<Vec<f64>>,
}

impl EmbeddingFile {
    pub fn from_embedding(e: &Embedding<f64>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            params: e.params.clone(),
            metadata: e.metadata.clone(),
            dimension: e.dimension(),
            coords: e.coords.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub point: usize,
    pub lattice: Vec<i64>,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelVectorRecord {
    pub k: i32,
    pub weight: f64,
    pub entries: Vec<VectorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub color: usize,
    pub direction: Direction,
    pub levels: Vec<LevelVectorRecord>,
    pub selections: Vec<SelectionRecord>,
}

/// Every selected vector, for replay and debugging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDump {
    pub schema: u32,
    pub maps: Vec<MapRecord>,
}

impl VectorDump {
    pub fn from_embedding(e: &Embedding<f64>) -> Self {
        let maps = e
            .maps
            .iter()
            .map(|m| MapRecord {
                color: m.color,
                direction: m.direction,
                levels: m
                    .levels
                    .iter()
                    .map(|l| LevelVectorRecord {
                        k: l.k,
                        weight: l.weight,
                        entries: l
                            .entries
                            .iter()
                            .map(|en| VectorRecord {
                                point: en.point,
                                lattice: en.lattice.clone(),
                                vector: en.vector.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
                selections: m.selections.clone(),
            })
            .collect();
        Self {
            schema: SCHEMA_VERSION,
            maps,
        }
    }
}

/// Deterministic JSON text (pretty, trailing newline).
pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize infallibly");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| IoError::Write {
            path: path.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), IoError> {
    write_text(path, &to_json(value))
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads any schema-1 JSON artifact.
pub fn read_json<S: for<'de> Deserialize<'de>>(path: &Path) -> Result<S, IoError> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let found = value.get("schema").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(IoError::Schema {
            path: path.to_path_buf(),
            found,
        });
    }
    serde_json::from_value(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a space from JSON, or from CSV when the extension is `.csv`.
pub fn read_space(path: &Path, options: ValidateOptions) -> Result<FiniteMetricSpace<f64>, IoError> {
    read_space_with_origin(path, options).map(|(space, _)| space)
}

/// Like [`read_space`], also returning the generator recorded in the file.
pub fn read_space_with_origin(
    path: &Path,
    options: ValidateOptions,
) -> Result<(FiniteMetricSpace<f64>, Option<GeneratorSpec>), IoError> {
    let (rows, labels, generator) = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let (rows, labels) = read_csv_matrix(path)?;
        (rows, labels, None)
    } else {
        let file = read_json::<SpaceFile>(path)?;
        let generator = file.generator.clone();
        let (rows, labels) = file.rows(path)?;
        (rows, labels, generator)
    };
    let space = validate_space(rows, labels, options).map_err(|source| IoError::Metric {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((space, generator))
}

fn read_csv_matrix(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>), IoError> {
    let csv_err = |message: String| IoError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| csv_err(format!("row {}: cannot parse {cell:?}", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((rows, labels))
}

pub fn write_space(path: &Path, space: &FiniteMetricSpace<f64>) -> Result<(), IoError> {
    write_json(path, &SpaceFile::from_space(space))
}

fn csv_text<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(fill: F) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).expect("in-memory CSV writes do not fail");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 input")
}

/// One row per point: label then coordinates.
pub fn coords_csv(labels: &[String], coords: &[Vec<f64>]) -> String {
    csv_text(|w| {
        let width = coords.first().map_or(0, Vec::len);
        let mut header = vec!["label".to_string()];
        header.extend((0..width).map(|c| format!("x{c}")));
        w.write_record(&header)?;
        for (label, row) in labels.iter().zip(coords) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// Tidy per-pair rows for plotting.
pub fn pairs_csv(report: &DistortionReport) -> String {
    csv_text(|w| {
        w.write_record(["i", "j", "distance", "embedded", "ratio", "level", "in_scope"])?;
        for p in &report.pairs {
            w.write_record([
                p.i.to_string(),
                p.j.to_string(),
                p.d.to_string(),
                p.embedded.to_string(),
                p.ratio.to_string(),
                p.level.to_string(),
                p.in_scope.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_json_roundtrip_and_flat_form() {
        let dir = tempfile::tempdir().unwrap();
        let s = FiniteMetricSpace::from_line(&[0.0, 0.25, 1.0]).unwrap();
        let p = dir.path().join("s.json");
        write_space(&p, &s).unwrap();
        assert_eq!(read_space(&p, ValidateOptions::default()).unwrap(), s);

        let flat = dir.path().join("flat.json");
        fs::write(&flat, r#"{"schema":1,"labels":["a","b"],"distances":[0,1,1,0]}"#).unwrap();
        let t = read_space(&flat, ValidateOptions::default()).unwrap();
        assert_eq!(t.distance(0, 1), 1.0);
    }

    #[test]
    fn csv_space_and_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "a,b\n0,2\n2,0\n").unwrap();
        let s = read_space(&p, ValidateOptions::default()).unwrap();
        assert_eq!(s.labels(), ["a", "b"]);

        fs::write(&p, "a,b\n0,x\n2,0\n").unwrap();
        assert!(matches!(read_space(&p, ValidateOptions::default()), Err(IoError::Csv { .. })));

        let missing = dir.path().join("missing.json");
        let err = read_space(&missing, ValidateOptions::default()).unwrap_err();
        assert!(err.to_string().contains("missing.json"));

        let wrong = dir.path().join("v2.json");
        fs::write(&wrong, r#"{"schema":2,"labels":["a"],"distances":[[0]]}"#).unwrap();
        assert!(matches!(
            read_space(&wrong, ValidateOptions::default()),
            Err(IoError::Schema { found: 2, .. })
        ));
    }
}
