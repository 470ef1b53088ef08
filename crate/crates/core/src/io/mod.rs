//! File formats: events and latent-path CSV, matrix CSV, JSON model and
//! report documents, and TOML run configurations.

mod config;
mod events;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{FitResult, NetworkFitResult};
use crate::models::ModelSpec;
use crate::netdiag::{Matrix, PairMatrix};

pub use config::{read_toml, NetworkSimConfig, SimulateConfig};
pub use events::{
    read_events, read_path, write_lines, write_network, write_pair_paths, write_path,
    write_sequence, write_table, EventTable, ReadOptions,
};

/// Version of every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Name of the provenance document written next to simulated events.
pub const PROVENANCE_FILE: &str = "provenance.json";

/// Token for a cell without a value in matrix CSVs.
pub const NA: &str = "NA";

pub const TOOL_VERSION: &str = concat!("ppdiag ", env!("CARGO_PKG_VERSION"));

/// Formats with 17 significant digits so that parsing recovers the value.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| {
        if e.is_io() {
            Error::io(path, std::io::Error::other(e))
        } else {
            Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            }
        }
    })
}

fn check_schema(path: &Path, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::validation(format!(
            "{}: schema version {version} is not supported (expected {SCHEMA_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

/// SHA-256 of the canonical JSON serialization of `config`: fields in
/// declaration order, defaults expanded, no whitespace.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_vec(config).expect("configs serialize to JSON");
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a set of simulated events came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub schema_version: u32,
    pub tool: String,
    pub seed: u64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_count: Option<usize>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, horizon: f64, node_count: Option<usize>, config_hash: String) -> Self {
        Provenance {
            schema_version: SCHEMA_VERSION,
            tool: TOOL_VERSION.into(),
            seed,
            horizon,
            node_count,
            config_hash,
        }
    }
}

/// A fitted (or known) model for one event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub horizon: f64,
    pub model: ModelSpec,
    /// Optimizer details; absent for ground-truth models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
}

impl ModelFile {
    pub fn from_fit(fit: FitResult, horizon: f64) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            horizon,
            model: fit.model,
            fit: Some(fit),
        }
    }

    pub fn truth(model: ModelSpec, horizon: f64) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            horizon,
            model,
            fit: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path)?;
        check_schema(path, file.schema_version)?;
        file.model.validate().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(file)
    }

    pub fn latent_path(&self) -> Option<&crate::models::LatentPath> {
        self.fit.as_ref().and_then(|f| f.latent_path.as_ref())
    }
}

/// A network model, fitted or known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFitFile {
    pub schema_version: u32,
    pub horizon: f64,
    /// `"homogeneous"`, `"block"`, `"heterogeneous"` or `"true"`.
    pub label: String,
    pub fit: NetworkFitResult,
}

impl NetworkFitFile {
    pub fn new(label: impl Into<String>, fit: NetworkFitResult, horizon: f64) -> Self {
        NetworkFitFile {
            schema_version: SCHEMA_VERSION,
            horizon,
            label: label.into(),
            fit,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: NetworkFitFile = read_json(path)?;
        check_schema(path, file.schema_version)?;
        Ok(file)
    }
}

/// Matrix CSV with a `node` label column; masked cells are written as `NA`.
pub fn write_pair_matrix(path: &Path, m: &PairMatrix, labels: &[usize]) -> Result<()> {
    let n = m.node_count();
    let rows = (0..n).map(|i| {
        let mut row = labels[i].to_string();
        for j in 0..n {
            row.push(',');
            match m.cell(i, j) {
                Some(v) => row.push_str(&fmt_f64(v)),
                None => row.push_str(NA),
            }
        }
        row
    });
    write_lines(path, &matrix_header(labels), rows)
}

pub fn write_matrix(path: &Path, m: &Matrix, labels: &[usize]) -> Result<()> {
    let rows = (0..m.rows).map(|i| {
        let mut row = labels[i].to_string();
        for j in 0..m.cols {
            row.push(',');
            row.push_str(&fmt_f64(m.get(i, j)));
        }
        row
    });
    write_lines(path, &matrix_header(labels), rows)
}

fn matrix_header(labels: &[usize]) -> String {
    let mut h = String::from("node");
    for l in labels {
        h.push(',');
        h.push_str(&l.to_string());
    }
    h
}

/// Reads a matrix CSV written by [`write_pair_matrix`], returning the row
/// labels and the matrix.
pub fn read_pair_matrix(path: &Path) -> Result<(Vec<usize>, PairMatrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut labels = Vec::new();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        labels.push(record[0].parse().map_err(|_| bad(format!("bad label {:?}", &record[0])))?);
        for raw in record.iter().skip(1) {
            cells.push(if raw == NA {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| bad(format!("bad cell {raw:?}")))?)
            });
        }
    }
    let n = labels.len();
    if cells.len() != n * n {
        return Err(Error::validation(format!("{}: matrix is not square", path.display())));
    }
    let mut m = PairMatrix::masked(n);
    for i in 0..n {
        for j in 0..n {
            if let Some(v) = cells[i * n + j] {
                m.set_cell(i, j, v);
            }
        }
    }
    Ok((labels, m))
}

/// Node ordering file: node ids separated by commas, whitespace or newlines.
pub fn read_order(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut order = Vec::new();
    for (k, line) in text.lines().enumerate() {
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            order.push(tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                message: format!("bad node id {tok:?}"),
            })?);
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::PairIndex;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, f64::MAX, 0.0, -2.5] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        #[derive(Serialize)]
        struct C {
            a: u32,
            b: f64,
        }
        let h = config_hash(&C { a: 1, b: 2.0 });
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&C { a: 1, b: 2.0 }));
        assert_ne!(h, config_hash(&C { a: 1, b: 2.5 }));
    }

    #[test]
    fn pair_matrix_round_trip_with_na() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut m = PairMatrix::masked(3);
        m.set(PairIndex::new(1, 2).unwrap(), 0.25);
        m.set(PairIndex::new(3, 1).unwrap(), -1.0 / 3.0);
        write_pair_matrix(&p, &m, &[1, 2, 3]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("node,1,2,3\n1,NA,"));
        let (labels, back) = read_pair_matrix(&p).unwrap();
        assert_eq!(labels, vec![1, 2, 3]);
        assert_eq!(back, m);
    }

    #[test]
    fn model_file_rejects_unknown_schema_and_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let spec = ModelSpec::Poisson(crate::models::PoissonParams::new(2.0).unwrap());
        write_json(&p, &ModelFile::truth(spec, 10.0)).unwrap();
        assert_eq!(ModelFile::read(&p).unwrap().model, spec);
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replace("\"schema_version\": 1", "\"schema_version\": 9")).unwrap();
        assert!(matches!(ModelFile::read(&p), Err(Error::Validation(_))));
        std::fs::write(&p, text.replace("\"horizon\"", "\"extra\": 1, \"horizon\"")).unwrap();
        assert!(matches!(ModelFile::read(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn order_file_parses_mixed_separators() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("order.txt");
        std::fs::write(&p, "3, 1\n2\n").unwrap();
        assert_eq!(read_order(&p).unwrap(), vec![3, 1, 2]);
    }
}
