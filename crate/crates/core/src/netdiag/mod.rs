//! Network diagnostics: per-pair K-S and Pearson residual matrices, the
//! split into under- and overestimation parts, and NMF structure scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ks_statistic, rescaled_times, residual_trajectory};
use crate::error::{Error, Result};
use crate::events::{EventSequence, NetworkEventLog, PairIndex};
use crate::fit::NetworkFitResult;
use crate::models::{decode_latent_path, LatentPath, ModelSpec};

mod nmf;

pub use nmf::{nmf, structure_score, NmfOptions, NmfResult};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::validation("matrix rows differ in length"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix shapes do not conform");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Sender × receiver matrix of a per-pair statistic. Cells without a value
/// (the diagonal, and pairs where the statistic is undefined) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    node_count: usize,
    values: Vec<Option<f64>>,
}

impl PairMatrix {
    pub fn masked(node_count: usize) -> Self {
        PairMatrix {
            node_count,
            values: vec![None; node_count * node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn get(&self, pair: PairIndex) -> Option<f64> {
        self.values[self.slot(pair)]
    }

    /// Cell by zero-based row and column.
    pub fn cell(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.node_count + col]
    }

    pub fn set(&mut self, pair: PairIndex, value: f64) {
        let slot = self.slot(pair);
        self.values[slot] = Some(value);
    }

    /// Sets the cell at zero-based display position `(row, col)`.
    pub fn set_cell(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.node_count + col] = Some(value);
    }

    fn slot(&self, pair: PairIndex) -> usize {
        (pair.sender() - 1) * self.node_count + pair.receiver() - 1
    }

    /// `(pair, value)` over the cells that hold a value, sender-major.
    pub fn entries(&self) -> impl Iterator<Item = (PairIndex, f64)> + '_ {
        PairIndex::all(self.node_count).filter_map(|p| self.get(p).map(|v| (p, v)))
    }

    /// Mean of the defined cells whose pair satisfies `keep`.
    pub fn mean_where<F: Fn(PairIndex) -> bool>(&self, keep: F) -> Option<f64> {
        let (sum, n) = self
            .entries()
            .filter(|(p, _)| keep(*p))
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean_where(|_| true)
    }

    /// Rows and columns rearranged so that display position `i` shows node
    /// `order[i]`. `order` must be a permutation of `1..=N`.
    pub fn reordered(&self, order: &[usize]) -> Result<PairMatrix> {
        check_permutation(order, self.node_count)?;
        let n = self.node_count;
        let mut out = PairMatrix::masked(n);
        for (i, &a) in order.iter().enumerate() {
            for (j, &b) in order.iter().enumerate() {
                out.values[i * n + j] = self.values[(a - 1) * n + b - 1];
            }
        }
        Ok(out)
    }
}

pub fn check_permutation(order: &[usize], node_count: usize) -> Result<()> {
    let mut seen = vec![false; node_count];
    if order.len() != node_count {
        return Err(Error::validation(format!(
            "node ordering has {} entries, expected {node_count}",
            order.len()
        )));
    }
    for &v in order {
        if v == 0 || v > node_count || seen[v - 1] {
            return Err(Error::validation(format!(
                "node ordering is not a permutation of 1..={node_count} (bad entry {v})"
            )));
        }
        seen[v - 1] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellWarning {
    pub pair: PairIndex,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub matrix: PairMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<CellWarning>,
}

/// Latent path per pair used to plug `Z(t)` into a modulated model's
/// intensity.
pub type PairPaths = Vec<(PairIndex, Option<LatentPath>)>;

/// Viterbi path of every pair under its fitted model (`None` for models
/// without a latent chain).
pub fn decode_paths(fit: &NetworkFitResult, log: &NetworkEventLog) -> Result<PairPaths> {
    let data = pair_data(fit, log)?;
    data.par_iter()
        .map(|(pair, model, seq)| {
            let path = if model.is_modulated() {
                Some(decode_latent_path(model, seq)?)
            } else {
                None
            };
            Ok((*pair, path))
        })
        .collect()
}

fn pair_data<'a>(
    fit: &'a NetworkFitResult,
    log: &NetworkEventLog,
) -> Result<Vec<(PairIndex, &'a ModelSpec, EventSequence)>> {
    if fit.node_count != log.node_count() {
        return Err(Error::validation(format!(
            "fit covers {} nodes, the log has {}",
            fit.node_count,
            log.node_count()
        )));
    }
    log.project_all()
        .into_iter()
        .map(|(pair, seq)| {
            let model = fit.model_for(pair).ok_or_else(|| {
                Error::validation(format!("fit has no model for pair {pair}"))
            })?;
            Ok((pair, model, seq))
        })
        .collect()
}

fn path_for(paths: Option<&PairPaths>, pair: PairIndex) -> Option<&LatentPath> {
    paths.and_then(|ps| {
        ps.binary_search_by(|(p, _)| p.cmp(&pair))
            .ok()
            .and_then(|i| ps[i].1.as_ref())
    })
}

fn per_pair<F>(
    fit: &NetworkFitResult,
    log: &NetworkEventLog,
    paths: Option<&PairPaths>,
    cell: F,
) -> Result<MatrixReport>
where
    F: Fn(&ModelSpec, &EventSequence, Option<&LatentPath>) -> Result<Option<f64>> + Sync,
{
    let data = pair_data(fit, log)?;
    let decoded;
    let paths = match paths {
        Some(p) => Some(p),
        None if data.iter().any(|(_, m, _)| m.is_modulated()) => {
            decoded = decode_paths(fit, log)?;
            Some(&decoded)
        }
        None => None,
    };
    let cells: Vec<(PairIndex, Result<Option<f64>>)> = data
        .par_iter()
        .map(|(pair, model, seq)| (*pair, cell(model, seq, path_for(paths, *pair))))
        .collect();
    let mut matrix = PairMatrix::masked(log.node_count());
    let mut warnings = Vec::new();
    for (pair, value) in cells {
        match value {
            Ok(Some(v)) if v.is_finite() => matrix.set(pair, v),
            Ok(Some(v)) => warnings.push(CellWarning {
                pair,
                message: format!("non-finite value {v}"),
            }),
            Ok(None) => {}
            Err(e) => warnings.push(CellWarning {
                pair,
                message: e.to_string(),
            }),
        }
    }
    Ok(MatrixReport { matrix, warnings })
}

/// K-S statistic of each pair's rescaled inter-event times under its
/// fitted model. Pairs without events are masked; pairs whose computation
/// fails are masked and reported as warnings. `paths` supplies the latent
/// paths to plug in (for instance the simulated truth); by default each
/// modulated model's Viterbi path is used.
pub fn ks_matrix(
    fit: &NetworkFitResult,
    log: &NetworkEventLog,
    paths: Option<&PairPaths>,
) -> Result<MatrixReport> {
    per_pair(fit, log, paths, |model, seq, path| {
        if seq.is_empty() {
            return Ok(None);
        }
        Ok(Some(ks_statistic(&rescaled_times(model, seq, path)?)?))
    })
}

/// Pearson residual `PR(t)` of each pair. Pairs without events get
/// `−∫₀ᵗ √λ̂`.
pub fn pearson_matrix(
    fit: &NetworkFitResult,
    log: &NetworkEventLog,
    t: f64,
    paths: Option<&PairPaths>,
) -> Result<MatrixReport> {
    if !(t > 0.0 && t <= log.horizon()) {
        return Err(Error::Range {
            t,
            horizon: log.horizon(),
        });
    }
    per_pair(fit, log, paths, |model, seq, path| {
        Ok(Some(residual_trajectory(model, seq, path, &[t])?[0].pearson))
    })
}

/// `(PR⁺, PR⁻)` with `PR⁺ = max(PR, 0)` and `PR⁻ = max(−PR, 0)`; cells
/// without a value become 0 in both.
pub fn split_residuals(m: &PairMatrix) -> (Matrix, Matrix) {
    let n = m.node_count();
    let mut pos = Matrix::zeros(n, n);
    let mut neg = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if let Some(v) = m.cell(i, j) {
                if v > 0.0 {
                    pos.set(i, j, v);
                } else if v < 0.0 {
                    neg.set(i, j, -v);
                }
            }
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureScores {
    /// Score of the underestimation matrix PR⁺.
    pub positive: f64,
    /// Score of the overestimation matrix PR⁻.
    pub negative: f64,
}

/// Structure scores of both parts of a Pearson residual matrix.
pub fn residual_structure_scores(
    pearson: &PairMatrix,
    k: usize,
    opts: &NmfOptions,
) -> Result<StructureScores> {
    let (pos, neg) = split_residuals(pearson);
    Ok(StructureScores {
        positive: structure_score(&pos, k, opts)?,
        negative: structure_score(&neg, k, opts)?,
    })
}
