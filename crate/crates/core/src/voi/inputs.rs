use std::collections::HashSet;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a column counts as
/// linearly dependent on the columns kept before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    Constant,
    /// `relation` lists `(kept column, coefficient)` pairs reproducing the
    /// dropped column; it is only filled in when relations were requested.
    LinearCombination { relation: Vec<(String, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    /// 1-based position in the raw matrix.
    pub column: usize,
    #[serde(flatten)]
    pub reason: DropReason,
}

/// Parameter draws cleaned for EVPPI regression: no constant columns and
/// full column rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInputs {
    mat: Array2<f64>,
    names: Vec<String>,
    dropped: Vec<DroppedColumn>,
}

impl ParameterInputs {
    pub fn mat(&self) -> &Array2<f64> {
        &self.mat
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dropped(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    pub fn n_sim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        Ok(self.mat.column(self.column_index(name)?))
    }
}

fn is_constant(col: ArrayView1<'_, f64>) -> bool {
    col.iter().all(|&v| v == col[0])
}

fn unit_column(col: ArrayView1<'_, f64>) -> Vec<f64> {
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    col.iter().map(|v| v / norm).collect()
}

fn full_rank(columns: &[Vec<f64>], n_rows: usize) -> bool {
    let m = DMatrix::from_fn(n_rows, columns.len(), |r, c| columns[c][r]);
    let sv = m.singular_values();
    let largest = sv.max();
    sv.iter().all(|&s| s > RANK_TOLERANCE * largest)
}

/// Least-squares coefficients of `target` on `basis` columns.
fn relation(basis: &[ArrayView1<'_, f64>], target: ArrayView1<'_, f64>) -> Vec<f64> {
    let n = target.len();
    let a = DMatrix::from_fn(n, basis.len(), |r, c| basis[c][r]);
    let b = DMatrix::from_fn(n, 1, |r, _| target[r]);
    let svd = a.svd(true, true);
    let eps = RANK_TOLERANCE * svd.singular_values.max();
    svd.solve(&b, eps)
        .map(|x| x.iter().copied().collect())
        .unwrap_or_default()
}

/// Removes constant columns, then every column lying in the span of the
/// columns kept before it (so later columns are the ones dropped).
pub fn create_inputs(
    raw: &Array2<f64>,
    names: &[String],
    report_linear_combinations: bool,
) -> Result<ParameterInputs> {
    let (n_rows, n_cols) = raw.dim();
    if n_rows < 2 {
        return Err(Error::TooFewSimulations(n_rows));
    }
    if names.len() != n_cols {
        return Err(Error::InvalidLabels(format!(
            "{} parameter names for {} columns",
            names.len(),
            n_cols
        )));
    }
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() || !seen.insert(name.as_str()) {
            return Err(Error::InvalidLabels(format!(
                "parameter names must be unique and non-empty ({name:?})"
            )));
        }
    }
    if let Some(((row, column), _)) = raw.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            matrix: "parameters".into(),
            row: row + 1,
            column: column + 1,
        });
    }

    let mut kept: Vec<usize> = Vec::new();
    let mut kept_unit: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (j, col) in raw.axis_iter(Axis(1)).enumerate() {
        if is_constant(col) {
            dropped.push(DroppedColumn {
                name: names[j].clone(),
                column: j + 1,
                reason: DropReason::Constant,
            });
            continue;
        }
        kept_unit.push(unit_column(col));
        if full_rank(&kept_unit, n_rows) {
            kept.push(j);
            continue;
        }
        kept_unit.pop();
        let relation = if report_linear_combinations {
            let basis: Vec<_> = kept.iter().map(|&k| raw.column(k)).collect();
            let coef = relation(&basis, col);
            let relation: Vec<(String, f64)> = kept
                .iter()
                .zip(coef)
                .filter(|(_, c)| c.abs() > 1e-12)
                .map(|(&k, c)| (names[k].clone(), c))
                .collect();
            log::info!(
                "{} = {}",
                names[j],
                relation
                    .iter()
                    .map(|(n, c)| format!("{c}*{n}"))
                    .collect::<Vec<_>>()
                    .join(" + ")
            );
            relation
        } else {
            Vec::new()
        };
        dropped.push(DroppedColumn {
            name: names[j].clone(),
            column: j + 1,
            reason: DropReason::LinearCombination { relation },
        });
    }

    if kept.is_empty() {
        return Err(Error::NoInformativeParameters);
    }
    Ok(ParameterInputs {
        mat: raw.select(Axis(1), &kept),
        names: kept.iter().map(|&k| names[k].clone()).collect(),
        dropped,
    })
}
