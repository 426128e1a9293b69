//! PSA samples and the willingness-to-pay grid they are analysed over.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired effect and cost samples, one row per simulation and one column per
/// intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct PsaDataset {
    effects: Array2<f64>,
    costs: Array2<f64>,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawDataset {
    effects: Array2<f64>,
    costs: Array2<f64>,
    labels: Vec<String>,
}

impl TryFrom<RawDataset> for PsaDataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        PsaDataset::new(raw.effects, raw.costs, raw.labels)
    }
}

impl PsaDataset {
    pub fn new(effects: Array2<f64>, costs: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        if effects.dim() != costs.dim() {
            return Err(Error::ShapeMismatch {
                effects_rows: effects.nrows(),
                effects_cols: effects.ncols(),
                costs_rows: costs.nrows(),
                costs_cols: costs.ncols(),
            });
        }
        let (n_sim, n_int) = effects.dim();
        if n_int < 2 {
            return Err(Error::TooFewInterventions(n_int));
        }
        if n_sim < 2 {
            return Err(Error::TooFewSimulations(n_sim));
        }
        for (name, matrix) in [("effects", &effects), ("costs", &costs)] {
            if let Some(((row, column), _)) = matrix.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite {
                    matrix: name.to_string(),
                    row: row + 1,
                    column: column + 1,
                });
            }
        }
        if labels.len() != n_int {
            return Err(Error::InvalidLabels(format!(
                "{} labels for {} interventions",
                labels.len(),
                n_int
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.trim().is_empty() {
                return Err(Error::InvalidLabels("empty label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidLabels(format!("duplicate label {label:?}")));
            }
        }
        Ok(PsaDataset {
            effects: standard(effects),
            costs: standard(costs),
            labels,
        })
    }

    /// Builds a dataset with default labels `t1`, `t2`, ...
    pub fn unlabelled(effects: Array2<f64>, costs: Array2<f64>) -> Result<Self> {
        let labels = (1..=effects.ncols()).map(|i| format!("t{i}")).collect();
        Self::new(effects, costs, labels)
    }

    /// `(effects, costs)` of each simulation, in simulation order.
    #[inline]
    pub(crate) fn rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        let m = self.n_int();
        let e = self.effects.as_slice().expect("standard layout");
        let c = self.costs.as_slice().expect("standard layout");
        e.chunks_exact(m).zip(c.chunks_exact(m))
    }

    pub fn n_sim(&self) -> usize {
        self.effects.nrows()
    }

    pub fn n_int(&self) -> usize {
        self.effects.ncols()
    }

    pub fn effects(&self) -> &Array2<f64> {
        &self.effects
    }

    pub fn costs(&self) -> &Array2<f64> {
        &self.costs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, arm: usize) -> &str {
        &self.labels[arm]
    }

    /// Per-arm sample means of effects.
    pub fn mean_effects(&self) -> Vec<f64> {
        self.effects.columns().into_iter().map(mean_of).collect()
    }

    /// Per-arm sample means of costs.
    pub fn mean_costs(&self) -> Vec<f64> {
        self.costs.columns().into_iter().map(mean_of).collect()
    }

    pub(crate) fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.n_int() {
            Ok(())
        } else {
            Err(Error::InterventionOutOfRange {
                index: arm + 1,
                n_int: self.n_int(),
            })
        }
    }
}

/// Row-major copy, so rows can be read as contiguous slices.
fn standard(m: Array2<f64>) -> Array2<f64> {
    if m.is_standard_layout() {
        m
    } else {
        m.as_standard_layout().into_owned()
    }
}

/// Sequential left-to-right mean. Every average in the crate goes through
/// this so that results do not depend on evaluation strategy.
pub(crate) fn mean_of(xs: ArrayView1<'_, f64>) -> f64 {
    let mut sum = 0.0;
    for &x in xs {
        sum += x;
    }
    sum / xs.len() as f64
}

pub const DEFAULT_KMAX: f64 = 50_000.0;
pub const DEFAULT_GRID_POINTS: usize = 501;

/// Strictly increasing willingness-to-pay values running from 0 to `kmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WtpGrid {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for WtpGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        WtpGrid::from_values(values)
    }
}

impl From<WtpGrid> for Vec<f64> {
    fn from(grid: WtpGrid) -> Self {
        grid.values
    }
}

impl WtpGrid {
    /// `points` equally spaced values on `[0, kmax]`.
    pub fn equally_spaced(kmax: f64, points: usize) -> Result<Self> {
        if !(kmax.is_finite() && kmax > 0.0) {
            return Err(Error::InvalidGrid(format!("kmax must be positive, got {kmax}")));
        }
        if points < 2 {
            return Err(Error::InvalidGrid(format!(
                "at least 2 grid points are needed, got {points}"
            )));
        }
        let last = (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| kmax * i as f64 / last).collect();
        values[points - 1] = kmax;
        Self::from_values(values)
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid("at least 2 grid points are needed".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must start at 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("grid values must be finite".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        Ok(WtpGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kmax(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of the grid value nearest to `k` (lower index on exact ties).
    pub fn nearest_index(&self, k: f64) -> Result<usize> {
        if !(k >= 0.0 && k <= self.kmax()) {
            return Err(Error::WtpOutOfRange {
                k,
                kmax: self.kmax(),
            });
        }
        let upper = self.values.partition_point(|&v| v < k);
        if upper == 0 {
            return Ok(0);
        }
        if upper == self.values.len() {
            return Ok(upper - 1);
        }
        let below = k - self.values[upper - 1];
        let above = self.values[upper] - k;
        Ok(if above < below { upper } else { upper - 1 })
    }
}
