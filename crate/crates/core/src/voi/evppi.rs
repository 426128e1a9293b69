//! Expected value of partial perfect information.
//!
//! Every estimator is a linear smoother `y ↦ ŷ` applied to the effect and
//! cost columns of each arm. Because net benefit is linear in `k`, the fitted
//! utility at any `k` is `k·ê − ĉ`, so the smoother runs once per call no
//! matter how many grid points are evaluated. The estimate at `k` is
//! `mean_s max_t Û[s][t] − max_t mean_s U[s][t]`, clamped to `[0, EVPI(k)]`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::voi::inputs::{ParameterInputs, RANK_TOLERANCE};

/// Fewer simulations than this produce a reliability warning.
pub const MIN_RELIABLE_SIMS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvppiMethod {
    /// Least-squares cubic regression spline per parameter (knots at the
    /// quartiles) plus pairwise linear interactions.
    Regression,
    /// Conditional means over equal-count bins of a single parameter; tied
    /// parameter values never straddle a bin boundary.
    Binning,
    /// Local mean over the `floor(sqrt(n))` nearest simulations in
    /// standardised parameter space (distance ties broken by index).
    NearestNeighbour,
}

impl EvppiMethod {
    pub fn label(self) -> &'static str {
        match self {
            EvppiMethod::Regression => "regression spline",
            EvppiMethod::Binning => "equal-count binning",
            EvppiMethod::NearestNeighbour => "nearest-neighbour local mean",
        }
    }
}

/// Which grid points to estimate at; the rest are linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSubset {
    /// Every n-th grid point plus the last one.
    Thinned(usize),
    Full,
    /// Explicit grid indices.
    Indices(Vec<usize>),
}

impl Default for KSubset {
    fn default() -> Self {
        KSubset::Thinned(10)
    }
}

impl KSubset {
    fn indices(&self, n_k: usize) -> Result<Vec<usize>> {
        let mut idx: Vec<usize> = match self {
            KSubset::Full => (0..n_k).collect(),
            KSubset::Thinned(0) => {
                return Err(Error::Unavailable("thinning step must be positive".into()))
            }
            KSubset::Thinned(step) => (0..n_k).step_by(*step).chain([n_k - 1]).collect(),
            KSubset::Indices(list) => list.clone(),
        };
        idx.sort_unstable();
        idx.dedup();
        match idx.last() {
            None => Err(Error::Unavailable("no grid points selected".into())),
            Some(&last) if last >= n_k => Err(Error::WtpOutOfRange {
                k: last as f64,
                kmax: (n_k - 1) as f64,
            }),
            _ => Ok(idx),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvppiOptions {
    /// `None` uses [`EvppiMethod::Regression`].
    pub method: Option<EvppiMethod>,
    pub k_subset: KSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub k_index: usize,
    pub k: f64,
    /// Estimate before clamping to `[0, EVPI]`.
    pub raw: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvppiDiagnostics {
    pub points: Vec<EvaluatedPoint>,
    /// Coefficient of determination of the effect fit, per arm (`None` for a
    /// constant column).
    pub r2_effects: Vec<Option<f64>>,
    pub r2_costs: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvppiResult {
    pub params: Vec<String>,
    pub k: Vec<f64>,
    pub evppi: Vec<f64>,
    pub evpi: Vec<f64>,
    pub method: EvppiMethod,
    pub diagnostics: EvppiDiagnostics,
}

/// Standardised copies of the selected parameter columns.
fn standardized(inputs: &ParameterInputs, params: &[String]) -> Result<Vec<Vec<f64>>> {
    params
        .iter()
        .map(|p| {
            let col = inputs.column(p)?;
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            Ok(col.iter().map(|v| (v - mean) / sd).collect())
        })
        .collect()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn spline_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let knots = [0.25, 0.5, 0.75].map(|p| quantile(&sorted, p));
    let mut cols = vec![
        x.to_vec(),
        x.iter().map(|v| v * v).collect(),
        x.iter().map(|v| v * v * v).collect(),
    ];
    for knot in knots {
        cols.push(x.iter().map(|v| (v - knot).max(0.0).powi(3)).collect());
    }
    cols
}

/// Projects every column of `y` onto the span of `basis` (plus intercept).
fn regression_fit(basis: &[Vec<f64>], y: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = y.nrows();
    // Scale columns to unit RMS so the rank cut-off is scale free.
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for c in basis {
        let rms = (c.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms > 0.0 {
            cols.push(c.iter().map(|v| v / rms).collect());
        }
    }
    let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    let b = DMatrix::from_fn(n, y.ncols(), |r, c| y[[r, c]]);
    let svd = x.clone().svd(true, true);
    let eps = RANK_TOLERANCE * svd.singular_values.max();
    let beta = svd.solve(&b, eps).expect("U and V were computed");
    let fitted = x * beta;
    Array2::from_shape_fn((n, y.ncols()), |(r, c)| fitted[(r, c)])
}

fn binning_fit(x: &[f64], y: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.len();
    let target = ((n as f64).sqrt().floor() as usize).clamp(1, 100);
    let per_bin = n.div_ceil(target);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));

    let mut fitted = Array2::zeros(y.dim());
    let mut start = 0;
    while start < n {
        let mut end = (start + per_bin).min(n);
        while end < n && x[order[end]] == x[order[end - 1]] {
            end += 1;
        }
        let members = &order[start..end];
        for c in 0..y.ncols() {
            let mut sum = 0.0;
            for &s in members {
                sum += y[[s, c]];
            }
            let m = sum / members.len() as f64;
            for &s in members {
                fitted[[s, c]] = m;
            }
        }
        start = end;
    }
    fitted
}

fn nearest_neighbour_fit(coords: &[Vec<f64>], y: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = y.nrows();
    let m = ((n as f64).sqrt().floor() as usize).clamp(1, n);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .map(|j| {
                    let d: f64 = coords.iter().map(|c| (c[i] - c[j]).powi(2)).sum();
                    (d, j)
                })
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if m < n {
                dist.select_nth_unstable_by(m - 1, cmp);
            }
            let mut neighbours: Vec<usize> = dist[..m].iter().map(|&(_, j)| j).collect();
            neighbours.sort_unstable();
            (0..y.ncols())
                .map(|c| {
                    let mut sum = 0.0;
                    for &j in &neighbours {
                        sum += y[[j, c]];
                    }
                    sum / m as f64
                })
                .collect()
        })
        .collect();
    Array2::from_shape_fn(y.dim(), |(r, c)| rows[r][c])
}

fn r_squared(y: ArrayView2<'_, f64>, fitted: &Array2<f64>) -> Vec<Option<f64>> {
    y.axis_iter(Axis(1))
        .zip(fitted.axis_iter(Axis(1)))
        .map(|(obs, fit)| {
            let mean = obs.sum() / obs.len() as f64;
            let sst: f64 = obs.iter().map(|v| (v - mean).powi(2)).sum();
            let sse: f64 = obs.iter().zip(fit).map(|(o, f)| (o - f).powi(2)).sum();
            (sst > 0.0).then(|| 1.0 - sse / sst)
        })
        .collect()
}

/// Fitted conditional expectations of effects and costs given the parameters.
pub(crate) struct ConditionalFit {
    effects: Array2<f64>,
    costs: Array2<f64>,
    r2_effects: Vec<Option<f64>>,
    r2_costs: Vec<Option<f64>>,
}

pub(crate) fn fit(
    analysis: &Analysis,
    inputs: &ParameterInputs,
    params: &[String],
    method: EvppiMethod,
) -> Result<ConditionalFit> {
    if params.is_empty() {
        return Err(Error::Unavailable("no parameters selected".into()));
    }
    if inputs.n_sim() != analysis.n_sim() {
        return Err(Error::SimulationCountMismatch {
            params: inputs.n_sim(),
            analysis: analysis.n_sim(),
        });
    }
    let coords = standardized(inputs, params)?;
    let data = analysis.dataset();
    let smooth = |y: ArrayView2<'_, f64>| -> Result<Array2<f64>> {
        Ok(match method {
            EvppiMethod::Regression => {
                let mut basis: Vec<Vec<f64>> = coords.iter().flat_map(|x| spline_basis(x)).collect();
                for i in 0..coords.len() {
                    for j in i + 1..coords.len() {
                        basis.push(coords[i].iter().zip(&coords[j]).map(|(a, b)| a * b).collect());
                    }
                }
                regression_fit(&basis, y)
            }
            EvppiMethod::Binning => match coords.as_slice() {
                [x] => binning_fit(x, y),
                _ => {
                    return Err(Error::Unavailable(
                        "binning supports a single parameter; use regression or nearest-neighbour"
                            .into(),
                    ))
                }
            },
            EvppiMethod::NearestNeighbour => nearest_neighbour_fit(&coords, y),
        })
    };
    let effects = smooth(data.effects().view())?;
    let costs = smooth(data.costs().view())?;
    Ok(ConditionalFit {
        r2_effects: r_squared(data.effects().view(), &effects),
        r2_costs: r_squared(data.costs().view(), &costs),
        effects,
        costs,
    })
}

impl ConditionalFit {
    /// Raw (unclamped) EVPPI at grid index `k_index`.
    pub(crate) fn raw_at(&self, analysis: &Analysis, k_index: usize) -> f64 {
        let k = analysis.grid().get(k_index);
        let mut sum = 0.0;
        for (fe, fc) in self.effects.rows().into_iter().zip(self.costs.rows()) {
            let top = fe
                .iter()
                .zip(fc)
                .map(|(e, c)| k * e - c)
                .fold(f64::NEG_INFINITY, f64::max);
            sum += top;
        }
        let expected = analysis.expected_utility().row(k_index);
        let best_mean = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        sum / analysis.n_sim() as f64 - best_mean
    }
}

fn clamp(value: f64, evpi: f64) -> f64 {
    value.clamp(0.0, evpi.max(0.0))
}

/// EVPPI of the parameter subset `params` across the analysis grid.
pub fn evppi(
    analysis: &Analysis,
    params: &[String],
    inputs: &ParameterInputs,
    options: &EvppiOptions,
) -> Result<EvppiResult> {
    let method = options.method.unwrap_or(EvppiMethod::Regression);
    let fitted = fit(analysis, inputs, params, method)?;
    let grid = analysis.grid();
    let evpi = analysis.evi().to_vec();
    let indices = options.k_subset.indices(grid.len())?;

    let points: Vec<EvaluatedPoint> = indices
        .par_iter()
        .map(|&ki| {
            let raw = fitted.raw_at(analysis, ki);
            EvaluatedPoint {
                k_index: ki,
                k: grid.get(ki),
                raw,
                clamped: clamp(raw, evpi[ki]),
            }
        })
        .collect();

    let values = grid.values();
    let mut curve = Vec::with_capacity(grid.len());
    for ki in 0..grid.len() {
        let after = points.partition_point(|p| p.k_index < ki);
        let v = match (after.checked_sub(1).map(|i| &points[i]), points.get(after)) {
            (_, Some(p)) if p.k_index == ki => p.clamped,
            (Some(a), Some(b)) => {
                let w = (values[ki] - a.k) / (b.k - a.k);
                a.clamped + w * (b.clamped - a.clamped)
            }
            (Some(a), None) => a.clamped,
            (None, Some(b)) => b.clamped,
            (None, None) => unreachable!("at least one evaluated point"),
        };
        curve.push(clamp(v, evpi[ki]));
    }

    let mut warnings = Vec::new();
    if analysis.n_sim() < MIN_RELIABLE_SIMS {
        warnings.push(format!(
            "only {} simulations; EVPPI estimates are unreliable below {}",
            analysis.n_sim(),
            MIN_RELIABLE_SIMS
        ));
    }
    for w in &warnings {
        log::debug!("{w}");
    }

    Ok(EvppiResult {
        params: params.to_vec(),
        k: values.to_vec(),
        evppi: curve,
        evpi,
        method,
        diagnostics: EvppiDiagnostics {
            points,
            r2_effects: fitted.r2_effects,
            r2_costs: fitted.r2_costs,
            warnings,
        },
    })
}
