//! Mutators and decorations of an [`Analysis`]: comparator/reference/grid
//! replacement, simultaneous multi-way comparison, risk-averse utilities and
//! mixed (market-share) strategies.
//!
//! Every operation returns a new value; the input analysis is never modified.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{evaluate_grid, Analysis, SimSlice};
use crate::error::{Error, Result};
use crate::stats::{self, Utility};

/// Replaces the comparator set.
pub fn set_comparisons(analysis: &Analysis, comparisons: Vec<usize>) -> Result<Analysis> {
    analysis.with_comparisons(comparisons)
}

/// Replaces the reference arm (full recompute).
pub fn set_reference(analysis: &Analysis, reference: usize) -> Result<Analysis> {
    analysis.with_reference(reference)
}

/// Rebuilds the grid on `[0, kmax]` with the default density.
pub fn set_kmax(analysis: &Analysis, kmax: f64) -> Result<Analysis> {
    analysis.with_kmax(kmax)
}

/// Probability of each arm being the best, for all included arms at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCeResult {
    /// Reference plus comparators, in index order.
    pub included: Vec<usize>,
    /// `[k][arm]`; excluded arms are 0.
    pub p_best: Array2<f64>,
    /// Optimal included arm on expected utility, per k.
    pub best: Vec<usize>,
    /// Acceptability frontier: `p_best[k][best[k]]`.
    pub ceaf: Vec<f64>,
}

pub fn multi_ce(analysis: &Analysis) -> MultiCeResult {
    let mut included: Vec<usize> = analysis.comparisons().to_vec();
    included.push(analysis.reference());
    included.sort_unstable();

    let n_int = analysis.n_int();
    let n_sim = analysis.n_sim() as f64;
    let reference = analysis.reference();
    let rows: Vec<(Vec<f64>, usize)> = analysis
        .grid()
        .values()
        .par_iter()
        .map(|&k| {
            let mut wins = vec![0usize; n_int];
            let mut sums = vec![0.0; n_int];
            stats::for_each_row(analysis.dataset(), k, Utility::NetBenefit, |row| {
                let w = stats::winning_arm(included.iter().map(|&t| row[t]));
                wins[included[w]] += 1;
                for (sum, v) in sums.iter_mut().zip(row) {
                    *sum += v;
                }
            });
            let expected: Vec<f64> = sums.iter().map(|s| s / n_sim).collect();
            let restricted: Vec<f64> = included.iter().map(|&t| expected[t]).collect();
            let ref_pos = included.iter().position(|&t| t == reference).unwrap_or(0);
            let best = included[stats::optimal_arm(&restricted, ref_pos)];
            (wins.into_iter().map(|w| w as f64 / n_sim).collect(), best)
        })
        .collect();

    let mut p_best = Array2::zeros((rows.len(), n_int));
    let mut best = Vec::with_capacity(rows.len());
    let mut ceaf = Vec::with_capacity(rows.len());
    for (ki, (p, b)) in rows.into_iter().enumerate() {
        for (t, v) in p.into_iter().enumerate() {
            p_best[[ki, t]] = v;
        }
        ceaf.push(p_best[[ki, b]]);
        best.push(b);
    }
    MultiCeResult {
        included,
        p_best,
        best,
        ceaf,
    }
}

/// Statistics recomputed under one risk-aversion coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAversionEntry {
    pub r: f64,
    /// `[k][arm]`
    pub expected_utility: Array2<f64>,
    pub best: Vec<usize>,
    /// `[k][comparison]`
    pub eib: Array2<f64>,
    pub evi: Vec<f64>,
    /// Number of `(sim, k, arm)` cells whose exponent hit the overflow clamp.
    pub saturated: usize,
}

impl RiskAversionEntry {
    pub fn utility(&self) -> Utility {
        Utility::RiskAverse { r: self.r }
    }

    /// Per-simulation `U`, `U*`, `IB`, `OL`, `VI` under this coefficient.
    pub fn slice(&self, analysis: &Analysis, k_index: usize) -> SimSlice {
        SimSlice::new(
            analysis.dataset(),
            analysis.grid().get(k_index),
            analysis.reference(),
            analysis.comparisons(),
            self.utility(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAversionSet {
    pub entries: Vec<RiskAversionEntry>,
}

impl RiskAversionSet {
    pub fn r_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.r).collect()
    }

    /// True when any coefficient needed the overflow clamp.
    pub fn saturated(&self) -> bool {
        self.entries.iter().any(|e| e.saturated > 0)
    }
}

/// Recomputes the analysis under `u(b, r) = (1 − exp(−r·b)) / r` for every
/// coefficient. `r = 0` is the risk-neutral utility.
pub fn apply_risk_aversion(analysis: &Analysis, r_values: &[f64]) -> Result<RiskAversionSet> {
    if let Some(&bad) = r_values.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidRiskAversion(bad));
    }
    let entries = r_values
        .iter()
        .map(|&r| {
            let s = evaluate_grid(
                analysis.dataset(),
                analysis.grid(),
                analysis.reference(),
                analysis.comparisons(),
                Utility::RiskAverse { r },
            );
            if s.saturated > 0 {
                log::warn!("risk aversion r = {r}: {} utilities clamped", s.saturated);
            }
            RiskAversionEntry {
                r,
                expected_utility: s.expected_utility,
                best: s.best,
                eib: s.eib,
                evi: s.evi,
                saturated: s.saturated,
            }
        })
        .collect();
    Ok(RiskAversionSet { entries })
}

/// Market-share mixture of all arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    /// Market shares, one per arm.
    pub shares: Vec<f64>,
    /// `Σ_t q_t · mean_s U[s][k][t]`, per k.
    pub ubar: Vec<f64>,
    /// Mean opportunity loss of the mixture, per k.
    pub evi: Vec<f64>,
}

impl MixedStrategy {
    /// Per-simulation opportunity loss of the mixture at grid index `k_index`.
    pub fn ol(&self, analysis: &Analysis, k_index: usize) -> Vec<f64> {
        let (u, _) = stats::utilities_at(
            analysis.dataset(),
            analysis.grid().get(k_index),
            Utility::NetBenefit,
        );
        mixed_loss(u.view(), &self.shares)
    }
}

fn mixed_loss(u: ndarray::ArrayView2<'_, f64>, shares: &[f64]) -> Vec<f64> {
    u.rows()
        .into_iter()
        .map(|row| match row.as_slice() {
            Some(r) => row_loss(r, shares),
            None => row_loss(&row.to_vec(), shares),
        })
        .collect()
}

/// `max_t u[t] − Σ_t q_t·u[t]` for one simulation.
fn row_loss(row: &[f64], shares: &[f64]) -> f64 {
    let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut mix = 0.0;
    for (q, v) in shares.iter().zip(row) {
        mix += q * v;
    }
    top - mix
}

pub fn uniform_shares(n_int: usize) -> Vec<f64> {
    vec![1.0 / n_int as f64; n_int]
}

/// Validates market shares: finite, non-negative and summing to one within
/// 1e-9. Accepted shares are returned as given.
pub fn validate_shares(shares: &[f64], n_int: usize) -> Result<Vec<f64>> {
    if shares.len() != n_int {
        return Err(Error::InvalidShares(format!(
            "{} shares for {} interventions",
            shares.len(),
            n_int
        )));
    }
    if let Some(bad) = shares.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
        return Err(Error::InvalidShares(format!("share {bad} is negative or not finite")));
    }
    let total: f64 = shares.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidShares("shares sum to zero".into()));
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidShares(format!("shares sum to {total}, not 1")));
    }
    Ok(shares.to_vec())
}

/// Expected utility and opportunity loss when arms keep market shares `shares`
/// (uniform when `None`).
pub fn apply_mixed_strategy(analysis: &Analysis, shares: Option<&[f64]>) -> Result<MixedStrategy> {
    let n_int = analysis.n_int();
    let shares = match shares {
        Some(q) => validate_shares(q, n_int)?,
        None => uniform_shares(n_int),
    };
    let per_k: Vec<(f64, f64)> = analysis
        .grid()
        .values()
        .par_iter()
        .map(|&k| {
            let n = analysis.n_sim() as f64;
            let mut sums = vec![0.0; n_int];
            let mut loss = 0.0;
            stats::for_each_row(analysis.dataset(), k, Utility::NetBenefit, |row| {
                for (sum, v) in sums.iter_mut().zip(row) {
                    *sum += v;
                }
                loss += row_loss(row, &shares);
            });
            let mut ubar = 0.0;
            for (q, sum) in shares.iter().zip(&sums) {
                ubar += q * (sum / n);
            }
            (ubar, loss / n)
        })
        .collect();
    let (ubar, evi) = per_k.into_iter().unzip();
    Ok(MixedStrategy { shares, ubar, evi })
}

/// Extension results attached to an analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extensions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_ce: Option<MultiCeResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_aversion: Option<RiskAversionSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed: Option<MixedStrategy>,
}

impl Extensions {
    pub fn is_empty(&self) -> bool {
        self.multi_ce.is_none() && self.risk_aversion.is_none() && self.mixed.is_none()
    }

    /// Recomputes every attached extension against `analysis`.
    pub fn refresh(&self, analysis: &Analysis) -> Result<Extensions> {
        Ok(Extensions {
            multi_ce: self.multi_ce.as_ref().map(|_| multi_ce(analysis)),
            risk_aversion: match &self.risk_aversion {
                Some(set) => Some(apply_risk_aversion(analysis, &set.r_values())?),
                None => None,
            },
            mixed: match &self.mixed {
                Some(m) => Some(apply_mixed_strategy(analysis, Some(&m.shares))?),
                None => None,
            },
        })
    }
}
