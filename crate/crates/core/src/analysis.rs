use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{PsaDataset, WtpGrid, DEFAULT_GRID_POINTS, DEFAULT_KMAX};
use crate::error::{Error, Result};
use crate::stats::{self, Icer, Utility};

/// Cost-effectiveness analysis of a PSA dataset over a willingness-to-pay grid.
///
/// Holds the grid-level statistics (expected utilities, EIB, CEAC, EVPI,
/// optimal arm, break-even points) and the per-simulation increments. The
/// per-simulation, per-k quantities (`U`, `U*`, `IB`, `OL`, `VI`) are
/// regenerated from the samples by [`Analysis::slice`] with the same
/// arithmetic that produced the aggregates.
///
/// Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    dataset: PsaDataset,
    reference: usize,
    comparisons: Vec<usize>,
    grid: WtpGrid,
    delta_e: Array2<f64>,
    delta_c: Array2<f64>,
    icer: Vec<Icer>,
    expected_utility: Array2<f64>,
    best: Vec<usize>,
    eib: Array2<f64>,
    ceac: Array2<f64>,
    evi: Vec<f64>,
    kstar: Vec<f64>,
}

/// Grid-level statistics for one utility function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GridStats {
    pub expected_utility: Array2<f64>,
    pub best: Vec<usize>,
    pub eib: Array2<f64>,
    pub ceac: Array2<f64>,
    pub evi: Vec<f64>,
    pub saturated: usize,
}

pub(crate) fn evaluate_grid(
    dataset: &PsaDataset,
    grid: &WtpGrid,
    reference: usize,
    comparisons: &[usize],
    utility: Utility,
) -> GridStats {
    let points: Vec<stats::PointStats> = grid
        .values()
        .par_iter()
        .map(|&k| stats::point_stats(dataset, k, utility, reference, comparisons))
        .collect();

    let (n_k, n_int, n_cmp) = (grid.len(), dataset.n_int(), comparisons.len());
    let mut expected_utility = Array2::zeros((n_k, n_int));
    let mut eib = Array2::zeros((n_k, n_cmp));
    let mut ceac = Array2::zeros((n_k, n_cmp));
    let mut best = Vec::with_capacity(n_k);
    let mut evi = Vec::with_capacity(n_k);
    let mut saturated = 0;
    for (ki, p) in points.into_iter().enumerate() {
        for (t, v) in p.expected.into_iter().enumerate() {
            expected_utility[[ki, t]] = v;
        }
        for j in 0..n_cmp {
            eib[[ki, j]] = p.eib[j];
            ceac[[ki, j]] = p.ceac[j];
        }
        best.push(p.best);
        evi.push(p.evi);
        saturated += p.saturated;
    }
    GridStats {
        expected_utility,
        best,
        eib,
        ceac,
        evi,
        saturated,
    }
}

pub(crate) fn validate_comparisons(
    dataset: &PsaDataset,
    reference: usize,
    comparisons: &[usize],
) -> Result<()> {
    dataset.check_arm(reference)?;
    if comparisons.is_empty() {
        return Err(Error::EmptyComparisons);
    }
    for (i, &c) in comparisons.iter().enumerate() {
        dataset.check_arm(c)?;
        if c == reference {
            return Err(Error::ReferenceInComparisons(c + 1));
        }
        if comparisons[..i].contains(&c) {
            return Err(Error::DuplicateComparison(c + 1));
        }
    }
    Ok(())
}

/// Configures and builds an [`Analysis`].
#[derive(Debug, Clone)]
pub struct AnalysisBuilder {
    dataset: PsaDataset,
    reference: usize,
    comparisons: Option<Vec<usize>>,
    kmax: f64,
    grid_points: usize,
    grid: Option<WtpGrid>,
}

impl AnalysisBuilder {
    /// Comparator interventions (0-based); defaults to every non-reference arm.
    pub fn comparisons(mut self, comparisons: Vec<usize>) -> Self {
        self.comparisons = Some(comparisons);
        self
    }

    pub fn kmax(mut self, kmax: f64) -> Self {
        self.kmax = kmax;
        self
    }

    pub fn grid_points(mut self, points: usize) -> Self {
        self.grid_points = points;
        self
    }

    /// Uses an explicit grid, overriding `kmax` and `grid_points`.
    pub fn grid(mut self, grid: WtpGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn build(self) -> Result<Analysis> {
        let grid = match self.grid {
            Some(g) => g,
            None => WtpGrid::equally_spaced(self.kmax, self.grid_points)?,
        };
        self.dataset.check_arm(self.reference)?;
        let comparisons = self.comparisons.unwrap_or_else(|| {
            (0..self.dataset.n_int())
                .filter(|&t| t != self.reference)
                .collect()
        });
        Analysis::compute(self.dataset, self.reference, comparisons, grid)
    }
}

/// Per-simulation quantities at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSlice {
    pub k: f64,
    /// `[sim][arm]`
    pub utilities: Array2<f64>,
    pub ustar: Vec<f64>,
    /// `[sim][comparison]`
    pub ib: Array2<f64>,
    pub ol: Vec<f64>,
    pub vi: Vec<f64>,
    /// Arm chosen on expected utility at this k.
    pub best: usize,
}

impl SimSlice {
    pub(crate) fn new(
        dataset: &PsaDataset,
        k: f64,
        reference: usize,
        comparisons: &[usize],
        utility: Utility,
    ) -> Self {
        let (utilities, _) = stats::utilities_at(dataset, k, utility);
        let expected = stats::column_means(utilities.view());
        let best = stats::optimal_arm(&expected, reference);
        let ustar = stats::max_utility(utilities.view());
        let ib = stats::incremental_benefit(utilities.view(), reference, comparisons);
        let ol = stats::opportunity_loss(utilities.view(), &ustar, best);
        let vi = stats::value_of_information(&ustar, &expected);
        SimSlice {
            k,
            utilities,
            ustar,
            ib,
            ol,
            vi,
            best,
        }
    }
}

impl Analysis {
    /// Starts an analysis of `dataset` against the (0-based) `reference` arm.
    pub fn builder(dataset: PsaDataset, reference: usize) -> AnalysisBuilder {
        AnalysisBuilder {
            reference,
            dataset,
            comparisons: None,
            kmax: DEFAULT_KMAX,
            grid_points: DEFAULT_GRID_POINTS,
            grid: None,
        }
    }

    pub(crate) fn compute(
        dataset: PsaDataset,
        reference: usize,
        comparisons: Vec<usize>,
        grid: WtpGrid,
    ) -> Result<Self> {
        validate_comparisons(&dataset, reference, &comparisons)?;
        let stats = evaluate_grid(&dataset, &grid, reference, &comparisons, Utility::NetBenefit);
        let delta_e = stats::increments(dataset.effects(), reference, &comparisons);
        let delta_c = stats::increments(dataset.costs(), reference, &comparisons);
        let icer = stats::compute_icer(&delta_e, &delta_c);
        let kstar = stats::compute_kstar(&grid, &stats.best);
        Ok(Analysis {
            dataset,
            reference,
            comparisons,
            grid,
            delta_e,
            delta_c,
            icer,
            expected_utility: stats.expected_utility,
            best: stats.best,
            eib: stats.eib,
            ceac: stats.ceac,
            evi: stats.evi,
            kstar,
        })
    }

    /// Same analysis with a different comparator set. Arm-level statistics
    /// (expected utilities, optimal arm, EVPI, break-even points) are reused.
    pub fn with_comparisons(&self, comparisons: Vec<usize>) -> Result<Self> {
        validate_comparisons(&self.dataset, self.reference, &comparisons)?;
        let reference = self.reference;
        let per_k: Vec<(Vec<f64>, Vec<f64>)> = self
            .grid
            .values()
            .par_iter()
            .map(|&k| stats::increment_stats(&self.dataset, k, reference, &comparisons))
            .collect();
        let mut eib = Array2::zeros((self.grid.len(), comparisons.len()));
        let mut ceac = Array2::zeros(eib.dim());
        for (ki, (e, c)) in per_k.into_iter().enumerate() {
            for j in 0..comparisons.len() {
                eib[[ki, j]] = e[j];
                ceac[[ki, j]] = c[j];
            }
        }
        let delta_e = stats::increments(self.dataset.effects(), reference, &comparisons);
        let delta_c = stats::increments(self.dataset.costs(), reference, &comparisons);
        Ok(Analysis {
            icer: stats::compute_icer(&delta_e, &delta_c),
            delta_e,
            delta_c,
            eib,
            ceac,
            comparisons,
            ..self.clone()
        })
    }

    /// Same analysis with another reference arm. If the new reference was a
    /// comparator, the old reference takes its place in the comparator list.
    pub fn with_reference(&self, reference: usize) -> Result<Self> {
        self.dataset.check_arm(reference)?;
        let comparisons = self
            .comparisons
            .iter()
            .map(|&c| if c == reference { self.reference } else { c })
            .collect();
        Self::compute(self.dataset.clone(), reference, comparisons, self.grid.clone())
    }

    /// Same analysis on a default-density grid up to `kmax`.
    pub fn with_kmax(&self, kmax: f64) -> Result<Self> {
        let grid = WtpGrid::equally_spaced(kmax, crate::dataset::DEFAULT_GRID_POINTS)?;
        self.with_grid(grid)
    }

    pub fn with_grid(&self, grid: WtpGrid) -> Result<Self> {
        Self::compute(
            self.dataset.clone(),
            self.reference,
            self.comparisons.clone(),
            grid,
        )
    }

    pub fn dataset(&self) -> &PsaDataset {
        &self.dataset
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn comparisons(&self) -> &[usize] {
        &self.comparisons
    }

    pub fn grid(&self) -> &WtpGrid {
        &self.grid
    }

    pub fn n_sim(&self) -> usize {
        self.dataset.n_sim()
    }

    pub fn n_int(&self) -> usize {
        self.dataset.n_int()
    }

    /// `Δe[sim][comparison]`
    pub fn delta_e(&self) -> &Array2<f64> {
        &self.delta_e
    }

    /// `Δc[sim][comparison]`
    pub fn delta_c(&self) -> &Array2<f64> {
        &self.delta_c
    }

    pub fn icer(&self) -> &[Icer] {
        &self.icer
    }

    /// Mean utility `[k][arm]`.
    pub fn expected_utility(&self) -> &Array2<f64> {
        &self.expected_utility
    }

    /// Arm with maximum expected utility at each grid point.
    pub fn best(&self) -> &[usize] {
        &self.best
    }

    /// `eib[k][comparison]`
    pub fn eib(&self) -> &Array2<f64> {
        &self.eib
    }

    /// `ceac[k][comparison]`
    pub fn ceac(&self) -> &Array2<f64> {
        &self.ceac
    }

    /// Expected value of perfect information per grid point.
    pub fn evi(&self) -> &[f64] {
        &self.evi
    }

    /// Grid values where the optimal arm changes.
    pub fn kstar(&self) -> &[f64] {
        &self.kstar
    }

    pub fn label(&self, arm: usize) -> &str {
        self.dataset.label(arm)
    }

    /// Snaps `k` to the nearest grid index.
    pub fn k_index(&self, k: f64) -> Result<usize> {
        self.grid.nearest_index(k)
    }

    /// Per-simulation `U`, `U*`, `IB`, `OL` and `VI` at grid index `k_index`.
    pub fn slice(&self, k_index: usize) -> SimSlice {
        SimSlice::new(
            &self.dataset,
            self.grid.get(k_index),
            self.reference,
            &self.comparisons,
            Utility::NetBenefit,
        )
    }

    /// Position of `arm` in the comparator list.
    pub fn comparison_position(&self, arm: usize) -> Result<usize> {
        self.comparisons
            .iter()
            .position(|&c| c == arm)
            .ok_or(Error::UnknownComparison(arm + 1))
    }
}
