//! Cost-effectiveness statistics.
//!
//! Each statistic has a per-willingness-to-pay kernel working on a
//! `[sim][arm]` utility slice, plus a full-grid `compute_*` function that
//! applies the kernel to every grid point. [`Analysis`](crate::Analysis) uses
//! the kernels directly so it never has to hold the `[sim][k][arm]` cube.
//!
//! All means are sequential sums over simulations divided by `n_sim`.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{mean_of, PsaDataset, WtpGrid};

/// Exponent ceiling for the risk-averse utility; `exp(700)` is still finite.
pub const EXP_CLAMP: f64 = 700.0;

/// Utility of a monetary net benefit `b = k·e − c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    /// `u = b` (risk neutral).
    NetBenefit,
    /// `u = (1 − exp(−r·b)) / r`; `r = 0` is evaluated as the linear limit.
    RiskAverse { r: f64 },
}

impl Utility {
    /// Evaluates the utility, returning whether the exponent had to be clamped.
    #[inline]
    pub fn eval(self, b: f64) -> (f64, bool) {
        match self {
            Utility::NetBenefit => (b, false),
            Utility::RiskAverse { r } if r == 0.0 => (b, false),
            Utility::RiskAverse { r } => {
                let exponent = -r * b;
                if exponent > EXP_CLAMP {
                    ((1.0 - EXP_CLAMP.exp()) / r, true)
                } else {
                    ((1.0 - exponent.exp()) / r, false)
                }
            }
        }
    }
}

/// Utilities `[sim][arm]` at willingness to pay `k`, and the number of
/// entries whose exponent was clamped.
pub fn utilities_at(dataset: &PsaDataset, k: f64, utility: Utility) -> (Array2<f64>, usize) {
    let mut saturated = 0;
    let u = ndarray::Zip::from(dataset.effects())
        .and(dataset.costs())
        .map_collect(|&e, &c| {
            let (value, clamped) = utility.eval(k * e - c);
            saturated += clamped as usize;
            value
        });
    (u, saturated)
}

/// `ib[s][j] = U[s][reference] − U[s][comparisons[j]]`.
pub fn incremental_benefit(
    utilities: ArrayView2<'_, f64>,
    reference: usize,
    comparisons: &[usize],
) -> Array2<f64> {
    let n_sim = utilities.nrows();
    Array2::from_shape_fn((n_sim, comparisons.len()), |(s, j)| {
        utilities[[s, reference]] - utilities[[s, comparisons[j]]]
    })
}

/// Column means of a `[sim][·]` slice.
pub fn column_means(m: ArrayView2<'_, f64>) -> Vec<f64> {
    m.columns().into_iter().map(mean_of).collect()
}

/// Share of simulations with strictly positive incremental benefit, per comparison.
pub fn acceptability(ib: ArrayView2<'_, f64>) -> Vec<f64> {
    let n_sim = ib.nrows() as f64;
    ib.columns()
        .into_iter()
        .map(|col| col.iter().filter(|&&v| v > 0.0).count() as f64 / n_sim)
        .collect()
}

/// Per-simulation maximum utility.
pub fn max_utility(utilities: ArrayView2<'_, f64>) -> Vec<f64> {
    utilities
        .rows()
        .into_iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Arm with the highest expected utility. Exact ties favour the reference,
/// then the lowest index.
pub fn optimal_arm(expected: &[f64], reference: usize) -> usize {
    let best = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if expected[reference] == best {
        return reference;
    }
    expected.iter().position(|&v| v == best).unwrap_or(reference)
}

/// Arm with the highest utility in a single simulation; ties go to the lowest index.
pub fn winning_arm(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// `ol[s] = Ustar[s] − U[s][best]`.
pub fn opportunity_loss(utilities: ArrayView2<'_, f64>, ustar: &[f64], best: usize) -> Vec<f64> {
    ustar
        .iter()
        .zip(utilities.column(best))
        .map(|(&top, &chosen)| top - chosen)
        .collect()
}

/// `vi[s] = Ustar[s] − max_t mean_s U[s][t]`.
pub fn value_of_information(ustar: &[f64], expected: &[f64]) -> Vec<f64> {
    let best_mean = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ustar.iter().map(|&top| top - best_mean).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    mean_of(ndarray::ArrayView1::from(xs))
}

/// Incremental cost-effectiveness ratio for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Icer {
    /// `mean(Δc) / mean(Δe)`, or `None` when `mean(Δe) = 0`.
    pub value: Option<f64>,
    pub mean_delta_e: f64,
    pub mean_delta_c: f64,
}

impl Icer {
    pub fn new(mean_delta_e: f64, mean_delta_c: f64) -> Self {
        let value = (mean_delta_e != 0.0).then(|| mean_delta_c / mean_delta_e);
        Icer {
            value,
            mean_delta_e,
            mean_delta_c,
        }
    }

    /// Sign of `mean(Δe)`: with a positive sign the reference is preferred
    /// for `k > ICER`, with a negative one for `k < ICER`.
    pub fn effect_sign(&self) -> i8 {
        if self.mean_delta_e > 0.0 {
            1
        } else if self.mean_delta_e < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Per-simulation increments `reference − comparator` of a `[sim][arm]` matrix.
pub fn increments(m: &Array2<f64>, reference: usize, comparisons: &[usize]) -> Array2<f64> {
    incremental_benefit(m.view(), reference, comparisons)
}

pub fn compute_icer(delta_e: &Array2<f64>, delta_c: &Array2<f64>) -> Vec<Icer> {
    column_means(delta_e.view())
        .into_iter()
        .zip(column_means(delta_c.view()))
        .map(|(de, dc)| Icer::new(de, dc))
        .collect()
}

/// Grid values at which the optimal arm changes.
pub fn compute_kstar(grid: &WtpGrid, best: &[usize]) -> Vec<f64> {
    best.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| grid.get(i + 1))
        .collect()
}

/// Aggregates of one utility slice.
#[derive(Debug, Clone)]
pub(crate) struct PointStats {
    pub expected: Vec<f64>,
    pub best: usize,
    pub eib: Vec<f64>,
    pub ceac: Vec<f64>,
    pub evi: f64,
    pub saturated: usize,
}

/// Feeds each simulation's utilities at `k` to `f`, in simulation order, and
/// returns the number of clamped exponents.
pub(crate) fn for_each_row(dataset: &PsaDataset, k: f64, utility: Utility, mut f: impl FnMut(&[f64])) -> usize {
    let mut row = vec![0.0; dataset.n_int()];
    let mut saturated = 0;
    if utility == Utility::NetBenefit {
        for (e, c) in dataset.rows() {
            for ((u, &e), &c) in row.iter_mut().zip(e).zip(c) {
                *u = k * e - c;
            }
            f(&row);
        }
    } else {
        for (e, c) in dataset.rows() {
            for ((u, &e), &c) in row.iter_mut().zip(e).zip(c) {
                let (value, clamped) = utility.eval(k * e - c);
                *u = value;
                saturated += clamped as usize;
            }
            f(&row);
        }
    }
    saturated
}

/// Grid-point aggregates at `k` from one pass over the samples.
///
/// The loss `U* − U_t` is summed for every arm so the optimal arm's sum is
/// available once the expected utilities are known. All sums run in
/// simulation order, so results are bit-identical to the per-simulation
/// kernels above.
pub(crate) fn point_stats(
    dataset: &PsaDataset,
    k: f64,
    utility: Utility,
    reference: usize,
    comparisons: &[usize],
) -> PointStats {
    // fixed arm counts let the inner loops unroll
    match dataset.n_int() {
        2 => point_stats_n::<2>(dataset, k, utility, reference, comparisons),
        3 => point_stats_n::<3>(dataset, k, utility, reference, comparisons),
        4 => point_stats_n::<4>(dataset, k, utility, reference, comparisons),
        5 => point_stats_n::<5>(dataset, k, utility, reference, comparisons),
        6 => point_stats_n::<6>(dataset, k, utility, reference, comparisons),
        _ => point_stats_n::<0>(dataset, k, utility, reference, comparisons),
    }
}

/// `M` is the arm count, or 0 when it is only known at run time.
fn point_stats_n<const M: usize>(
    dataset: &PsaDataset,
    k: f64,
    utility: Utility,
    reference: usize,
    comparisons: &[usize],
) -> PointStats {
    let m = if M == 0 { dataset.n_int() } else { M };
    let mut sums = vec![0.0; m];
    let mut losses = vec![0.0; m];
    let mut ib_sums = vec![0.0; comparisons.len()];
    let mut positive = vec![0usize; comparisons.len()];
    let mut row = vec![0.0; m];
    let mut saturated = 0;
    for (e, c) in dataset.rows() {
        let (row, sums, losses) = (&mut row[..m], &mut sums[..m], &mut losses[..m]);
        let (e, c) = (&e[..m], &c[..m]);
        if utility == Utility::NetBenefit {
            for ((u, &e), &c) in row.iter_mut().zip(e).zip(c) {
                *u = k * e - c;
            }
        } else {
            for ((u, &e), &c) in row.iter_mut().zip(e).zip(c) {
                let (value, clamped) = utility.eval(k * e - c);
                *u = value;
                saturated += clamped as usize;
            }
        }
        let mut top = f64::NEG_INFINITY;
        for &v in row.iter() {
            if v > top {
                top = v;
            }
        }
        for ((sum, loss), &v) in sums.iter_mut().zip(losses.iter_mut()).zip(row.iter()) {
            *sum += v;
            *loss += top - v;
        }
        for ((&t, ib_sum), pos) in comparisons.iter().zip(ib_sums.iter_mut()).zip(positive.iter_mut()) {
            let ib = row[reference] - row[t];
            *ib_sum += ib;
            *pos += (ib > 0.0) as usize;
        }
    }
    let n = dataset.n_sim() as f64;
    let expected: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let best = optimal_arm(&expected, reference);
    PointStats {
        evi: losses[best] / n,
        expected,
        best,
        eib: ib_sums.iter().map(|s| s / n).collect(),
        ceac: positive.iter().map(|&p| p as f64 / n).collect(),
        saturated,
    }
}

/// Mean incremental benefit and CEAC at `k` for each comparator, without the
/// arm-level sums. Same arithmetic and order as [`point_stats`].
pub(crate) fn increment_stats(
    dataset: &PsaDataset,
    k: f64,
    reference: usize,
    comparisons: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let n = dataset.n_sim() as f64;
    let mut ib_sums = vec![0.0; comparisons.len()];
    let mut positive = vec![0usize; comparisons.len()];
    for (e, c) in dataset.rows() {
        let base = k * e[reference] - c[reference];
        for ((&t, ib_sum), pos) in comparisons.iter().zip(ib_sums.iter_mut()).zip(positive.iter_mut()) {
            let ib = base - (k * e[t] - c[t]);
            *ib_sum += ib;
            *pos += (ib > 0.0) as usize;
        }
    }
    (
        ib_sums.iter().map(|s| s / n).collect(),
        positive.iter().map(|&p| p as f64 / n).collect(),
    )
}

/// `U[s][k][t]` over the whole grid.
pub fn compute_u(dataset: &PsaDataset, grid: &WtpGrid) -> Array3<f64> {
    let (n_sim, n_int) = (dataset.n_sim(), dataset.n_int());
    let mut u = Array3::zeros((n_sim, grid.len(), n_int));
    for (ki, &k) in grid.values().iter().enumerate() {
        let (slice, _) = utilities_at(dataset, k, Utility::NetBenefit);
        u.index_axis_mut(Axis(1), ki).assign(&slice);
    }
    u
}

/// `ib[s][k][j]` from a utility cube.
pub fn compute_ib(u: ArrayView3<'_, f64>, reference: usize, comparisons: &[usize]) -> Array3<f64> {
    let (n_sim, n_k, _) = u.dim();
    let mut ib = Array3::zeros((n_sim, n_k, comparisons.len()));
    for ki in 0..n_k {
        let slice = incremental_benefit(u.index_axis(Axis(1), ki), reference, comparisons);
        ib.index_axis_mut(Axis(1), ki).assign(&slice);
    }
    ib
}

fn per_k<F>(cube: ArrayView3<'_, f64>, f: F) -> Array2<f64>
where
    F: Fn(ArrayView2<'_, f64>) -> Vec<f64>,
{
    let (_, n_k, n_cols) = cube.dim();
    let mut out = Array2::zeros((n_k, n_cols));
    for ki in 0..n_k {
        for (j, v) in f(cube.index_axis(Axis(1), ki)).into_iter().enumerate() {
            out[[ki, j]] = v;
        }
    }
    out
}

/// `eib[k][j]`.
pub fn compute_eib(ib: ArrayView3<'_, f64>) -> Array2<f64> {
    per_k(ib, column_means)
}

/// `ceac[k][j]`.
pub fn compute_ceac(ib: ArrayView3<'_, f64>) -> Array2<f64> {
    per_k(ib, acceptability)
}

/// Expected utility `[k][arm]`.
pub fn compute_expected_utility(u: ArrayView3<'_, f64>) -> Array2<f64> {
    per_k(u, column_means)
}

/// Optimal arm per grid point.
pub fn compute_best(u: ArrayView3<'_, f64>, reference: usize) -> Vec<usize> {
    compute_expected_utility(u)
        .rows()
        .into_iter()
        .map(|row| optimal_arm(row.as_slice().expect("standard layout"), reference))
        .collect()
}

/// `Ustar[s][k]`.
pub fn compute_ustar(u: ArrayView3<'_, f64>) -> Array2<f64> {
    let (n_sim, n_k, _) = u.dim();
    let mut out = Array2::zeros((n_sim, n_k));
    for ki in 0..n_k {
        let top = max_utility(u.index_axis(Axis(1), ki));
        out.column_mut(ki).assign(&ndarray::Array1::from(top));
    }
    out
}

/// `ol[s][k]`.
pub fn compute_ol(u: ArrayView3<'_, f64>, ustar: &Array2<f64>, best: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(ustar.dim());
    for (ki, &b) in best.iter().enumerate() {
        let top = ustar.column(ki).to_vec();
        let ol = opportunity_loss(u.index_axis(Axis(1), ki), &top, b);
        out.column_mut(ki).assign(&ndarray::Array1::from(ol));
    }
    out
}

/// `vi[s][k]`.
pub fn compute_vi(u: ArrayView3<'_, f64>, ustar: &Array2<f64>) -> Array2<f64> {
    let expected = compute_expected_utility(u);
    let mut out = Array2::zeros(ustar.dim());
    for ki in 0..ustar.ncols() {
        let top = ustar.column(ki).to_vec();
        let vi = value_of_information(&top, &expected.row(ki).to_vec());
        out.column_mut(ki).assign(&ndarray::Array1::from(vi));
    }
    out
}

/// `evi[k] = mean_s ol[s][k]`.
pub fn compute_evi(ol: &Array2<f64>) -> Vec<f64> {
    ol.columns().into_iter().map(mean_of).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> PsaDataset {
        PsaDataset::new(
            array![[1.0, 2.0], [1.0, 3.0], [1.0, 1.0]],
            array![[10.0, 25.0], [10.0, 35.0], [10.0, 15.0]],
            vec!["Status quo".into(), "New".into()],
        )
        .unwrap()
    }

    #[test]
    fn utilities_on_tiny() {
        let (u, sat) = utilities_at(&tiny(), 20.0, Utility::NetBenefit);
        assert_eq!(sat, 0);
        assert_eq!(u, array![[10.0, 15.0], [10.0, 25.0], [10.0, 5.0]]);
        let (u0, _) = utilities_at(&tiny(), 0.0, Utility::NetBenefit);
        assert_eq!(u0, tiny().costs().mapv(|c| -c));
    }

    #[test]
    fn zero_inputs_give_zero_utility() {
        let z = PsaDataset::unlabelled(Array2::zeros((3, 2)), Array2::zeros((3, 2))).unwrap();
        let (u, _) = utilities_at(&z, 123.0, Utility::NetBenefit);
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ib_and_aggregates_on_tiny() {
        let (u, _) = utilities_at(&tiny(), 20.0, Utility::NetBenefit);
        let ib = incremental_benefit(u.view(), 1, &[0]);
        assert_eq!(ib.column(0).to_vec(), vec![5.0, 15.0, -5.0]);
        assert_eq!(column_means(ib.view()), vec![5.0]);
        assert_eq!(acceptability(ib.view()), vec![2.0 / 3.0]);

        let (u15, _) = utilities_at(&tiny(), 15.0, Utility::NetBenefit);
        let ib15 = incremental_benefit(u15.view(), 1, &[0]);
        assert_eq!(ib15.column(0).to_vec(), vec![0.0, 5.0, -5.0]);
        assert_eq!(column_means(ib15.view()), vec![0.0]);
        // the exact zero does not count as cost-effective
        assert_eq!(acceptability(ib15.view()), vec![1.0 / 3.0]);
    }

    #[test]
    fn voi_on_tiny() {
        let (u, _) = utilities_at(&tiny(), 20.0, Utility::NetBenefit);
        let ustar = max_utility(u.view());
        assert_eq!(ustar, vec![15.0, 25.0, 10.0]);
        let expected = column_means(u.view());
        let best = optimal_arm(&expected, 1);
        assert_eq!(best, 1);
        let ol = opportunity_loss(u.view(), &ustar, best);
        assert_eq!(ol, vec![0.0, 0.0, 5.0]);
        let vi = value_of_information(&ustar, &expected);
        assert_eq!(vi, vec![0.0, 10.0, -5.0]);
        assert_eq!(mean(&ol), 5.0 / 3.0);
        assert_eq!(mean(&vi), 5.0 / 3.0);
    }

    #[test]
    fn optimal_arm_ties_prefer_reference() {
        assert_eq!(optimal_arm(&[5.0, 5.0], 1), 1);
        assert_eq!(optimal_arm(&[5.0, 5.0, 1.0], 2), 0);
        assert_eq!(optimal_arm(&[1.0, 7.0, 7.0], 0), 1);
        assert_eq!(winning_arm([3.0, 3.0, 1.0]), 0);
        assert_eq!(winning_arm([1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn icer_cases() {
        let i = Icer::new(1.0, 15.0);
        assert_eq!(i.value, Some(15.0));
        assert_eq!(i.effect_sign(), 1);
        assert_eq!(Icer::new(2.0, 0.0).value, Some(0.0));
        let undefined = Icer::new(0.0, 3.0);
        assert_eq!(undefined.value, None);
        assert_eq!(undefined.effect_sign(), 0);
        assert_eq!(serde_json::to_value(undefined).unwrap()["value"], serde_json::Value::Null);
    }

    #[test]
    fn kstar_from_decision_changes() {
        let grid = WtpGrid::equally_spaced(30.0, 7).unwrap();
        assert_eq!(compute_kstar(&grid, &[0, 0, 0, 1, 1, 1, 1]), vec![15.0]);
        assert!(compute_kstar(&grid, &[1; 7]).is_empty());
        assert_eq!(compute_kstar(&grid, &[0, 1, 1, 2, 2, 0, 0]), vec![5.0, 15.0, 25.0]);
    }

    #[test]
    fn cube_functions_agree_with_kernels() {
        let d = tiny();
        let grid = WtpGrid::equally_spaced(30.0, 7).unwrap();
        let u = compute_u(&d, &grid);
        assert_eq!(u.dim(), (3, 7, 2));
        let ib = compute_ib(u.view(), 1, &[0]);
        let eib = compute_eib(ib.view());
        for (ki, &k) in grid.values().iter().enumerate() {
            assert_eq!(eib[[ki, 0]], k * 1.0 - 15.0);
        }
        let best = compute_best(u.view(), 1);
        assert_eq!(best, vec![0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(compute_kstar(&grid, &best), vec![15.0]);
        let ustar = compute_ustar(u.view());
        let ol = compute_ol(u.view(), &ustar, &best);
        let vi = compute_vi(u.view(), &ustar);
        assert_eq!(ol.column(4).to_vec(), vec![0.0, 0.0, 5.0]);
        assert_eq!(vi.column(4).to_vec(), vec![0.0, 10.0, -5.0]);
        let evi = compute_evi(&ol);
        assert_eq!(evi[4], 5.0 / 3.0);
        assert_eq!(compute_ceac(ib.view())[[4, 0]], 2.0 / 3.0);
        let de = increments(d.effects(), 1, &[0]);
        let dc = increments(d.costs(), 1, &[0]);
        assert_eq!(compute_icer(&de, &dc)[0].value, Some(15.0));
    }

    #[test]
    fn risk_averse_utility() {
        let (u, clamped) = Utility::RiskAverse { r: 0.005 }.eval(10.0);
        assert!((u - 9.754_115_099_857_197).abs() < 1e-12);
        assert!(!clamped);
        assert_eq!(Utility::RiskAverse { r: 0.0 }.eval(-3.5), (-3.5, false));
        let (big, clamped) = Utility::RiskAverse { r: 1.0 }.eval(-1e6);
        assert!(clamped && big.is_finite());
    }
}
