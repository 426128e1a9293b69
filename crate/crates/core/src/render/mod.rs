//! Plot specifications for every figure, a deterministic SVG renderer and a
//! markdown report.

mod ceef;
mod kde;
mod plots;
mod report;
mod spec;
mod svg;

pub use ceef::{efficiency_frontier, Frontier, FrontierStatus};
pub use kde::{density1, density2, scott_bandwidth, Density1, Density2, DEFAULT_LEVELS, DENSITY_POINTS, GRID_SIZE};
pub use plots::{
    ceac_spec, ceaf_spec, ceef_spec, ceplane_spec, contour2_spec, contour_spec, eib_spec, evi_mixed_spec,
    evi_spec, evppi_spec, grid_spec, ib_density_spec, info_rank_spec, multi_ceac_spec, quadrant_proportions,
    riskav_specs,
};
pub use report::{make_report, FigureAsset, ReportDoc, ReportOptions, ReportSection};
pub use spec::{color, Annotation, Axis, LegendPosition, PlotKind, PlotSpec, Series, SeriesStyle};
pub use svg::{nice_ticks, render_svg};

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::extensions::{multi_ce, Extensions};

/// Figure names accepted by [`build_plot`].
pub const PLOT_NAMES: [&str; 14] = [
    "ceplane",
    "ceac",
    "multi-ceac",
    "ceaf",
    "ceef",
    "eib",
    "evi",
    "evi-mixed",
    "eib-riskav",
    "evi-riskav",
    "ib-density",
    "contour",
    "contour2",
    "grid",
];

/// Willingness to pay used when none is requested: the grid point nearest
/// to half the grid maximum.
pub fn default_k(analysis: &Analysis) -> f64 {
    let grid = analysis.grid();
    grid.get(grid.nearest_index(grid.kmax() / 2.0).unwrap_or(0))
}

/// Builds a figure by name. `comparison` is a 0-based arm index. `evi`
/// includes the mixed-strategy overlay when one is attached; the explicit
/// overlay names fail when their extension has not been computed.
pub fn build_plot(
    name: &str,
    analysis: &Analysis,
    extensions: &Extensions,
    k: Option<f64>,
    comparison: Option<usize>,
) -> Result<PlotSpec> {
    let k = k.unwrap_or_else(|| default_k(analysis));
    let missing = |what: &str| Error::Unavailable(format!("{name} needs {what}; compute it first"));
    let riskav = || extensions.risk_aversion.as_ref().ok_or_else(|| missing("risk-aversion results"));
    let multi = || extensions.multi_ce.clone().unwrap_or_else(|| multi_ce(analysis));
    match name {
        "ceplane" => ceplane_spec(analysis, comparison, k),
        "ceac" => ceac_spec(analysis),
        "multi-ceac" => multi_ceac_spec(analysis, &multi()),
        "ceaf" => ceaf_spec(analysis, &multi()),
        "ceef" => ceef_spec(analysis),
        "eib" => eib_spec(analysis),
        "evi" => match &extensions.mixed {
            Some(mixed) => evi_mixed_spec(analysis, mixed),
            None => evi_spec(analysis),
        },
        "evi-mixed" => evi_mixed_spec(
            analysis,
            extensions.mixed.as_ref().ok_or_else(|| missing("a mixed strategy"))?,
        ),
        "eib-riskav" => riskav_specs(analysis, riskav()?).map(|p| p.0),
        "evi-riskav" => riskav_specs(analysis, riskav()?).map(|p| p.1),
        "ib-density" => ib_density_spec(analysis, comparison, k),
        "contour" => contour_spec(analysis, comparison, None),
        "contour2" => contour2_spec(analysis, comparison, k, None),
        "grid" => grid_spec(analysis, k),
        other => Err(Error::Unavailable(format!(
            "unknown plot {other:?}; expected one of {}",
            PLOT_NAMES.join(", ")
        ))),
    }
}
