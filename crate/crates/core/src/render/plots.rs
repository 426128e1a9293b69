use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::extensions::{MixedStrategy, MultiCeResult, RiskAversionSet};
use crate::summary::format_signif;
use crate::voi::{EvppiResult, InfoRank};

use super::ceef::{efficiency_frontier, FrontierStatus};
use super::kde::{density1, density2, DEFAULT_LEVELS};
use super::spec::{color, Annotation, LegendPosition, PlotKind, PlotSpec, Series, SeriesStyle};

fn series(label: impl Into<String>, style: SeriesStyle, color: String, data: Vec<[f64; 2]>) -> Series {
    Series {
        label: label.into(),
        style,
        color,
        data,
    }
}

fn finish(mut spec: PlotSpec, x_include: &[f64], y_include: &[f64]) -> Result<PlotSpec> {
    spec.fit_axes(x_include, y_include);
    spec.validate()?;
    Ok(spec)
}

fn check_k(analysis: &Analysis, k: f64) -> Result<()> {
    let kmax = analysis.grid().kmax();
    if k.is_finite() && (0.0..=kmax).contains(&k) {
        Ok(())
    } else {
        Err(Error::WtpOutOfRange { k, kmax })
    }
}

fn comparison_label(analysis: &Analysis, position: usize) -> String {
    format!(
        "{} vs {}",
        analysis.label(analysis.reference()),
        analysis.label(analysis.comparisons()[position])
    )
}

/// Positions in the comparator list selected by an optional arm index.
fn selected(analysis: &Analysis, comparison: Option<usize>) -> Result<Vec<usize>> {
    match comparison {
        Some(arm) => Ok(vec![analysis.comparison_position(arm)?]),
        None => Ok((0..analysis.comparisons().len()).collect()),
    }
}

fn single(analysis: &Analysis, comparison: Option<usize>) -> Result<usize> {
    match comparison {
        Some(arm) => analysis.comparison_position(arm),
        None => Ok(0),
    }
}

fn scatter(analysis: &Analysis, j: usize) -> Vec<[f64; 2]> {
    let (de, dc) = (analysis.delta_e(), analysis.delta_c());
    (0..analysis.n_sim()).map(|s| [de[[s, j]], dc[[s, j]]]).collect()
}

fn grid_curve(analysis: &Analysis, values: impl Iterator<Item = f64>) -> Vec<[f64; 2]> {
    analysis.grid().values().iter().zip(values).map(|(&k, v)| [k, v]).collect()
}

/// Part of the line `y = k·x` inside the box.
fn clip_line(k: f64, x: (f64, f64), y: (f64, f64)) -> Option<([f64; 2], [f64; 2])> {
    let (mut lo, mut hi) = x;
    if k == 0.0 {
        if !(y.0 <= 0.0 && 0.0 <= y.1) {
            return None;
        }
    } else {
        let (a, b) = (y.0 / k, y.1 / k);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo <= hi).then(|| ([lo, (k * lo).clamp(y.0, y.1)], [hi, (k * hi).clamp(y.0, y.1)]))
}

/// The box intersected with the half-plane `y <= k·x`.
fn below_line(k: f64, x: (f64, f64), y: (f64, f64)) -> Vec<[f64; 2]> {
    let corners = [[x.0, y.0], [x.1, y.0], [x.1, y.1], [x.0, y.1]];
    let side = |p: [f64; 2]| k * p[0] - p[1];
    let mut out = Vec::new();
    for i in 0..4 {
        let (p, q) = (corners[i], corners[(i + 1) % 4]);
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            let cut = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            out.push([cut[0].clamp(x.0, x.1), cut[1].clamp(y.0, y.1)]);
        }
    }
    out
}

fn add_wtp_annotations(spec: &mut PlotSpec, k: f64, region: bool) {
    let x = (spec.x_axis.min, spec.x_axis.max);
    let y = (spec.y_axis.min, spec.y_axis.max);
    if region {
        let points = below_line(k, x, y);
        if points.len() >= 3 {
            spec.annotations.push(Annotation::Region {
                label: "Sustainability area".into(),
                points,
            });
        }
    }
    if let Some((from, to)) = clip_line(k, x, y) {
        spec.annotations.push(Annotation::Line {
            label: format!("k = {}", format_signif(k, 6)),
            from,
            to,
        });
    }
}

/// Cost-effectiveness plane: `(Δe, Δc)` per simulation and comparison, the
/// willingness-to-pay line and sustainability area, and the ICER when a
/// single comparison is shown.
pub fn ceplane_spec(analysis: &Analysis, comparison: Option<usize>, k: f64) -> Result<PlotSpec> {
    check_k(analysis, k)?;
    let positions = selected(analysis, comparison)?;
    let mut spec = PlotSpec::new(
        PlotKind::Ceplane,
        "Cost-effectiveness plane",
        "Effectiveness differential",
        "Cost differential",
    );
    for &j in &positions {
        let arm = analysis.comparisons()[j];
        spec.series.push(series(comparison_label(analysis, j), SeriesStyle::Points, color(arm), scatter(analysis, j)));
    }
    if let [j] = positions[..] {
        let icer = &analysis.icer()[j];
        let label = match icer.value {
            Some(v) => format!("ICER = {}", format_signif(v, 6)),
            None => "ICER undefined".to_string(),
        };
        spec.annotations.push(Annotation::IcerMarker {
            x: icer.mean_delta_e,
            y: icer.mean_delta_c,
            label,
        });
    }
    spec.fit_axes(&[0.0], &[0.0]);
    add_wtp_annotations(&mut spec, k, true);
    spec.validate()?;
    Ok(spec)
}

/// Pairwise acceptability curves, one per comparison.
pub fn ceac_spec(analysis: &Analysis) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::Ceac,
        "Cost-effectiveness acceptability curve",
        "Willingness to pay",
        "Probability of cost-effectiveness",
    )
    .with_legend(LegendPosition::BottomRight);
    for j in 0..analysis.comparisons().len() {
        let arm = analysis.comparisons()[j];
        let data = grid_curve(analysis, analysis.ceac().column(j).iter().copied());
        spec.series.push(series(comparison_label(analysis, j), SeriesStyle::Line, color(arm), data));
    }
    finish(spec, &[], &[0.0, 1.0])
}

/// Simultaneous acceptability curves, one per included arm; they sum to one
/// at every k.
pub fn multi_ceac_spec(analysis: &Analysis, multi: &MultiCeResult) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::Ceac,
        "Probability of being the most cost-effective intervention",
        "Willingness to pay",
        "Probability of most cost-effective",
    );
    for &t in &multi.included {
        let data = grid_curve(analysis, multi.p_best.column(t).iter().copied());
        spec.series.push(series(analysis.label(t), SeriesStyle::Line, color(t), data));
    }
    finish(spec, &[], &[0.0, 1.0])
}

/// Acceptability frontier: probability of the expected-utility-optimal arm.
pub fn ceaf_spec(analysis: &Analysis, multi: &MultiCeResult) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::Ceaf,
        "Cost-effectiveness acceptability frontier",
        "Willingness to pay",
        "Probability of most cost-effective",
    );
    spec.series.push(series(
        "CEAF",
        SeriesStyle::Step,
        color(0),
        grid_curve(analysis, multi.ceaf.iter().copied()),
    ));
    finish(spec, &[], &[0.0, 1.0])
}

/// Expected incremental benefit per comparison with break-even markers.
pub fn eib_spec(analysis: &Analysis) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::Eib,
        "Expected incremental benefit",
        "Willingness to pay",
        "EIB",
    );
    for j in 0..analysis.comparisons().len() {
        let arm = analysis.comparisons()[j];
        let data = grid_curve(analysis, analysis.eib().column(j).iter().copied());
        spec.series.push(series(comparison_label(analysis, j), SeriesStyle::Line, color(arm), data));
    }
    spec.annotations.push(Annotation::HLine {
        y: 0.0,
        label: String::new(),
    });
    for &k in analysis.kstar() {
        spec.annotations.push(Annotation::VLine {
            x: k,
            label: format!("k* = {}", format_signif(k, 6)),
        });
    }
    finish(spec, &[], &[0.0])
}

fn evi_base(analysis: &Analysis, title: &str) -> PlotSpec {
    let mut spec = PlotSpec::new(PlotKind::Evi, title, "Willingness to pay", "EVPI")
        .with_legend(LegendPosition::TopLeft);
    spec.series.push(series(
        "EVPI",
        SeriesStyle::Line,
        color(0),
        grid_curve(analysis, analysis.evi().iter().copied()),
    ));
    spec
}

pub fn evi_spec(analysis: &Analysis) -> Result<PlotSpec> {
    finish(evi_base(analysis, "Expected value of perfect information"), &[], &[0.0])
}

/// EVPI of the optimal strategy with the mixed-strategy curve overlaid.
pub fn evi_mixed_spec(analysis: &Analysis, mixed: &MixedStrategy) -> Result<PlotSpec> {
    let mut spec = evi_base(analysis, "Expected value of perfect information: optimal and mixed strategy");
    spec.series[0].label = "Optimal strategy".into();
    spec.series.push(series(
        "Mixed strategy",
        SeriesStyle::Line,
        color(1),
        grid_curve(analysis, mixed.evi.iter().copied()),
    ));
    finish(spec, &[], &[0.0])
}

fn r_label(r: f64) -> String {
    format!("r = {}", format_signif(r, 6))
}

/// The pair of EIB and EVPI plots across risk-aversion coefficients.
pub fn riskav_specs(analysis: &Analysis, set: &RiskAversionSet) -> Result<(PlotSpec, PlotSpec)> {
    if set.entries.is_empty() {
        return Err(Error::Unavailable("no risk-aversion coefficients".into()));
    }
    let mut eib = PlotSpec::new(
        PlotKind::Eib,
        "Expected incremental benefit and risk aversion",
        "Willingness to pay",
        "EIB",
    );
    let mut evi = PlotSpec::new(
        PlotKind::Evi,
        "Expected value of perfect information and risk aversion",
        "Willingness to pay",
        "EVPI",
    )
    .with_legend(LegendPosition::TopLeft);
    let n_comp = analysis.comparisons().len();
    for (i, entry) in set.entries.iter().enumerate() {
        for j in 0..n_comp {
            let label = if n_comp == 1 {
                r_label(entry.r)
            } else {
                format!("{}, {}", comparison_label(analysis, j), r_label(entry.r))
            };
            let data = grid_curve(analysis, entry.eib.column(j).iter().copied());
            eib.series.push(series(label, SeriesStyle::Line, color(i * n_comp + j), data));
        }
        evi.series.push(series(
            r_label(entry.r),
            SeriesStyle::Line,
            color(i),
            grid_curve(analysis, entry.evi.iter().copied()),
        ));
    }
    eib.annotations.push(Annotation::HLine {
        y: 0.0,
        label: String::new(),
    });
    Ok((finish(eib, &[], &[0.0])?, finish(evi, &[], &[0.0])?))
}

/// Kernel density of the incremental benefit at `k`, with the positive part
/// shaded.
pub fn ib_density_spec(analysis: &Analysis, comparison: Option<usize>, k: f64) -> Result<PlotSpec> {
    check_k(analysis, k)?;
    let j = single(analysis, comparison)?;
    let ki = analysis.k_index(k)?;
    let slice = analysis.slice(ki);
    let ib: Vec<f64> = slice.ib.column(j).to_vec();
    let d = density1(&ib);

    let mut spec = PlotSpec::new(
        PlotKind::IbDensity,
        format!("Incremental benefit distribution, k = {}", format_signif(slice.k, 6)),
        "IB",
        "Density",
    );
    let mut positive: Vec<[f64; 2]> = Vec::new();
    for i in 0..d.x.len() {
        if d.x[i] < 0.0 {
            continue;
        }
        if positive.is_empty() {
            if i == 0 {
                positive.push([d.x[0], 0.0]);
            } else {
                let (x0, x1, y0, y1) = (d.x[i - 1], d.x[i], d.y[i - 1], d.y[i]);
                positive.push([0.0, 0.0]);
                positive.push([0.0, y0 + (y1 - y0) * (-x0) / (x1 - x0)]);
            }
        }
        positive.push([d.x[i], d.y[i]]);
    }
    if let Some(&[x, _]) = positive.last() {
        positive.push([x, 0.0]);
    }
    let arm = analysis.comparisons()[j];
    if positive.len() > 3 {
        spec.series.push(series("IB > 0", SeriesStyle::Band, "#bdbdbd".into(), positive));
    }
    let curve = d.x.iter().zip(&d.y).map(|(&x, &y)| [x, y]).collect();
    spec.series.push(series(comparison_label(analysis, j), SeriesStyle::Line, color(arm), curve));
    spec.annotations.push(Annotation::VLine {
        x: 0.0,
        label: String::new(),
    });
    finish(spec, &[0.0], &[0.0])
}

/// Shares of `(Δe, Δc)` points per quadrant; points on an axis count towards
/// the non-negative side.
pub fn quadrant_proportions(analysis: &Analysis, position: usize) -> [f64; 4] {
    let mut counts = [0usize; 4];
    for p in scatter(analysis, position) {
        let q = match (p[0] >= 0.0, p[1] >= 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        };
        counts[q] += 1;
    }
    let n = analysis.n_sim() as f64;
    counts.map(|c| c as f64 / n)
}

/// Density contours over the cost-effectiveness plane. When the scatter has
/// zero spread in either direction only the points are drawn.
pub fn contour_spec(analysis: &Analysis, comparison: Option<usize>, levels: Option<&[f64]>) -> Result<PlotSpec> {
    let j = single(analysis, comparison)?;
    let levels = levels.unwrap_or(&DEFAULT_LEVELS);
    if let Some(&bad) = levels.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Unavailable(format!("contour level {bad} is not in (0, 1)")));
    }
    let points = scatter(analysis, j);
    let arm = analysis.comparisons()[j];
    let mut spec = PlotSpec::new(
        PlotKind::Contour,
        "Cost-effectiveness plane contour plot",
        "Effectiveness differential",
        "Cost differential",
    );
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    spec.series.push(series(comparison_label(analysis, j), SeriesStyle::Points, color(arm), points));
    match density2(&xs, &ys) {
        Some(d) => {
            for (i, &p) in levels.iter().enumerate() {
                let data = d.contour(d.hdr_threshold(p)).into_iter().flatten().collect();
                let label = format!("{}% region", format_signif(100.0 * p, 4));
                spec.series.push(series(label, SeriesStyle::Segments, color(4 + i), data));
            }
        }
        None => spec.annotations.push(Annotation::Text {
            x: xs[0],
            y: ys[0],
            text: "contours unavailable: zero spread".into(),
        }),
    }
    spec.fit_axes(&[0.0], &[0.0]);
    spec.validate()?;
    Ok(spec)
}

/// Contours plus quadrant proportions and the willingness-to-pay line.
pub fn contour2_spec(
    analysis: &Analysis,
    comparison: Option<usize>,
    k: f64,
    levels: Option<&[f64]>,
) -> Result<PlotSpec> {
    check_k(analysis, k)?;
    let mut spec = contour_spec(analysis, comparison, levels)?;
    let [ne, nw, sw, se] = quadrant_proportions(analysis, single(analysis, comparison)?);
    spec.annotations.push(Annotation::Quadrants { ne, nw, sw, se });
    add_wtp_annotations(&mut spec, k, false);
    spec.validate()?;
    Ok(spec)
}

/// Efficiency frontier over the per-arm mean effects and costs.
pub fn ceef_spec(analysis: &Analysis) -> Result<PlotSpec> {
    let d = analysis.dataset();
    let (e, c) = (d.mean_effects(), d.mean_costs());
    let points: Vec<(f64, f64)> = e.iter().copied().zip(c.iter().copied()).collect();
    let frontier = efficiency_frontier(&points);
    let mut spec = PlotSpec::new(
        PlotKind::Ceef,
        "Cost-effectiveness efficiency frontier",
        "Mean effectiveness",
        "Mean cost",
    )
    .with_legend(LegendPosition::BottomRight);
    spec.series.push(series(
        "Frontier",
        SeriesStyle::Line,
        color(0),
        frontier.arms.iter().map(|&t| [e[t], c[t]]).collect(),
    ));
    for (status, label, idx) in [
        (FrontierStatus::Efficient, "Efficient", 1),
        (FrontierStatus::Dominated, "Dominated", 2),
        (FrontierStatus::ExtendedDominated, "Extended dominated", 3),
    ] {
        let data: Vec<[f64; 2]> = (0..points.len())
            .filter(|&t| frontier.status[t] == status)
            .map(|t| [e[t], c[t]])
            .collect();
        if !data.is_empty() {
            spec.series.push(series(label, SeriesStyle::Points, color(idx), data));
        }
    }
    for t in 0..points.len() {
        spec.annotations.push(Annotation::Text {
            x: e[t],
            y: c[t],
            text: analysis.label(t).to_string(),
        });
    }
    finish(spec, &[], &[])
}

/// Horizontal bars of each parameter's share of the EVPI, largest on top.
pub fn info_rank_spec(rank: &InfoRank) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::InfoRank,
        format!("Info-rank plot, k = {}", format_signif(rank.k, 6)),
        "Proportion of total EVPI",
        "",
    )
    .with_legend(LegendPosition::Hidden);
    let n = rank.entries.len();
    let data = rank
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| [e.proportion, (n - i) as f64])
        .collect();
    spec.series.push(series("EVPPI / EVPI", SeriesStyle::Bars, color(0), data));
    spec = finish(spec, &[0.0, 1.0], &[0.5, n as f64 + 0.5])?;
    spec.y_axis.ticks = rank
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| ((n - i) as f64, e.param.clone()))
        .collect();
    Ok(spec)
}

/// EVPPI of a parameter subset against the EVPI.
pub fn evppi_spec(result: &EvppiResult) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(
        PlotKind::Evi,
        format!("EVPPI for {}", result.params.join(", ")),
        "Willingness to pay",
        "Value of information",
    )
    .with_legend(LegendPosition::TopLeft);
    let curve = |v: &[f64]| result.k.iter().zip(v).map(|(&k, &y)| [k, y]).collect();
    spec.series.push(series("EVPI", SeriesStyle::Line, color(0), curve(&result.evpi)));
    spec.series.push(series(
        format!("EVPPI ({})", result.method.label()),
        SeriesStyle::Line,
        color(1),
        curve(&result.evppi),
    ));
    finish(spec, &[], &[0.0])
}

/// Two-by-two panel: cost-effectiveness plane, EIB, CEAC and EVPI.
pub fn grid_spec(analysis: &Analysis, k: f64) -> Result<PlotSpec> {
    let mut spec = PlotSpec::new(PlotKind::Grid, "Cost-effectiveness analysis", "", "");
    spec.panels = vec![
        ceplane_spec(analysis, None, k)?,
        eib_spec(analysis)?,
        ceac_spec(analysis)?,
        evi_spec(analysis)?,
    ];
    spec.legend = LegendPosition::Hidden;
    spec.validate()?;
    Ok(spec)
}
