use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Ceplane,
    Ceac,
    Ceaf,
    Ceef,
    Eib,
    Evi,
    IbDensity,
    Contour,
    InfoRank,
    Grid,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Ceplane => "ceplane",
            PlotKind::Ceac => "ceac",
            PlotKind::Ceaf => "ceaf",
            PlotKind::Ceef => "ceef",
            PlotKind::Eib => "eib",
            PlotKind::Evi => "evi",
            PlotKind::IbDensity => "ib-density",
            PlotKind::Contour => "contour",
            PlotKind::InfoRank => "info-rank",
            PlotKind::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStyle {
    Points,
    Line,
    /// Horizontal-then-vertical steps between consecutive points.
    Step,
    /// Horizontal bars: `x` is the bar length, `y` its position.
    Bars,
    /// Closed polygon, filled.
    Band,
    /// Independent segments: points `2i` and `2i + 1` form one segment.
    Segments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub color: String,
    pub data: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub title: String,
    pub min: f64,
    pub max: f64,
    /// Labelled tick positions; automatic ticks when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ticks: Vec<(f64, String)>,
}

impl Axis {
    pub fn new(title: impl Into<String>) -> Self {
        Axis {
            title: title.into(),
            min: 0.0,
            max: 1.0,
            ticks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Annotation {
    /// Mean incremental effect and cost, with the ICER value.
    IcerMarker { x: f64, y: f64, label: String },
    /// Filled region, e.g. the sustainability area below the k-line.
    Region { label: String, points: Vec<[f64; 2]> },
    /// Straight reference line, e.g. the willingness-to-pay line.
    Line {
        label: String,
        from: [f64; 2],
        to: [f64; 2],
    },
    VLine { x: f64, label: String },
    HLine { y: f64, label: String },
    Text { x: f64, y: f64, text: String },
    /// Share of points in each quadrant of the plane.
    Quadrants {
        ne: f64,
        nw: f64,
        sw: f64,
        se: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegendPosition {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Hidden,
}

impl std::str::FromStr for LegendPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "top-left" => LegendPosition::TopLeft,
            "top-right" => LegendPosition::TopRight,
            "bottom-left" => LegendPosition::BottomLeft,
            "bottom-right" => LegendPosition::BottomRight,
            "hidden" | "none" => LegendPosition::Hidden,
            other => return Err(Error::Unavailable(format!("unknown legend position {other:?}"))),
        })
    }
}

/// Renderer-independent description of one figure (or a panel of figures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
    pub legend: LegendPosition,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panels: Vec<PlotSpec>,
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Colour assigned to an arm (or any indexed series).
pub fn color(index: usize) -> String {
    PALETTE[index % PALETTE.len()].to_string()
}

fn span(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    let width = hi - lo;
    if width > 0.0 {
        (lo - 0.04 * width, hi + 0.04 * width)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>, x: &str, y: &str) -> Self {
        PlotSpec {
            kind,
            title: title.into(),
            x_axis: Axis::new(x),
            y_axis: Axis::new(y),
            series: Vec::new(),
            annotations: Vec::new(),
            legend: LegendPosition::TopRight,
            panels: Vec::new(),
        }
    }

    pub fn with_legend(mut self, position: LegendPosition) -> Self {
        self.legend = position;
        for panel in &mut self.panels {
            panel.legend = position;
        }
        self
    }

    fn annotation_points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::new();
        for a in &self.annotations {
            match a {
                Annotation::IcerMarker { x, y, .. } | Annotation::Text { x, y, .. } => pts.push([*x, *y]),
                Annotation::Region { points, .. } => pts.extend(points.iter().copied()),
                Annotation::Line { from, to, .. } => pts.extend([*from, *to]),
                Annotation::VLine { .. } | Annotation::HLine { .. } | Annotation::Quadrants { .. } => {}
            }
        }
        pts
    }

    /// Sets both axis ranges to cover every datum and annotation, padded.
    /// `x_include` / `y_include` force extra values into the ranges.
    pub(crate) fn fit_axes(&mut self, x_include: &[f64], y_include: &[f64]) {
        let mut pts: Vec<[f64; 2]> = self.series.iter().flat_map(|s| s.data.iter().copied()).collect();
        pts.extend(self.annotation_points());
        for a in &self.annotations {
            match a {
                Annotation::VLine { x, .. } => pts.push([*x, f64::NAN]),
                Annotation::HLine { y, .. } => pts.push([f64::NAN, *y]),
                _ => {}
            }
        }
        let xs = pts.iter().map(|p| p[0]).chain(x_include.iter().copied()).filter(|v| !v.is_nan());
        let ys = pts.iter().map(|p| p[1]).chain(y_include.iter().copied()).filter(|v| !v.is_nan());
        let (x0, x1) = padded(span(xs).unwrap_or((0.0, 1.0)));
        let (y0, y1) = padded(span(ys).unwrap_or((0.0, 1.0)));
        self.x_axis.min = x0;
        self.x_axis.max = x1;
        self.y_axis.min = y0;
        self.y_axis.max = y1;
    }

    /// Checks that data are finite, lie inside the axis ranges and that
    /// legend labels are unique.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Unavailable(format!("invalid {} plot: {msg}", self.kind.name())));
        for axis in [&self.x_axis, &self.y_axis] {
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.min < axis.max) {
                return bad(format!("axis {:?} has range [{}, {}]", axis.title, axis.min, axis.max));
            }
        }
        let inside = |p: &[f64; 2]| {
            p[0] >= self.x_axis.min && p[0] <= self.x_axis.max && p[1] >= self.y_axis.min && p[1] <= self.y_axis.max
        };
        let mut labels = HashSet::new();
        for s in &self.series {
            if !labels.insert(s.label.as_str()) {
                return bad(format!("duplicate legend label {:?}", s.label));
            }
            if let Some(p) = s.data.iter().find(|p| !(p[0].is_finite() && p[1].is_finite())) {
                return bad(format!("series {:?} has a non-finite point {p:?}", s.label));
            }
            if let Some(p) = s.data.iter().find(|p| !inside(p)) {
                return bad(format!("series {:?} point {p:?} is outside the axes", s.label));
            }
        }
        for p in self.annotation_points() {
            if !(p[0].is_finite() && p[1].is_finite()) || !inside(&p) {
                return bad(format!("annotation point {p:?} is outside the axes"));
            }
        }
        for panel in &self.panels {
            panel.validate()?;
        }
        Ok(())
    }
}
