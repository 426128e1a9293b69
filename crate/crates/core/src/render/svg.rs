use std::fmt::Write;

use super::spec::{Annotation, Axis, LegendPosition, PlotSpec, SeriesStyle};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const ICER_COLOR: &str = "#e41a1c";

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Two decimals, with negative zero printed as zero.
fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (0..10)
        .find(|&d| {
            let scaled = step * 10f64.powi(d);
            (scaled - scaled.round()).abs() < 1e-6 * scaled.max(1.0)
        })
        .unwrap_or(10) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// About five round tick positions inside `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), step)
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn new(ox: f64, oy: f64, x: &Axis, y: &Axis) -> Self {
        Frame {
            x0: ox + LEFT,
            y0: oy + TOP,
            w: WIDTH - LEFT - RIGHT,
            h: HEIGHT - TOP - BOTTOM,
            xr: (x.min, x.max),
            yr: (y.min, y.max),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn pt(&self, p: [f64; 2]) -> String {
        format!("{},{}", num(self.px(p[0])), num(self.py(p[1])))
    }

    fn points(&self, data: &[[f64; 2]]) -> String {
        data.iter().map(|p| self.pt(*p)).collect::<Vec<_>>().join(" ")
    }
}

fn axes(out: &mut String, f: &Frame, spec: &PlotSpec) {
    let (bx, by) = (f.x0, f.y0 + f.h);
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000"/>"##,
        num(f.x0),
        num(f.y0),
        num(f.w),
        num(f.h)
    );
    let (xt, xs) = nice_ticks(f.xr.0, f.xr.1);
    for t in xt {
        let x = f.px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#000000"/><text x="{0}" y="{3}" text-anchor="middle" font-size="11">{4}</text>"##,
            num(x),
            num(by),
            num(by + 5.0),
            num(by + 18.0),
            tick_label(t, xs)
        );
    }
    let y_ticks: Vec<(f64, String)> = if spec.y_axis.ticks.is_empty() {
        let (yt, ys) = nice_ticks(f.yr.0, f.yr.1);
        yt.into_iter().map(|t| (t, tick_label(t, ys))).collect()
    } else {
        spec.y_axis.ticks.clone()
    };
    for (t, label) in y_ticks {
        let y = f.py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#000000"/><text x="{3}" y="{4}" text-anchor="end" font-size="11">{5}</text>"##,
            num(bx - 5.0),
            num(y),
            num(bx),
            num(bx - 8.0),
            num(y + 4.0),
            escape(&label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        num(f.x0 + f.w / 2.0),
        num(by + 40.0),
        escape(&spec.x_axis.title)
    );
    let (tx, ty) = (f.x0 - 56.0, f.y0 + f.h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{0}" y="{1}" text-anchor="middle" font-size="13" transform="rotate(-90 {0} {1})">{2}</text>"#,
        num(tx),
        num(ty),
        escape(&spec.y_axis.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        num(f.x0 + f.w / 2.0),
        num(f.y0 - 14.0),
        escape(&spec.title)
    );
}

fn annotation(out: &mut String, f: &Frame, a: &Annotation) {
    match a {
        Annotation::Region { points, .. } => {
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="#d9d9d9" fill-opacity="0.5" stroke="none"/>"##,
                f.points(points)
            );
        }
        Annotation::Line { label, from, to } => {
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#404040" stroke-dasharray="6 4"/>"##,
                num(f.px(from[0])),
                num(f.py(from[1])),
                num(f.px(to[0])),
                num(f.py(to[1]))
            );
            let _ = writeln!(
                out,
                r##"<text x="{}" y="{}" text-anchor="end" font-size="11" fill="#404040">{}</text>"##,
                num(f.px(to[0]) - 4.0),
                num(f.py(to[1]) + 14.0),
                escape(label)
            );
        }
        Annotation::VLine { x, label } => {
            let px = f.px(*x);
            let _ = writeln!(
                out,
                r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#808080" stroke-dasharray="3 3"/>"##,
                num(px),
                num(f.y0),
                num(f.y0 + f.h)
            );
            if !label.is_empty() {
                let _ = writeln!(
                    out,
                    r##"<text x="{}" y="{}" font-size="11" fill="#404040">{}</text>"##,
                    num(px + 3.0),
                    num(f.y0 + 12.0),
                    escape(label)
                );
            }
        }
        Annotation::HLine { y, .. } => {
            let py = f.py(*y);
            let _ = writeln!(
                out,
                r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#808080" stroke-dasharray="3 3"/>"##,
                num(f.x0),
                num(py),
                num(f.x0 + f.w)
            );
        }
        Annotation::IcerMarker { x, y, label } => {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="4" fill="{ICER_COLOR}"/>"#,
                num(f.px(*x)),
                num(f.py(*y))
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end" font-size="12" fill="{ICER_COLOR}">{}</text>"#,
                num(f.x0 + f.w - 6.0),
                num(f.y0 + 16.0),
                escape(label)
            );
        }
        Annotation::Text { x, y, text } => {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
                num(f.px(*x) + 4.0),
                num(f.py(*y) - 4.0),
                escape(text)
            );
        }
        Annotation::Quadrants { ne, nw, sw, se } => {
            let corners = [
                (f.x0 + f.w - 6.0, f.y0 + 30.0, "end", ne),
                (f.x0 + 6.0, f.y0 + 30.0, "start", nw),
                (f.x0 + 6.0, f.y0 + f.h - 8.0, "start", sw),
                (f.x0 + f.w - 6.0, f.y0 + f.h - 8.0, "end", se),
            ];
            for (x, y, anchor, p) in corners {
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="{anchor}" font-size="11">Pr = {:.3}</text>"#,
                    num(x),
                    num(y),
                    p
                );
            }
        }
    }
}

fn series(out: &mut String, f: &Frame, spec: &PlotSpec) {
    for s in &spec.series {
        let c = &s.color;
        match s.style {
            SeriesStyle::Points => {
                for p in &s.data {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{}" cy="{}" r="1.8" fill="{c}" fill-opacity="0.6"/>"#,
                        num(f.px(p[0])),
                        num(f.py(p[1]))
                    );
                }
            }
            SeriesStyle::Line => {
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                    f.points(&s.data)
                );
            }
            SeriesStyle::Step => {
                let mut d = String::new();
                for (i, p) in s.data.iter().enumerate() {
                    if i == 0 {
                        let _ = write!(d, "M{}", f.pt(*p));
                    } else {
                        let _ = write!(d, " H{} V{}", num(f.px(p[0])), num(f.py(p[1])));
                    }
                }
                let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="1.5"/>"#);
            }
            SeriesStyle::Bars => {
                for p in &s.data {
                    let (x0, x1) = (f.px(0.0f64.max(f.xr.0)), f.px(p[0]));
                    let (ya, yb) = (f.py(p[1] + 0.35), f.py(p[1] - 0.35));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{c}"/>"#,
                        num(x0.min(x1)),
                        num(ya),
                        num((x1 - x0).abs()),
                        num(yb - ya)
                    );
                }
            }
            SeriesStyle::Band => {
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{c}" fill-opacity="0.5" stroke="none"/>"#,
                    f.points(&s.data)
                );
            }
            SeriesStyle::Segments => {
                let mut d = String::new();
                for pair in s.data.chunks_exact(2) {
                    let _ = write!(d, "M{} L{} ", f.pt(pair[0]), f.pt(pair[1]));
                }
                let _ = writeln!(
                    out,
                    r#"<path d="{}" fill="none" stroke="{c}" stroke-width="1.2"/>"#,
                    d.trim_end()
                );
            }
        }
    }
}

fn legend(out: &mut String, f: &Frame, spec: &PlotSpec) {
    let labels: Vec<_> = spec.series.iter().filter(|s| !s.label.is_empty()).collect();
    if spec.legend == LegendPosition::Hidden || labels.is_empty() {
        return;
    }
    let width = 24.0 + 6.5 * labels.iter().map(|s| s.label.chars().count()).max().unwrap_or(0) as f64;
    let height = 8.0 + 16.0 * labels.len() as f64;
    let (lx, ly) = match spec.legend {
        LegendPosition::TopLeft => (f.x0 + 8.0, f.y0 + 8.0),
        LegendPosition::TopRight | LegendPosition::Hidden => (f.x0 + f.w - width - 8.0, f.y0 + 24.0),
        LegendPosition::BottomLeft => (f.x0 + 8.0, f.y0 + f.h - height - 8.0),
        LegendPosition::BottomRight => (f.x0 + f.w - width - 8.0, f.y0 + f.h - height - 8.0),
    };
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#ffffff" fill-opacity="0.85" stroke="#808080"/>"##,
        num(lx),
        num(ly),
        num(width),
        num(height)
    );
    for (i, s) in labels.iter().enumerate() {
        let y = ly + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="8" fill="{}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            num(lx + 6.0),
            num(y - 8.0),
            s.color,
            num(lx + 22.0),
            num(y),
            escape(&s.label)
        );
    }
}

fn panel(out: &mut String, spec: &PlotSpec, ox: f64, oy: f64, id: usize) {
    let f = Frame::new(ox, oy, &spec.x_axis, &spec.y_axis);
    let _ = writeln!(
        out,
        r#"<clipPath id="plot-area-{id}"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#,
        num(f.x0),
        num(f.y0),
        num(f.w),
        num(f.h)
    );
    let _ = writeln!(out, r#"<g clip-path="url(#plot-area-{id})">"#);
    let (under, over): (Vec<_>, Vec<_>) = spec
        .annotations
        .iter()
        .partition(|a| matches!(a, Annotation::Region { .. }));
    for a in under {
        annotation(out, &f, a);
    }
    series(out, &f, spec);
    for a in over {
        annotation(out, &f, a);
    }
    out.push_str("</g>\n");
    axes(out, &f, spec);
    legend(out, &f, spec);
}

/// Renders a plot to a standalone SVG 1.1 document. The output depends only
/// on `spec`.
pub fn render_svg(spec: &PlotSpec) -> String {
    let cells: Vec<&PlotSpec> = if spec.panels.is_empty() {
        vec![spec]
    } else {
        spec.panels.iter().collect()
    };
    let cols = if cells.len() > 1 { 2 } else { 1 };
    let rows = cells.len().div_ceil(cols);
    let (w, h) = (WIDTH * cols as f64, HEIGHT * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif">"#,
        w, h
    );
    out.push_str(r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    out.push('\n');
    for (i, cell) in cells.iter().enumerate() {
        let (ox, oy) = (WIDTH * (i % cols) as f64, HEIGHT * (i / cols) as f64);
        panel(&mut out, cell, ox, oy, i);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        let (t, step) = nice_ticks(0.0, 50000.0);
        assert_eq!(step, 10000.0);
        assert_eq!(t, vec![0.0, 10000.0, 20000.0, 30000.0, 40000.0, 50000.0]);
        let (t, _) = nice_ticks(-0.04, 1.04);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(tick_label(-0.0, 0.2), "0.0");
    }

    #[test]
    fn escapes_text() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
