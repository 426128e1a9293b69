//! Text and tabular summaries at a single willingness-to-pay value.

use std::fmt;

use serde::Serialize;

use crate::analysis::Analysis;
use crate::error::Result;

/// Formats `x` with `digits` significant digits, without trailing zeros.
pub fn format_signif(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    trim_zeros(format!("{x:.decimals$}"))
}

/// Fixed decimals with trailing zeros removed.
pub fn format_fixed(x: f64, decimals: usize) -> String {
    trim_zeros(format!("{x:.decimals$}"))
}

fn trim_zeros(s: String) -> String {
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Right-aligned columns, left-aligned row names, single-space separators.
fn write_table(
    f: &mut fmt::Formatter<'_>,
    headers: &[&str],
    rows: &[(String, Vec<String>)],
) -> fmt::Result {
    let name_width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            rows.iter()
                .map(|(_, cells)| cells[i].chars().count())
                .chain(std::iter::once(h.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    write!(f, "{:name_width$}", "")?;
    for (h, w) in headers.iter().zip(&widths) {
        write!(f, " {h:>w$}")?;
    }
    writeln!(f)?;
    for (name, cells) in rows {
        write!(f, "{name:<name_width$}")?;
        for (c, w) in cells.iter().zip(&widths) {
            write!(f, " {c:>w$}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmUtility {
    pub label: String,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub reference: String,
    pub comparator: String,
    pub eib: f64,
    pub ceac: f64,
    /// `None` when the mean effect increment is zero.
    pub icer: Option<f64>,
}

/// One interval of the willingness-to-pay axis with its optimal arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionSegment {
    pub label: String,
    pub from: Option<f64>,
    pub to: Option<f64>,
}

/// Headline results of an analysis at one willingness-to-pay value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryBlock {
    pub reference: String,
    pub comparators: Vec<String>,
    pub decision: Vec<DecisionSegment>,
    pub kstar: Vec<f64>,
    pub kmax: f64,
    pub requested_k: f64,
    /// The grid value actually used.
    pub k: f64,
    pub utilities: Vec<ArmUtility>,
    pub comparisons: Vec<ComparisonSummary>,
    pub optimal: String,
    pub evpi: f64,
}

impl SummaryBlock {
    pub fn decision_sentence(&self) -> String {
        let num = |k: f64| format_signif(k, 5);
        match self.decision.as_slice() {
            [only] => format!(
                "choose {} for all k in [0, {}]",
                only.label,
                num(self.kmax)
            ),
            segments => {
                let parts: Vec<String> = segments
                    .iter()
                    .map(|s| match (s.from, s.to) {
                        (None, Some(to)) => format!("{} for k < {}", s.label, num(to)),
                        (Some(from), Some(to)) => {
                            format!("{} for {} <= k < {}", s.label, num(from), num(to))
                        }
                        (Some(from), None) => format!("{} for k >= {}", s.label, num(from)),
                        (None, None) => s.label.clone(),
                    })
                    .collect();
                let (last, head) = parts.split_last().expect("at least two segments");
                format!("choose {} and {}", head.join(", "), last)
            }
        }
    }
}

impl fmt::Display for SummaryBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Cost-effectiveness analysis summary")?;
        writeln!(f)?;
        writeln!(f, "Reference intervention:  {}", self.reference)?;
        if let [only] = self.comparators.as_slice() {
            writeln!(f, "Comparator intervention: {only}")?;
        } else {
            let lead = "Comparator intervention(s):";
            for (i, c) in self.comparators.iter().enumerate() {
                if i == 0 {
                    writeln!(f, "{lead} {c}")?;
                } else {
                    writeln!(f, "{:>w$} {c}", ":", w = lead.len())?;
                }
            }
        }
        writeln!(f)?;
        writeln!(f, "Optimal decision: {}", self.decision_sentence())?;
        writeln!(f)?;
        let k = format_signif(self.k, 5);
        writeln!(f, "Analysis for willingness to pay parameter k = {k}")?;
        if self.k != self.requested_k {
            writeln!(
                f,
                "(requested k = {} snapped to the nearest grid value)",
                format_signif(self.requested_k, 6)
            )?;
        }
        writeln!(f)?;
        let rows: Vec<(String, Vec<String>)> = self
            .utilities
            .iter()
            .map(|u| (u.label.clone(), vec![format_signif(u.expected_utility, 5)]))
            .collect();
        write_table(f, &["Expected utility"], &rows)?;
        writeln!(f)?;
        let rows: Vec<(String, Vec<String>)> = self
            .comparisons
            .iter()
            .map(|c| {
                (
                    format!("{} vs {}", c.reference, c.comparator),
                    vec![
                        format_signif(c.eib, 5),
                        format_fixed(c.ceac, 3),
                        c.icer.map_or_else(|| "NA".into(), |v| format_signif(v, 5)),
                    ],
                )
            })
            .collect();
        write_table(f, &["EIB", "CEAC", "ICER"], &rows)?;
        writeln!(f)?;
        writeln!(
            f,
            "Optimal intervention (max expected utility) for k = {k}: {}",
            self.optimal
        )?;
        writeln!(f)?;
        writeln!(f, "EVPI {}", format_signif(self.evpi, 5))
    }
}

/// Builds the summary at the grid value nearest to `k`.
pub fn summarize(analysis: &Analysis, k: f64) -> Result<SummaryBlock> {
    let ki = analysis.k_index(k)?;
    let grid = analysis.grid();
    let reference = analysis.label(analysis.reference()).to_string();

    let mut decision = Vec::new();
    let mut start: Option<f64> = None;
    let best = analysis.best();
    for i in 0..best.len() {
        let changes_next = i + 1 < best.len() && best[i + 1] != best[i];
        if changes_next || i + 1 == best.len() {
            let to = changes_next.then(|| grid.get(i + 1));
            decision.push(DecisionSegment {
                label: analysis.label(best[i]).to_string(),
                from: start,
                to,
            });
            start = to;
        }
    }

    Ok(SummaryBlock {
        comparators: analysis
            .comparisons()
            .iter()
            .map(|&c| analysis.label(c).to_string())
            .collect(),
        decision,
        kstar: analysis.kstar().to_vec(),
        kmax: grid.kmax(),
        requested_k: k,
        k: grid.get(ki),
        utilities: (0..analysis.n_int())
            .map(|t| ArmUtility {
                label: analysis.label(t).to_string(),
                expected_utility: analysis.expected_utility()[[ki, t]],
            })
            .collect(),
        comparisons: analysis
            .comparisons()
            .iter()
            .enumerate()
            .map(|(j, &c)| ComparisonSummary {
                reference: reference.clone(),
                comparator: analysis.label(c).to_string(),
                eib: analysis.eib()[[ki, j]],
                ceac: analysis.ceac()[[ki, j]],
                icer: analysis.icer()[j].value,
            })
            .collect(),
        optimal: analysis.label(best[ki]).to_string(),
        evpi: analysis.evi()[ki],
        reference,
    })
}

/// Per-simulation utilities and losses at one willingness-to-pay value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTable {
    pub k: f64,
    /// `U1 .. Un, U*, IB<ref>_<comp>..., OL, VI` (1-based arm numbers).
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SimTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> SimTable {
        SimTable {
            k: self.k,
            columns: self.columns.clone(),
            rows: self.rows.iter().take(n).cloned().collect(),
        }
    }
}

impl fmt::Display for SimTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let headers: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        let rows: Vec<(String, Vec<String>)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    (i + 1).to_string(),
                    r.iter().map(|&v| format_signif(v, 7)).collect(),
                )
            })
            .collect();
        write_table(f, &headers, &rows)
    }
}

pub fn sim_table(analysis: &Analysis, k: f64) -> Result<SimTable> {
    let ki = analysis.k_index(k)?;
    let slice = analysis.slice(ki);
    let n_int = analysis.n_int();
    let reference = analysis.reference();

    let mut columns: Vec<String> = (1..=n_int).map(|t| format!("U{t}")).collect();
    columns.push("U*".into());
    for &c in analysis.comparisons() {
        columns.push(format!("IB{}_{}", reference + 1, c + 1));
    }
    columns.push("OL".into());
    columns.push("VI".into());

    let rows = (0..analysis.n_sim())
        .map(|s| {
            let mut row: Vec<f64> = slice.utilities.row(s).to_vec();
            row.push(slice.ustar[s]);
            row.extend(slice.ib.row(s).iter().copied());
            row.push(slice.ol[s]);
            row.push(slice.vi[s]);
            row
        })
        .collect();
    Ok(SimTable {
        k: slice.k,
        columns,
        rows,
    })
}
