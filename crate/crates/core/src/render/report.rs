use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::plots::{evppi_spec, info_rank_spec};
use super::svg::render_svg;
use super::{build_plot, default_k};
use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::extensions::Extensions;
use crate::io::AnalysisConfig;
use crate::summary::{format_signif, sim_table, summarize};
use crate::voi::{EvppiResult, InfoRank};

pub const SIM_TABLE_ROWS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub title: String,
    pub k: Option<f64>,
    /// Figure names as accepted by `build_plot`.
    pub plots: Vec<String>,
    /// 0-based comparator arm for single-comparison figures.
    pub comparison: Option<usize>,
    pub evppi: Vec<EvppiResult>,
    pub info_rank: Option<InfoRank>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            title: "Cost-effectiveness analysis report".into(),
            k: None,
            plots: ["ceplane", "ceac", "eib", "evi"].map(String::from).to_vec(),
            comparison: None,
            evppi: Vec::new(),
            info_rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSection {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureAsset {
    pub name: String,
    /// Path relative to the report directory.
    pub file: String,
    pub caption: String,
    #[serde(skip)]
    pub svg: String,
}

/// A markdown report and the SVG figures it links to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDoc {
    pub title: String,
    pub sections: Vec<ReportSection>,
    pub figures: Vec<FigureAsset>,
}

impl ReportDoc {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        for s in &self.sections {
            let _ = write!(out, "\n## {}\n\n{}\n", s.heading, s.body.trim_end());
        }
        out
    }

    /// Writes `report.md` and every figure under `dir`; returns the path of
    /// the markdown file.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let figures = dir.join("figures");
        fs::create_dir_all(&figures).map_err(|e| Error::io(&figures, e))?;
        for f in &self.figures {
            let path = dir.join(&f.file);
            fs::write(&path, &f.svg).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("report.md");
        fs::write(&path, self.to_markdown()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn code_block(text: &str) -> String {
    format!("```\n{}\n```\n", text.trim_end())
}

fn figure(name: &str, caption: String, spec: &super::PlotSpec) -> FigureAsset {
    FigureAsset {
        name: name.to_string(),
        file: format!("figures/{name}.svg"),
        caption,
        svg: render_svg(spec),
    }
}

fn dataset_section(analysis: &Analysis) -> String {
    let d = analysis.dataset();
    let (e, c) = (d.mean_effects(), d.mean_costs());
    let mut body = format!(
        "{} simulations for {} interventions.\n\n| # | Intervention | Mean effect | Mean cost |\n|---|---|---|---|\n",
        d.n_sim(),
        d.n_int()
    );
    for t in 0..d.n_int() {
        let _ = writeln!(
            body,
            "| {} | {} | {} | {} |",
            t + 1,
            d.label(t),
            format_signif(e[t], 6),
            format_signif(c[t], 6)
        );
    }
    body
}

fn voi_section(options: &ReportOptions, figures: &mut Vec<FigureAsset>) -> Result<Option<String>> {
    if options.evppi.is_empty() && options.info_rank.is_none() {
        return Ok(None);
    }
    let mut body = String::new();
    for (i, result) in options.evppi.iter().enumerate() {
        let name = format!("evppi-{}", i + 1);
        let caption = format!("EVPPI for {} ({})", result.params.join(", "), result.method.label());
        let asset = figure(&name, caption, &evppi_spec(result)?);
        let _ = writeln!(body, "![{}]({})\n", asset.caption, asset.file);
        figures.push(asset);
        for w in &result.diagnostics.warnings {
            let _ = writeln!(body, "> {w}\n");
        }
    }
    if let Some(rank) = &options.info_rank {
        let _ = writeln!(
            body,
            "Parameters ranked by EVPPI as a share of EVPI = {} at k = {}.\n\n| Parameter | EVPPI | Share |\n|---|---|---|",
            format_signif(rank.evpi, 6),
            format_signif(rank.k, 6)
        );
        for e in &rank.entries {
            let _ = writeln!(
                body,
                "| {} | {} | {} |",
                e.param,
                format_signif(e.evppi, 6),
                format_signif(e.proportion, 4)
            );
        }
        let asset = figure("info-rank", "Info-rank".into(), &info_rank_spec(rank)?);
        let _ = writeln!(body, "\n![{}]({})", asset.caption, asset.file);
        figures.push(asset);
    }
    Ok(Some(body))
}

/// Assembles the report in memory: title, dataset description, summary,
/// figures, simulation-table excerpt, optional value of information and the
/// configuration appendix, in that order.
pub fn make_report(analysis: &Analysis, extensions: &Extensions, options: &ReportOptions) -> Result<ReportDoc> {
    let k = options.k.unwrap_or_else(|| default_k(analysis));
    let summary = summarize(analysis, k)?;
    let mut sections = vec![
        ReportSection {
            heading: "Dataset".into(),
            body: dataset_section(analysis),
        },
        ReportSection {
            heading: "Summary".into(),
            body: code_block(&summary.to_string()),
        },
    ];

    let mut figures = Vec::new();
    let mut body = String::new();
    for name in &options.plots {
        let spec = build_plot(name, analysis, extensions, Some(k), options.comparison)?;
        let asset = figure(name, spec.title.clone(), &spec);
        let _ = writeln!(body, "![{}]({})\n", asset.caption, asset.file);
        figures.push(asset);
    }
    if body.is_empty() {
        body.push_str("No figures requested.\n");
    }
    sections.push(ReportSection {
        heading: "Figures".into(),
        body,
    });

    let table = sim_table(analysis, k)?.head(SIM_TABLE_ROWS);
    sections.push(ReportSection {
        heading: "Simulation table".into(),
        body: format!(
            "First {} simulations at k = {}.\n\n{}",
            table.rows.len(),
            format_signif(table.k, 6),
            code_block(&table.to_string())
        ),
    });

    if let Some(body) = voi_section(options, &mut figures)? {
        sections.push(ReportSection {
            heading: "Value of information".into(),
            body,
        });
    }

    let mut config = serde_json::json!({ "analysis": AnalysisConfig::of(analysis), "k": summary.k });
    if let Some(set) = &extensions.risk_aversion {
        config["risk_aversion"] = serde_json::json!(set.r_values());
    }
    if let Some(mixed) = &extensions.mixed {
        config["shares"] = serde_json::json!(mixed.shares);
    }
    if let Some(multi) = &extensions.multi_ce {
        config["multi_ce_included"] = serde_json::json!(multi.included.iter().map(|t| t + 1).collect::<Vec<_>>());
    }
    let pretty = serde_json::to_string_pretty(&config).expect("configuration serialises");
    sections.push(ReportSection {
        heading: "Configuration".into(),
        body: format!("```json\n{pretty}\n```\n"),
    });

    Ok(ReportDoc {
        title: options.title.clone(),
        sections,
        figures,
    })
}
