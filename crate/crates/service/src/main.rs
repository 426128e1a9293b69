use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use psa_core::extensions::{apply_mixed_strategy, apply_risk_aversion, multi_ce};
use psa_core::io::{self, AnalysisConfig, DatasetManifest};
use psa_core::render::{build_plot, default_k, info_rank_spec, make_report, render_svg, LegendPosition, ReportOptions};
use psa_core::summary::format_signif;
use psa_core::voi::{create_inputs, evppi, info_rank, EvppiMethod, EvppiOptions, KSubset, ParameterInputs};
use psa_core::{sim_table, summarize, Analysis, Error, Extensions, Result};

#[derive(Parser)]
#[command(name = "psa", version, about = "Cost-effectiveness and value-of-information analysis of PSA samples")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Input {
    /// JSON manifest naming the data files and settings.
    #[arg(long, conflicts_with_all = ["effects", "costs"])]
    manifest: Option<PathBuf>,
    /// Effects CSV (one row per simulation), or a JSON document holding
    /// effects, costs and labels when --costs is omitted.
    #[arg(long)]
    effects: Option<PathBuf>,
    #[arg(long, requires = "effects")]
    costs: Option<PathBuf>,
    /// Intervention labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Reference intervention (1-based).
    #[arg(long = "ref")]
    reference: Option<usize>,
    /// Comparator interventions (1-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    comparisons: Option<Vec<usize>>,
    #[arg(long)]
    kmax: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Parameter draws (CSV with header, or JSON), one row per simulation.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Risk-aversion coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    riskav: Option<Vec<f64>>,
    /// Market shares for a mixed strategy, comma separated.
    #[arg(long, value_delimiter = ',')]
    shares: Option<Vec<f64>>,
    /// Compute simultaneous multi-way acceptability.
    #[arg(long)]
    multice: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Regression,
    Binning,
    NearestNeighbour,
}

impl From<Method> for EvppiMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Regression => EvppiMethod::Regression,
            Method::Binning => EvppiMethod::Binning,
            Method::NearestNeighbour => EvppiMethod::NearestNeighbour,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print the summary block.
    Summary {
        #[command(flatten)]
        input: Input,
        /// Willingness to pay (snapped to the grid).
        #[arg(long)]
        wtp: Option<f64>,
    },
    /// Print per-simulation utilities, incremental benefit and losses.
    SimTable {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        wtp: Option<f64>,
        /// Only the first N rows.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Build one figure as SVG or as its JSON specification.
    Plot {
        #[command(flatten)]
        input: Input,
        /// ceplane, ceac, multi-ceac, ceaf, ceef, eib, evi, evi-mixed,
        /// eib-riskav, evi-riskav, ib-density, contour, contour2 or grid.
        kind: String,
        #[arg(long)]
        wtp: Option<f64>,
        /// Comparator intervention (1-based) for single-comparison figures.
        #[arg(long)]
        comparison: Option<usize>,
        /// top-left, top-right, bottom-left, bottom-right or hidden.
        #[arg(long)]
        legend: Option<String>,
        #[arg(long, value_enum, default_value = "svg")]
        format: Format,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a markdown report with SVG figures.
    Report {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        /// Figures to include, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "ceplane,ceac,eib,evi")]
        plots: Vec<String>,
        #[arg(long)]
        wtp: Option<f64>,
        #[arg(long)]
        comparison: Option<usize>,
        /// Parameter subset for an EVPPI section, comma separated.
        #[arg(long, value_delimiter = ',')]
        evppi: Option<Vec<String>>,
        /// Add an info-rank table and figure.
        #[arg(long)]
        info_rank: bool,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// EVPPI of a parameter subset across the grid.
    Evppi {
        #[command(flatten)]
        input: Input,
        /// Parameter names, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        select: Vec<String>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Estimate at every grid point instead of every tenth.
        #[arg(long)]
        full_grid: bool,
        /// Write the full result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank parameters by their share of the EVPI.
    InfoRank {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        wtp: Option<f64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Also write the bar chart as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Save the analysis and extensions as a versioned archive.
    Archive {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load an archive, recompute it and print its summary.
    Restore {
        archive: PathBuf,
        #[arg(long)]
        wtp: Option<f64>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

struct Loaded {
    analysis: Analysis,
    extensions: Extensions,
    params: Option<ParameterInputs>,
}

fn load(input: &Input) -> Result<Loaded> {
    let (analysis, raw_params) = match (&input.manifest, &input.effects) {
        (Some(path), _) => {
            let loaded = DatasetManifest::load(path)?;
            print_advisories(&loaded.advisories);
            let contents = loaded.value;
            let mut analysis = contents.analysis;
            if let Some(r) = input.reference {
                analysis = analysis.with_reference(one_based(r, analysis.n_int())?)?;
            }
            if let Some(list) = &input.comparisons {
                let list = list.iter().map(|&c| one_based(c, analysis.n_int())).collect::<Result<_>>()?;
                analysis = analysis.with_comparisons(list)?;
            }
            if let Some(kmax) = input.kmax {
                analysis = analysis.with_kmax(kmax)?;
            }
            (analysis, contents.params)
        }
        (None, Some(effects)) => {
            let loaded = io::load_psa(effects, input.costs.as_deref(), input.labels.clone())?;
            print_advisories(&loaded.advisories);
            let config = AnalysisConfig {
                reference: input.reference.unwrap_or(1),
                comparisons: input.comparisons.clone(),
                kmax: input.kmax,
                grid_points: input.grid_points,
            };
            (config.build(loaded.value)?, None)
        }
        (None, None) => {
            return Err(Error::Unavailable("give --manifest or --effects".into()));
        }
    };
    let raw_params = match &input.params {
        Some(path) => Some(io::load_params(path)?),
        None => raw_params,
    };
    let params = match raw_params {
        Some(m) => {
            if m.data.nrows() != analysis.n_sim() {
                return Err(Error::SimulationCountMismatch {
                    params: m.data.nrows(),
                    analysis: analysis.n_sim(),
                });
            }
            let inputs = create_inputs(&m.data, &m.names.unwrap_or_default(), true)?;
            for d in inputs.dropped() {
                eprintln!("note: parameter {:?} (column {}) dropped: {:?}", d.name, d.column, d.reason);
            }
            Some(inputs)
        }
        None => None,
    };
    let mut extensions = Extensions::default();
    if let Some(r) = &input.riskav {
        extensions.risk_aversion = Some(apply_risk_aversion(&analysis, r)?);
    }
    if let Some(q) = &input.shares {
        extensions.mixed = Some(apply_mixed_strategy(&analysis, Some(q))?);
    }
    if input.multice {
        extensions.multi_ce = Some(multi_ce(&analysis));
    }
    Ok(Loaded {
        analysis,
        extensions,
        params,
    })
}

fn one_based(index: usize, n_int: usize) -> Result<usize> {
    if index == 0 || index > n_int {
        Err(Error::InterventionOutOfRange { index, n_int })
    } else {
        Ok(index - 1)
    }
}

fn print_advisories(notes: &[String]) {
    for n in notes {
        eprintln!("note: {n}");
    }
}

fn need_params(loaded: &Loaded) -> Result<&ParameterInputs> {
    loaded
        .params
        .as_ref()
        .ok_or_else(|| Error::Unavailable("parameter draws required: pass --params or set params_path".into()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Summary { input, wtp } => {
            let l = load(&input)?;
            let k = wtp.unwrap_or_else(|| default_k(&l.analysis));
            print!("{}", summarize(&l.analysis, k)?);
        }
        Command::SimTable { input, wtp, rows } => {
            let l = load(&input)?;
            let k = wtp.unwrap_or_else(|| default_k(&l.analysis));
            let table = sim_table(&l.analysis, k)?;
            let table = match rows {
                Some(n) => table.head(n),
                None => table,
            };
            print!("{table}");
        }
        Command::Plot {
            input,
            kind,
            wtp,
            comparison,
            legend,
            format,
            out,
        } => {
            let l = load(&input)?;
            let comparison = comparison.map(|c| one_based(c, l.analysis.n_int())).transpose()?;
            let mut spec = build_plot(&kind, &l.analysis, &l.extensions, wtp, comparison)?;
            if let Some(pos) = legend {
                spec = spec.with_legend(pos.parse::<LegendPosition>()?);
            }
            let text = match format {
                Format::Svg => render_svg(&spec),
                Format::Json => serde_json::to_string_pretty(&spec).expect("plot specs serialise") + "\n",
            };
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Report {
            input,
            out,
            plots,
            wtp,
            comparison,
            evppi: subset,
            info_rank: with_rank,
            method,
        } => {
            let l = load(&input)?;
            let method = method.map(EvppiMethod::from);
            let mut options = ReportOptions {
                k: wtp,
                plots,
                comparison: comparison.map(|c| one_based(c, l.analysis.n_int())).transpose()?,
                ..ReportOptions::default()
            };
            if let Some(params) = subset {
                let opts = EvppiOptions {
                    method,
                    ..EvppiOptions::default()
                };
                options.evppi.push(evppi(&l.analysis, &params, need_params(&l)?, &opts)?);
            }
            if with_rank {
                let k = wtp.unwrap_or_else(|| default_k(&l.analysis));
                options.info_rank = Some(info_rank(&l.analysis, need_params(&l)?, k, method)?);
            }
            let doc = make_report(&l.analysis, &l.extensions, &options)?;
            let path = doc.write(&out)?;
            println!("{}", path.display());
        }
        Command::Evppi {
            input,
            select,
            method,
            full_grid,
            out,
        } => {
            let l = load(&input)?;
            let options = EvppiOptions {
                method: method.map(EvppiMethod::from),
                k_subset: if full_grid { KSubset::Full } else { KSubset::default() },
            };
            let result = evppi(&l.analysis, &select, need_params(&l)?, &options)?;
            for w in &result.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            println!("EVPPI for {} ({})", select.join(", "), result.method.label());
            println!("{:>12} {:>12} {:>12}", "k", "EVPPI", "EVPI");
            for p in &result.diagnostics.points {
                println!(
                    "{:>12} {:>12} {:>12}",
                    format_signif(p.k, 6),
                    format_signif(result.evppi[p.k_index], 6),
                    format_signif(result.evpi[p.k_index], 6)
                );
            }
            if let Some(path) = out {
                write_file(&path, &serde_json::to_string_pretty(&result).expect("results serialise"))?;
            }
        }
        Command::InfoRank {
            input,
            wtp,
            method,
            plot,
        } => {
            let l = load(&input)?;
            let k = wtp.unwrap_or_else(|| default_k(&l.analysis));
            let rank = info_rank(&l.analysis, need_params(&l)?, k, method.map(EvppiMethod::from))?;
            println!(
                "Info-rank at k = {} (EVPI {}, {})",
                format_signif(rank.k, 6),
                format_signif(rank.evpi, 6),
                rank.method.label()
            );
            for e in &rank.entries {
                println!("{:<24} {:>10} {:>8}", e.param, format_signif(e.evppi, 6), format_signif(e.proportion, 4));
            }
            if let Some(path) = plot {
                write_file(&path, &render_svg(&info_rank_spec(&rank)?))?;
            }
        }
        Command::Archive { input, out } => {
            let l = load(&input)?;
            io::save_archive(&out, &l.analysis, &l.extensions)?;
            println!("{}", out.display());
        }
        Command::Restore { archive, wtp } => {
            let loaded = io::load_archive(&archive)?;
            for w in &loaded.advisories {
                eprintln!("warning: {w}");
            }
            let a = &loaded.value.analysis;
            print!("{}", summarize(a, wtp.unwrap_or_else(|| default_k(a)))?);
        }
        Command::Serve { port, host } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
                path: PathBuf::from("<runtime>"),
                source: e,
            })?;
            let addr = SocketAddr::new(host, port);
            runtime.block_on(psa_service::serve(addr)).map_err(|e| Error::Io {
                path: PathBuf::from(addr.to_string()),
                source: e,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
