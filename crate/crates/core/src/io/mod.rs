//! Loading and saving PSA samples, parameter draws, manifests and archives.
//!
//! Every index in files and messages is 1-based; the conversion to the
//! 0-based indices used in memory happens here and nowhere else.

mod archive;
mod matrix;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::Analysis;
use crate::dataset::{PsaDataset, DEFAULT_GRID_POINTS, DEFAULT_KMAX};
use crate::error::{Error, Result};

pub use archive::{
    content_hash, input_hash, load_archive, parse_archive, save_archive, to_archive_json,
    AnalysisArchive, LoadedArchive, ARCHIVE_VERSION,
};
pub use matrix::{json_rows, matrix_to_json, parse_csv_matrix, write_csv_matrix, NamedMatrix};

/// Below this many simulations a loaded dataset carries an advisory.
pub const RECOMMENDED_MIN_SIMS: usize = 1000;

pub const MANIFEST_VERSION: u32 = 1;

/// A loaded value plus non-fatal notes about it.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub advisories: Vec<String>,
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

/// Non-fatal notes about a freshly loaded dataset.
pub fn dataset_advisories(dataset: &PsaDataset) -> Vec<String> {
    let mut notes = Vec::new();
    if dataset.n_sim() < RECOMMENDED_MIN_SIMS {
        notes.push(format!(
            "only {} simulations; more than {} are recommended",
            dataset.n_sim(),
            RECOMMENDED_MIN_SIMS
        ));
    }
    notes
}

fn pick_labels(
    explicit: Option<Vec<String>>,
    effects: Option<Vec<String>>,
    costs: Option<Vec<String>>,
    n_int: usize,
    advisories: &mut Vec<String>,
) -> Vec<String> {
    if let (Some(e), Some(c)) = (&effects, &costs) {
        if e != c && explicit.is_none() {
            advisories.push("effects and costs headers differ; using the effects header".into());
        }
    }
    explicit
        .or(effects)
        .or(costs)
        .unwrap_or_else(|| (1..=n_int).map(|i| format!("t{i}")).collect())
}

/// Builds a dataset from CSV texts for effects and costs.
pub fn parse_psa_csv(
    effects: &str,
    costs: &str,
    labels: Option<Vec<String>>,
    effects_source: &str,
    costs_source: &str,
) -> Result<Loaded<PsaDataset>> {
    let e = parse_csv_matrix(effects, effects_source)?;
    let c = parse_csv_matrix(costs, costs_source)?;
    let mut advisories = Vec::new();
    let labels = pick_labels(labels, e.names, c.names, e.data.ncols(), &mut advisories);
    let dataset = PsaDataset::new(e.data, c.data, labels)?;
    advisories.extend(dataset_advisories(&dataset));
    Ok(Loaded {
        value: dataset,
        advisories,
    })
}

/// Builds a dataset from a JSON document `{"effects": [[..]], "costs": [[..]], "labels": [..]}`
/// with one inner array per simulation.
pub fn parse_psa_json(text: &str, labels: Option<Vec<String>>, source: &str) -> Result<Loaded<PsaDataset>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::format(source, e.to_string()))?;
    let field = |name: &str| {
        doc.get(name)
            .ok_or_else(|| Error::format(source, format!("missing \"{name}\"")))
    };
    let effects = json_rows(field("effects")?, &format!("{source}: effects"))?;
    let costs = json_rows(field("costs")?, &format!("{source}: costs"))?;
    let doc_labels = match doc.get("labels") {
        Some(v) => Some(
            serde_json::from_value::<Vec<String>>(v.clone())
                .map_err(|e| Error::format(source, format!("labels: {e}")))?,
        ),
        None => None,
    };
    let mut advisories = Vec::new();
    let labels = pick_labels(labels.or(doc_labels), None, None, effects.ncols(), &mut advisories);
    let dataset = PsaDataset::new(effects, costs, labels)?;
    advisories.extend(dataset_advisories(&dataset));
    Ok(Loaded {
        value: dataset,
        advisories,
    })
}

/// Loads PSA samples: two CSV files, or a single JSON document when
/// `costs_path` is `None`.
pub fn load_psa(
    effects_path: &Path,
    costs_path: Option<&Path>,
    labels: Option<Vec<String>>,
) -> Result<Loaded<PsaDataset>> {
    let effects = read_text(effects_path)?;
    let loaded = match costs_path {
        Some(costs_path) => {
            let costs = read_text(costs_path)?;
            parse_psa_csv(
                &effects,
                &costs,
                labels,
                &source_name(effects_path),
                &source_name(costs_path),
            )?
        }
        None => parse_psa_json(&effects, labels, &source_name(effects_path))?,
    };
    log::info!(
        "loaded {} simulations x {} interventions",
        loaded.value.n_sim(),
        loaded.value.n_int()
    );
    for note in &loaded.advisories {
        log::debug!("{note}");
    }
    Ok(loaded)
}

/// Writes effects and costs as two CSV files with the labels as header.
pub fn save_psa_csv(dataset: &PsaDataset, effects_path: &Path, costs_path: &Path) -> Result<()> {
    for (path, m) in [(effects_path, dataset.effects()), (costs_path, dataset.costs())] {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_csv_matrix(file, Some(dataset.labels()), m)?;
    }
    Ok(())
}

/// Loads a parameter matrix (CSV with header, or JSON `{"names": [..], "rows": [[..]]}`).
/// Columns without a header are named `theta1`, `theta2`, ...
pub fn load_params(path: &Path) -> Result<NamedMatrix> {
    let text = read_text(path)?;
    let source = source_name(path);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_params_json(&text, &source)
    } else {
        let mut m = parse_csv_matrix(&text, &source)?;
        if m.names.is_none() {
            m.names = Some((1..=m.data.ncols()).map(|i| format!("theta{i}")).collect());
        }
        Ok(m)
    }
}

pub fn parse_params_json(text: &str, source: &str) -> Result<NamedMatrix> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::format(source, e.to_string()))?;
    let rows = doc
        .get("rows")
        .ok_or_else(|| Error::format(source, "missing \"rows\""))?;
    let data = json_rows(rows, source)?;
    let names: Vec<String> = match doc.get("names") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::format(source, format!("names: {e}")))?,
        None => (1..=data.ncols()).map(|i| format!("theta{i}")).collect(),
    };
    Ok(NamedMatrix {
        names: Some(names),
        data,
    })
}

/// Analysis settings as stored in files: 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(rename = "ref")]
    pub reference: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparisons: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

fn to_zero_based(index: usize, n_int: usize) -> Result<usize> {
    if index == 0 || index > n_int {
        Err(Error::InterventionOutOfRange { index, n_int })
    } else {
        Ok(index - 1)
    }
}

impl AnalysisConfig {
    /// Configuration reproducing `analysis` (for equally spaced grids).
    pub fn of(analysis: &Analysis) -> Self {
        AnalysisConfig {
            reference: analysis.reference() + 1,
            comparisons: Some(analysis.comparisons().iter().map(|c| c + 1).collect()),
            kmax: Some(analysis.grid().kmax()),
            grid_points: Some(analysis.grid().len()),
        }
    }

    pub fn build(&self, dataset: PsaDataset) -> Result<Analysis> {
        let n_int = dataset.n_int();
        let reference = to_zero_based(self.reference, n_int)?;
        let mut builder = Analysis::builder(dataset, reference)
            .kmax(self.kmax.unwrap_or(DEFAULT_KMAX))
            .grid_points(self.grid_points.unwrap_or(DEFAULT_GRID_POINTS));
        if let Some(list) = &self.comparisons {
            let zero_based = list
                .iter()
                .map(|&c| to_zero_based(c, n_int))
                .collect::<Result<Vec<_>>>()?;
            builder = builder.comparisons(zero_based);
        }
        builder.build()
    }
}

/// Describes where the samples live and how to analyse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    /// CSV of effects, or a JSON document holding both matrices when
    /// `costs_path` is absent.
    pub effects_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(flatten)]
    pub config: AnalysisConfig,
}

/// Everything a manifest points at, loaded and validated.
#[derive(Debug, Clone)]
pub struct ManifestContents {
    pub analysis: Analysis,
    pub params: Option<NamedMatrix>,
}

impl DatasetManifest {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::format(source, e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion {
                found: manifest.version,
                expected: MANIFEST_VERSION,
            });
        }
        Ok(manifest)
    }

    /// Loads the manifest file and everything it references (paths are
    /// relative to the manifest's directory).
    pub fn load(path: &Path) -> Result<Loaded<ManifestContents>> {
        let manifest = Self::parse(&read_text(path)?, &source_name(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.load_from(base)
    }

    pub fn load_from(&self, base: &Path) -> Result<Loaded<ManifestContents>> {
        let resolve = |p: &Path| base.join(p);
        let psa = load_psa(
            &resolve(&self.effects_path),
            self.costs_path.as_deref().map(resolve).as_deref(),
            self.labels.clone(),
        )?;
        let params = match &self.params_path {
            Some(p) => {
                let m = load_params(&resolve(p))?;
                if m.data.nrows() != psa.value.n_sim() {
                    return Err(Error::SimulationCountMismatch {
                        params: m.data.nrows(),
                        analysis: psa.value.n_sim(),
                    });
                }
                Some(m)
            }
            None => None,
        };
        let analysis = self.config.build(psa.value)?;
        Ok(Loaded {
            value: ManifestContents { analysis, params },
            advisories: psa.advisories,
        })
    }
}

/// Convenience for tests and tools: a dataset from row-major nested vectors.
pub fn dataset_from_rows(
    effects: &[Vec<f64>],
    costs: &[Vec<f64>],
    labels: Vec<String>,
) -> Result<PsaDataset> {
    let to_matrix = |rows: &[Vec<f64>], name: &str| -> Result<Array2<f64>> {
        let value = Value::Array(
            rows.iter()
                .map(|r| Value::Array(r.iter().map(|&v| Value::from(v)).collect()))
                .collect(),
        );
        json_rows(&value, name)
    };
    PsaDataset::new(to_matrix(effects, "effects")?, to_matrix(costs, "costs")?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY_E: &str = "Status quo,New\n1,2\n1,3\n1,1\n";
    const TINY_C: &str = "Status quo,New\n10,25\n10,35\n10,15\n";

    #[test]
    fn tiny_from_csv() {
        let loaded = parse_psa_csv(TINY_E, TINY_C, None, "e", "c").unwrap();
        let d = loaded.value;
        assert_eq!((d.n_sim(), d.n_int()), (3, 2));
        assert_eq!(d.labels(), &["Status quo", "New"]);
        assert_eq!(loaded.advisories.len(), 1);
    }

    #[test]
    fn header_only_file() {
        let err = parse_psa_csv("a,b\n", "a,b\n", None, "e", "c").unwrap_err();
        assert_eq!(err.to_string(), "fewer than 2 simulations (found 0)");
    }

    #[test]
    fn shape_mismatch() {
        let err = parse_psa_csv("1,2\n3,4\n", "1,2,3\n4,5,6\n", None, "e", "c").unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn advisory_only_below_threshold() {
        let rows = |n: usize| (0..n).map(|i| format!("{i},{}\n", i + 1)).collect::<String>();
        let small = parse_psa_csv(&rows(500), &rows(500), None, "e", "c").unwrap();
        assert!(small.advisories[0].contains("500 simulations"));
        let big = parse_psa_csv(&rows(1000), &rows(1000), None, "e", "c").unwrap();
        assert!(big.advisories.is_empty());
    }

    #[test]
    fn json_document() {
        let text = r#"{"effects": [[1,2],[1,3],[1,1]], "costs": [[10,25],[10,35],[10,15]], "labels": ["Status quo","New"]}"#;
        let d = parse_psa_json(text, None, "tiny.json").unwrap().value;
        let from_csv = parse_psa_csv(TINY_E, TINY_C, None, "e", "c").unwrap().value;
        assert_eq!(d, from_csv);
        let err = parse_psa_json(r#"{"effects": [[1,2]]}"#, None, "x.json").unwrap_err();
        assert!(err.to_string().contains("missing \"costs\""));
    }

    #[test]
    fn config_is_one_based() {
        let d = parse_psa_csv(TINY_E, TINY_C, None, "e", "c").unwrap().value;
        let cfg = AnalysisConfig {
            reference: 2,
            comparisons: None,
            kmax: Some(30.0),
            grid_points: Some(7),
        };
        let a = cfg.build(d.clone()).unwrap();
        assert_eq!(a.reference(), 1);
        assert_eq!(a.comparisons(), &[0]);
        assert_eq!(AnalysisConfig::of(&a).comparisons, Some(vec![1]));
        let bad = AnalysisConfig { reference: 0, ..cfg.clone() };
        assert!(matches!(bad.build(d.clone()), Err(Error::InterventionOutOfRange { index: 0, .. })));
        let bad = AnalysisConfig { comparisons: Some(vec![2]), ..cfg };
        assert!(matches!(bad.build(d), Err(Error::ReferenceInComparisons(2))));
    }

    #[test]
    fn manifest_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("e.csv"), TINY_E).unwrap();
        fs::write(dir.path().join("c.csv"), TINY_C).unwrap();
        fs::write(dir.path().join("p.csv"), "beta.1.,beta.2.\n0.1,1\n0.2,3\n0.4,2\n").unwrap();
        let manifest = r#"{"version": 1, "effects_path": "e.csv", "costs_path": "c.csv",
            "params_path": "p.csv", "ref": 2, "kmax": 30, "grid_points": 7}"#;
        let path = dir.path().join("manifest.json");
        fs::write(&path, manifest).unwrap();
        let loaded = DatasetManifest::load(&path).unwrap().value;
        assert_eq!(loaded.analysis.icer()[0].value, Some(15.0));
        let params = loaded.params.unwrap();
        assert_eq!(params.names.unwrap(), vec!["beta.1.", "beta.2."]);

        let v2 = manifest.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            DatasetManifest::parse(&v2, "m"),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        let missing = dir.path().join("nope.json");
        assert_eq!(DatasetManifest::load(&missing).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn save_then_load_csv() {
        let dir = tempfile::tempdir().unwrap();
        let d = parse_psa_csv(TINY_E, TINY_C, None, "e", "c").unwrap().value;
        let (e, c) = (dir.path().join("e.csv"), dir.path().join("c.csv"));
        save_psa_csv(&d, &e, &c).unwrap();
        assert_eq!(load_psa(&e, Some(&c), None).unwrap().value, d);
    }

    #[test]
    fn params_json_and_default_names() {
        let m = parse_params_json(r#"{"rows": [[1,2],[3,4]]}"#, "p").unwrap();
        assert_eq!(m.names.unwrap(), vec!["theta1", "theta2"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(&p, "1,2\n3,4\n").unwrap();
        assert_eq!(load_params(&p).unwrap().names.unwrap(), vec!["theta1", "theta2"]);
    }
}
