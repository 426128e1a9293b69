use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{read_text, AnalysisConfig, Loaded};
use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::extensions::Extensions;

pub const ARCHIVE_VERSION: u32 = 1;

/// Self-contained, versioned record of an analysis and its extensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisArchive {
    pub version: u32,
    /// SHA-256 of the dataset, grid and configuration.
    pub input_hash: String,
    /// SHA-256 of the configuration, analysis and extensions.
    pub content_hash: String,
    pub config: AnalysisConfig,
    pub analysis: Analysis,
    #[serde(default)]
    pub extensions: Extensions,
}

/// The analysis rebuilt from an archive, with any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct LoadedArchive {
    pub analysis: Analysis,
    pub extensions: Extensions,
    pub warnings: Vec<String>,
}

fn sha256_hex(value: &Value) -> String {
    // serde_json maps keep keys sorted, so this serialisation is canonical
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("archive types serialise to JSON")
}

pub fn input_hash(analysis: &Analysis) -> String {
    sha256_hex(&json!({
        "dataset": to_value(analysis.dataset()),
        "grid": to_value(analysis.grid()),
        "config": to_value(&AnalysisConfig::of(analysis)),
    }))
}

pub fn content_hash(config: &AnalysisConfig, analysis: &Analysis, extensions: &Extensions) -> String {
    sha256_hex(&json!({
        "config": to_value(config),
        "analysis": to_value(analysis),
        "extensions": to_value(extensions),
    }))
}

impl AnalysisArchive {
    pub fn new(analysis: &Analysis, extensions: &Extensions) -> Self {
        let config = AnalysisConfig::of(analysis);
        AnalysisArchive {
            version: ARCHIVE_VERSION,
            input_hash: input_hash(analysis),
            content_hash: content_hash(&config, analysis, extensions),
            config,
            analysis: analysis.clone(),
            extensions: extensions.clone(),
        }
    }
}

pub fn to_archive_json(analysis: &Analysis, extensions: &Extensions) -> String {
    serde_json::to_string_pretty(&AnalysisArchive::new(analysis, extensions))
        .expect("archive types serialise to JSON")
}

pub fn save_archive(path: &Path, analysis: &Analysis, extensions: &Extensions) -> Result<()> {
    fs::write(path, to_archive_json(analysis, extensions)).map_err(|e| Error::io(path, e))
}

/// Parses an archive and recomputes the analysis from its stored inputs.
/// A version other than the current one is an error; hash or result
/// mismatches are reported as warnings and the recomputed values win.
pub fn parse_archive(text: &str, source: &str) -> Result<LoadedArchive> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::format(source, e.to_string()))?;
    let version = doc
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::format(source, "missing archive version"))?;
    if version != u64::from(ARCHIVE_VERSION) {
        return Err(Error::UnsupportedVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: ARCHIVE_VERSION,
        });
    }
    let archive: AnalysisArchive =
        serde_json::from_value(doc).map_err(|e| Error::format(source, e.to_string()))?;

    let mut warnings = Vec::new();
    let stored = &archive.analysis;
    if input_hash(stored) != archive.input_hash {
        warnings.push("input hash does not match the stored inputs".to_string());
    }
    if content_hash(&archive.config, stored, &archive.extensions) != archive.content_hash {
        warnings.push("content hash mismatch: the archive was modified after saving".to_string());
    }
    if archive.config != AnalysisConfig::of(stored) {
        warnings.push("stored configuration disagrees with the stored analysis".to_string());
    }

    let analysis = Analysis::builder(stored.dataset().clone(), stored.reference())
        .comparisons(stored.comparisons().to_vec())
        .grid(stored.grid().clone())
        .build()?;
    if &analysis != stored {
        warnings.push("stored results differ from a recomputation; using recomputed values".to_string());
    }
    let extensions = archive.extensions.refresh(&analysis)?;
    if extensions != archive.extensions {
        warnings.push("stored extension results differ from a recomputation; using recomputed values".to_string());
    }
    for w in &warnings {
        log::debug!("{source}: {w}");
    }
    Ok(LoadedArchive {
        analysis,
        extensions,
        warnings,
    })
}

pub fn load_archive(path: &Path) -> Result<Loaded<LoadedArchive>> {
    let loaded = parse_archive(&read_text(path)?, &path.display().to_string())?;
    Ok(Loaded {
        advisories: loaded.warnings.clone(),
        value: loaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::{apply_mixed_strategy, apply_risk_aversion, multi_ce};
    use crate::PsaDataset;
    use ndarray::array;

    fn tiny() -> Analysis {
        let d = PsaDataset::new(
            array![[1.0, 2.0], [1.0, 3.0], [1.0, 1.0]],
            array![[10.0, 25.0], [10.0, 35.0], [10.0, 15.0]],
            vec!["Status quo".into(), "New".into()],
        )
        .unwrap();
        Analysis::builder(d, 0).kmax(30.0).grid_points(31).build().unwrap()
    }

    fn with_all_extensions(a: &Analysis) -> Extensions {
        Extensions {
            multi_ce: Some(multi_ce(a)),
            risk_aversion: Some(apply_risk_aversion(a, &[0.0, 0.005]).unwrap()),
            mixed: Some(apply_mixed_strategy(a, Some(&[0.25, 0.75])).unwrap()),
        }
    }

    #[test]
    fn round_trip_is_exact_and_quiet() {
        let a = tiny();
        let ext = with_all_extensions(&a);
        let text = to_archive_json(&a, &ext);
        let loaded = parse_archive(&text, "a.json").unwrap();
        assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
        assert_eq!(loaded.analysis, a);
        assert_eq!(loaded.extensions, ext);
        assert_eq!(to_archive_json(&loaded.analysis, &loaded.extensions), text);
    }

    #[test]
    fn tampering_is_reported() {
        let a = tiny();
        let text = to_archive_json(&a, &Extensions::default());
        let mut doc: Value = serde_json::from_str(&text).unwrap();
        doc["analysis"]["evi"][3] = json!(123.0);
        let loaded = parse_archive(&doc.to_string(), "a.json").unwrap();
        assert!(loaded.warnings.iter().any(|w| w.contains("content hash")));
        assert!(loaded.warnings.iter().any(|w| w.contains("recomputation")));
        assert_eq!(loaded.analysis, a);
    }

    #[test]
    fn version_and_format_errors() {
        let text = to_archive_json(&tiny(), &Extensions::default());
        let mut doc: Value = serde_json::from_str(&text).unwrap();
        doc["version"] = json!(2);
        assert!(matches!(
            parse_archive(&doc.to_string(), "a"),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        let err = parse_archive("not json", "a").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load_archive(Path::new("/nonexistent/archive.json")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn hashes_are_stable() {
        let a = tiny();
        assert_eq!(input_hash(&a), input_hash(&a.clone()));
        assert_eq!(input_hash(&a).len(), 64);
        let b = a.with_kmax(40.0).unwrap();
        assert_ne!(input_hash(&a), input_hash(&b));
    }
}
