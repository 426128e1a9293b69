use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use psa_core::extensions::{apply_mixed_strategy, apply_risk_aversion, multi_ce};
use psa_core::io::{self, AnalysisConfig, DatasetManifest, NamedMatrix};
use psa_core::render::{build_plot, default_k, render_svg, LegendPosition};
use psa_core::voi::{create_inputs, evppi, DroppedColumn, EvppiMethod, EvppiOptions, KSubset};
use psa_core::{summarize, Analysis, PsaDataset, SummaryBlock};

use crate::error::ApiError;
use crate::state::{AppState, JobStatus, Session};

/// Deserialises a JSON body, reporting type errors against the offending
/// field path.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {inner}"))
        } else {
            let field = if path == "." { "body".to_string() } else { path };
            ApiError::field(&field, inner.to_string())
        }
    })
}

/// `If-Match` revision, if any; `*` matches every revision.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    match headers.get(header::IF_MATCH) {
        None => Ok(None),
        Some(v) => {
            let text = v.to_str().unwrap_or("").trim().trim_start_matches("W/").trim_matches('"');
            if text == "*" {
                return Ok(None);
            }
            text.parse()
                .map(Some)
                .map_err(|_| ApiError::field("If-Match", format!("expected a revision number, got {text:?}")))
        }
    }
}

fn with_revision<T: Serialize>(status: StatusCode, revision: u64, body: T) -> Response {
    let mut response = (status, Json(body)).into_response();
    if let Ok(v) = HeaderValue::from_str(&format!("\"{revision}\"")) {
        response.headers_mut().insert(header::ETAG, v);
    }
    response
}

fn payload_hash(s: &Session) -> String {
    io::content_hash(&AnalysisConfig::of(&s.analysis), &s.analysis, &s.extensions)
}

fn to_one_based(arms: &[usize]) -> Vec<usize> {
    arms.iter().map(|t| t + 1).collect()
}

/// Digest of the current state returned by every mutation.
#[derive(Debug, Serialize)]
pub struct SessionDigest {
    pub id: String,
    pub revision: u64,
    pub created: u64,
    pub updated: u64,
    pub n_sim: usize,
    pub n_int: usize,
    pub labels: Vec<String>,
    #[serde(rename = "ref")]
    pub reference: usize,
    pub comparisons: Vec<usize>,
    pub kmax: f64,
    pub grid_points: usize,
    pub kstar: Vec<f64>,
    pub icer: Vec<Option<f64>>,
    pub parameters: Vec<String>,
    pub extensions: ExtensionDigest,
    pub payload_hash: String,
}

#[derive(Debug, Serialize)]
pub struct ExtensionDigest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multice: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riskav: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riskav_saturated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shares: Option<Vec<f64>>,
}

fn digest(id: &str, s: &Session) -> SessionDigest {
    let a = &s.analysis;
    let e = &s.extensions;
    SessionDigest {
        id: id.to_string(),
        revision: s.revision,
        created: s.created,
        updated: s.updated,
        n_sim: a.n_sim(),
        n_int: a.n_int(),
        labels: a.dataset().labels().to_vec(),
        reference: a.reference() + 1,
        comparisons: to_one_based(a.comparisons()),
        kmax: a.grid().kmax(),
        grid_points: a.grid().len(),
        kstar: a.kstar().to_vec(),
        icer: a.icer().iter().map(|i| i.value).collect(),
        parameters: s.params.as_ref().map(|p| p.names().to_vec()).unwrap_or_default(),
        extensions: ExtensionDigest {
            multice: e.multi_ce.as_ref().map(|m| to_one_based(&m.included)),
            riskav: e.risk_aversion.as_ref().map(|r| r.r_values()),
            riskav_saturated: e.risk_aversion.as_ref().map(|r| r.saturated()),
            shares: e.mixed.as_ref().map(|m| m.shares.clone()),
        },
        payload_hash: payload_hash(s),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsBody {
    names: Option<Vec<String>>,
    rows: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    effects: Option<Value>,
    costs: Option<Value>,
    effects_csv: Option<String>,
    costs_csv: Option<String>,
    labels: Option<Vec<String>>,
    params: Option<ParamsBody>,
    params_csv: Option<String>,
    manifest_path: Option<PathBuf>,
    archive: Option<Value>,
    #[serde(rename = "ref")]
    reference: Option<usize>,
    comparisons: Option<Vec<usize>>,
    kmax: Option<f64>,
    grid_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct CreateResponse {
    #[serde(flatten)]
    digest: SessionDigest,
    advisories: Vec<String>,
    dropped_parameters: Vec<DroppedColumn>,
}

fn dataset_from_body(body: &CreateBody) -> Result<(PsaDataset, Vec<String>), ApiError> {
    let loaded = match (&body.effects, &body.costs, &body.effects_csv, &body.costs_csv) {
        (Some(e), Some(c), None, None) => {
            let effects = io::json_rows(e, "effects").map_err(|err| ApiError::field("effects", err.to_string()))?;
            let costs = io::json_rows(c, "costs").map_err(|err| ApiError::field("costs", err.to_string()))?;
            let labels = body
                .labels
                .clone()
                .unwrap_or_else(|| (1..=effects.ncols()).map(|i| format!("t{i}")).collect());
            let dataset = PsaDataset::new(effects, costs, labels)?;
            let advisories = io::dataset_advisories(&dataset);
            io::Loaded {
                value: dataset,
                advisories,
            }
        }
        (None, None, Some(e), Some(c)) => io::parse_psa_csv(e, c, body.labels.clone(), "effects_csv", "costs_csv")?,
        _ => {
            return Err(ApiError::field(
                "effects",
                "provide effects and costs as row arrays, or effects_csv and costs_csv",
            ))
        }
    };
    Ok((loaded.value, loaded.advisories))
}

fn params_from_body(body: &CreateBody) -> Result<Option<NamedMatrix>, ApiError> {
    match (&body.params, &body.params_csv) {
        (Some(_), Some(_)) => Err(ApiError::field("params", "give params or params_csv, not both")),
        (Some(p), None) => {
            let data = io::json_rows(&p.rows, "params").map_err(|e| ApiError::field("params.rows", e.to_string()))?;
            let names = p
                .names
                .clone()
                .unwrap_or_else(|| (1..=data.ncols()).map(|i| format!("theta{i}")).collect());
            Ok(Some(NamedMatrix {
                names: Some(names),
                data,
            }))
        }
        (None, Some(text)) => {
            let mut m = io::parse_csv_matrix(text, "params_csv").map_err(|e| ApiError::field("params_csv", e.to_string()))?;
            if m.names.is_none() {
                m.names = Some((1..=m.data.ncols()).map(|i| format!("theta{i}")).collect());
            }
            Ok(Some(m))
        }
        (None, None) => Ok(None),
    }
}

fn build_session(body: CreateBody) -> Result<(Session, Vec<String>, Vec<DroppedColumn>), ApiError> {
    let mut advisories = Vec::new();
    let mut extensions = None;
    let (analysis, raw_params) = if let Some(archive) = &body.archive {
        let loaded = io::parse_archive(&archive.to_string(), "archive")?;
        advisories.extend(loaded.warnings);
        extensions = Some(loaded.extensions);
        (loaded.analysis, params_from_body(&body)?)
    } else if let Some(path) = &body.manifest_path {
        let loaded = DatasetManifest::load(path)?;
        advisories.extend(loaded.advisories);
        (loaded.value.analysis, loaded.value.params)
    } else {
        let (dataset, notes) = dataset_from_body(&body)?;
        advisories.extend(notes);
        let config = AnalysisConfig {
            reference: body.reference.unwrap_or(1),
            comparisons: body.comparisons.clone(),
            kmax: body.kmax,
            grid_points: body.grid_points,
        };
        let analysis = config.build(dataset).map_err(|e| match e {
            psa_core::Error::InterventionOutOfRange { .. } | psa_core::Error::ReferenceInComparisons(_)
                if body.comparisons.is_some() =>
            {
                ApiError::field("comparisons", e.to_string())
            }
            psa_core::Error::InterventionOutOfRange { .. } => ApiError::field("ref", e.to_string()),
            psa_core::Error::InvalidGrid(_) | psa_core::Error::WtpOutOfRange { .. } => {
                ApiError::field("kmax", e.to_string())
            }
            other => ApiError::invalid(other),
        })?;
        (analysis, params_from_body(&body)?)
    };

    let mut dropped = Vec::new();
    let params = match raw_params {
        Some(m) => {
            if m.data.nrows() != analysis.n_sim() {
                return Err(ApiError::field(
                    "params",
                    psa_core::Error::SimulationCountMismatch {
                        params: m.data.nrows(),
                        analysis: analysis.n_sim(),
                    }
                    .to_string(),
                ));
            }
            let names = m.names.unwrap_or_default();
            let inputs = create_inputs(&m.data, &names, true).map_err(|e| ApiError::field("params", e.to_string()))?;
            dropped = inputs.dropped().to_vec();
            Some(inputs)
        }
        None => None,
    };
    let mut session = Session::new(analysis, params);
    if let Some(ext) = extensions {
        session.extensions = ext;
    }
    Ok((session, advisories, dropped))
}

pub async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = parse_body(&body)?;
    let (session, advisories, dropped_parameters) = build_session(body)?;
    let id = state.insert(session.clone());
    log::info!("created session {id}");
    let response = CreateResponse {
        digest: digest(&id, &session),
        advisories,
        dropped_parameters,
    };
    Ok(with_revision(StatusCode::CREATED, session.revision, response))
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = state.snapshot(&id)?;
    Ok(with_revision(StatusCode::OK, s.revision, digest(&id, &s)))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct KQuery {
    k: Option<f64>,
}

#[derive(Serialize)]
struct SummaryResponse {
    revision: u64,
    #[serde(flatten)]
    summary: SummaryBlock,
    text: String,
}

pub async fn get_summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<KQuery>,
) -> Result<Response, ApiError> {
    let s = state.snapshot(&id)?;
    let k = q.k.unwrap_or_else(|| default_k(&s.analysis));
    let summary = summarize(&s.analysis, k).map_err(|e| ApiError::field("k", e.to_string()))?;
    let text = summary.to_string();
    Ok(with_revision(
        StatusCode::OK,
        s.revision,
        SummaryResponse {
            revision: s.revision,
            summary,
            text,
        },
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchBody {
    #[serde(rename = "ref")]
    reference: Option<usize>,
    comparisons: Option<Vec<usize>>,
    kmax: Option<f64>,
}

fn zero_based(field: &str, index: usize, n_int: usize) -> Result<usize, ApiError> {
    if index == 0 || index > n_int {
        Err(ApiError::field(
            field,
            psa_core::Error::InterventionOutOfRange { index, n_int }.to_string(),
        ))
    } else {
        Ok(index - 1)
    }
}

fn apply_patch(s: &Session, body: &PatchBody) -> Result<Session, ApiError> {
    let n_int = s.analysis.n_int();
    if let (Some(r), Some(list)) = (body.reference, &body.comparisons) {
        if list.contains(&r) {
            return Err(ApiError::field(
                "ref",
                psa_core::Error::ReferenceInComparisons(r).to_string(),
            ));
        }
    }
    let mut analysis: Analysis = s.analysis.clone();
    if let Some(r) = body.reference {
        let r = zero_based("ref", r, n_int)?;
        if r != analysis.reference() {
            analysis = analysis.with_reference(r).map_err(|e| ApiError::field("ref", e.to_string()))?;
        }
    }
    if let Some(list) = &body.comparisons {
        let list = list
            .iter()
            .map(|&c| zero_based("comparisons", c, n_int))
            .collect::<Result<Vec<_>, _>>()?;
        analysis = analysis
            .with_comparisons(list)
            .map_err(|e| ApiError::field("comparisons", e.to_string()))?;
    }
    if let Some(kmax) = body.kmax {
        analysis = analysis.with_kmax(kmax).map_err(|e| ApiError::field("kmax", e.to_string()))?;
    }
    let extensions = s.extensions.refresh(&analysis)?;
    Ok(Session {
        analysis,
        extensions,
        ..s.clone()
    })
}

pub async fn patch_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: PatchBody = parse_body(&body)?;
    let expected = if_match(&headers)?;
    let s = state.mutate(&id, expected, |s| apply_patch(s, &body))?;
    Ok(with_revision(StatusCode::OK, s.revision, digest(&id, &s)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtensionsBody {
    riskav: Option<Vec<f64>>,
    shares: Option<Vec<f64>>,
    multice: Option<bool>,
}

fn apply_extensions(s: &Session, body: &ExtensionsBody) -> Result<Session, ApiError> {
    if body.riskav.is_none() && body.shares.is_none() && body.multice.is_none() {
        return Err(ApiError::field("body", "expected at least one of riskav, shares, multice"));
    }
    let a = &s.analysis;
    let mut ext = s.extensions.clone();
    if let Some(r) = &body.riskav {
        ext.risk_aversion = Some(apply_risk_aversion(a, r).map_err(|e| ApiError::field("riskav", e.to_string()))?);
    }
    if let Some(q) = &body.shares {
        ext.mixed = Some(apply_mixed_strategy(a, Some(q)).map_err(|e| ApiError::field("shares", e.to_string()))?);
    }
    match body.multice {
        Some(true) => ext.multi_ce = Some(multi_ce(a)),
        Some(false) => ext.multi_ce = None,
        None => {}
    }
    Ok(Session {
        extensions: ext,
        ..s.clone()
    })
}

pub async fn post_extensions(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: ExtensionsBody = parse_body(&body)?;
    let expected = if_match(&headers)?;
    let s = state.mutate(&id, expected, |s| apply_extensions(s, &body))?;
    Ok(with_revision(StatusCode::OK, s.revision, digest(&id, &s)))
}

#[derive(Debug, Deserialize)]
pub struct PlotQuery {
    k: Option<f64>,
    /// 1-based comparator arm.
    comparison: Option<usize>,
    legend: Option<String>,
    format: Option<String>,
}

pub async fn get_plot(
    State(state): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<PlotQuery>,
) -> Result<Response, ApiError> {
    let s = state.snapshot(&id)?;
    let comparison = match q.comparison {
        Some(c) => Some(zero_based("comparison", c, s.analysis.n_int())?),
        None => None,
    };
    let mut spec = build_plot(&kind, &s.analysis, &s.extensions, q.k, comparison).map_err(|e| match e {
        psa_core::Error::UnknownComparison(_) => ApiError::field("comparison", e.to_string()),
        psa_core::Error::WtpOutOfRange { .. } => ApiError::field("k", e.to_string()),
        psa_core::Error::Unavailable(msg) if msg.starts_with("unknown plot") => {
            ApiError::new(StatusCode::NOT_FOUND, msg)
        }
        other => ApiError::invalid(other),
    })?;
    if let Some(pos) = &q.legend {
        let pos: LegendPosition = pos.parse().map_err(|e: psa_core::Error| ApiError::field("legend", e.to_string()))?;
        spec = spec.with_legend(pos);
    }
    match q.format.as_deref() {
        None | Some("json") => {
            #[derive(Serialize)]
            struct PlotResponse<T> {
                revision: u64,
                spec: T,
            }
            Ok(with_revision(
                StatusCode::OK,
                s.revision,
                PlotResponse {
                    revision: s.revision,
                    spec,
                },
            ))
        }
        Some("svg") => {
            let mut response = ([(header::CONTENT_TYPE, "image/svg+xml")], render_svg(&spec)).into_response();
            if let Ok(v) = HeaderValue::from_str(&format!("\"{}\"", s.revision)) {
                response.headers_mut().insert(header::ETAG, v);
            }
            Ok(response)
        }
        Some(other) => Err(ApiError::field("format", format!("expected json or svg, got {other:?}"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvppiBody {
    params: Vec<String>,
    method: Option<EvppiMethod>,
    /// Estimate at every n-th grid point (default 10).
    thin: Option<usize>,
    full_grid: Option<bool>,
}

#[derive(Serialize)]
struct JobCreated {
    job_id: String,
    session: String,
    revision: u64,
}

pub async fn post_evppi(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: EvppiBody = parse_body(&body)?;
    let s = state.snapshot(&id)?;
    let inputs = s
        .params
        .clone()
        .ok_or_else(|| ApiError::field("params", "session has no parameter draws"))?;
    if body.params.is_empty() {
        return Err(ApiError::field("params", "select at least one parameter"));
    }
    for p in &body.params {
        if inputs.column_index(p).is_err() {
            let why = match s.params.as_ref().and_then(|i| i.dropped().iter().find(|d| &d.name == p)) {
                Some(_) => format!("parameter {p:?} was dropped as constant or linearly dependent"),
                None => format!("unknown parameter {p:?}"),
            };
            return Err(ApiError::field("params", why));
        }
    }
    let options = EvppiOptions {
        method: body.method,
        k_subset: match (body.full_grid, body.thin) {
            (Some(true), _) => KSubset::Full,
            (_, Some(0)) => return Err(ApiError::field("thin", "must be positive")),
            (_, Some(n)) => KSubset::Thinned(n),
            _ => KSubset::default(),
        },
    };
    let revision = s.revision;
    let job_id = state.new_job(&id, revision);
    let worker_state = state.clone();
    let worker_id = job_id.clone();
    tokio::task::spawn_blocking(move || {
        let status = match evppi(&s.analysis, &body.params, &inputs, &options) {
            Ok(result) => JobStatus::Done {
                result: Box::new(result),
            },
            Err(e) => JobStatus::Failed { error: e.to_string() },
        };
        worker_state.finish_job(&worker_id, status);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(JobCreated {
            job_id,
            session: id,
            revision,
        }),
    )
        .into_response())
}

pub async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(state.job(&id)?).into_response())
}

pub async fn get_archive(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = state.snapshot(&id)?;
    let text = io::to_archive_json(&s.analysis, &s.extensions);
    let mut response = ([(header::CONTENT_TYPE, "application/json")], text).into_response();
    if let Ok(v) = HeaderValue::from_str(&format!("\"{}\"", s.revision)) {
        response.headers_mut().insert(header::ETAG, v);
    }
    Ok(response)
}
