//! Request and response bodies. Every body carries `version`; requests with
//! unknown fields or another version are rejected.

use mixbo::design_space::{DesignSpace, MixedPoint, Value};
use mixbo::driver::{EvalStatus, FrontPoint, Origin, Phase, RunConfig, RunOutputs};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number};

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub version: u32,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Links {
    pub status: String,
    pub ask: String,
    pub tell: String,
    pub results: String,
    pub history: String,
}

impl Links {
    pub fn for_session(id: &str) -> Self {
        let base = format!("/v1/sessions/{id}");
        Self {
            status: base.clone(),
            ask: format!("{base}/ask"),
            tell: format!("{base}/tell"),
            results: format!("{base}/results"),
            history: format!("{base}/history"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CreateResponse {
    pub version: u32,
    pub id: String,
    pub relaxed_dimension: usize,
    pub phase: Phase,
    pub doe_size: usize,
    pub budget: usize,
    pub links: Links,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AskResponse {
    pub version: u32,
    pub token: String,
    /// History id the evaluation will get.
    pub evaluation: usize,
    pub origin: Origin,
    /// Variable name to value; categorical values are level labels.
    pub point: Map<String, serde_json::Value>,
    pub active: Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TellRequest {
    pub version: u32,
    pub token: String,
    /// `null` entries count as non-finite and fail the evaluation.
    #[serde(default)]
    pub f: Vec<Option<f64>>,
    #[serde(default)]
    pub g: Vec<Option<f64>>,
    #[serde(default = "ok_status")]
    pub status: EvalStatus,
}

fn ok_status() -> EvalStatus {
    EvalStatus::Ok
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TellResponse {
    pub version: u32,
    pub evaluation: usize,
    /// Stored status: non-finite values turn `ok` into `failed`.
    pub status: EvalStatus,
    pub phase: Phase,
    pub evaluations: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatusResponse {
    pub version: u32,
    pub id: String,
    pub phase: Phase,
    pub evaluations: usize,
    pub failed: usize,
    pub feasible: usize,
    pub doe_size: usize,
    pub budget: usize,
    /// Token of the outstanding ask, if any.
    pub pending_token: Option<String>,
    pub relaxed_dimension: usize,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub links: Links,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireFrontPoint {
    pub id: usize,
    pub point: Map<String, serde_json::Value>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireProximity {
    /// `null` when the database front is empty.
    pub distances: Vec<Option<f64>>,
    pub database_total: usize,
    pub database_survivors: usize,
    pub predicted_total: usize,
    pub predicted_survivors: usize,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultsResponse {
    pub version: u32,
    pub phase: Phase,
    pub evaluations: usize,
    pub forced: bool,
    pub objective_names: Vec<String>,
    pub constraint_names: Vec<String>,
    pub pf_database: Vec<WireFrontPoint>,
    pub predicted_pf: Vec<WireFrontPoint>,
    pub proximity: WireProximity,
    pub reference_point: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub version: u32,
    pub error: ErrorDetail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Links>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

pub fn named_values(space: &DesignSpace, p: &MixedPoint) -> Map<String, serde_json::Value> {
    space
        .variables()
        .iter()
        .enumerate()
        .map(|(i, var)| {
            let v = match p.values[i] {
                Value::Real(x) => Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number),
                Value::Int(k) => serde_json::Value::from(k),
                Value::Level(_) => serde_json::Value::String(space.format_value(i, &p.values[i])),
            };
            (var.name.clone(), v)
        })
        .collect()
}

pub fn activity(space: &DesignSpace, p: &MixedPoint) -> Map<String, serde_json::Value> {
    space
        .variables()
        .iter()
        .zip(&p.active)
        .map(|(var, a)| (var.name.clone(), serde_json::Value::Bool(*a)))
        .collect()
}

fn front(space: &DesignSpace, pts: &[FrontPoint]) -> Vec<WireFrontPoint> {
    pts.iter()
        .map(|p| WireFrontPoint {
            id: p.id,
            point: named_values(space, &p.point),
            f: p.f.clone(),
            g: p.g.clone(),
        })
        .collect()
}

pub fn results(config: &RunConfig, phase: Phase, evaluations: usize, forced: bool, out: &RunOutputs) -> ResultsResponse {
    ResultsResponse {
        version: VERSION,
        phase,
        evaluations,
        forced,
        objective_names: config.objective_names.clone(),
        constraint_names: config.constraint_names.clone(),
        pf_database: front(&config.space, &out.pf_database),
        predicted_pf: front(&config.space, &out.predicted_pf),
        proximity: WireProximity {
            distances: out.proximity.distances.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            database_total: out.proximity.database_total,
            database_survivors: out.proximity.database_survivors,
            predicted_total: out.proximity.predicted_total,
            predicted_survivors: out.proximity.predicted_survivors,
            summary: out.proximity.summary(),
        },
        reference_point: out.reference_point.clone(),
        warnings: out.warnings.clone(),
    }
}
