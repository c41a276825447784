//! On-disk file schemas shared by the subcommands. Every artifact carries a
//! `schema_version` field.

use serde::{Deserialize, Serialize};
use zsm_core::baseline::{CandidateGrid, SmReport};
use zsm_core::bench::BenchSummary;
use zsm_core::map::Building;
use zsm_core::runner::EstimateReport;

pub const CACHE_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Output of `zsm preprocess`: segmented buildings converted to constrained
/// zonotopes, keyed by the source mesh hash.
#[derive(Debug, Serialize, Deserialize)]
pub struct BuildingsCache {
    pub schema_version: u32,
    pub map_sha256: String,
    pub merge: bool,
    pub weld_tol: f64,
    pub offline_seconds: f64,
    pub buildings: Vec<Building>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ZsmReportFile {
    pub schema_version: u32,
    pub epsilon: f64,
    pub los_threshold: f64,
    pub report: EstimateReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SmReportFile {
    pub schema_version: u32,
    pub grid_spacing: f64,
    pub candidate_count: usize,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    pub report: SmReport,
}

/// Cached visibility matrix, keyed by map hash and grid spec.
#[derive(Debug, Serialize, Deserialize)]
pub struct VisibilityCache {
    pub schema_version: u32,
    pub key: String,
    pub grid: CandidateGrid,
    pub matrix: Vec<Vec<bool>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleReportFile {
    pub schema_version: u32,
    pub pitch: f64,
    pub cells_total: usize,
    pub cells_compared: usize,
    pub cells_agree: usize,
    pub agreement: f64,
    pub zero_area_estimate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReportFile {
    pub schema_version: u32,
    pub seed: u64,
    pub summary: BenchSummary,
}
