//! Run-directory file names and the structured text records written there.

use std::fs;
use std::path::Path;

use mpcx_core::scenario::ScenarioSpec;
use mpcx_core::SounderConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, Preset, SounderArgs};

pub const TRUTH: &str = "truth.csv";
pub const SCENARIO_SIDECAR: &str = "scenario.toml";
pub const RESPONSE: &str = "response.bin";
pub const SOUNDER: &str = "sounder.toml";
pub const ESTIMATES: &str = "estimates.csv";
pub const TRACE: &str = "trace.csv";
pub const EXTRACT_REPORT: &str = "extract_report.toml";
pub const ASSOCIATION: &str = "association.toml";
pub const PAIRS: &str = "pairs.csv";
pub const REPORT: &str = "report.toml";
pub const PLOTS: &str = "plots";
pub const TIMINGS: &str = "timings";

pub const SCENARIO_HEADER: &str = "\
# Ground-truth scenario record.
#
# Draw order per cluster (ChaCha8 stream seeded with spec.seed):
#   center delay ~ U(center_delay_range_s), center aod/aoa ~ U(-angle_limit, angle_limit),
#   cluster power ~ U(-cluster_power_range_db, 0) dB   (skipped when centers are given)
# then per path:
#   delay = center + |N(0, delay_spread_s)|, redrawn until < max_delay_s
#   aod, aoa = center + N(0, spread), redrawn until inside [-0.5, 0.5)
#   power_db = cluster power - intra_cluster_decay_db_per_ns * excess_ns + N(0, path_power_spread_db)
#   phase ~ U(0, 2pi)
# Paths more than dynamic_range_db below the strongest are dropped.
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSidecar {
    pub generated: usize,
    pub retained: usize,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionEcho {
    pub k_dom: usize,
    pub k_g: usize,
    pub k_up: usize,
    pub oversample: usize,
    pub final_ls: bool,
    pub sage_sweeps: usize,
    pub residual_stop: f64,
    pub subgrid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub n_estimates: usize,
    pub initial_power: f64,
    pub final_residual_power: f64,
    pub normalized_error: f64,
    pub sage_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub sounder: SounderConfig,
    pub extraction: ExtractionEcho,
    pub result: ExtractionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub unmatched_cost: f64,
    pub n_phys: usize,
    pub n_est: usize,
    pub k_pa: usize,
    pub pre_pa_cost: f64,
    pub post_pa_cost: f64,
    pub s_tau: usize,
    pub s_aoa: usize,
    pub s_aod: usize,
    pub s_joint: usize,
    pub unmatched_phys: usize,
    pub unmatched_est: usize,
}

impl AssociationReport {
    pub fn new(r: &mpcx_core::AssociationResult, n_phys: usize, n_est: usize, unmatched_cost: f64) -> Self {
        AssociationReport {
            unmatched_cost,
            n_phys,
            n_est,
            k_pa: r.k_pa(),
            pre_pa_cost: r.pre_pa_cost,
            post_pa_cost: r.post_pa_cost,
            s_tau: r.bin_sets.delay.len(),
            s_aoa: r.bin_sets.aoa.len(),
            s_aod: r.bin_sets.aod.len(),
            s_joint: r.bin_sets.joint.len(),
            unmatched_phys: r.unmatched_phys.len(),
            unmatched_est: r.unmatched_est.len(),
        }
    }
}

/// Consolidated run summary. Everything here is recomputed from the stage
/// artifacts; wall-clock timings live in a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n_p: usize,
    pub k_dom: usize,
    pub normalized_error: f64,
    pub normalized_error_db: f64,
    pub sounder: SounderConfig,
    pub extraction: ExtractionEcho,
    pub association: AssociationReport,
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T, header: &str) -> CliResult<()> {
    let body =
        toml::to_string(value).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    write_text(path, &format!("{header}{body}"))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string().trim_end().to_string() })
}

/// A required input of the `report` stage.
pub fn require(dir: &Path, artifact: &'static str, stage: &'static str) -> CliResult<std::path::PathBuf> {
    let path = dir.join(artifact);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { dir: dir.to_path_buf(), artifact, stage })
    }
}

pub fn sounder_config(args: &SounderArgs) -> CliResult<SounderConfig> {
    let cfg = match (&args.config, args.preset) {
        (Some(path), _) => read_toml::<SounderConfig>(path)?,
        (None, Some(Preset::Full)) => SounderConfig::full(),
        (None, Some(Preset::Desk)) => SounderConfig::desk(),
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_timing(out_dir: &Path, stage: &str, seconds: f64) -> CliResult<()> {
    let dir = out_dir.join(TIMINGS);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_text(&dir.join(format!("{stage}.toml")), &format!("seconds = {seconds}\n"))
}
