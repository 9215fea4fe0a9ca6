//! Commands behind the `capillary` binary: ensemble generation, routing,
//! FEC tables, ROR rating, and the layer-vs-ROR experiment.

pub mod experiment;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use capillary_core::capillary::{build_capillary, LayerResult};
use capillary_core::fecsizing::{fec_block_size, FecProfile, FecSizer};
use capillary_core::manetgen::{generate_samples, ManetConfig};
use capillary_core::netmodel::{parse_network, serialize_network, validate_routable, FlowPattern};
use capillary_core::rormetric::{ror_offline, ror_realtime, RorMode, RorReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use experiment::{evaluate_samples, run_experiment, ExperimentConfig, ExperimentOutput};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or input files; exit code 1.
    #[error("{0}")]
    Config(String),
    /// Failure while running; exit code 2.
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
        }
    }
}

/// Reads an input file; a missing or unreadable input is a usage error.
pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct EnsembleEntry {
    pub timeframe: usize,
    pub file: String,
    pub accepted: bool,
    pub attempts: usize,
    pub links: usize,
}

#[derive(Debug, Serialize)]
pub struct EnsembleManifest {
    pub config: ManetConfig,
    pub samples: Vec<EnsembleEntry>,
    pub skipped: Vec<usize>,
}

/// Writes one network file per timeframe and `manifest.json` into `out`.
pub fn cmd_gen(cfg: &ManetConfig, out: &Path) -> Result<EnsembleManifest, CliError> {
    let samples = generate_samples(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let file = format!("sample_{:04}.json", s.timeframe);
        let mut text = serialize_network(&s.network);
        text.push('\n');
        write_file(&out.join(&file), &text)?;
        entries.push(EnsembleEntry {
            timeframe: s.timeframe,
            file,
            accepted: s.accepted,
            attempts: s.attempts,
            links: s.network.link_count(),
        });
    }
    let manifest = EnsembleManifest {
        config: cfg.clone(),
        skipped: entries
            .iter()
            .filter(|e| !e.accepted)
            .map(|e| e.timeframe)
            .collect(),
        samples: entries,
    };
    write_file(&out.join("manifest.json"), &to_json(&manifest))?;
    Ok(manifest)
}

/// Routing output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoutingFile {
    pub layers: Vec<LayerResult>,
    pub pattern: FlowPattern,
    pub complete: bool,
    /// Pattern as of each layer, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_patterns: Option<Vec<FlowPattern>>,
}

pub fn cmd_route(
    network_text: &str,
    max_layers: usize,
    all_layers: bool,
) -> Result<String, CliError> {
    let net = parse_network(network_text).map_err(|e| CliError::Config(e.to_string()))?;
    if max_layers == 0 {
        return Err(CliError::Config("--max-layers must be at least 1".into()));
    }
    if validate_routable(&net).max_disjoint_paths == 0 {
        return Err(CliError::Runtime(format!(
            "{net} is unroutable: no path from source to sink"
        )));
    }
    let result = build_capillary(&net, max_layers).map_err(|e| CliError::Runtime(e.to_string()))?;
    let routing = RoutingFile {
        layers: result.layers,
        pattern: result.pattern,
        complete: result.complete,
        layer_patterns: all_layers.then_some(result.layer_patterns),
    };
    Ok(to_json(&routing))
}

/// `p,N,N/M` rows for each loss rate.
pub fn cmd_fec_table(m: u32, der: f64, ps: &[f64]) -> Result<String, CliError> {
    let profile = FecProfile::new(m, der, 0.0).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(p) = ps.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(CliError::Config(format!(
            "loss rate {p} has no finite block size; p must lie in [0, 1)"
        )));
    }
    let mut s = String::from("p,N,N/M\n");
    for &p in ps {
        let n = fec_block_size(&profile, p).map_err(|e| CliError::Config(e.to_string()))?;
        let _ = writeln!(s, "{},{},{:?}", p, n, n as f64 / m as f64);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const ROR_CSV_HEADER: &str =
    "mode,tolerance,total,contributing,skipped_full_load,below_tolerance";

/// Rates the final pattern of a routing file, or the pattern as of `layer`
/// when the file carries per-layer patterns.
pub fn cmd_ror(
    routing_text: &str,
    mode: RorMode,
    profile: FecProfile,
    layer: Option<usize>,
    format: ReportFormat,
) -> Result<String, CliError> {
    let routing: RoutingFile = serde_json::from_str(routing_text)
        .map_err(|e| CliError::Config(format!("malformed routing file: {e}")))?;
    let pattern = match layer {
        None => &routing.pattern,
        Some(k) => {
            let patterns = routing.layer_patterns.as_ref().ok_or_else(|| {
                CliError::Config(
                    "routing file has no per-layer patterns (route with --all-layers)".into(),
                )
            })?;
            if k == 0 {
                return Err(CliError::Config("--layer is 1-based".into()));
            }
            &patterns[k.min(patterns.len()) - 1]
        }
    };
    let report: RorReport = match mode {
        RorMode::Realtime => {
            let sizer = FecSizer::new(profile).map_err(|e| CliError::Config(e.to_string()))?;
            ror_realtime(pattern, &sizer)
        }
        RorMode::Offline => ror_offline(pattern, profile.t),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(match format {
        ReportFormat::Json => to_json(&report),
        ReportFormat::Csv => format!(
            "{ROR_CSV_HEADER}\n{},{},{},{},{},{}\n",
            report.mode.as_str(),
            profile.t,
            report.total,
            report.contributions.len(),
            report.skipped_full_load.len(),
            report.below_tolerance
        ),
    })
}

/// Runs the experiment on a pool of `workers` threads (0 = rayon default)
/// and writes `ror_vs_layer.csv`, `hunting.csv` and `run_manifest.json`.
pub fn cmd_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    workers: usize,
) -> Result<ExperimentOutput, CliError> {
    let output = run_with_workers(cfg, workers)?;
    write_file(
        &out.join("ror_vs_layer.csv"),
        &experiment::ror_csv(&output.ror_rows),
    )?;
    write_file(
        &out.join("hunting.csv"),
        &experiment::hunting_csv(&output.hunting_rows),
    )?;
    write_file(&out.join("run_manifest.json"), &to_json(&output.manifest))?;
    Ok(output)
}

pub fn run_with_workers(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}
