//! Layer-vs-ROR experiment over a MANET ensemble.
//!
//! Work is fanned out per sample (capillary construction) and per
//! `(sample, layer)` (ROR rating); results are gathered in input order and
//! reduced sequentially, so outputs are identical for any worker count.

use std::fmt::Write as _;

use capillary_core::capillary::{build_capillary, CapillaryResult, DEFAULT_MAX_LAYERS};
use capillary_core::fecsizing::{FecProfile, FecSizer};
use capillary_core::manetgen::{generate_samples, ManetConfig, Sample};
use capillary_core::rormetric::{ror_offline, ror_realtime, RorMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ROR_HEADER: &str = "partition,layer,tolerance,mode,mean_ror,n_samples";
pub const HUNTING_HEADER: &str = "layer,iteration,mean_suspects";

/// `0.036, 0.039, …, 0.078`.
pub fn default_tolerances() -> Vec<f64> {
    (0..15).map(|i| (36 + 3 * i) as f64 / 1000.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub manet: ManetConfig,
    pub max_layers: usize,
    pub tolerances: Vec<f64>,
    pub m: u32,
    pub der: f64,
    pub modes: Vec<RorMode>,
    pub partitions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manet: ManetConfig::with_defaults(50, 20, 42),
            max_layers: DEFAULT_MAX_LAYERS,
            tolerances: default_tolerances(),
            m: 20,
            der: 1e-5,
            modes: vec![RorMode::Realtime, RorMode::Offline],
            partitions: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.manet
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.max_layers == 0 {
            return Err(CliError::Config("max_layers must be at least 1".into()));
        }
        if self.tolerances.is_empty() {
            return Err(CliError::Config("tolerance list is empty".into()));
        }
        for &t in &self.tolerances {
            if !(0.0..1.0).contains(&t) {
                return Err(CliError::Config(format!("tolerance {t} outside [0, 1)")));
            }
        }
        if self.tolerances.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "tolerances must be strictly increasing".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(CliError::Config("no ROR mode selected".into()));
        }
        if self.partitions == 0 {
            return Err(CliError::Config("partitions must be at least 1".into()));
        }
        for &t in &self.tolerances {
            FecProfile::new(self.m, self.der, t).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn modes(&self) -> Vec<RorMode> {
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        modes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RorRow {
    pub partition: usize,
    pub layer: usize,
    pub tolerance: f64,
    pub mode: RorMode,
    pub mean_ror: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HuntingRow {
    pub layer: usize,
    pub iteration: usize,
    pub mean_suspects: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub timeframe: usize,
    pub partition: usize,
    pub status: &'static str,
    pub attempts: usize,
    pub links: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers_built: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complete: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRatio {
    pub layer: usize,
    pub tolerance: f64,
    pub realtime: f64,
    pub offline: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub samples_total: usize,
    pub samples_used: usize,
    pub samples_skipped: usize,
    pub samples_failed: usize,
    pub samples: Vec<SampleRecord>,
    /// Pooled over partitions; present when both modes ran.
    pub mode_ratio: Vec<ModeRatio>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub ror_rows: Vec<RorRow>,
    pub hunting_rows: Vec<HuntingRow>,
    pub manifest: RunManifest,
}

/// Contiguous, near-equal chunks of the timeframe range.
pub fn partition_of(timeframe: usize, timeframes: usize, partitions: usize) -> usize {
    timeframe * partitions / timeframes.max(1)
}

struct Built {
    partition: usize,
    result: CapillaryResult,
}

/// Per sample, per layer: ROR totals indexed `[tolerance][mode]`.
type LayerRor = Vec<Vec<f64>>;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let samples = generate_samples(&cfg.manet).map_err(|e| CliError::Config(e.to_string()))?;
    evaluate_samples(cfg, &samples)
}

/// Routes and rates a given ensemble. Partitions are assigned from the
/// sample timeframes over `cfg.manet.timeframes`.
pub fn evaluate_samples(
    cfg: &ExperimentConfig,
    samples: &[Sample],
) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let modes = cfg.modes();
    let timeframes = cfg.manet.timeframes.max(samples.len());

    let outcomes: Vec<Option<Result<CapillaryResult, String>>> = samples
        .par_iter()
        .map(|s| {
            s.accepted
                .then(|| build_capillary(&s.network, cfg.max_layers).map_err(|e| e.to_string()))
        })
        .collect();

    let mut records = Vec::with_capacity(samples.len());
    let mut built = Vec::new();
    for (s, outcome) in samples.iter().zip(outcomes) {
        let partition = partition_of(s.timeframe, timeframes, cfg.partitions);
        let mut rec = SampleRecord {
            timeframe: s.timeframe,
            partition,
            status: "skipped",
            attempts: s.attempts,
            links: s.network.link_count(),
            layers_built: None,
            complete: None,
            error: None,
        };
        match outcome {
            None => {}
            Some(Ok(result)) => {
                rec.status = "used";
                rec.layers_built = Some(result.layers.len());
                rec.complete = Some(result.complete);
                built.push(Built { partition, result });
            }
            Some(Err(e)) => {
                rec.status = "failed";
                rec.error = Some(e);
            }
        }
        records.push(rec);
    }

    let sizers: Vec<FecSizer> = cfg
        .tolerances
        .iter()
        .map(|&t| {
            FecProfile::new(cfg.m, cfg.der, t)
                .and_then(FecSizer::new)
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let items: Vec<(usize, usize)> = (0..built.len())
        .flat_map(|i| (1..=cfg.max_layers).map(move |k| (i, k)))
        .collect();
    let rated: Vec<LayerRor> = items
        .par_iter()
        .map(|&(i, k)| {
            let pattern = built[i].result.pattern_at(k);
            cfg.tolerances
                .iter()
                .zip(&sizers)
                .map(|(&t, sizer)| {
                    modes
                        .iter()
                        .map(|mode| {
                            let report = match mode {
                                RorMode::Realtime => ror_realtime(pattern, sizer),
                                RorMode::Offline => ror_offline(pattern, t),
                            };
                            report.map(|r| r.total)
                        })
                        .collect::<Result<Vec<f64>, _>>()
                })
                .collect::<Result<LayerRor, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let ror_rows = aggregate_ror(cfg, &modes, &built, &rated);
    let hunting_rows = aggregate_hunting(cfg.max_layers, &built);
    let mode_ratio = mode_ratios(cfg, &modes, &built, &rated);

    let used = built.len();
    let skipped = records.iter().filter(|r| r.status == "skipped").count();
    let failed = records.iter().filter(|r| r.status == "failed").count();
    Ok(ExperimentOutput {
        ror_rows,
        hunting_rows,
        manifest: RunManifest {
            config: cfg.clone(),
            seed: cfg.manet.master_seed,
            samples_total: samples.len(),
            samples_used: used,
            samples_skipped: skipped,
            samples_failed: failed,
            samples: records,
            mode_ratio,
        },
    })
}

fn aggregate_ror(
    cfg: &ExperimentConfig,
    modes: &[RorMode],
    built: &[Built],
    rated: &[LayerRor],
) -> Vec<RorRow> {
    let layers = cfg.max_layers;
    let mut rows = Vec::new();
    for partition in 0..cfg.partitions {
        let members: Vec<usize> = (0..built.len())
            .filter(|&i| built[i].partition == partition)
            .collect();
        for k in 1..=layers {
            for (ti, &t) in cfg.tolerances.iter().enumerate() {
                for (mi, &mode) in modes.iter().enumerate() {
                    let sum: f64 = members
                        .iter()
                        .map(|&i| rated[i * layers + (k - 1)][ti][mi])
                        .sum();
                    let n = members.len();
                    rows.push(RorRow {
                        partition,
                        layer: k,
                        tolerance: t,
                        mode,
                        mean_ror: if n == 0 { f64::NAN } else { sum / n as f64 },
                        n_samples: n,
                    });
                }
            }
        }
    }
    rows
}

/// Mean suspect count per hunting iteration, over the samples that built
/// the layer. A sample whose loop ended early contributes its final count
/// to later iterations.
fn aggregate_hunting(max_layers: usize, built: &[Built]) -> Vec<HuntingRow> {
    let mut rows = Vec::new();
    for k in 1..=max_layers {
        let traces: Vec<&[usize]> = built
            .iter()
            .filter_map(|b| b.result.layers.get(k - 1))
            .map(|l| l.hunting_trace.as_slice())
            .collect();
        let Some(len) = traces.iter().map(|t| t.len()).max() else {
            continue;
        };
        for it in 0..len {
            let sum: usize = traces
                .iter()
                .map(|t| t.get(it).or(t.last()).copied().unwrap_or(0))
                .sum();
            rows.push(HuntingRow {
                layer: k,
                iteration: it + 1,
                mean_suspects: sum as f64 / traces.len() as f64,
            });
        }
    }
    rows
}

fn mode_ratios(
    cfg: &ExperimentConfig,
    modes: &[RorMode],
    built: &[Built],
    rated: &[LayerRor],
) -> Vec<ModeRatio> {
    let (Some(rt), Some(off)) = (
        modes.iter().position(|&m| m == RorMode::Realtime),
        modes.iter().position(|&m| m == RorMode::Offline),
    ) else {
        return Vec::new();
    };
    if built.is_empty() {
        return Vec::new();
    }
    let layers = cfg.max_layers;
    let n = built.len() as f64;
    let mut out = Vec::new();
    for k in 1..=layers {
        for (ti, &t) in cfg.tolerances.iter().enumerate() {
            let mean = |mi: usize| -> f64 {
                (0..built.len())
                    .map(|i| rated[i * layers + (k - 1)][ti][mi])
                    .sum::<f64>()
                    / n
            };
            let (realtime, offline) = (mean(rt), mean(off));
            out.push(ModeRatio {
                layer: k,
                tolerance: t,
                realtime,
                offline,
                ratio: realtime / offline,
            });
        }
    }
    out
}

pub fn ror_csv(rows: &[RorRow]) -> String {
    let mut s = String::from(ROR_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.partition,
            r.layer,
            r.tolerance,
            r.mode.as_str(),
            r.mean_ror,
            r.n_samples
        );
    }
    s
}

pub fn hunting_csv(rows: &[HuntingRow]) -> String {
    let mut s = String::from(HUNTING_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.layer, r.iteration, r.mean_suspects);
    }
    s
}
