use std::path::PathBuf;
use std::process::ExitCode;

use capillary_cli::{
    cmd_experiment, cmd_fec_table, cmd_gen, cmd_ror, cmd_route, read_file, write_file, CliError,
    ExperimentConfig, ReportFormat,
};
use capillary_core::capillary::DEFAULT_MAX_LAYERS;
use capillary_core::fecsizing::FecProfile;
use capillary_core::manetgen::{default_radius, ManetConfig};
use capillary_core::rormetric::RorMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "capillary",
    version,
    about = "Capillary routing and ROR experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-walk MANET ensemble.
    Gen {
        #[command(flatten)]
        manet: ManetFlags,
        /// Output directory for sample files and manifest.json.
        #[arg(long, default_value = "ensemble")]
        out: PathBuf,
    },
    /// Build the capillary routing of a network file.
    Route {
        network: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_LAYERS)]
        max_layers: usize,
        /// Also emit the routing pattern as of every layer.
        #[arg(long)]
        all_layers: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print FEC block sizes as CSV.
    FecTable {
        #[arg(long, default_value_t = 20)]
        m: u32,
        #[arg(long, default_value_t = 1e-5)]
        der: f64,
        /// Comma-separated loss rates.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate a routing file with ROR.
    Ror {
        routing: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Realtime)]
        mode: ModeArg,
        #[arg(long, default_value_t = 20)]
        m: u32,
        #[arg(long, default_value_t = 1e-5)]
        der: f64,
        /// Static tolerance t.
        #[arg(long, default_value_t = 0.036)]
        tolerance: f64,
        /// Rate the pattern as of this layer (needs a --all-layers routing).
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Run the layer-vs-ROR experiment and write CSV results.
    Experiment(ExperimentFlags),
}

#[derive(Args)]
struct ManetFlags {
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    timeframes: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Coverage radius; defaults to a mean degree of about 8.
    #[arg(long)]
    radius: Option<f64>,
    /// Step length per timeframe; defaults to radius / 4.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    #[arg(long, default_value_t = 1.0)]
    height: f64,
    #[arg(long, default_value_t = 2)]
    min_disjoint_paths: usize,
}

impl ManetFlags {
    fn config(&self) -> ManetConfig {
        let area = (self.width, self.height);
        let radius = self
            .radius
            .unwrap_or_else(|| default_radius(self.nodes.max(1), area));
        ManetConfig {
            node_count: self.nodes,
            area,
            coverage_radius: radius,
            step_length: self.step.unwrap_or(radius / 4.0),
            timeframes: self.timeframes,
            master_seed: self.seed,
            min_disjoint_paths: self.min_disjoint_paths,
        }
    }
}

#[derive(Args)]
struct ExperimentFlags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    timeframes: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_layers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    tolerances: Option<Vec<f64>>,
    #[arg(long)]
    der: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, value_delimiter = ',', value_enum)]
    modes: Option<Vec<ModeArg>>,
    #[arg(long)]
    partitions: Option<usize>,
    /// Worker threads (0 = one per core). Does not affect the output.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl ExperimentFlags {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            None => ExperimentConfig::default(),
        };
        let manet = &mut cfg.manet;
        if let Some(seed) = self.seed {
            manet.master_seed = seed;
        }
        if let Some(t) = self.timeframes {
            manet.timeframes = t;
        }
        if let Some(n) = self.nodes {
            manet.node_count = n;
            if self.radius.is_none() {
                manet.coverage_radius = default_radius(n.max(1), manet.area);
                if self.step.is_none() {
                    manet.step_length = manet.coverage_radius / 4.0;
                }
            }
        }
        if let Some(r) = self.radius {
            manet.coverage_radius = r;
            if self.step.is_none() {
                manet.step_length = r / 4.0;
            }
        }
        if let Some(s) = self.step {
            manet.step_length = s;
        }
        if let Some(k) = self.max_layers {
            cfg.max_layers = k;
        }
        if let Some(t) = &self.tolerances {
            cfg.tolerances = t.clone();
        }
        if let Some(d) = self.der {
            cfg.der = d;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(modes) = &self.modes {
            cfg.modes = modes.iter().map(|&m| m.into()).collect();
        }
        if let Some(p) = self.partitions {
            cfg.partitions = p;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Realtime,
    Offline,
}

impl From<ModeArg> for RorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Realtime => RorMode::Realtime,
            ModeArg::Offline => RorMode::Offline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { manet, out } => {
            let m = cmd_gen(&manet.config(), &out)?;
            eprintln!(
                "wrote {} samples ({} skipped) to {}",
                m.samples.len(),
                m.skipped.len(),
                out.display()
            );
            Ok(())
        }
        Command::Route {
            network,
            max_layers,
            all_layers,
            out,
        } => emit(
            out.as_ref(),
            &cmd_route(&read_file(&network)?, max_layers, all_layers)?,
        ),
        Command::FecTable { m, der, p, out } => emit(out.as_ref(), &cmd_fec_table(m, der, &p)?),
        Command::Ror {
            routing,
            mode,
            m,
            der,
            tolerance,
            layer,
            format,
        } => {
            let profile =
                FecProfile::new(m, der, tolerance).map_err(|e| CliError::Config(e.to_string()))?;
            let format = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            emit(
                None,
                &cmd_ror(&read_file(&routing)?, mode.into(), profile, layer, format)?,
            )
        }
        Command::Experiment(flags) => {
            let cfg = flags.config()?;
            let output = cmd_experiment(&cfg, &flags.out, flags.workers)?;
            let m = &output.manifest;
            eprintln!(
                "{} samples: {} used, {} skipped, {} failed; results in {}",
                m.samples_total,
                m.samples_used,
                m.samples_skipped,
                m.samples_failed,
                flags.out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
