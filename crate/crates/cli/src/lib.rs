//! The `sctsa` command line: staged pipeline runs over a run directory.
//!
//! Every subcommand reads its upstream artifacts from the run directory,
//! writes its own under `<stage>/`, and records input and output digests in
//! `manifest.json`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod artifact;
pub mod config;
pub mod report;
pub mod stages;

pub use config::RunConfig;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        source: sctsa_core::Error,
    },

    #[error("missing artifacts for stage(s): {}", .0.join(", "))]
    Missing(Vec<String>),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { source, .. } if source.is_budget() => EXIT_BUDGET,
            CliError::Stage {
                source: sctsa_core::Error::Io(_),
                ..
            } => EXIT_OTHER,
            CliError::Stage { .. } | CliError::Missing(_) | CliError::Data(_) => EXIT_DATA,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    pub fn in_stage(stage: &str) -> impl Fn(sctsa_core::Error) -> CliError + '_ {
        move |source| CliError::Stage {
            stage: stage.to_string(),
            source,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "sctsa", version, about = "Topological simplicial analysis of timestamped single-cell data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory [default: $SCTSA_OUT, else ./sctsa-run].
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override any config key, e.g. `-s filtration.max_dim=5`. Repeatable.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the bundled bifurcating synthetic dataset.
    Synth(SynthArgs),
    /// Load an expression table and compute correlation distances.
    Ingest(IngestArgs),
    /// Embed all cells with MDS or PCA.
    Embed(EmbedArgs),
    /// Normalized simplicial complexity per group.
    Complexity(ComplexityArgs),
    /// Persistence barcodes and Betti curves per group.
    Barcode(BarcodeArgs),
    /// Temporal Mapper graph.
    Mapper(MapperArgs),
    /// Hierarchical clustering of groups by their statistics.
    Lineage(LineageArgs),
    /// Consolidated summary of a finished run.
    Report,
    /// Every stage from ingest to report.
    Run(IngestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Destination file [default: <run>/synth/expression.csv].
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub cells_per_group: Option<usize>,
    /// Generator seed (`synth.seed`).
    #[arg(long)]
    pub synth_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Expression table (`input.path`).
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = ["pearson", "spearman"])]
    pub correlation: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[arg(long, value_parser = ["mds", "pca"])]
    pub method: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ComplexityArgs {
    #[arg(long)]
    pub m_points: Option<usize>,
    /// Null replicates B.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Thresholds per filtration.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Time-delay limit: an integer or `inf`.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long, value_parser = ["rips", "witness"])]
    pub complex: Option<String>,
    #[arg(long)]
    pub landmarks: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BarcodeArgs {
    #[arg(long)]
    pub m_points: Option<usize>,
    #[arg(long)]
    pub homology_max_dim: Option<usize>,
    /// Largest complex to build, in simplices.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MapperArgs {
    /// Cover intervals per lens dimension.
    #[arg(long)]
    pub intervals: Option<usize>,
    /// Fractional overlap of neighbouring intervals.
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Time-delay limit: an integer or `inf`.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long, value_parser = ["mds", "pca"])]
    pub lens: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct LineageArgs {
    #[arg(long, value_parser = ["complexity", "betti"])]
    pub features: Option<String>,
    #[arg(long, value_parser = ["single", "average", "complete"])]
    pub linkage: Option<String>,
    #[arg(long, value_parser = ["euclidean", "correlation"])]
    pub metric: Option<String>,
}

fn push<T: ToString>(out: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.to_string()));
    }
}

fn quoted(out: &mut Vec<(String, String)>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key.to_string(), format!("{v:?}")));
    }
}

fn command_overrides(cmd: &Command) -> Vec<(String, String)> {
    let mut o = Vec::new();
    match cmd {
        Command::Synth(a) => {
            push(&mut o, "synth.groups", &a.groups);
            push(&mut o, "synth.cells_per_group", &a.cells_per_group);
            push(&mut o, "synth.seed", &a.synth_seed);
        }
        Command::Ingest(a) | Command::Run(a) => {
            quoted(&mut o, "input.path", &a.input.as_ref().map(|p| p.display().to_string()));
            quoted(&mut o, "input.correlation", &a.correlation);
        }
        Command::Embed(a) => {
            quoted(&mut o, "embed.method", &a.method);
            push(&mut o, "embed.dim", &a.dim);
        }
        Command::Complexity(a) => {
            push(&mut o, "complexity.m_points", &a.m_points);
            push(&mut o, "complexity.replicates", &a.replicates);
            push(&mut o, "complexity.repetitions", &a.repetitions);
            push(&mut o, "filtration.max_dim", &a.max_dim);
            push(&mut o, "filtration.grid", &a.grid);
            push(&mut o, "filtration.tau", &a.tau);
            quoted(&mut o, "filtration.complex", &a.complex);
            push(&mut o, "filtration.landmarks", &a.landmarks);
            push(&mut o, "filtration.nu", &a.nu);
        }
        Command::Barcode(a) => {
            push(&mut o, "barcode.m_points", &a.m_points);
            push(&mut o, "barcode.homology_max_dim", &a.homology_max_dim);
            push(&mut o, "barcode.budget", &a.budget);
        }
        Command::Mapper(a) => {
            push(&mut o, "mapper.intervals", &a.intervals);
            push(&mut o, "mapper.overlap", &a.overlap.map(|x| format!("{x:?}")));
            push(&mut o, "mapper.tau", &a.tau);
            quoted(&mut o, "mapper.lens", &a.lens);
        }
        Command::Lineage(a) => {
            quoted(&mut o, "lineage.features", &a.features);
            quoted(&mut o, "lineage.linkage", &a.linkage);
            quoted(&mut o, "lineage.metric", &a.metric);
        }
        Command::Report => {}
    }
    o
}

/// Config file, then `--set`, then subcommand flags, then global flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    for s in &cli.global.set {
        let (k, v) = config::split_assignment(s)?;
        overrides.push((k.to_string(), v.to_string()));
    }
    overrides.extend(command_overrides(&cli.command));
    let mut cfg = RunConfig::load(cli.global.config.as_deref(), &overrides)?;
    if let Some(out) = &cli.global.out {
        cfg.out = Some(out.clone());
    }
    if let Some(t) = cli.global.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Other(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => stages::cmd_synth(&cfg, a.output.as_deref()),
        Command::Ingest(_) => stages::cmd_ingest(&cfg),
        Command::Embed(_) => stages::cmd_embed(&cfg),
        Command::Complexity(_) => stages::cmd_complexity(&cfg),
        Command::Barcode(_) => stages::cmd_barcode(&cfg),
        Command::Mapper(_) => stages::cmd_mapper(&cfg),
        Command::Lineage(_) => stages::cmd_lineage(&cfg),
        Command::Report => report::cmd_report(&cfg),
        Command::Run(_) => {
            stages::cmd_ingest(&cfg)?;
            stages::cmd_embed(&cfg)?;
            stages::cmd_complexity(&cfg)?;
            stages::cmd_barcode(&cfg)?;
            stages::cmd_mapper(&cfg)?;
            stages::cmd_lineage(&cfg)?;
            report::cmd_report(&cfg)
        }
    })
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sctsa: {e}");
            e.exit_code()
        }
    }
}
