use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use fedmail::ingest::{ingest_dir, ingest_manifest, write_dataset, IngestError, Source};
use fedmail::runner::{self, ConfigError, RawConfig, RunError};
use fedmail::seed::DEFAULT_SEED;
use fedmail::synth::{gen_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "fedmail",
    version,
    about = "Federated phishing-detection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw mbox/text emails into a JSON-lines dataset.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Run an experiment and write metrics, ledger, summary and plots.
    Run(RunArgs),
    /// List the built-in experiment presets.
    Presets,
}

#[derive(Args)]
struct IngestArgs {
    /// CSV manifest with columns path,label,source.
    #[arg(long, alias = "config", conflicts_with = "dir")]
    manifest: Option<PathBuf>,
    /// Directory with phishing/ and legitimate/ sub-directories.
    #[arg(long, requires = "source")]
    dir: Option<PathBuf>,
    /// Source tag for --dir.
    #[arg(long)]
    source: Option<Source>,
    #[arg(long)]
    out: PathBuf,
    /// Write the parse report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Synthetic-corpus spec (JSON); defaults to the built-in spec.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
}

fn ingest(args: IngestArgs) -> Result<(), RunError> {
    let (samples, report) = match (&args.manifest, &args.dir, args.source) {
        (Some(m), _, _) => ingest_manifest(m)?,
        (None, Some(d), Some(s)) => ingest_dir(d, s)?,
        _ => {
            return Err(ConfigError::Invalid {
                pointer: String::new(),
                message: "give --manifest or --dir with --source".into(),
            }
            .into())
        }
    };
    write_dataset(&args.out, &samples)?;
    info!("wrote {} samples to {}", samples.len(), args.out.display());
    for w in &report.warnings {
        log::warn!("{w:?}");
    }
    if let Some(path) = args.report {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|source| {
            RunError::Ingest(IngestError::Io {
                path: path.display().to_string(),
                source,
            })
        })?;
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), RunError> {
    let spec: SyntheticSpec = match &args.config {
        Some(path) => runner::read_strict(path)?,
        None => SyntheticSpec::default(),
    };
    let samples = gen_synthetic(&spec, args.seed)?;
    write_dataset(&args.out, &samples)?;
    info!(
        "wrote {} synthetic samples to {}",
        samples.len(),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), RunError> {
    let mut raw: RawConfig = match &args.config {
        Some(path) => runner::read_raw_config(path)?,
        None => RawConfig::default(),
    };
    if let Some(name) = args.preset {
        if raw.preset.as_ref().is_some_and(|p| *p != name) {
            info!("--preset {name} replaces config preset {:?}", raw.preset);
        }
        raw.preset = Some(name);
    }
    if args.seed.is_some() {
        raw.seed = args.seed;
    }
    let mut cfg = runner::resolve(raw)?;
    let threads = runner::threads_from_env()?;
    for plan in &mut cfg.runs {
        plan.fl.threads = threads;
    }
    runner::run(&cfg, &args.out, &mut io::stdout())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Presets => {
            for p in runner::PRESETS {
                println!("{:<16} [{}] {}", p.name, p.covers.join(", "), p.description);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
