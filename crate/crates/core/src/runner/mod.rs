//! Config loading, experiment presets, and the ingest → partition → train →
//! report pipeline behind `fedmail run`.

mod config;
mod presets;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

pub use config::{
    default_corpus, load_config, parse_config, parse_strict, read_raw_config, read_strict, resolve,
    ConfigError, DatasetSource, RawConfig, RunConfig, RunPlan, DEFAULT_PLOTS,
};
pub use presets::{find_preset, preset_names, Preset, PresetRun, PRESETS};

use crate::engine::{run_training_observed, EngineError, RunRecord, ShardReport};
use crate::ingest::{
    ingest_manifest, prepare, read_dataset, EmailSample, IngestError, TokenizedSample,
};
use crate::model::serialize;
use crate::partition::{balance_classes, PartitionError, PartitionKind};
use crate::report::{emit_csv, emit_ledger_csv, emit_plot, emit_summary, ReportError};
use crate::seed;
use crate::synth::{gen_synthetic, SynthError};

pub const THREADS_ENV: &str = "FEDMAIL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("check failed: {0}")]
    Check(String),
}

impl RunError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Synth(_) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.into(),
        source,
    }
}

/// Worker-thread cap from `FEDMAIL_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::Invalid {
                pointer: String::new(),
                message: format!("{THREADS_ENV} must be a positive integer, got {v:?}"),
            }),
        },
    }
}

pub fn load_samples(
    dataset: &DatasetSource,
    seed_value: u64,
) -> Result<Vec<EmailSample>, RunError> {
    Ok(match dataset {
        DatasetSource::Path(p) => read_dataset(p)?,
        DatasetSource::Manifest(p) => ingest_manifest(p)?.0,
        DatasetSource::Synthetic(spec) => gen_synthetic(spec, seed_value)?,
    })
}

/// Tokenize and, when asked, balance the classes.
pub fn build_corpus(
    samples: &[EmailSample],
    cfg: &RunConfig,
) -> Result<Vec<TokenizedSample>, RunError> {
    let first = &cfg.runs[0].fl;
    let corpus = prepare(samples, first.vocab_dim);
    if cfg.balance {
        Ok(balance_classes(
            &corpus,
            seed::derive(first.seed, "balance", &[]),
        )?)
    } else {
        Ok(corpus)
    }
}

#[derive(Serialize)]
struct PartitionReport<'a> {
    kind: &'a PartitionKind,
    num_clients: usize,
    seed: u64,
    corpus_size: usize,
    unassigned: usize,
    clients: &'a [ShardReport],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Every active (client, epoch) must move exactly one model each way.
pub fn check_traffic(record: &RunRecord) -> Result<(), RunError> {
    for row in &record.ledger.rows {
        let active = row.bytes_up > 0 || row.bytes_down > 0;
        if active && (row.bytes_up != record.model_bytes || row.bytes_down != record.model_bytes) {
            return Err(RunError::Check(format!(
                "client {} epoch {}: {} bytes up, {} down, model is {} bytes",
                row.client_id, row.epoch, row.bytes_up, row.bytes_down, record.model_bytes
            )));
        }
    }
    Ok(())
}

/// Train one planned run and write its outputs into `dir`.
pub fn execute_run(
    corpus: &[TokenizedSample],
    plan: &RunPlan,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<RunRecord, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let snap_dir = dir.join("snapshots");
    if cfg.snapshots {
        fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    }
    let record = run_training_observed(corpus, &plan.spec, &plan.fl, |epoch, params| {
        if cfg.snapshots {
            let path = snap_dir.join(format!("epoch_{epoch:03}.fmpr"));
            fs::write(&path, serialize(params))
                .map_err(|e| EngineError::Observer(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    })?;

    emit_csv(&record, &dir.join("metrics.csv"))?;
    emit_ledger_csv(&record, &dir.join("ledger.csv"))?;
    emit_summary(&record, &dir.join("summary.json"))?;
    let report = PartitionReport {
        kind: &plan.spec.kind,
        num_clients: plan.spec.num_clients,
        seed: plan.spec.seed,
        corpus_size: corpus.len(),
        unassigned: record.unassigned,
        clients: &record.shards,
    };
    write_json(&dir.join("partition.json"), &report)?;
    for metric in &cfg.plots {
        emit_plot(&record, metric, &dir.join(format!("{metric}.svg")))?;
    }
    Ok(record)
}

/// Run every plan of `cfg` under `out`, writing the resolved config next
/// to the results. Progress lines go to `progress`.
pub fn run(
    cfg: &RunConfig,
    out: &Path,
    progress: &mut dyn std::io::Write,
) -> Result<Vec<RunRecord>, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(&out.join("config.json"), cfg)?;
    let samples = load_samples(&cfg.dataset, cfg.runs[0].fl.seed)?;
    let corpus = build_corpus(&samples, cfg)?;
    info!(
        "corpus: {} samples ({} after balancing)",
        samples.len(),
        corpus.len()
    );

    let mut records = Vec::with_capacity(cfg.runs.len());
    for plan in &cfg.runs {
        let dir = if plan.label.is_empty() {
            out.to_path_buf()
        } else {
            out.join(&plan.label)
        };
        let record = execute_run(&corpus, plan, cfg, &dir)?;
        let name = if plan.label.is_empty() {
            "run"
        } else {
            plan.label.as_str()
        };
        let acc = record.final_epoch().and_then(|e| e.global_mean.accuracy);
        let _ = writeln!(
            progress,
            "{name}: K={} E={} final mean global accuracy {acc:?}",
            plan.fl.num_clients, plan.fl.global_epochs
        );
        if cfg.check_traffic {
            for row in &record.ledger.rows {
                let _ = writeln!(
                    progress,
                    "{name} epoch {} client {}: up {} down {}",
                    row.epoch, row.client_id, row.bytes_up, row.bytes_down
                );
            }
            check_traffic(&record)?;
            let _ = writeln!(
                progress,
                "{name}: constant {} bytes per active client per epoch",
                2 * record.model_bytes
            );
        }
        records.push(record);
    }
    if cfg.check_traffic {
        let sizes: Vec<u64> = records.iter().map(|r| r.model_bytes).collect();
        if sizes.windows(2).any(|w| w[0] != w[1]) {
            return Err(RunError::Check(format!(
                "model size differs between runs: {sizes:?}"
            )));
        }
    }
    Ok(records)
}
