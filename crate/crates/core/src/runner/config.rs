use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use super::presets::{find_preset, preset_names, Preset, PresetRun};
use crate::engine::{EngineError, FlConfig, ParticipationSchedule};
use crate::partition::{PartitionKind, PartitionSpec};
use crate::seed::DEFAULT_SEED;
use crate::synth::{SourceCounts, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: at {pointer:?}: {message}")]
    Parse {
        path: PathBuf,
        pointer: String,
        message: String,
    },
    #[error("at {pointer:?}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("unknown preset {name:?}; available: {}", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },
}

impl ConfigError {
    fn invalid(pointer: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

/// Where the corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// JSON-lines file of parsed samples.
    Path(PathBuf),
    /// `path,label,source` manifest of raw mbox/text files.
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

/// The config file as written. Every field is optional; a preset fills in
/// whatever the file leaves out.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub dataset: Option<DatasetSource>,
    /// Subsample the majority class before partitioning.
    pub balance: Option<bool>,
    pub partition: Option<PartitionKind>,
    pub num_clients: Option<usize>,
    pub global_epochs: Option<usize>,
    pub local_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub hidden_dim: Option<usize>,
    pub vocab_dim: Option<usize>,
    pub schedule: Option<ParticipationSchedule>,
    /// Plot names such as `global_accuracy`.
    pub plots: Option<Vec<String>>,
    /// Write the aggregated parameters after every epoch.
    pub snapshots: Option<bool>,
}

/// One fully resolved training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPlan {
    /// Sub-directory name within the output directory; empty for a single run.
    pub label: String,
    pub spec: PartitionSpec,
    pub fl: FlConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub dataset: DatasetSource,
    pub balance: bool,
    pub runs: Vec<RunPlan>,
    pub plots: Vec<String>,
    pub snapshots: bool,
    /// Fail unless every active (client, epoch) moves the same byte count.
    pub check_traffic: bool,
}

pub const DEFAULT_PLOTS: [&str; 2] = ["global_accuracy", "local_accuracy"];

/// Source counts restricted to the three public collections.
pub fn default_corpus() -> SyntheticSpec {
    let sources: Vec<SourceCounts> = crate::synth::corpus_counts().into_iter().take(3).collect();
    SyntheticSpec {
        sources,
        ..SyntheticSpec::default()
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Strict JSON parse: unknown keys, duplicate keys and trailing content
/// are errors reported with a JSON pointer.
pub fn parse_strict<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::Parse {
        path: origin.into(),
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| ConfigError::Parse {
        path: origin.into(),
        pointer: String::new(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RawConfig, ConfigError> {
    parse_strict(text, origin)
}

pub fn read_strict<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    parse_strict(&text, path)
}

/// Read a config file. Relative dataset paths are taken relative to the
/// file's directory.
pub fn read_raw_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let mut raw: RawConfig = read_strict(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    match &mut raw.dataset {
        Some(DatasetSource::Path(p)) | Some(DatasetSource::Manifest(p)) if p.is_relative() => {
            *p = base.join(&*p)
        }
        _ => {}
    }
    Ok(raw)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    resolve(read_raw_config(path)?)
}

fn log_override<T: std::fmt::Debug + PartialEq>(
    preset: Option<&Preset>,
    field: &str,
    from: &T,
    to: &T,
) {
    if let Some(p) = preset {
        if from != to {
            info!("preset {}: overriding {field}: {from:?} -> {to:?}", p.name);
        }
    }
}

fn apply<T: Clone + std::fmt::Debug + PartialEq>(
    preset: Option<&Preset>,
    field: &str,
    slot: &mut T,
    value: &Option<T>,
) {
    if let Some(v) = value {
        log_override(preset, field, slot, v);
        *slot = v.clone();
    }
}

/// Merge a raw config over its preset (if any) and validate the result.
pub fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let preset = match &raw.preset {
        Some(name) => Some(find_preset(name).ok_or_else(|| ConfigError::UnknownPreset {
            name: name.clone(),
            valid: preset_names().iter().map(|s| s.to_string()).collect(),
        })?),
        None => None,
    };
    let base_runs = match preset {
        Some(p) => (p.runs)(),
        None => vec![PresetRun::single(1, PartitionKind::Balanced, 45, None)],
    };
    let seed = raw.seed.unwrap_or(DEFAULT_SEED);

    let mut runs = Vec::with_capacity(base_runs.len());
    for base in base_runs {
        let mut kind = base.kind;
        let mut k = base.num_clients;
        let mut epochs = base.global_epochs;
        let mut schedule = base.schedule;
        apply(preset, "partition", &mut kind, &raw.partition);
        apply(preset, "num_clients", &mut k, &raw.num_clients);
        apply(preset, "global_epochs", &mut epochs, &raw.global_epochs);
        if let Some(s) = &raw.schedule {
            log_override(preset, "schedule", &schedule, &Some(s.clone()));
            schedule = Some(s.clone());
        }
        let mut fl = FlConfig {
            num_clients: k,
            global_epochs: epochs,
            seed,
            schedule,
            ..FlConfig::default()
        };
        apply(
            preset,
            "local_epochs",
            &mut fl.local_epochs,
            &raw.local_epochs,
        );
        apply(
            preset,
            "learning_rate",
            &mut fl.learning_rate,
            &raw.learning_rate,
        );
        apply(preset, "batch_size", &mut fl.batch_size, &raw.batch_size);
        apply(preset, "hidden_dim", &mut fl.hidden_dim, &raw.hidden_dim);
        apply(preset, "vocab_dim", &mut fl.vocab_dim, &raw.vocab_dim);
        let spec = PartitionSpec {
            kind,
            num_clients: k,
            seed,
        };
        validate_run(&spec, &fl)?;
        runs.push(RunPlan {
            label: base.label,
            spec,
            fl,
        });
    }

    let per_source = runs.iter().any(|r| r.spec.kind == PartitionKind::PerSource);
    let dataset = raw.dataset.clone().unwrap_or_else(|| {
        DatasetSource::Synthetic(if per_source || preset.is_some_and(|p| p.all_sources) {
            SyntheticSpec::default()
        } else {
            default_corpus()
        })
    });
    if let DatasetSource::Synthetic(s) = &dataset {
        s.validate()
            .map_err(|e| ConfigError::invalid("/dataset/synthetic", e.to_string()))?;
    }
    let plots = raw
        .plots
        .clone()
        .unwrap_or_else(|| DEFAULT_PLOTS.iter().map(|s| s.to_string()).collect());
    let valid = crate::report::plot_metric_names();
    if let Some((i, bad)) = plots.iter().enumerate().find(|(_, p)| !valid.contains(p)) {
        return Err(ConfigError::invalid(
            &format!("/plots/{i}"),
            format!("unknown plot {bad:?}; valid: {}", valid.join(", ")),
        ));
    }
    Ok(RunConfig {
        preset: raw.preset.clone(),
        dataset,
        balance: raw.balance.unwrap_or(!per_source),
        runs,
        plots,
        snapshots: raw.snapshots.unwrap_or(false),
        check_traffic: preset.is_some_and(|p| p.check_traffic),
    })
}

fn validate_run(spec: &PartitionSpec, fl: &FlConfig) -> Result<(), ConfigError> {
    let positive = [
        ("/num_clients", fl.num_clients),
        ("/global_epochs", fl.global_epochs),
        ("/local_epochs", fl.local_epochs),
        ("/batch_size", fl.batch_size),
    ];
    for (ptr, v) in positive {
        if v == 0 {
            return Err(ConfigError::invalid(ptr, "must be at least 1"));
        }
    }
    if !fl.learning_rate.is_finite() || fl.learning_rate < 0.0 {
        return Err(ConfigError::invalid(
            "/learning_rate",
            "must be finite and non-negative",
        ));
    }
    if fl.vocab_dim < 2 {
        return Err(ConfigError::invalid("/vocab_dim", "must be at least 2"));
    }
    spec.validate()
        .map_err(|e| ConfigError::invalid("/partition", e.to_string()))?;
    fl.validate().map_err(|e| match e {
        EngineError::Schedule(m) => ConfigError::invalid("/schedule", m),
        other => ConfigError::invalid("", other.to_string()),
    })
}
