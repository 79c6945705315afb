//! Federated averaging: server broadcast, local client SGD, sample-weighted
//! aggregation over the active clients, participation schedules, and
//! byte-level channel accounting.

mod aggregate;
mod client;
mod run;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::metrics::Metrics;
use crate::model::{Hyper, ModelError, DEFAULT_BATCH_SIZE, DEFAULT_LEARNING_RATE};
use crate::partition::{PartitionError, ShardSummary};
use crate::seed::DEFAULT_SEED;

pub use aggregate::{aggregate, aggregate_updates, ClientUpdate};
pub use client::{client_update, ClientState};
pub use run::{
    evaluate, prepare_clients, run_centralized, run_global_epoch, run_training,
    run_training_observed, Evaluation, FlState,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid participation schedule: {0}")]
    Schedule(String),
    #[error("no active clients in global epoch {0}")]
    NoActiveClients(usize),
    #[error("aggregation over an empty update list")]
    NothingToAggregate,
    #[error("client {client}: {source}")]
    Client {
        client: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("{0}")]
    Observer(String),
}

/// One contiguous range of global epochs `[start, end)` and who trains in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub start: usize,
    pub end: usize,
    pub clients: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipationSchedule {
    pub phases: Vec<Phase>,
}

impl ParticipationSchedule {
    /// Every client active in every epoch.
    pub fn all(num_clients: usize, epochs: usize) -> Self {
        Self::from_phases([(0, epochs, (1..=num_clients).collect::<Vec<_>>())])
    }

    pub fn from_phases<I, C>(phases: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C)>,
        C: IntoIterator<Item = usize>,
    {
        ParticipationSchedule {
            phases: phases
                .into_iter()
                .map(|(start, end, c)| Phase {
                    start,
                    end,
                    clients: c.into_iter().collect(),
                })
                .collect(),
        }
    }

    /// Phases must be sorted, non-empty, tile `[0, epochs)` exactly and name
    /// only clients in `1..=num_clients`.
    pub fn validate(&self, num_clients: usize, epochs: usize) -> Result<(), EngineError> {
        let mut next = 0;
        for (i, p) in self.phases.iter().enumerate() {
            if p.start != next {
                return Err(EngineError::Schedule(format!(
                    "phase {i} starts at epoch {} but epoch {next} is the next uncovered one",
                    p.start
                )));
            }
            if p.end <= p.start {
                return Err(EngineError::Schedule(format!(
                    "phase {i} has an empty epoch range [{}, {})",
                    p.start, p.end
                )));
            }
            if p.clients.is_empty() {
                return Err(EngineError::Schedule(format!(
                    "phase {i} has no active clients"
                )));
            }
            if let Some(bad) = p.clients.iter().find(|&&c| c == 0 || c > num_clients) {
                return Err(EngineError::Schedule(format!(
                    "phase {i} names client {bad}, outside 1..={num_clients}"
                )));
            }
            next = p.end;
        }
        if next != epochs {
            return Err(EngineError::Schedule(format!(
                "phases cover [0, {next}) but the run has {epochs} epochs"
            )));
        }
        Ok(())
    }

    pub fn active(&self, epoch: usize) -> Option<&BTreeSet<usize>> {
        self.phases
            .iter()
            .find(|p| (p.start..p.end).contains(&epoch))
            .map(|p| &p.clients)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlConfig {
    pub num_clients: usize,
    pub global_epochs: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    /// `usize::MAX` means full-batch.
    pub batch_size: usize,
    pub seed: u64,
    /// `None` keeps every client active for the whole run.
    pub schedule: Option<ParticipationSchedule>,
    pub hidden_dim: usize,
    pub vocab_dim: usize,
    /// Worker threads for client updates; `None` uses the rayon default.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            num_clients: 1,
            global_epochs: 45,
            local_epochs: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: DEFAULT_SEED,
            schedule: None,
            hidden_dim: 0,
            vocab_dim: crate::ingest::DEFAULT_VOCAB_DIM,
            threads: None,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.num_clients == 0 {
            return bad("num_clients must be at least 1");
        }
        if self.global_epochs == 0 {
            return bad("global_epochs must be at least 1");
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.vocab_dim < 2 {
            return bad("vocab_dim must be at least 2");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        self.schedule()
            .validate(self.num_clients, self.global_epochs)
    }

    pub fn schedule(&self) -> ParticipationSchedule {
        self.schedule
            .clone()
            .unwrap_or_else(|| ParticipationSchedule::all(self.num_clients, self.global_epochs))
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            hidden_dim: self.hidden_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub epoch: usize,
    pub client_id: usize,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

/// Bytes moved per (client, global epoch). Inactive clients get zero rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLedger {
    pub rows: Vec<LedgerRow>,
}

impl ChannelLedger {
    pub fn total_up(&self) -> u64 {
        self.rows.iter().map(|r| r.bytes_up).sum()
    }

    pub fn total_down(&self) -> u64 {
        self.rows.iter().map(|r| r.bytes_down).sum()
    }

    pub fn get(&self, epoch: usize, client_id: usize) -> Option<&LedgerRow> {
        self.rows
            .iter()
            .find(|r| r.epoch == epoch && r.client_id == client_id)
    }

    /// Bytes per active (client, epoch) pair if they are all the same.
    pub fn constant_traffic(&self) -> Option<u64> {
        let mut active = self
            .rows
            .iter()
            .filter(|r| r.bytes_up + r.bytes_down > 0)
            .map(|r| r.bytes_up + r.bytes_down);
        let first = active.next()?;
        active.all(|b| b == first).then_some(first)
    }
}

/// Metrics recorded at the end of one global epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub active: Vec<usize>,
    /// FNV-1a of the serialized aggregated parameters.
    pub params_hash: String,
    /// Post-training local params on the client's own test split (active clients only).
    pub local: BTreeMap<usize, Metrics>,
    /// Aggregated params on each client's test split.
    pub global: BTreeMap<usize, Metrics>,
    pub local_mean: Option<Metrics>,
    pub global_mean: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardReport {
    pub client_id: usize,
    pub shard: ShardSummary,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub num_clients: usize,
    pub global_epochs: usize,
    /// Serialized parameter size in bytes; one transfer in either direction.
    pub model_bytes: u64,
    pub shards: Vec<ShardReport>,
    pub unassigned: usize,
    pub epochs: Vec<EpochRecord>,
    pub ledger: ChannelLedger,
}

impl RunRecord {
    pub fn final_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Global-model metric of one client at one epoch.
    pub fn global_metric(&self, epoch: usize, client_id: usize, metric: &str) -> Option<f64> {
        self.epochs.get(epoch)?.global.get(&client_id)?.get(metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        let ok = ParticipationSchedule::from_phases([(0, 15, vec![1, 2, 3, 4]), (15, 30, vec![5])]);
        ok.validate(5, 30).unwrap();
        assert_eq!(ok.active(14).unwrap().len(), 4);
        assert_eq!(
            ok.active(15).unwrap().iter().copied().collect::<Vec<_>>(),
            vec![5]
        );
        assert!(ok.validate(5, 31).is_err());
        assert!(ok.validate(4, 30).is_err());
        let gap = ParticipationSchedule::from_phases([(0, 10, vec![1]), (11, 20, vec![1])]);
        assert!(gap.validate(1, 20).is_err());
        let empty = ParticipationSchedule::from_phases([(0, 10, Vec::<usize>::new())]);
        assert!(empty.validate(1, 10).is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(FlConfig::default().validate().is_ok());
        let cfg = FlConfig {
            num_clients: 0,
            ..FlConfig::default()
        };
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("num_clients"));
        let cfg = FlConfig {
            learning_rate: f64::NAN,
            ..FlConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ledger_constancy() {
        let mut l = ChannelLedger::default();
        l.rows.push(LedgerRow {
            epoch: 0,
            client_id: 1,
            bytes_up: 10,
            bytes_down: 10,
        });
        l.rows.push(LedgerRow {
            epoch: 0,
            client_id: 2,
            bytes_up: 0,
            bytes_down: 0,
        });
        l.rows.push(LedgerRow {
            epoch: 1,
            client_id: 2,
            bytes_up: 10,
            bytes_down: 10,
        });
        assert_eq!(l.constant_traffic(), Some(20));
        l.rows.push(LedgerRow {
            epoch: 1,
            client_id: 1,
            bytes_up: 11,
            bytes_down: 10,
        });
        assert_eq!(l.constant_traffic(), None);
    }
}
