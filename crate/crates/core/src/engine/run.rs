use std::collections::BTreeMap;

use log::{debug, info};
use rayon::prelude::*;

use super::{
    aggregate_updates, client_update, ChannelLedger, ClientState, EngineError, EpochRecord,
    FlConfig, LedgerRow, ParticipationSchedule, RunRecord, ShardReport,
};
use crate::ingest::{fnv1a64, TokenizedSample};
use crate::metrics::{confusion, derive_metrics, Metrics};
use crate::model::{
    featurize, init_params, predict, serialize, serialized_len, Example, ModelParams,
};
use crate::partition::{partition, split_train_test, PartitionKind, PartitionSpec, ShardSummary};
use crate::seed;

/// Per-client metrics plus their unweighted mean. Clients with an empty
/// test split are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_client: BTreeMap<usize, Metrics>,
    pub mean: Metrics,
}

fn score(params: &ModelParams, test: &[Example]) -> Result<Option<Metrics>, EngineError> {
    if test.is_empty() {
        return Ok(None);
    }
    let mut predicted = Vec::with_capacity(test.len());
    for ex in test {
        predicted.push(predict(params.forward(&ex.features)?));
    }
    let actual: Vec<_> = test.iter().map(|ex| ex.label).collect();
    let cm = confusion(&predicted, &actual).expect("lengths match and are non-zero");
    Ok(Some(derive_metrics(&cm)))
}

/// Score one model on every client's test split.
pub fn evaluate(params: &ModelParams, clients: &[ClientState]) -> Result<Evaluation, EngineError> {
    let scored: Vec<(usize, Option<Metrics>)> = clients
        .par_iter()
        .map(|c| Ok((c.client_id, score(params, &c.test)?)))
        .collect::<Result<_, EngineError>>()?;
    let per_client: BTreeMap<usize, Metrics> = scored
        .into_iter()
        .filter_map(|(id, m)| Some((id, m?)))
        .collect();
    let mean = Metrics::mean(per_client.values());
    Ok(Evaluation { per_client, mean })
}

/// Partition the corpus, split every shard 80:20 locally, and featurize.
/// Returns the clients and the number of samples the partition left out.
pub fn prepare_clients(
    corpus: &[TokenizedSample],
    spec: &PartitionSpec,
    cfg: &FlConfig,
) -> Result<(Vec<ClientState>, usize), EngineError> {
    if spec.num_clients != cfg.num_clients {
        return Err(EngineError::Config(format!(
            "partition has {} clients but the run has {}",
            spec.num_clients, cfg.num_clients
        )));
    }
    let parts = partition(corpus, spec)?;
    let featurize_all = |items: Vec<TokenizedSample>| {
        items
            .iter()
            .map(|s| Example {
                features: featurize(&s.tokens, cfg.vocab_dim),
                label: s.label,
            })
            .collect()
    };
    let mut clients = Vec::with_capacity(parts.clients.len());
    for shard in parts.clients {
        let (train, test) = split_train_test(
            &shard.samples,
            seed::derive(cfg.seed, "local-split", &[shard.client_id as u64]),
        )?;
        clients.push(ClientState {
            client_id: shard.client_id,
            shard: ShardSummary::of(&shard.samples),
            train: featurize_all(train),
            test: featurize_all(test),
        });
    }
    Ok((clients, parts.unassigned.len()))
}

/// Server-side state between global epochs.
#[derive(Debug, Clone)]
pub struct FlState {
    pub cfg: FlConfig,
    pub schedule: ParticipationSchedule,
    pub clients: Vec<ClientState>,
    pub global: ModelParams,
    pub ledger: ChannelLedger,
    pub epochs: Vec<EpochRecord>,
}

impl FlState {
    pub fn new(clients: Vec<ClientState>, cfg: FlConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        if clients.len() != cfg.num_clients {
            return Err(EngineError::Config(format!(
                "{} client datasets for {} clients",
                clients.len(),
                cfg.num_clients
            )));
        }
        let global = init_params(cfg.hidden_dim, cfg.vocab_dim, cfg.seed).with_hyper(cfg.hyper());
        Ok(FlState {
            schedule: cfg.schedule(),
            cfg,
            clients,
            global,
            ledger: ChannelLedger::default(),
            epochs: Vec::new(),
        })
    }

    pub fn next_epoch(&self) -> usize {
        self.epochs.len()
    }
}

/// Broadcast, train the epoch's active clients in parallel, aggregate, and
/// record metrics and traffic.
pub fn run_global_epoch(state: &mut FlState) -> Result<&EpochRecord, EngineError> {
    let epoch = state.next_epoch();
    let active: Vec<usize> = state
        .schedule
        .active(epoch)
        .ok_or_else(|| EngineError::Schedule(format!("epoch {epoch} is outside the schedule")))?
        .iter()
        .copied()
        .collect();
    if active.is_empty() {
        return Err(EngineError::NoActiveClients(epoch));
    }
    let down = serialize(&state.global).len() as u64;
    let global = &state.global;
    let cfg = &state.cfg;
    let updates = active
        .par_iter()
        .map(|&id| client_update(global, &state.clients[id - 1], cfg, epoch))
        .collect::<Result<Vec<_>, EngineError>>()?;

    let mut local = BTreeMap::new();
    for u in &updates {
        if let Some(m) = score(&u.params, &state.clients[u.client_id - 1].test)? {
            local.insert(u.client_id, m);
        }
    }
    for client in 1..=state.cfg.num_clients {
        let up = updates
            .iter()
            .find(|u| u.client_id == client)
            .map_or(0, |u| serialize(&u.params).len() as u64);
        let down = if up > 0 { down } else { 0 };
        state.ledger.rows.push(LedgerRow {
            epoch,
            client_id: client,
            bytes_up: up,
            bytes_down: down,
        });
    }

    state.global = aggregate_updates(&updates)?;
    let eval = evaluate(&state.global, &state.clients)?;
    let params_hash = format!("{:016x}", fnv1a64(&serialize(&state.global)));
    let local_mean = (!local.is_empty()).then(|| Metrics::mean(local.values()));
    debug!(
        "epoch {epoch}: active {active:?}, global accuracy {:?}",
        eval.mean.accuracy
    );
    state.epochs.push(EpochRecord {
        epoch,
        active,
        params_hash,
        local,
        global: eval.per_client,
        local_mean,
        global_mean: eval.mean,
    });
    Ok(state.epochs.last().expect("just pushed"))
}

fn with_threads<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, EngineError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| {
                    EngineError::Config(format!("cannot start {n} worker threads: {e}"))
                })?;
            Ok(pool.install(f))
        }
    }
}

/// Full federated run: partition, local splits, then `global_epochs`
/// rounds of FedAvg following the participation schedule.
pub fn run_training(
    corpus: &[TokenizedSample],
    spec: &PartitionSpec,
    cfg: &FlConfig,
) -> Result<RunRecord, EngineError> {
    run_training_observed(corpus, spec, cfg, |_, _| Ok(()))
}

/// `run_training`, calling `observe(epoch, aggregated params)` after every
/// global epoch.
pub fn run_training_observed<F>(
    corpus: &[TokenizedSample],
    spec: &PartitionSpec,
    cfg: &FlConfig,
    mut observe: F,
) -> Result<RunRecord, EngineError>
where
    F: FnMut(usize, &ModelParams) -> Result<(), EngineError> + Send,
{
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let (clients, unassigned) = prepare_clients(corpus, spec, cfg)?;
        let shards = clients
            .iter()
            .map(|c| ShardReport {
                client_id: c.client_id,
                shard: c.shard.clone(),
                train: c.train.len(),
                test: c.test.len(),
            })
            .collect();
        let mut state = FlState::new(clients, cfg.clone())?;
        info!(
            "training {} clients for {} epochs ({} parameters)",
            cfg.num_clients,
            cfg.global_epochs,
            state.global.flat.len()
        );
        for epoch in 0..cfg.global_epochs {
            run_global_epoch(&mut state)?;
            observe(epoch, &state.global)?;
        }
        Ok(RunRecord {
            num_clients: cfg.num_clients,
            global_epochs: cfg.global_epochs,
            model_bytes: serialized_len(&state.global) as u64,
            shards,
            unassigned,
            epochs: state.epochs,
            ledger: state.ledger,
        })
    })?
}

/// Single-client baseline: the whole corpus on one client, all epochs.
pub fn run_centralized(
    corpus: &[TokenizedSample],
    cfg: &FlConfig,
) -> Result<RunRecord, EngineError> {
    let cfg = FlConfig {
        num_clients: 1,
        schedule: None,
        ..cfg.clone()
    };
    let spec = PartitionSpec::new(PartitionKind::Balanced, 1).with_seed(cfg.seed);
    run_training(corpus, &spec, &cfg)
}
