//! Class balancing, stratified train/test splitting, and distribution of a
//! sample set across K simulated clients.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ingest::{Label, Labeled, Source};
use crate::seed::{self, DEFAULT_SEED};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("cannot balance: dataset has {phishing} phishing and {legitimate} legitimate samples")]
    CannotBalance { phishing: usize, legitimate: usize },
    #[error("dataset of {0} samples is too small to split (need at least 5)")]
    TooSmallToSplit(usize),
    #[error("cannot spread {samples} samples over {clients} clients")]
    TooFewSamples { samples: usize, clients: usize },
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("client {client} needs {shortfall} more {label} samples than are available")]
    Shortfall {
        client: usize,
        label: Label,
        shortfall: usize,
    },
    #[error("client {0} would receive no samples")]
    EmptyClient(usize),
}

/// How fractional shard sizes are rounded under size asymmetry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRounding {
    /// Apportion every sample; totals are conserved.
    #[default]
    Conserve,
    /// Per class: floor(floor(n_class / K) * multiplier). The per-class
    /// remainder stays unassigned.
    PerClassFloor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionKind {
    /// Equal shard sizes (within one), class ratio preserved per client.
    Balanced,
    /// Shard sizes ramp linearly from -var% to +var% across clients.
    SizeVar {
        var_pct: u32,
        #[serde(default)]
        rounding: SizeRounding,
    },
    /// Equal shard sizes with a per-client (phishing %, legitimate %) mix.
    PlRatio {
        ratios: Vec<(u32, u32)>,
        /// Fixed shard size; when absent the largest feasible equal size is used.
        #[serde(default)]
        client_size: Option<usize>,
    },
    /// Client k holds exactly the k-th source present.
    PerSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub num_clients: usize,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn new(kind: PartitionKind, num_clients: usize) -> Self {
        PartitionSpec {
            kind,
            num_clients,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        let k = self.num_clients;
        if k == 0 {
            return Err(PartitionError::InvalidSpec(
                "num_clients must be at least 1".into(),
            ));
        }
        match &self.kind {
            PartitionKind::Balanced | PartitionKind::PerSource => Ok(()),
            PartitionKind::SizeVar { var_pct, .. } if *var_pct >= 100 => Err(
                PartitionError::InvalidSpec(format!("var_pct must be below 100, got {var_pct}")),
            ),
            PartitionKind::SizeVar { .. } => Ok(()),
            PartitionKind::PlRatio {
                ratios,
                client_size,
            } => {
                if ratios.len() != k {
                    return Err(PartitionError::InvalidSpec(format!(
                        "{} P/L ratios given for {k} clients",
                        ratios.len()
                    )));
                }
                if let Some((i, (p, l))) =
                    ratios.iter().enumerate().find(|(_, (p, l))| p + l != 100)
                {
                    return Err(PartitionError::InvalidSpec(format!(
                        "P/L ratio of client {} is {p}:{l}, which does not sum to 100",
                        i + 1
                    )));
                }
                if *client_size == Some(0) {
                    return Err(PartitionError::InvalidSpec(
                        "client_size must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Size multiplier of client k (1-based) under `var`, as an exact fraction
/// `numerator / denominator`: 1 + var * (2(k-1)/(K-1) - 1) / 100.
pub fn size_multiplier(var_pct: u32, client: usize, num_clients: usize) -> (i128, i128) {
    if num_clients <= 1 {
        return (1, 1);
    }
    let span = num_clients as i128 - 1;
    let den = 100 * span;
    let num = den + var_pct as i128 * (2 * (client as i128 - 1) - span);
    (num, den)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientDataset<T> {
    /// 1-based.
    pub client_id: usize,
    pub samples: Vec<T>,
}

impl<T> ClientDataset<T> {
    pub fn n_k(&self) -> usize {
        self.samples.len()
    }
}

/// Client shards plus whatever the scheme left out. `unassigned` is empty
/// for balanced, conserving size-asymmetric and per-source partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition<T> {
    pub clients: Vec<ClientDataset<T>>,
    pub unassigned: Vec<T>,
}

/// Index-level result; `clients[k]` lists indices into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub clients: Vec<Vec<usize>>,
    pub unassigned: Vec<usize>,
}

fn class_pools<T: Labeled>(items: &[T], seed: u64, tag: &str) -> [Vec<usize>; 2] {
    let mut pools = [Vec::new(), Vec::new()];
    for (i, item) in items.iter().enumerate() {
        pools[class_index(item.label())].push(i);
    }
    for (c, pool) in pools.iter_mut().enumerate() {
        pool.shuffle(&mut seed::rng(seed, tag, &[c as u64]));
    }
    pools
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Phishing => 0,
        Label::Legitimate => 1,
    }
}

/// Subsample the majority class so both classes have the minority count.
/// Survivors keep their input order.
pub fn balance_classes<T: Labeled + Clone>(
    items: &[T],
    seed: u64,
) -> Result<Vec<T>, PartitionError> {
    let pools = class_pools(items, seed, "balance");
    let (phishing, legitimate) = (pools[0].len(), pools[1].len());
    if phishing == 0 || legitimate == 0 {
        return Err(PartitionError::CannotBalance {
            phishing,
            legitimate,
        });
    }
    let keep = phishing.min(legitimate);
    let mut chosen: Vec<usize> = pools
        .iter()
        .flat_map(|p| p[..keep].iter().copied())
        .collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| items[i].clone()).collect())
}

/// Stratified 80:20 split. Each class contributes ceil(0.8 * n_class)
/// samples to the training side.
pub fn split_train_test<T: Labeled + Clone>(
    items: &[T],
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), PartitionError> {
    if items.len() < 5 {
        return Err(PartitionError::TooSmallToSplit(items.len()));
    }
    let (train, test) = split_indices(items, seed);
    Ok((
        train.into_iter().map(|i| items[i].clone()).collect(),
        test.into_iter().map(|i| items[i].clone()).collect(),
    ))
}

pub(crate) fn split_indices<T: Labeled>(items: &[T], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let pools = class_pools(items, seed, "split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for pool in &pools {
        let n_train = (4 * pool.len()).div_ceil(5);
        train.extend_from_slice(&pool[..n_train]);
        test.extend_from_slice(&pool[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Deal `stream` to clients so every prefix stays as close as possible to
/// the weights: each item goes to the client with the largest deficit
/// (t+1)·w_k − W·count_k, lowest id on ties.
fn weighted_deal(stream: &[usize], weights: &[i128]) -> Vec<Vec<usize>> {
    let total: i128 = weights.iter().sum();
    let mut counts = vec![0i128; weights.len()];
    let mut out = vec![Vec::new(); weights.len()];
    for (t, &item) in stream.iter().enumerate() {
        let step = t as i128 + 1;
        let (best, _) = weights
            .iter()
            .zip(&counts)
            .map(|(&w, &c)| step * w - total * c)
            .enumerate()
            .fold(
                (0, i128::MIN),
                |acc, (k, d)| if d > acc.1 { (k, d) } else { acc },
            );
        counts[best] += 1;
        out[best].push(item);
    }
    out
}

pub fn plan<T: Labeled>(
    items: &[T],
    spec: &PartitionSpec,
) -> Result<PartitionPlan, PartitionError> {
    spec.validate()?;
    let k = spec.num_clients;
    if items.len() < k {
        return Err(PartitionError::TooFewSamples {
            samples: items.len(),
            clients: k,
        });
    }
    let pools = class_pools(items, spec.seed, "partition");

    let plan = match &spec.kind {
        PartitionKind::Balanced => deal_by_weights(&pools, &vec![1; k]),
        PartitionKind::SizeVar {
            var_pct,
            rounding: SizeRounding::Conserve,
        } => {
            let weights: Vec<i128> = (1..=k).map(|c| size_multiplier(*var_pct, c, k).0).collect();
            deal_by_weights(&pools, &weights)
        }
        PartitionKind::SizeVar {
            var_pct,
            rounding: SizeRounding::PerClassFloor,
        } => {
            let mut clients = vec![Vec::new(); k];
            let mut unassigned = Vec::new();
            for pool in &pools {
                let base = (pool.len() / k) as i128;
                let mut cursor = 0;
                for (c, client) in clients.iter_mut().enumerate() {
                    let (num, den) = size_multiplier(*var_pct, c + 1, k);
                    let take = (base * num / den) as usize;
                    client.extend_from_slice(&pool[cursor..cursor + take]);
                    cursor += take;
                }
                unassigned.extend_from_slice(&pool[cursor..]);
            }
            PartitionPlan {
                clients,
                unassigned,
            }
        }
        PartitionKind::PlRatio {
            ratios,
            client_size,
        } => pl_ratio(&pools, ratios, *client_size, items.len())?,
        PartitionKind::PerSource => per_source(items, spec)?,
    };

    if let Some(empty) = plan.clients.iter().position(Vec::is_empty) {
        return Err(PartitionError::EmptyClient(empty + 1));
    }
    Ok(plan)
}

fn deal_by_weights(pools: &[Vec<usize>; 2], weights: &[i128]) -> PartitionPlan {
    let stream: Vec<usize> = pools.iter().flatten().copied().collect();
    PartitionPlan {
        clients: weighted_deal(&stream, weights),
        unassigned: Vec::new(),
    }
}

fn pl_demand(size: usize, ratios: &[(u32, u32)]) -> Vec<[usize; 2]> {
    ratios
        .iter()
        .map(|&(p, _)| {
            let phishing = (size * p as usize + 50) / 100;
            [phishing, size - phishing]
        })
        .collect()
}

fn pl_ratio(
    pools: &[Vec<usize>; 2],
    ratios: &[(u32, u32)],
    client_size: Option<usize>,
    total: usize,
) -> Result<PartitionPlan, PartitionError> {
    let feasible = |demand: &[[usize; 2]]| -> Result<(), PartitionError> {
        for c in 0..2 {
            let mut used = 0;
            for (k, d) in demand.iter().enumerate() {
                used += d[c];
                if used > pools[c].len() {
                    let total_need: usize = demand.iter().map(|d| d[c]).sum();
                    let label = if c == 0 {
                        Label::Phishing
                    } else {
                        Label::Legitimate
                    };
                    return Err(PartitionError::Shortfall {
                        client: k + 1,
                        label,
                        shortfall: total_need - pools[c].len(),
                    });
                }
            }
        }
        Ok(())
    };

    let size = match client_size {
        Some(size) => {
            feasible(&pl_demand(size, ratios))?;
            size
        }
        None => (1..=total / ratios.len())
            .rev()
            .find(|&s| feasible(&pl_demand(s, ratios)).is_ok())
            .ok_or(PartitionError::EmptyClient(1))?,
    };

    let demand = pl_demand(size, ratios);
    let mut cursors = [0usize; 2];
    let mut clients = Vec::with_capacity(ratios.len());
    for d in &demand {
        let mut shard = Vec::with_capacity(size);
        for c in 0..2 {
            shard.extend_from_slice(&pools[c][cursors[c]..cursors[c] + d[c]]);
            cursors[c] += d[c];
        }
        clients.push(shard);
    }
    let mut unassigned: Vec<usize> = (0..2)
        .flat_map(|c| pools[c][cursors[c]..].iter().copied())
        .collect();
    unassigned.sort_unstable();
    Ok(PartitionPlan {
        clients,
        unassigned,
    })
}

fn per_source<T: Labeled>(
    items: &[T],
    spec: &PartitionSpec,
) -> Result<PartitionPlan, PartitionError> {
    let present: Vec<Source> = Source::CLIENT_ORDER
        .iter()
        .copied()
        .filter(|s| items.iter().any(|i| i.source() == *s))
        .collect();
    if present.len() != spec.num_clients {
        return Err(PartitionError::InvalidSpec(format!(
            "per-source partitioning needs num_clients = {} (sources present: {}), got {}",
            present.len(),
            present
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", "),
            spec.num_clients
        )));
    }
    let clients = present
        .iter()
        .enumerate()
        .map(|(k, src)| {
            let mut shard: Vec<usize> = (0..items.len())
                .filter(|&i| items[i].source() == *src)
                .collect();
            shard.shuffle(&mut seed::rng(spec.seed, "partition-source", &[k as u64]));
            shard
        })
        .collect();
    Ok(PartitionPlan {
        clients,
        unassigned: Vec::new(),
    })
}

/// Distribute `items` across clients according to `spec`.
pub fn partition<T: Labeled + Clone>(
    items: &[T],
    spec: &PartitionSpec,
) -> Result<Partition<T>, PartitionError> {
    let plan = plan(items, spec)?;
    Ok(Partition {
        clients: plan
            .clients
            .iter()
            .enumerate()
            .map(|(k, idx)| ClientDataset {
                client_id: k + 1,
                samples: idx.iter().map(|&i| items[i].clone()).collect(),
            })
            .collect(),
        unassigned: plan.unassigned.iter().map(|&i| items[i].clone()).collect(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardSummary {
    pub n_k: usize,
    pub phishing: usize,
    pub legitimate: usize,
    pub per_source: BTreeMap<String, usize>,
}

impl ShardSummary {
    pub fn of<T: Labeled>(samples: &[T]) -> Self {
        let mut s = ShardSummary {
            n_k: samples.len(),
            ..Default::default()
        };
        for item in samples {
            match item.label() {
                Label::Phishing => s.phishing += 1,
                Label::Legitimate => s.legitimate += 1,
            }
            *s.per_source
                .entry(item.source().name().to_string())
                .or_default() += 1;
        }
        s
    }
}
