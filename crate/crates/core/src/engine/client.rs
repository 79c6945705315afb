use rand::seq::SliceRandom;

use super::{ClientUpdate, EngineError, FlConfig};
use crate::model::{Example, ModelParams};
use crate::partition::ShardSummary;
use crate::seed;

/// One simulated client: its featurized local train/test split.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub shard: ShardSummary,
}

impl ClientState {
    pub fn n_k(&self) -> usize {
        self.train.len()
    }
}

/// Start from the broadcast model and run `local_epochs` passes of
/// minibatch SGD over the client's training split. The visiting order is
/// reshuffled per (client, global epoch, local epoch); the last batch may
/// be short.
pub fn client_update(
    global: &ModelParams,
    client: &ClientState,
    cfg: &FlConfig,
    epoch: usize,
) -> Result<ClientUpdate, EngineError> {
    if client.train.is_empty() {
        return Err(EngineError::Config(format!(
            "client {} has no training samples",
            client.client_id
        )));
    }
    let mut local = global.clone();
    let mut order: Vec<usize> = (0..client.train.len()).collect();
    for pass in 0..cfg.local_epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(
            cfg.seed,
            "shuffle",
            &[client.client_id as u64, epoch as u64, pass as u64],
        ));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &client.train[i]).collect();
            let wrap = |source| EngineError::Client {
                client: client.client_id,
                source,
            };
            let (_, grad) = local.loss_and_grad(&batch).map_err(wrap)?;
            local
                .sgd_step_in_place(&grad, cfg.learning_rate)
                .map_err(wrap)?;
        }
    }
    Ok(ClientUpdate {
        client_id: client.client_id,
        params: local,
        n_k: client.n_k(),
    })
}
