use super::EngineError;
use crate::model::{ModelError, ModelParams};

/// A locally trained model as submitted to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ModelParams,
    pub n_k: usize,
}

/// Sample-weighted average Σ_k (n_k / n) W_k, summed in list order.
///
/// The result is clamped to the per-coordinate hull of the inputs: rounding
/// can otherwise land one ulp outside it.
pub fn aggregate(updates: &[(&ModelParams, usize)]) -> Result<ModelParams, EngineError> {
    let (first, _) = *updates.first().ok_or(EngineError::NothingToAggregate)?;
    let dim = first.flat.len();
    for (p, n_k) in updates {
        if p.flat.len() != dim || p.shapes != first.shapes {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                got: p.flat.len(),
            }
            .into());
        }
        if *n_k == 0 {
            return Err(EngineError::Config("an update reported n_k = 0".into()));
        }
    }
    let n: usize = updates.iter().map(|(_, n_k)| n_k).sum();
    let mut out = first.zeros_like();
    for (p, n_k) in updates {
        let weight = *n_k as f64 / n as f64;
        for (acc, w) in out.flat.iter_mut().zip(&p.flat) {
            *acc += weight * w;
        }
    }
    for (i, acc) in out.flat.iter_mut().enumerate() {
        let (lo, hi) = updates
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| {
                (lo.min(p.flat[i]), hi.max(p.flat[i]))
            });
        *acc = acc.clamp(lo, hi);
    }
    Ok(out)
}

/// Aggregate in ascending client-id order, whatever order updates arrived in.
pub fn aggregate_updates(updates: &[ClientUpdate]) -> Result<ModelParams, EngineError> {
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    let pairs: Vec<(&ModelParams, usize)> = sorted.iter().map(|u| (&u.params, u.n_k)).collect();
    aggregate(&pairs)
}
