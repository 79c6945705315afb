use std::collections::BTreeMap;

use crate::ingest::{Label, TokenSequences};

/// Sparse hashed bag of tokens over four channels (word header, char header,
/// word body, char body), each `vocab_dim` wide. An entry is the in-channel
/// count of a bucket divided by the channel length.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureVector {
    /// Build from (index, value) pairs; indices must be strictly increasing.
    pub fn from_sparse(dim: usize, entries: Vec<(u32, f64)>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].0 < w[1].0),
            "indices must be strictly increasing"
        );
        assert!(
            entries.last().is_none_or(|&(i, _)| (i as usize) < dim),
            "index out of range"
        );
        let (indices, values) = entries.into_iter().unzip();
        FeatureVector {
            dim,
            indices,
            values,
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        Self::from_sparse(values.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// A featurized, labeled training or test example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub label: Label,
}

pub fn feature_dim(vocab_dim: usize) -> usize {
    4 * vocab_dim
}

pub fn featurize(seqs: &TokenSequences, vocab_dim: usize) -> FeatureVector {
    let mut entries = Vec::with_capacity(64);
    for (channel, ids) in seqs.channels().into_iter().enumerate() {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for &id in ids.iter().filter(|&&id| id != 0) {
            assert!(
                (id as usize) < vocab_dim,
                "token id {id} outside vocab_dim {vocab_dim}"
            );
            *counts.entry(id).or_default() += 1;
        }
        let offset = (channel * vocab_dim) as u32;
        let len = ids.len() as f64;
        entries.extend(
            counts
                .into_iter()
                .map(|(id, n)| (offset + id, f64::from(n) / len)),
        );
    }
    FeatureVector::from_sparse(feature_dim(vocab_dim), entries)
}
