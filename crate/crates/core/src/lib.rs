//! Deterministic federated-learning simulator for phishing email
//! classification.

pub mod engine;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod report;
pub mod runner;
pub mod seed;
pub mod synth;
