//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use fedmail::ingest::{clean_text, ingest_manifest, EmailSample};
use serde::Deserialize;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(Deserialize)]
pub struct ExpectedCounts {
    pub phishing: usize,
    pub legitimate: usize,
}

#[derive(Deserialize)]
pub struct ExpectedSample {
    pub label: String,
    pub source: String,
    pub has_header: bool,
    pub subject: String,
    pub content_type: String,
    pub body: String,
}

#[derive(Deserialize)]
pub struct Expected {
    pub total: usize,
    pub with_header: usize,
    pub per_source: std::collections::BTreeMap<String, ExpectedCounts>,
    pub samples: Vec<ExpectedSample>,
}

/// Ingest the curated corpus and compare it field by field with the
/// expectations written next to it. Returns the first mismatch.
pub fn check_fixture_corpus() -> Result<Vec<EmailSample>, String> {
    let dir = fixture_dir();
    let expected: Expected = serde_json::from_str(
        &std::fs::read_to_string(dir.join("corpus_expected.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let (samples, report) =
        ingest_manifest(&dir.join("corpus/manifest.csv")).map_err(|e| e.to_string())?;

    if samples.len() != expected.total || report.total != expected.total {
        return Err(format!(
            "{} samples, expected {}",
            samples.len(),
            expected.total
        ));
    }
    if report.with_header != expected.with_header {
        return Err(format!(
            "{} with a header, expected {}",
            report.with_header, expected.with_header
        ));
    }
    for (source, want) in &expected.per_source {
        let got = report
            .per_source
            .get(source)
            .ok_or_else(|| format!("no samples from {source}"))?;
        if (got.phishing, got.legitimate) != (want.phishing, want.legitimate) {
            return Err(format!(
                "{source}: {}/{} phishing/legitimate, expected {}/{}",
                got.phishing, got.legitimate, want.phishing, want.legitimate
            ));
        }
    }
    for (i, (s, e)) in samples.iter().zip(&expected.samples).enumerate() {
        let fields = [
            ("label", s.label.to_string(), e.label.clone()),
            ("source", s.source.to_string(), e.source.clone()),
            (
                "has_header",
                s.has_header.to_string(),
                e.has_header.to_string(),
            ),
            ("subject", s.header_subject.clone(), e.subject.clone()),
            (
                "content_type",
                s.header_content_type.clone(),
                e.content_type.clone(),
            ),
            ("body", s.body.clone(), e.body.clone()),
        ];
        for (name, got, want) in fields {
            if got != want {
                return Err(format!("sample {i} {name}: got {got:?}, expected {want:?}"));
            }
        }
        let cleaned = clean_text(&s.body);
        if cleaned.contains(['<', '>', '&']) {
            return Err(format!("sample {i}: markup survived cleaning: {cleaned:?}"));
        }
    }
    Ok(samples)
}
