//! Email ingestion: mbox splitting, header/body extraction, text cleaning and
//! fixed-length tokenization.

mod clean;
mod dataset;
mod header;
mod mbox;
mod stopwords;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clean::{clean_sample, clean_text};
pub use dataset::{
    ingest_dir, ingest_manifest, read_dataset, read_manifest, write_dataset, IngestReport,
    ManifestRow, ParseWarning,
};
pub use header::{split_header_body, ParsedEmail};
pub use mbox::{parse_mbox, parse_text_file, MboxParse, MboxReport};
pub use stopwords::{is_stop_word, STOP_WORDS};
pub use tokenize::{
    fnv1a64, token_id, tokenize, TokenSequences, CHAR_BODY_LEN, CHAR_HEADER_LEN, DEFAULT_VOCAB_DIM,
    WORD_BODY_LEN, WORD_HEADER_LEN,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: malformed dataset line: {source}")]
    Dataset {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// One unparsed message as found on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEmail {
    pub raw_bytes: Vec<u8>,
    pub origin_file: String,
    /// Message index within an mbox; 0 for standalone text files.
    pub origin_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Phishing,
    Legitimate,
}

impl Label {
    pub fn is_phishing(self) -> bool {
        self == Label::Phishing
    }

    /// Regression target: 1 for phishing, 0 for legitimate.
    pub fn target(self) -> f64 {
        match self {
            Label::Phishing => 1.0,
            Label::Legitimate => 0.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Phishing => "phishing",
            Label::Legitimate => "legitimate",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phishing" | "phish" | "p" | "1" => Ok(Label::Phishing),
            "legitimate" | "legit" | "ham" | "l" | "0" => Ok(Label::Legitimate),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Corpus a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "IWSPA")]
    Iwspa,
    Nazario,
    Enron,
    #[serde(rename = "CSIROLike")]
    CsiroLike,
    PhishbowlLike,
    Synthetic,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::Iwspa,
        Source::Nazario,
        Source::Enron,
        Source::CsiroLike,
        Source::PhishbowlLike,
        Source::Synthetic,
    ];

    /// Client assignment order for per-source partitioning: client 1 holds
    /// IWSPA, client 2 Enron, client 3 Nazario, then the two small phishing
    /// collections.
    pub const CLIENT_ORDER: [Source; 6] = [
        Source::Iwspa,
        Source::Enron,
        Source::Nazario,
        Source::CsiroLike,
        Source::PhishbowlLike,
        Source::Synthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Source::Iwspa => "IWSPA",
            Source::Nazario => "Nazario",
            Source::Enron => "Enron",
            Source::CsiroLike => "CSIROLike",
            Source::PhishbowlLike => "PhishbowlLike",
            Source::Synthetic => "Synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iwspa" | "iwspa-ap" => Ok(Source::Iwspa),
            "nazario" => Ok(Source::Nazario),
            "enron" => Ok(Source::Enron),
            "csiro" | "csirolike" => Ok(Source::CsiroLike),
            "phishbowl" | "phishbowllike" => Ok(Source::PhishbowlLike),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// A parsed, labeled email. Header fields other than Subject and
/// Content-Type are dropped at parse time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailSample {
    pub header_subject: String,
    pub header_content_type: String,
    pub body: String,
    pub label: Label,
    pub source: Source,
    pub has_header: bool,
}

impl EmailSample {
    /// Text fed to the header channels: subject followed by content type.
    pub fn header_text(&self) -> String {
        match (
            self.header_subject.is_empty(),
            self.header_content_type.is_empty(),
        ) {
            (true, true) => String::new(),
            (false, true) => self.header_subject.clone(),
            (true, false) => self.header_content_type.clone(),
            (false, false) => format!("{} {}", self.header_subject, self.header_content_type),
        }
    }
}

/// Anything that carries a class label and a source tag; partitioning and
/// splitting work over these.
pub trait Labeled {
    fn label(&self) -> Label;
    fn source(&self) -> Source;
}

impl Labeled for EmailSample {
    fn label(&self) -> Label {
        self.label
    }

    fn source(&self) -> Source {
        self.source
    }
}

impl<T: Labeled> Labeled for &T {
    fn label(&self) -> Label {
        (**self).label()
    }

    fn source(&self) -> Source {
        (**self).source()
    }
}

/// A cleaned and tokenized sample, ready for featurization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSample {
    pub tokens: TokenSequences,
    pub label: Label,
    pub source: Source,
}

impl Labeled for TokenizedSample {
    fn label(&self) -> Label {
        self.label
    }

    fn source(&self) -> Source {
        self.source
    }
}

/// Clean then tokenize every sample.
pub fn prepare(samples: &[EmailSample], vocab_dim: usize) -> Vec<TokenizedSample> {
    samples
        .iter()
        .map(|s| TokenizedSample {
            tokens: tokenize(&clean_sample(s), vocab_dim),
            label: s.label,
            source: s.source,
        })
        .collect()
}
