use serde::{Deserialize, Serialize};

use super::EmailSample;

pub const WORD_HEADER_LEN: usize = 50;
pub const CHAR_HEADER_LEN: usize = 100;
pub const WORD_BODY_LEN: usize = 150;
pub const CHAR_BODY_LEN: usize = 300;

/// 2^15 hash buckets; id 0 is reserved for padding.
pub const DEFAULT_VOCAB_DIM: usize = 1 << 15;

/// The four fixed-length id sequences of one email. Id 0 is padding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequences {
    pub word_header: Vec<u32>,
    pub char_header: Vec<u32>,
    pub word_body: Vec<u32>,
    pub char_body: Vec<u32>,
}

impl TokenSequences {
    pub fn all_padding() -> Self {
        TokenSequences {
            word_header: vec![0; WORD_HEADER_LEN],
            char_header: vec![0; CHAR_HEADER_LEN],
            word_body: vec![0; WORD_BODY_LEN],
            char_body: vec![0; CHAR_BODY_LEN],
        }
    }

    /// Channels in feature order: word header, char header, word body, char body.
    pub fn channels(&self) -> [&[u32]; 4] {
        [
            &self.word_header,
            &self.char_header,
            &self.word_body,
            &self.char_body,
        ]
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Stateless bucket for a token: FNV-1a mod (vocab_dim - 1), shifted past 0.
pub fn token_id(token: &str, vocab_dim: usize) -> u32 {
    assert!(vocab_dim >= 2, "vocab_dim must be at least 2");
    (fnv1a64(token.as_bytes()) % (vocab_dim as u64 - 1) + 1) as u32
}

fn fit<I: Iterator<Item = u32>>(ids: I, len: usize) -> Vec<u32> {
    let mut out: Vec<u32> = ids.take(len).collect();
    out.resize(len, 0);
    out
}

fn words(text: &str, vocab_dim: usize, len: usize) -> Vec<u32> {
    fit(text.split_whitespace().map(|w| token_id(w, vocab_dim)), len)
}

fn chars(text: &str, vocab_dim: usize, len: usize) -> Vec<u32> {
    let mut buf = [0u8; 4];
    fit(
        text.chars()
            .map(|c| token_id(c.encode_utf8(&mut buf), vocab_dim)),
        len,
    )
}

/// Map an already-cleaned sample to its four sequences. Keeps the first N
/// tokens of each channel and right-pads with 0.
pub fn tokenize(sample: &EmailSample, vocab_dim: usize) -> TokenSequences {
    let header = sample.header_text();
    TokenSequences {
        word_header: words(&header, vocab_dim, WORD_HEADER_LEN),
        char_header: chars(&header, vocab_dim, CHAR_HEADER_LEN),
        word_body: words(&sample.body, vocab_dim, WORD_BODY_LEN),
        char_body: chars(&sample.body, vocab_dim, CHAR_BODY_LEN),
    }
}
