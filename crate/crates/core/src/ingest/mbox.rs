use serde::Serialize;

use super::RawEmail;

const SEPARATOR: &[u8] = b"From ";

/// What happened while splitting one mbox file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MboxReport {
    pub separators: usize,
    pub messages: usize,
    /// The file held no column-0 `From ` line and was taken as one message.
    pub no_separator: bool,
    /// Bytes before the first separator that were not blank.
    pub preamble_bytes: usize,
    /// Separators immediately followed by another separator or EOF.
    pub empty_messages: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MboxParse {
    pub emails: Vec<RawEmail>,
    pub report: MboxReport,
}

/// Split an mbox file into messages. A message starts after every line that
/// begins with exactly `From ` at column 0; the separator line itself is not
/// part of the message.
pub fn parse_mbox(raw: &[u8], origin: &str) -> MboxParse {
    let mut report = MboxReport::default();
    if raw.is_empty() {
        return MboxParse {
            emails: Vec::new(),
            report,
        };
    }

    let mut messages: Vec<Vec<u8>> = Vec::new();
    let mut preamble: Vec<u8> = Vec::new();
    let mut current: Option<Vec<u8>> = None;

    for line in raw.split_inclusive(|&b| b == b'\n') {
        if line.starts_with(SEPARATOR) {
            report.separators += 1;
            if let Some(done) = current.take() {
                messages.push(done);
            }
            current = Some(Vec::new());
        } else {
            match current.as_mut() {
                Some(msg) => msg.extend_from_slice(line),
                None => preamble.extend_from_slice(line),
            }
        }
    }
    if let Some(done) = current.take() {
        messages.push(done);
    }

    if report.separators == 0 {
        report.no_separator = true;
        report.messages = 1;
        let email = RawEmail {
            raw_bytes: raw.to_vec(),
            origin_file: origin.to_string(),
            origin_index: 0,
        };
        return MboxParse {
            emails: vec![email],
            report,
        };
    }

    if preamble.iter().any(|b| !b.is_ascii_whitespace()) {
        report.preamble_bytes = preamble.len();
    }

    let mut emails = Vec::with_capacity(messages.len());
    for (index, bytes) in messages.into_iter().enumerate() {
        if bytes.is_empty() {
            report.empty_messages += 1;
            continue;
        }
        emails.push(RawEmail {
            raw_bytes: bytes,
            origin_file: origin.to_string(),
            origin_index: index,
        });
    }
    report.messages = emails.len();
    MboxParse { emails, report }
}

/// A standalone `.txt` email is a single message.
pub fn parse_text_file(raw: &[u8], origin: &str) -> Option<RawEmail> {
    if raw.is_empty() {
        return None;
    }
    Some(RawEmail {
        raw_bytes: raw.to_vec(),
        origin_file: origin.to_string(),
        origin_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_separators_two_messages() {
        let raw = b"From alice@x Mon Jan 1 00:00:00 2001\nSubject: a\n\nbody a\n\nFrom alice@x Tue Jan 2 00:00:00 2001\nSubject: b\n\nbody b\n";
        let parsed = parse_mbox(raw, "f.mbox");
        assert_eq!(parsed.emails.len(), 2);
        assert_eq!(parsed.emails[0].raw_bytes, b"Subject: a\n\nbody a\n\n");
        assert_eq!(parsed.emails[1].raw_bytes, b"Subject: b\n\nbody b\n");
        assert_eq!(parsed.emails[1].origin_index, 1);
        assert_eq!(parsed.report.separators, 2);
    }

    #[test]
    fn empty_file_no_messages() {
        let parsed = parse_mbox(b"", "empty.mbox");
        assert!(parsed.emails.is_empty());
        assert!(!parsed.report.no_separator);
    }

    #[test]
    fn indented_from_is_not_a_separator() {
        let raw = b"From bob@y Mon Jan 1 00:00:00 2001\nSubject: memo\n\nHello,\n From the desk of the CEO\nFromage is not a separator either\n";
        let parsed = parse_mbox(raw, "f.mbox");
        assert_eq!(parsed.emails.len(), 1);
        let text = String::from_utf8_lossy(&parsed.emails[0].raw_bytes);
        assert!(text.contains(" From the desk"));
    }

    #[test]
    fn no_separator_yields_whole_file_flagged() {
        let raw = b"Subject: hi\n\nno mbox separator here\n";
        let parsed = parse_mbox(raw, "odd.mbox");
        assert_eq!(parsed.emails.len(), 1);
        assert_eq!(parsed.emails[0].raw_bytes, raw.to_vec());
        assert!(parsed.report.no_separator);
    }

    #[test]
    fn crlf_lines_split() {
        let raw = b"From a\r\nSubject: x\r\n\r\nbody\r\nFrom b\r\nSubject: y\r\n\r\nmore\r\n";
        let parsed = parse_mbox(raw, "crlf.mbox");
        assert_eq!(parsed.emails.len(), 2);
        assert_eq!(parsed.emails[0].raw_bytes, b"Subject: x\r\n\r\nbody\r\n");
    }

    #[test]
    fn invalid_utf8_is_not_fatal() {
        let raw = b"From a\nSubject: caf\xe9\n\n\xff\xfe body\n";
        let parsed = parse_mbox(raw, "latin1.mbox");
        assert_eq!(parsed.emails.len(), 1);
    }

    fn message_strategy() -> impl Strategy<Value = String> {
        // Lines that never start with "From " at column 0.
        prop::collection::vec("( From|>From|[a-z]{1,8}|Fromage)[ a-z]{0,12}", 1..6)
            .prop_map(|lines| lines.join("\n") + "\n")
    }

    proptest! {
        #[test]
        fn count_matches_separators_and_content_round_trips(msgs in prop::collection::vec(message_strategy(), 1..8)) {
            let mut raw = String::new();
            for (i, m) in msgs.iter().enumerate() {
                raw.push_str(&format!("From sender{i}@example.com Mon Jan 1 00:00:00 2001\n"));
                raw.push_str(m);
            }
            let parsed = parse_mbox(raw.as_bytes(), "p.mbox");
            prop_assert_eq!(parsed.emails.len(), msgs.len());
            let rebuilt: Vec<u8> = parsed.emails.iter().flat_map(|e| e.raw_bytes.clone()).collect();
            prop_assert_eq!(rebuilt, msgs.concat().into_bytes());
        }
    }
}
