use super::{EmailSample, Label, RawEmail, Source};

/// Result of header/body separation, before a label is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEmail {
    pub header_subject: String,
    pub header_content_type: String,
    pub body: String,
    pub has_header: bool,
    pub warnings: Vec<String>,
}

impl ParsedEmail {
    pub fn labeled(self, label: Label, source: Source) -> EmailSample {
        EmailSample {
            header_subject: self.header_subject,
            header_content_type: self.header_content_type,
            body: self.body,
            label,
            source,
            has_header: self.has_header,
        }
    }
}

fn is_field_line(line: &str) -> bool {
    match line.find(':') {
        Some(0) | None => false,
        Some(colon) => line[..colon].bytes().all(|b| (33..=126).contains(&b)),
    }
}

fn is_continuation(line: &str) -> bool {
    line.starts_with(' ') || line.starts_with('\t')
}

/// Split a message into its header block and body at the first blank line,
/// keeping only the Subject and Content-Type fields.
///
/// Without a blank line, or when the block above it does not look like a
/// header (every line a `Name: value` field or a folded continuation), the
/// whole text is the body and `has_header` is false.
pub fn split_header_body(raw: &RawEmail) -> ParsedEmail {
    let text = String::from_utf8_lossy(&raw.raw_bytes);
    let no_header = |text: &str| ParsedEmail {
        header_subject: String::new(),
        header_content_type: String::new(),
        body: text.to_string(),
        has_header: false,
        warnings: Vec::new(),
    };

    // Locate the first blank line.
    let mut offset = 0;
    let mut header_lines: Vec<&str> = Vec::new();
    let mut body_start = None;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches('\n').trim_end_matches('\r');
        if content.is_empty() {
            body_start = Some(offset + line.len());
            break;
        }
        header_lines.push(content);
        offset += line.len();
    }

    let Some(body_start) = body_start else {
        return no_header(&text);
    };
    let valid = match header_lines.first() {
        Some(first) => {
            is_field_line(first)
                && header_lines
                    .iter()
                    .all(|l| is_field_line(l) || is_continuation(l))
        }
        None => false,
    };
    if !valid {
        return no_header(&text);
    }

    // Unfold: each continuation line joins its field with a single space.
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for line in header_lines {
        if is_continuation(line) {
            if let Some((_, parts)) = fields.last_mut() {
                parts.push(line.trim().to_string());
            }
        } else {
            let (name, value) = line.split_once(':').expect("field line has a colon");
            fields.push((
                name.trim().to_ascii_lowercase(),
                vec![value.trim().to_string()],
            ));
        }
    }

    let mut subject: Option<String> = None;
    let mut content_type: Option<String> = None;
    let mut warnings = Vec::new();
    for (name, parts) in fields {
        let slot = match name.as_str() {
            "subject" => &mut subject,
            "content-type" => &mut content_type,
            _ => continue,
        };
        let value = parts
            .into_iter()
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        if slot.is_some() {
            warnings.push(format!(
                "duplicate {name} field ignored; first occurrence kept"
            ));
        } else {
            *slot = Some(value);
        }
    }

    ParsedEmail {
        header_subject: subject.unwrap_or_default(),
        header_content_type: content_type.unwrap_or_default(),
        body: text[body_start..].to_string(),
        has_header: true,
        warnings,
    }
}
