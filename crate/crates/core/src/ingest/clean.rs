use super::stopwords::is_stop_word;
use super::EmailSample;

/// Strip HTML markup, decode entities, drop everything that is not an ASCII
/// letter, lowercase, and remove stop words. Output tokens are separated by
/// single spaces and match `^([a-z]+( [a-z]+)*)?$`.
pub fn clean_text(text: &str) -> String {
    let decoded = decode_entities(&strip_tags(text));
    let mut letters = String::with_capacity(decoded.len());
    for c in decoded.chars() {
        if c.is_ascii_alphabetic() {
            letters.push(c.to_ascii_lowercase());
        } else {
            letters.push(' ');
        }
    }
    let mut out = String::with_capacity(letters.len());
    for token in letters
        .split_ascii_whitespace()
        .filter(|t| !is_stop_word(t))
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Clean every text field of a sample.
pub fn clean_sample(sample: &EmailSample) -> EmailSample {
    EmailSample {
        header_subject: clean_text(&sample.header_subject),
        header_content_type: clean_text(&sample.header_content_type),
        body: clean_text(&sample.body),
        ..sample.clone()
    }
}

fn starts_tag(next: Option<char>) -> bool {
    matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?')
}

/// Single left-to-right pass. Tags become a space; `<script>` and `<style>`
/// bodies are dropped. A `<` that does not open a tag, or has no closing
/// `>`, is kept as text.
fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().expect("index on char boundary");
        if c == '<' && starts_tag(text[i + 1..].chars().next()) {
            if let Some(rel_end) = text[i..].find('>') {
                let tag = &text[i + 1..i + rel_end];
                out.push(' ');
                i += rel_end + 1;
                let name: String = tag
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase();
                if name == "script" || name == "style" {
                    let closing = format!("</{name}");
                    match find_ascii_ci(&bytes[i..], closing.as_bytes()) {
                        Some(pos) => {
                            i += pos;
                        }
                        None => i = text.len(),
                    }
                }
                continue;
            }
        }
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn find_ascii_ci(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (0..=haystack.len() - needle.len())
        .find(|&i| haystack[i..i + needle.len()].eq_ignore_ascii_case(needle))
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let end = rest[1..]
            .find(|c: char| c == ';' || c == '&' || c.is_whitespace())
            .map(|p| p + 1);
        let decoded = match end {
            Some(semi) if rest.as_bytes()[semi] == b';' && semi <= 12 => {
                decode_entity(&rest[1..semi]).map(|c| (c, semi + 1))
            }
            _ => None,
        };
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse::<u32>().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "copy" => '©',
        "reg" => '®',
        "ndash" => '–',
        "mdash" => '—',
        "hellip" => '…',
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tags_punctuation_and_stop_words() {
        assert_eq!(clean_text("Click <b>HERE</b> now!!!"), "click");
    }

    #[test]
    fn empty() {
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn case_folding() {
        assert_eq!(
            clean_text("account Account ACCOUNT"),
            "account account account"
        );
    }

    #[test]
    fn entities_and_script() {
        let html =
            "<html><head><style>p { color: red }</style><script>var x = 'steal';</script></head>\
                    <body><p>Verify&nbsp;your&amp;account &#80;ay&#x50;al</p></body></html>";
        assert_eq!(clean_text(html), "verify account paypal");
    }

    #[test]
    fn stray_angle_brackets_are_text() {
        assert_eq!(
            clean_text("price < 5 dollars > cheap"),
            "price dollars cheap"
        );
        assert_eq!(clean_text("unterminated <b tag"), "unterminated b tag");
    }

    #[test]
    fn digits_and_non_ascii_split_tokens() {
        assert_eq!(clean_text("win $1000 café2go"), "win caf go");
    }

    #[test]
    fn deep_nesting_is_linear() {
        let html = "<div>".repeat(50_000) + "payload" + &"</div>".repeat(50_000);
        assert_eq!(clean_text(&html), "payload");
    }

    proptest! {
        #[test]
        fn idempotent_and_well_formed(s in "(<[a-z]{1,4}>|&[a-z]{2,4};|[A-Za-z]{1,6}|[ !?.,0-9]|é){0,40}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            let re_ok = once.is_empty()
                || (once.split(' ').all(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_lowercase())));
            prop_assert!(re_ok, "{:?}", once);
        }
    }
}
