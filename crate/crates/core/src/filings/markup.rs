//! Best-effort HTML to text conversion.

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "tr", "td", "th", "li", "ul", "ol", "table", "h1", "h2", "h3", "h4", "h5",
    "h6", "hr", "section", "article", "header", "footer", "blockquote", "pre", "title", "body",
    "html", "center", "page", "document", "type", "text",
];

/// Tags whose content is never text.
const SKIP_CONTENT_TAGS: &[&str] = &["script", "style", "head"];

/// Remove tags and decode character entities. Block-level tags become line
/// breaks. Never fails; unterminated tags are dropped up to end of input.
pub fn strip_markup(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    let mut skipping: Option<String> = None;

    while let Some(pos) = rest.find(['<', '&']) {
        let (text, tail) = rest.split_at(pos);
        if skipping.is_none() {
            out.push_str(text);
        }
        if tail.starts_with('&') {
            let (decoded, consumed) = decode_entity(tail);
            if skipping.is_none() {
                out.push_str(&decoded);
            }
            rest = &tail[consumed..];
            continue;
        }
        // tail starts with '<'
        let Some(tag) = parse_tag(tail) else {
            // a lone '<' that does not open a tag is kept as text
            if skipping.is_none() {
                out.push('<');
            }
            rest = &tail[1..];
            continue;
        };
        rest = &tail[tag.len..];
        match &skipping {
            Some(name) => {
                if tag.closing && tag.name == *name {
                    skipping = None;
                }
            }
            None => {
                if !tag.closing && SKIP_CONTENT_TAGS.contains(&tag.name.as_str()) {
                    skipping = Some(tag.name.clone());
                } else if BLOCK_TAGS.contains(&tag.name.as_str()) && !out.ends_with('\n') {
                    out.push('\n');
                }
            }
        }
    }
    if skipping.is_none() {
        out.push_str(rest);
    }
    neutralize_angle_brackets(&out)
}

struct Tag {
    name: String,
    closing: bool,
    len: usize,
}

/// Parses the tag that starts at `s[0] == '<'`. Comments, doctype and
/// processing instructions are returned with an empty name.
fn parse_tag(s: &str) -> Option<Tag> {
    let bytes = s.as_bytes();
    let second = *bytes.get(1)?;
    if s.starts_with("<!--") {
        let len = s.find("-->").map(|e| e + 3).unwrap_or(s.len());
        return Some(Tag {
            name: String::new(),
            closing: false,
            len,
        });
    }
    let closing = second == b'/';
    let name_start = if closing { 2 } else { 1 };
    let first_name = *bytes.get(name_start)?;
    if !(first_name.is_ascii_alphabetic() || (!closing && matches!(first_name, b'!' | b'?'))) {
        return None;
    }
    let len = s.find('>').map(|e| e + 1).unwrap_or(s.len());
    let name: String = s[name_start..]
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    Some(Tag { name, closing, len })
}

/// Decodes the entity at the start of `s` (which begins with '&'). Returns
/// the replacement text and the number of bytes consumed. Unknown named
/// entities are removed; a bare '&' is kept.
fn decode_entity(s: &str) -> (String, usize) {
    let body_end = s[1..]
        .char_indices()
        .take(12)
        .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '#'))
        .map(|(i, _)| i + 1);
    let Some(end) = body_end else {
        return ("&".to_string(), 1);
    };
    if !s[end..].starts_with(';') || end == 1 {
        return ("&".to_string(), 1);
    }
    let name = &s[1..end];
    let consumed = end + 1;
    let decoded = if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok(),
            None => num.parse::<u32>().ok(),
        };
        code.and_then(char::from_u32)
            .map(|c| if c == '\u{a0}' { ' ' } else { c })
            .map(String::from)
            .unwrap_or_default()
    } else {
        match name.to_ascii_lowercase().as_str() {
            "amp" => "&".into(),
            "lt" => "<".into(),
            "gt" => ">".into(),
            "quot" => "\"".into(),
            "apos" => "'".into(),
            "nbsp" | "ensp" | "emsp" | "thinsp" => " ".into(),
            "mdash" | "ndash" => "-".into(),
            "lsquo" | "rsquo" => "'".into(),
            "ldquo" | "rdquo" => "\"".into(),
            "bull" | "middot" => "*".into(),
            "hellip" => "...".into(),
            "sect" => "§".into(),
            "copy" => "©".into(),
            "reg" => "®".into(),
            "trade" => "™".into(),
            _ => String::new(),
        }
    };
    (decoded, consumed)
}

/// A decoded `&lt;` must not reintroduce something that reads as a tag.
fn neutralize_angle_brackets(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<' && chars.peek().is_some_and(|n| n.is_ascii_alphabetic()) {
            out.push(' ');
        }
    }
    out
}
