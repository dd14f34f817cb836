//! Locating the "Item 1A. Risk Factors" section in filing text.

use std::sync::LazyLock;

use regex::Regex;

use super::FilingError;

/// Default minimum number of whitespace-separated tokens in an extracted section.
pub const DEFAULT_MIN_SECTION_TOKENS: usize = 50;

/// A heading match inside the first this-many percent of the document may be
/// a table-of-contents entry.
const TOC_POSITION_PERCENT: usize = 5;
/// Table-of-contents entries are followed closely by the next item heading.
const TOC_LOOKAHEAD_CHARS: usize = 200;

static START_HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)(?:^|\.)[ \t]*(item\s*1a\b[ \t]*[.:\-]?[ \t]*(?:risk\s+factors\b[ \t]*\.?)?)")
        .expect("valid regex")
});

static END_HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)(?:^|\.)[ \t]*(item\s*(?:1b|2)\b)").expect("valid regex")
});

static ANY_ITEM_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bitem\s*\d+[a-z]?\b").expect("valid regex"));

/// Extract the Risk Factors section from markup-free text.
///
/// The start is the last "Item 1A" heading that is not classified as a
/// table-of-contents entry; if every match looks like one, the last match is
/// used. The section runs to the next "Item 1B" or "Item 2" heading, or to
/// the end of the text.
pub fn extract_risk_factors(text: &str, min_tokens: usize) -> Result<&str, FilingError> {
    let starts: Vec<(usize, usize)> = START_HEADING
        .captures_iter(text)
        .filter_map(|c| c.get(1))
        .map(|m| (m.start(), m.end()))
        .collect();
    let &(_, body_start) = starts
        .iter()
        .rev()
        .find(|&&(pos, end)| !is_table_of_contents(text, pos, end))
        .or_else(|| starts.last())
        .ok_or(FilingError::NoSectionFound)?;

    let body_end = END_HEADING
        .captures_at(text, body_start)
        .and_then(|c| c.get(1))
        .map(|m| m.start())
        .unwrap_or(text.len());
    let section = &text[body_start..body_end];
    let tokens = section.split_whitespace().count();
    if tokens < min_tokens {
        return Err(FilingError::EmptySection {
            tokens,
            min: min_tokens,
        });
    }
    Ok(section)
}

fn is_table_of_contents(text: &str, pos: usize, heading_end: usize) -> bool {
    if pos * 100 >= text.len() * TOC_POSITION_PERCENT {
        return false;
    }
    let mut window_end = (heading_end + TOC_LOOKAHEAD_CHARS).min(text.len());
    while !text.is_char_boundary(window_end) {
        window_end -= 1;
    }
    ANY_ITEM_HEADING.is_match(&text[heading_end..window_end])
}
