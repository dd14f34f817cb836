//! Filing ingestion: markup removal, Risk Factors extraction, tokenization.

mod markup;
pub mod porter;
mod section;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use markup::strip_markup;
pub use section::{extract_risk_factors, DEFAULT_MIN_SECTION_TOKENS};

#[derive(Debug, Error)]
pub enum FilingError {
    #[error("no Item 1A heading found")]
    NoSectionFound,
    #[error("extracted section has {tokens} tokens, fewer than the minimum {min}")]
    EmptySection { tokens: usize, min: usize },
    #[error("unknown sector code {0:?}")]
    UnknownSector(String),
    #[error("filing body is empty")]
    EmptyBody,
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// NASDAQ sector categories. Declaration order is the canonical
/// (alphabetical by code) one-hot position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    #[serde(rename = "capt")]
    CapitalGoods,
    #[serde(rename = "dur")]
    ConsumerDurables,
    #[serde(rename = "ene")]
    Energy,
    #[serde(rename = "fin")]
    Finance,
    #[serde(rename = "hlth")]
    HealthCare,
    #[serde(rename = "ind")]
    BasicIndustries,
    #[serde(rename = "misc")]
    Miscellaneous,
    #[serde(rename = "n-dur")]
    ConsumerNonDurables,
    #[serde(rename = "pub")]
    PublicUtilities,
    #[serde(rename = "serv")]
    ConsumerServices,
    #[serde(rename = "tech")]
    Technology,
}

impl Sector {
    pub const ALL: [Sector; 11] = [
        Sector::CapitalGoods,
        Sector::ConsumerDurables,
        Sector::Energy,
        Sector::Finance,
        Sector::HealthCare,
        Sector::BasicIndustries,
        Sector::Miscellaneous,
        Sector::ConsumerNonDurables,
        Sector::PublicUtilities,
        Sector::ConsumerServices,
        Sector::Technology,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Sector::CapitalGoods => "capt",
            Sector::ConsumerDurables => "dur",
            Sector::Energy => "ene",
            Sector::Finance => "fin",
            Sector::HealthCare => "hlth",
            Sector::BasicIndustries => "ind",
            Sector::Miscellaneous => "misc",
            Sector::ConsumerNonDurables => "n-dur",
            Sector::PublicUtilities => "pub",
            Sector::ConsumerServices => "serv",
            Sector::Technology => "tech",
        }
    }

    /// Position in the one-hot encoding.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Sector {
    type Err = FilingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim().to_ascii_lowercase();
        Sector::ALL
            .into_iter()
            .find(|sec| sec.code() == code)
            .ok_or_else(|| FilingError::UnknownSector(s.to_string()))
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone)]
pub struct RawFiling {
    pub doc_id: String,
    pub company_id: String,
    pub issue_date: NaiveDate,
    pub sector: Sector,
    pub body: String,
}

/// Stemmed token stream of one report's Risk Factors section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub company_id: String,
    pub issue_date: NaiveDate,
    pub sector: Sector,
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercase, split on non-alphabetic characters and Porter-stem each piece.
pub fn tokenize_and_stem(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|piece| !piece.is_empty())
        .map(|piece| porter::stem(&piece.to_ascii_lowercase()))
        .collect()
}

/// Full per-filing pipeline: strip markup, extract Item 1A, tokenize.
pub fn process_filing(filing: &RawFiling, min_tokens: usize) -> Result<TokenizedDoc, FilingError> {
    if filing.body.trim().is_empty() {
        return Err(FilingError::EmptyBody);
    }
    let text = strip_markup(&filing.body);
    let section = extract_risk_factors(&text, min_tokens)?;
    Ok(TokenizedDoc {
        doc_id: filing.doc_id.clone(),
        company_id: filing.company_id.clone(),
        issue_date: filing.issue_date,
        sector: filing.sector,
        tokens: tokenize_and_stem(section),
    })
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub company_id: String,
    pub issue_date: NaiveDate,
    pub sector: Sector,
    pub path: PathBuf,
}

/// Read a filing manifest: delimited text (comma or tab) with columns
/// doc_id, company_id, issue_date (YYYY-MM-DD), sector, path. A header row is
/// recognised by its first field being `doc_id`.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FilingError> {
    let text = std::fs::read_to_string(path)?;
    let delimiter = if text.lines().next().is_some_and(|l| l.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| FilingError::Manifest {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("doc_id")) {
            continue;
        }
        let err = |message: String| FilingError::Manifest { line, message };
        if record.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", record.len())));
        }
        let issue_date = NaiveDate::parse_from_str(&record[2], "%Y-%m-%d")
            .map_err(|e| err(format!("bad issue date {:?}: {e}", &record[2])))?;
        let sector = record[3].parse::<Sector>().map_err(|e| err(e.to_string()))?;
        if record[0].is_empty() {
            return Err(err("empty doc_id".into()));
        }
        entries.push(ManifestEntry {
            doc_id: record[0].to_string(),
            company_id: record[1].to_string(),
            issue_date,
            sector,
            path: PathBuf::from(&record[4]),
        });
    }
    Ok(entries)
}

/// Write documents as JSON lines, one record per document.
pub fn write_corpus<W: Write>(mut w: W, docs: &[TokenizedDoc]) -> Result<(), FilingError> {
    for doc in docs {
        serde_json::to_writer(&mut w, doc).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<TokenizedDoc>, FilingError> {
    let mut docs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|e| FilingError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}
