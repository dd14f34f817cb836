//! Returns, realized-volatility labels, GARCH features and sector encoding.

pub mod garch;
mod optim;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filings::Sector;

pub use garch::{garch_fit, GarchFit, GarchParams};
pub use optim::{nelder_mead, NelderMeadResult};

/// Trading days per quarter.
pub const QUARTER_DAYS: usize = 64;
/// Number of quarterly prediction horizons.
pub const HORIZONS: usize = 8;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("series too short: need {needed}, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("window [{start}, {end}] outside series of length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("window returns are all identical; volatility is undefined")]
    ZeroVolatility,
    #[error("insufficient history: horizons {missing:?} unavailable")]
    InsufficientHistory {
        missing: Vec<usize>,
        partial: [Option<f64>; HORIZONS],
    },
    #[error("unknown sector code {0:?}")]
    UnknownSector(String),
    #[error("non-finite return")]
    NonFinite,
    #[error("invalid price series: {0}")]
    InvalidSeries(String),
    #[error("price file {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Adjusted closing prices for one ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self, MarketError> {
        if dates.len() != prices.len() {
            return Err(MarketError::InvalidSeries("dates and prices differ in length".into()));
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(MarketError::InvalidSeries(format!("non-positive price {p}")));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MarketError::InvalidSeries("dates not strictly increasing".into()));
        }
        Ok(PriceSeries {
            ticker: ticker.into(),
            dates,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Read a `date,adjusted_close` file (header optional). Rows are sorted
    /// by date before validation.
    pub fn load(ticker: &str, path: &Path) -> Result<Self, MarketError> {
        let text = std::fs::read_to_string(path)?;
        let err = |message: String| MarketError::Format {
            path: path.display().to_string(),
            message,
        };
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split([',', '\t']).map(str::trim);
            let (Some(d), Some(p)) = (parts.next(), parts.next()) else {
                return Err(err(format!("line {}: expected date,adjusted_close", i + 1)));
            };
            let Ok(date) = NaiveDate::parse_from_str(d, "%Y-%m-%d") else {
                if i == 0 {
                    continue;
                }
                return Err(err(format!("line {}: bad date {d:?}", i + 1)));
            };
            let price: f64 = p
                .parse()
                .map_err(|_| err(format!("line {}: bad price {p:?}", i + 1)))?;
            rows.push((date, price));
        }
        rows.sort_by_key(|r| r.0);
        let (dates, prices) = rows.into_iter().unzip();
        Self::new(ticker, dates, prices).map_err(|e| err(e.to_string()))
    }
}

/// Log returns aligned to the later of each pair of dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Index of the first return dated on or after `date` (non-trading
    /// issue dates snap forward).
    pub fn index_on_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }
}

pub fn log_returns(series: &PriceSeries) -> Result<ReturnSeries, MarketError> {
    if series.len() < 2 {
        return Err(MarketError::TooShort {
            needed: 2,
            found: series.len(),
        });
    }
    Ok(ReturnSeries {
        dates: series.dates[1..].to_vec(),
        returns: series
            .prices
            .windows(2)
            .map(|w| w[1].ln() - w[0].ln())
            .collect(),
    })
}

/// ln of the standard deviation of returns over indices `start..=start+window`,
/// dividing the sum of squared deviations by `window`.
pub fn realized_volatility(returns: &[f64], start: usize, window: usize) -> Result<f64, MarketError> {
    if window < 2 {
        return Err(MarketError::TooShort {
            needed: 2,
            found: window,
        });
    }
    let end = start + window;
    if end >= returns.len() {
        return Err(MarketError::OutOfRange {
            start,
            end,
            len: returns.len(),
        });
    }
    let span = &returns[start..=end];
    if span.iter().all(|&r| r == span[0]) {
        return Err(MarketError::ZeroVolatility);
    }
    let mean = span.iter().sum::<f64>() / span.len() as f64;
    let ss: f64 = span.iter().map(|r| (r - mean).powi(2)).sum();
    Ok((ss / window as f64).sqrt().ln())
}

/// Volatility labels of one report for the eight quarters after issue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityLabels {
    pub doc_id: String,
    pub y: [f64; HORIZONS],
}

impl VolatilityLabels {
    /// Mean of the first four quarterly labels.
    pub fn first_year(&self) -> f64 {
        self.y[..4].iter().sum::<f64>() / 4.0
    }
}

/// Quarter labels with unavailable windows left empty.
pub fn quarterly_labels_partial(issue_date: NaiveDate, returns: &ReturnSeries) -> [Option<f64>; HORIZONS] {
    let s = returns.index_on_or_after(issue_date);
    std::array::from_fn(|k| {
        realized_volatility(&returns.returns, s + QUARTER_DAYS * k, QUARTER_DAYS).ok()
    })
}

pub fn quarterly_labels(doc_id: &str, issue_date: NaiveDate, returns: &ReturnSeries) -> Result<VolatilityLabels, MarketError> {
    let s = returns.index_on_or_after(issue_date);
    let mut partial = [None; HORIZONS];
    let mut missing = Vec::new();
    for (k, slot) in partial.iter_mut().enumerate() {
        match realized_volatility(&returns.returns, s + QUARTER_DAYS * k, QUARTER_DAYS) {
            Ok(v) => *slot = Some(v),
            Err(MarketError::OutOfRange { .. }) => missing.push(k + 1),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(MarketError::InsufficientHistory { missing, partial });
    }
    Ok(VolatilityLabels {
        doc_id: doc_id.to_string(),
        y: partial.map(|v| v.expect("all horizons present")),
    })
}

/// Realized volatility over the quarter ending at the issue date.
pub fn current_volatility(issue_date: NaiveDate, returns: &ReturnSeries) -> Result<f64, MarketError> {
    let s = returns.index_on_or_after(issue_date);
    if s < QUARTER_DAYS || s >= returns.len() {
        return Err(MarketError::InsufficientHistory {
            missing: Vec::new(),
            partial: [None; HORIZONS],
        });
    }
    realized_volatility(&returns.returns, s - QUARTER_DAYS, QUARTER_DAYS)
}

/// GARCH(1,1) fitted on all returns strictly before the issue date.
pub fn garch_before(issue_date: NaiveDate, returns: &ReturnSeries, min_observations: usize) -> Result<GarchFit, MarketError> {
    let s = returns.index_on_or_after(issue_date);
    garch_fit(&returns.returns[..s], min_observations)
}

pub fn sector_onehot(sector: Sector) -> [f64; 11] {
    let mut v = [0.0; 11];
    v[sector.index()] = 1.0;
    v
}

/// One-hot vector for a sector code such as `"fin"`.
pub fn sector_onehot_code(code: &str) -> Result<[f64; 11], MarketError> {
    code.parse::<Sector>()
        .map(sector_onehot)
        .map_err(|_| MarketError::UnknownSector(code.to_string()))
}

/// Volatility forecast `h` steps ahead on the ln-std scale.
pub fn garch_forecast(params: &GarchParams, h: u32) -> f64 {
    params.forecast(h)
}

/// Non-text features of one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketFeatures {
    pub current_volatility: f64,
    pub garch_forecast: f64,
    pub sector: Sector,
}

impl MarketFeatures {
    pub const NAMES: [&'static str; 13] = [
        "current_volatility",
        "garch",
        "sector_capt",
        "sector_dur",
        "sector_ene",
        "sector_fin",
        "sector_hlth",
        "sector_ind",
        "sector_misc",
        "sector_n-dur",
        "sector_pub",
        "sector_serv",
        "sector_tech",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.current_volatility, self.garch_forecast];
        v.extend(sector_onehot(self.sector));
        v
    }
}

/// Labels and market features of one report; missing values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub doc_id: String,
    pub sector: Sector,
    pub y: [Option<f64>; HORIZONS],
    pub current_volatility: Option<f64>,
    pub garch: Option<f64>,
}

impl LabelRecord {
    /// Compute labels and features from the company's returns. The GARCH
    /// feature is the unconditional ln-volatility of a fit on pre-issue data.
    pub fn compute(
        doc_id: &str,
        sector: Sector,
        issue_date: NaiveDate,
        returns: &ReturnSeries,
        garch_min_observations: usize,
    ) -> (Self, Vec<MarketError>) {
        let mut problems = Vec::new();
        let y = match quarterly_labels(doc_id, issue_date, returns) {
            Ok(l) => l.y.map(Some),
            Err(MarketError::InsufficientHistory { missing, partial }) => {
                problems.push(MarketError::InsufficientHistory { missing, partial });
                partial
            }
            Err(e) => {
                problems.push(e);
                quarterly_labels_partial(issue_date, returns)
            }
        };
        let current_volatility = current_volatility(issue_date, returns)
            .map_err(|e| problems.push(e))
            .ok();
        let garch = garch_before(issue_date, returns, garch_min_observations)
            .map(|fit| fit.params.unconditional_volatility())
            .map_err(|e| problems.push(e))
            .ok()
            .filter(|v| v.is_finite());
        (
            LabelRecord {
                doc_id: doc_id.to_string(),
                sector,
                y,
                current_volatility,
                garch,
            },
            problems,
        )
    }

    pub fn market_features(&self) -> Option<MarketFeatures> {
        Some(MarketFeatures {
            current_volatility: self.current_volatility?,
            garch_forecast: self.garch?,
            sector: self.sector,
        })
    }

    /// Mean of the first four labels when all are present.
    pub fn first_year(&self) -> Option<f64> {
        let mut sum = 0.0;
        for v in &self.y[..4] {
            sum += (*v)?;
        }
        Some(sum / 4.0)
    }
}

const LABEL_HEADER: [&str; 12] = [
    "doc_id", "sector", "y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8", "current_volatility", "garch",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write records as CSV with empty cells for missing values.
pub fn write_labels<W: std::io::Write>(w: W, records: &[LabelRecord]) -> Result<(), MarketError> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| MarketError::Format {
        path: "labels".into(),
        message: e.to_string(),
    };
    out.write_record(LABEL_HEADER).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.doc_id.clone(), r.sector.code().to_string()];
        row.extend(r.y.iter().map(|v| cell(*v)));
        row.push(cell(r.current_volatility));
        row.push(cell(r.garch));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels<R: std::io::Read>(r: R) -> Result<Vec<LabelRecord>, MarketError> {
    let mut reader = csv::Reader::from_reader(r);
    let err = |line: usize, message: String| MarketError::Format {
        path: "labels".into(),
        message: format!("line {line}: {message}"),
    };
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| err(line, e.to_string()))?;
        if row.len() != LABEL_HEADER.len() {
            return Err(err(line, format!("expected {} fields, found {}", LABEL_HEADER.len(), row.len())));
        }
        let num = |j: usize| -> Result<Option<f64>, MarketError> {
            let s = row[j].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| err(line, format!("bad number {s:?}")))
        };
        let sector = row[1]
            .parse::<Sector>()
            .map_err(|_| MarketError::UnknownSector(row[1].to_string()))?;
        let mut y = [None; HORIZONS];
        for (k, slot) in y.iter_mut().enumerate() {
            *slot = num(2 + k)?;
        }
        records.push(LabelRecord {
            doc_id: row[0].to_string(),
            sector,
            y,
            current_volatility: num(10)?,
            garch: num(11)?,
        });
    }
    Ok(records)
}

/// Indices of values within three sample standard deviations of the mean.
pub fn filter_outliers(values: &[f64]) -> Result<Vec<usize>, MarketError> {
    if values.len() < 2 {
        return Err(MarketError::TooShort {
            needed: 2,
            found: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| (*v - mean).abs() <= 3.0 * std)
        .map(|(i, _)| i)
        .collect())
}
