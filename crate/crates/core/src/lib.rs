//! Volatility forecasting from the Risk Factors section of annual reports.

pub mod embeddings;
pub mod features;
pub mod filings;
pub mod lexicon;
pub mod market;
pub mod learning;
pub mod evaluation;
pub mod fusion;
