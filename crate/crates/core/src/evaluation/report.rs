//! Evaluation results: per-horizon metrics, first-year aggregates, tables.

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentSpec;
use crate::filings::Sector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub sector: Sector,
    pub horizon: usize,
    pub fold: usize,
    pub prediction: f64,
    pub label: f64,
}

/// Metrics of one horizon. `r2` and `mse` are means over folds; the pooled
/// values score all out-of-fold predictions at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub n: usize,
    pub r2: f64,
    pub mse: f64,
    /// Folds whose r2 was 0 because one side had no variance.
    pub degenerate_folds: usize,
    pub pooled_r2: f64,
    pub pooled_mse: f64,
    pub fold_r2: Vec<f64>,
    pub fold_mse: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstYear {
    pub r2: f64,
    pub mse: f64,
}

/// Mean of the horizon 1-4 metric values, if all four were evaluated.
pub fn first_year(horizons: &[HorizonMetrics]) -> Option<FirstYear> {
    let quarters: Vec<&HorizonMetrics> = (1..=4)
        .map(|h| horizons.iter().find(|m| m.horizon == h))
        .collect::<Option<_>>()?;
    Some(FirstYear {
        r2: quarters.iter().map(|m| m.r2).sum::<f64>() / 4.0,
        mse: quarters.iter().map(|m| m.mse).sum::<f64>() / 4.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorMetrics {
    pub sector: Sector,
    pub horizons: Vec<HorizonMetrics>,
    pub first_year: Option<FirstYear>,
}

impl SectorMetrics {
    pub fn new(sector: Sector, horizons: Vec<HorizonMetrics>) -> Self {
        SectorMetrics {
            sector,
            first_year: first_year(&horizons),
            horizons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub spec: ExperimentSpec,
    pub horizons: Vec<HorizonMetrics>,
    pub first_year: Option<FirstYear>,
    pub per_sector: Vec<SectorMetrics>,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn new(
        name: String,
        spec: ExperimentSpec,
        horizons: Vec<HorizonMetrics>,
        per_sector: Vec<SectorMetrics>,
        predictions: Vec<PredictionRecord>,
    ) -> Self {
        EvalReport {
            name,
            spec,
            first_year: first_year(&horizons),
            horizons,
            per_sector,
            predictions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table with one row per horizon and a first-year row.
    pub fn to_table(&self) -> String {
        let mut rows = vec![vec![
            "horizon".to_string(),
            "n".to_string(),
            "r2".to_string(),
            "mse".to_string(),
        ]];
        for h in &self.horizons {
            let flag = if h.degenerate_folds > 0 { "*" } else { "" };
            rows.push(vec![
                format!("y{}", h.horizon),
                h.n.to_string(),
                format!("{:.4}{flag}", h.r2),
                format!("{:.4}", h.mse),
            ]);
        }
        if let Some(fy) = self.first_year {
            rows.push(vec![
                "first_year".into(),
                String::new(),
                format!("{:.4}", fy.r2),
                format!("{:.4}", fy.mse),
            ]);
        }
        format!("{}\n{}", self.name, align(&rows))
    }
}

/// Left-align the first column and right-align the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = (0..cols)
            .map(|j| {
                let c = r.get(j).map(String::as_str).unwrap_or("");
                if j == 0 {
                    format!("{c:<w$}", w = widths[j])
                } else {
                    format!("{c:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
