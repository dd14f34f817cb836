//! Metrics, experiment harness, drift analysis and coefficient reports.

pub mod coefficients;
pub mod drift;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod splits;

use thiserror::Error;

pub use coefficients::sector_coefficient_report;
pub use drift::{drift_matrix, yearly_feature_matrices};
pub use experiment::{
    run_experiment, ExperimentData, ExperimentSpec, FusionMode, LexiconMode, OutlierScope, Split, DEFAULT_EXPANSION,
};
pub use metrics::{mse, r_squared, RSquared};
pub use report::{align, EvalReport, FirstYear, HorizonMetrics, PredictionRecord, SectorMetrics};
pub use splits::{kfold_assignment, sector_agnostic_split, temporal_split};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no values to score")]
    Empty,
    #[error("empty split side: {0}")]
    EmptySide(String),
    #[error("year index {0} has no reports")]
    EmptyYear(usize),
    #[error("need at least {needed} reports, found {found}")]
    TooFewDocs { needed: usize, found: usize },
    #[error("sector {0} has no reports")]
    UnknownSector(String),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl EvalError {
    pub(crate) fn stage(stage: &'static str, source: impl std::error::Error + Send + Sync + 'static) -> Self {
        EvalError::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
