use std::fmt;

use crate::verification::PartialVerification;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("point ({x}, {y}) lies outside the region {region}")]
    OutOfRegion { x: f64, y: f64, region: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient samples: needed {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error(
        "insufficient evidence after {} queries: {} positive / {} negative retained",
        .0.trace.len(),
        .0.positives().count(),
        .0.negatives().count()
    )]
    InsufficientEvidence(Box<PartialVerification>),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Geometry,
    Spiral,
    Sampling,
    Verification,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Geometry => "geometry",
            Stage::Spiral => "spiral",
            Stage::Sampling => "sampling",
            Stage::Verification => "verification",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage={stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn new(stage: Stage, source: Error) -> Self {
        Self { stage, source }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}
