use std::io;

use thiserror::Error;

/// Errors produced anywhere in the localization pipeline.
#[derive(Debug, Error)]
pub enum SalcError {
    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("rooms disconnected: no skeleton path between vertices {from} and {to}")]
    RoomsDisconnected { from: usize, to: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("missing exemplar reading for cluster {cluster} (exemplar RP {exemplar})")]
    MissingExemplar { cluster: usize, exemplar: usize },

    #[error("training diverged (non-finite loss) with learning rate {eta}")]
    Divergence { eta: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<SalcError>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SalcError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SalcError::InvalidInput(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        SalcError::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        SalcError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage labels peeled off.
    pub fn root(&self) -> &SalcError {
        match self {
            SalcError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 validation, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            SalcError::Divergence { .. } => 2,
            SalcError::Io(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SalcError>;
