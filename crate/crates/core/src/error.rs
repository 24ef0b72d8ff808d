use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid asymptotic parameters: {0}")]
    InvalidAsymptotics(String),

    #[error("zasymptotic scale 1/(ll*ul) is undefined for ll={ll}, ul={ul}; set `zasymptotic_scale` explicitly")]
    ZeroLevelProduct { ll: f64, ul: f64 },

    #[error("need at least 2 samples in the {side} asymptotic region, found {found}")]
    InsufficientSamples { side: Side, found: usize },

    #[error("degenerate least-squares design in the {side} asymptotic region (all x equal)")]
    DegenerateFit { side: Side },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("non-finite value in layer {layer}")]
    NonFiniteLayer { layer: usize },

    #[error("non-finite {what} at epoch {epoch}")]
    NonFiniteTraining { what: &'static str, epoch: usize },

    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid option parameters: {0}")]
    InvalidMarket(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        })
    }
}

/// Stage of an experiment run, attached to errors so the failing step is visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Generate,
    Fit,
    Train,
    Evaluate,
    Write,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Generate => "generate",
            Phase::Fit => "fit",
            Phase::Train => "train",
            Phase::Evaluate => "evaluate",
            Phase::Write => "write",
        })
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_phase(self, phase: Phase) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical breakdown (non-finite values)
    /// rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFiniteLayer { .. } | Error::NonFiniteTraining { .. } | Error::NonFiniteGradient { .. } => true,
            Error::Phase { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
