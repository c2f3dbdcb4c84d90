use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The requested transform would alias on this grid.
    #[error("aliasing risk: {what} needs a phase step of {step:.3} rad between samples (limit pi)")]
    AliasingRisk { what: &'static str, step: f64 },

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("closure error: {0}")]
    Closure(String),

    #[error("energy error: closure residual {residual:.3e} exceeds {limit:.1e}")]
    Energy { residual: f64, limit: f64 },

    #[error("missing pump OAM for the {0} nm pump transition")]
    MissingPumpOam(f64),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("low fringe visibility {0:.3}")]
    LowVisibility(f64),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("unsigned input: {0}")]
    UnsignedInput(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Strips any stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: stage.to_string(), source: Box::new(e) })
    }
}
