use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero variance: all samples are identical")]
    ZeroVariance,

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("depth {depth} out of range 1..={max}")]
    DepthOutOfRange { depth: usize, max: usize },

    #[error("not enough samples: need at least {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("nu diverges: channel shape must exceed 1, got {0}")]
    NuDiverges(f64),

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("incompatible metric of clarity: {0}")]
    IncompatibleMoc(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("problem too large for exact evaluation (s = {0}); use closed form")]
    UseClosedForm(usize),

    #[error("unexpected end of file in {0}")]
    UnexpectedEof(String),

    #[error("bad magic number {found:#010x} in {path} (expected {expected:#010x})")]
    BadMagic { path: String, expected: u32, found: u32 },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable kebab-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVariance => "zero-variance",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DepthOutOfRange { .. } => "depth-out-of-range",
            Error::NotEnoughSamples { .. } => "not-enough-samples",
            Error::NuDiverges(_) => "nu-diverges",
            Error::DegenerateTrainingSet(_) => "degenerate-training-set",
            Error::NotPositiveDefinite => "not-positive-definite",
            Error::IncompatibleMoc(_) => "incompatible-moc",
            Error::EmptyInput(_) => "empty-input",
            Error::UseClosedForm(_) => "use-closed-form",
            Error::UnexpectedEof(_) => "unexpected-eof",
            Error::BadMagic { .. } => "bad-magic",
            Error::CountMismatch { .. } => "count-mismatch",
            Error::UnsupportedVersion(_) => "unsupported-version",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
