use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty audio: {0}")]
    EmptyAudio(String),

    #[error("malformed header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    #[error("unsupported bit depth {bits} in {path} (only 16-bit PCM is supported)")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-power {0} signal: SNR scaling is undefined")]
    ZeroPower(&'static str),

    #[error("constant modulator: rescale to [0, 1] is degenerate")]
    ConstantModulator,

    #[error("clip too short: {samples} samples, need at least {window}")]
    ClipTooShort { samples: usize, window: usize },

    #[error("could not place all clips without overlap after {attempts} attempts")]
    StreamPlacement { attempts: usize },

    #[error("non-finite weights")]
    NonFiniteWeights,

    #[error("non-differentiable point: {0}")]
    NonDifferentiable(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("class {0} has no samples")]
    EmptyClass(String),

    #[error("not a model file: bad magic {0:?}")]
    BadModelMagic(String),

    #[error("not a spike pattern file: bad magic {0:?}")]
    BadPatternMagic(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("weight count mismatch for class {class}: expected {expected}, found {found}")]
    WeightCountMismatch {
        class: String,
        expected: usize,
        found: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
