//! Crate-wide error type.

use thiserror::Error;

/// Largest supported quantizer bit-width. Grids with `2^b` levels are
/// materialized as `f64` spacings; 32 bits is far beyond anything the
/// simulator needs while keeping `1usize << bits` safe on all targets.
pub const MAX_BITS: u32 = 32;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit-width must be in 1..={MAX_BITS}, got {0}")]
    InvalidBits(u32),

    #[error("invalid quantizer range: lo={lo}, hi={hi} (need finite lo <= hi)")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("privacy loss must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),

    #[error("privacy loss must be finite and > 0 for the Laplace mechanism, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("sensitivity must be finite and > 0, got {0}")]
    InvalidSensitivity(f64),

    #[error("value {value} outside quantizer range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("coordinate {index}: value {value} outside quantizer range [{lo}, {hi}]")]
    OutOfRangeAt {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("distances to quantization levels must be finite and >= 0, got ({lower}, {upper})")]
    NegativeDistance { lower: f64, upper: f64 },

    #[error("negative privacy loss in composition: entry {index} is {value}")]
    NegativeBudgetEntry { index: usize, value: f64 },

    #[error("dimension must be >= 1")]
    ZeroDimension,

    #[error("noiseless distortion-free link: effective SNR denominator is zero")]
    DegenerateLink,

    #[error("effective SNR must be > 0, got {0}")]
    NonPositiveSnr(f64),

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fusion weights do not match participating devices: {0}")]
    WeightMismatch(String),

    #[error("weights must be non-negative and sum to 1 (sum off by {0:e})")]
    InvalidWeights(f64),

    #[error("cluster-size program infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration guard exceeded: search lattice has {0} points (limit {1})")]
    SearchSpaceTooLarge(u128, u128),

    #[error("cluster count {count} exceeds group size {size} for group {group}")]
    ClusterTooLarge {
        group: usize,
        count: usize,
        size: usize,
    },

    #[error("clipping constant must be finite and > 0, got {0}")]
    InvalidClip(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty mini-batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("infeasible spectrum request: dim={dim}, mu={mu}, gamma={gamma}")]
    InfeasibleSpectrum { dim: usize, mu: f64, gamma: f64 },

    #[error("task is not assumption-certified: {0}")]
    NotCertified(&'static str),

    #[error("learning-rate gate violated: {0}")]
    GateViolated(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("IDX format error at byte {offset}: {message}")]
    IdxFormat { offset: u64, message: String },

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("unknown sweep axis {0:?}")]
    UnknownAxis(String),

    #[error("bad sweep value {value:?} for axis {axis:?}: {message}")]
    BadAxisValue {
        axis: String,
        value: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wrap an error with the FL round in which it occurred.
    pub fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}
