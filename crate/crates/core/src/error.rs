use thiserror::Error;

/// Errors produced by state construction, optical elements, and protocol runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("a mode registry needs at least one mode")]
    EmptyRegistry,

    #[error("duplicate mode label `{0}` in registry")]
    DuplicateLabel(String),

    #[error("mode `{label}` (index {index}) does not belong to this state's registry")]
    UnknownMode { label: String, index: usize },

    #[error("states live on different mode registries")]
    RegistryMismatch,

    #[error("registries share the mode label `{0}`")]
    OverlappingRegistries(String),

    #[error("occupation vector has {got} entries but the registry has {expected} modes")]
    OccupationLength { got: usize, expected: usize },

    #[error("amplitude is not finite")]
    NonFiniteAmplitude,

    #[error("photon count exceeds the supported occupation range")]
    OccupationOverflow,

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("state must be normalized, found norm^2 = {0}")]
    NotNormalized(f64),

    #[error("matrix is not unitary within 1e-12")]
    NonUnitary,

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("loss channel acts on at most one photon per basis term, found a term with {0}")]
    MultiPhotonLoss(u32),

    #[error("detection pattern covers {pattern} detector pairs but {pairs} pairs were given")]
    PatternLengthMismatch { pattern: usize, pairs: usize },

    #[error("detector pairs must use distinct modes (mode `{0}` repeats)")]
    OverlappingPairs(String),

    #[error("detection pattern is not an accepted single-click pattern")]
    PatternNotAccepted,

    #[error("the protocol needs at least two spatial modes, got n = {0}")]
    TooFewModes(u32),

    #[error("n = {0} exceeds the supported mode count (max 16)")]
    TooManyModes(u32),

    #[error("{quantity} has no continuous limit at eta = {eta}, t = {t}")]
    UndefinedLimit {
        quantity: &'static str,
        eta: f64,
        t: f64,
    },

    #[error("Monte Carlo sampling needs at least one shot")]
    ZeroShots,

    #[error("malformed state JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
