use alloc::string::String;

/// Errors raised by the numerical stages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("no spectral bins in band [{lo} Hz, {hi} Hz)")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("invalid cutoff {cutoff} Hz for sampling rate {fs} Hz")]
    InvalidCutoff { cutoff: f64, fs: f64 },

    #[error("input is constant")]
    ConstantInput,

    #[error("inputs have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("recording shapes differ: {0}")]
    ShapeMismatch(String),

    #[error("need at least {needed} active channels, have {got}")]
    InsufficientChannels { needed: usize, got: usize },

    #[error("all but {survivors} channels were rejected")]
    AllChannelsRejected { survivors: usize },

    #[error("covariance has rank zero")]
    RankZero,

    #[error("population of {0} components is too small for robust statistics")]
    DegeneratePopulation(usize),

    #[error("class `{class}` has only {count} trials")]
    ClassTooSmall { class: String, count: usize },

    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),

    #[error("test labels contain a single class")]
    SingleClassTest,

    #[error("no trial fits inside the recording with epoch length {p}")]
    NoTrialsSurvive { p: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
