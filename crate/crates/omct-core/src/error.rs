//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the modelling, simulation, and inference layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its domain (sign, range, or a required relation).
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Name of the offending parameter or field.
        name: &'static str,
        /// What went wrong.
        reason: String,
    },

    /// Both bath coupling rates are zero: the steady-state occupation is undefined.
    #[error("both bath coupling rates are zero; steady-state occupation is undefined")]
    UndefinedRate,

    /// Pulse repetition faster than the pulse duration allows.
    #[error("invalid duty cycle: R*T0 = {0} but must be < 1")]
    InvalidDutyCycle(f64),

    /// The finesse relation F = pi*sqrt(r)/(1-r) has no admissible mirror reflectivity.
    #[error("no mirror reflectivity in (0,1) for finesse {0}; need finesse > pi")]
    NoReflectivitySolution(f64),

    /// A waveform lacks the trailing zeros needed to suppress FFT wraparound.
    #[error("waveform needs >= {required_s:.3e} s of trailing zeros, found {found_s:.3e} s")]
    InsufficientPadding {
        /// Trailing-zero duration required for the filter at hand.
        required_s: f64,
        /// Trailing-zero duration actually present.
        found_s: f64,
    },

    /// Two waveforms that must share one time grid do not.
    #[error("waveform grids do not match: {0}")]
    GridMismatch(String),

    /// A histogram carries no exposure (zero repetitions or zero bin width).
    #[error("histogram has zero exposure")]
    ZeroExposure,

    /// The click-rate function returned a negative or non-finite value.
    #[error("rate must be finite and nonnegative on the window (got {value} at t = {t_s:.3e} s)")]
    InvalidRate {
        /// Time at which the offending value was seen.
        t_s: f64,
        /// The offending rate value.
        value: f64,
    },

    /// Input data cannot constrain the requested fit.
    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),

    /// Fewer data points than fit parameters.
    #[error("not enough data points: need {needed}, got {got}")]
    NotEnoughPoints {
        /// Minimum number of points for the fit.
        needed: usize,
        /// Number of points supplied.
        got: usize,
    },

    /// No starting ensemble with finite posterior probability could be drawn.
    #[error("could not find a starting ensemble with finite posterior probability")]
    McmcInitialization,

    /// An iterative fit failed to converge.
    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    /// A required input (e.g. a measured efficiency) is missing or zero.
    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    /// Malformed CSV input.
    #[error("csv parse error at line {line}: {reason}")]
    CsvParse {
        /// 1-based line number.
        line: usize,
        /// What failed to parse.
        reason: String,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
