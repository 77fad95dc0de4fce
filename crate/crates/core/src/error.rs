use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Malformed input.
    #[error("channel has no states")]
    EmptyChannel,
    #[error("probabilities sum to {0}")]
    ProbabilitySum(f64),
    #[error("state {state}: probability must be positive and finite, got {value}")]
    InvalidProbability { state: usize, value: f64 },
    #[error("state {state}: gain {field} must be finite and nonnegative, got {value}")]
    InvalidGain {
        state: usize,
        field: &'static str,
        value: f64,
    },
    #[error("budget {field} must be finite and nonnegative, got {value}")]
    InvalidBudget { field: &'static str, value: f64 },
    #[error("policy has {got} states but the channel has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("policy entry {field} in state {state} must be finite, got {value}")]
    InvalidPolicy {
        state: usize,
        field: &'static str,
        value: f64,
    },
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("fading variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed channel file: {0}")]
    ChannelFile(#[from] serde_json::Error),

    // Scheme preconditions.
    #[error("all gains are zero")]
    AllGainsZero,
    #[error("channel is not ergodic very strong (lhs {lhs:.6} >= rhs {rhs:.6} bits)")]
    NotEvs { lhs: f64, rhs: f64 },
    #[error("channel is not uniformly strong (state {state} has a weak cross link)")]
    NotUniformlyStrong { state: usize },
    #[error("channel is not uniformly weak (state {state} has a strong cross link)")]
    NotUniformlyWeak { state: usize },
    #[error("channel is not uniformly mixed (state {state} breaks the mixed pattern)")]
    NotUniformlyMixed { state: usize },
    #[error("expected a one-sided channel with {expected}")]
    NotOneSided { expected: &'static str },

    // Numerical failures.
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("no sum-rate case matched (max relative gap {gap:.3e}); tighten the solver tolerance")]
    NoCaseMatched { gap: f64 },
    #[error(
        "case algorithm value {case_value:.9} disagrees with direct maximization {direct_value:.9}"
    )]
    CrossCheck { case_value: f64, direct_value: f64 },
    #[error("linear system in the interior-point step is singular")]
    Singular,
}

impl Error {
    /// Malformed or out-of-range input data.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::EmptyChannel
                | Error::ProbabilitySum(_)
                | Error::InvalidProbability { .. }
                | Error::InvalidGain { .. }
                | Error::InvalidBudget { .. }
                | Error::ShapeMismatch { .. }
                | Error::InvalidPolicy { .. }
                | Error::ZeroSamples
                | Error::InvalidVariance(_)
                | Error::InvalidTolerance(_)
                | Error::InvalidArgument(_)
                | Error::ChannelFile(_)
        )
    }

    /// The input is valid but the requested scheme does not apply to it.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::AllGainsZero
                | Error::NotEvs { .. }
                | Error::NotUniformlyStrong { .. }
                | Error::NotUniformlyWeak { .. }
                | Error::NotUniformlyMixed { .. }
                | Error::NotOneSided { .. }
        )
    }
}
