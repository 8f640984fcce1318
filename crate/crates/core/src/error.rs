use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    /// The effective linewidth went non-positive, i.e. the bath would act as gain.
    #[error("saturation overflow: effective linewidth {kappa_tilde} 1/s is not positive")]
    SaturationOverflow { kappa_tilde: f64 },

    #[error("time step {dt} s outside the Markovian window [{lower}, {upper}] s")]
    MarkovWindow { dt: f64, lower: f64, upper: f64 },

    #[error(
        "step refinement did not converge: {coarse_steps} vs {fine_steps} steps differ by {max_rel_diff:e} (tolerance {tolerance:e})"
    )]
    StepRefinement {
        coarse_steps: usize,
        fine_steps: usize,
        max_rel_diff: f64,
        tolerance: f64,
    },

    #[error("fixed-point iteration diverged after {iterations} iterations (last residual {last_residual:e})")]
    FixedPointDivergence {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("steady state is not unique: starting guesses converged to n = {first} and n = {second}")]
    MultipleSteadyStates { first: f64, second: f64 },

    #[error("photon energy exceeds the pair-breaking threshold (hbar*omega = {hbar_omega:e} J, 2*Delta = {two_delta:e} J)")]
    PairBreaking { hbar_omega: f64, two_delta: f64 },

    #[error("parameters are not identifiable from this data: {0}")]
    Unidentifiable(String),

    #[error("sweep data is not circular: {0}")]
    NonCircular(String),

    #[error("sweep spans {span_linewidths:.2} linewidths, at least {required} required")]
    InsufficientSpan { span_linewidths: f64, required: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("trace {index}: {source}")]
    Trace { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_trace(self, index: usize) -> Self {
        Error::Trace {
            index,
            source: Box::new(self),
        }
    }
}

pub(crate) fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}
