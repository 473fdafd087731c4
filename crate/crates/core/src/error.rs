//! Crate-wide error type.

/// Errors produced by integrators, coordinate changes and the experiment
/// drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The step-size controller collapsed the step below the round-off
    /// floor: the problem is effectively stiff at the requested accuracy.
    #[error("stiffness/accuracy failure: step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    /// The step budget ran out before reaching the end of the span.
    #[error("budget exhausted: more than {max_steps} steps at t = {t}")]
    BudgetExhausted { t: f64, max_steps: usize },

    /// The state became non-finite.
    #[error("divergence: non-finite state at t = {t}")]
    Divergence { t: f64 },

    /// A configuration invariant was violated.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The rotating-frame slow time is tau_hat = epsilon * tau; with
    /// epsilon = 0 the enlarged formulation is meaningless. Integrate the
    /// physical formulation instead.
    #[error("degenerate slow time: epsilon = 0 has no rotating-frame formulation")]
    DegenerateSlowTime,

    /// The second-order averaged field is only valid when the initial time
    /// is an integer number of periods.
    #[error(
        "second-order averaged field invalid for this start time: \
         tau0 = {tau0} is not an integer multiple of the period {period}"
    )]
    InvalidAveragingStart { tau0: f64, period: f64 },

    /// Polar coordinates degenerate at r = 0.
    #[error("polar singularity: amplitude r = 0")]
    PolarSingularity,

    /// The phase angle of the zero vector is undefined.
    #[error("phase undefined for the zero state")]
    PhaseUndefined,

    /// The closed-form threshold needs positive forcing and cubic
    /// coefficients.
    #[error("threshold undefined for a linear or unforced oscillator")]
    ThresholdUndefined,

    /// A scalar root solve failed to converge.
    #[error("root solve failure: {0}")]
    RootSolveFailure(String),

    /// Actions must be positive.
    #[error("invalid action: I0 must be positive, got {0}")]
    InvalidAction(f64),

    /// The bisection bracket does not enclose the threshold.
    #[error(
        "bracket failure: threshold outside [0.95, 1.10]*eps_app for \
         alpha = {alpha} (verdict {lo_verdict} at the lower end, {hi_verdict} at the upper end)"
    )]
    BracketFailure {
        alpha: f64,
        lo_verdict: bool,
        hi_verdict: bool,
    },

    /// Not enough samples for a statistical fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
