use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("polar chart breakdown at theta={theta:.6}, r={r:.6e} (denominator {denominator:.3e})")]
    ChartBreakdown { theta: f64, r: f64, denominator: f64 },

    #[error("step size underflow at t={t:.6e} (h={step:.3e}); problem is too stiff for the requested tolerance")]
    StepUnderflow { t: f64, step: f64 },

    #[error("step limit of {steps} reached at t={t:.6e}")]
    StepLimit { steps: usize, t: f64 },

    #[error("non-finite state at t={t:.6e}")]
    NonFinite { t: f64 },

    #[error("no return to the section after {steps} steps (t={t:.6e}, x={x:.6e}, y={y:.6e})")]
    NoReturn { steps: usize, t: f64, x: f64, y: f64 },

    #[error("singular jet division: leading divisor coefficient {0:.3e}")]
    SingularDivision(f64),

    #[error("quadrature cap reached with {nodes} nodes (error estimate {estimate:.3e}, target {target:.3e})")]
    QuadratureCap { nodes: usize, estimate: f64, target: f64 },

    #[error("no alternation found in box: {0}")]
    NoAlternation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
