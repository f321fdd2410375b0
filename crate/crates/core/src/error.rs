use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order must lie in (0, 1], got {0}")]
    InvalidOrder(String),

    #[error("value {0:?} is not an exact rational")]
    NonRational(String),

    #[error("coefficient must be finite, got {0}")]
    NonFiniteCoefficient(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("term sums have different (mu, S0, q) contexts")]
    ShapeMismatch,

    #[error("exponent carries a radical but no radical values were supplied")]
    MissingRadicals,

    #[error("limit did not converge: estimate {value}, disagreement {error}")]
    NonConvergence { value: f64, error: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative radicand in k: ({first}) * ({second}) < 0")]
    NegativeRadicand { first: f64, second: f64 },

    #[error("no branch of pi_f gives tau_f a negative slope")]
    NoPhysicalBranch,

    #[error("quantization gives a negative radical R = {0}")]
    NegativeRadical(f64),

    #[error("quantization denominator is not positive: {0}")]
    DegenerateQuantization(f64),

    #[error("E^2 = {0} < 0, energy is imaginary")]
    ImaginaryEnergy(f64),

    #[error("potential has a pole at x = {0}")]
    Pole(f64),

    #[error("exponent is not representable: {0}")]
    IrrationalExponent(String),

    #[error("state is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("eigenvalues moved by {shift} under grid doubling (tolerance {tolerance})")]
    Convergence { shift: f64, tolerance: f64 },
}
