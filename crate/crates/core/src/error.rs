use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (anti-Hermitian residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("{0}: iteration did not converge")]
    NoConvergence(&'static str),

    #[error("left/right eigenvector pairing is ill-conditioned (condition {condition:.3e})")]
    DegeneratePairing { condition: f64 },

    #[error("negative eigenvalue {0:.3e} in a positive-semidefinite argument")]
    NegativeEigenvalue(f64),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("state vector has zero norm")]
    ZeroVector,

    #[error("energy variance {0:.3e} is too small to define beta")]
    DegenerateVariance(f64),

    #[error("relaxation time evaluates to zero")]
    ZeroTau,

    #[error("entropy production rate is zero")]
    ZeroEntropyRate,

    #[error("energy {energy} lies outside the open spectral range ({min}, {max})")]
    EnergyOutOfRange { energy: f64, min: f64, max: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("Feshbach denominator epsilon is singular ({0:.3e})")]
    SingularEpsilon(f64),

    #[error("w1*w2 = {0} is negative; sqrt(w1 w2) is not real")]
    NegativeProduct(f64),

    #[error("constraint search infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    /// Errors caused by bad user input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NotHermitian { .. }
                | Error::InvalidState(_)
                | Error::ZeroVector
                | Error::ZeroTau
                | Error::EnergyOutOfRange { .. }
                | Error::SingularEpsilon(_)
                | Error::NegativeProduct(_)
                | Error::Invalid(_)
                | Error::Data(_)
        )
    }
}
