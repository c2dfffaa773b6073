use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A value outside its allowed domain. `field` names the offending input.
    #[error("invalid parameter `{field}`: {reason}")]
    Param { field: &'static str, reason: String },

    #[error("characteristic parameter u = U*N/J is undefined for J = 0")]
    ZeroTunneling,

    #[error("Renyi order alpha = 1 (von Neumann limit) is not supported")]
    UnsupportedOrder,

    #[error("eigensolver failed to converge (worst residual {worst_residual:e})")]
    NoConvergence { worst_residual: f64 },

    #[error("maximum of the scanned curve lies at the range endpoint u = {at}; widen the range")]
    Bracket { at: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("scan point {axis} = {value} failed: {source}")]
    ScanPoint {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("integrator norm drift {drift:e} exceeds tolerance; reduce the step size")]
    StepSize { drift: f64 },

    #[error("quadrature tolerance {tol:e} not reached within {intervals} subintervals (estimate {estimate:e})")]
    Quadrature {
        tol: f64,
        intervals: usize,
        estimate: f64,
    },
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input (as opposed to numerical failure).
    pub fn is_domain(&self) -> bool {
        match self {
            Error::Param { .. } | Error::ZeroTunneling | Error::UnsupportedOrder => true,
            Error::ScanPoint { source, .. } => source.is_domain(),
            _ => false,
        }
    }
}
