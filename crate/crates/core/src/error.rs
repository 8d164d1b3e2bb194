use thiserror::Error;

use crate::numerics::NumericsError;
use crate::preemptive::DinkelbachTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("unreachable delivery: success probability is zero")]
    UnreachableDelivery,
    #[error("no renewals: no packet was delivered")]
    NoRenewals,
    #[error("no convergence after {iterations} iterations (last value {last})")]
    NotConverged {
        iterations: usize,
        last: f64,
        trace: Option<Box<DinkelbachTrace>>,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn is_quadrature(&self) -> bool {
        matches!(self, Error::Numerics(NumericsError::Quadrature { .. }))
    }
}
