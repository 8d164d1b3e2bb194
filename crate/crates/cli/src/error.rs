use paoi_core::{DinkelbachTrace, Error};

pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_QUADRATURE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_SIMULATION: i32 = 5;

/// Where a library error surfaced, which decides the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Analytic,
    Simulation,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
    pub trace: Option<DinkelbachTrace>,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            trace: None,
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(EXIT_SCHEMA, message)
    }

    pub fn from_core(stage: Stage, err: Error) -> Self {
        let code = match (&err, stage) {
            (Error::InvalidParameter(_) | Error::Unsupported(_), _) => EXIT_SCHEMA,
            (Error::NotConverged { .. }, _) => EXIT_NOT_CONVERGED,
            (_, Stage::Simulation) => EXIT_SIMULATION,
            (_, Stage::Analytic) => EXIT_QUADRATURE,
        };
        let trace = match &err {
            Error::NotConverged { trace, .. } => trace.as_deref().cloned(),
            _ => None,
        };
        Self {
            code,
            message: err.to_string(),
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use paoi_core::numerics::NumericsError;

    #[test]
    fn exit_codes() {
        let q = Error::Numerics(NumericsError::Quadrature {
            estimate: 1.0,
            error_bound: 1.0,
        });
        let nc = Error::NotConverged {
            iterations: 100,
            last: 2.0,
            trace: Some(Box::default()),
        };
        let cases = [
            (Stage::Analytic, Error::InvalidParameter("x".into()), EXIT_SCHEMA),
            (Stage::Analytic, Error::Unsupported("x".into()), EXIT_SCHEMA),
            (Stage::Analytic, q.clone(), EXIT_QUADRATURE),
            (Stage::Analytic, Error::UnreachableDelivery, EXIT_QUADRATURE),
            (Stage::Analytic, nc.clone(), EXIT_NOT_CONVERGED),
            (Stage::Simulation, Error::NoRenewals, EXIT_SIMULATION),
            (Stage::Simulation, Error::InvalidParameter("x".into()), EXIT_SCHEMA),
        ];
        for (stage, err, code) in cases {
            assert_eq!(CliError::from_core(stage, err.clone()).code, code, "{err:?}");
        }
        assert!(CliError::from_core(Stage::Analytic, nc).trace.is_some());
    }
}
