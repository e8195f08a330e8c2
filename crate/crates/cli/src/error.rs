use std::fmt;

use chowfilter::bench::BenchError;
use chowfilter::cvxsub::CvxError;
use chowfilter::icf::IcfError;
use chowfilter::l1reg::L1Error;
use chowfilter::oracle::OracleError;
use chowfilter::polycore::PolyError;
use chowfilter::pq::PqError;
use chowfilter::tds::TdsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, scenario or data. Exit code 2.
    Validation,
    /// A solver failed to converge or no valid threshold existed. Exit code 3.
    Solver,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Validation, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Solver, message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Solver => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ErrorKind::Validation => "invalid input",
            ErrorKind::Solver => "solver failure",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<PolyError> for CliError {
    fn from(e: PolyError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<CvxError> for CliError {
    fn from(e: CvxError) -> Self {
        match e {
            CvxError::NonConvergence(_) | CvxError::Decomposition => CliError::solver(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<L1Error> for CliError {
    fn from(e: L1Error) -> Self {
        match e {
            L1Error::Cvx(c) => c.into(),
            L1Error::NonConvergence(_) => CliError::solver(e.to_string()),
            L1Error::Poly(p) => p.into(),
        }
    }
}

impl From<IcfError> for CliError {
    fn from(e: IcfError) -> Self {
        match e {
            IcfError::Cvx(c) => c.into(),
            IcfError::NoValidThreshold { .. } => CliError::solver(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<PqError> for CliError {
    fn from(e: PqError) -> Self {
        match e {
            PqError::Regression(l) => l.into(),
            PqError::Filter(i) => i.into(),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<TdsError> for CliError {
    fn from(e: TdsError) -> Self {
        match e {
            TdsError::Pq(p) => p.into(),
            TdsError::Filter(i) => i.into(),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Filter(i) => i.into(),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::validation(e.to_string())
    }
}
