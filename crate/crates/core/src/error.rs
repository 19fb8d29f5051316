use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot construct law: {0}")]
    Construction(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("process is effectively extinct by generation {n}: survival probability underflowed")]
    EffectivelyExtinct { n: u64 },
    #[error("truncation mass {mass:.3e} exceeds the allowed level; retry with K >= {suggested_k}")]
    Truncation { mass: f64, suggested_k: usize },
    #[error("population cap of {cap} individuals exceeded in generation {generation}")]
    PopulationOverflow { generation: u64, cap: u64 },
    #[error("conditioning infeasible: acceptance rate {rate:.3e} is below 1e-4")]
    ConditioningInfeasible { rate: f64 },
    #[error("estimators have zero variance but differ ({a} vs {b})")]
    DegenerateVariance { a: f64, b: f64 },
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct exit code in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::EffectivelyExtinct { .. }
                | Error::Truncation { .. }
                | Error::PopulationOverflow { .. }
                | Error::ConditioningInfeasible { .. }
        )
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_unit(s: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(domain(format!("{what} must lie in [0, 1], got {s}")))
    }
}
