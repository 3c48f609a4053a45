use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("solver did not converge after {iterations} iterations (bracket [{lo}, {hi}], residual {residual})")]
    Solver {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("value iteration did not converge within {sweeps} sweeps (residual {residual})")]
    ValueIteration { sweeps: usize, residual: f64 },

    #[error("effect size undefined: pooled standard deviation is zero")]
    UndefinedEffect,

    #[error("invalid configuration for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Check `lo <= value <= hi`, reporting `name` on failure.
pub(crate) fn check_range<F: crate::Scalar>(
    name: &'static str,
    value: F,
    lo: F,
    hi: F,
    expected: &'static str,
) -> Result<F> {
    if value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value: value.to_f64_lossy(),
            expected,
        })
    }
}
