use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numerical failure in {context}{}", condition_suffix(.condition))]
    Numerical {
        context: String,
        /// Ratio of extreme eigenvalue magnitudes of the offending matrix, when one was available.
        condition: Option<f64>,
    },
}

fn condition_suffix(c: &Option<f64>) -> String {
    match c {
        Some(c) => format!(" (condition estimate {c:.3e})"),
        None => String::new(),
    }
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn numerical(context: impl Into<String>, condition: Option<f64>) -> Self {
        Error::Numerical {
            context: context.into(),
            condition,
        }
    }

    /// Prefix the error with where it happened, e.g. the sweep iteration and step.
    pub fn within(self, prefix: impl std::fmt::Display) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{prefix}: {m}")),
            Error::Numerical { context, condition } => Error::Numerical {
                context: format!("{prefix}: {context}"),
                condition,
            },
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
