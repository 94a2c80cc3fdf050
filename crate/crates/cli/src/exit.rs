//! Failure classes and their process exit codes.

use std::fmt::Display;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config files or arguments outside a precondition (exit 2).
    Usage(String),
    /// Unreadable or inconsistent input data (exit 3).
    Data(String),
    /// The numerics failed (exit 4).
    Numeric(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, what: impl Display) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{what}: {m}")),
            Failure::Numeric(m) => Failure::Numeric(format!("{what}: {m}")),
        }
    }
}

impl From<graphmm::Error> for Failure {
    fn from(e: graphmm::Error) -> Self {
        use graphmm::Error as E;
        let msg = e.to_string();
        match e {
            _ if e.is_numeric() => Failure::Numeric(msg),
            E::ResourceLimit { .. } => Failure::Usage(msg),
            _ => Failure::Data(msg),
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl Display) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| e.into().context(what))
    }
}
