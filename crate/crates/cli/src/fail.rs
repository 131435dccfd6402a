use std::fmt;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config = 2,
    Input = 3,
    Model = 4,
    NotConverged = 5,
    Output = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub fn fail(kind: Kind, message: impl Into<String>) -> CliError {
    CliError {
        kind,
        message: message.into(),
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            Kind::Config => "config error",
            Kind::Input => "input error",
            Kind::Model => "model error",
            Kind::NotConverged => "not converged",
            Kind::Output => "output error",
        };
        write!(f, "{what}: {}", self.message)
    }
}

impl std::error::Error for CliError {}
