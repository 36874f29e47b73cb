use std::fmt;

use altogether_annosvc::ServiceError;
use altogether_core::corpus::CorpusError;
use altogether_core::io::JsonlError;
use altogether_core::metrics::MetricError;
use altogether_core::model::ModelError;
use altogether_core::textproc::TextError;
use altogether_core::train::TrainError;

/// Process exit status, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Validation = 1,
    Io = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Validation,
            message: message.into(),
        }
    }

    fn new(exit: Exit, e: impl fmt::Display) -> Self {
        Failure {
            exit,
            message: e.to_string(),
        }
    }

    /// Prefix the message with what was being attempted.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

/// Attach a context string to any error convertible into a [`Failure`].
pub trait Context<T> {
    fn ctx(self, what: impl fmt::Display) -> Result<T>;
}

impl<T, E: Into<Failure>> Context<T> for std::result::Result<T, E> {
    fn ctx(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|e| e.into().context(what))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(Exit::Io, e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Failure::new(Exit::Io, e)
        } else {
            Failure::new(Exit::Validation, e)
        }
    }
}

impl From<JsonlError> for Failure {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io(_) => Failure::new(Exit::Io, e),
            JsonlError::Parse { .. } => Failure::new(Exit::Validation, e),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => Failure::new(Exit::Io, e),
            _ => Failure::new(Exit::Validation, e),
        }
    }
}

impl From<TextError> for Failure {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io(_) => Failure::new(Exit::Io, e),
            _ => Failure::new(Exit::Validation, e),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(_) => Failure::new(Exit::Io, e),
            ModelError::Shape { .. } | ModelError::DegenerateBatch => {
                Failure::new(Exit::Internal, e)
            }
            _ => Failure::new(Exit::Validation, e),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::Corpus(c) => c.into(),
            TrainError::Io(_) => Failure::new(Exit::Io, e),
            TrainError::NonFinite { .. } => Failure::new(Exit::Internal, e),
            _ => Failure::new(Exit::Validation, e),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        Failure::new(Exit::Validation, e)
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) => Failure::new(Exit::Io, e),
            ServiceError::Replay { .. } => Failure::new(Exit::Internal, e),
            _ => Failure::new(Exit::Validation, e),
        }
    }
}
