use std::fmt;

use kdaug::augment::AugmentError;
use kdaug::corpus::CorpusError;
use kdaug::distill::DistillError;
use kdaug::model::ModelError;
use kdaug::theory::TheoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Io,
    Divergence,
}

/// An error tagged with the class that decides the exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Config,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Io,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            Kind::Config => 1,
            Kind::Io => 2,
            Kind::Divergence => 3,
        }
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "{:#}", self.error)
        } else {
            write!(f, "{}", self.error)
        }
    }
}

fn tagged(kind: Kind, e: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError {
        kind,
        error: e.into(),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        tagged(Kind::Io, e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let kind = match e {
            CorpusError::InvalidSpec(_) => Kind::Config,
            // Missing files and malformed data files alike.
            _ => Kind::Io,
        };
        tagged(kind, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::Io { .. } | ModelError::Format(_) | ModelError::Checksum => Kind::Io,
            _ => Kind::Config,
        };
        tagged(kind, e)
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        tagged(Kind::Config, e)
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        tagged(Kind::Config, e)
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        match e {
            DistillError::Divergence { .. } => tagged(Kind::Divergence, e),
            DistillError::InvalidConfig(_) => tagged(Kind::Config, e),
            DistillError::Model(m) => m.into(),
            DistillError::Augment(a) => a.into(),
            DistillError::Corpus(c) => c.into(),
        }
    }
}
