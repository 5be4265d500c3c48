use std::fmt;
use std::process::ExitCode;

use decompcheck::backends::{BackendError, StoreError};
use decompcheck::ingest::IngestError;
use decompcheck::pipeline::evaluate::EvalError;
use decompcheck::pipeline::PipelineError;
use decompcheck::report::ReportError;
use decompcheck::stats::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 1,
    Data = 2,
    Backend = 3,
    PartialCoverage = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Self {
            exit,
            error: error.into(),
        }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self::new(Exit::Usage, error)
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self::new(Exit::Data, error)
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // causes already spelled out by their parent's message are skipped
        let mut shown = self.error.to_string();
        f.write_str(&shown)?;
        for cause in self.error.chain().skip(1) {
            let text = cause.to_string();
            if !shown.contains(&text) {
                write!(f, ": {text}")?;
                shown = text;
            }
        }
        Ok(())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        Self::data(e)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        Self::data(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self::data(e)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        Self::data(e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let exit = match e {
            EvalError::PartialCoverage { .. } => Exit::PartialCoverage,
            _ => Exit::Data,
        };
        Self::new(exit, e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Eval(inner) => inner.into(),
            other => Self::data(other),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        let exit = match e {
            BackendError::InvalidParams(_) | BackendError::MissingApiKey(_) => Exit::Usage,
            BackendError::Store(_) | BackendError::Alignment(_) => Exit::Data,
            _ => Exit::Backend,
        };
        Self::new(exit, e)
    }
}

/// Attaches context and an exit class to foreign errors.
pub trait OrExit<T> {
    fn or_exit(self, exit: Exit, context: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, exit: Exit, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::new(exit, e.into().context(context.to_string())))
    }
}
