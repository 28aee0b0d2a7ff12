use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A simulated state or cost stopped being finite.
    #[error("state became non-finite at step {step}")]
    Overflow { step: usize },

    #[error("Riccati fixed-point iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    /// The cost sequence has no Loewner extremum; the caller should compute
    /// constants from explicit cost bounds instead.
    #[error("cost sequence is not totally ordered: no Loewner {which} exists; supply explicit cost bounds")]
    IncomparableSequence { which: &'static str },

    #[error("degenerate bound constants: {0}")]
    DegenerateConstants(String),

    #[error("oracle refused: {size} stacked control variables exceeds the cap of {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("no controllable system found after {attempts} draws")]
    Generation { attempts: usize },

    #[error("all {trials} Monte-Carlo trials were aborted")]
    DegenerateResult { trials: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(what()))
    }
}
