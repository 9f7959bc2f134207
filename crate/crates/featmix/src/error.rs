use std::path::PathBuf;

/// Errors raised by IO, configuration and the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] featmix_core::Error),
    #[error("cannot read {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: row {row}, column `{column}`: {message}")]
    Cell {
        source_name: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn stage<E: Into<Error>>(context: impl Into<String>) -> impl FnOnce(E) -> Error {
        let context = context.into();
        move |source| Error::Stage {
            context,
            source: Box::new(source.into()),
        }
    }

    /// 2 for anything the caller can fix by changing arguments, config or
    /// inputs; 1 for failures while a pipeline is running.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Stage { .. } | Error::Output { .. } => 1,
            Error::Core(featmix_core::Error::Fold { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
