use elfs_core::ElfsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad spec: {0}")]
    BadSpec(String),
    #[error("{path}: {source}")]
    FileIo { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] ElfsError),
}

impl CliError {
    /// 1 for a violated identity, 2 for bad input, 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::BadSpec(_) => 2,
            CliError::FileIo { .. } => 3,
            CliError::Core(e) => match e {
                ElfsError::IdentityViolation { .. } | ElfsError::OracleMismatch { .. } => 1,
                ElfsError::NonPositiveWeight { .. }
                | ElfsError::SelfLoop(_)
                | ElfsError::VertexOutOfRange { .. }
                | ElfsError::EmptySink
                | ElfsError::SourceInSink(_)
                | ElfsError::SinkIsWholeGraph
                | ElfsError::Disconnected { .. }
                | ElfsError::NotApplicable(_)
                | ElfsError::InvalidBound { .. }
                | ElfsError::EmptyKeepSet
                | ElfsError::NotACutVertex(_)
                | ElfsError::EndpointInSink(_)
                | ElfsError::NotATree
                | ElfsError::InvalidConfig(_)
                | ElfsError::Parse(_) => 2,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
