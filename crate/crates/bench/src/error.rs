use std::error::Error as StdError;
use std::fmt;

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Pattern,
    Encode,
    Store,
    Simulate,
    Train,
    Evaluate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Pattern => "pattern",
            Stage::Encode => "encode",
            Stage::Store => "store",
            Stage::Simulate => "simulate",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug)]
pub struct BenchError {
    pub stage: Stage,
    source: Box<dyn StdError + Send + Sync>,
}

impl BenchError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn StdError + Send + Sync>>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::new(Stage::Config, msg.into())
    }
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl StdError for BenchError {
    fn source(&self) -> Option<&(dyn StdError + 'static)> {
        Some(self.source.as_ref())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

/// Tags any error with the stage it happened in.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E> StageExt<T> for std::result::Result<T, E>
where
    E: Into<Box<dyn StdError + Send + Sync>>,
{
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| BenchError::new(stage, e))
    }
}
