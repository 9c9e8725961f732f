use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ontology violation: {0}")]
    Ontology(String),
    #[error("unknown entity: {0}")]
    Lookup(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("invalid scenario {id}: {reason}")]
    InvalidScenario { id: String, reason: String },
    #[error("action shape: {0}")]
    Shape(#[from] crate::dialog::ShapeError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("degenerate policy: {0}")]
    DegeneratePolicy(String),
    #[error("label: {0}")]
    Label(String),
    #[error("turn {0} is not an agent turn")]
    NotAgentTurn(usize),
    #[error("training: {0}")]
    Training(String),
    #[error("session: {0}")]
    Session(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Neural(#[from] memrex_neural::NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
