use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlockError>;

#[derive(Debug, Error)]
pub enum FlockError {
    /// A NaN or infinite value reached the simulation state.
    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    /// The query point lies inside an obstacle.
    #[error("point {point:?} penetrates obstacle (signed distance {signed_distance})")]
    Penetration { point: [f64; 3], signed_distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("joint configuration space of {size} states exceeds the limit of {limit}")]
    InstanceTooLarge { size: u128, limit: u128 },

    #[error("no data: {0}")]
    EmptyRecord(&'static str),

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("unknown robot index {0}")]
    UnknownRobot(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FlockError {
    pub fn parse(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        FlockError::Parse {
            source_name: source_name.into(),
            message: message.into(),
        }
    }
}
