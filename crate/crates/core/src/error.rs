use thiserror::Error;

/// Which solver block raised an infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Extraction,
    Capacity,
    Communication,
    Initialization,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Block::Extraction => "extraction",
            Block::Capacity => "capacity",
            Block::Communication => "communication",
            Block::Initialization => "initialization",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero while evaluating {quantity}")]
    DivideByZero { quantity: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("deadline infeasible in {block} block for users {users:?}")]
    InfeasibleDeadline { block: Block, users: Vec<usize> },

    #[error("start point is not strictly feasible (max constraint value {max_violation:e})")]
    NotStrictlyFeasible { max_violation: f64 },

    #[error("degenerate SCA expansion point: {0}")]
    DegenerateIterate(String),

    #[error("no feasible result across {restarts} restarts")]
    AllRestartsInfeasible { restarts: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("output error: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
