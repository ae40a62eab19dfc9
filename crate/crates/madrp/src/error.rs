use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a structural precondition (shape, positivity, ordering).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A CSV table is malformed or a cell failed to parse.
    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Some nonzero nonnegative allocation has zero dispersion, so the risk
    /// parity portfolio is not unique and parity solvers refuse to run.
    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    /// A solver failed to produce a solution satisfying its contract.
    #[error("solver: {0}")]
    Solver(String),

    /// The sign-pattern search proved the simplified system has no solution
    /// with scenario signs in {-1, 0, +1}, or exhausted its node budget.
    #[error("sign system: {0}")]
    SignSystem(String),

    /// Invalid run configuration.
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
