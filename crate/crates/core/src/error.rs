use thiserror::Error;

/// Errors raised by the numeric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The computation would exceed a configured memory or integer budget.
    #[error("budget exceeded: {what} needs {needed}, limit is {limit}")]
    Budget {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    /// An iterative solver or truncated expansion failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A quantity is only defined under hypotheses that do not hold here.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// The requested combination of options is not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An exact bookkeeping identity failed.
    #[error("invariant failed: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default ceiling on the number of 8-byte cells a single dense table may use.
pub const DEFAULT_MEMORY_CELLS: u128 = 1 << 28;

/// Environment variable overriding [`DEFAULT_MEMORY_CELLS`] (value in bytes).
pub const MEMORY_BUDGET_ENV: &str = "THINBASIS_MEMORY_BUDGET";

/// Number of 8-byte cells the process is allowed to allocate for one table.
pub fn memory_cells() -> u128 {
    std::env::var(MEMORY_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u128>().ok())
        .map(|bytes| bytes / 8)
        .unwrap_or(DEFAULT_MEMORY_CELLS)
}

pub(crate) fn check_cells(what: &'static str, needed: u128) -> Result<()> {
    let limit = memory_cells();
    if needed > limit {
        Err(Error::Budget {
            what,
            needed,
            limit,
        })
    } else {
        Ok(())
    }
}
