use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter family: {0}")]
    InvalidFamily(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("arcs do not fit on the cycle: total length {total} exceeds M = {m}")]
    ArcsDontFit { total: u128, m: u64 },

    #[error("invariance bound unachievable: {0}")]
    InvarianceUnachievable(String),

    #[error("degenerate arc for k = {k}: rho_k * M = {mass} < 2")]
    DegenerateArc { k: usize, mass: f64 },

    #[error("model invariant violated: {0}")]
    InvariantViolated(String),

    #[error("coordinate e_{index} outside the sampled window [{lo}, {hi}]")]
    WindowExceeded { index: i64, lo: i64, hi: i64 },

    #[error("state space too large for enumeration: 2^{window} * {m} = {size} > 2^22")]
    StateSpaceTooLarge { window: u32, m: u64, size: u128 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}
