use std::fmt;

use thiserror::Error;

use crate::amount::Amount;
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed check found while validating a scenario document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Path of the offending field, e.g. `prices[1]` or `pools[0].asset_y`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid {kind} id {value:?}: {reason}")]
    InvalidId { kind: &'static str, value: String, reason: &'static str },

    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },

    #[error("invalid amount {0:?}: expected a decimal string with at most 18 fractional digits")]
    InvalidAmount(String),

    #[error("invalid rate {0:?}: expected a positive rational \"num/den\"")]
    InvalidRate(String),

    #[error("no price declared between {from} and {to}")]
    MissingRate { from: AssetId, to: AssetId },

    #[error("price pair {from}->{to} is not reciprocal with {to}->{from}")]
    NonReciprocal { from: AssetId, to: AssetId },

    #[error("diagonal price {0}->{0} is implicit and must not be declared")]
    DiagonalRate(AssetId),

    #[error("amount must be positive")]
    ZeroAmount,

    #[error("{player} holds {available} {asset} on {domain}, needs {needed}")]
    InsufficientBalance {
        domain: DomainId,
        player: PlayerId,
        asset: AssetId,
        needed: Amount,
        available: Amount,
    },

    #[error("pool {0} has insufficient liquidity for this trade")]
    InsufficientLiquidity(PoolId),

    #[error("pools {pool_a} and {pool_b} already quote the same price")]
    PricesEqual { pool_a: PoolId, pool_b: PoolId },

    #[error("unknown pool {0}")]
    UnknownPool(PoolId),

    #[error("pool {pool} is not a {expected} pool")]
    WrongPoolKind { pool: PoolId, expected: &'static str },

    #[error("pending transaction {0} was already executed in this sequence")]
    AlreadyConsumed(ActionId),

    #[error("bridge {bridge}: flat fee exceeds the converted amount")]
    FeeExceedsOutput { bridge: ActionId },

    #[error("action {action}: amount {amount} outside declared range [{lo}, {hi}]")]
    AmountOutOfRange { action: ActionId, amount: Amount, lo: Amount, hi: Amount },

    #[error("action {0} takes a continuous amount but none was given")]
    AmountRequired(ActionId),

    #[error("action {0} does not take an explicit amount")]
    AmountNotAccepted(ActionId),

    #[error("action {action} is not available to {player} in the active domains")]
    NotInActionSpace { action: ActionId, player: PlayerId },

    #[error("step {index}: {source}")]
    Sequence {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("search exceeded the candidate cap of {cap} sequences")]
    ExplosionGuard { cap: u64 },

    #[error("pool prices already equal: no arbitrage opportunity")]
    NoOpportunity,

    #[error("pools {0} and {1} do not trade the same asset pair")]
    MismatchedPools(PoolId, PoolId),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("scenario failed validation ({} issue(s)): {}", .0.len(), join_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("{0}")]
    Io(String),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn unknown<T: fmt::Display>(kind: &'static str, id: T) -> Error {
        Error::UnknownId { kind, id: id.to_string() }
    }

    pub(crate) fn at_step(self, index: usize) -> Error {
        Error::Sequence { index, source: Box::new(self) }
    }

    /// Strip sequence-position wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Sequence { source, .. } => source.root_cause(),
            e => e,
        }
    }
}
