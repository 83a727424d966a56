use thiserror::Error;

use crate::numerics::{MathError, Wad};
use crate::{AuctionId, ProposalId, VaultId};

/// Failure of a single engine operation.
///
/// Operation errors never leave partial state behind: every operation checks
/// its preconditions before the first mutation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("protocol is shut down")]
    Shutdown,
    #[error("protocol is not shut down")]
    NotShutdown,
    #[error("protocol already shut down")]
    AlreadyShutdown,
    #[error("price feed is frozen")]
    Frozen,
    #[error("price must be positive")]
    InvalidPrice,
    #[error("no price for {0}")]
    MissingPrice(String),
    #[error("unknown collateral type {0}")]
    UnknownCollateral(String),
    #[error("collateral type {0} already registered")]
    DuplicateCollateral(String),
    #[error("unknown vault {0}")]
    UnknownVault(VaultId),
    #[error("vault {0} is not open")]
    VaultNotOpen(VaultId),
    #[error("{caller} does not own vault {vault}")]
    NotOwner { caller: String, vault: VaultId },
    #[error("account name {0:?} is reserved")]
    ReservedAccount(String),
    #[error("insufficient {asset} for {account}: have {have}, need {need}")]
    InsufficientBalance {
        asset: String,
        account: String,
        have: Wad,
        need: Wad,
    },
    #[error("operation would leave the vault below its liquidation ratio")]
    Undercollateralized,
    #[error("debt ceiling exceeded for {0}")]
    CeilingExceeded(String),
    #[error("repayment {amount} exceeds debt {debt}")]
    Overpayment { amount: Wad, debt: Wad },
    #[error("vault {0} still holds collateral or debt")]
    NonEmptyVault(VaultId),
    #[error("vault {0} has no collateral")]
    NoCollateral(VaultId),
    #[error("vault {0} is safe")]
    VaultSafe(VaultId),
    #[error("vault {0} is already in liquidation")]
    AlreadyInLiquidation(VaultId),
    #[error("unknown auction {0}")]
    UnknownAuction(AuctionId),
    #[error("auction {0} is not active")]
    AuctionNotActive(AuctionId),
    #[error("keeper pool holds {have} Dai, needs {need}")]
    KeeperUnderfunded { have: Wad, need: Wad },
    #[error("time went backwards: {now} < {last}")]
    TimeRegression { now: u64, last: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("voting on proposal {0} has closed")]
    VotingClosed(ProposalId),
    #[error("voting on proposal {0} is still open")]
    VotingOpen(ProposalId),
    #[error("proposal {0} was already tallied")]
    AlreadyTallied(ProposalId),
    #[error(transparent)]
    Math(#[from] MathError),
}

impl EngineError {
    /// Stable code written into run reports.
    pub fn code(&self) -> &'static str {
        use EngineError::*;
        match self {
            Shutdown => "SHUTDOWN",
            NotShutdown => "NOT_SHUTDOWN",
            AlreadyShutdown => "ALREADY_SHUTDOWN",
            Frozen => "FROZEN",
            InvalidPrice => "INVALID_PRICE",
            MissingPrice(_) => "MISSING_PRICE",
            UnknownCollateral(_) => "UNKNOWN_COLLATERAL",
            DuplicateCollateral(_) => "DUPLICATE_COLLATERAL",
            UnknownVault(_) => "UNKNOWN_VAULT",
            VaultNotOpen(_) => "VAULT_NOT_OPEN",
            NotOwner { .. } => "NOT_OWNER",
            ReservedAccount(_) => "RESERVED_ACCOUNT",
            InsufficientBalance { .. } => "INSUFFICIENT_BALANCE",
            Undercollateralized => "UNDERCOLLATERALIZED",
            CeilingExceeded(_) => "CEILING",
            Overpayment { .. } => "OVERPAYMENT",
            NonEmptyVault(_) => "NON_EMPTY_VAULT",
            NoCollateral(_) => "NO_COLLATERAL",
            VaultSafe(_) => "VAULT_SAFE",
            AlreadyInLiquidation(_) => "ALREADY_IN_LIQUIDATION",
            UnknownAuction(_) => "UNKNOWN_AUCTION",
            AuctionNotActive(_) => "AUCTION_NOT_ACTIVE",
            KeeperUnderfunded { .. } => "KEEPER_UNDERFUNDED",
            TimeRegression { .. } => "TIME_REGRESSION",
            InvalidParameter(_) => "INVALID_PARAMETER",
            UnknownProposal(_) => "UNKNOWN_PROPOSAL",
            VotingClosed(_) => "VOTING_CLOSED",
            VotingOpen(_) => "VOTING_OPEN",
            AlreadyTallied(_) => "ALREADY_TALLIED",
            Math(MathError::Overflow) => "OVERFLOW",
            Math(MathError::Underflow) => "UNDERFLOW",
            Math(MathError::DivisionByZero) => "DIVISION_BY_ZERO",
        }
    }
}

pub type EngineResult<T> = Result<T, EngineError>;
