use thiserror::Error;

use crate::ids::{AccountId, MarketId};
use crate::market::Violation;
use crate::units::{Amount, Price, Qty};

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    // catalog
    #[error("market {0} already exists")]
    DuplicateMarketId(MarketId),
    #[error("invalid market spec: {}", display_violations(.0))]
    InvalidSpec(Vec<Violation>),
    #[error("unknown market {0}")]
    UnknownMarket(MarketId),
    #[error("market {market} has no label {label}")]
    UnknownLabel { market: MarketId, label: String },
    #[error("market {market} has no outcome {outcome}")]
    UnknownOutcome { market: MarketId, outcome: String },
    #[error("market {market} has no bundle {bundle}")]
    UnknownBundle { market: MarketId, bundle: String },
    #[error("market {0} has several bundles; one must be named")]
    BundleRequired(MarketId),
    #[error("bundle {bundle} of market {market} is not a complete set")]
    NotSplittable { market: MarketId, bundle: String },

    // ledger
    #[error("{account} holds {available} numeraire, needs {needed}")]
    InsufficientFunds { account: AccountId, needed: Amount, available: Amount },
    #[error("{account} holds {available} of {market}/{label}, needs {needed}")]
    InsufficientShares { account: AccountId, market: MarketId, label: String, needed: Qty, available: Qty },
    #[error("{account} holds {available} governance tokens, needs {needed}")]
    InsufficientGov { account: AccountId, needed: Amount, available: Amount },
    #[error("amount overflow")]
    Overflow,

    // gadgets
    #[error("incomplete set: missing {needed} of {label}")]
    IncompleteSet { label: String, needed: Qty },
    #[error("market {0} is not a negative-risk market")]
    NotNegRisk(MarketId),

    // order book and matching
    #[error("price {0} outside the tradable range or off tick")]
    PriceOutOfRange(Price),
    #[error("quantity {0} is zero or not a lot multiple")]
    InvalidQuantity(Qty),
    #[error("market {0} is resolved")]
    MarketResolved(MarketId),
    #[error("unknown order {0}")]
    UnknownOrder(u64),
    #[error("{0} does not own this order")]
    NotOwner(AccountId),
    #[error("intent prices differ: {long} vs {short}")]
    PriceMismatch { long: Price, short: Price },
    #[error("{account} cannot escrow margin {needed}")]
    InsufficientMargin { account: AccountId, needed: Amount },
    #[error("bid prices {0} + {1} do not cover one unit")]
    PricesDoNotCover(Price, Price),
    #[error("orders or intents are not on complementary sides of one bundle")]
    NotComplementary,

    // automated market makers
    #[error("pool reserves must be positive")]
    ZeroReserve,
    #[error("swap would drain the pool")]
    PoolDrained,
    #[error("unknown pool {0}")]
    UnknownPool(String),
    #[error("deposit is not proportional to pool reserves")]
    RatioMismatch,
    #[error("{account} holds {available} LP shares, needs {needed}")]
    InsufficientLiquidity { account: AccountId, needed: u64, available: u64 },
    #[error("priors sum to {0}, expected 1")]
    PriorsDoNotSum(String),
    #[error("market {0} is not winner-take-all")]
    NotWta(MarketId),
    #[error("bond {bond} below worst-case loss {required}")]
    BondTooSmall { bond: Amount, required: Amount },
    #[error("bookmaker bond exhausted")]
    BondExhausted,
    #[error("market {0} has no bookmaker")]
    UnknownBookmaker(MarketId),
    #[error("market {0} already has a bookmaker")]
    BookmakerExists(MarketId),
    #[error("invalid amount: {0}")]
    InvalidAmount(String),

    // resolution
    #[error("market {0} is already resolved")]
    AlreadyResolved(MarketId),
    #[error("operation not allowed in the current resolution stage")]
    WrongStage,
    #[error("bond {offered} below required {required}")]
    InsufficientBond { offered: Amount, required: Amount },
    #[error("dispute window closed")]
    WindowClosed,
    #[error("{0} is not an allowlisted arbiter")]
    NotArbiter(AccountId),
    #[error("{0} is not in the electorate")]
    NotEnrolled(AccountId),
    #[error("deadline passed")]
    DeadlinePassed,
    #[error("phase not open yet")]
    PhaseNotOpen,
    #[error("revealed ballot does not match its commitment")]
    DigestMismatch,
    #[error("reveal phase still open")]
    RevealOpen,
    #[error("unknown resolution policy {0}")]
    UnknownPolicy(String),
    #[error("policy {0} already defined")]
    DuplicatePolicy(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("no vote round is open for market {0}")]
    NoActiveRound(MarketId),
    #[error("stake of {0} is locked in an open vote")]
    StakeLocked(AccountId),
    #[error("market {0} is not resolved")]
    NotResolved(MarketId),

    // engine
    #[error("tick {requested} precedes current tick {current}")]
    TickRegression { current: u64, requested: u64 },
    #[error("faucet is only available at genesis (tick 0)")]
    FaucetAfterGenesis,
    #[error("account {0} is reserved for the engine")]
    ReservedAccount(AccountId),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("engine halted after an invariant violation: {0}")]
    Halted(String),
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl EngineError {
    /// Stable variant name, used in logs and `expect_error` scenario fields.
    pub fn kind(&self) -> String {
        let dbg = format!("{self:?}");
        dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_owned()
    }
}
