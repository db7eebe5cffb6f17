//! Deterministic engine for decentralized prediction markets: outcome-share
//! issuance and redemption, trading venues, resolution and an event log that
//! replays bit for bit.

pub mod engine;
pub mod error;
pub mod gadgets;
pub mod ids;
pub mod ledger;
pub mod log;
pub mod market;
pub mod resolution;
pub mod scenario;
pub mod settlement;
pub mod snapshot;
pub mod units;
pub mod venue;

pub use error::{EngineError, Result};
pub use ids::{AccountId, MarketId};
