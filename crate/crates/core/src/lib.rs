//! Deterministic simulation of a collateralized-debt-position stablecoin
//! protocol: vaults with stability fees, a savings rate, collateral and debt
//! auctions, MKR-weighted governance, emergency shutdown and TVL analytics.
//!
//! All amounts are integer fixed point ([`Wad`], [`Ray`]); a scenario run is
//! a pure function of `(scenario, config, seed)` and ends in a SHA-256 state
//! hash over a canonical JSON snapshot.

pub mod audit;
pub mod config;
pub mod engine;
pub mod error;
pub mod governance;
pub mod liquidation;
pub mod market;
pub mod metrics;
pub mod numerics;
pub mod savings;
pub mod scenario;
pub mod shutdown;
pub mod vault;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{CollateralSpec, Config, ConfigError};
pub use engine::Engine;
pub use error::{EngineError, EngineResult};
pub use numerics::{Ray, Wad};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(VaultId);
id_type!(AuctionId);
id_type!(ProposalId);
