//! The single-writer protocol state and the operations that do not belong to
//! one subsystem (clock, faucet, transfers, prices, snapshots).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CollateralSpec, Config, ConfigError};
use crate::error::{EngineError, EngineResult};
use crate::governance::Proposal;
use crate::liquidation::Auction;
use crate::market::{CollateralLedger, CollateralType, PriceFeed, Token, TokenLedger};
use crate::numerics::{annual_to_per_second, Wad};
use crate::savings::SavingsPot;
use crate::shutdown::ShutdownState;
use crate::vault::Vault;
use crate::{AuctionId, ProposalId, VaultId};

/// Protocol-owned Dai from fees and penalties.
pub const SURPLUS_ACCOUNT: &str = "@surplus";
/// Dai held on behalf of savings depositors.
pub const POT_ACCOUNT: &str = "@pot";
/// Scenario-funded counterparty for auctions and buy-and-burn.
pub const KEEPER_ACCOUNT: &str = "@keeper";

pub const MKR: &str = "MKR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub auction_discount: Wad,
    pub voting_reward: Wad,
    pub buy_and_burn_floor: Wad,
    pub pass_threshold: Wad,
}

/// Cumulative flow counters used by the ledger audits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTotals {
    pub dai_minted: Wad,
    pub dai_burned: Wad,
    pub mkr_genesis: Wad,
    pub mkr_rewards: Wad,
    pub mkr_debt_auction: Wad,
    pub mkr_burned: Wad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engine {
    pub(crate) params: ProtocolParams,
    pub(crate) clock: u64,
    pub(crate) collaterals: BTreeMap<String, CollateralType>,
    pub(crate) feed: PriceFeed,
    pub(crate) dai: TokenLedger,
    pub(crate) mkr: TokenLedger,
    pub(crate) collateral: CollateralLedger,
    pub(crate) vaults: BTreeMap<VaultId, Vault>,
    pub(crate) next_vault_id: u64,
    pub(crate) auctions: BTreeMap<AuctionId, Auction>,
    pub(crate) next_auction_id: u64,
    pub(crate) pot: SavingsPot,
    pub(crate) proposals: BTreeMap<ProposalId, Proposal>,
    pub(crate) next_proposal_id: u64,
    /// Dai in circulation that no vault backs: written-off principal and
    /// savings interest minted while the surplus buffer was empty.
    pub(crate) system_debt: Wad,
    pub(crate) shutdown: Option<ShutdownState>,
    pub(crate) totals: FlowTotals,
}

impl Engine {
    pub fn new(config: &Config) -> Result<Self, ConfigError> {
        config.validate()?;
        let invalid = |e: EngineError| ConfigError::Invalid(e.to_string());
        let mut engine = Engine {
            params: ProtocolParams {
                auction_discount: config.auction_discount,
                voting_reward: config.voting_reward,
                buy_and_burn_floor: config.buy_and_burn_floor,
                pass_threshold: config.pass_threshold,
            },
            clock: 0,
            collaterals: BTreeMap::new(),
            feed: PriceFeed::default(),
            dai: TokenLedger::new(Token::Dai),
            mkr: TokenLedger::new(Token::Mkr),
            collateral: CollateralLedger::default(),
            vaults: BTreeMap::new(),
            next_vault_id: 1,
            auctions: BTreeMap::new(),
            next_auction_id: 1,
            pot: SavingsPot::new(
                annual_to_per_second(config.dsr_annual).map_err(|e| invalid(e.into()))?,
                0,
            ),
            proposals: BTreeMap::new(),
            next_proposal_id: 1,
            system_debt: Wad::ZERO,
            shutdown: None,
            totals: FlowTotals::default(),
        };
        for spec in &config.collateral_types {
            engine.register_collateral(spec).map_err(invalid)?;
        }
        for (asset, price) in &config.prices {
            engine.feed.set_price(asset, *price).map_err(invalid)?;
        }
        for (account, amount) in &config.mkr_genesis {
            if account.is_empty() || (account.starts_with('@') && account != KEEPER_ACCOUNT) {
                return Err(ConfigError::Invalid(format!(
                    "MKR genesis account {account:?} is reserved"
                )));
            }
            engine.mkr.mint(account, *amount).map_err(invalid)?;
            engine.totals.mkr_genesis = engine
                .totals
                .mkr_genesis
                .checked_add(*amount)
                .map_err(|e| invalid(e.into()))?;
        }
        Ok(engine)
    }

    pub(crate) fn register_collateral(&mut self, spec: &CollateralSpec) -> EngineResult<()> {
        spec.validate().map_err(EngineError::InvalidParameter)?;
        if self.collaterals.contains_key(&spec.id) {
            return Err(EngineError::DuplicateCollateral(spec.id.clone()));
        }
        let ct = CollateralType::from_spec(spec, self.clock)?;
        self.collaterals.insert(spec.id.clone(), ct);
        Ok(())
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_shutdown(&self) -> bool {
        self.shutdown.is_some()
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn totals(&self) -> &FlowTotals {
        &self.totals
    }

    pub fn system_debt(&self) -> Wad {
        self.system_debt
    }

    pub fn dai(&self) -> &TokenLedger {
        &self.dai
    }

    pub fn mkr(&self) -> &TokenLedger {
        &self.mkr
    }

    pub fn collateral_ledger(&self) -> &CollateralLedger {
        &self.collateral
    }

    pub fn feed(&self) -> &PriceFeed {
        &self.feed
    }

    pub fn collateral_type(&self, id: &str) -> EngineResult<&CollateralType> {
        self.collaterals
            .get(id)
            .ok_or_else(|| EngineError::UnknownCollateral(id.to_string()))
    }

    pub fn collateral_types(&self) -> impl Iterator<Item = &CollateralType> {
        self.collaterals.values()
    }

    pub fn surplus(&self) -> Wad {
        self.dai.balance_of(SURPLUS_ACCOUNT)
    }

    pub fn keeper_dai(&self) -> Wad {
        self.dai.balance_of(KEEPER_ACCOUNT)
    }

    pub fn shutdown_state(&self) -> Option<&ShutdownState> {
        self.shutdown.as_ref()
    }

    pub(crate) fn ensure_live(&self) -> EngineResult<()> {
        if self.shutdown.is_some() {
            return Err(EngineError::Shutdown);
        }
        Ok(())
    }

    /// Advance the clock, accruing stability fees and savings interest.
    /// Accrual stops once the protocol is shut down.
    pub fn advance_to(&mut self, now: u64) -> EngineResult<()> {
        if now < self.clock {
            return Err(EngineError::TimeRegression { now, last: self.clock });
        }
        if self.shutdown.is_none() {
            for ct in self.collaterals.values_mut() {
                ct.accrue_fees(now)?;
            }
            self.dsr_accrue(now)?;
        }
        self.clock = now;
        Ok(())
    }

    /// Accrue one collateral type's fee accumulator to `now`.
    pub fn accrue_fees(&mut self, collateral: &str, now: u64) -> EngineResult<()> {
        self.ensure_live()?;
        self.collaterals
            .get_mut(collateral)
            .ok_or_else(|| EngineError::UnknownCollateral(collateral.to_string()))?
            .accrue_fees(now)?;
        Ok(())
    }

    pub fn set_price(&mut self, asset: &str, price: Wad) -> EngineResult<()> {
        self.feed.set_price(asset, price)
    }

    pub fn price(&self, asset: &str) -> EngineResult<Wad> {
        self.feed.price(asset)
    }

    /// Credit free collateral to an account from outside the protocol.
    pub fn faucet(&mut self, account: &str, collateral: &str, amount: Wad) -> EngineResult<()> {
        check_user_account(account)?;
        self.collateral_type(collateral)?;
        self.collateral.faucet(collateral, account, amount)
    }

    pub fn transfer(&mut self, token: Token, from: &str, to: &str, amount: Wad) -> EngineResult<()> {
        check_user_account(from)?;
        check_user_account(to)?;
        match token {
            Token::Dai => self.dai.transfer(from, to, amount),
            Token::Mkr => self.mkr.transfer(from, to, amount),
        }
    }

    /// Move Dai from a user wallet into the keeper pool.
    pub fn fund_keeper(&mut self, from: &str, amount: Wad) -> EngineResult<()> {
        check_user_account(from)?;
        self.dai.transfer(from, KEEPER_ACCOUNT, amount)
    }

    pub(crate) fn mint_dai(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        let minted = self.totals.dai_minted.checked_add(amount)?;
        self.dai.mint(account, amount)?;
        self.totals.dai_minted = minted;
        Ok(())
    }

    pub(crate) fn burn_dai(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        let burned = self.totals.dai_burned.checked_add(amount)?;
        self.dai.burn(account, amount)?;
        self.totals.dai_burned = burned;
        Ok(())
    }

    /// Canonical JSON: sorted keys, decimal strings for every Wad and Ray.
    pub fn snapshot(&self) -> String {
        let value = serde_json::to_value(self).expect("engine state serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    pub fn from_snapshot(snapshot: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(snapshot)
    }

    /// SHA-256 of the canonical snapshot, lowercase hex.
    pub fn state_hash(&self) -> String {
        hash_snapshot(&self.snapshot())
    }
}

pub fn hash_snapshot(snapshot: &str) -> String {
    hex::encode(Sha256::digest(snapshot.as_bytes()))
}

/// User-facing account names may not collide with protocol accounts.
pub(crate) fn check_user_account(account: &str) -> EngineResult<()> {
    if account.is_empty() || account.starts_with('@') {
        return Err(EngineError::ReservedAccount(account.to_string()));
    }
    Ok(())
}
