//! Unsafe-vault detection, fixed-price collateral auctions and MKR debt
//! auctions.
//!
//! A collateral auction sells escrowed collateral to the keeper pool at
//! `oracle * (1 - discount)` in one round. Proceeds retire the vault's
//! principal; anything above principal (accrued fees and penalty) goes to the
//! surplus buffer, and principal left uncovered becomes system debt. System
//! debt is paid down from the surplus buffer first, then by minting MKR and
//! selling it to the keeper pool.

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, KEEPER_ACCOUNT, MKR, SURPLUS_ACCOUNT};
use crate::error::{EngineError, EngineResult};
use crate::numerics::{MathError, Wad};
use crate::vault::{is_safe, VaultState};
use crate::{AuctionId, VaultId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuctionState {
    Active,
    Settled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Auction {
    pub id: AuctionId,
    pub vault_id: VaultId,
    pub owner: String,
    pub collateral: String,
    /// Escrowed collateral units.
    pub lot: Wad,
    /// Dai to raise: debt plus penalty.
    pub tab: Wad,
    /// Vault debt at liquidation, fees included.
    pub debt: Wad,
    /// Dai minted against the vault and not yet retired.
    pub principal: Wad,
    pub state: AuctionState,
}

/// Outcome of selling a lot at a fixed price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SalePlan {
    pub sale_price: Wad,
    pub sold: Wad,
    pub proceeds: Wad,
    pub refund: Wad,
    pub bad_debt: Wad,
}

/// Sell just enough of `lot` at `price * (1 - discount)` to raise `tab`, or
/// all of it if that falls short.
pub fn plan_collateral_sale(lot: Wad, tab: Wad, price: Wad, discount: Wad) -> Result<SalePlan, MathError> {
    let sale_price = price.mul(Wad::ONE.checked_sub(discount)?)?;
    let lot_value = lot.mul(sale_price)?;
    let (sold, proceeds) = if lot_value >= tab {
        if tab.is_zero() {
            (Wad::ZERO, Wad::ZERO)
        } else {
            (tab.div_ceil(sale_price)?.min(lot), tab)
        }
    } else {
        (lot, lot_value)
    };
    Ok(SalePlan {
        sale_price,
        sold,
        proceeds,
        refund: lot.checked_sub(sold)?,
        bad_debt: tab.checked_sub(proceeds)?,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DebtAuctionPlan {
    pub bad_debt: Wad,
    pub from_surplus: Wad,
    /// Dai raised by selling newly minted MKR.
    pub raised: Wad,
    pub mkr_minted: Wad,
    pub uncovered: Wad,
}

/// Surplus absorbs the loss first; the residual is raised by minting MKR at
/// the oracle price, limited by what the buyer can pay.
pub fn plan_debt_auction(
    bad_debt: Wad,
    surplus: Wad,
    mkr_price: Wad,
    buyer_budget: Wad,
) -> Result<DebtAuctionPlan, EngineError> {
    let from_surplus = bad_debt.min(surplus);
    let residual = bad_debt.checked_sub(from_surplus)?;
    if residual.is_zero() {
        return Ok(DebtAuctionPlan {
            bad_debt,
            from_surplus,
            ..Default::default()
        });
    }
    if mkr_price.is_zero() {
        return Err(EngineError::InvalidPrice);
    }
    let raised = residual.min(buyer_budget);
    let mkr_minted = raised.div(mkr_price)?;
    Ok(DebtAuctionPlan {
        bad_debt,
        from_surplus,
        raised,
        mkr_minted,
        uncovered: residual.checked_sub(raised)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Settlement {
    pub auction_id: AuctionId,
    pub vault_id: VaultId,
    pub collateral: String,
    pub lot: Wad,
    pub tab: Wad,
    pub sold: Wad,
    pub proceeds: Wad,
    pub refund: Wad,
    pub bad_debt: Wad,
    /// Principal the proceeds did not cover; added to system debt.
    pub unbacked: Wad,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LiquidationRound {
    pub started: Vec<AuctionId>,
    pub settlements: Vec<Settlement>,
    pub unsettled: Vec<(AuctionId, String)>,
    pub debt_auction: Option<DebtAuctionPlan>,
}

impl Engine {
    pub fn auction(&self, id: AuctionId) -> EngineResult<&Auction> {
        self.auctions.get(&id).ok_or(EngineError::UnknownAuction(id))
    }

    pub fn auctions(&self) -> impl Iterator<Item = &Auction> {
        self.auctions.values()
    }

    pub fn is_unsafe(&self, id: VaultId) -> EngineResult<bool> {
        let vault = self.vault(id)?;
        if vault.state != VaultState::Open || vault.normalized_debt.is_zero() {
            return Ok(false);
        }
        let ratio = self.collateral_type(&vault.collateral)?.liquidation_ratio;
        let debt = self.current_debt(id)?;
        Ok(!debt.is_zero() && !is_safe(self.locked_value(id)?, debt, ratio))
    }

    /// OPEN vaults with debt whose ratio is strictly below the liquidation
    /// ratio, ascending by id.
    pub fn scan_unsafe(&self) -> EngineResult<Vec<VaultId>> {
        let mut unsafe_ids = Vec::new();
        for id in self.vaults.keys() {
            if self.is_unsafe(*id)? {
                unsafe_ids.push(*id);
            }
        }
        Ok(unsafe_ids)
    }

    pub fn start_liquidation(&mut self, id: VaultId) -> EngineResult<AuctionId> {
        self.ensure_live()?;
        let vault = self.vault(id)?;
        match vault.state {
            VaultState::InLiquidation => return Err(EngineError::AlreadyInLiquidation(id)),
            VaultState::Closed => return Err(EngineError::VaultNotOpen(id)),
            VaultState::Open => {}
        }
        if !self.is_unsafe(id)? {
            return Err(EngineError::VaultSafe(id));
        }
        let ct = self.collateral_type(&vault.collateral)?;
        let debt = self.current_debt(id)?;
        let tab = debt.mul(Wad::ONE.checked_add(ct.liquidation_penalty)?)?;
        let type_normalized = ct.total_normalized_debt.checked_sub(vault.normalized_debt)?;

        let auction_id = AuctionId(self.next_auction_id);
        let auction = Auction {
            id: auction_id,
            vault_id: id,
            owner: vault.owner.clone(),
            collateral: vault.collateral.clone(),
            lot: vault.locked_collateral,
            tab,
            debt,
            principal: vault.principal,
            state: AuctionState::Active,
        };
        self.next_auction_id += 1;
        self.collaterals
            .get_mut(&auction.collateral)
            .expect("checked")
            .total_normalized_debt = type_normalized;
        let vault = self.vaults.get_mut(&id).expect("checked");
        vault.locked_collateral = Wad::ZERO;
        vault.normalized_debt = Wad::ZERO;
        vault.principal = Wad::ZERO;
        vault.state = VaultState::InLiquidation;
        self.auctions.insert(auction_id, auction);
        Ok(auction_id)
    }

    /// Sell the lot to the keeper pool. If the pool cannot pay, nothing
    /// changes and the auction stays active.
    pub fn settle_collateral_auction(&mut self, id: AuctionId) -> EngineResult<Settlement> {
        self.ensure_live()?;
        let auction = self.auction(id)?;
        if auction.state != AuctionState::Active {
            return Err(EngineError::AuctionNotActive(id));
        }
        let price = self.feed.price(&auction.collateral)?;
        let plan = plan_collateral_sale(auction.lot, auction.tab, price, self.params.auction_discount)?;
        let have = self.keeper_dai();
        if have < plan.proceeds {
            return Err(EngineError::KeeperUnderfunded {
                have,
                need: plan.proceeds,
            });
        }
        let income = plan.proceeds.saturating_sub(auction.principal);
        let unbacked = auction.principal.saturating_sub(plan.proceeds);
        let system_debt = self.system_debt.checked_add(unbacked)?;
        let auction = auction.clone();

        self.burn_dai(KEEPER_ACCOUNT, plan.proceeds)?;
        self.mint_dai(SURPLUS_ACCOUNT, income)?;
        self.system_debt = system_debt;
        self.collateral.credit(&auction.collateral, KEEPER_ACCOUNT, plan.sold)?;
        self.collateral
            .credit(&auction.collateral, &auction.owner, plan.refund)?;
        self.vaults
            .get_mut(&auction.vault_id)
            .expect("auction vault exists")
            .state = VaultState::Open;
        self.auctions.get_mut(&id).expect("checked").state = AuctionState::Settled;

        Ok(Settlement {
            auction_id: id,
            vault_id: auction.vault_id,
            collateral: auction.collateral,
            lot: auction.lot,
            tab: auction.tab,
            sold: plan.sold,
            proceeds: plan.proceeds,
            refund: plan.refund,
            bad_debt: plan.bad_debt,
            unbacked,
        })
    }

    /// Pay down `bad_debt` of system debt: surplus first, then MKR minted and
    /// sold to the keeper pool for Dai, which is burned.
    pub fn run_debt_auction(&mut self, bad_debt: Wad) -> EngineResult<DebtAuctionPlan> {
        self.ensure_live()?;
        if bad_debt > self.system_debt {
            return Err(EngineError::InvalidParameter(format!(
                "bad debt {bad_debt} exceeds recorded system debt {}",
                self.system_debt
            )));
        }
        if bad_debt.is_zero() {
            return Ok(DebtAuctionPlan::default());
        }
        let surplus = self.surplus();
        let mkr_price = if bad_debt > surplus {
            self.feed.price(MKR)?
        } else {
            Wad::ZERO
        };
        let plan = plan_debt_auction(bad_debt, surplus, mkr_price, self.keeper_dai())?;
        let mkr_total = self.totals.mkr_debt_auction.checked_add(plan.mkr_minted)?;

        self.burn_dai(SURPLUS_ACCOUNT, plan.from_surplus)?;
        self.burn_dai(KEEPER_ACCOUNT, plan.raised)?;
        self.mkr.mint(KEEPER_ACCOUNT, plan.mkr_minted)?;
        self.totals.mkr_debt_auction = mkr_total;
        self.system_debt = self
            .system_debt
            .checked_sub(plan.from_surplus.checked_add(plan.raised)?)?;
        Ok(plan)
    }

    /// Settle pending auctions, liquidate every unsafe vault, then cover any
    /// system debt.
    pub fn scan_and_liquidate(&mut self) -> EngineResult<LiquidationRound> {
        self.ensure_live()?;
        let mut round = LiquidationRound::default();
        let mut pending: Vec<AuctionId> = self
            .auctions
            .values()
            .filter(|a| a.state == AuctionState::Active)
            .map(|a| a.id)
            .collect();
        for vault_id in self.scan_unsafe()? {
            let auction_id = self.start_liquidation(vault_id)?;
            round.started.push(auction_id);
            pending.push(auction_id);
        }
        for auction_id in pending {
            match self.settle_collateral_auction(auction_id) {
                Ok(s) => round.settlements.push(s),
                Err(e) => round.unsettled.push((auction_id, e.code().to_string())),
            }
        }
        if !self.system_debt.is_zero() {
            round.debt_auction = Some(self.run_debt_auction(self.system_debt)?);
        }
        Ok(round)
    }
}
