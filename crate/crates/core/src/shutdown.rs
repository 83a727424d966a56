//! Emergency shutdown: freeze reference prices, stop issuance, let vault
//! owners take back excess collateral and let Dai holders redeem against the
//! collateral retained from vaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{EngineError, EngineResult};
use crate::numerics::Wad;
use crate::vault::VaultState;
use crate::VaultId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShutdownState {
    pub at: u64,
    pub reason: String,
    /// Collateral kept back from vaults to back outstanding Dai.
    pub retained: BTreeMap<String, Wad>,
    /// Principal of vaults settled through `withdraw_excess_collateral`.
    pub settled_principal: Wad,
    /// Dai burned through redemption.
    pub redeemed: Wad,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Redemption {
    pub filled: Wad,
    pub unfilled: Wad,
    pub delivered: BTreeMap<String, Wad>,
}

/// Collateral units an owner may take back: `locked - debt / price`, floored
/// at zero.
pub fn excess_collateral(locked: Wad, debt: Wad, frozen_price: Wad) -> EngineResult<Wad> {
    let covering = debt.div(frozen_price)?;
    Ok(locked.saturating_sub(covering))
}

impl Engine {
    pub fn trigger_shutdown(&mut self, reason: &str) -> EngineResult<()> {
        if self.shutdown.is_some() {
            return Err(EngineError::AlreadyShutdown);
        }
        self.feed.freeze();
        self.shutdown = Some(ShutdownState {
            at: self.clock,
            reason: reason.to_string(),
            retained: BTreeMap::new(),
            settled_principal: Wad::ZERO,
            redeemed: Wad::ZERO,
        });
        Ok(())
    }

    /// Return the vault's collateral beyond what covers its debt at the frozen
    /// price. The covering part moves to the redemption pool and the vault
    /// closes.
    pub fn withdraw_excess_collateral(&mut self, caller: &str, id: VaultId) -> EngineResult<Wad> {
        if self.shutdown.is_none() {
            return Err(EngineError::NotShutdown);
        }
        let vault = self.owned_open_vault(caller, id)?;
        if vault.locked_collateral.is_zero() {
            return Err(EngineError::NoCollateral(id));
        }
        let debt = self.current_debt(id)?;
        let price = self.feed.price(&vault.collateral)?;
        let excess = excess_collateral(vault.locked_collateral, debt, price)?;
        let retained = vault.locked_collateral.checked_sub(excess)?;
        let collateral = vault.collateral.clone();
        let (normalized, principal) = (vault.normalized_debt, vault.principal);

        let state = self.shutdown.as_ref().expect("checked");
        let pool = state
            .retained
            .get(&collateral)
            .copied()
            .unwrap_or_default()
            .checked_add(retained)?;
        let settled = state.settled_principal.checked_add(principal)?;
        let ct = self
            .collaterals
            .get_mut(&collateral)
            .expect("vault collateral registered");
        ct.total_normalized_debt = ct.total_normalized_debt.checked_sub(normalized)?;

        self.collateral.credit(&collateral, caller, excess)?;
        let state = self.shutdown.as_mut().expect("checked");
        state.retained.insert(collateral, pool);
        state.settled_principal = settled;
        let vault = self.vaults.get_mut(&id).expect("checked");
        vault.locked_collateral = Wad::ZERO;
        vault.normalized_debt = Wad::ZERO;
        vault.principal = Wad::ZERO;
        vault.state = VaultState::Closed;
        Ok(excess)
    }

    /// Burn Dai for a pro-rata slice of every retained collateral pool, valued
    /// at frozen prices. Fills partially when the pool is worth less than
    /// `amount`.
    pub fn redeem_dai(&mut self, holder: &str, amount: Wad) -> EngineResult<Redemption> {
        let state = self.shutdown.as_ref().ok_or(EngineError::NotShutdown)?;
        if amount.is_zero() {
            return Ok(Redemption::default());
        }
        self.dai.require(holder, amount)?;

        let mut pool_value = Wad::ZERO;
        for (collateral, units) in &state.retained {
            pool_value = pool_value.checked_add(units.mul(self.feed.price(collateral)?)?)?;
        }
        let filled = amount.min(pool_value);
        let mut delivered = BTreeMap::new();
        if !filled.is_zero() {
            for (collateral, units) in &state.retained {
                let share = units.mul_div(filled, pool_value)?;
                if !share.is_zero() {
                    delivered.insert(collateral.clone(), share);
                }
            }
        }
        let redeemed = state.redeemed.checked_add(filled)?;

        self.burn_dai(holder, filled)?;
        for (collateral, share) in &delivered {
            self.collateral.credit(collateral, holder, *share)?;
        }
        let state = self.shutdown.as_mut().expect("checked");
        for (collateral, share) in &delivered {
            let pool = state.retained.get_mut(collateral).expect("delivered from pool");
            *pool = pool.checked_sub(*share)?;
        }
        state.redeemed = redeemed;
        Ok(Redemption {
            filled,
            unfilled: amount.checked_sub(filled)?,
            delivered,
        })
    }
}
