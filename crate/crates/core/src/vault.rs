//! Vault lifecycle: open, deposit, generate, repay, withdraw, close.
//!
//! Debt is stored normalized: `current_debt = normalized_debt * fee_accumulator`.
//! Alongside it each vault tracks `principal`, the Dai actually minted against
//! it and not yet retired. Fees become Dai only when repaid, at which point
//! they are minted into the surplus buffer.

use serde::{Deserialize, Serialize};

use crate::engine::{check_user_account, Engine, SURPLUS_ACCOUNT};
use crate::error::{EngineError, EngineResult};
use crate::numerics::{product_ge, Wad, WAD_SCALE};
use crate::VaultId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VaultState {
    Open,
    InLiquidation,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vault {
    pub id: VaultId,
    pub owner: String,
    pub collateral: String,
    pub locked_collateral: Wad,
    pub normalized_debt: Wad,
    pub principal: Wad,
    pub state: VaultState,
}

/// How a repayment was split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Repayment {
    pub principal: Wad,
    pub fee: Wad,
}

/// `value >= debt * ratio`, exact. Equality counts as safe.
pub fn is_safe(value: Wad, debt: Wad, liquidation_ratio: Wad) -> bool {
    product_ge(value.raw(), WAD_SCALE, debt.raw(), liquidation_ratio.raw())
}

/// Ratio reported for a vault with no debt.
pub const RATIO_INFINITE: Wad = Wad::MAX;

impl Engine {
    pub fn vault(&self, id: VaultId) -> EngineResult<&Vault> {
        self.vaults.get(&id).ok_or(EngineError::UnknownVault(id))
    }

    pub fn vaults(&self) -> impl Iterator<Item = &Vault> {
        self.vaults.values()
    }

    pub fn current_debt(&self, id: VaultId) -> EngineResult<Wad> {
        let vault = self.vault(id)?;
        let ct = self.collateral_type(&vault.collateral)?;
        Ok(vault.normalized_debt.mul_ray(ct.fee_accumulator())?)
    }

    /// USD value of the vault's locked collateral at the current feed price.
    pub fn locked_value(&self, id: VaultId) -> EngineResult<Wad> {
        let vault = self.vault(id)?;
        if vault.locked_collateral.is_zero() {
            return Ok(Wad::ZERO);
        }
        Ok(vault.locked_collateral.mul(self.feed.price(&vault.collateral)?)?)
    }

    /// Collateral value over debt; [`RATIO_INFINITE`] when the vault owes nothing.
    pub fn collateralization_ratio(&self, id: VaultId) -> EngineResult<Wad> {
        let debt = self.current_debt(id)?;
        if debt.is_zero() {
            return Ok(RATIO_INFINITE);
        }
        Ok(self.locked_value(id)?.div(debt)?)
    }

    pub fn max_generatable(&self, id: VaultId) -> EngineResult<Wad> {
        let vault = self.vault(id)?;
        if vault.state != VaultState::Open {
            return Err(EngineError::VaultNotOpen(id));
        }
        let ratio = self.collateral_type(&vault.collateral)?.liquidation_ratio;
        let capacity = self.locked_value(id)?.div(ratio)?;
        Ok(capacity.saturating_sub(self.current_debt(id)?))
    }

    pub fn open_vault(&mut self, owner: &str, collateral: &str) -> EngineResult<VaultId> {
        self.ensure_live()?;
        check_user_account(owner)?;
        self.collateral_type(collateral)?;
        let id = VaultId(self.next_vault_id);
        self.next_vault_id += 1;
        self.vaults.insert(
            id,
            Vault {
                id,
                owner: owner.to_string(),
                collateral: collateral.to_string(),
                locked_collateral: Wad::ZERO,
                normalized_debt: Wad::ZERO,
                principal: Wad::ZERO,
                state: VaultState::Open,
            },
        );
        Ok(id)
    }

    /// Existence, ownership and OPEN state, in that order.
    pub(crate) fn owned_open_vault(&self, caller: &str, id: VaultId) -> EngineResult<&Vault> {
        let vault = self.vault(id)?;
        if vault.owner != caller {
            return Err(EngineError::NotOwner {
                caller: caller.to_string(),
                vault: id,
            });
        }
        if vault.state != VaultState::Open {
            return Err(EngineError::VaultNotOpen(id));
        }
        Ok(vault)
    }

    pub fn deposit_collateral(&mut self, caller: &str, id: VaultId, amount: Wad) -> EngineResult<()> {
        self.ensure_live()?;
        let vault = self.owned_open_vault(caller, id)?;
        let collateral = vault.collateral.clone();
        let locked = vault.locked_collateral.checked_add(amount)?;
        self.collateral.debit(&collateral, caller, amount)?;
        self.vaults.get_mut(&id).expect("checked").locked_collateral = locked;
        Ok(())
    }

    pub fn generate_dai(&mut self, caller: &str, id: VaultId, amount: Wad) -> EngineResult<()> {
        self.ensure_live()?;
        let vault = self.owned_open_vault(caller, id)?;
        if amount.is_zero() {
            return Ok(());
        }
        let ct = self.collateral_type(&vault.collateral)?;
        let acc = ct.fee_accumulator();
        // round the normalized increment up so the recorded debt never trails the Dai minted
        let delta = amount.div_ray_ceil(acc)?;
        let normalized = vault.normalized_debt.checked_add(delta)?;
        let type_normalized = ct.total_normalized_debt.checked_add(delta)?;
        if let Some(ceiling) = ct.debt_ceiling {
            if type_normalized.mul_ray(acc)? > ceiling {
                return Err(EngineError::CeilingExceeded(ct.id.clone()));
            }
        }
        let debt = normalized.mul_ray(acc)?;
        let value = vault.locked_collateral.mul(self.feed.price(&vault.collateral)?)?;
        if !is_safe(value, debt, ct.liquidation_ratio) {
            return Err(EngineError::Undercollateralized);
        }
        let principal = vault.principal.checked_add(amount)?;
        let collateral = vault.collateral.clone();

        self.mint_dai(caller, amount)?;
        self.collaterals
            .get_mut(&collateral)
            .expect("checked")
            .total_normalized_debt = type_normalized;
        let vault = self.vaults.get_mut(&id).expect("checked");
        vault.normalized_debt = normalized;
        vault.principal = principal;
        Ok(())
    }

    pub fn repay_dai(&mut self, caller: &str, id: VaultId, amount: Wad) -> EngineResult<Repayment> {
        self.ensure_live()?;
        let vault = self.owned_open_vault(caller, id)?;
        if amount.is_zero() {
            return Ok(Repayment::default());
        }
        let acc = self.collateral_type(&vault.collateral)?.fee_accumulator();
        let debt = vault.normalized_debt.mul_ray(acc)?;
        if amount > debt {
            return Err(EngineError::Overpayment { amount, debt });
        }
        self.dai.require(caller, amount)?;

        let (principal_part, normalized_part) = if amount == debt {
            (vault.principal, vault.normalized_debt)
        } else {
            // principal never exceeds debt, so this never exceeds `amount`
            (vault.principal.mul_div(amount, debt)?, amount.div_ray(acc)?)
        };
        let fee = amount.checked_sub(principal_part)?;
        let collateral = vault.collateral.clone();

        self.burn_dai(caller, amount)?;
        self.mint_dai(SURPLUS_ACCOUNT, fee)?;
        let ct = self.collaterals.get_mut(&collateral).expect("checked");
        ct.total_normalized_debt = ct.total_normalized_debt.checked_sub(normalized_part)?;
        let vault = self.vaults.get_mut(&id).expect("checked");
        vault.normalized_debt = vault.normalized_debt.checked_sub(normalized_part)?;
        vault.principal = vault.principal.checked_sub(principal_part)?;
        Ok(Repayment {
            principal: principal_part,
            fee,
        })
    }

    pub fn withdraw_collateral(&mut self, caller: &str, id: VaultId, amount: Wad) -> EngineResult<()> {
        self.ensure_live()?;
        let vault = self.owned_open_vault(caller, id)?;
        let remaining = vault
            .locked_collateral
            .checked_sub(amount)
            .map_err(|_| EngineError::InsufficientBalance {
                asset: vault.collateral.clone(),
                account: format!("vault {id}"),
                have: vault.locked_collateral,
                need: amount,
            })?;
        let ct = self.collateral_type(&vault.collateral)?;
        let debt = vault.normalized_debt.mul_ray(ct.fee_accumulator())?;
        if !debt.is_zero() {
            let value = remaining.mul(self.feed.price(&vault.collateral)?)?;
            if !is_safe(value, debt, ct.liquidation_ratio) {
                return Err(EngineError::Undercollateralized);
            }
        }
        let collateral = vault.collateral.clone();
        self.collateral.credit(&collateral, caller, amount)?;
        self.vaults.get_mut(&id).expect("checked").locked_collateral = remaining;
        Ok(())
    }

    pub fn close_vault(&mut self, caller: &str, id: VaultId) -> EngineResult<()> {
        let vault = self.owned_open_vault(caller, id)?;
        if !vault.locked_collateral.is_zero() || !vault.normalized_debt.is_zero() {
            return Err(EngineError::NonEmptyVault(id));
        }
        self.vaults.get_mut(&id).expect("checked").state = VaultState::Closed;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::numerics::SECONDS_PER_YEAR;

    fn w(s: &str) -> Wad {
        s.parse().unwrap()
    }

    fn engine_with(fee: &str, eth_price: &str) -> Engine {
        let config = Config::from_json(&format!(
            r#"{{"collateral_types":[{{"id":"ETH","stability_fee_annual":"{fee}"}}],
                "prices":{{"ETH":"{eth_price}","MKR":"500"}}}}"#
        ))
        .unwrap();
        Engine::new(&config).unwrap()
    }

    fn funded_vault(engine: &mut Engine, owner: &str, eth: &str) -> VaultId {
        engine.faucet(owner, "ETH", w(eth)).unwrap();
        let id = engine.open_vault(owner, "ETH").unwrap();
        engine.deposit_collateral(owner, id, w(eth)).unwrap();
        id
    }

    #[test]
    fn sequential_ids() {
        let mut engine = engine_with("0", "150");
        assert_eq!(engine.open_vault("alice", "ETH").unwrap(), VaultId(1));
        assert_eq!(engine.open_vault("bob", "ETH").unwrap(), VaultId(2));
    }

    #[test]
    fn open_unknown_collateral() {
        let mut engine = engine_with("0", "150");
        assert_eq!(
            engine.open_vault("alice", "BTC"),
            Err(EngineError::UnknownCollateral("BTC".into()))
        );
    }

    #[test]
    fn deposit_paths() {
        let mut engine = engine_with("0", "150");
        engine.faucet("alice", "ETH", w("1")).unwrap();
        let id = engine.open_vault("alice", "ETH").unwrap();
        engine.deposit_collateral("alice", id, Wad::ZERO).unwrap();
        engine.deposit_collateral("alice", id, w("1")).unwrap();
        assert_eq!(engine.vault(id).unwrap().locked_collateral, w("1"));
        assert!(matches!(
            engine.deposit_collateral("alice", id, Wad::ULP),
            Err(EngineError::InsufficientBalance { .. })
        ));
        assert!(matches!(
            engine.deposit_collateral("bob", id, Wad::ZERO),
            Err(EngineError::NotOwner { .. })
        ));
    }

    #[test]
    fn max_generatable_examples() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        assert_eq!(engine.max_generatable(id).unwrap(), w("100"));

        let empty = engine.open_vault("bob", "ETH").unwrap();
        assert_eq!(engine.max_generatable(empty).unwrap(), Wad::ZERO);

        let mut engine = engine_with("0", "200");
        let id = funded_vault(&mut engine, "alice", "1");
        // 200 / 1.5 floored at 18 decimals
        assert_eq!(engine.max_generatable(id).unwrap(), w("133.333333333333333333"));
    }

    #[test]
    fn generate_at_boundary_and_one_past() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        assert_eq!(
            engine.generate_dai("alice", id, w("100.000000000000000001")),
            Err(EngineError::Undercollateralized)
        );
        engine.generate_dai("alice", id, w("100")).unwrap();
        assert_eq!(engine.collateralization_ratio(id).unwrap(), w("1.5"));
        assert_eq!(engine.dai().balance_of("alice"), w("100"));
        assert_eq!(engine.dai().total_supply(), w("100"));
    }

    #[test]
    fn generate_respects_ceiling() {
        let config =
            Config::from_json(r#"{"collateral_types":[{"id":"ETH","debt_ceiling":"50"}],"prices":{"ETH":"150"}}"#)
                .unwrap();
        let mut engine = Engine::new(&config).unwrap();
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("50")).unwrap();
        assert_eq!(
            engine.generate_dai("alice", id, Wad::ULP),
            Err(EngineError::CeilingExceeded("ETH".into()))
        );
    }

    #[test]
    fn ratio_after_price_drop() {
        let mut engine = engine_with("0", "200");
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("100")).unwrap();
        assert_eq!(engine.collateralization_ratio(id).unwrap(), w("2"));
        engine.set_price("ETH", w("150")).unwrap();
        assert_eq!(engine.collateralization_ratio(id).unwrap(), w("1.5"));
    }

    #[test]
    fn zero_debt_ratio_is_infinite() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        assert_eq!(engine.collateralization_ratio(id).unwrap(), RATIO_INFINITE);
    }

    #[test]
    fn repay_full_and_zero() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("100")).unwrap();
        assert_eq!(engine.repay_dai("alice", id, Wad::ZERO).unwrap(), Repayment::default());
        let r = engine.repay_dai("alice", id, w("100")).unwrap();
        assert_eq!(
            r,
            Repayment {
                principal: w("100"),
                fee: Wad::ZERO
            }
        );
        assert_eq!(engine.current_debt(id).unwrap(), Wad::ZERO);
        assert_eq!(engine.dai().total_supply(), Wad::ZERO);
    }

    #[test]
    fn repay_rejects_overpayment() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("50")).unwrap();
        assert!(matches!(
            engine.repay_dai("alice", id, w("50.000000000000000001")),
            Err(EngineError::Overpayment { .. })
        ));
    }

    #[test]
    fn repay_with_a_year_of_fees() {
        let mut engine = engine_with("0.05", "300");
        let id = funded_vault(&mut engine, "alice", "1");
        let other = funded_vault(&mut engine, "bob", "1");
        engine.generate_dai("alice", id, w("100")).unwrap();
        engine.generate_dai("bob", other, w("10")).unwrap();
        engine.advance_to(SECONDS_PER_YEAR).unwrap();

        let debt = engine.current_debt(id).unwrap();
        assert!((debt.to_f64() - 105.0).abs() < 1e-6, "{debt}");
        let shortfall = debt.checked_sub(w("100")).unwrap();
        engine
            .transfer(crate::market::Token::Dai, "bob", "alice", shortfall)
            .unwrap();

        let r = engine.repay_dai("alice", id, debt).unwrap();
        assert_eq!(r.principal, w("100"));
        assert_eq!(r.fee, shortfall);
        assert_eq!(engine.surplus(), shortfall);
        assert_eq!(engine.current_debt(id).unwrap(), Wad::ZERO);
    }

    #[test]
    fn partial_repay_keeps_debt_above_principal() {
        let mut engine = engine_with("0.2", "1000");
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("300")).unwrap();
        engine.advance_to(12_345_678).unwrap();
        let r = engine.repay_dai("alice", id, w("123.456")).unwrap();
        assert_eq!(r.principal.checked_add(r.fee).unwrap(), w("123.456"));
        let v = engine.vault(id).unwrap();
        assert!(engine.current_debt(id).unwrap() >= v.principal);
    }

    #[test]
    fn withdraw_bounds() {
        let mut engine = engine_with("0", "100");
        let id = funded_vault(&mut engine, "alice", "2");
        engine.generate_dai("alice", id, w("100")).unwrap();
        // (200 - x) / 100 >= 1.5  =>  x <= 50 USD = 0.5 ETH
        assert_eq!(
            engine.withdraw_collateral("alice", id, w("0.500000000000000001")),
            Err(EngineError::Undercollateralized)
        );
        engine.withdraw_collateral("alice", id, w("0.5")).unwrap();
        assert_eq!(engine.collateral_ledger().free_balance("ETH", "alice"), w("0.5"));
    }

    #[test]
    fn lifecycle_to_closed() {
        let mut engine = engine_with("0", "150");
        let id = funded_vault(&mut engine, "alice", "1");
        engine.generate_dai("alice", id, w("100")).unwrap();
        assert_eq!(engine.close_vault("alice", id), Err(EngineError::NonEmptyVault(id)));
        engine.repay_dai("alice", id, w("100")).unwrap();
        engine.withdraw_collateral("alice", id, w("1")).unwrap();
        engine.close_vault("alice", id).unwrap();
        let v = engine.vault(id).unwrap();
        assert_eq!(v.state, VaultState::Closed);
        assert_eq!(
            engine.deposit_collateral("alice", id, Wad::ZERO),
            Err(EngineError::VaultNotOpen(id))
        );
        assert_eq!(engine.dai().total_supply(), Wad::ZERO);
    }
}
