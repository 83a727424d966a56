//! Dai savings rate: deposit, accrue, withdraw at any time.
//!
//! The pot's Dai balance is kept equal to `Σ floor(normalized_i * chi)` after
//! every operation. Rounding residue from deposits and withdrawals goes to the
//! surplus buffer. Interest is funded from the surplus buffer first and minted
//! as system debt when the buffer runs dry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{check_user_account, Engine, POT_ACCOUNT, SURPLUS_ACCOUNT};
use crate::error::{EngineError, EngineResult};
use crate::market::RateAccumulator;
use crate::numerics::{Ray, Wad};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavingsPot {
    pub chi: RateAccumulator,
    /// account → normalized balance (deposit / chi at deposit time)
    pub accounts: BTreeMap<String, Wad>,
}

impl SavingsPot {
    pub fn new(rate: Ray, now: u64) -> Self {
        Self {
            chi: RateAccumulator::new(rate, now),
            accounts: BTreeMap::new(),
        }
    }

    pub fn normalized_balance(&self, account: &str) -> Wad {
        self.accounts.get(account).copied().unwrap_or_default()
    }

    pub fn balance_of(&self, account: &str) -> EngineResult<Wad> {
        Ok(self.normalized_balance(account).mul_ray(self.chi.value)?)
    }

    /// Σ floor(normalized_i * chi) at the given chi.
    pub fn obligations_at(&self, chi: Ray) -> EngineResult<Wad> {
        self.accounts
            .values()
            .try_fold(Wad::ZERO, |acc, n| Ok(acc.checked_add(n.mul_ray(chi)?)?))
    }
}

/// Interest paid into the pot by one accrual step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PotFunding {
    pub from_surplus: Wad,
    pub minted: Wad,
}

impl Engine {
    pub fn pot(&self) -> &SavingsPot {
        &self.pot
    }

    pub fn savings_balance(&self, account: &str) -> EngineResult<Wad> {
        self.pot.balance_of(account)
    }

    pub fn dsr_accrue(&mut self, now: u64) -> EngineResult<PotFunding> {
        let before = self.pot.obligations_at(self.pot.chi.value)?;
        let mut chi = self.pot.chi.clone();
        chi.accrue(now)?;
        let after = self.pot.obligations_at(chi.value)?;
        let interest = after.checked_sub(before)?;
        let from_surplus = interest.min(self.surplus());
        let minted = interest.checked_sub(from_surplus)?;
        let system_debt = self.system_debt.checked_add(minted)?;

        self.dai.transfer(SURPLUS_ACCOUNT, POT_ACCOUNT, from_surplus)?;
        self.mint_dai(POT_ACCOUNT, minted)?;
        self.system_debt = system_debt;
        self.pot.chi = chi;
        Ok(PotFunding { from_surplus, minted })
    }

    /// Change the savings rate after accruing under the old one.
    pub(crate) fn set_dsr_rate(&mut self, rate: Ray, now: u64) -> EngineResult<()> {
        self.dsr_accrue(now)?;
        self.pot.chi.set_rate(rate, now)
    }

    pub fn dsr_deposit(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        check_user_account(account)?;
        if amount.is_zero() {
            return Ok(());
        }
        self.dai.require(account, amount)?;
        let chi = self.pot.chi.value;
        let held = self.pot.normalized_balance(account);
        let next = held.checked_add(amount.div_ray(chi)?)?;
        let credited = next.mul_ray(chi)?.checked_sub(held.mul_ray(chi)?)?;
        let residue = amount.checked_sub(credited)?;

        self.dai.transfer(account, POT_ACCOUNT, amount)?;
        self.dai.transfer(POT_ACCOUNT, SURPLUS_ACCOUNT, residue)?;
        self.store_savings(account, next);
        Ok(())
    }

    pub fn dsr_withdraw(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        check_user_account(account)?;
        if amount.is_zero() {
            return Ok(());
        }
        let chi = self.pot.chi.value;
        let held = self.pot.normalized_balance(account);
        let balance = held.mul_ray(chi)?;
        if amount > balance {
            return Err(EngineError::InsufficientBalance {
                asset: "DSR".to_string(),
                account: account.to_string(),
                have: balance,
                need: amount,
            });
        }
        let burned = if amount == balance {
            held
        } else {
            amount.div_ray_ceil(chi)?.min(held)
        };
        let next = held.checked_sub(burned)?;
        let released = balance.checked_sub(next.mul_ray(chi)?)?;
        let residue = released.checked_sub(amount)?;

        self.dai.transfer(POT_ACCOUNT, account, amount)?;
        self.dai.transfer(POT_ACCOUNT, SURPLUS_ACCOUNT, residue)?;
        self.store_savings(account, next);
        Ok(())
    }

    fn store_savings(&mut self, account: &str, normalized: Wad) {
        if normalized.is_zero() {
            self.pot.accounts.remove(account);
        } else {
            self.pot.accounts.insert(account.to_string(), normalized);
        }
    }
}
