//! The world the protocol sees: collateral registry, price feed and token
//! ledgers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::CollateralSpec;
use crate::error::{EngineError, EngineResult};
use crate::numerics::{annual_to_per_second, ray_pow, Ray, Wad};

/// A compounding index: `value(t) = epoch_base * rate^(t - epoch_start)`.
///
/// The index is recomputed from the last rate change rather than multiplied
/// forward step by step, so accruing at intermediate timestamps never changes
/// the value reached at a later timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateAccumulator {
    pub value: Ray,
    pub rate: Ray,
    pub updated_at: u64,
    pub epoch_start: u64,
    pub epoch_base: Ray,
}

impl RateAccumulator {
    pub fn new(rate: Ray, now: u64) -> Self {
        Self {
            value: Ray::ONE,
            rate,
            updated_at: now,
            epoch_start: now,
            epoch_base: Ray::ONE,
        }
    }

    pub fn accrue(&mut self, now: u64) -> EngineResult<Ray> {
        if now < self.updated_at {
            return Err(EngineError::TimeRegression {
                now,
                last: self.updated_at,
            });
        }
        if now > self.updated_at {
            let growth = ray_pow(self.rate, now - self.epoch_start)?;
            let next = self.epoch_base.mul(growth)?;
            self.value = self.value.max(next);
            self.updated_at = now;
        }
        Ok(self.value)
    }

    /// Accrue to `now` under the old rate, then start a new epoch.
    pub fn set_rate(&mut self, rate: Ray, now: u64) -> EngineResult<()> {
        self.accrue(now)?;
        self.rate = rate;
        self.epoch_start = now;
        self.epoch_base = self.value;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollateralType {
    pub id: String,
    pub liquidation_ratio: Wad,
    pub liquidation_penalty: Wad,
    /// `None` means unlimited.
    pub debt_ceiling: Option<Wad>,
    pub fees: RateAccumulator,
    /// Σ normalized debt over vaults of this type.
    pub total_normalized_debt: Wad,
}

impl CollateralType {
    pub fn from_spec(spec: &CollateralSpec, now: u64) -> EngineResult<Self> {
        Ok(Self {
            id: spec.id.clone(),
            liquidation_ratio: spec.liquidation_ratio,
            liquidation_penalty: spec.liquidation_penalty,
            debt_ceiling: spec.debt_ceiling,
            fees: RateAccumulator::new(annual_to_per_second(spec.stability_fee_annual)?, now),
            total_normalized_debt: Wad::ZERO,
        })
    }

    pub fn fee_accumulator(&self) -> Ray {
        self.fees.value
    }

    pub fn stability_rate(&self) -> Ray {
        self.fees.rate
    }

    pub fn accumulator_updated_at(&self) -> u64 {
        self.fees.updated_at
    }

    pub fn accrue_fees(&mut self, now: u64) -> EngineResult<Ray> {
        self.fees.accrue(now)
    }

    pub fn total_debt(&self) -> EngineResult<Wad> {
        Ok(self.total_normalized_debt.mul_ray(self.fees.value)?)
    }
}

/// Oracle prices in USD per unit. Dai is pegged at exactly 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceFeed {
    prices: BTreeMap<String, Wad>,
    frozen: bool,
    frozen_prices: BTreeMap<String, Wad>,
}

impl PriceFeed {
    pub fn set_price(&mut self, asset: &str, price: Wad) -> EngineResult<()> {
        if self.frozen {
            return Err(EngineError::Frozen);
        }
        if price.is_zero() {
            return Err(EngineError::InvalidPrice);
        }
        self.prices.insert(asset.to_string(), price);
        Ok(())
    }

    pub fn price(&self, asset: &str) -> EngineResult<Wad> {
        let prices = if self.frozen { &self.frozen_prices } else { &self.prices };
        prices
            .get(asset)
            .copied()
            .ok_or_else(|| EngineError::MissingPrice(asset.to_string()))
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        if !self.frozen {
            self.frozen_prices = self.prices.clone();
            self.frozen = true;
        }
    }

    pub fn frozen_prices(&self) -> &BTreeMap<String, Wad> {
        &self.frozen_prices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Token {
    Dai,
    Mkr,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Token::Dai => "DAI",
            Token::Mkr => "MKR",
        })
    }
}

/// Balances and total supply of one token. Zero balances are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    token: Token,
    balances: BTreeMap<String, Wad>,
    total_supply: Wad,
}

impl TokenLedger {
    pub fn new(token: Token) -> Self {
        Self {
            token,
            balances: BTreeMap::new(),
            total_supply: Wad::ZERO,
        }
    }

    pub fn token(&self) -> Token {
        self.token
    }

    pub fn balance_of(&self, account: &str) -> Wad {
        self.balances.get(account).copied().unwrap_or_default()
    }

    pub fn total_supply(&self) -> Wad {
        self.total_supply
    }

    pub fn balances(&self) -> impl Iterator<Item = (&str, Wad)> {
        self.balances.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn mint(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        if amount.is_zero() {
            return Ok(());
        }
        let supply = self.total_supply.checked_add(amount)?;
        let balance = self.balance_of(account).checked_add(amount)?;
        self.total_supply = supply;
        self.balances.insert(account.to_string(), balance);
        Ok(())
    }

    pub fn burn(&mut self, account: &str, amount: Wad) -> EngineResult<()> {
        if amount.is_zero() {
            return Ok(());
        }
        let balance = self.debit(account, amount)?;
        self.total_supply = self.total_supply.checked_sub(amount)?;
        self.store(account, balance);
        Ok(())
    }

    pub fn transfer(&mut self, from: &str, to: &str, amount: Wad) -> EngineResult<()> {
        if amount.is_zero() || from == to {
            // still enforce the balance check for self transfers
            self.debit(from, amount)?;
            return Ok(());
        }
        let from_balance = self.debit(from, amount)?;
        let to_balance = self.balance_of(to).checked_add(amount)?;
        self.store(from, from_balance);
        self.store(to, to_balance);
        Ok(())
    }

    pub fn require(&self, account: &str, amount: Wad) -> EngineResult<()> {
        self.debit(account, amount).map(|_| ())
    }

    fn debit(&self, account: &str, amount: Wad) -> EngineResult<Wad> {
        let have = self.balance_of(account);
        have.checked_sub(amount).map_err(|_| EngineError::InsufficientBalance {
            asset: self.token.to_string(),
            account: account.to_string(),
            have,
            need: amount,
        })
    }

    fn store(&mut self, account: &str, balance: Wad) {
        if balance.is_zero() {
            self.balances.remove(account);
        } else {
            self.balances.insert(account.to_string(), balance);
        }
    }

    /// Σ balances recomputed from scratch.
    pub fn sum_balances(&self) -> Option<Wad> {
        self.balances
            .values()
            .try_fold(Wad::ZERO, |acc, b| acc.checked_add(*b).ok())
    }
}

/// Free (unlocked) collateral held by accounts, per collateral type, plus the
/// running total ever issued by the faucet.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollateralLedger {
    free: BTreeMap<String, BTreeMap<String, Wad>>,
    issued: BTreeMap<String, Wad>,
}

impl CollateralLedger {
    pub fn faucet(&mut self, collateral: &str, account: &str, amount: Wad) -> EngineResult<()> {
        let issued = self.issued(collateral).checked_add(amount)?;
        self.credit(collateral, account, amount)?;
        self.issued.insert(collateral.to_string(), issued);
        Ok(())
    }

    pub fn issued(&self, collateral: &str) -> Wad {
        self.issued.get(collateral).copied().unwrap_or_default()
    }

    pub fn free_balance(&self, collateral: &str, account: &str) -> Wad {
        self.free
            .get(collateral)
            .and_then(|m| m.get(account))
            .copied()
            .unwrap_or_default()
    }

    pub fn credit(&mut self, collateral: &str, account: &str, amount: Wad) -> EngineResult<()> {
        if amount.is_zero() {
            return Ok(());
        }
        let next = self.free_balance(collateral, account).checked_add(amount)?;
        self.free
            .entry(collateral.to_string())
            .or_default()
            .insert(account.to_string(), next);
        Ok(())
    }

    pub fn debit(&mut self, collateral: &str, account: &str, amount: Wad) -> EngineResult<()> {
        self.require(collateral, account, amount)?;
        if amount.is_zero() {
            return Ok(());
        }
        let next = self.free_balance(collateral, account).saturating_sub(amount);
        let balances = self.free.entry(collateral.to_string()).or_default();
        if next.is_zero() {
            balances.remove(account);
        } else {
            balances.insert(account.to_string(), next);
        }
        Ok(())
    }

    pub fn require(&self, collateral: &str, account: &str, amount: Wad) -> EngineResult<()> {
        let have = self.free_balance(collateral, account);
        if have < amount {
            return Err(EngineError::InsufficientBalance {
                asset: collateral.to_string(),
                account: account.to_string(),
                have,
                need: amount,
            });
        }
        Ok(())
    }

    pub fn transfer(&mut self, collateral: &str, from: &str, to: &str, amount: Wad) -> EngineResult<()> {
        self.debit(collateral, from, amount)?;
        self.credit(collateral, to, amount)
    }

    pub fn free_balances(&self, collateral: &str) -> impl Iterator<Item = (&str, Wad)> {
        self.free
            .get(collateral)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, b)| (a.as_str(), *b)))
    }

    pub fn total_free(&self, collateral: &str) -> Option<Wad> {
        self.free.get(collateral).map_or(Some(Wad::ZERO), |m| {
            m.values().try_fold(Wad::ZERO, |acc, b| acc.checked_add(*b).ok())
        })
    }

    pub fn collaterals(&self) -> impl Iterator<Item = &str> {
        self.issued.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SECONDS_PER_YEAR;
    use proptest::prelude::*;

    fn w(s: &str) -> Wad {
        s.parse().unwrap()
    }

    #[test]
    fn price_reads_back_and_overwrites() {
        let mut feed = PriceFeed::default();
        feed.set_price("ETH", w("150")).unwrap();
        assert_eq!(feed.price("ETH").unwrap(), w("150"));
        feed.set_price("ETH", w("120")).unwrap();
        assert_eq!(feed.price("ETH").unwrap(), w("120"));
        assert_eq!(feed.set_price("ETH", Wad::ZERO), Err(EngineError::InvalidPrice));
    }

    #[test]
    fn frozen_feed_rejects_updates() {
        let mut feed = PriceFeed::default();
        feed.set_price("ETH", w("150")).unwrap();
        feed.freeze();
        assert_eq!(feed.set_price("ETH", w("1")), Err(EngineError::Frozen));
        assert_eq!(feed.price("ETH").unwrap(), w("150"));
    }

    #[test]
    fn mint_and_burn() {
        let mut dai = TokenLedger::new(Token::Dai);
        dai.mint("alice", w("100")).unwrap();
        assert_eq!(dai.balance_of("alice"), w("100"));
        assert_eq!(dai.total_supply(), w("100"));
        dai.burn("alice", w("100")).unwrap();
        assert_eq!(dai.balance_of("alice"), Wad::ZERO);
        assert_eq!(dai.total_supply(), Wad::ZERO);
        assert!(matches!(
            dai.burn("alice", Wad::ULP),
            Err(EngineError::InsufficientBalance { .. })
        ));
    }

    #[test]
    fn accumulator_zero_rate_is_constant() {
        let mut acc = RateAccumulator::new(Ray::ONE, 0);
        acc.accrue(10_000_000).unwrap();
        assert_eq!(acc.value, Ray::ONE);
    }

    #[test]
    fn accumulator_rejects_time_regression() {
        let mut acc = RateAccumulator::new(Ray::ONE, 100);
        assert_eq!(acc.accrue(99), Err(EngineError::TimeRegression { now: 99, last: 100 }));
    }

    #[test]
    fn accumulator_is_path_independent() {
        let rate = annual_to_per_second(w("0.05")).unwrap();
        let mut once = RateAccumulator::new(rate, 0);
        once.accrue(SECONDS_PER_YEAR).unwrap();
        let mut split = RateAccumulator::new(rate, 0);
        split.accrue(1_234_567).unwrap();
        split.accrue(SECONDS_PER_YEAR).unwrap();
        assert_eq!(once.value, split.value);
    }

    #[derive(Debug, Clone)]
    enum LedgerOp {
        Mint(usize, u64),
        Burn(usize, u64),
        Transfer(usize, usize, u64),
    }

    fn ledger_op() -> impl Strategy<Value = LedgerOp> {
        prop_oneof![
            (0..4usize, any::<u64>()).prop_map(|(a, x)| LedgerOp::Mint(a, x)),
            (0..4usize, any::<u64>()).prop_map(|(a, x)| LedgerOp::Burn(a, x)),
            (0..4usize, 0..4usize, any::<u64>()).prop_map(|(a, b, x)| LedgerOp::Transfer(a, b, x)),
        ]
    }

    proptest! {
        #[test]
        fn supply_equals_sum_of_balances(ops in proptest::collection::vec(ledger_op(), 1..200)) {
            let names = ["a", "b", "c", "d"];
            let mut ledger = TokenLedger::new(Token::Mkr);
            for op in ops {
                let _ = match op {
                    LedgerOp::Mint(a, x) => ledger.mint(names[a], Wad::from_raw(x as u128)),
                    LedgerOp::Burn(a, x) => ledger.burn(names[a], Wad::from_raw(x as u128)),
                    LedgerOp::Transfer(a, b, x) => ledger.transfer(names[a], names[b], Wad::from_raw(x as u128)),
                };
                let recomputed: u128 = names.iter().map(|n| ledger.balance_of(n).raw()).sum();
                prop_assert_eq!(recomputed, ledger.total_supply().raw());
            }
        }

        #[test]
        fn accumulator_monotone(rate_bps in 0u64..10_000, steps in proptest::collection::vec(0u64..5_000_000, 1..20)) {
            let annual = Wad::from_raw(rate_bps as u128 * 100_000_000_000_000);
            let mut acc = RateAccumulator::new(annual_to_per_second(annual).unwrap(), 0);
            let mut now = 0;
            let mut last = acc.value;
            for dt in steps {
                now += dt;
                let v = acc.accrue(now).unwrap();
                prop_assert!(v >= last);
                last = v;
            }
        }
    }
}
