//! Whole-state ledger audits. Every identity here is exact integer equality.
//!
//! Backing identity:
//!
//! ```text
//! dai_supply + redeemed = Σ vault principal + Σ active auction principal
//!                         + system_debt + settled_principal
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{Engine, POT_ACCOUNT};
use crate::liquidation::AuctionState;
use crate::numerics::Wad;
use crate::vault::VaultState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{check}: {detail}")]
pub struct AuditViolation {
    pub check: &'static str,
    pub detail: String,
}

fn violation(check: &'static str, detail: String) -> AuditViolation {
    AuditViolation { check, detail }
}

fn sum<'a>(values: impl IntoIterator<Item = &'a Wad>, check: &'static str) -> Result<Wad, AuditViolation> {
    values
        .into_iter()
        .try_fold(Wad::ZERO, |acc, v| acc.checked_add(*v))
        .map_err(|e| violation(check, e.to_string()))
}

fn add(a: Wad, b: Wad, check: &'static str) -> Result<Wad, AuditViolation> {
    a.checked_add(b).map_err(|e| violation(check, e.to_string()))
}

impl Engine {
    pub fn audit(&self) -> Result<(), AuditViolation> {
        self.audit_token_ledgers()?;
        self.audit_backing()?;
        self.audit_collateral()?;
        self.audit_pot()?;
        self.audit_vaults()
    }

    pub fn audit_token_ledgers(&self) -> Result<(), AuditViolation> {
        for ledger in [&self.dai, &self.mkr] {
            let total = ledger
                .sum_balances()
                .ok_or_else(|| violation("ledger_conservation", "balance sum overflows".into()))?;
            if total != ledger.total_supply() {
                return Err(violation(
                    "ledger_conservation",
                    format!(
                        "{} supply {} != Σ balances {}",
                        ledger.token(),
                        ledger.total_supply(),
                        total
                    ),
                ));
            }
        }
        let t = &self.totals;
        let lhs = add(self.dai.total_supply(), t.dai_burned, "dai_flows")?;
        if lhs != t.dai_minted {
            return Err(violation(
                "dai_flows",
                format!("supply + burned {lhs} != minted {}", t.dai_minted),
            ));
        }
        let lhs = add(self.mkr.total_supply(), t.mkr_burned, "mkr_flows")?;
        let rhs = add(
            add(t.mkr_genesis, t.mkr_rewards, "mkr_flows")?,
            t.mkr_debt_auction,
            "mkr_flows",
        )?;
        if lhs != rhs {
            return Err(violation(
                "mkr_flows",
                format!("supply + burned {lhs} != genesis + rewards + debt mints {rhs}"),
            ));
        }
        Ok(())
    }

    pub fn audit_backing(&self) -> Result<(), AuditViolation> {
        const CHECK: &str = "backing_identity";
        let (settled, redeemed) = self
            .shutdown
            .as_ref()
            .map_or((Wad::ZERO, Wad::ZERO), |s| (s.settled_principal, s.redeemed));
        let vault_principal = sum(self.vaults.values().map(|v| &v.principal), CHECK)?;
        let auction_principal = sum(
            self.auctions
                .values()
                .filter(|a| a.state == AuctionState::Active)
                .map(|a| &a.principal),
            CHECK,
        )?;
        let lhs = add(self.dai.total_supply(), redeemed, CHECK)?;
        let rhs = sum(
            [&vault_principal, &auction_principal, &self.system_debt, &settled],
            CHECK,
        )?;
        if lhs != rhs {
            return Err(violation(
                CHECK,
                format!(
                    "supply {} + redeemed {redeemed} != vaults {vault_principal} + auctions {auction_principal} \
                     + system debt {} + settled {settled}",
                    self.dai.total_supply(),
                    self.system_debt
                ),
            ));
        }
        Ok(())
    }

    /// Per collateral type: free + locked + escrow + retained = issued.
    pub fn audit_collateral(&self) -> Result<(), AuditViolation> {
        const CHECK: &str = "collateral_conservation";
        let mut held: BTreeMap<&str, Wad> = BTreeMap::new();
        let vaults = self
            .vaults
            .values()
            .map(|v| (v.collateral.as_str(), v.locked_collateral));
        let escrow = self
            .auctions
            .values()
            .filter(|a| a.state == AuctionState::Active)
            .map(|a| (a.collateral.as_str(), a.lot));
        let retained = self
            .shutdown
            .iter()
            .flat_map(|s| s.retained.iter().map(|(c, u)| (c.as_str(), *u)));
        for (collateral, amount) in vaults.chain(escrow).chain(retained) {
            let slot = held.entry(collateral).or_default();
            *slot = add(*slot, amount, CHECK)?;
        }
        for collateral in self.collaterals.keys() {
            let free = self
                .collateral
                .total_free(collateral)
                .ok_or_else(|| violation(CHECK, "free balance sum overflows".into()))?;
            let total = add(free, held.get(collateral.as_str()).copied().unwrap_or_default(), CHECK)?;
            let issued = self.collateral.issued(collateral);
            if total != issued {
                return Err(violation(
                    CHECK,
                    format!("{collateral}: held {total} != issued {issued}"),
                ));
            }
        }
        Ok(())
    }

    pub fn audit_pot(&self) -> Result<(), AuditViolation> {
        let owed = self
            .pot
            .obligations_at(self.pot.chi.value)
            .map_err(|e| violation("pot_conservation", e.to_string()))?;
        let held = self.dai.balance_of(POT_ACCOUNT);
        if owed != held {
            return Err(violation("pot_conservation", format!("pot holds {held}, owes {owed}")));
        }
        Ok(())
    }

    pub fn audit_vaults(&self) -> Result<(), AuditViolation> {
        const CHECK: &str = "vault_consistency";
        let mut normalized: BTreeMap<&str, Wad> = BTreeMap::new();
        for v in self.vaults.values() {
            let slot = normalized.entry(v.collateral.as_str()).or_default();
            *slot = add(*slot, v.normalized_debt, CHECK)?;
            match v.state {
                VaultState::Closed | VaultState::InLiquidation
                    if !(v.locked_collateral.is_zero() && v.normalized_debt.is_zero() && v.principal.is_zero()) =>
                {
                    return Err(violation(
                        CHECK,
                        format!("vault {} is {:?} but not empty", v.id, v.state),
                    ));
                }
                VaultState::InLiquidation => {
                    let active = self
                        .auctions
                        .values()
                        .filter(|a| a.vault_id == v.id && a.state == AuctionState::Active)
                        .count();
                    if active != 1 {
                        return Err(violation(CHECK, format!("vault {} has {active} active auctions", v.id)));
                    }
                }
                _ => {}
            }
            let debt = self.current_debt(v.id).map_err(|e| violation(CHECK, e.to_string()))?;
            if debt < v.principal {
                return Err(violation(
                    CHECK,
                    format!("vault {} debt {debt} below principal {}", v.id, v.principal),
                ));
            }
        }
        for ct in self.collaterals.values() {
            let recorded = normalized.get(ct.id.as_str()).copied().unwrap_or_default();
            if recorded != ct.total_normalized_debt {
                return Err(violation(
                    CHECK,
                    format!(
                        "{}: Σ vault normalized debt {recorded} != type total {}",
                        ct.id, ct.total_normalized_debt
                    ),
                ));
            }
        }
        Ok(())
    }
}
