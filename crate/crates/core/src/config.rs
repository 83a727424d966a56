//! Run configuration: collateral types, rates, auction and governance knobs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Wad;

/// Largest annual rate accepted for stability fees and the savings rate.
pub const MAX_ANNUAL_RATE: Wad = Wad::ONE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollateralSpec {
    pub id: String,
    #[serde(default = "defaults::liquidation_ratio")]
    pub liquidation_ratio: Wad,
    #[serde(default)]
    pub stability_fee_annual: Wad,
    #[serde(default)]
    pub debt_ceiling: Option<Wad>,
    #[serde(default = "defaults::liquidation_penalty")]
    pub liquidation_penalty: Wad,
}

impl CollateralSpec {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            liquidation_ratio: defaults::liquidation_ratio(),
            stability_fee_annual: Wad::ZERO,
            debt_ceiling: None,
            liquidation_penalty: defaults::liquidation_penalty(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() || self.id.starts_with('@') {
            return Err(format!("collateral id {:?} is not allowed", self.id));
        }
        if self.id == "DAI" || self.id == "MKR" {
            return Err(format!("collateral id {} clashes with a protocol token", self.id));
        }
        check_liquidation_ratio(self.liquidation_ratio)?;
        check_annual_rate(self.stability_fee_annual)?;
        check_penalty(self.liquidation_penalty)
    }
}

pub(crate) fn check_liquidation_ratio(ratio: Wad) -> Result<(), String> {
    if ratio < Wad::ONE {
        return Err(format!("liquidation ratio {ratio} is below 1.0"));
    }
    Ok(())
}

pub(crate) fn check_annual_rate(rate: Wad) -> Result<(), String> {
    if rate > MAX_ANNUAL_RATE {
        return Err(format!("annual rate {rate} exceeds {MAX_ANNUAL_RATE}"));
    }
    Ok(())
}

pub(crate) fn check_penalty(penalty: Wad) -> Result<(), String> {
    if penalty > Wad::ONE {
        return Err(format!("liquidation penalty {penalty} exceeds 1.0"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub collateral_types: Vec<CollateralSpec>,
    /// Initial oracle prices, including `MKR`.
    #[serde(default)]
    pub prices: BTreeMap<String, Wad>,
    #[serde(default)]
    pub dsr_annual: Wad,
    /// Keeper purchase price is `oracle * (1 - auction_discount)`.
    #[serde(default = "defaults::auction_discount")]
    pub auction_discount: Wad,
    /// MKR minted to a voter for each vote cast.
    #[serde(default = "defaults::voting_reward")]
    pub voting_reward: Wad,
    /// Surplus Dai kept back from buy-and-burn.
    #[serde(default)]
    pub buy_and_burn_floor: Wad,
    /// A proposal passes when yes-weight is strictly greater than this
    /// fraction of MKR supply.
    #[serde(default = "defaults::pass_threshold")]
    pub pass_threshold: Wad,
    /// MKR balances at genesis.
    #[serde(default)]
    pub mkr_genesis: BTreeMap<String, Wad>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            collateral_types: Vec::new(),
            prices: BTreeMap::new(),
            dsr_annual: Wad::ZERO,
            auction_discount: defaults::auction_discount(),
            voting_reward: defaults::voting_reward(),
            buy_and_burn_floor: Wad::ZERO,
            pass_threshold: defaults::pass_threshold(),
            mkr_genesis: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.collateral_types {
            spec.validate().map_err(invalid)?;
            if !seen.insert(spec.id.as_str()) {
                return Err(invalid(format!("duplicate collateral id {}", spec.id)));
            }
        }
        if let Some((asset, _)) = self.prices.iter().find(|(_, p)| p.is_zero()) {
            return Err(invalid(format!("price for {asset} must be positive")));
        }
        check_annual_rate(self.dsr_annual).map_err(invalid)?;
        if self.auction_discount >= Wad::ONE {
            return Err(invalid(format!(
                "auction discount {} must be below 1.0",
                self.auction_discount
            )));
        }
        if self.pass_threshold.is_zero() || self.pass_threshold >= Wad::ONE {
            return Err(invalid(format!(
                "pass threshold {} must lie strictly between 0 and 1",
                self.pass_threshold
            )));
        }
        Ok(())
    }
}

mod defaults {
    use crate::numerics::Wad;

    pub fn liquidation_ratio() -> Wad {
        Wad::from_raw(1_500_000_000_000_000_000)
    }

    pub fn liquidation_penalty() -> Wad {
        Wad::from_raw(130_000_000_000_000_000)
    }

    pub fn auction_discount() -> Wad {
        Wad::from_raw(30_000_000_000_000_000)
    }

    pub fn voting_reward() -> Wad {
        Wad::from_raw(10_000_000_000_000_000)
    }

    pub fn pass_threshold() -> Wad {
        Wad::from_raw(500_000_000_000_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let config = Config::from_json(r#"{"collateral_types":[{"id":"ETH"}]}"#).unwrap();
        let eth = &config.collateral_types[0];
        assert_eq!(eth.liquidation_ratio.to_string(), "1.500000000000000000");
        assert_eq!(eth.liquidation_penalty.to_string(), "0.130000000000000000");
        assert_eq!(eth.debt_ceiling, None);
        assert_eq!(config.auction_discount.to_string(), "0.030000000000000000");
        assert_eq!(config.voting_reward.to_string(), "0.010000000000000000");
    }

    #[test]
    fn rejects_full_discount() {
        let err = Config::from_json(r#"{"auction_discount":"1"}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn rejects_sub_unity_ratio() {
        let err = Config::from_json(r#"{"collateral_types":[{"id":"ETH","liquidation_ratio":"0.9"}]}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn rejects_duplicates_and_unknown_fields() {
        assert!(Config::from_json(r#"{"collateral_types":[{"id":"ETH"},{"id":"ETH"}]}"#).is_err());
        assert!(Config::from_json(r#"{"surprise":1}"#).is_err());
    }
}
