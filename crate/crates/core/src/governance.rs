//! MKR-weighted parameter governance and the buy-and-burn of fee income.
//!
//! A vote records the voter's MKR balance at vote time and mints the voting
//! reward. At tally a proposal passes when the recorded weight is strictly
//! greater than `pass_threshold` of MKR supply at tally time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{check_annual_rate, check_liquidation_ratio, check_penalty, CollateralSpec};
use crate::engine::{check_user_account, Engine, KEEPER_ACCOUNT, MKR, SURPLUS_ACCOUNT};
use crate::error::{EngineError, EngineResult};
use crate::numerics::{annual_to_per_second, product_ge, Wad, WAD_SCALE};
use crate::ProposalId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "param", rename_all = "snake_case")]
pub enum ParamChange {
    LiquidationRatio {
        collateral: String,
        value: Wad,
    },
    /// Annual rate; converted to a per-second factor on execution.
    StabilityRate {
        collateral: String,
        annual: Wad,
    },
    DsrRate {
        annual: Wad,
    },
    DebtCeiling {
        collateral: String,
        value: Option<Wad>,
    },
    LiquidationPenalty {
        collateral: String,
        value: Wad,
    },
    AddCollateralType {
        spec: CollateralSpec,
    },
    TriggerShutdown {
        #[serde(default)]
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProposalState {
    Voting,
    Passed,
    Failed,
    Executed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub change: ParamChange,
    pub voting_deadline: u64,
    pub tally: BTreeMap<String, Wad>,
    pub state: ProposalState,
}

impl Proposal {
    pub fn yes_weight(&self) -> Option<Wad> {
        self.tally
            .values()
            .try_fold(Wad::ZERO, |acc, w| acc.checked_add(*w).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TallyOutcome {
    pub proposal: ProposalId,
    pub yes_weight: Wad,
    pub supply: Wad,
    pub state: ProposalState,
}

/// Strict-majority style rule: `yes > threshold * supply`, exact.
pub fn passes(yes: Wad, supply: Wad, threshold: Wad) -> bool {
    !supply.is_zero() && !product_ge(supply.raw(), threshold.raw(), yes.raw(), WAD_SCALE)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuyAndBurn {
    pub dai_spent: Wad,
    pub mkr_burned: Wad,
}

/// MKR bought with surplus above `floor` at `mkr_price`, capped by what the
/// seller holds.
pub fn plan_buy_and_burn(surplus: Wad, floor: Wad, mkr_price: Wad, seller_mkr: Wad) -> EngineResult<BuyAndBurn> {
    let excess = surplus.saturating_sub(floor);
    if excess.is_zero() {
        return Ok(BuyAndBurn::default());
    }
    if mkr_price.is_zero() {
        return Err(EngineError::InvalidPrice);
    }
    let wanted = excess.div(mkr_price)?;
    if wanted <= seller_mkr {
        return Ok(BuyAndBurn {
            dai_spent: excess,
            mkr_burned: wanted,
        });
    }
    Ok(BuyAndBurn {
        dai_spent: seller_mkr.mul(mkr_price)?,
        mkr_burned: seller_mkr,
    })
}

impl Engine {
    pub fn proposal(&self, id: ProposalId) -> EngineResult<&Proposal> {
        self.proposals.get(&id).ok_or(EngineError::UnknownProposal(id))
    }

    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    fn check_change(&self, change: &ParamChange) -> EngineResult<()> {
        let invalid = EngineError::InvalidParameter;
        match change {
            ParamChange::LiquidationRatio { collateral, value } => {
                self.collateral_type(collateral)?;
                check_liquidation_ratio(*value).map_err(invalid)
            }
            ParamChange::StabilityRate { collateral, annual } => {
                self.collateral_type(collateral)?;
                check_annual_rate(*annual).map_err(invalid)
            }
            ParamChange::DsrRate { annual } => check_annual_rate(*annual).map_err(invalid),
            ParamChange::DebtCeiling { collateral, .. } => self.collateral_type(collateral).map(|_| ()),
            ParamChange::LiquidationPenalty { collateral, value } => {
                self.collateral_type(collateral)?;
                check_penalty(*value).map_err(invalid)
            }
            ParamChange::AddCollateralType { spec } => {
                spec.validate().map_err(invalid)?;
                if self.collaterals.contains_key(&spec.id) {
                    return Err(EngineError::DuplicateCollateral(spec.id.clone()));
                }
                Ok(())
            }
            ParamChange::TriggerShutdown { .. } => Ok(()),
        }
    }

    pub fn propose(&mut self, change: ParamChange, deadline: u64) -> EngineResult<ProposalId> {
        self.check_change(&change)?;
        if deadline <= self.clock {
            return Err(EngineError::InvalidParameter(format!(
                "deadline {deadline} is not after the current time {}",
                self.clock
            )));
        }
        let id = ProposalId(self.next_proposal_id);
        self.next_proposal_id += 1;
        self.proposals.insert(
            id,
            Proposal {
                id,
                change,
                voting_deadline: deadline,
                tally: BTreeMap::new(),
                state: ProposalState::Voting,
            },
        );
        Ok(id)
    }

    /// Record `account`'s current MKR balance as a yes vote and pay the
    /// voting reward. A repeat vote overwrites the earlier weight.
    pub fn vote(&mut self, id: ProposalId, account: &str) -> EngineResult<Wad> {
        check_user_account(account)?;
        let proposal = self.proposal(id)?;
        if proposal.state != ProposalState::Voting || self.clock >= proposal.voting_deadline {
            return Err(EngineError::VotingClosed(id));
        }
        let weight = self.mkr.balance_of(account);
        let reward = self.params.voting_reward;
        let rewards = self.totals.mkr_rewards.checked_add(reward)?;
        self.mkr.mint(account, reward)?;
        self.totals.mkr_rewards = rewards;
        self.proposals
            .get_mut(&id)
            .expect("checked")
            .tally
            .insert(account.to_string(), weight);
        Ok(weight)
    }

    /// Decide the proposal and, if it passed, apply the change. A passed
    /// change that fails to apply leaves the proposal PASSED and returns the
    /// error.
    pub fn tally_and_execute(&mut self, id: ProposalId) -> EngineResult<TallyOutcome> {
        let proposal = self.proposal(id)?;
        if proposal.state != ProposalState::Voting {
            return Err(EngineError::AlreadyTallied(id));
        }
        if self.clock < proposal.voting_deadline {
            return Err(EngineError::VotingOpen(id));
        }
        let yes_weight = proposal.yes_weight().ok_or(crate::numerics::MathError::Overflow)?;
        let supply = self.mkr.total_supply();
        let change = proposal.change.clone();
        let passed = passes(yes_weight, supply, self.params.pass_threshold);

        let state = if !passed {
            ProposalState::Failed
        } else {
            self.proposals.get_mut(&id).expect("checked").state = ProposalState::Passed;
            self.apply_change(&change)?;
            ProposalState::Executed
        };
        self.proposals.get_mut(&id).expect("checked").state = state;
        Ok(TallyOutcome {
            proposal: id,
            yes_weight,
            supply,
            state,
        })
    }

    fn apply_change(&mut self, change: &ParamChange) -> EngineResult<()> {
        self.check_change(change)?;
        let now = self.clock;
        match change {
            ParamChange::LiquidationRatio { collateral, value } => {
                self.collaterals.get_mut(collateral).expect("checked").liquidation_ratio = *value;
            }
            ParamChange::StabilityRate { collateral, annual } => {
                self.ensure_live()?;
                let rate = annual_to_per_second(*annual)?;
                self.collaterals
                    .get_mut(collateral)
                    .expect("checked")
                    .fees
                    .set_rate(rate, now)?;
            }
            ParamChange::DsrRate { annual } => {
                self.ensure_live()?;
                self.set_dsr_rate(annual_to_per_second(*annual)?, now)?;
            }
            ParamChange::DebtCeiling { collateral, value } => {
                self.collaterals.get_mut(collateral).expect("checked").debt_ceiling = *value;
            }
            ParamChange::LiquidationPenalty { collateral, value } => {
                self.collaterals
                    .get_mut(collateral)
                    .expect("checked")
                    .liquidation_penalty = *value;
            }
            ParamChange::AddCollateralType { spec } => {
                self.ensure_live()?;
                self.register_collateral(spec)?;
            }
            ParamChange::TriggerShutdown { reason } => {
                let reason = if reason.is_empty() { "governance" } else { reason };
                self.trigger_shutdown(reason)?;
            }
        }
        Ok(())
    }

    /// Spend surplus Dai above the configured floor on MKR from the keeper
    /// pool at the oracle price, and burn it.
    pub fn buy_and_burn(&mut self) -> EngineResult<BuyAndBurn> {
        let surplus = self.surplus();
        if surplus <= self.params.buy_and_burn_floor {
            return Ok(BuyAndBurn::default());
        }
        let plan = plan_buy_and_burn(
            surplus,
            self.params.buy_and_burn_floor,
            self.feed.price(MKR)?,
            self.mkr.balance_of(KEEPER_ACCOUNT),
        )?;
        let burned = self.totals.mkr_burned.checked_add(plan.mkr_burned)?;
        self.dai.transfer(SURPLUS_ACCOUNT, KEEPER_ACCOUNT, plan.dai_spent)?;
        self.mkr.burn(KEEPER_ACCOUNT, plan.mkr_burned)?;
        self.totals.mkr_burned = burned;
        Ok(plan)
    }
}
