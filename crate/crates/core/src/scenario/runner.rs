use serde::Serialize;
use serde_json::{json, Value};

use super::{Op, Scenario, ScenarioError, TimedEvent};
use crate::config::Config;
use crate::engine::Engine;
use crate::error::{EngineError, EngineResult};
use crate::governance::TallyOutcome;
use crate::liquidation::{DebtAuctionPlan, Settlement};
use crate::numerics::Wad;
use crate::shutdown::ShutdownState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Run the full ledger audit after every event.
    pub audit_each_event: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { audit_each_event: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventOutcome {
    pub t: u64,
    pub seq: u64,
    pub line: usize,
    pub op: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub genesis_hash: String,
    pub events: Vec<EventOutcome>,
    pub settlements: Vec<Settlement>,
    pub debt_auctions: Vec<DebtAuctionPlan>,
    pub proposals: Vec<TallyOutcome>,
    pub shutdown: Option<ShutdownState>,
    pub dai_supply: Wad,
    pub mkr_supply: Wad,
    pub system_debt: Wad,
    pub final_tvl: Wad,
    pub final_clock: u64,
    pub final_state_hash: String,
}

impl RunReport {
    fn empty(seed: u64, genesis_hash: String) -> Self {
        Self {
            seed,
            genesis_hash,
            events: Vec::new(),
            settlements: Vec::new(),
            debt_auctions: Vec::new(),
            proposals: Vec::new(),
            shutdown: None,
            dai_supply: Wad::ZERO,
            mkr_supply: Wad::ZERO,
            system_debt: Wad::ZERO,
            final_tvl: Wad::ZERO,
            final_clock: 0,
            final_state_hash: String::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn errors(&self) -> impl Iterator<Item = &EventOutcome> {
        self.events.iter().filter(|e| !e.ok)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub engine: Engine,
}

pub fn run(scenario: &Scenario, config: &Config, seed: u64) -> Result<RunOutput, ScenarioError> {
    run_with(scenario, config, seed, RunOptions::default())
}

pub fn run_with(
    scenario: &Scenario,
    config: &Config,
    seed: u64,
    options: RunOptions,
) -> Result<RunOutput, ScenarioError> {
    let mut engine = Engine::new(config)?;
    let mut report = RunReport::empty(seed, engine.state_hash());
    for event in scenario.expand(seed) {
        let outcome = match engine.advance_to(event.t) {
            Ok(()) => apply(&mut engine, &event, &mut report),
            Err(e) => Err(e),
        };
        report.events.push(match outcome {
            Ok(result) => EventOutcome {
                t: event.t,
                seq: event.seq,
                line: event.line,
                op: event.op.name(),
                ok: true,
                error: None,
                detail: None,
                result,
            },
            Err(e) => EventOutcome {
                t: event.t,
                seq: event.seq,
                line: event.line,
                op: event.op.name(),
                ok: false,
                error: Some(e.code()),
                detail: Some(e.to_string()),
                result: Value::Null,
            },
        });
        if options.audit_each_event {
            engine.audit().map_err(|violation| ScenarioError::Audit {
                line: event.line,
                op: event.op.name().to_string(),
                violation,
            })?;
        }
    }
    engine.audit().map_err(|violation| ScenarioError::Audit {
        line: 0,
        op: "end".into(),
        violation,
    })?;
    report.shutdown = engine.shutdown_state().cloned();
    report.dai_supply = engine.dai().total_supply();
    report.mkr_supply = engine.mkr().total_supply();
    report.system_debt = engine.system_debt();
    report.final_tvl = engine.protocol_tvl().unwrap_or(Wad::MAX);
    report.final_clock = engine.clock();
    report.final_state_hash = engine.state_hash();
    Ok(RunOutput { report, engine })
}

fn apply(engine: &mut Engine, event: &TimedEvent, report: &mut RunReport) -> EngineResult<Value> {
    let none = Value::Null;
    Ok(match &event.op {
        Op::Faucet {
            account,
            collateral,
            amount,
        } => engine.faucet(account, collateral, *amount).map(|_| none)?,
        Op::SetPrice { asset, price } => engine.set_price(asset, *price).map(|_| none)?,
        Op::OpenVault { owner, collateral } => json!({ "vault": engine.open_vault(owner, collateral)? }),
        Op::Deposit { owner, vault, amount } => engine.deposit_collateral(owner, *vault, *amount).map(|_| none)?,
        Op::Generate { owner, vault, amount } => engine.generate_dai(owner, *vault, *amount).map(|_| none)?,
        Op::Repay { owner, vault, amount } => to_value(engine.repay_dai(owner, *vault, *amount)?),
        Op::Withdraw { owner, vault, amount } => engine.withdraw_collateral(owner, *vault, *amount).map(|_| none)?,
        Op::Close { owner, vault } => engine.close_vault(owner, *vault).map(|_| none)?,
        Op::DsrDeposit { account, amount } => engine.dsr_deposit(account, *amount).map(|_| none)?,
        Op::DsrWithdraw { account, amount } => engine.dsr_withdraw(account, *amount).map(|_| none)?,
        Op::Propose { change, deadline } => json!({ "proposal": engine.propose(change.clone(), *deadline)? }),
        Op::Vote { proposal, account } => json!({ "weight": engine.vote(*proposal, account)? }),
        Op::Tally { proposal } => {
            let outcome = engine.tally_and_execute(*proposal)?;
            report.proposals.push(outcome.clone());
            to_value(outcome)
        }
        Op::TriggerShutdown { reason } => engine.trigger_shutdown(reason).map(|_| none)?,
        Op::WithdrawExcess { owner, vault } => json!({ "returned": engine.withdraw_excess_collateral(owner, *vault)? }),
        Op::Redeem { account, amount } => to_value(engine.redeem_dai(account, *amount)?),
        Op::FundKeeper { account, amount } => engine.fund_keeper(account, *amount).map(|_| none)?,
        Op::ScanAndLiquidate {} => {
            let round = engine.scan_and_liquidate()?;
            report.settlements.extend(round.settlements.iter().cloned());
            report.debt_auctions.extend(round.debt_auction);
            json!({ "started": round.started, "unsettled": round.unsettled })
        }
        Op::Checkpoint {} => none,
        Op::Transfer {
            token,
            from,
            to,
            amount,
        } => engine.transfer(*token, from, to, *amount).map(|_| none)?,
        Op::BuyAndBurn {} => to_value(engine.buy_and_burn()?),
        Op::RandomWalk(_) => {
            return Err(EngineError::InvalidParameter(
                "random_walk must be expanded before it is applied".into(),
            ))
        }
    })
}

/// Apply one already-expanded operation at the engine's current clock.
pub fn apply_op(engine: &mut Engine, op: &Op) -> EngineResult<Value> {
    let event = TimedEvent {
        t: engine.clock(),
        seq: 0,
        line: 0,
        op: op.clone(),
    };
    let mut scratch = RunReport::empty(0, String::new());
    apply(engine, &event, &mut scratch)
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("outcome serializes")
}

/// Rerun and compare the final state hash with `expected`.
pub fn replay_check(scenario: &Scenario, config: &Config, seed: u64, expected: &str) -> Result<bool, ScenarioError> {
    let out = run(scenario, config, seed)?;
    Ok(out.report.final_state_hash.eq_ignore_ascii_case(expected.trim()))
}
