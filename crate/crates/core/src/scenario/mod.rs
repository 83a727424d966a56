//! Scenario files: JSON Lines, one `{"t", "seq", "op", "args"}` event per
//! line, applied in `(t, seq)` order by the runner.

mod runner;
mod walk;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governance::ParamChange;
use crate::market::Token;
use crate::numerics::Wad;
use crate::{ProposalId, VaultId};

pub use runner::{apply_op, replay_check, run, run_with, EventOutcome, RunOptions, RunOutput, RunReport};
pub use walk::{exp_wad, Shock, SignedWad, WalkSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("audit failed after line {line} ({op}): {violation}")]
    Audit {
        line: usize,
        op: String,
        violation: crate::audit::AuditViolation,
    },
    #[error("invalid config: {0}")]
    Config(#[from] crate::ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Faucet {
        account: String,
        collateral: String,
        amount: Wad,
    },
    SetPrice {
        asset: String,
        price: Wad,
    },
    OpenVault {
        owner: String,
        collateral: String,
    },
    Deposit {
        owner: String,
        vault: VaultId,
        amount: Wad,
    },
    Generate {
        owner: String,
        vault: VaultId,
        amount: Wad,
    },
    Repay {
        owner: String,
        vault: VaultId,
        amount: Wad,
    },
    Withdraw {
        owner: String,
        vault: VaultId,
        amount: Wad,
    },
    Close {
        owner: String,
        vault: VaultId,
    },
    DsrDeposit {
        account: String,
        amount: Wad,
    },
    DsrWithdraw {
        account: String,
        amount: Wad,
    },
    Propose {
        change: ParamChange,
        deadline: u64,
    },
    Vote {
        proposal: ProposalId,
        account: String,
    },
    Tally {
        proposal: ProposalId,
    },
    TriggerShutdown {
        #[serde(default)]
        reason: String,
    },
    WithdrawExcess {
        owner: String,
        vault: VaultId,
    },
    Redeem {
        account: String,
        amount: Wad,
    },
    FundKeeper {
        account: String,
        amount: Wad,
    },
    ScanAndLiquidate {},
    Checkpoint {},
    Transfer {
        token: Token,
        from: String,
        to: String,
        amount: Wad,
    },
    BuyAndBurn {},
    /// Expanded into `set_price` events before the run.
    RandomWalk(WalkSpec),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Faucet { .. } => "faucet",
            Op::SetPrice { .. } => "set_price",
            Op::OpenVault { .. } => "open_vault",
            Op::Deposit { .. } => "deposit",
            Op::Generate { .. } => "generate",
            Op::Repay { .. } => "repay",
            Op::Withdraw { .. } => "withdraw",
            Op::Close { .. } => "close",
            Op::DsrDeposit { .. } => "dsr_deposit",
            Op::DsrWithdraw { .. } => "dsr_withdraw",
            Op::Propose { .. } => "propose",
            Op::Vote { .. } => "vote",
            Op::Tally { .. } => "tally",
            Op::TriggerShutdown { .. } => "trigger_shutdown",
            Op::WithdrawExcess { .. } => "withdraw_excess",
            Op::Redeem { .. } => "redeem",
            Op::FundKeeper { .. } => "fund_keeper",
            Op::ScanAndLiquidate {} => "scan_and_liquidate",
            Op::Checkpoint {} => "checkpoint",
            Op::Transfer { .. } => "transfer",
            Op::BuyAndBurn {} => "buy_and_burn",
            Op::RandomWalk(_) => "random_walk",
        }
    }
}

/// One scenario line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub t: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub op: Op,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    /// Events with their 1-based source line, in file order.
    pub events: Vec<(usize, ScenarioEvent)>,
}

/// An event ready to apply. `line` is 0 for events built in code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedEvent {
    pub t: u64,
    pub seq: u64,
    pub line: usize,
    pub op: Op,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    t: u64,
    seq: u64,
    op: String,
    #[serde(default = "empty_args")]
    args: serde_json::Value,
}

fn empty_args() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut events = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError::Parse { line, message };
            let raw: RawLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let tagged = serde_json::json!({ "op": raw.op, "args": raw.args });
            let op: Op = serde_json::from_value(tagged).map_err(|e| err(format!("{}: {e}", raw.op)))?;
            if let Op::RandomWalk(spec) = &op {
                spec.validate().map_err(err)?;
            }
            if let Some(first) = seen.insert((raw.t, raw.seq), line) {
                return Err(err(format!(
                    "duplicate (t, seq) = ({}, {}), first on line {first}",
                    raw.t, raw.seq
                )));
            }
            events.push((
                line,
                ScenarioEvent {
                    t: raw.t,
                    seq: raw.seq,
                    op,
                },
            ));
        }
        Ok(Self { events })
    }

    pub fn from_events(events: impl IntoIterator<Item = ScenarioEvent>) -> Self {
        Self {
            events: events.into_iter().enumerate().map(|(i, e)| (i + 1, e)).collect(),
        }
    }

    /// JSON Lines text that parses back to this scenario.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (_, e) in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Expand random walks with `seed` and sort into application order.
    pub fn expand(&self, seed: u64) -> Vec<TimedEvent> {
        let mut out = Vec::with_capacity(self.events.len());
        let mut walk_index = 0u64;
        for (line, e) in &self.events {
            match &e.op {
                Op::RandomWalk(spec) => {
                    for (k, price) in spec.prices(seed, walk_index).into_iter().enumerate() {
                        out.push(TimedEvent {
                            t: e.t + k as u64 * spec.interval,
                            seq: e.seq,
                            line: *line,
                            op: Op::SetPrice {
                                asset: spec.asset.clone(),
                                price,
                            },
                        });
                    }
                    walk_index += 1;
                }
                op => out.push(TimedEvent {
                    t: e.t,
                    seq: e.seq,
                    line: *line,
                    op: op.clone(),
                }),
            }
        }
        out.sort_by_key(|e| (e.t, e.seq, e.line));
        out
    }

    pub fn has_random_events(&self) -> bool {
        self.events.iter().any(|(_, e)| matches!(e.op, Op::RandomWalk(_)))
    }
}
