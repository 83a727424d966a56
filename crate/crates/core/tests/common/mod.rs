#![allow(dead_code)]

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use makersim::governance::{ParamChange, ProposalState};
use makersim::liquidation::AuctionState;
use makersim::market::Token;
use makersim::scenario::{apply_op, Op, Scenario, ScenarioEvent};
use makersim::vault::VaultState;
use makersim::{Config, Engine, Wad};

pub const CONFIG_JSON: &str = include_str!("../fixtures/config.json");
pub const USERS: [&str; 6] = ["alice", "bob", "carol", "dave", "erin", "frank"];
pub const VOTERS: [&str; 3] = ["mia", "noah", "olga"];
pub const COLLATERALS: [&str; 2] = ["ETH", "WBTC"];

pub fn config() -> Config {
    Config::from_json(CONFIG_JSON).unwrap()
}

pub fn w(s: &str) -> Wad {
    s.parse().unwrap()
}

pub fn big(x: Wad) -> BigUint {
    BigUint::from(x.raw())
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub events: usize,
    /// Event index at which collateral prices crash.
    pub crash_at: Option<usize>,
    /// Event index at which shutdown is triggered.
    pub shutdown_at: Option<usize>,
    pub max_dt: u64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            events: 500,
            crash_at: None,
            shutdown_at: None,
            max_dt: 86_400,
        }
    }
}

/// Builds a scenario by driving a live engine, so most generated events are
/// plausible. The engine is only a guide; the scenario is the product.
pub struct Generator {
    rng: ChaCha8Rng,
    pub engine: Engine,
    events: Vec<ScenarioEvent>,
    t: u64,
    seq: u64,
}

impl Generator {
    pub fn new(config: &Config, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            engine: Engine::new(config).unwrap(),
            events: Vec::new(),
            t: 0,
            seq: 0,
        }
    }

    pub fn finish(self) -> Scenario {
        Scenario::from_events(self.events)
    }

    pub fn push(&mut self, op: Op) {
        self.engine.advance_to(self.t).unwrap();
        let _ = apply_op(&mut self.engine, &op);
        self.events.push(ScenarioEvent {
            t: self.t,
            seq: self.seq,
            op,
        });
        self.seq += 1;
    }

    pub fn tick(&mut self, max_dt: u64) {
        self.t += self.rng.gen_range(1..=max_dt);
        self.seq = 0;
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.rng.gen_range(0..items.len())]
    }

    /// `amount * k / 1000` for a random `k` in `0..=max_permille`.
    fn frac(&mut self, amount: Wad, max_permille: u128) -> Wad {
        let k = self.rng.gen_range(0..=max_permille);
        amount.mul_div(Wad::from_raw(k), Wad::from_raw(1000)).unwrap_or(amount)
    }

    fn random_amount(&mut self, whole: u64) -> Wad {
        Wad::from_raw(self.rng.gen_range(1..=whole as u128 * 1_000_000) * 1_000_000_000_000)
    }

    fn pick_vault(&mut self) -> Option<(makersim::VaultId, String)> {
        let vaults: Vec<_> = self.engine.vaults().map(|v| (v.id, v.owner.clone())).collect();
        if vaults.is_empty() {
            return None;
        }
        let (id, owner) = vaults[self.rng.gen_range(0..vaults.len())].clone();
        let owner = if self.rng.gen_bool(0.05) {
            self.pick(&USERS).to_string()
        } else {
            owner
        };
        Some((id, owner))
    }

    fn move_price(&mut self, asset: &str, lo: u64, hi: u64) {
        let price = self.engine.price(asset).unwrap();
        let factor = Wad::from_raw(self.rng.gen_range(lo..=hi) as u128 * 1_000_000_000_000_000);
        let price = price.mul(factor).unwrap().max(Wad::from_int(1));
        self.push(Op::SetPrice {
            asset: asset.into(),
            price,
        });
    }

    pub fn crash(&mut self) {
        self.move_price("ETH", 300, 450);
        self.move_price("WBTC", 350, 500);
    }

    pub fn live_step(&mut self) {
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=7 => {
                let account = self.pick(&USERS);
                let collateral = self.pick(&COLLATERALS);
                let amount = self.random_amount(if collateral == "ETH" { 40 } else { 3 });
                self.push(Op::Faucet {
                    account: account.into(),
                    collateral: collateral.into(),
                    amount,
                });
            }
            8..=14 => {
                let asset = self.pick(&["ETH", "WBTC", "MKR"]);
                self.move_price(asset, 850, 1150);
            }
            15..=19 => {
                let owner = self.pick(&USERS);
                let collateral = self.pick(&COLLATERALS);
                self.push(Op::OpenVault {
                    owner: owner.into(),
                    collateral: collateral.into(),
                });
            }
            20..=31 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    let collateral = self.engine.vault(vault).unwrap().collateral.clone();
                    let free = self.engine.collateral_ledger().free_balance(&collateral, &owner);
                    let amount = self.frac(free, 1000);
                    self.push(Op::Deposit { owner, vault, amount });
                }
            }
            32..=45 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    let max = self.engine.max_generatable(vault).unwrap_or(Wad::ZERO);
                    let amount = self.frac(max, 1020);
                    self.push(Op::Generate { owner, vault, amount });
                }
            }
            46..=55 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    let debt = self.engine.current_debt(vault).unwrap();
                    let have = self.engine.dai().balance_of(&owner);
                    let amount = if self.rng.gen_bool(0.4) {
                        debt.min(have)
                    } else {
                        self.frac(debt.min(have), 1000)
                    };
                    self.push(Op::Repay { owner, vault, amount });
                }
            }
            56..=61 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    let v = self.engine.vault(vault).unwrap();
                    let max = if v.normalized_debt.is_zero() { 1000 } else { 250 };
                    let amount = self.frac(v.locked_collateral, max);
                    self.push(Op::Withdraw { owner, vault, amount });
                }
            }
            62..=63 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    self.push(Op::Close { owner, vault });
                }
            }
            64..=68 => {
                let account = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(account), 800);
                self.push(Op::DsrDeposit {
                    account: account.into(),
                    amount,
                });
            }
            69..=73 => {
                let account = self.pick(&USERS);
                let balance = self.engine.savings_balance(account).unwrap();
                let amount = if self.rng.gen_bool(0.3) {
                    balance
                } else {
                    self.frac(balance, 1000)
                };
                self.push(Op::DsrWithdraw {
                    account: account.into(),
                    amount,
                });
            }
            74..=76 => {
                let from = self.pick(&USERS);
                let to = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(from), 500);
                self.push(Op::Transfer {
                    token: Token::Dai,
                    from: from.into(),
                    to: to.into(),
                    amount,
                });
            }
            77..=80 => {
                let account = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(account), 600);
                self.push(Op::FundKeeper {
                    account: account.into(),
                    amount,
                });
            }
            81..=82 => {
                let change = match self.rng.gen_range(0..4) {
                    0 => ParamChange::DsrRate {
                        annual: Wad::from_raw(self.rng.gen_range(0..80) * 1_000_000_000_000_000),
                    },
                    1 => ParamChange::StabilityRate {
                        collateral: self.pick(&COLLATERALS).into(),
                        annual: Wad::from_raw(self.rng.gen_range(0..120) * 1_000_000_000_000_000),
                    },
                    2 => ParamChange::LiquidationRatio {
                        collateral: self.pick(&COLLATERALS).into(),
                        value: Wad::from_raw(self.rng.gen_range(1200..2000) * 1_000_000_000_000_000),
                    },
                    _ => ParamChange::LiquidationPenalty {
                        collateral: self.pick(&COLLATERALS).into(),
                        value: Wad::from_raw(self.rng.gen_range(0..200) * 1_000_000_000_000_000),
                    },
                };
                let deadline = self.t + self.rng.gen_range(100_000..=3_000_000);
                self.push(Op::Propose { change, deadline });
            }
            83..=86 => {
                let open: Vec<_> = self
                    .engine
                    .proposals()
                    .filter(|p| p.state == ProposalState::Voting && p.voting_deadline > self.t)
                    .map(|p| p.id)
                    .collect();
                if !open.is_empty() {
                    let proposal = open[self.rng.gen_range(0..open.len())];
                    let account = self.pick(&VOTERS);
                    self.push(Op::Vote {
                        proposal,
                        account: account.into(),
                    });
                }
            }
            87..=88 => {
                let due: Vec<_> = self
                    .engine
                    .proposals()
                    .filter(|p| p.state == ProposalState::Voting && p.voting_deadline <= self.t)
                    .map(|p| p.id)
                    .collect();
                if let Some(proposal) = due.first().copied() {
                    self.push(Op::Tally { proposal });
                }
            }
            89..=93 => self.push(Op::ScanAndLiquidate {}),
            94..=95 => self.push(Op::BuyAndBurn {}),
            _ => self.push(Op::Checkpoint {}),
        }
    }

    /// Mix of settlement operations and attempts at forbidden ones.
    pub fn shutdown_step(&mut self) {
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=29 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    self.push(Op::WithdrawExcess { owner, vault });
                }
            }
            30..=49 => {
                let account = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(account), 1000);
                self.push(Op::Redeem {
                    account: account.into(),
                    amount,
                });
            }
            50..=59 => {
                if let Some((vault, owner)) = self.pick_vault() {
                    let amount = self.random_amount(100);
                    self.push(Op::Generate { owner, vault, amount });
                }
            }
            60..=64 => {
                let owner = self.pick(&USERS);
                self.push(Op::OpenVault {
                    owner: owner.into(),
                    collateral: "ETH".into(),
                });
            }
            65..=69 => {
                let asset = self.pick(&["ETH", "WBTC", "MKR"]);
                let price = self.random_amount(5000);
                self.push(Op::SetPrice {
                    asset: asset.into(),
                    price,
                });
            }
            70..=74 => self.push(Op::ScanAndLiquidate {}),
            75..=79 => {
                let account = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(account), 500);
                self.push(Op::DsrDeposit {
                    account: account.into(),
                    amount,
                });
            }
            80..=84 => {
                let account = self.pick(&USERS);
                let amount = self.random_amount(10);
                self.push(Op::Faucet {
                    account: account.into(),
                    collateral: "ETH".into(),
                    amount,
                });
            }
            85..=89 => {
                let from = self.pick(&USERS);
                let to = self.pick(&USERS);
                let amount = self.frac(self.engine.dai().balance_of(from), 500);
                self.push(Op::Transfer {
                    token: Token::Dai,
                    from: from.into(),
                    to: to.into(),
                    amount,
                });
            }
            90..=94 => self.push(Op::TriggerShutdown { reason: "again".into() }),
            _ => self.push(Op::Checkpoint {}),
        }
    }
}

pub fn random_scenario(config: &Config, seed: u64, opts: GenOptions) -> Scenario {
    let mut g = Generator::new(config, seed);
    for i in 0..opts.events {
        if g.rng.gen_bool(0.3) {
            g.tick(opts.max_dt);
        }
        if opts.crash_at == Some(i) {
            g.crash();
        } else if opts.shutdown_at == Some(i) {
            g.push(Op::TriggerShutdown {
                reason: "severely broken peg".into(),
            });
        } else if g.engine.is_shutdown() {
            g.shutdown_step();
        } else {
            g.live_step();
        }
    }
    g.finish()
}

/// Recompute every ledger identity from public views with big integers.
pub fn check_ledgers(e: &Engine) -> Result<(), String> {
    let sum = |it: &mut dyn Iterator<Item = Wad>| it.fold(BigUint::default(), |acc, x| acc + big(x));

    for ledger in [e.dai(), e.mkr()] {
        let total = sum(&mut ledger.balances().map(|(_, b)| b));
        if total != big(ledger.total_supply()) {
            return Err(format!("{:?}: Σ balances {total} != supply", ledger.token()));
        }
    }

    let t = e.totals();
    if big(e.dai().total_supply()) + big(t.dai_burned) != big(t.dai_minted) {
        return Err("Dai supply does not match minted - burned".into());
    }
    if big(e.mkr().total_supply()) + big(t.mkr_burned)
        != big(t.mkr_genesis) + big(t.mkr_rewards) + big(t.mkr_debt_auction)
    {
        return Err("MKR supply does not match genesis + rewards + debt mints - burns".into());
    }

    let active = || e.auctions().filter(|a| a.state == AuctionState::Active);
    let (settled, redeemed) = e
        .shutdown_state()
        .map_or((Wad::ZERO, Wad::ZERO), |s| (s.settled_principal, s.redeemed));
    let backing = sum(&mut e.vaults().map(|v| v.principal))
        + sum(&mut active().map(|a| a.principal))
        + big(e.system_debt())
        + big(settled);
    if big(e.dai().total_supply()) + big(redeemed) != backing {
        return Err("backing identity broken".into());
    }

    for c in e.collateral_types().map(|ct| ct.id.clone()) {
        let free = sum(&mut e.collateral_ledger().free_balances(&c).map(|(_, b)| b));
        let locked = sum(&mut e.vaults().filter(|v| v.collateral == c).map(|v| v.locked_collateral));
        let escrow = sum(&mut active().filter(|a| a.collateral == c).map(|a| a.lot));
        let retained = e
            .shutdown_state()
            .and_then(|s| s.retained.get(&c).copied())
            .map_or(BigUint::default(), big);
        if free + locked + escrow + retained != big(e.collateral_ledger().issued(&c)) {
            return Err(format!("{c}: collateral not conserved"));
        }
    }

    let chi = BigUint::from(e.pot().chi.value.raw());
    let ray = BigUint::from(10u32).pow(27);
    let owed = e
        .pot()
        .accounts
        .values()
        .fold(BigUint::default(), |acc, n| acc + big(*n) * &chi / &ray);
    if owed != big(e.dai().balance_of("@pot")) {
        return Err("pot does not hold what depositors are owed".into());
    }

    for v in e.vaults() {
        if v.state == VaultState::Closed && !(v.locked_collateral.is_zero() && v.normalized_debt.is_zero()) {
            return Err(format!("closed vault {} not empty", v.id));
        }
    }
    Ok(())
}
