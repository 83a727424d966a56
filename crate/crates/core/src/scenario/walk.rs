//! Seeded geometric random walks in pure integer arithmetic, so an expansion
//! is identical on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::{mul_div_floor, MathError, Wad, WAD_SCALE};

/// Largest per-step log return magnitude, in whole units.
const MAX_LOG_RETURN: i128 = 40;
const HALVINGS: u32 = 8;
const TAYLOR_TERMS: u128 = 24;

/// A signed 18-decimal fixed-point value, used for drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignedWad(pub i128);

impl FromStr for SignedWad {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negative, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let magnitude: Wad = digits.parse().map_err(|e| format!("{s:?}: {e}"))?;
        let raw = i128::try_from(magnitude.raw()).map_err(|_| format!("{s:?}: out of range"))?;
        Ok(SignedWad(if negative { -raw } else { raw }))
    }
}

impl fmt::Display for SignedWad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}", Wad::from_raw(self.0.unsigned_abs()))
    }
}

impl Serialize for SignedWad {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignedWad {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Multiply the price at `step` by `factor` after the random move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shock {
    pub step: u64,
    pub factor: Wad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub asset: String,
    pub start: Wad,
    /// Number of prices emitted, the first being `start`.
    pub steps: u64,
    /// Seconds between prices.
    #[serde(default = "one")]
    pub interval: u64,
    /// Per-step log drift.
    #[serde(default)]
    pub drift: SignedWad,
    /// Per-step log volatility.
    #[serde(default)]
    pub vol: Wad,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shocks: Vec<Shock>,
}

fn one() -> u64 {
    1
}

impl WalkSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.start.is_zero() {
            return Err("random_walk: start must be positive".into());
        }
        if self.steps == 0 {
            return Err("random_walk: steps must be at least 1".into());
        }
        if self.interval == 0 && self.steps > 1 {
            return Err("random_walk: interval must be positive".into());
        }
        if self.interval.checked_mul(self.steps).is_none() {
            return Err("random_walk: time span overflows".into());
        }
        if self.vol > Wad::ONE || self.drift.0.unsigned_abs() > WAD_SCALE {
            return Err("random_walk: drift and vol must be within [-1, 1] per step".into());
        }
        for s in &self.shocks {
            if s.step >= self.steps || s.factor.is_zero() {
                return Err(format!("random_walk: bad shock at step {}", s.step));
            }
        }
        Ok(())
    }

    /// Prices for steps `0..steps`. Stream `walk_index` of the seeded
    /// generator keeps walks in one scenario independent.
    pub fn prices(&self, seed: u64, walk_index: u64) -> Vec<Wad> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(walk_index);
        let mut price = self.start;
        let mut out = Vec::with_capacity(self.steps as usize);
        for step in 0..self.steps {
            if step > 0 {
                let z = irwin_hall(&mut rng);
                let vol = self.vol.raw() as i128;
                let wad = WAD_SCALE as i128;
                let log_return = self.drift.0 - vol * vol / wad / 2 + vol * z / wad;
                let factor = exp_wad(log_return).unwrap_or(Wad::MAX);
                price = price.mul(factor).unwrap_or(Wad::MAX);
            }
            for shock in self.shocks.iter().filter(|s| s.step == step) {
                price = price.mul(shock.factor).unwrap_or(Wad::MAX);
            }
            price = price.max(Wad::ULP);
            out.push(price);
        }
        out
    }
}

/// Approximately standard normal: the sum of twelve uniforms minus six.
fn irwin_hall(rng: &mut ChaCha8Rng) -> i128 {
    let sum: u128 = (0..12).map(|_| (rng.next_u64() as u128 * WAD_SCALE) >> 64).sum();
    sum as i128 - 6 * WAD_SCALE as i128
}

/// `e^x` for a signed wad `x`, clamped to `|x| <= 40`.
pub fn exp_wad(x: i128) -> Result<Wad, MathError> {
    let limit = MAX_LOG_RETURN * WAD_SCALE as i128;
    let x = x.clamp(-limit, limit);
    if x < 0 {
        return Wad::ONE.div(exp_wad(-x)?);
    }
    let r = (x as u128) >> HALVINGS;
    let mut term = WAD_SCALE;
    let mut sum = WAD_SCALE;
    for k in 1..=TAYLOR_TERMS {
        term = mul_div_floor(term, r, k * WAD_SCALE)?;
        if term == 0 {
            break;
        }
        sum += term;
    }
    let mut result = Wad::from_raw(sum);
    for _ in 0..HALVINGS {
        result = result.mul(result)?;
    }
    Ok(result)
}
