//! Fixed-point arithmetic for amounts (`Wad`, 18 decimals) and per-second
//! rate factors (`Ray`, 27 decimals).
//!
//! Every multiplication and division floors toward zero unless the function
//! name says otherwise. Intermediate products are computed in 256 bits so the
//! only failure mode is a result that does not fit back into 128 bits.

mod decimal;

use std::fmt;
use std::str::FromStr;

use ethnum::U256;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use decimal::DecimalError;

pub const WAD_SCALE: u128 = 1_000_000_000_000_000_000;
pub const RAY_SCALE: u128 = 1_000_000_000_000_000_000_000_000_000;
/// `RAY_SCALE / WAD_SCALE`
const WAD_TO_RAY: u128 = 1_000_000_000;

pub const SECONDS_PER_YEAR: u64 = 31_536_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic underflow")]
    Underflow,
    #[error("division by zero")]
    DivisionByZero,
}

/// `floor(a * b / d)` with a 256-bit intermediate.
pub fn mul_div_floor(a: u128, b: u128, d: u128) -> Result<u128, MathError> {
    if d == 0 {
        return Err(MathError::DivisionByZero);
    }
    narrow(U256::from(a) * U256::from(b) / U256::from(d))
}

/// `ceil(a * b / d)` with a 256-bit intermediate.
pub fn mul_div_ceil(a: u128, b: u128, d: u128) -> Result<u128, MathError> {
    if d == 0 {
        return Err(MathError::DivisionByZero);
    }
    let product = U256::from(a) * U256::from(b);
    let d = U256::from(d);
    let mut q = product / d;
    if product % d != U256::ZERO {
        q += U256::ONE;
    }
    narrow(q)
}

/// Exact comparison `a * b >= c * d` without rounding.
pub fn product_ge(a: u128, b: u128, c: u128, d: u128) -> bool {
    U256::from(a) * U256::from(b) >= U256::from(c) * U256::from(d)
}

fn narrow(v: U256) -> Result<u128, MathError> {
    let (hi, lo) = v.into_words();
    if hi != 0 {
        return Err(MathError::Overflow);
    }
    Ok(lo)
}

/// An unsigned quantity scaled by 10^18: token amounts, USD values, ratios.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wad(u128);

// checked arithmetic; the operator traits cannot return errors
#[allow(clippy::should_implement_trait)]
impl Wad {
    pub const ZERO: Wad = Wad(0);
    pub const ONE: Wad = Wad(WAD_SCALE);
    pub const MAX: Wad = Wad(u128::MAX);
    /// Smallest representable increment.
    pub const ULP: Wad = Wad(1);

    pub const fn from_raw(raw: u128) -> Self {
        Wad(raw)
    }

    pub const fn raw(self) -> u128 {
        self.0
    }

    /// Whole units, e.g. `Wad::from_int(150)` is 150.0.
    pub fn from_int(units: u64) -> Self {
        Wad(units as u128 * WAD_SCALE)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Wad) -> Result<Wad, MathError> {
        self.0.checked_add(rhs.0).map(Wad).ok_or(MathError::Overflow)
    }

    pub fn checked_sub(self, rhs: Wad) -> Result<Wad, MathError> {
        self.0.checked_sub(rhs.0).map(Wad).ok_or(MathError::Underflow)
    }

    pub fn saturating_sub(self, rhs: Wad) -> Wad {
        Wad(self.0.saturating_sub(rhs.0))
    }

    pub fn mul(self, rhs: Wad) -> Result<Wad, MathError> {
        wad_mul(self, rhs)
    }

    pub fn mul_ceil(self, rhs: Wad) -> Result<Wad, MathError> {
        mul_div_ceil(self.0, rhs.0, WAD_SCALE).map(Wad)
    }

    pub fn div(self, rhs: Wad) -> Result<Wad, MathError> {
        wad_div(self, rhs)
    }

    pub fn div_ceil(self, rhs: Wad) -> Result<Wad, MathError> {
        mul_div_ceil(self.0, WAD_SCALE, rhs.0).map(Wad)
    }

    /// `self * factor`, floored, for applying an accumulator to a normalized amount.
    pub fn mul_ray(self, factor: Ray) -> Result<Wad, MathError> {
        mul_div_floor(self.0, factor.0, RAY_SCALE).map(Wad)
    }

    /// `self / factor`, floored.
    pub fn div_ray(self, factor: Ray) -> Result<Wad, MathError> {
        mul_div_floor(self.0, RAY_SCALE, factor.0).map(Wad)
    }

    /// `self / factor`, rounded up.
    pub fn div_ray_ceil(self, factor: Ray) -> Result<Wad, MathError> {
        mul_div_ceil(self.0, RAY_SCALE, factor.0).map(Wad)
    }

    /// `floor(self * num / den)` on raw values; scale-free pro-rata split.
    pub fn mul_div(self, num: Wad, den: Wad) -> Result<Wad, MathError> {
        mul_div_floor(self.0, num.0, den.0).map(Wad)
    }

    pub fn to_ray(self) -> Result<Ray, MathError> {
        self.0.checked_mul(WAD_TO_RAY).map(Ray).ok_or(MathError::Overflow)
    }

    /// Lossy conversion for display and reporting only.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / WAD_SCALE as f64
    }
}

/// `floor(a * b / 10^18)`.
pub fn wad_mul(a: Wad, b: Wad) -> Result<Wad, MathError> {
    mul_div_floor(a.0, b.0, WAD_SCALE).map(Wad)
}

/// `floor(a * 10^18 / b)`.
pub fn wad_div(a: Wad, b: Wad) -> Result<Wad, MathError> {
    mul_div_floor(a.0, WAD_SCALE, b.0).map(Wad)
}

/// A rate factor or accumulator scaled by 10^27.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ray(u128);

// checked arithmetic; the operator traits cannot return errors
#[allow(clippy::should_implement_trait)]
impl Ray {
    pub const ONE: Ray = Ray(RAY_SCALE);

    pub const fn from_raw(raw: u128) -> Self {
        Ray(raw)
    }

    pub const fn raw(self) -> u128 {
        self.0
    }

    pub fn mul(self, rhs: Ray) -> Result<Ray, MathError> {
        ray_mul(self, rhs)
    }

    pub fn pow(self, n: u64) -> Result<Ray, MathError> {
        ray_pow(self, n)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / RAY_SCALE as f64
    }
}

/// `floor(a * b / 10^27)`.
pub fn ray_mul(a: Ray, b: Ray) -> Result<Ray, MathError> {
    mul_div_floor(a.0, b.0, RAY_SCALE).map(Ray)
}

/// `base^n` by square-and-multiply, flooring after every product.
pub fn ray_pow(base: Ray, mut n: u64) -> Result<Ray, MathError> {
    let mut acc = Ray::ONE;
    let mut square = base;
    while n > 0 {
        if n & 1 == 1 {
            acc = ray_mul(acc, square)?;
        }
        n >>= 1;
        if n > 0 {
            square = ray_mul(square, square)?;
        }
    }
    Ok(acc)
}

/// Per-second factor `r` such that `r^SECONDS_PER_YEAR` is the largest value
/// not exceeding `1 + annual_rate`.
///
/// Binary search over Ray values. Since `r^n >= 1 + n(r - 1)`, the answer lies
/// in `[1, 1 + annual_rate / n]`.
pub fn annual_to_per_second(annual_rate: Wad) -> Result<Ray, MathError> {
    if annual_rate.is_zero() {
        return Ok(Ray::ONE);
    }
    let target = Ray::ONE
        .0
        .checked_add(annual_rate.to_ray()?.0)
        .ok_or(MathError::Overflow)?;
    let mut lo = RAY_SCALE;
    let mut hi = RAY_SCALE + annual_rate.to_ray()?.0 / SECONDS_PER_YEAR as u128 + 1;
    // invariant: pow(lo) <= target < pow(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match ray_pow(Ray(mid), SECONDS_PER_YEAR) {
            Ok(v) if v.0 <= target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(Ray(lo))
}

macro_rules! fixed_point_traits {
    ($ty:ident, $decimals:expr) => {
        impl $ty {
            pub const DECIMALS: u32 = $decimals;
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&decimal::format(self.0, $decimals))
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($ty), self)
            }
        }

        impl FromStr for $ty {
            type Err = DecimalError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                decimal::parse(s, $decimals).map($ty)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

fixed_point_traits!(Wad, 18);
fixed_point_traits!(Ray, 27);
