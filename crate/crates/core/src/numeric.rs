//! Exact arithmetic for currency and rates.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A currency amount held as an exact rational.
///
/// Serializes as an exact decimal string when the value terminates in base
/// ten, otherwise as `numerator/denominator`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(BigRational);

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Money(BigRational::new(num.into(), den.into()))
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// `self × count`.
    pub fn times(&self, count: u64) -> Money {
        Money(&self.0 * BigRational::from_integer(count.into()))
    }

    /// `self / count`; `None` when `count` is zero.
    pub fn per(&self, count: u64) -> Option<Money> {
        (count > 0).then(|| Money(&self.0 / BigRational::from_integer(count.into())))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering rounded half away from zero.
    pub fn round_to(&self, decimals: u32) -> String {
        round_decimal(&self.0, decimals)
    }

    /// Exact decimal digits if the denominator divides a power of ten.
    fn exact_decimal(&self) -> Option<String> {
        let mut den = self.0.denom().clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let (mut twos, mut fives) = (0u32, 0u32);
        while den.is_even() {
            den /= &two;
            twos += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            fives += 1;
        }
        (den == BigInt::from(1)).then(|| round_decimal(&self.0, twos.max(fives)))
    }
}

fn round_decimal(value: &BigRational, decimals: u32) -> String {
    let scale = BigInt::from(10).pow(decimals);
    let scaled = value.abs() * BigRational::from_integer(scale.clone());
    let half = BigRational::new(1.into(), 2.into());
    let rounded = (scaled + half).floor().to_integer();
    let (int_part, frac_part) = rounded.div_rem(&scale);
    let sign = if value.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    if decimals == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{frac:0>width$}",
            frac = frac_part.to_string(),
            width = decimals as usize
        )
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact_decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl FromStr for Money {
    type Err = Error;

    /// Accepts `12`, `0.0005`, `-1.5` or `1/3`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Validation(format!("not an exact amount: {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Money(BigRational::new(n, d)));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let denom = BigInt::from(10).pow(frac_part.len() as u32);
        let value = BigRational::new(numer, denom);
        Ok(Money(if neg { -value } else { value }))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Money> for &'a Money {
    type Output = Money;
    fn add(self, rhs: &Money) -> Money {
        Money(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        self.0 += &rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, m| acc + m)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        let mut total = Money::zero();
        for m in iter {
            total += m;
        }
        total
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(i) => i.to_string(),
            // Shortest round-trip form, so `0.41` stays `0.41`.
            Raw::Float(f) => format!("{f}"),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact fraction of counts, e.g. a success rate.
pub type Rate = Ratio<u64>;

/// `rate` as a percentage string with `decimals` places, rounded half up.
pub fn format_percent(rate: &Rate, decimals: u32) -> String {
    let value = BigRational::new((*rate.numer()).into(), (*rate.denom()).into())
        * BigRational::from_integer(100.into());
    format!("{}%", round_decimal(&value, decimals))
}

pub fn rate_to_f64(rate: &Rate) -> f64 {
    *rate.numer() as f64 / *rate.denom() as f64
}
