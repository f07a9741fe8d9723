//! Exact fixed-point amounts and positive rational rates.
//!
//! [`Amount`] stores a signed value scaled by 10^18 in a 256-bit integer.
//! Addition and subtraction are exact. Multiplication and division round
//! half-to-even at the 18th fractional digit unless a floor variant is
//! requested. Intermediate products that do not fit in 256 bits fall back
//! to arbitrary precision, so no operation silently wraps.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use ethnum::I256;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Number of fractional decimal digits carried by [`Amount`].
pub const DECIMALS: u32 = 18;

const SCALE_I128: i128 = 1_000_000_000_000_000_000;

#[inline]
fn scale() -> I256 {
    I256::new(SCALE_I128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rounding {
    Floor,
    HalfEven,
}

fn to_big(v: I256) -> BigInt {
    BigInt::from_signed_bytes_le(&v.to_le_bytes())
}

fn from_big(v: &BigInt) -> Option<I256> {
    let bytes = v.to_signed_bytes_le();
    if bytes.len() > 32 {
        return None;
    }
    let fill = if v.is_negative() { 0xff } else { 0x00 };
    let mut buf = [fill; 32];
    buf[..bytes.len()].copy_from_slice(&bytes);
    Some(I256::from_le_bytes(buf))
}

fn round_quotient_big(num: &BigInt, den: &BigInt, mode: Rounding) -> BigInt {
    debug_assert!(den.is_positive());
    let (q, r) = num.div_mod_floor(den);
    match mode {
        Rounding::Floor => q,
        Rounding::HalfEven => {
            let twice: BigInt = &r * 2;
            match twice.cmp(den) {
                Ordering::Greater => q + 1,
                Ordering::Less => q,
                Ordering::Equal if q.is_odd() => q + 1,
                Ordering::Equal => q,
            }
        }
    }
}

fn round_quotient(num: I256, den: I256, mode: Rounding) -> I256 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match mode {
        Rounding::Floor => q,
        Rounding::HalfEven => {
            let rest = den - r;
            match r.cmp(&rest) {
                Ordering::Greater => q + 1,
                Ordering::Less => q,
                Ordering::Equal if q & I256::ONE == I256::ONE => q + 1,
                Ordering::Equal => q,
            }
        }
    }
}

/// `a * b / den` with the requested rounding; `den` must be positive.
pub(crate) fn mul_div(a: I256, b: I256, den: I256, mode: Rounding) -> I256 {
    if let Some(prod) = a.checked_mul(b) {
        return round_quotient(prod, den, mode);
    }
    let q = round_quotient_big(&(to_big(a) * to_big(b)), &to_big(den), mode);
    from_big(&q).expect("amount overflow: result exceeds 256 bits")
}

/// Big-integer form of `num / den` rounding, for callers with wider operands.
pub(crate) fn big_quotient(num: &BigInt, den: &BigInt, mode: Rounding) -> I256 {
    let q = round_quotient_big(num, den, mode);
    from_big(&q).expect("amount overflow: result exceeds 256 bits")
}

pub(crate) fn big(v: I256) -> BigInt {
    to_big(v)
}

/// A signed decimal quantity with 18 fractional digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(I256);

impl Amount {
    pub const ZERO: Amount = Amount(I256::ZERO);
    /// One unit in the last (18th) fractional place.
    pub const UNIT: Amount = Amount(I256::ONE);

    pub fn one() -> Amount {
        Amount(scale())
    }

    pub const fn from_raw_const(raw: i128) -> Amount {
        Amount(I256::new(raw))
    }

    pub fn from_raw(raw: I256) -> Amount {
        Amount(raw)
    }

    /// The underlying integer, scaled by 10^18.
    pub fn raw(self) -> I256 {
        self.0
    }

    pub fn from_int(v: i64) -> Amount {
        Amount(I256::new(v as i128) * scale())
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn abs(self) -> Amount {
        Amount(self.0.abs())
    }

    /// Product rounded half-to-even.
    pub fn mul(self, rhs: Amount) -> Amount {
        Amount(mul_div(self.0, rhs.0, scale(), Rounding::HalfEven))
    }

    /// Product rounded toward negative infinity.
    pub fn mul_floor(self, rhs: Amount) -> Amount {
        Amount(mul_div(self.0, rhs.0, scale(), Rounding::Floor))
    }

    /// Quotient rounded half-to-even; `None` on division by zero.
    pub fn checked_div(self, rhs: Amount) -> Option<Amount> {
        if rhs.0 == 0 {
            return None;
        }
        let (num, den) = if rhs.0 < 0 { (-self.0, -rhs.0) } else { (self.0, rhs.0) };
        Some(Amount(mul_div(num, scale(), den, Rounding::HalfEven)))
    }

    pub fn checked_div_floor(self, rhs: Amount) -> Option<Amount> {
        if rhs.0 == 0 {
            return None;
        }
        let (num, den) = if rhs.0 < 0 { (-self.0, -rhs.0) } else { (self.0, rhs.0) };
        Some(Amount(mul_div(num, scale(), den, Rounding::Floor)))
    }

    /// Arithmetic midpoint `(self + other) / 2`, rounded half-to-even.
    pub fn midpoint(self, other: Amount) -> Amount {
        Amount(round_quotient(self.0 + other.0, I256::new(2), Rounding::HalfEven))
    }

    /// Multiply by a rational rate, rounding half-to-even.
    pub fn mul_rate(self, rate: &Rate) -> Amount {
        let (n, d) = rate.parts();
        Amount(mul_div(self.0, I256::new(n), I256::new(d), Rounding::HalfEven))
    }

    pub fn min(self, other: Amount) -> Amount {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Amount) -> Amount {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Lossy conversion for display and foreign bindings only.
    pub fn to_f64(self) -> f64 {
        self.0.as_f64() / SCALE_I128 as f64
    }

    /// Nearest representable amount to `v`; used to seed numeric searches.
    pub fn from_f64_lossy(v: f64) -> Amount {
        if !v.is_finite() {
            return Amount::ZERO;
        }
        // 10^18 * v loses precision past ~15 significant digits; good enough
        // for bracketing since exact values are re-evaluated afterwards.
        let s = format!("{:.18}", v);
        s.parse().unwrap_or(Amount::ZERO)
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl Neg for Amount {
    type Output = Amount;
    fn neg(self) -> Amount {
        Amount(-self.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 -= rhs.0;
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + *b)
    }
}

impl FromStr for Amount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Amount, Error> {
        let bad = || Error::InvalidAmount(s.to_string());
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int_part.is_empty()
            || !digits(int_part)
            || !digits(frac_part)
            || (body.contains('.') && frac_part.is_empty())
            || frac_part.len() > DECIMALS as usize
        {
            return Err(bad());
        }
        let mut padded = String::with_capacity(int_part.len() + DECIMALS as usize);
        padded.push_str(int_part);
        padded.push_str(frac_part);
        for _ in frac_part.len()..DECIMALS as usize {
            padded.push('0');
        }
        let raw = I256::from_str_radix(&padded, 10).map_err(|_| bad())?;
        Ok(Amount(if negative { -raw } else { raw }))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let negative = self.0 < 0;
        let mag = self.0.unsigned_abs();
        let scale = ethnum::U256::new(SCALE_I128 as u128);
        let int = mag / scale;
        let frac = mag % scale;
        if negative {
            f.write_str("-")?;
        }
        write!(f, "{}", int)?;
        if frac != 0 {
            let s = format!("{:0>18}", frac.to_string());
            write!(f, ".{}", s.trim_end_matches('0'))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({})", self)
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Amount, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A strictly positive exact rational, e.g. a conversion or bridge rate.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate(Ratio<i128>);

impl Rate {
    pub fn one() -> Rate {
        Rate(Ratio::one())
    }

    /// Build from numerator and denominator; both must be positive.
    pub fn new(num: i128, den: i128) -> Result<Rate, Error> {
        if num <= 0 || den <= 0 {
            return Err(Error::InvalidRate(format!("{num}/{den}")));
        }
        Ok(Rate(Ratio::new(num, den)))
    }

    /// Reduced `(numerator, denominator)`.
    pub fn parts(&self) -> (i128, i128) {
        (*self.0.numer(), *self.0.denom())
    }

    pub fn recip(&self) -> Rate {
        Rate(self.0.recip())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// Whether `self * other == 1` exactly.
    pub fn is_reciprocal_of(&self, other: &Rate) -> bool {
        let (a, b) = self.parts();
        let (c, d) = other.parts();
        I256::new(a) * I256::new(c) == I256::new(b) * I256::new(d)
    }

    /// Multiply both sides by a positive integer factor (numerator only).
    pub fn scaled(&self, factor: i128) -> Result<Rate, Error> {
        let (n, d) = self.parts();
        let n = n
            .checked_mul(factor)
            .ok_or_else(|| Error::InvalidRate(format!("{n}*{factor}/{d}")))?;
        Rate::new(n, d)
    }

    pub fn to_f64(&self) -> f64 {
        let (n, d) = self.parts();
        n as f64 / d as f64
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Rate) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Rate) -> Ordering {
        let (a, b) = self.parts();
        let (c, d) = other.parts();
        (I256::new(a) * I256::new(d)).cmp(&(I256::new(c) * I256::new(b)))
    }
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rate, Error> {
        let bad = || Error::InvalidRate(s.to_string());
        let parse = |p: &str| -> Result<i128, Error> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            p.parse::<i128>().map_err(|_| bad())
        };
        let (n, d) = match (s.split_once('/'), s.split_once('.')) {
            (Some((n, d)), _) => (parse(n)?, parse(d)?),
            (None, Some((whole, frac))) if frac.len() <= 36 => {
                let scale = 10i128.pow(frac.len() as u32);
                let n = parse(whole)?.checked_mul(scale).and_then(|w| w.checked_add(parse(frac).ok()?));
                (n.ok_or_else(bad)?, scale)
            }
            _ => (parse(s)?, 1),
        };
        Rate::new(n, d).map_err(|_| bad())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.parts();
        write!(f, "{n}/{d}")
    }
}

impl fmt::Debug for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rate({})", self)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Rate, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
