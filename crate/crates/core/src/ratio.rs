//! Exact rational helpers shared by the placement and analysis code.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn frac(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"p/q"`, an integer, or a terminating decimal such as `"0.05"`.
pub fn parse(text: &str) -> Result<Rational> {
    let bad = || Error::InvalidArgument(format!("not a rational number: {text:?}"));
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, decimals)) = text.split_once('.') {
        if decimals.is_empty() || !decimals.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            BigInt::from_str(whole).map_err(|_| bad())?
        };
        let scale = BigInt::from(10).pow(decimals.len() as u32);
        let mut fraction =
            Rational::new(BigInt::from_str(decimals).map_err(|_| bad())?, scale);
        if negative {
            fraction = -fraction;
        }
        return Ok(Rational::from_integer(whole) + fraction);
    }
    BigInt::from_str(text)
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// `C(n, k)` as an exact integer.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn binomial_q(n: usize, k: usize) -> Rational {
    Rational::from_integer(binomial(n, k))
}

/// `value^exp` with `0^0 = 1`.
pub fn pow(value: &Rational, exp: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= value;
    }
    acc
}

/// Storage ratio `mu` in `[0, 1]`, kept exact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StorageRatio(Rational);

impl StorageRatio {
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() || value > Rational::one() {
            return Err(Error::InvalidArgument(format!(
                "storage ratio {value} outside [0, 1]"
            )));
        }
        Ok(StorageRatio(value))
    }

    pub fn from_fraction(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        StorageRatio::new(frac(numer, denom))
    }

    pub fn zero() -> Self {
        StorageRatio(Rational::zero())
    }

    pub fn one() -> Self {
        StorageRatio(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }

    /// Per-database bit budget `floor(mu * K * L)`.
    pub fn budget(&self, files: usize, file_bits: usize) -> usize {
        let total = Rational::from_integer(BigInt::from(files * file_bits));
        (&self.0 * total)
            .floor()
            .to_integer()
            .to_usize()
            .expect("budget fits in usize")
    }
}

impl FromStr for StorageRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StorageRatio::new(parse(s)?)
    }
}

impl fmt::Display for StorageRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("1/3").unwrap(), frac(1, 3));
        assert_eq!(parse("0.5").unwrap(), frac(1, 2));
        assert_eq!(parse("0.05").unwrap(), frac(1, 20));
        assert_eq!(parse(".25").unwrap(), frac(1, 4));
        assert_eq!(parse("2").unwrap(), int(2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("0.").is_err());
    }

    #[test]
    fn storage_ratio_range_and_budget() {
        assert!("3/2".parse::<StorageRatio>().is_err());
        assert!("-1/2".parse::<StorageRatio>().is_err());
        let third: StorageRatio = "1/3".parse().unwrap();
        assert_eq!(third.budget(3, 4), 4);
        assert_eq!(third.budget(2, 5), 3);
        assert_eq!(StorageRatio::one().budget(3, 7), 21);
        assert_eq!(StorageRatio::zero().budget(3, 7), 0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(30, 15), BigInt::from(155_117_520));
        assert_eq!(binomial(3, 4), BigInt::zero());
        assert_eq!(pow(&int(0), 0), int(1));
    }
}
