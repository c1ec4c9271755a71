//! Exact-rational helpers: threshold comparisons, directed bounds on e^x,
//! decimal parsing and string serialisation.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// `count >= fraction * k`, compared without rounding.
pub fn meets(count: usize, fraction: &Ratio<u64>, k: usize) -> bool {
    count as u128 * *fraction.denom() as u128 >= *fraction.numer() as u128 * k as u128
}

pub fn int(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A lower bound on `e^x` for `x >= 0` (Taylor partial sum).
pub fn exp_lower(x: &BigRational) -> BigRational {
    assert!(!x.is_negative(), "exp_lower expects x >= 0");
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for i in 1..=8 {
        term = &term * x / int(i);
        sum += &term;
    }
    sum
}

/// An upper bound on `e^x` for `0 <= x <= 1`: Taylor partial sum plus
/// `3 x^9 / 9!` for the tail.
pub fn exp_upper(x: &BigRational) -> BigRational {
    assert!(
        !x.is_negative() && *x <= BigRational::one(),
        "exp_upper expects 0 <= x <= 1"
    );
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for i in 1..=8 {
        term = &term * x / int(i);
        sum += &term;
    }
    sum + int(3) * &term * x / int(9)
}

/// Parses `"0.2"`, `"-3"`, `"1/8"` or `"1e-3"` exactly.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let num: BigInt = a.trim().parse().ok()?;
        let den: BigInt = b.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (mantissa, exp) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("0{whole}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(all);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// The largest multiple of `2^-bits` not above `x` (zero for non-finite `x`).
pub fn dyadic_floor(x: f64, bits: u32) -> BigRational {
    let scaled = BigRational::from_float((x * 2f64.powi(bits as i32)).floor()).unwrap_or_default();
    scaled / BigRational::from_integer(BigInt::one() << bits)
}

pub fn show(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::show(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_rational(&text).ok_or_else(|| serde::de::Error::custom(format!("not a rational: {text:?}")))
    }
}

/// Serde adapter for `Option<BigRational>`.
pub mod serde_opt_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(x) => s.serialize_some(&super::show(x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(text) => super::parse_rational(&text)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("not a rational: {text:?}"))),
        }
    }
}

/// Serde adapter writing big integers as decimal strings.
pub mod serde_big {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        text.parse()
            .map_err(|_| serde::de::Error::custom(format!("not an integer: {text:?}")))
    }
}
