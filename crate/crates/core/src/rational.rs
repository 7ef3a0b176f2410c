//! Exact rational helpers shared by the weight and group modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-0.125"` or `"1e-3"` exactly.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in `{s}`")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in `{s}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Q::new(n, d));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Q> {
    let bad = || Error::Parse(format!("not a rational number: `{s}`"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32 - 1;
    let ten = BigInt::from(10);
    let mut value = Q::from_integer(digits);
    if scale >= 0 {
        value *= Q::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Q::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -value } else { value })
}

/// Exact conversion of a finite float.
pub fn from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::NumericInput(format!("non-finite value {x}")))
}

pub fn to_f64(x: &Q) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            // numerator/denominator individually overflow; scale down both
            let n = x.numer().to_f64().unwrap_or(f64::NAN);
            let d = x.denom().to_f64().unwrap_or(f64::NAN);
            if n.is_finite() && d.is_finite() {
                n / d
            } else {
                let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000);
                let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
                let d = (x.denom() >> shift).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }
}

/// Formats as `p/q`, or `p` for integers.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Closest fraction with denominator at most `max_den` if it lies within `tol` of `x`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    for den in 1..=max_den {
        let num = (x * den as f64).round();
        if (x - num / den as f64).abs() <= tol {
            return Some(Q::new(BigInt::from(num as i64), BigInt::from(den)));
        }
    }
    None
}

/// Scales a rational vector to a primitive integer vector with first nonzero entry positive.
pub fn primitive_direction(v: &[Q]) -> Vec<BigInt> {
    use num_integer::Integer;
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let mut ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() {
        for x in &mut ints {
            *x /= &g;
        }
    }
    if let Some(first) = ints.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in &mut ints {
                *x = -x.clone();
            }
        }
    }
    ints
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_q("1/2").unwrap(), q_frac(1, 2));
        assert_eq!(parse_q("-3/6").unwrap(), q_frac(-1, 2));
        assert_eq!(parse_q("0.125").unwrap(), q_frac(1, 8));
        assert_eq!(parse_q("-2").unwrap(), q(-2));
        assert_eq!(parse_q("1e-3").unwrap(), q_frac(1, 1000));
        assert_eq!(parse_q("2.5E2").unwrap(), q(250));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
        assert!(parse_q(".").is_err());
    }

    #[test]
    fn rationalize_small_denominators() {
        assert_eq!(rationalize(0.5 + 1e-12, 64, 1e-9), Some(q_frac(1, 2)));
        assert_eq!(rationalize(-2.0 / 3.0, 64, 1e-9), Some(q_frac(-2, 3)));
        assert_eq!(rationalize(std::f64::consts::PI, 64, 1e-9), None);
    }

    #[test]
    fn primitive_direction_is_canonical() {
        let v = vec![q_frac(-1, 2), q_frac(3, 4), q(0)];
        let p = primitive_direction(&v);
        assert_eq!(p, vec![BigInt::from(2), BigInt::from(-3), BigInt::from(0)]);
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Q::from_integer(num_traits::pow(BigInt::from(2), 1100));
        let x = big.clone() / (big * q(3));
        assert!((to_f64(&x) - 1.0 / 3.0).abs() < 1e-15);
    }
}
