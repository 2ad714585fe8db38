//! Exact rational arithmetic helpers shared by every module.
//!
//! All quantities in this crate (distances, scales, function values,
//! thresholds) are exact `BigRational`s. Nothing here ever rounds; the
//! root helpers return certified over/under-approximations instead of
//! approximate roots.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Write as _;

pub type Rat = num_rational::BigRational;

/// Rational from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational from a fraction.
pub fn ratio(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// A nonnegative value extended with `+∞`, used for Lebesgue numbers and
/// distances to the empty set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ext {
    Fin(Rat),
    Inf,
}

impl Ext {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Ext::Inf)
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Ext::Fin(v) => Some(v),
            Ext::Inf => None,
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Ext::*;
        match (self, other) {
            (Inf, Inf) => std::cmp::Ordering::Equal,
            (Inf, Fin(_)) => std::cmp::Ordering::Greater,
            (Fin(_), Inf) => std::cmp::Ordering::Less,
            (Fin(a), Fin(b)) => a.cmp(b),
        }
    }
}

impl std::fmt::Display for Ext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ext::Fin(v) => write!(f, "{}", format_rat(v)),
            Ext::Inf => write!(f, "inf"),
        }
    }
}

/// Renders a rational as `p/q`, or just `p` when the denominator is 1.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        let mut s = String::new();
        let _ = write!(s, "{}/{}", r.numer(), r.denom());
        s
    }
}

/// Parses `p/q`, plain integers and decimal fractions (`2.5` -> `5/2`)
/// exactly. Decimal input is interpreted as an exact decimal fraction.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".to_string());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in `{s}`"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in `{s}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let i: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| format!("bad decimal `{s}`"))?
        };
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad decimal `{s}`"));
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let f: BigInt = if frac.is_empty() {
            BigInt::zero()
        } else {
            frac.parse().map_err(|_| format!("bad decimal `{s}`"))?
        };
        let whole = &i * &scale + BigInt::from(sign) * f;
        return Ok(Rat::new(whole, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("bad number `{s}`"))?;
    Ok(Rat::from_integer(n))
}

/// `x^p` for a `BigUint` exponent. Fails when the exponent is too large to
/// materialize the value.
pub fn pow_rat(x: &Rat, p: &BigUint) -> Result<Rat, String> {
    if p.is_zero() {
        return Ok(Rat::one());
    }
    if x.is_one() {
        return Ok(Rat::one());
    }
    if x.is_zero() {
        return Ok(Rat::zero());
    }
    let e = p
        .to_u64()
        .ok_or_else(|| format!("exponent {p} too large to evaluate"))?;
    // Guard against astronomically large results before computing them.
    let bits = x.numer().bits().max(x.denom().bits());
    if bits.saturating_mul(e) > 80_000_000 {
        return Err(format!("value x^{e} would exceed the size budget"));
    }
    let mut base = x.clone();
    let mut acc = Rat::one();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Ok(acc)
}

/// Smallest certified point `t > 0` with `t^d >= r`. Exact for `d = 1`;
/// the minimal integer solution for moderate `d`; a certified power of two
/// for huge exponents. Never returns a `t` that fails the inequality.
pub fn root_ceil(r: &Rat, d: &BigUint) -> Rat {
    if r <= &Rat::one() {
        return Rat::one();
    }
    if d.is_one() {
        return r.clone();
    }
    if let Some(d32) = d.to_u32() {
        // ceil(r) as an integer, then the minimal integer d-th root:
        // t^d >= n/q  <=>  t^d * q >= n.
        let ceil_r = r.ceil().to_integer();
        let mut t = num_integer::Roots::nth_root(&ceil_r, d32);
        while t.pow(d32) * r.denom() < *r.numer() {
            t += 1;
        }
        return Rat::from_integer(t);
    }
    // Huge exponent: t = 2^ceil(bits(r)/d) certified via bit counts.
    let bits = BigUint::from(r.ceil().to_integer().magnitude().bits());
    let (q, rem) = bits.div_rem(d);
    let e = if rem.is_zero() { q } else { q + 1u32 };
    let e = e.to_u64().unwrap_or(1).max(1);
    Rat::from_integer(BigInt::from(2).pow(e as u32))
}

/// Largest certified point `0 < t <= hi` with `t^d <= r` (for near-zero
/// thresholds). Exact for `d = 1`, a power of two otherwise.
pub fn root_floor_pos(r: &Rat, d: &BigUint, hi: &Rat) -> Option<Rat> {
    if r <= &Rat::zero() {
        return None;
    }
    if d.is_one() {
        return Some(if r < hi { r.clone() } else { hi.clone() });
    }
    if r >= &Rat::one() {
        return Some(hi.clone().min(Rat::one()));
    }
    // r < 1: find power of two 2^-k with (2^-k)^d <= r, i.e. k*d >= bits(1/r).
    let inv = r.recip();
    let bits = inv.ceil().to_integer().magnitude().bits() + 1;
    let dd = d.to_u64()?;
    let k = bits.div_ceil(dd).max(1);
    if k > 4096 {
        return None;
    }
    let t = Rat::new(BigInt::one(), BigInt::from(2).pow(k as u32));
    let check = pow_rat(&t, d).ok()?;
    if &check <= r {
        Some(if &t < hi { t } else { hi.clone() })
    } else {
        None
    }
}

/// Evenly spaced rational grid `lo, lo+step, ..., <= hi`.
pub fn rat_grid(lo: &Rat, hi: &Rat, step: &Rat) -> Vec<Rat> {
    let mut out = Vec::new();
    let mut x = lo.clone();
    while &x <= hi {
        out.push(x.clone());
        x += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_formats() {
        assert_eq!(parse_rat("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rat("7").unwrap(), rat(7));
        assert_eq!(parse_rat("2.5").unwrap(), ratio(5, 2));
        assert_eq!(parse_rat("0.125").unwrap(), ratio(1, 8));
        assert_eq!(parse_rat("-1.5").unwrap(), ratio(-3, 2));
        assert!(parse_rat("1/0").is_err());
        assert_eq!(format_rat(&ratio(6, 4)), "3/2");
        assert_eq!(format_rat(&rat(5)), "5");
    }

    #[test]
    fn pow_and_roots() {
        assert_eq!(pow_rat(&rat(3), &BigUint::from(4u32)).unwrap(), rat(81));
        assert_eq!(pow_rat(&ratio(1, 2), &BigUint::from(3u32)).unwrap(), ratio(1, 8));
        // d = 1 is exact.
        assert_eq!(root_ceil(&rat(100), &BigUint::from(1u32)), rat(100));
        // minimal integer root: t^2 >= 10 -> 4.
        assert_eq!(root_ceil(&rat(10), &BigUint::from(2u32)), rat(4));
        assert_eq!(root_ceil(&rat(16), &BigUint::from(2u32)), rat(4));
        let t = root_floor_pos(&ratio(1, 10), &BigUint::from(2u32), &rat(1)).unwrap();
        assert!(pow_rat(&t, &BigUint::from(2u32)).unwrap() <= ratio(1, 10));
        assert!(t > Rat::zero());
    }

    #[test]
    fn ext_ordering() {
        assert!(Ext::Inf > Ext::Fin(rat(1_000_000)));
        assert_eq!(Ext::Fin(rat(2)).max(Ext::Fin(rat(3))), Ext::Fin(rat(3)));
    }
}
