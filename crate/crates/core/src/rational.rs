//! Exact arithmetic helpers.
//!
//! Every quantity in the lab (values, bids, prices, smoothness constants) is
//! an exact rational. The only irrational constants that show up are
//! `log2(k)` terms in approximation factors; those are replaced by certified
//! rational lower bounds, which can only make the checks that use them
//! harder to pass.

use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::Error;

/// Exact rational number used throughout the crate.
pub type Rational = num_rational::Ratio<i128>;

/// Denominator used for non-exact `log2` lower bounds.
const LOG2_DENOMINATOR_BITS: u32 = 16;

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub fn ratio(numer: i128, denom: i128) -> Rational {
    Rational::new(numer, denom)
}

/// Parses `p/q`, `p`, or a finite decimal such as `0.125`.
pub fn parse_rational(text: &str) -> Result<Rational, Error> {
    let s = text.trim();
    let bad = || Error::Parse(format!("invalid rational `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = i128::from_str(p.trim()).map_err(|_| bad())?;
        let q = i128::from_str(q.trim()).map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 30 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_val = if whole.is_empty() || whole == "-" {
            0
        } else {
            i128::from_str(whole).map_err(|_| bad())?
        };
        let denom = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let frac_val = i128::from_str(frac).map_err(|_| bad())?;
        let mag = Rational::new(whole_val.abs() * denom + frac_val, denom);
        return Ok(if negative { -mag } else { mag });
    }
    i128::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

/// Formats as `p` or `p/q`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// `H_k = 1 + 1/2 + ... + 1/k`, with `H_0 = 0`.
pub fn harmonic(k: usize) -> Rational {
    (1..=k as i128).map(|j| Rational::new(1, j)).sum()
}

/// Certified rational lower bound on `log2(x)` for `x >= 1`.
///
/// Exact when `x` is a power of two. Otherwise returns `p / 2^16` with
/// `2^p <= x^(2^16)` verified in big-integer arithmetic.
pub fn log2_lower_bound(x: u64) -> Rational {
    assert!(x >= 1, "log2 of zero");
    if x.is_power_of_two() {
        return int(x.trailing_zeros() as i128);
    }
    let q: u64 = 1 << LOG2_DENOMINATOR_BITS;
    let estimate = (x as f64).log2() * q as f64;
    let mut p = estimate.floor() as u64;
    let lhs = {
        // x^(2^16) by repeated squaring
        let mut acc = BigUint::from(x);
        for _ in 0..LOG2_DENOMINATOR_BITS {
            acc = &acc * &acc;
        }
        acc
    };
    while BigUint::one() << p > lhs {
        p -= 1;
    }
    Rational::new(p as i128, q as i128)
}

/// Approximation factor of the bucketing construction on `k` positive
/// items: `2(log2(k-1) + 1)` for `k >= 2`, and `1` for a single item.
///
/// For `k - 1` not a power of two the log term is the certified lower
/// bound from [`log2_lower_bound`].
pub fn bucketing_beta(k: usize) -> Rational {
    if k <= 1 {
        Rational::one()
    } else {
        int(2) * (log2_lower_bound(k as u64 - 1) + Rational::one())
    }
}

pub fn is_nonnegative(r: &Rational) -> bool {
    !r.is_negative()
}

pub fn max_of(a: Rational, b: Rational) -> Rational {
    if a >= b {
        a
    } else {
        b
    }
}

/// Smallest `t >= 1` with `value * 2^t >= top`, for `0 < value <= top`.
pub(crate) fn halving_index(value: &Rational, top: &Rational) -> u32 {
    debug_assert!(value.is_positive() && value <= top);
    let mut t = 1u32;
    let mut scaled = *value * int(2);
    while scaled < *top {
        scaled *= int(2);
        t += 1;
    }
    t
}
