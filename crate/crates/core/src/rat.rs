//! Exact rational scalars.
//!
//! Every symbolic computation in this crate runs over arbitrary-precision
//! rationals; floating point appears only in the asymptotic-realization
//! module. `Rat` values are always in reduced canonical form with positive
//! denominator (maintained by the backing implementation).

use num::bigint::BigInt;
use num::traits::{Signed, ToPrimitive, Zero};

use crate::error::{KernelError, Result};

/// Arbitrary-precision rational number.
pub type Rat = num::BigRational;

/// The rational `n`.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// The rational `p/q`. Panics if `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    assert!(q != 0, "rational with zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Parse `"p"` or `"p/q"` (optional leading sign, arbitrary precision).
pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || KernelError::Schema(format!("malformed rational {s:?} (expected \"p\" or \"p/q\")"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad());
    }
    match s.split_once('/') {
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rat::from_integer(p))
        }
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
    }
}

/// Render as `"p"` or `"p/q"`, matching the input grammar of [`parse_rat`].
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest `f64`; exact when representable.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Absolute value.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

/// `n!` as a rational.
pub fn factorial(n: u32) -> Rat {
    let mut acc = BigInt::from(1);
    for k in 2..=n as u64 {
        acc *= BigInt::from(k);
    }
    Rat::from_integer(acc)
}

/// Binomial coefficient `C(n, k)` as a rational (0 when `k > n`).
pub fn binomial(n: u32, k: u32) -> Rat {
    if k > n {
        return Rat::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::from(1);
    let mut den = BigInt::from(1);
    for i in 0..k as u64 {
        num *= BigInt::from(n as u64 - i);
        den *= BigInt::from(i + 1);
    }
    Rat::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "7", "-3", "1/2", "-22/7"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(fmt_rat(&r), s);
        }
        // Non-canonical input normalizes.
        assert_eq!(fmt_rat(&parse_rat("4/6").unwrap()), "2/3");
        assert_eq!(fmt_rat(&parse_rat("3/-6").unwrap()), "-1/2");
    }

    #[test]
    fn parse_rejects_garbage() {
        for s in ["", "1/0", "a/b", "1.5", "1/2/3"] {
            assert!(parse_rat(s).is_err(), "accepted {s:?}");
        }
    }

    #[test]
    fn factorial_and_binomial_small_values() {
        assert_eq!(factorial(0), rat_int(1));
        assert_eq!(factorial(5), rat_int(120));
        assert_eq!(binomial(6, 2), rat_int(15));
        assert_eq!(binomial(3, 5), rat_int(0));
    }
}
