//! Exact rationals and the one-point extension `+∞` used for unbounded
//! budgets and demands.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number in canonical form (reduced, positive denominator).
pub type Rat = BigRational;

/// Shorthand constructor, `rat(3, 2) == 3/2`.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"`. Whitespace around the parts is tolerated.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| format!("invalid rational numerator in {s:?}"))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| format!("invalid rational denominator in {s:?}"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Rat::new(num, den))
}

/// Canonical text form: `"p/q"`, or `"p"` when the denominator is one.
pub fn fmt_rat(r: &Rat) -> String {
    r.to_string()
}

/// Lossy conversion for display and statistics only.
pub fn to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Largest rational `g` such that every input is an integer multiple of `g`.
/// Returns `None` for an empty input or when every input is zero.
pub fn rational_gcd<'a>(values: impl IntoIterator<Item = &'a Rat>) -> Option<Rat> {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    let mut any = false;
    for v in values {
        if v.is_zero() {
            continue;
        }
        let v = v.abs();
        num = num.gcd(v.numer());
        den = den.lcm(v.denom());
        any = true;
    }
    any.then(|| Rat::new(num, den))
}

/// `true` when `value` is a nonnegative integer multiple of `step`.
pub fn is_multiple_of(value: &Rat, step: &Rat) -> bool {
    if step.is_zero() {
        return false;
    }
    (value / step).is_integer()
}

/// A rational extended with `+∞`.
///
/// `PosInf` absorbs addition and dominates every finite value. Multiplying
/// `PosInf` by zero is rejected with a panic since it never has a meaningful
/// value in this model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRat {
    Finite(Rat),
    PosInf,
}

impl ExtRat {
    pub fn zero() -> Self {
        ExtRat::Finite(Rat::zero())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRat::Finite(r) if r.is_zero())
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtRat::PosInf)
    }

    pub fn is_positive(&self) -> bool {
        match self {
            ExtRat::Finite(r) => r.is_positive(),
            ExtRat::PosInf => true,
        }
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(r) => Some(r),
            ExtRat::PosInf => None,
        }
    }

    pub fn add_rat(&self, other: &Rat) -> ExtRat {
        match self {
            ExtRat::Finite(r) => ExtRat::Finite(r + other),
            ExtRat::PosInf => ExtRat::PosInf,
        }
    }

    /// `self - other`; subtracting from `+∞` stays `+∞`.
    pub fn sub_rat(&self, other: &Rat) -> ExtRat {
        match self {
            ExtRat::Finite(r) => ExtRat::Finite(r - other),
            ExtRat::PosInf => ExtRat::PosInf,
        }
    }

    /// Multiplication by a finite factor.
    pub fn mul_rat(&self, factor: &Rat) -> ExtRat {
        match self {
            ExtRat::Finite(r) => ExtRat::Finite(r * factor),
            ExtRat::PosInf => {
                assert!(!factor.is_zero(), "+inf multiplied by zero");
                assert!(factor.is_positive(), "+inf multiplied by a negative factor");
                ExtRat::PosInf
            }
        }
    }

    /// Division by a strictly positive finite divisor.
    pub fn div_rat(&self, divisor: &Rat) -> ExtRat {
        assert!(divisor.is_positive(), "division by a nonpositive value");
        match self {
            ExtRat::Finite(r) => ExtRat::Finite(r / divisor),
            ExtRat::PosInf => ExtRat::PosInf,
        }
    }

    pub fn min_rat(&self, other: &Rat) -> Rat {
        match self {
            ExtRat::Finite(r) if r < other => r.clone(),
            _ => other.clone(),
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(ExtRat::PosInf),
            other => parse_rat(other).map(ExtRat::Finite),
        }
    }
}

impl From<Rat> for ExtRat {
    fn from(r: Rat) -> Self {
        ExtRat::Finite(r)
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::Finite(a), ExtRat::Finite(b)) => a.cmp(b),
            (ExtRat::Finite(_), ExtRat::PosInf) => Ordering::Less,
            (ExtRat::PosInf, ExtRat::Finite(_)) => Ordering::Greater,
            (ExtRat::PosInf, ExtRat::PosInf) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &ExtRat {
    type Output = ExtRat;

    fn add(self, rhs: &ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Finite(a), ExtRat::Finite(b)) => ExtRat::Finite(a + b),
            _ => ExtRat::PosInf,
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Finite(r) => write!(f, "{r}"),
            ExtRat::PosInf => f.write_str("inf"),
        }
    }
}
