//! Energy values with a symbolic hard-core infinity.
//!
//! Hard-core overlaps must behave exactly: an infinite energy difference gives
//! acceptance probability zero, never a NaN from `f64::INFINITY - f64::INFINITY`.
//! All energy arithmetic in the crate goes through this type; raw `f64`
//! infinities never enter Metropolis ratios.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

/// An energy that is either finite or the hard-core `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub const ZERO: Energy = Energy::Finite(0.0);

    pub fn is_infinite(self) -> bool {
        matches!(self, Energy::Infinite)
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(v),
            Energy::Infinite => None,
        }
    }

    /// Finite value or panic; for states already validated hard-core feasible.
    pub fn expect_finite(self, what: &str) -> f64 {
        match self {
            Energy::Finite(v) => v,
            Energy::Infinite => panic!("{what}: energy unexpectedly infinite"),
        }
    }

    /// `self - rhs` for a finite subtrahend. Subtracting an `Infinite` energy
    /// is never meaningful here (cached states are feasible), so the signature
    /// forbids it instead of inventing a NaN.
    pub fn minus_finite(self, rhs: f64) -> Energy {
        match self {
            Energy::Finite(v) => Energy::Finite(v - rhs),
            Energy::Infinite => Energy::Infinite,
        }
    }
}

impl From<f64> for Energy {
    /// Classify a raw number: non-finite positive values collapse to the
    /// symbolic infinity (e.g. a diverging tail evaluated within float range
    /// of the core). Negative infinities and NaN are programming errors.
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Energy::Finite(v)
        } else if v == f64::INFINITY {
            Energy::Infinite
        } else {
            panic!("non-finite energy {v} is not representable");
        }
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        match (self, rhs) {
            (Energy::Finite(a), Energy::Finite(b)) => Energy::Finite(a + b),
            _ => Energy::Infinite,
        }
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        *self = *self + rhs;
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        let mut acc = Energy::ZERO;
        for e in iter {
            acc += e;
            // Infinity is absorbing; callers may sum long neighbor lists.
            if acc.is_infinite() {
                return Energy::Infinite;
            }
        }
        acc
    }
}

impl PartialOrd for Energy {
    fn partial_cmp(&self, other: &Energy) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Energy::Finite(a), Energy::Finite(b)) => a.partial_cmp(b),
            (Energy::Finite(_), Energy::Infinite) => Some(std::cmp::Ordering::Less),
            (Energy::Infinite, Energy::Finite(_)) => Some(std::cmp::Ordering::Greater),
            (Energy::Infinite, Energy::Infinite) => Some(std::cmp::Ordering::Equal),
        }
    }
}

impl fmt::Display for Energy {
    /// `inf` for the hard-core infinity; finite values print with `f64`'s
    /// shortest round-trip formatting. This is the form artifacts use.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Energy::Finite(v) => write!(f, "{v}"),
            Energy::Infinite => write!(f, "inf"),
        }
    }
}
