//! Exact solver and structure classifier for discounted periodic-review
//! single-commodity inventory control with a fixed ordering cost.
//!
//! The state is the integer inventory level (backorders are negative
//! inventory), orders are non-negative integers, demand is i.i.d. with finite
//! integer support, and the per-period holding/backorder cost is piecewise
//! linear and convex. Depending on the discount factor relative to the
//! critical value `1 - k_h / c_bar` (where `k_h` is the asymptotic per-unit
//! backorder rate), the optimal policy is an `(s_t, S_t)` threshold policy at
//! every step, a threshold policy early with a never-order tail, or the policy
//! that never orders; [`classify`] computes which, [`dp`] solves for the exact
//! value functions and thresholds, [`policy`] evaluates and simulates
//! policies, and [`oracle`] provides brute-force ground truth at desk scale.

pub mod classify;
pub mod dp;
pub mod error;
pub mod model;
pub mod oracle;
pub mod policy;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Inclusive interval of integer inventory levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::EmptyWindow { lo, hi });
        }
        Ok(Window { lo, hi })
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects lo > hi
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_window(&self, other: Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    /// Index of `x` relative to `lo`; caller must ensure containment.
    pub fn offset(&self, x: i64) -> usize {
        debug_assert!(self.contains(x));
        (x - self.lo) as usize
    }
}

/// Planning horizon: a finite number of periods or the infinite-horizon
/// discounted problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(u32),
    Infinite,
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(n) => ser.serialize_u32(*n),
            Horizon::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        match &v {
            serde_json::Value::Number(n) if n.as_u64().is_some() => {
                Ok(Horizon::Finite(n.as_u64().unwrap() as u32))
            }
            serde_json::Value::String(s) if s == "inf" => Ok(Horizon::Infinite),
            _ => Err(serde::de::Error::custom("horizon must be an integer or \"inf\"")),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(Horizon::Infinite);
        }
        s.parse::<u32>()
            .map(Horizon::Finite)
            .map_err(|_| format!("horizon must be a non-negative integer or \"inf\", got {s:?}"))
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

/// A stage count that may be unbounded; serializes as an integer or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    Finite(u32),
    Infinite,
}

impl Count {
    pub fn is_finite(&self) -> bool {
        matches!(self, Count::Finite(_))
    }

    pub fn finite(&self) -> Option<u32> {
        match self {
            Count::Finite(n) => Some(*n),
            Count::Infinite => None,
        }
    }
}

impl PartialOrd for Count {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Count {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Count::Finite(a), Count::Finite(b)) => a.cmp(b),
            (Count::Finite(_), Count::Infinite) => std::cmp::Ordering::Less,
            (Count::Infinite, Count::Finite(_)) => std::cmp::Ordering::Greater,
            (Count::Infinite, Count::Infinite) => std::cmp::Ordering::Equal,
        }
    }
}

impl Serialize for Count {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Count::Finite(n) => ser.serialize_u32(*n),
            Count::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        match &v {
            serde_json::Value::Number(n) if n.as_u64().is_some() => {
                Ok(Count::Finite(n.as_u64().unwrap() as u32))
            }
            serde_json::Value::String(s) if s == "inf" => Ok(Count::Infinite),
            _ => Err(serde::de::Error::custom("expected an integer or \"inf\"")),
        }
    }
}

impl std::fmt::Display for Count {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Infinite => write!(f, "inf"),
        }
    }
}
