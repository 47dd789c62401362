//! Exact discrete probability: CPT-parameterized causal Bayesian networks,
//! the truncated-factorization interventional oracle, and the front-door and
//! back-door adjustment estimators.
//!
//! CPT entries are stored as exact rationals. Every computation is generic
//! over [`Scalar`], so the same code runs in exact mode ([`Rational`]) or in
//! `f64` for speed.

pub(crate) mod cbn;
mod estimate;
mod random;
mod table;

pub use cbn::{parse_model, Cbn, Cpt, CptDecl, CptTable, ModelFile, MAX_VARIABLES};
pub use estimate::{backdoor_estimate, conditional, frontdoor_estimate};
pub use random::{random_binary_cbn, random_cbn};
pub use table::{parse_table, JointTable, TableFile, TableVariable};

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Num, Signed, ToPrimitive};
use serde::Serialize;

use crate::cgraph::NodeId;
use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// Comparison tolerance for float-mode results.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// Tolerance for normalization of input tables and CPT columns.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Number type for probability computations.
pub trait Scalar: Num + Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// 12 decimal digits for floats, an exact fraction for rationals.
    fn render(&self) -> String;
    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn render(&self) -> String {
        format!("{self:.12}")
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Exact rational for the shortest decimal that round-trips `value`, so a
/// JSON `0.2` becomes 1/5 rather than the nearest binary fraction.
pub fn rational_from_decimal(value: f64) -> Result<Rational> {
    if !value.is_finite() {
        return Err(Error::Parse(format!("non-finite probability {value}")));
    }
    let text = format!("{value}");
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let numer = BigInt::from_str_radix(&format!("{int}{frac}"), 10)
        .map_err(|e| Error::Parse(format!("bad number {text}: {e}")))?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Ok(Rational::new(numer * sign, denom))
}

pub(crate) fn is_negative(r: &Rational) -> bool {
    r.is_negative()
}

pub(crate) fn is_zero<T: Scalar>(v: &T) -> bool {
    v.is_zero()
}

/// Partial assignment of states to nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<NodeId, usize>);

impl Assignment {
    pub fn new() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn with(mut self, node: impl Into<NodeId>, state: usize) -> Self {
        self.0.insert(node.into(), state);
        self
    }

    pub fn insert(&mut self, node: impl Into<NodeId>, state: usize) -> Option<usize> {
        self.0.insert(node.into(), state)
    }

    pub fn get(&self, node: &str) -> Option<usize> {
        self.0.get(node).copied()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.0.contains_key(node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, usize)> {
        self.0.iter().map(|(k, &v)| (k, v))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.0.keys()
    }

    /// Union of two assignments; `None` if they disagree on a shared node.
    pub fn merge(&self, other: &Assignment) -> Option<Assignment> {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            if let Some(prev) = out.0.insert(k.clone(), v) {
                if prev != v {
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Parses `X=1,Z=0`.
    pub fn parse(text: &str) -> Result<Assignment> {
        let mut out = Assignment::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, state) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected NAME=STATE, got {part:?}")))?;
            let state: usize = state
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad state in {part:?}")))?;
            out.insert(NodeId::new(name.trim())?, state);
        }
        Ok(out)
    }
}

impl FromIterator<(NodeId, usize)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (NodeId, usize)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}
