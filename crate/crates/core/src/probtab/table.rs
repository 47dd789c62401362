use serde::{Deserialize, Serialize};

use super::{rational_from_decimal, Assignment, Rational, Scalar, NORMALIZATION_TOLERANCE};
use crate::cgraph::NodeId;
use crate::error::{Error, Result};

/// Dense joint distribution, row-major in variable order (last variable
/// varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable<T> {
    variables: Vec<(NodeId, usize)>,
    probs: Vec<T>,
}

impl<T: Scalar> JointTable<T> {
    pub fn new(variables: Vec<(NodeId, usize)>, probs: Vec<T>) -> Result<Self> {
        let t = Self::unchecked(variables, probs)?;
        if let Some(p) = t.probs.iter().find(|p| **p < T::zero()) {
            return Err(Error::InvalidArgument(format!("negative probability {p:?}")));
        }
        let total: T = t.probs.iter().cloned().fold(T::zero(), |a, b| a + b);
        if (total.to_f64() - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "joint table mass is {} rather than 1",
                total.to_f64()
            )));
        }
        Ok(t)
    }

    /// Shape checks only; used for intermediate tables built from valid ones.
    pub(crate) fn unchecked(variables: Vec<(NodeId, usize)>, probs: Vec<T>) -> Result<Self> {
        for (i, (n, _)) in variables.iter().enumerate() {
            if variables[..i].iter().any(|(m, _)| m == n) {
                return Err(Error::DuplicateNode(n.to_string()));
            }
        }
        let size: usize = variables.iter().map(|(_, c)| *c).product();
        if size != probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a state space of {size}",
                probs.len()
            )));
        }
        Ok(JointTable { variables, probs })
    }

    pub fn variables(&self) -> &[(NodeId, usize)] {
        &self.variables
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probs
    }

    pub fn position(&self, node: &str) -> Option<usize> {
        self.variables.iter().position(|(n, _)| n.as_str() == node)
    }

    pub fn cardinality(&self, node: &str) -> Result<usize> {
        self.position(node)
            .map(|i| self.variables[i].1)
            .ok_or_else(|| Error::UnknownNode(node.to_owned()))
    }

    /// Probability of the entry at a full state vector.
    pub fn get(&self, states: &[usize]) -> &T {
        let mut idx = 0;
        for ((_, card), &s) in self.variables.iter().zip(states) {
            idx = idx * card + s;
        }
        &self.probs[idx]
    }

    /// Iterates `(state vector, probability)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, &T)> + '_ {
        let cards: Vec<usize> = self.variables.iter().map(|(_, c)| *c).collect();
        self.probs.iter().enumerate().map(move |(mut idx, p)| {
            let mut states = vec![0; cards.len()];
            for (slot, &c) in states.iter_mut().zip(&cards).rev() {
                *slot = idx % c;
                idx /= c;
            }
            (states, p)
        })
    }

    fn resolve(&self, event: &Assignment) -> Result<Vec<(usize, usize)>> {
        event
            .iter()
            .map(|(n, s)| {
                let pos = self
                    .position(n.as_str())
                    .ok_or_else(|| Error::UnknownNode(n.to_string()))?;
                let card = self.variables[pos].1;
                if s >= card {
                    return Err(Error::StateOutOfRange {
                        node: n.to_string(),
                        state: s,
                        cardinality: card,
                    });
                }
                Ok((pos, s))
            })
            .collect()
    }

    /// Total probability of a partial assignment.
    pub fn mass(&self, event: &Assignment) -> Result<T> {
        let fixed = self.resolve(event)?;
        Ok(self
            .entries()
            .filter(|(states, _)| fixed.iter().all(|&(pos, s)| states[pos] == s))
            .fold(T::zero(), |acc, (_, p)| acc + p.clone()))
    }

    /// Marginal over `vars`, in the order given.
    pub fn marginal(&self, vars: &[NodeId]) -> Result<JointTable<T>> {
        let positions: Vec<usize> = vars
            .iter()
            .map(|n| {
                self.position(n.as_str())
                    .ok_or_else(|| Error::UnknownNode(n.to_string()))
            })
            .collect::<Result<_>>()?;
        let variables: Vec<(NodeId, usize)> =
            positions.iter().map(|&p| self.variables[p].clone()).collect();
        let size: usize = variables.iter().map(|(_, c)| *c).product();
        let mut probs = vec![T::zero(); size];
        for (states, p) in self.entries() {
            let mut idx = 0;
            for (&pos, (_, card)) in positions.iter().zip(&variables) {
                idx = idx * card + states[pos];
            }
            probs[idx] = probs[idx].clone() + p.clone();
        }
        Self::unchecked(variables, probs)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> JointTable<U> {
        JointTable {
            variables: self.variables.clone(),
            probs: self.probs.iter().map(f).collect(),
        }
    }

    /// Re-orders the states of `node` so that new state `i` is old state `perm[i]`.
    pub fn relabel(&self, node: &str, perm: &[usize]) -> Result<JointTable<T>> {
        let pos = self
            .position(node)
            .ok_or_else(|| Error::UnknownNode(node.to_owned()))?;
        let card = self.variables[pos].1;
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..card).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of the {card} states of {node}"
            )));
        }
        let mut probs = self.probs.clone();
        for (mut states, _) in self.entries() {
            let new_state = states[pos];
            states[pos] = perm[new_state];
            let src = self.get(&states).clone();
            let mut idx = 0;
            for (i, (_, c)) in self.variables.iter().enumerate() {
                let s = if i == pos { new_state } else { states[i] };
                idx = idx * c + s;
            }
            probs[idx] = src;
        }
        Self::unchecked(self.variables.clone(), probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableVariable {
    pub name: String,
    pub cardinality: usize,
}

/// On-disk joint table format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub variables: Vec<TableVariable>,
    pub probabilities: Vec<f64>,
}

/// Parses a table file into exact rationals.
pub fn parse_table(text: &str) -> Result<JointTable<Rational>> {
    let file: TableFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let variables = file
        .variables
        .iter()
        .map(|v| Ok((NodeId::new(v.name.clone())?, v.cardinality)))
        .collect::<Result<Vec<_>>>()?;
    let probs = file
        .probabilities
        .iter()
        .map(|&p| rational_from_decimal(p))
        .collect::<Result<Vec<_>>>()?;
    JointTable::new(variables, probs)
}
