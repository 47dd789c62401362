//! Symbolic interventional probability expressions.
//!
//! Variables are symbolic: a term refers either to the query's own value of
//! a node (`Free`, rendered in lowercase, e.g. `x`) or to a variable bound by
//! an enclosing sum (`Bound`). States are only attached at evaluation time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cgraph::{NodeId, NodeSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Free,
    Bound(u32),
}

pub type Terms = BTreeMap<NodeId, Value>;

/// `P(outcome | do(do_set), cond)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervAtom {
    pub outcome: Terms,
    #[serde(rename = "do")]
    pub do_set: Terms,
    pub cond: Terms,
}

fn free_terms(s: &NodeSet) -> Terms {
    s.iter().map(|n| (n.clone(), Value::Free)).collect()
}

impl IntervAtom {
    pub fn new(outcome: Terms, do_set: Terms, cond: Terms) -> Result<Self> {
        let atom = IntervAtom {
            outcome,
            do_set,
            cond,
        };
        atom.validate()?;
        Ok(atom)
    }

    /// Query atom over free variables, e.g. `P(y | do(x))`.
    pub fn query(outcome: &NodeSet, do_set: &NodeSet, cond: &NodeSet) -> Result<Self> {
        IntervAtom::new(free_terms(outcome), free_terms(do_set), free_terms(cond))
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcome.is_empty() {
            return Err(Error::EmptySet("atom outcome"));
        }
        let sets = [&self.outcome, &self.do_set, &self.cond];
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if let Some(n) = a.keys().find(|k| b.contains_key(*k)) {
                    return Err(Error::OverlappingSets(n.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn outcome_nodes(&self) -> NodeSet {
        self.outcome.keys().cloned().collect()
    }

    pub fn do_nodes(&self) -> NodeSet {
        self.do_set.keys().cloned().collect()
    }

    pub fn cond_nodes(&self) -> NodeSet {
        self.cond.keys().cloned().collect()
    }

    pub fn nodes(&self) -> NodeSet {
        self.outcome
            .keys()
            .chain(self.do_set.keys())
            .chain(self.cond.keys())
            .cloned()
            .collect()
    }

    pub fn is_hat_free(&self) -> bool {
        self.do_set.is_empty()
    }

    fn terms(&self) -> impl Iterator<Item = (&NodeId, &Value)> {
        self.outcome.iter().chain(&self.do_set).chain(&self.cond)
    }
}

/// Expression tree over atoms. A [`Site`] addresses a subtree by child
/// indices from the root (a sum has the single child `0`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervExpr {
    Atom(IntervAtom),
    Sum {
        bound: BTreeMap<NodeId, u32>,
        body: Box<IntervExpr>,
    },
    Product(Vec<IntervExpr>),
}

pub type Site = Vec<usize>;

impl From<IntervAtom> for IntervExpr {
    fn from(a: IntervAtom) -> Self {
        IntervExpr::Atom(a)
    }
}

impl IntervExpr {
    /// Atoms with their sites, in pre-order.
    pub fn atoms(&self) -> Vec<(Site, &IntervAtom)> {
        fn walk<'a>(e: &'a IntervExpr, site: &mut Site, out: &mut Vec<(Site, &'a IntervAtom)>) {
            match e {
                IntervExpr::Atom(a) => out.push((site.clone(), a)),
                IntervExpr::Sum { body, .. } => {
                    site.push(0);
                    walk(body, site, out);
                    site.pop();
                }
                IntervExpr::Product(fs) => {
                    for (i, f) in fs.iter().enumerate() {
                        site.push(i);
                        walk(f, site, out);
                        site.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn at(&self, site: &[usize]) -> Option<&IntervExpr> {
        let Some((&first, rest)) = site.split_first() else {
            return Some(self);
        };
        match self {
            IntervExpr::Atom(_) => None,
            IntervExpr::Sum { body, .. } if first == 0 => body.at(rest),
            IntervExpr::Sum { .. } => None,
            IntervExpr::Product(fs) => fs.get(first)?.at(rest),
        }
    }

    pub fn atom_at(&self, site: &[usize]) -> Result<&IntervAtom> {
        match self.at(site) {
            Some(IntervExpr::Atom(a)) => Ok(a),
            _ => Err(Error::BadSite(site.to_vec())),
        }
    }

    /// Copy of `self` with the subtree at `site` replaced.
    pub fn replace_at(&self, site: &[usize], new: IntervExpr) -> Result<IntervExpr> {
        fn go(e: &IntervExpr, site: &[usize], full: &[usize], new: IntervExpr) -> Result<IntervExpr> {
            let Some((&first, rest)) = site.split_first() else {
                return Ok(new);
            };
            match e {
                IntervExpr::Sum { bound, body } if first == 0 => Ok(IntervExpr::Sum {
                    bound: bound.clone(),
                    body: Box::new(go(body, rest, full, new)?),
                }),
                IntervExpr::Product(fs) if first < fs.len() => {
                    let mut fs = fs.clone();
                    fs[first] = go(&fs[first], rest, full, new)?;
                    Ok(IntervExpr::Product(fs))
                }
                _ => Err(Error::BadSite(full.to_vec())),
            }
        }
        go(self, site, site, new)
    }

    pub fn is_hat_free(&self) -> bool {
        self.atoms().iter().all(|(_, a)| a.is_hat_free())
    }

    /// Nodes referenced by a free (query) value somewhere in the expression.
    pub fn free_nodes(&self) -> NodeSet {
        self.atoms()
            .iter()
            .flat_map(|(_, a)| a.terms().filter(|(_, v)| **v == Value::Free).map(|(n, _)| n.clone()))
            .collect()
    }

    pub(crate) fn max_bound_id(&self) -> Option<u32> {
        match self {
            IntervExpr::Atom(a) => a
                .terms()
                .filter_map(|(_, v)| match v {
                    Value::Bound(id) => Some(*id),
                    Value::Free => None,
                })
                .max(),
            IntervExpr::Sum { bound, body } => bound.values().copied().chain(body.max_bound_id()).max(),
            IntervExpr::Product(fs) => fs.iter().filter_map(IntervExpr::max_bound_id).max(),
        }
    }

    pub(crate) fn fresh_id(&self) -> u32 {
        self.max_bound_id().map_or(0, |m| m + 1)
    }

    /// Canonical text, e.g. `sum[z] ( P(z|x) * sum[x1] ( P(y|x1,z) * P(x1) ) )`.
    pub fn to_text(&self) -> String {
        let mut namer = Namer::new(self);
        let mut out = String::new();
        render(self, &mut namer, &mut out);
        out
    }
}

impl fmt::Display for IntervExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Display for IntervAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&IntervExpr::Atom(self.clone()).to_text())
    }
}

// ---- rendering ----

struct Namer {
    taken: BTreeSet<String>,
    free: NodeSet,
    scopes: Vec<BTreeMap<u32, String>>,
}

impl Namer {
    fn new(e: &IntervExpr) -> Self {
        let free = e.free_nodes();
        let taken = free.iter().map(|n| n.as_str().to_lowercase()).collect();
        Namer {
            taken,
            free,
            scopes: Vec::new(),
        }
    }

    fn bind(&mut self, bound: &BTreeMap<NodeId, u32>) -> Vec<String> {
        let mut scope = BTreeMap::new();
        let mut names = Vec::new();
        for (node, &id) in bound {
            let base = node.as_str().to_lowercase();
            let name = if !self.free.contains(node) && !self.taken.contains(&base) {
                base
            } else {
                (1..)
                    .map(|k| format!("{base}{k}"))
                    .find(|c| !self.taken.contains(c))
                    .unwrap()
            };
            self.taken.insert(name.clone());
            scope.insert(id, name.clone());
            names.push(name);
        }
        self.scopes.push(scope);
        names
    }

    fn name(&self, node: &NodeId, v: Value) -> String {
        match v {
            Value::Free => node.as_str().to_lowercase(),
            Value::Bound(id) => self
                .scopes
                .iter()
                .rev()
                .find_map(|s| s.get(&id).cloned())
                .unwrap_or_else(|| format!("{}?{id}", node.as_str().to_lowercase())),
        }
    }
}

fn render(e: &IntervExpr, namer: &mut Namer, out: &mut String) {
    match e {
        IntervExpr::Atom(a) => {
            let outcome: Vec<String> = a.outcome.iter().map(|(n, v)| namer.name(n, *v)).collect();
            let mut ctx: Vec<String> = a.cond.iter().map(|(n, v)| namer.name(n, *v)).collect();
            ctx.extend(a.do_set.iter().map(|(n, v)| format!("do({})", namer.name(n, *v))));
            out.push_str("P(");
            out.push_str(&outcome.join(","));
            if !ctx.is_empty() {
                out.push('|');
                out.push_str(&ctx.join(","));
            }
            out.push(')');
        }
        IntervExpr::Sum { bound, body } => {
            let names = namer.bind(bound);
            out.push_str(&format!("sum[{}] ( ", names.join(",")));
            render(body, namer, out);
            out.push_str(" )");
            namer.scopes.pop();
        }
        IntervExpr::Product(fs) if fs.is_empty() => out.push('1'),
        IntervExpr::Product(fs) => {
            for (i, f) in fs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                let nested = matches!(f, IntervExpr::Product(_));
                if nested {
                    out.push_str("( ");
                }
                render(f, namer, out);
                if nested {
                    out.push_str(" )");
                }
            }
        }
    }
}

// ---- canonical form ----

/// Canonical representative: products flattened and their factors sorted
/// by an alpha-invariant key, trivial sums and singleton products removed,
/// bound variables renumbered in order of first binding. Idempotent.
pub fn canonicalize(e: &IntervExpr) -> IntervExpr {
    let flat = normalize(e.clone());
    let (sorted, _) = sort_keyed(flat, &mut Vec::new());
    let mut next = 0;
    rename(&sorted, &mut Vec::new(), &mut next)
}

fn normalize(e: IntervExpr) -> IntervExpr {
    match e {
        IntervExpr::Atom(_) => e,
        IntervExpr::Sum { bound, body } if bound.is_empty() => normalize(*body),
        IntervExpr::Sum { bound, body } => IntervExpr::Sum {
            bound,
            body: Box::new(normalize(*body)),
        },
        IntervExpr::Product(fs) => {
            let mut flat = Vec::new();
            for f in fs {
                match normalize(f) {
                    IntervExpr::Product(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            if flat.len() == 1 {
                flat.pop().unwrap()
            } else {
                IntervExpr::Product(flat)
            }
        }
    }
}

/// De Bruijn style reference: node name plus distance to its binder.
fn db_terms(terms: &Terms, scopes: &[BTreeMap<NodeId, u32>]) -> String {
    let parts: Vec<String> = terms
        .iter()
        .map(|(n, v)| match v {
            Value::Free => n.to_string(),
            Value::Bound(id) => match scopes.iter().rev().position(|s| s.values().any(|b| b == id)) {
                Some(d) => format!("{n}@{d}"),
                None => format!("{n}?{id}"),
            },
        })
        .collect();
    parts.join(",")
}

fn sort_keyed(e: IntervExpr, scopes: &mut Vec<BTreeMap<NodeId, u32>>) -> (IntervExpr, String) {
    match e {
        IntervExpr::Atom(a) => {
            let context = a.do_set.len() + a.cond.len();
            let key = format!(
                "0{:04}P({}|{}|{})",
                9999usize.saturating_sub(context),
                db_terms(&a.outcome, scopes),
                db_terms(&a.do_set, scopes),
                db_terms(&a.cond, scopes)
            );
            (IntervExpr::Atom(a), key)
        }
        IntervExpr::Sum { bound, body } => {
            let names: Vec<&str> = bound.keys().map(NodeId::as_str).collect();
            let head = format!("1S[{}]", names.join(","));
            scopes.push(bound.clone());
            let (body, bk) = sort_keyed(*body, scopes);
            scopes.pop();
            (
                IntervExpr::Sum {
                    bound,
                    body: Box::new(body),
                },
                format!("{head}({bk})"),
            )
        }
        IntervExpr::Product(fs) => {
            let mut keyed: Vec<(IntervExpr, String)> = fs.into_iter().map(|f| sort_keyed(f, scopes)).collect();
            keyed.sort_by(|a, b| a.1.cmp(&b.1));
            let key = format!(
                "2P({})",
                keyed.iter().map(|(_, k)| k.as_str()).collect::<Vec<_>>().join("*")
            );
            (IntervExpr::Product(keyed.into_iter().map(|(f, _)| f).collect()), key)
        }
    }
}

fn rename(e: &IntervExpr, scopes: &mut Vec<BTreeMap<u32, u32>>, next: &mut u32) -> IntervExpr {
    let lookup = |scopes: &Vec<BTreeMap<u32, u32>>, v: Value| match v {
        Value::Free => Value::Free,
        Value::Bound(id) => scopes
            .iter()
            .rev()
            .find_map(|s| s.get(&id))
            .map_or(Value::Bound(id), |&n| Value::Bound(n)),
    };
    match e {
        IntervExpr::Atom(a) => {
            let map = |t: &Terms| t.iter().map(|(n, v)| (n.clone(), lookup(scopes, *v))).collect();
            IntervExpr::Atom(IntervAtom {
                outcome: map(&a.outcome),
                do_set: map(&a.do_set),
                cond: map(&a.cond),
            })
        }
        IntervExpr::Sum { bound, body } => {
            let mut scope = BTreeMap::new();
            let mut new_bound = BTreeMap::new();
            for (n, &id) in bound {
                scope.insert(id, *next);
                new_bound.insert(n.clone(), *next);
                *next += 1;
            }
            scopes.push(scope);
            let body = rename(body, scopes, next);
            scopes.pop();
            IntervExpr::Sum {
                bound: new_bound,
                body: Box::new(body),
            }
        }
        IntervExpr::Product(fs) => IntervExpr::Product(fs.iter().map(|f| rename(f, scopes, next)).collect()),
    }
}

/// Builder helpers used by derivations and tests.
pub mod build {
    use super::*;

    pub fn bound(node: &str, id: u32) -> (NodeId, Value) {
        (NodeId::from(node), Value::Bound(id))
    }

    pub fn free(node: &str) -> (NodeId, Value) {
        (NodeId::from(node), Value::Free)
    }

    pub fn terms<const N: usize>(items: [(NodeId, Value); N]) -> Terms {
        items.into_iter().collect()
    }

    pub fn atom(outcome: Terms, do_set: Terms, cond: Terms) -> IntervExpr {
        IntervExpr::Atom(IntervAtom {
            outcome,
            do_set,
            cond,
        })
    }

    pub fn sum(bound_vars: &[(&str, u32)], body: IntervExpr) -> IntervExpr {
        IntervExpr::Sum {
            bound: bound_vars.iter().map(|(n, id)| (NodeId::from(*n), *id)).collect(),
            body: Box::new(body),
        }
    }

    pub fn product(factors: Vec<IntervExpr>) -> IntervExpr {
        IntervExpr::Product(factors)
    }
}

/// The front-door adjustment formula `Σ_z P(z|x) Σ_x' P(y|x',z) P(x')`
/// for sets `x`, `y`, `z`, in canonical form.
pub fn frontdoor_formula(x: &NodeSet, y: &NodeSet, z: &NodeSet) -> IntervExpr {
    let z_ids: BTreeMap<NodeId, u32> = z.iter().cloned().zip(0..).collect();
    let x_ids: BTreeMap<NodeId, u32> = x.iter().cloned().zip(z.len() as u32..).collect();
    let bound_terms =
        |ids: &BTreeMap<NodeId, u32>| -> Terms { ids.iter().map(|(n, &i)| (n.clone(), Value::Bound(i))).collect() };
    let mut inner_cond = bound_terms(&x_ids);
    inner_cond.extend(bound_terms(&z_ids));
    let e = IntervExpr::Sum {
        bound: z_ids.clone(),
        body: Box::new(IntervExpr::Product(vec![
            IntervExpr::Atom(IntervAtom {
                outcome: bound_terms(&z_ids),
                do_set: Terms::new(),
                cond: free_terms(x),
            }),
            IntervExpr::Sum {
                bound: x_ids.clone(),
                body: Box::new(IntervExpr::Product(vec![
                    IntervExpr::Atom(IntervAtom {
                        outcome: free_terms(y),
                        do_set: Terms::new(),
                        cond: inner_cond,
                    }),
                    IntervExpr::Atom(IntervAtom {
                        outcome: bound_terms(&x_ids),
                        do_set: Terms::new(),
                        cond: Terms::new(),
                    }),
                ])),
            },
        ])),
    };
    canonicalize(&e)
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;
    use crate::cgraph::node_set;

    fn eq1(xb: u32) -> IntervExpr {
        // Σ_z P(z|x) Σ_{x'} P(x') P(y|x',z), written with the factors swapped
        sum(
            &[("Z", 7)],
            product(vec![
                sum(
                    &[("X", xb)],
                    product(vec![
                        atom(terms([bound("X", xb)]), Terms::new(), Terms::new()),
                        atom(terms([free("Y")]), Terms::new(), terms([bound("X", xb), bound("Z", 7)])),
                    ]),
                ),
                atom(terms([bound("Z", 7)]), Terms::new(), terms([free("X")])),
            ]),
        )
    }

    #[test]
    fn renders_frontdoor_formula() {
        let f = frontdoor_formula(&node_set(["X"]), &node_set(["Y"]), &node_set(["Z"]));
        assert_eq!(f.to_text(), "sum[z] ( P(z|x) * sum[x1] ( P(y|x1,z) * P(x1) ) )");
    }

    #[test]
    fn canonical_child_order() {
        let e = sum(
            &[("X", 3)],
            product(vec![
                atom(terms([bound("X", 3)]), Terms::new(), Terms::new()),
                atom(terms([free("Y")]), Terms::new(), terms([bound("X", 3), free("Z")])),
            ]),
        );
        let c = canonicalize(&e);
        assert_eq!(c.to_text(), "sum[x] ( P(y|x,z) * P(x) )");
        let expect = sum(
            &[("X", 0)],
            product(vec![
                atom(terms([free("Y")]), Terms::new(), terms([bound("X", 0), free("Z")])),
                atom(terms([bound("X", 0)]), Terms::new(), Terms::new()),
            ]),
        );
        assert_eq!(c, expect);
    }

    #[test]
    fn alpha_equivalent_forms_agree() {
        let a = canonicalize(&eq1(1));
        let b = canonicalize(&eq1(42));
        assert_eq!(a, b);
        assert_eq!(a, frontdoor_formula(&node_set(["X"]), &node_set(["Y"]), &node_set(["Z"])));
        assert_eq!(canonicalize(&a), a);
    }

    #[test]
    fn flattening_and_trivial_sums() {
        let p = atom(terms([free("Y")]), Terms::new(), Terms::new());
        let q = atom(terms([free("X")]), Terms::new(), Terms::new());
        let nested = product(vec![product(vec![p.clone()]), sum(&[], q.clone())]);
        assert_eq!(canonicalize(&nested), product(vec![q, p]));
    }

    #[test]
    fn hat_rendering() {
        let e = atom(terms([free("Y")]), terms([free("X")]), terms([free("Z")]));
        assert_eq!(e.to_text(), "P(y|z,do(x))");
        assert!(!e.is_hat_free());
    }

    #[test]
    fn sites() {
        let e = eq1(1);
        let atoms = e.atoms();
        assert_eq!(atoms.len(), 3);
        assert_eq!(atoms[0].0, vec![0, 0, 0, 0]);
        assert!(e.atom_at(&[0, 1]).is_ok());
        assert_eq!(e.atom_at(&[0]).unwrap_err(), Error::BadSite(vec![0]));
        assert!(e.atom_at(&[1]).is_err());
        let r = e.replace_at(&[0, 1], atom(terms([free("Q")]), Terms::new(), Terms::new())).unwrap();
        assert_eq!(r.atom_at(&[0, 1]).unwrap().outcome_nodes(), node_set(["Q"]));
        assert!(e.replace_at(&[3], e.clone()).is_err());
    }

    #[test]
    fn atom_validation() {
        assert!(IntervAtom::query(&NodeSet::new(), &node_set(["X"]), &NodeSet::new()).is_err());
        assert_eq!(
            IntervAtom::query(&node_set(["X"]), &node_set(["X"]), &NodeSet::new()).unwrap_err(),
            Error::OverlappingSets("X".into())
        );
    }
}
