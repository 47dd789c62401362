//! The three rules of the do-calculus.
//!
//! With `y`, `x`, `z`, `w` disjoint:
//!
//! ```text
//! Rule 1  P(y | do(x), z, w)     = P(y | do(x), w)        if (Y ⊥⊥ Z | X, W) in G[overline(X)]
//! Rule 2  P(y | do(x), do(z), w) = P(y | do(x), z, w)     if (Y ⊥⊥ Z | X, W) in G[overline(X), underline(Z)]
//! Rule 3  P(y | do(x), do(z), w) = P(y | do(x), w)        if (Y ⊥⊥ Z | X, W) in G[overline(X), overline(Z(W))]
//! ```
//!
//! where `Z(W)` is `Z` minus the ancestors of `W` in `G[overline(X)]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{IntervAtom, IntervExpr, Terms, Value};
use crate::cgraph::{fmt_set, CausalGraph, NodeId, NodeSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "rule1")]
    One,
    #[serde(rename = "rule2")]
    Two,
    #[serde(rename = "rule3")]
    Three,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Rule::One => 1,
            Rule::Two => 2,
            Rule::Three => 3,
        };
        write!(f, "Rule {n}")
    }
}

impl Rule {
    pub fn from_number(n: u8) -> Result<Rule> {
        match n {
            1 => Ok(Rule::One),
            2 => Ok(Rule::Two),
            3 => Ok(Rule::Three),
            _ => Err(Error::InvalidArgument(format!("no rule {n}; expected 1, 2 or 3"))),
        }
    }
}

/// `Forward` adds to the atom (an observation for Rule 1, a hat on an
/// observed variable for Rule 2, an intervention for Rule 3); `Backward`
/// removes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// An independence statement checked in a mutilated graph
/// `G[overline(overline), underline(underline)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub rule: Rule,
    pub overline: NodeSet,
    pub underline: NodeSet,
    pub edges: Vec<(NodeId, NodeId)>,
    pub left: NodeSet,
    pub right: NodeSet,
    pub given: NodeSet,
    pub holds: bool,
}

impl Certificate {
    pub fn graph_label(&self) -> String {
        let mut parts = Vec::new();
        if !self.overline.is_empty() {
            parts.push(format!("overline{}", fmt_set(&self.overline)));
        }
        if !self.underline.is_empty() {
            parts.push(format!("underline{}", fmt_set(&self.underline)));
        }
        if parts.is_empty() {
            "G".to_owned()
        } else {
            format!("G[{}]", parts.join(" "))
        }
    }

    pub fn statement(&self) -> String {
        let names = |s: &NodeSet| s.iter().map(NodeId::as_str).collect::<Vec<_>>().join(",");
        let mut st = format!("({} ⊥⊥ {}", names(&self.left), names(&self.right));
        if !self.given.is_empty() {
            st.push_str(&format!(" | {}", names(&self.given)));
        }
        st.push(')');
        format!("{st} in {}", self.graph_label())
    }

    /// Rebuilds the mutilated graph from `g` and re-runs d-separation.
    /// False if the stored edge list disagrees with the recomputed one.
    pub fn recheck(&self, g: &CausalGraph) -> Result<bool> {
        let m = g.overline(&self.overline)?.underline(&self.underline)?;
        if m.edges() != self.edges {
            return Ok(false);
        }
        if self.right.is_empty() {
            return Ok(true);
        }
        m.d_separated(&self.left, &self.right, &self.given)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.statement())
    }
}

fn validate_rule_sets(g: &CausalGraph, y: &NodeSet, x: &NodeSet, z: &NodeSet, w: &NodeSet) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptySet("rule outcome set"));
    }
    for n in x {
        if g.is_latent(n.as_str())? {
            return Err(Error::LatentIntervention(n.to_string()));
        }
    }
    for n in y.iter().chain(z).chain(w) {
        if g.is_latent(n.as_str())? {
            return Err(Error::LatentConditioning(n.to_string()));
        }
    }
    CausalGraph::check_disjoint(&[y, x, z, w])
}

/// Evaluates the applicability condition of `rule` for the roles
/// `(y, x, z, w)` and returns the independence statement it checked.
pub fn rule_certificate(
    g: &CausalGraph,
    rule: Rule,
    y: &NodeSet,
    x: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<Certificate> {
    validate_rule_sets(g, y, x, z, w)?;
    let (overline, underline) = match rule {
        Rule::One => (x.clone(), NodeSet::new()),
        Rule::Two => (x.clone(), z.clone()),
        Rule::Three => {
            let anc_w = g.overline(x)?.ancestors(w)?;
            let z_w: NodeSet = z.difference(&anc_w).cloned().collect();
            (x.union(&z_w).cloned().collect(), NodeSet::new())
        }
    };
    let m = g.overline(&overline)?.underline(&underline)?;
    let given: NodeSet = x.union(w).cloned().collect();
    let holds = z.is_empty() || m.d_separated(y, z, &given)?;
    Ok(Certificate {
        rule,
        overline,
        underline,
        edges: m.edges(),
        left: y.clone(),
        right: z.clone(),
        given,
        holds,
    })
}

/// `(Y ⊥⊥ Z | X, W)` in `G[overline(X)]`.
pub fn rule1_applicable(g: &CausalGraph, y: &NodeSet, x: &NodeSet, z: &NodeSet, w: &NodeSet) -> Result<bool> {
    Ok(rule_certificate(g, Rule::One, y, x, z, w)?.holds)
}

/// `(Y ⊥⊥ Z | X, W)` in `G[overline(X), underline(Z)]`.
pub fn rule2_applicable(g: &CausalGraph, y: &NodeSet, x: &NodeSet, z: &NodeSet, w: &NodeSet) -> Result<bool> {
    Ok(rule_certificate(g, Rule::Two, y, x, z, w)?.holds)
}

/// `(Y ⊥⊥ Z | X, W)` in `G[overline(X), overline(Z(W))]`.
pub fn rule3_applicable(g: &CausalGraph, y: &NodeSet, x: &NodeSet, z: &NodeSet, w: &NodeSet) -> Result<bool> {
    Ok(rule_certificate(g, Rule::Three, y, x, z, w)?.holds)
}

/// Result of a certified rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub expr: IntervExpr,
    pub certificate: Certificate,
}

fn split(terms: &Terms, moved: &NodeSet) -> (Terms, Terms) {
    terms
        .iter()
        .map(|(n, v)| (n.clone(), *v))
        .partition(|(n, _)| moved.contains(n))
}

fn require_subset(moved: &NodeSet, terms: &Terms, what: &str) -> Result<()> {
    match moved.iter().find(|n| !terms.contains_key(*n)) {
        Some(n) => Err(Error::InvalidArgument(format!("{n} is not in the atom's {what}"))),
        None => Ok(()),
    }
}

/// Rewrites the atom at `site` with `rule`, `moved` playing the rule's
/// `z` role. Applicability is checked here; a failing condition yields
/// [`Error::RuleNotApplicable`] carrying the statement that did not hold.
pub fn apply_rule(
    g: &CausalGraph,
    expr: &IntervExpr,
    site: &[usize],
    rule: Rule,
    direction: Direction,
    moved: &NodeSet,
) -> Result<Applied> {
    let atom = expr.atom_at(site)?;
    if moved.is_empty() {
        return Err(Error::EmptySet("moved set"));
    }
    let y = atom.outcome_nodes();
    let dn = atom.do_nodes();
    let cn = atom.cond_nodes();
    let fresh = |s: &NodeSet| -> Terms { s.iter().map(|n| (n.clone(), Value::Free)).collect() };
    let minus = |a: &NodeSet, b: &NodeSet| -> NodeSet { a.difference(b).cloned().collect() };

    let (roles, new_atom) = match (rule, direction) {
        (Rule::One, Direction::Backward) => {
            require_subset(moved, &atom.cond, "observations")?;
            let (_, keep) = split(&atom.cond, moved);
            ((dn.clone(), minus(&cn, moved)), IntervAtom { cond: keep, ..atom.clone() })
        }
        (Rule::One, Direction::Forward) => {
            if let Some(n) = moved.intersection(&atom.nodes()).next() {
                return Err(Error::OverlappingSets(n.to_string()));
            }
            let mut cond = atom.cond.clone();
            cond.extend(fresh(moved));
            ((dn.clone(), cn.clone()), IntervAtom { cond, ..atom.clone() })
        }
        (Rule::Two, Direction::Backward) => {
            require_subset(moved, &atom.do_set, "interventions")?;
            let (hats, keep) = split(&atom.do_set, moved);
            let mut cond = atom.cond.clone();
            cond.extend(hats);
            (
                (minus(&dn, moved), cn.clone()),
                IntervAtom {
                    outcome: atom.outcome.clone(),
                    do_set: keep,
                    cond,
                },
            )
        }
        (Rule::Two, Direction::Forward) => {
            require_subset(moved, &atom.cond, "observations")?;
            let (obs, keep) = split(&atom.cond, moved);
            let mut do_set = atom.do_set.clone();
            do_set.extend(obs);
            (
                (dn.clone(), minus(&cn, moved)),
                IntervAtom {
                    outcome: atom.outcome.clone(),
                    do_set,
                    cond: keep,
                },
            )
        }
        (Rule::Three, Direction::Backward) => {
            require_subset(moved, &atom.do_set, "interventions")?;
            let (_, keep) = split(&atom.do_set, moved);
            ((minus(&dn, moved), cn.clone()), IntervAtom { do_set: keep, ..atom.clone() })
        }
        (Rule::Three, Direction::Forward) => {
            if let Some(n) = moved.intersection(&atom.nodes()).next() {
                return Err(Error::OverlappingSets(n.to_string()));
            }
            let mut do_set = atom.do_set.clone();
            do_set.extend(fresh(moved));
            ((dn.clone(), cn.clone()), IntervAtom { do_set, ..atom.clone() })
        }
    };
    let (x, w) = roles;
    let certificate = rule_certificate(g, rule, &y, &x, moved, &w)?;
    if !certificate.holds {
        return Err(Error::RuleNotApplicable {
            rule: rule.to_string(),
            statement: certificate.statement(),
        });
    }
    Ok(Applied {
        expr: expr.replace_at(site, IntervExpr::Atom(new_atom))?,
        certificate,
    })
}

/// `P(y | ctx)` becomes `Σ_over P(y | over, ctx) · P(over | ctx)`.
pub fn expand_total_probability(expr: &IntervExpr, site: &[usize], over: &NodeSet) -> Result<IntervExpr> {
    let atom = expr.atom_at(site)?;
    if over.is_empty() {
        return Ok(expr.clone());
    }
    if let Some(n) = over.intersection(&atom.nodes()).next() {
        return Err(Error::OverlappingSets(n.to_string()));
    }
    let first = expr.fresh_id();
    let bound: std::collections::BTreeMap<NodeId, u32> = over.iter().cloned().zip(first..).collect();
    let over_terms: Terms = bound.iter().map(|(n, &id)| (n.clone(), Value::Bound(id))).collect();
    let mut cond = atom.cond.clone();
    cond.extend(over_terms.clone());
    let body = IntervExpr::Product(vec![
        IntervExpr::Atom(IntervAtom {
            outcome: atom.outcome.clone(),
            do_set: atom.do_set.clone(),
            cond,
        }),
        IntervExpr::Atom(IntervAtom {
            outcome: over_terms,
            do_set: atom.do_set.clone(),
            cond: atom.cond.clone(),
        }),
    ]);
    expr.replace_at(
        site,
        IntervExpr::Sum {
            bound,
            body: Box::new(body),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgraph::fixtures::g_fd;
    use crate::cgraph::node_set;
    use crate::docalculus::expr::build::*;

    fn e() -> NodeSet {
        NodeSet::new()
    }

    #[test]
    fn rule1_examples() {
        let g = g_fd();
        assert!(!rule1_applicable(&g, &node_set(["Y"]), &node_set(["Z"]), &node_set(["X"]), &e()).unwrap());
        let iso = CausalGraph::new([("A", false), ("B", false)], Vec::<(&str, &str)>::new()).unwrap();
        assert!(rule1_applicable(&iso, &node_set(["A"]), &e(), &node_set(["B"]), &e()).unwrap());
        assert_eq!(
            rule1_applicable(&g, &node_set(["Y"]), &e(), &node_set(["U"]), &e()).unwrap_err(),
            Error::LatentConditioning("U".into())
        );
    }

    #[test]
    fn rule2_examples() {
        let g = g_fd();
        assert!(rule2_applicable(&g, &node_set(["Z"]), &e(), &node_set(["X"]), &e()).unwrap());
        assert!(rule2_applicable(&g, &node_set(["Y"]), &e(), &node_set(["Z"]), &node_set(["X"])).unwrap());
        assert!(!rule2_applicable(&g, &node_set(["Y"]), &e(), &node_set(["X"]), &e()).unwrap());
        assert!(rule2_applicable(&g, &node_set(["Y"]), &node_set(["X"]), &node_set(["Z"]), &e()).unwrap());
    }

    #[test]
    fn rule3_examples() {
        let g = g_fd();
        assert!(rule3_applicable(&g, &node_set(["X"]), &e(), &node_set(["Z"]), &e()).unwrap());
        assert!(rule3_applicable(&g, &node_set(["Y"]), &node_set(["Z"]), &node_set(["X"]), &e()).unwrap());
        assert!(!rule3_applicable(&g, &node_set(["Y"]), &e(), &node_set(["Z"]), &e()).unwrap());
    }

    #[test]
    fn rule3_excludes_ancestors_of_w() {
        // Z → W → Y: conditioning on W, the hat on Z cannot be removed by
        // overlining Z, because Z is an ancestor of W.
        let g = CausalGraph::new(
            [("Z", false), ("W", false), ("Y", false)],
            [("Z", "W"), ("W", "Y")],
        )
        .unwrap();
        let cert = rule_certificate(&g, Rule::Three, &node_set(["Y"]), &e(), &node_set(["Z"]), &node_set(["W"])).unwrap();
        assert!(cert.overline.is_empty());
        assert!(cert.holds);
    }

    #[test]
    fn certificate_text_and_recheck() {
        let g = g_fd();
        let c = rule_certificate(&g, Rule::Two, &node_set(["Y"]), &node_set(["X"]), &node_set(["Z"]), &e()).unwrap();
        assert_eq!(c.statement(), "(Y ⊥⊥ Z | X) in G[overline{X} underline{Z}]");
        assert!(c.recheck(&g).unwrap());
        let mut forged = c.clone();
        forged.edges.pop();
        assert!(!forged.recheck(&g).unwrap());
    }

    #[test]
    fn rewrites_from_the_front_door_proof() {
        let g = g_fd();
        // P(z|do(x)) → P(z|x)
        let pz = atom(terms([free("Z")]), terms([free("X")]), Terms::new());
        let r = apply_rule(&g, &pz, &[], Rule::Two, Direction::Backward, &node_set(["X"])).unwrap();
        assert_eq!(r.expr.to_text(), "P(z|x)");
        assert!(r.certificate.recheck(&g).unwrap());

        // P(y|z,do(x)) → P(y|do(x),do(z))
        let py = atom(terms([free("Y")]), terms([free("X")]), terms([free("Z")]));
        let r = apply_rule(&g, &py, &[], Rule::Two, Direction::Forward, &node_set(["Z"])).unwrap();
        assert_eq!(r.expr.to_text(), "P(y|do(x),do(z))");

        // P(y|do(z),do(x)) → P(y|do(z))
        let r = apply_rule(&g, &r.expr, &[], Rule::Three, Direction::Backward, &node_set(["X"])).unwrap();
        assert_eq!(r.expr.to_text(), "P(y|do(z))");
    }

    #[test]
    fn refuses_inapplicable_rewrite() {
        let g = g_fd();
        let py = atom(terms([free("Y")]), terms([free("X")]), Terms::new());
        let err = apply_rule(&g, &py, &[], Rule::Two, Direction::Backward, &node_set(["X"])).unwrap_err();
        match err {
            Error::RuleNotApplicable { rule, statement } => {
                assert_eq!(rule, "Rule 2");
                assert_eq!(statement, "(Y ⊥⊥ X) in G[underline{X}]");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            apply_rule(&g, &py, &[0], Rule::Two, Direction::Backward, &node_set(["X"])),
            Err(Error::BadSite(_))
        ));
        assert!(apply_rule(&g, &py, &[], Rule::Two, Direction::Backward, &node_set(["Z"])).is_err());
    }

    #[test]
    fn expansion() {
        let py = atom(terms([free("Y")]), terms([free("X")]), Terms::new());
        let ex = expand_total_probability(&py, &[], &node_set(["Z"])).unwrap();
        assert_eq!(ex.to_text(), "sum[z] ( P(y|z,do(x)) * P(z|do(x)) )");
        let pz = atom(terms([free("Y")]), terms([free("Z")]), Terms::new());
        let ex = expand_total_probability(&pz, &[], &node_set(["X"])).unwrap();
        assert_eq!(ex.to_text(), "sum[x] ( P(y|x,do(z)) * P(x|do(z)) )");
        assert_eq!(expand_total_probability(&py, &[], &e()).unwrap(), py);
        assert!(matches!(
            expand_total_probability(&py, &[], &node_set(["X"])),
            Err(Error::OverlappingSets(_))
        ));
    }
}
