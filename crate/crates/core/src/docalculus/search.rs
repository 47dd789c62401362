use std::collections::{HashSet, VecDeque};

use super::derivation::{Builder, Derivation};
use super::expr::{canonicalize, IntervAtom, IntervExpr, Site};
use super::rules::{apply_rule, expand_total_probability, Direction, Rule};
use crate::cgraph::{CausalGraph, NodeSet};
use crate::criteria::subsets_upto;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Move {
    Expand(Site, NodeSet),
    Apply(Site, Rule, Direction, NodeSet),
}

struct State {
    expr: IntervExpr,
    parent: Option<(usize, Move)>,
    depth: usize,
}

fn nonempty_subsets(s: &NodeSet) -> Vec<NodeSet> {
    let pool: Vec<_> = s.iter().cloned().collect();
    subsets_upto(&pool, pool.len())
        .into_iter()
        .filter(|v| !v.is_empty())
        .map(|v| v.into_iter().collect())
        .collect()
}

fn hatted(e: &IntervExpr) -> usize {
    e.atoms().iter().filter(|(_, a)| !a.is_hat_free()).count()
}

/// Candidate moves in search order: single-variable expansions, then
/// Rule 2 (backward, then forward), Rule 3 backward, Rule 1 backward.
/// Only atoms that still carry an intervention are touched; insertions
/// under Rules 1 and 3 are not generated since they introduce variables
/// absent from the goal.
fn moves(g: &CausalGraph, e: &IntervExpr) -> Vec<Move> {
    let targets: Vec<(Site, &IntervAtom)> = e.atoms().into_iter().filter(|(_, a)| !a.is_hat_free()).collect();
    let observed = g.observed();
    let mut out = Vec::new();
    for (site, a) in &targets {
        let used = a.nodes();
        for n in observed.difference(&used) {
            out.push(Move::Expand(site.clone(), [n.clone()].into()));
        }
    }
    for (site, a) in &targets {
        for m in nonempty_subsets(&a.do_nodes()) {
            out.push(Move::Apply(site.clone(), Rule::Two, Direction::Backward, m));
        }
        for m in nonempty_subsets(&a.cond_nodes()) {
            out.push(Move::Apply(site.clone(), Rule::Two, Direction::Forward, m));
        }
    }
    for (site, a) in &targets {
        for m in nonempty_subsets(&a.do_nodes()) {
            out.push(Move::Apply(site.clone(), Rule::Three, Direction::Backward, m));
        }
    }
    for (site, a) in &targets {
        for m in nonempty_subsets(&a.cond_nodes()) {
            out.push(Move::Apply(site.clone(), Rule::One, Direction::Backward, m));
        }
    }
    out
}

fn step(g: &CausalGraph, e: &IntervExpr, m: &Move) -> Option<IntervExpr> {
    match m {
        Move::Expand(site, over) => expand_total_probability(e, site, over).ok(),
        Move::Apply(site, rule, dir, moved) => apply_rule(g, e, site, *rule, *dir, moved).ok().map(|r| r.expr),
    }
}

/// Breadth-first search for a hat-free rewriting of `goal` using at most
/// `max_depth` moves. Expressions are deduplicated by canonical form, and a
/// branch is pruned once it holds more intervened atoms than moves left.
/// `None` means nothing was found within the bound, not that the effect is
/// unidentifiable.
pub fn search_derivation(g: &CausalGraph, goal: &IntervAtom, max_depth: usize) -> Result<Option<Derivation>> {
    goal.validate()?;
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
    }
    for n in goal.nodes() {
        if g.is_latent(n.as_str())? {
            return Err(if goal.do_set.contains_key(&n) {
                Error::LatentIntervention(n.to_string())
            } else {
                Error::LatentConditioning(n.to_string())
            });
        }
    }
    let root = IntervExpr::Atom(goal.clone());
    let mut states = vec![State {
        expr: canonicalize(&root),
        parent: None,
        depth: 0,
    }];
    if root.is_hat_free() {
        return Ok(Some(Builder::new(g, goal.clone()).finish()));
    }
    let mut seen: HashSet<IntervExpr> = HashSet::from([states[0].expr.clone()]);
    let mut queue = VecDeque::from([0usize]);

    while let Some(i) = queue.pop_front() {
        let depth = states[i].depth;
        if depth == max_depth {
            continue;
        }
        for m in moves(g, &states[i].expr) {
            let Some(next) = step(g, &states[i].expr, &m) else {
                continue;
            };
            let next = canonicalize(&next);
            if hatted(&next) > max_depth - depth - 1 || !seen.insert(next.clone()) {
                continue;
            }
            let found = next.is_hat_free();
            states.push(State {
                expr: next,
                parent: Some((i, m)),
                depth: depth + 1,
            });
            let j = states.len() - 1;
            if found {
                return rebuild(g, goal, &states, j).map(Some);
            }
            queue.push_back(j);
        }
    }
    Ok(None)
}

fn rebuild(g: &CausalGraph, goal: &IntervAtom, states: &[State], mut at: usize) -> Result<Derivation> {
    let mut path = Vec::new();
    while let Some((parent, m)) = &states[at].parent {
        path.push(m.clone());
        at = *parent;
    }
    path.reverse();
    let mut b = Builder::new(g, goal.clone());
    for m in path {
        b.canonicalize_current();
        match m {
            Move::Expand(site, over) => b.expand("", &site, &over)?,
            Move::Apply(site, rule, dir, moved) => b.rule("", &site, rule, dir, &moved)?,
        }
    }
    b.canonicalize_current();
    Ok(b.finish())
}
