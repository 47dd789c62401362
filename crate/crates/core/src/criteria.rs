//! Back-door and front-door criteria with per-condition diagnostics.

use serde::Serialize;

use crate::cgraph::{CausalGraph, NodeId, NodeSet, Path};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontdoorReport {
    pub satisfied: bool,
    /// `z` intercepts every directed path from `x` to `y`.
    pub cond_i: bool,
    /// No unblocked back-door path from `x` to `z`.
    pub cond_ii: bool,
    /// Every back-door path from `z` to `y` is blocked by `x`.
    pub cond_iii: bool,
    /// A path violating the first failed condition.
    pub witness: Option<Path>,
}

impl FrontdoorReport {
    /// Index (1..=3) of the first failed condition.
    pub fn first_failure(&self) -> Option<u8> {
        [self.cond_i, self.cond_ii, self.cond_iii]
            .iter()
            .position(|c| !c)
            .map(|i| i as u8 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackdoorReport {
    pub satisfied: bool,
    pub descendant_violation: Option<NodeId>,
    pub open_backdoor: Option<Path>,
}

fn validate(g: &CausalGraph, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySet("treatment set"));
    }
    if y.is_empty() {
        return Err(Error::EmptySet("outcome set"));
    }
    for n in x.iter().chain(y).chain(z) {
        if g.is_latent(n.as_str())? {
            return Err(Error::LatentInCriterionSet(n.to_string()));
        }
    }
    CausalGraph::check_disjoint(&[x, y, z])
}

/// Checks whether `z` satisfies the front-door criterion relative to `(x, y)`.
pub fn is_frontdoor_set(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<FrontdoorReport> {
    validate(g, x, y, z)?;
    let unmediated = g.find_directed_path(x, y, z)?;
    let cond_i = unmediated.is_none();

    // conditions (ii) and (iii) hold vacuously for an empty mediator set
    let (mut cond_ii, mut x_to_z, mut z_to_y) = (true, None, None);
    if !z.is_empty() {
        let gx = g.underline(x)?;
        cond_ii = gx.d_separated(x, z, &NodeSet::new())?;
        if !cond_ii {
            x_to_z = gx.find_open_path(x, z, &NodeSet::new(), false)?;
        }
        z_to_y = g.find_open_path(z, y, x, true)?;
    }
    let cond_iii = z_to_y.is_none();
    let witness = unmediated.or(x_to_z).or(z_to_y);
    Ok(FrontdoorReport {
        satisfied: cond_i && cond_ii && cond_iii,
        cond_i,
        cond_ii,
        cond_iii,
        witness,
    })
}

/// Checks whether `z` satisfies the back-door criterion relative to `(x, y)`.
pub fn is_backdoor_set(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<BackdoorReport> {
    validate(g, x, y, z)?;
    let desc = g.descendants(x)?;
    let descendant_violation = z.iter().find(|n| desc.contains(*n)).cloned();
    let open_backdoor = g.find_open_path(x, y, z, true)?;
    Ok(BackdoorReport {
        satisfied: descendant_violation.is_none() && open_backdoor.is_none(),
        descendant_violation,
        open_backdoor,
    })
}

/// Subsets of `pool` with at most `max_size` elements, by size then lexicographically.
pub(crate) fn subsets_upto<T: Clone>(pool: &[T], max_size: usize) -> Vec<Vec<T>> {
    fn rec<T: Clone>(pool: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i].clone());
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=max_size.min(pool.len()) {
        rec(pool, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

/// All observed sets of size at most `max_size` (excluding `x ∪ y`) that
/// satisfy the front-door criterion. Latent nodes never enter the pool.
pub fn find_frontdoor_sets(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    max_size: usize,
) -> Result<Vec<NodeSet>> {
    validate(g, x, y, &NodeSet::new())?;
    let observed = g.observed();
    if max_size > observed.len() {
        return Err(Error::InvalidArgument(format!(
            "max_size {max_size} exceeds the {} observed nodes",
            observed.len()
        )));
    }
    let pool: Vec<NodeId> = observed
        .into_iter()
        .filter(|n| !x.contains(n) && !y.contains(n))
        .collect();
    let mut out = Vec::new();
    for subset in subsets_upto(&pool, max_size) {
        let z: NodeSet = subset.into_iter().collect();
        if is_frontdoor_set(g, x, y, &z)?.satisfied {
            out.push(z);
        }
    }
    Ok(out)
}
