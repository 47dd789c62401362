//! Reachability-based d-separation (the "Bayes ball" traversal).

use std::collections::VecDeque;

use super::{CausalGraph, NodeSet};
use crate::error::{Error, Result};

impl CausalGraph {
    pub(crate) fn check_disjoint(sets: &[&NodeSet]) -> Result<()> {
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if let Some(n) = a.intersection(b).next() {
                    return Err(Error::OverlappingSets(n.to_string()));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_observed(&self, s: &NodeSet) -> Result<Vec<usize>> {
        let idx = self.indices(s)?;
        if let Some(&i) = idx.iter().find(|&&i| self.latent[i]) {
            return Err(Error::LatentConditioning(self.names[i].to_string()));
        }
        Ok(idx)
    }

    /// True iff every path between `a` and `b` is blocked by `c`.
    ///
    /// Runs in O(V + E): one ancestor sweep of `c`, then a breadth-first
    /// traversal over (node, direction-of-arrival) states.
    pub fn d_separated(&self, a: &NodeSet, b: &NodeSet, c: &NodeSet) -> Result<bool> {
        if a.is_empty() {
            return Err(Error::EmptySet("first d-separation set"));
        }
        if b.is_empty() {
            return Err(Error::EmptySet("second d-separation set"));
        }
        let ai = self.indices(a)?;
        let bi = self.indices(b)?;
        let ci = self.check_observed(c)?;
        Self::check_disjoint(&[a, b, c])?;

        let n = self.len();
        let mut given = vec![false; n];
        for &i in &ci {
            given[i] = true;
        }
        let anc_given = self.ancestor_mask(&ci);

        // visited[v][0]: arrived from a child (moving up),
        // visited[v][1]: arrived from a parent (moving down).
        let mut visited = vec![[false; 2]; n];
        let mut reachable = vec![false; n];
        let mut queue: VecDeque<(usize, usize)> = ai.iter().map(|&i| (i, 0)).collect();
        while let Some((v, dir)) = queue.pop_front() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if !given[v] {
                reachable[v] = true;
            }
            if dir == 0 {
                if !given[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, 0)));
                    queue.extend(self.children[v].iter().map(|&c| (c, 1)));
                }
            } else {
                if !given[v] {
                    queue.extend(self.children[v].iter().map(|&c| (c, 1)));
                }
                if anc_given[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, 0)));
                }
            }
        }
        Ok(bi.iter().all(|&i| !reachable[i]))
    }
}
