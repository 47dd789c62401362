//! Simple paths, the textbook blocking rules, and witness search.
//!
//! [`CausalGraph::all_simple_paths`] together with [`Path::is_blocked`] is an
//! exhaustive d-separation oracle. It is exponential and only meant for small
//! graphs and tests; [`CausalGraph::d_separated`] is the production check.

use std::fmt;

use serde::{Serialize, Serializer};

use super::{CausalGraph, NodeId, NodeSet};
use crate::error::{Error, Result};

/// Direction of one traversed edge relative to the path's reading order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// `a → b`
    Forward,
    /// `a ← b`
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
    steps: Vec<Step>,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>, steps: Vec<Step>) -> Self {
        assert_eq!(nodes.len(), steps.len() + 1, "path needs one step per edge");
        Path { nodes, steps }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn start(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn end(&self) -> &NodeId {
        self.nodes.last().unwrap()
    }

    /// Every edge points away from the start.
    pub fn is_directed(&self) -> bool {
        self.steps.iter().all(|&s| s == Step::Forward)
    }

    /// The first edge points into the start node.
    pub fn is_backdoor(&self) -> bool {
        self.steps.first() == Some(&Step::Backward)
    }

    /// Interior node `i` (1-based position in `nodes`) is a collider `→ v ←`.
    pub fn is_collider(&self, i: usize) -> bool {
        i > 0 && i < self.nodes.len() - 1 && self.steps[i - 1] == Step::Forward && self.steps[i] == Step::Backward
    }

    /// Every consecutive pair is joined by an edge of the stated direction and
    /// no node repeats.
    pub fn is_valid_in(&self, g: &CausalGraph) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        if !self.nodes.iter().all(|n| seen.insert(n)) {
            return false;
        }
        self.steps.iter().enumerate().all(|(i, s)| {
            let (a, b) = (self.nodes[i].as_str(), self.nodes[i + 1].as_str());
            match s {
                Step::Forward => g.has_edge(a, b),
                Step::Backward => g.has_edge(b, a),
            }
        })
    }

    /// Blocking per the textbook rules: a non-collider in `given`, or a
    /// collider that is not in `given` and has no descendant in `given`.
    pub fn is_blocked(&self, g: &CausalGraph, given: &NodeSet) -> Result<bool> {
        for i in 1..self.nodes.len().saturating_sub(1) {
            let v = &self.nodes[i];
            if self.is_collider(i) {
                let desc = g.descendants(&std::iter::once(v.clone()).collect())?;
                if desc.is_disjoint(given) {
                    return Ok(true);
                }
            } else if given.contains(v) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (s, n) in self.steps.iter().zip(&self.nodes[1..]) {
            let arrow = match s {
                Step::Forward => "→",
                Step::Backward => "←",
            };
            write!(f, "{arrow}{n}")?;
        }
        Ok(())
    }
}

impl Serialize for Path {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl CausalGraph {
    fn neighbours(&self, v: usize) -> Vec<(usize, Step)> {
        let mut out: Vec<(usize, Step)> = self.children[v]
            .iter()
            .map(|&c| (c, Step::Forward))
            .chain(self.parents[v].iter().map(|&p| (p, Step::Backward)))
            .collect();
        out.sort_by(|a, b| self.names[a.0].cmp(&self.names[b.0]));
        out
    }

    fn make_path(&self, nodes: &[usize], steps: &[Step]) -> Path {
        Path::new(
            nodes.iter().map(|&i| self.names[i].clone()).collect(),
            steps.to_vec(),
        )
    }

    /// Every simple path between `a` and `b`, ignoring edge direction, in
    /// lexicographic order of node sequences.
    pub fn all_simple_paths(&self, a: &str, b: &str) -> Result<Vec<Path>> {
        let ai = self.require(a)?;
        let bi = self.require(b)?;
        if ai == bi {
            return Err(Error::InvalidArgument(format!(
                "path endpoints must differ (both {a})"
            )));
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; self.len()];
        let mut nodes = vec![ai];
        let mut steps = Vec::new();
        on_path[ai] = true;
        self.paths_dfs(bi, &mut on_path, &mut nodes, &mut steps, &mut out);
        out.sort();
        Ok(out)
    }

    fn paths_dfs(
        &self,
        target: usize,
        on_path: &mut [bool],
        nodes: &mut Vec<usize>,
        steps: &mut Vec<Step>,
        out: &mut Vec<Path>,
    ) {
        let v = *nodes.last().unwrap();
        if v == target {
            out.push(self.make_path(nodes, steps));
            return;
        }
        for (w, s) in self.neighbours(v) {
            if on_path[w] {
                continue;
            }
            on_path[w] = true;
            nodes.push(w);
            steps.push(s);
            self.paths_dfs(target, on_path, nodes, steps, out);
            steps.pop();
            nodes.pop();
            on_path[w] = false;
        }
    }

    /// First (lexicographic) path from `from` to `to` that is open given
    /// `given`, or `None` when every such path is blocked.
    ///
    /// Interior nodes avoid `from ∪ to`. With `backdoor_only`, only paths
    /// whose first edge points into the start node are considered.
    pub fn find_open_path(
        &self,
        from: &NodeSet,
        to: &NodeSet,
        given: &NodeSet,
        backdoor_only: bool,
    ) -> Result<Option<Path>> {
        let fi = self.indices(from)?;
        let ti = self.indices(to)?;
        let gi = self.check_observed(given)?;
        Self::check_disjoint(&[from, to, given])?;
        let n = self.len();
        let mut ctx = OpenSearch {
            g: self,
            endpoint: vec![false; n],
            target: vec![false; n],
            given: vec![false; n],
            active_collider: self.ancestor_mask(&gi),
            on_path: vec![false; n],
            nodes: Vec::new(),
            steps: Vec::new(),
        };
        for &i in fi.iter().chain(&ti) {
            ctx.endpoint[i] = true;
        }
        for &i in &ti {
            ctx.target[i] = true;
        }
        for &i in &gi {
            ctx.given[i] = true;
        }
        for &s in &fi {
            ctx.on_path[s] = true;
            ctx.nodes.push(s);
            for (w, step) in self.neighbours(s) {
                if backdoor_only && step != Step::Backward {
                    continue;
                }
                if let Some(p) = ctx.extend(w, step) {
                    return Ok(Some(p));
                }
            }
            ctx.nodes.pop();
            ctx.on_path[s] = false;
        }
        Ok(None)
    }

    /// First directed path from `from` to `to` whose nodes avoid `avoid`.
    pub fn find_directed_path(
        &self,
        from: &NodeSet,
        to: &NodeSet,
        avoid: &NodeSet,
    ) -> Result<Option<Path>> {
        let fi = self.indices(from)?;
        let ti = self.indices(to)?;
        let ai = self.indices(avoid)?;
        let mut blocked = vec![false; self.len()];
        for &i in &ai {
            blocked[i] = true;
        }
        let mut is_target = vec![false; self.len()];
        for &i in &ti {
            is_target[i] = true;
        }
        // A directed path from a `from` node to a `to` node; the shortest
        // lexicographic one is found by DFS with a dead-end memo.
        let mut dead = vec![false; self.len()];
        fn dfs(
            g: &CausalGraph,
            v: usize,
            blocked: &[bool],
            is_target: &[bool],
            dead: &mut [bool],
            trail: &mut Vec<usize>,
        ) -> bool {
            trail.push(v);
            if is_target[v] && trail.len() > 1 {
                return true;
            }
            let mut kids: Vec<usize> = g.children[v].clone();
            kids.sort_by(|a, b| g.names[*a].cmp(&g.names[*b]));
            for c in kids {
                if blocked[c] || dead[c] {
                    continue;
                }
                if dfs(g, c, blocked, is_target, dead, trail) {
                    return true;
                }
            }
            dead[v] = true;
            trail.pop();
            false
        }
        for &s in &fi {
            let mut trail = Vec::new();
            if dfs(self, s, &blocked, &is_target, &mut dead, &mut trail) {
                let steps = vec![Step::Forward; trail.len() - 1];
                return Ok(Some(self.make_path(&trail, &steps)));
            }
        }
        Ok(None)
    }
}

struct OpenSearch<'a> {
    g: &'a CausalGraph,
    endpoint: Vec<bool>,
    target: Vec<bool>,
    given: Vec<bool>,
    // node is in `given` or has a descendant there
    active_collider: Vec<bool>,
    on_path: Vec<bool>,
    nodes: Vec<usize>,
    steps: Vec<Step>,
}

impl OpenSearch<'_> {
    fn extend(&mut self, w: usize, step: Step) -> Option<Path> {
        if self.on_path[w] {
            return None;
        }
        // the current tail becomes interior once `w` is appended
        if self.nodes.len() > 1 {
            let v = *self.nodes.last().unwrap();
            let prev = *self.steps.last().unwrap();
            let collider = prev == Step::Forward && step == Step::Backward;
            let open = if collider {
                self.active_collider[v]
            } else {
                !self.given[v]
            };
            if !open {
                return None;
            }
        }
        self.on_path[w] = true;
        self.nodes.push(w);
        self.steps.push(step);
        let mut found = None;
        if self.target[w] {
            found = Some(self.g.make_path(&self.nodes, &self.steps));
        } else if !self.endpoint[w] {
            for (next, s) in self.g.neighbours(w) {
                if let Some(p) = self.extend(next, s) {
                    found = Some(p);
                    break;
                }
            }
        }
        self.steps.pop();
        self.nodes.pop();
        self.on_path[w] = false;
        found
    }
}

#[cfg(test)]
mod tests {
    use crate::cgraph::fixtures::g_fd;
    use crate::cgraph::{node_set, CausalGraph, NodeSet};

    fn render(paths: &[super::Path]) -> Vec<String> {
        paths.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn enumerates_g_fd_paths() {
        let g = g_fd();
        assert_eq!(render(&g.all_simple_paths("X", "Y").unwrap()), ["X←U→Y", "X→Z→Y"]);
        assert_eq!(render(&g.all_simple_paths("U", "Z").unwrap()), ["U→X→Z", "U→Y←Z"]);
    }

    #[test]
    fn disconnected_pair_has_no_paths() {
        let g = CausalGraph::new([("A", false), ("B", false)], Vec::<(&str, &str)>::new()).unwrap();
        assert!(g.all_simple_paths("A", "B").unwrap().is_empty());
        assert!(g.all_simple_paths("A", "A").is_err());
    }

    #[test]
    fn blocking_rules() {
        let g = g_fd();
        let paths = g.all_simple_paths("X", "Y").unwrap();
        let backdoor = &paths[0];
        assert!(backdoor.is_backdoor());
        assert!(!backdoor.is_blocked(&g, &node_set(["Z"])).unwrap());
        let front = &paths[1];
        assert!(front.is_directed());
        assert!(front.is_blocked(&g, &node_set(["Z"])).unwrap());
        let uz = g.all_simple_paths("U", "Z").unwrap();
        assert!(uz[1].is_collider(1));
        assert!(uz[1].is_blocked(&g, &NodeSet::new()).unwrap());
        assert!(!uz[1].is_blocked(&g, &node_set(["Y"])).unwrap());
    }

    #[test]
    fn open_path_witness() {
        let g = g_fd();
        let p = g
            .find_open_path(&node_set(["X"]), &node_set(["Y"]), &node_set(["Z"]), false)
            .unwrap()
            .unwrap();
        assert_eq!(p.to_string(), "X←U→Y");
        assert!(g
            .find_open_path(&node_set(["Z"]), &node_set(["Y"]), &node_set(["X"]), true)
            .unwrap()
            .is_none());
        let bd = g
            .find_open_path(&node_set(["Z"]), &node_set(["Y"]), &NodeSet::new(), true)
            .unwrap()
            .unwrap();
        assert_eq!(bd.to_string(), "Z←X←U→Y");
    }

    #[test]
    fn directed_path_witness() {
        let g = g_fd();
        let p = g
            .find_directed_path(&node_set(["X"]), &node_set(["Y"]), &NodeSet::new())
            .unwrap()
            .unwrap();
        assert_eq!(p.to_string(), "X→Z→Y");
        assert!(g
            .find_directed_path(&node_set(["X"]), &node_set(["Y"]), &node_set(["Z"]))
            .unwrap()
            .is_none());
    }
}
