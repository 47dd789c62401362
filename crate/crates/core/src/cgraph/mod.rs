//! Causal graphs over named nodes with explicit latent variables.
//!
//! A [`CausalGraph`] is an immutable DAG. Nodes are stored in lexicographic
//! name order, so every set-valued query comes back sorted and two graphs
//! compare equal exactly when their node sets (with latent flags) and edge
//! sets agree.
//!
//! Mutilation follows the usual notation: [`CausalGraph::overline`] removes
//! edges into a set (`G_{X̄}`), [`CausalGraph::underline`] removes edges out
//! of it (`G_{X̲}`).

mod dsep;
mod paths;

pub use paths::{Path, Step};

use std::borrow::Borrow;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of a node. Case-sensitive; never contains whitespace or commas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    /// Validated constructor used when a graph is built.
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::InvalidName(name));
        }
        Ok(NodeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

// Unvalidated: a malformed name simply never resolves against a graph.
impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type NodeSet = BTreeSet<NodeId>;

/// Builds a [`NodeSet`] from string names.
pub fn node_set<I, S>(names: I) -> NodeSet
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    names.into_iter().map(|s| NodeId::from(s.as_ref())).collect()
}

/// Parses the CLI set syntax: comma-separated names, empty string for the empty set.
pub fn parse_node_list(text: &str) -> Result<NodeSet> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(NodeSet::new());
    }
    trimmed
        .split(',')
        .map(|s| NodeId::new(s.trim()))
        .collect()
}

pub(crate) fn fmt_set(s: &NodeSet) -> String {
    let names: Vec<&str> = s.iter().map(NodeId::as_str).collect();
    format!("{{{}}}", names.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDecl {
    pub name: String,
    #[serde(default)]
    pub latent: bool,
}

/// On-disk graph format: `{"nodes": [{"name": "X", "latent": false}], "edges": [["X","Z"]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<NodeDecl>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    names: Vec<NodeId>,
    latent: Vec<bool>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalGraph {
    pub fn new<N, S, E, A, B>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = (S, bool)>,
        S: Into<String>,
        E: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut decls: Vec<(NodeId, bool)> = Vec::new();
        for (name, latent) in nodes {
            decls.push((NodeId::new(name)?, latent));
        }
        decls.sort();
        for pair in decls.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateNode(pair[0].0.to_string()));
            }
        }
        let names: Vec<NodeId> = decls.iter().map(|(n, _)| n.clone()).collect();
        let latent = decls.iter().map(|(_, l)| *l).collect();
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            let (a, b): (String, String) = (a.into(), b.into());
            let lookup = |s: &str| names.binary_search_by(|x| x.as_str().cmp(s)).ok();
            let (Some(p), Some(c)) = (lookup(&a), lookup(&b)) else {
                return Err(Error::UnknownEndpoint(a, b));
            };
            if p == c {
                return Err(Error::SelfLoop(a));
            }
            if !seen.insert((p, c)) {
                return Err(Error::DuplicateEdge(a, b));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let g = CausalGraph {
            names,
            latent,
            parents,
            children,
        };
        if let Some(cycle) = g.find_cycle() {
            return Err(Error::Cycle(cycle));
        }
        Ok(g)
    }

    pub fn from_file(file: &GraphFile) -> Result<Self> {
        CausalGraph::new(
            file.nodes.iter().map(|d| (d.name.clone(), d.latent)),
            file.edges.iter().cloned(),
        )
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self
                .names
                .iter()
                .zip(&self.latent)
                .map(|(n, &latent)| NodeDecl {
                    name: n.to_string(),
                    latent,
                })
                .collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    /// Rebuilds a graph over this graph's nodes with a different edge list.
    pub fn with_edges(&self, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        CausalGraph::new(
            self.names
                .iter()
                .zip(&self.latent)
                .map(|(n, &l)| (n.to_string(), l)),
            edges.iter().map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.names.len();
        let mut color = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            g: &CausalGraph,
            v: usize,
            color: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<String>> {
            color[v] = 1;
            stack.push(v);
            for &c in &g.children[v] {
                if color[c] == 1 {
                    let start = stack.iter().position(|&s| s == c).unwrap();
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|&i| g.names[i].to_string()).collect();
                    cycle.push(g.names[c].to_string());
                    return Some(cycle);
                }
                if color[c] == 0 {
                    if let Some(cycle) = visit(g, c, color, stack) {
                        return Some(cycle);
                    }
                }
            }
            stack.pop();
            color[v] = 2;
            None
        }
        for v in 0..n {
            if color[v] == 0 {
                if let Some(c) = visit(self, v, &mut color, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index(name).is_some()
    }

    pub(crate) fn index(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|x| x.as_str().cmp(name)).ok()
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.index(name)
            .ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    pub(crate) fn indices(&self, s: &NodeSet) -> Result<Vec<usize>> {
        s.iter().map(|n| self.require(n.as_str())).collect()
    }

    pub(crate) fn parent_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn is_latent(&self, name: &str) -> Result<bool> {
        Ok(self.latent[self.require(name)?])
    }

    pub fn observed(&self) -> NodeSet {
        self.filter_nodes(false)
    }

    pub fn latents(&self) -> NodeSet {
        self.filter_nodes(true)
    }

    fn filter_nodes(&self, latent: bool) -> NodeSet {
        self.names
            .iter()
            .zip(&self.latent)
            .filter(|(_, &l)| l == latent)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Edges as (parent, child), sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                out.push((self.names[p].clone(), self.names[c].clone()));
            }
        }
        out.sort();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index(parent), self.index(child)) {
            (Some(p), Some(c)) => self.parents[c].binary_search(&p).is_ok(),
            _ => false,
        }
    }

    pub fn parents(&self, name: &str) -> Result<Vec<NodeId>> {
        let i = self.require(name)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].clone()).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<NodeId>> {
        let i = self.require(name)?;
        Ok(self.children[i].iter().map(|&p| self.names[p].clone()).collect())
    }

    /// Kahn's algorithm; ties broken by name.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let n = self.names.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            out.push(self.names[v].clone());
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        out
    }

    fn check_intervention_set(&self, s: &NodeSet) -> Result<Vec<usize>> {
        let idx = self.indices(s)?;
        if let Some(&i) = idx.iter().find(|&&i| self.latent[i]) {
            return Err(Error::LatentIntervention(self.names[i].to_string()));
        }
        Ok(idx)
    }

    fn retain_edges(&self, keep: impl Fn(usize, usize) -> bool) -> CausalGraph {
        let mut g = self.clone();
        for c in 0..g.names.len() {
            g.parents[c].retain(|&p| keep(p, c));
        }
        for p in 0..g.names.len() {
            g.children[p].retain(|&c| keep(p, c));
        }
        g
    }

    /// `G_{S̄}`: drops every edge pointing into a member of `s`.
    pub fn overline(&self, s: &NodeSet) -> Result<CausalGraph> {
        let mut mark = vec![false; self.len()];
        for i in self.check_intervention_set(s)? {
            mark[i] = true;
        }
        Ok(self.retain_edges(|_, c| !mark[c]))
    }

    /// `G_{S̲}`: drops every edge leaving a member of `s`.
    pub fn underline(&self, s: &NodeSet) -> Result<CausalGraph> {
        let mut mark = vec![false; self.len()];
        for i in self.check_intervention_set(s)? {
            mark[i] = true;
        }
        Ok(self.retain_edges(|p, _| !mark[p]))
    }

    fn reach(&self, start: &[usize], up: bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in start {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let next = if up { &self.parents[v] } else { &self.children[v] };
            for &w in next {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub(crate) fn ancestor_mask(&self, start: &[usize]) -> Vec<bool> {
        self.reach(start, true)
    }

    pub(crate) fn descendant_mask(&self, start: &[usize]) -> Vec<bool> {
        self.reach(start, false)
    }

    fn mask_to_set(&self, mask: &[bool]) -> NodeSet {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    /// Nodes with a directed path into `s`, including `s` itself.
    pub fn ancestors(&self, s: &NodeSet) -> Result<NodeSet> {
        let idx = self.indices(s)?;
        Ok(self.mask_to_set(&self.ancestor_mask(&idx)))
    }

    /// Nodes reachable from `s` by directed paths, including `s` itself.
    pub fn descendants(&self, s: &NodeSet) -> Result<NodeSet> {
        let idx = self.indices(s)?;
        Ok(self.mask_to_set(&self.descendant_mask(&idx)))
    }
}

/// Parses the JSON graph format and validates the result.
pub fn parse_graph(text: &str) -> Result<CausalGraph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    CausalGraph::from_file(&file)
}
