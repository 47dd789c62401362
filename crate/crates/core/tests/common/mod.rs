#![allow(dead_code)]

use frontdoor::{CausalGraph, NodeId, NodeSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

pub fn g_fd() -> CausalGraph {
    CausalGraph::new(
        [("X", false), ("Z", false), ("Y", false), ("U", true)],
        [("X", "Z"), ("Z", "Y"), ("U", "X"), ("U", "Y")],
    )
    .unwrap()
}

pub fn bow() -> CausalGraph {
    CausalGraph::new([("X", false), ("Y", false), ("U", true)], [("X", "Y"), ("U", "X"), ("U", "Y")]).unwrap()
}

pub fn set(names: &[&str]) -> NodeSet {
    names.iter().map(|n| NodeId::from(*n)).collect()
}

/// Random DAG on the first `n` names: edges only go from a lower to a higher
/// position of a random permutation, each present with probability `p`.
pub fn random_dag(seed: u64, n: usize, p: f64, latent_p: f64) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((NAMES[order[i]], NAMES[order[j]]));
            }
        }
    }
    let nodes: Vec<(&str, bool)> = (0..n).map(|i| (NAMES[i], rng.random_bool(latent_p))).collect();
    CausalGraph::new(nodes, edges).unwrap()
}

/// Independent d-separation oracle: enumerate every simple path between the
/// two sets and apply the blocking rules with bitmask descendant sets.
pub struct PathOracle {
    names: Vec<NodeId>,
    paths: Vec<(usize, usize, Vec<usize>, Vec<bool>)>,
    desc: Vec<u32>,
}

impl PathOracle {
    pub fn new(g: &CausalGraph) -> Self {
        let names = g.node_ids().to_vec();
        let n = names.len();
        let idx = |v: &NodeId| names.iter().position(|m| m == v).unwrap();
        let mut child = vec![0u32; n];
        for (a, b) in g.edges() {
            child[idx(&a)] |= 1 << idx(&b);
        }
        let mut desc = vec![0u32; n];
        for (v, d) in desc.iter_mut().enumerate() {
            let mut reach = 1u32 << v;
            loop {
                let mut next = reach;
                for u in 0..n {
                    if reach & (1 << u) != 0 {
                        next |= child[u];
                    }
                }
                if next == reach {
                    break;
                }
                reach = next;
            }
            *d = reach;
        }
        let adj = |u: usize, v: usize| child[u] & (1 << v) != 0 || child[v] & (1 << u) != 0;
        let mut paths = Vec::new();
        fn walk(
            n: usize,
            adj: &dyn Fn(usize, usize) -> bool,
            child: &[u32],
            path: &mut Vec<usize>,
            out: &mut Vec<(usize, usize, Vec<usize>, Vec<bool>)>,
        ) {
            let last = *path.last().unwrap();
            if path.len() > 1 {
                let colliders = (0..path.len())
                    .map(|i| {
                        i > 0
                            && i + 1 < path.len()
                            && child[path[i - 1]] & (1 << path[i]) != 0
                            && child[path[i + 1]] & (1 << path[i]) != 0
                    })
                    .collect();
                out.push((path[0], last, path.clone(), colliders));
            }
            for v in 0..n {
                if adj(last, v) && !path.contains(&v) {
                    path.push(v);
                    walk(n, adj, child, path, out);
                    path.pop();
                }
            }
        }
        for s in 0..n {
            walk(n, &adj, &child, &mut vec![s], &mut paths);
        }
        PathOracle { names, paths, desc }
    }

    fn mask(&self, s: &NodeSet) -> u32 {
        s.iter()
            .map(|v| 1u32 << self.names.iter().position(|m| m == v).unwrap())
            .fold(0, |a, b| a | b)
    }

    pub fn separated(&self, a: &NodeSet, b: &NodeSet, c: &NodeSet) -> bool {
        let (ma, mb, mc) = (self.mask(a), self.mask(b), self.mask(c));
        !self.paths.iter().any(|(s, t, nodes, coll)| {
            ma & (1 << s) != 0
                && mb & (1 << t) != 0
                && (1..nodes.len() - 1).all(|i| {
                    let v = nodes[i];
                    if coll[i] {
                        self.desc[v] & mc != 0
                    } else {
                        mc & (1 << v) == 0
                    }
                })
        })
    }
}

/// Random disjoint (A, B, C) with A and B nonempty and C observed.
pub fn random_query(g: &CausalGraph, rng: &mut ChaCha8Rng) -> Option<(NodeSet, NodeSet, NodeSet)> {
    let ids = g.node_ids();
    let (mut a, mut b, mut c) = (NodeSet::new(), NodeSet::new(), NodeSet::new());
    for v in ids {
        match rng.random_range(0..4) {
            0 => {
                a.insert(v.clone());
            }
            1 => {
                b.insert(v.clone());
            }
            2 if !g.is_latent(v.as_str()).unwrap() => {
                c.insert(v.clone());
            }
            _ => {}
        }
    }
    (!a.is_empty() && !b.is_empty()).then_some((a, b, c))
}
