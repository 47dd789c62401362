use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{is_negative, rational_from_decimal, Assignment, JointTable, Rational, Scalar, NORMALIZATION_TOLERANCE};
use crate::cgraph::{CausalGraph, NodeDecl, NodeId, NodeSet};
use crate::error::{Error, Result};

/// Largest number of nodes a model may have; joints are dense.
pub const MAX_VARIABLES: usize = 16;

/// `P(node | parents)`; `rows[i]` is the distribution given the `i`-th
/// parent assignment in row-major order over lexicographically sorted parents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parents: Vec<NodeId>,
    rows: Vec<Vec<Rational>>,
}

impl Cpt {
    pub fn new(parents: Vec<NodeId>, rows: Vec<Vec<Rational>>) -> Self {
        Cpt { parents, rows }
    }

    pub fn parents(&self) -> &[NodeId] {
        &self.parents
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }
}

/// Causal Bayesian network. CPT columns are exact and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Cbn {
    graph: CausalGraph,
    cards: BTreeMap<NodeId, usize>,
    cpts: BTreeMap<NodeId, Cpt>,
}

impl Cbn {
    pub fn new(
        graph: CausalGraph,
        cards: BTreeMap<NodeId, usize>,
        mut cpts: BTreeMap<NodeId, Cpt>,
    ) -> Result<Self> {
        if graph.len() > MAX_VARIABLES {
            return Err(Error::TooManyVariables(graph.len(), MAX_VARIABLES));
        }
        for n in cards.keys().chain(cpts.keys()) {
            graph.require(n.as_str())?;
        }
        for node in graph.node_ids() {
            let card = *cards
                .get(node)
                .ok_or_else(|| Error::ShapeMismatch(format!("no cardinality for {node}")))?;
            if card < 2 {
                return Err(Error::ShapeMismatch(format!(
                    "{node} has cardinality {card}; at least 2 states are required"
                )));
            }
            let cpt = cpts
                .get_mut(node)
                .ok_or_else(|| Error::ShapeMismatch(format!("no CPT for {node}")))?;
            let parents = graph.parents(node.as_str())?;
            if cpt.parents != parents {
                return Err(Error::ShapeMismatch(format!(
                    "CPT of {node} lists parents {:?}; the graph gives {:?} (lexicographic order)",
                    cpt.parents.iter().map(NodeId::as_str).collect::<Vec<_>>(),
                    parents.iter().map(NodeId::as_str).collect::<Vec<_>>()
                )));
            }
            let columns: usize = parents.iter().map(|p| cards[p]).product();
            if cpt.rows.len() != columns {
                return Err(Error::ShapeMismatch(format!(
                    "CPT of {node} has {} parent configurations, expected {columns}",
                    cpt.rows.len()
                )));
            }
            for (column, row) in cpt.rows.iter_mut().enumerate() {
                if row.len() != card {
                    return Err(Error::ShapeMismatch(format!(
                        "CPT of {node}, column {column}: {} entries for {card} states",
                        row.len()
                    )));
                }
                if row.iter().any(|p| is_negative(p) || *p > Rational::one()) {
                    return Err(Error::InvalidArgument(format!(
                        "CPT of {node}, column {column}: entries must lie in [0, 1]"
                    )));
                }
                let sum: Rational = row.iter().cloned().fold(Rational::zero(), |a, b| a + b);
                let sum_f = sum.to_f64();
                if (sum_f - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::NotNormalized {
                        node: node.to_string(),
                        column,
                        sum: sum_f,
                    });
                }
                // absorb decimal rounding so the exact model is a distribution
                if !sum.is_one() {
                    for p in row.iter_mut() {
                        *p = p.clone() / sum.clone();
                    }
                }
            }
        }
        Ok(Cbn { graph, cards, cpts })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn cardinalities(&self) -> &BTreeMap<NodeId, usize> {
        &self.cards
    }

    pub fn cardinality(&self, node: &str) -> Result<usize> {
        self.cards
            .get(node)
            .copied()
            .ok_or_else(|| Error::UnknownNode(node.to_owned()))
    }

    pub fn cpt(&self, node: &str) -> Option<&Cpt> {
        self.cpts.get(node)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let graph = CausalGraph::from_file(&crate::cgraph::GraphFile {
            nodes: file.nodes.clone(),
            edges: file.edges.clone(),
        })?;
        let cards = file
            .cardinalities
            .iter()
            .map(|(k, &v)| (NodeId::from(k.as_str()), v))
            .collect();
        let mut cpts = BTreeMap::new();
        for (name, decl) in &file.cpts {
            let rows = match &decl.table {
                CptTable::Rows(rows) => rows.clone(),
                CptTable::Flat(row) => vec![row.clone()],
            };
            let rows = rows
                .iter()
                .map(|r| r.iter().map(|&p| rational_from_decimal(p)).collect())
                .collect::<Result<Vec<Vec<Rational>>>>()?;
            let parents = decl.parents.iter().map(|p| NodeId::from(p.as_str())).collect();
            cpts.insert(NodeId::from(name.as_str()), Cpt::new(parents, rows));
        }
        Cbn::new(graph, cards, cpts)
    }

    pub fn to_file(&self) -> ModelFile {
        let g = self.graph.to_file();
        ModelFile {
            nodes: g.nodes,
            edges: g.edges,
            cardinalities: self.cards.iter().map(|(k, &v)| (k.to_string(), v)).collect(),
            cpts: self
                .cpts
                .iter()
                .map(|(k, cpt)| {
                    let rows = cpt
                        .rows
                        .iter()
                        .map(|r| r.iter().map(Scalar::to_f64).collect())
                        .collect();
                    let decl = CptDecl {
                        parents: cpt.parents.iter().map(ToString::to_string).collect(),
                        table: CptTable::Rows(rows),
                    };
                    (k.to_string(), decl)
                })
                .collect(),
        }
    }

    /// Sums `∏ P(v | pa(v))` over all full assignments consistent with
    /// `clamp`, skipping the CPTs of clamped nodes, and accumulates the
    /// weights into a table over `outcome`.
    fn accumulate<T: Scalar>(&self, clamp: &Assignment, outcome: &[NodeId]) -> Result<JointTable<T>> {
        let nodes = self.graph.node_ids();
        let cards: Vec<usize> = nodes.iter().map(|n| self.cards[n]).collect();
        let mut fixed: Vec<Option<usize>> = vec![None; nodes.len()];
        for (n, s) in clamp.iter() {
            let i = self.graph.require(n.as_str())?;
            if s >= cards[i] {
                return Err(Error::StateOutOfRange {
                    node: n.to_string(),
                    state: s,
                    cardinality: cards[i],
                });
            }
            fixed[i] = Some(s);
        }
        let out_pos: Vec<usize> = outcome
            .iter()
            .map(|n| self.graph.require(n.as_str()))
            .collect::<Result<_>>()?;
        let factors: Vec<Option<(Vec<usize>, Vec<Vec<T>>)>> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if fixed[i].is_some() {
                    return None;
                }
                let cpt = &self.cpts[n];
                let rows = cpt
                    .rows
                    .iter()
                    .map(|r| r.iter().map(T::from_rational).collect())
                    .collect();
                let parents = self.graph.parent_idx(i).to_vec();
                Some((parents, rows))
            })
            .collect();

        let out_cards: Vec<usize> = out_pos.iter().map(|&i| cards[i]).collect();
        let size: usize = out_cards.iter().product();
        let mut probs = vec![T::zero(); size];
        let mut states: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
        let free: Vec<usize> = (0..nodes.len()).filter(|&i| fixed[i].is_none()).collect();
        loop {
            let mut w = T::one();
            for (i, f) in factors.iter().enumerate() {
                if let Some((parents, rows)) = f {
                    let mut col = 0;
                    for &p in parents {
                        col = col * cards[p] + states[p];
                    }
                    w = w * rows[col][states[i]].clone();
                }
            }
            let mut idx = 0;
            for (&p, &c) in out_pos.iter().zip(&out_cards) {
                idx = idx * c + states[p];
            }
            probs[idx] = probs[idx].clone() + w;

            // odometer over unclamped nodes
            let mut k = free.len();
            loop {
                if k == 0 {
                    let variables = outcome.iter().cloned().zip(out_cards).collect();
                    return JointTable::unchecked(variables, probs);
                }
                k -= 1;
                let i = free[k];
                states[i] += 1;
                if states[i] < cards[i] {
                    break;
                }
                states[i] = 0;
            }
        }
    }

    /// Joint over the observed nodes, latent nodes summed out.
    pub fn observational_joint<T: Scalar>(&self) -> JointTable<T> {
        let observed: Vec<NodeId> = self.graph.observed().into_iter().collect();
        self.accumulate(&Assignment::new(), &observed)
            .expect("model nodes resolve against their own graph")
    }

    /// Joint over every node, latent ones included.
    pub fn full_joint<T: Scalar>(&self) -> JointTable<T> {
        self.accumulate(&Assignment::new(), self.graph.node_ids())
            .expect("model nodes resolve against their own graph")
    }

    /// Interventional marginal `P(outcome | do(assignment))` by truncated
    /// factorization: intervened nodes lose their CPTs and are clamped.
    pub fn intervene_oracle<T: Scalar>(&self, action: &Assignment, outcome: &NodeSet) -> Result<JointTable<T>> {
        for n in action.nodes() {
            if self.graph.is_latent(n.as_str())? {
                return Err(Error::LatentIntervention(n.to_string()));
            }
            if outcome.contains(n) {
                return Err(Error::OverlappingSets(n.to_string()));
            }
        }
        let outcome: Vec<NodeId> = outcome.iter().cloned().collect();
        self.accumulate(action, &outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CptTable {
    Rows(Vec<Vec<f64>>),
    /// Shorthand for a parentless node.
    Flat(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptDecl {
    #[serde(default)]
    pub parents: Vec<String>,
    pub table: CptTable,
}

/// On-disk model format: the graph fields plus cardinalities and CPTs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub nodes: Vec<NodeDecl>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    pub cardinalities: BTreeMap<String, usize>,
    pub cpts: BTreeMap<String, CptDecl>,
}

pub fn parse_model(text: &str) -> Result<Cbn> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Cbn::from_file(&file)
}


#[cfg(test)]
mod tests {
    use super::fixtures::model_a;
    use super::*;
    use crate::cgraph::node_set;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn parses_model_a() {
        let m = model_a();
        assert_eq!(m.graph().len(), 4);
        assert_eq!(m.cpt("Y").unwrap().rows()[1][1], q(3, 5));
    }

    #[test]
    fn single_node_models() {
        let flat = r#"{"nodes": [{"name": "A", "latent": false}], "edges": [],
            "cardinalities": {"A": 2}, "cpts": {"A": {"parents": [], "table": [0.5, 0.5]}}}"#;
        assert!(parse_model(flat).is_ok());
        let bad = r#"{"nodes": [{"name": "A", "latent": false}], "edges": [],
            "cardinalities": {"A": 2}, "cpts": {"A": {"parents": [], "table": [[0.5, 0.6]]}}}"#;
        assert!(matches!(
            parse_model(bad),
            Err(Error::NotNormalized { column: 0, .. })
        ));
        let shape = r#"{"nodes": [{"name": "A", "latent": false}], "edges": [],
            "cardinalities": {"A": 3}, "cpts": {"A": {"parents": [], "table": [[0.5, 0.5]]}}}"#;
        assert!(matches!(parse_model(shape), Err(Error::ShapeMismatch(_))));
        assert!(matches!(parse_model("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn observational_joint_of_model_a() {
        let t: JointTable<Rational> = model_a().observational_joint();
        let names: Vec<&str> = t.variables().iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["X", "Y", "Z"]);
        assert_eq!(t.probabilities().len(), 8);
        let total = t.probabilities().iter().cloned().fold(q(0, 1), |a, b| a + b);
        assert_eq!(total, q(1, 1));
        // P(X=1, Z=1, Y=1) = Σ_u P(u) P(X=1|u) · 0.9 · P(Y=1|Z=1,u)
        //                  = 0.5·0.2·0.9·0.6 + 0.5·0.8·0.9·0.9 = 0.378
        assert_eq!(*t.get(&[1, 1, 1]), q(378, 1000));
    }

    #[test]
    fn oracle_on_model_a() {
        let m = model_a();
        let t: JointTable<Rational> = m
            .intervene_oracle(&Assignment::new().with("X", 1), &node_set(["Y"]))
            .unwrap();
        assert_eq!(t.probabilities()[1], q(705, 1000));
        assert!(matches!(
            m.intervene_oracle::<f64>(&Assignment::new().with("U", 1), &node_set(["Y"])),
            Err(Error::LatentIntervention(_))
        ));
        assert!(matches!(
            m.intervene_oracle::<f64>(&Assignment::new().with("Y", 1), &node_set(["Y"])),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn empty_intervention_is_observational() {
        let m = model_a();
        let oracle: JointTable<Rational> =
            m.intervene_oracle(&Assignment::new(), &node_set(["X", "Y", "Z"])).unwrap();
        assert_eq!(oracle, m.observational_joint());
    }

    #[test]
    fn file_round_trip() {
        let m = model_a();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        assert_eq!(parse_model(&text).unwrap(), m);
    }
}
