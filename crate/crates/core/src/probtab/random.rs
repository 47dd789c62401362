use std::collections::BTreeMap;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{Cbn, Cpt, Rational};
use crate::cgraph::{CausalGraph, NodeId};
use crate::error::{Error, Result};

// Each column is split into UNITS equal quanta; every entry keeps at least
// FLOOR_UNITS of them, i.e. probability >= 0.01.
const UNITS: u64 = 10_000;
const FLOOR_UNITS: u64 = 100;

/// Draws one distribution over `card` states: a symmetric Dirichlet(1)
/// sample spread over the mass left after the per-entry floor, rounded to
/// whole quanta by largest remainder.
fn column(rng: &mut ChaCha8Rng, card: usize) -> Vec<Rational> {
    let spare = UNITS - FLOOR_UNITS * card as u64;
    let draws: Vec<f64> = (0..card).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let shares: Vec<f64> = draws.iter().map(|d| d / total * spare as f64).collect();
    let mut units: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let mut left = spare - units.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..card).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        units[i] += 1;
        left -= 1;
    }
    units
        .into_iter()
        .map(|u| Rational::new(BigInt::from(u + FLOOR_UNITS), BigInt::from(UNITS)))
        .collect()
}

/// Random model over `g` with exact CPT entries, each at least 0.01.
/// Deterministic in `seed`.
pub fn random_cbn(g: &CausalGraph, cards: &BTreeMap<NodeId, usize>, seed: u64) -> Result<Cbn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpts = BTreeMap::new();
    for node in g.node_ids() {
        let card = *cards
            .get(node)
            .ok_or_else(|| Error::ShapeMismatch(format!("no cardinality for {node}")))?;
        if card < 2 || card as u64 * FLOOR_UNITS > UNITS {
            return Err(Error::InvalidArgument(format!(
                "cardinality {card} of {node} must lie in 2..={}",
                UNITS / FLOOR_UNITS
            )));
        }
        let parents = g.parents(node.as_str())?;
        let mut columns = 1usize;
        for p in &parents {
            columns *= *cards
                .get(p)
                .ok_or_else(|| Error::ShapeMismatch(format!("no cardinality for {p}")))?;
        }
        let rows = (0..columns).map(|_| column(&mut rng, card)).collect();
        cpts.insert(node.clone(), Cpt::new(parents, rows));
    }
    Cbn::new(g.clone(), cards.clone(), cpts)
}

/// [`random_cbn`] with every node binary.
pub fn random_binary_cbn(g: &CausalGraph, seed: u64) -> Result<Cbn> {
    let cards = g.node_ids().iter().map(|n| (n.clone(), 2)).collect();
    random_cbn(g, &cards, seed)
}
