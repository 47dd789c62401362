//! Causal identification via the front-door adjustment.
//!
//! - [`cgraph`]: causal DAGs with latent nodes, graph mutilation, d-separation.
//! - [`criteria`]: back-door and front-door criterion checks with witnesses.
//! - [`docalculus`]: symbolic interventional expressions, the three rules of
//!   the do-calculus, a scripted front-door derivation and bounded search.
//! - [`probtab`]: exact discrete models, the truncated-factorization oracle
//!   and the adjustment estimators.

pub mod cgraph;
pub mod criteria;
pub mod docalculus;
pub mod error;
pub mod probtab;

pub use cgraph::{node_set, parse_graph, CausalGraph, NodeId, NodeSet, Path};
pub use error::{Error, Result};
