//! Symbolic do-calculus: interventional expressions, the three rules as
//! certified rewrites, a scripted replay of the front-door proof, and a
//! bounded breadth-first derivation search.

mod derivation;
mod eval;
mod expr;
mod rules;
mod search;

pub use derivation::{backdoor_collapse, replay_frontdoor, Derivation, DerivationStep, StepKind};
pub use eval::{eval_expr, eval_with_model};
pub use expr::{build, canonicalize, frontdoor_formula, IntervAtom, IntervExpr, Site, Terms, Value};
pub use rules::{
    apply_rule, expand_total_probability, rule1_applicable, rule2_applicable, rule3_applicable, rule_certificate,
    Applied, Certificate, Direction, Rule,
};
pub use search::search_derivation;
