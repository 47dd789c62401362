use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{canonicalize, IntervAtom, IntervExpr, Site};
use super::rules::{apply_rule, expand_total_probability, Certificate, Direction, Rule};
use crate::cgraph::{CausalGraph, NodeSet};
use crate::criteria::is_frontdoor_set;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepKind {
    #[serde(rename = "rule1")]
    Rule1,
    #[serde(rename = "rule2")]
    Rule2,
    #[serde(rename = "rule3")]
    Rule3,
    #[serde(rename = "expand")]
    Expand,
    /// Back-door adjustment of `P(y | do(z))`: expansion over the treatment,
    /// Rule 3 on `P(x | do(z))` and Rule 2 on `P(y | x, do(z))`.
    #[serde(rename = "backdoor-collapse")]
    BackdoorCollapse,
}

impl StepKind {
    pub fn rule(self) -> Option<Rule> {
        match self {
            StepKind::Rule1 => Some(Rule::One),
            StepKind::Rule2 => Some(Rule::Two),
            StepKind::Rule3 => Some(Rule::Three),
            _ => None,
        }
    }

    pub fn from_rule(rule: Rule) -> StepKind {
        match rule {
            Rule::One => StepKind::Rule1,
            Rule::Two => StepKind::Rule2,
            Rule::Three => StepKind::Rule3,
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule() {
            Some(r) => write!(f, "{r}"),
            None if *self == StepKind::Expand => f.write_str("Total probability"),
            None => f.write_str("Back-door collapse"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationStep {
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub site: Site,
    pub moved: NodeSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub before: IntervExpr,
    pub after: IntervExpr,
    pub before_text: String,
    pub after_text: String,
    pub certificates: Vec<Certificate>,
}

impl DerivationStep {
    /// Re-executes the step on `before`, re-checking every applicability
    /// condition.
    pub fn replay(&self, g: &CausalGraph) -> Result<(IntervExpr, Vec<Certificate>)> {
        match self.kind {
            StepKind::Expand => Ok((expand_total_probability(&self.before, &self.site, &self.moved)?, Vec::new())),
            StepKind::BackdoorCollapse => backdoor_collapse(g, &self.before, &self.site, &self.moved),
            kind => {
                let rule = kind.rule().expect("rule step");
                let direction = self
                    .direction
                    .ok_or_else(|| Error::InvalidArgument("rule step without a direction".into()))?;
                let r = apply_rule(g, &self.before, &self.site, rule, direction, &self.moved)?;
                Ok((r.expr, vec![r.certificate]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub goal: IntervAtom,
    pub steps: Vec<DerivationStep>,
    pub result: IntervExpr,
    pub result_text: String,
}

impl Derivation {
    /// Rechecks the whole chain against `g`: each step starts where the
    /// previous one ended, replays to its recorded `after`, carries the
    /// certificates it produces, and the final result is hat-free.
    pub fn verify(&self, g: &CausalGraph) -> Result<()> {
        let mut current = IntervExpr::Atom(self.goal.clone());
        for (i, step) in self.steps.iter().enumerate() {
            let n = i + 1;
            if canonicalize(&step.before) != canonicalize(&current) {
                return Err(Error::InvalidArgument(format!("step {n} does not start from the previous result")));
            }
            let (after, certs) = step.replay(g)?;
            if after != step.after {
                return Err(Error::InvalidArgument(format!("step {n} does not reproduce its result")));
            }
            if certs != step.certificates {
                return Err(Error::InvalidArgument(format!("step {n} carries a stale certificate")));
            }
            for c in &step.certificates {
                if !c.recheck(g)? {
                    return Err(Error::InvalidArgument(format!("step {n}: certificate {c} does not hold")));
                }
            }
            current = after;
        }
        if canonicalize(&current) != canonicalize(&self.result) {
            return Err(Error::InvalidArgument("result differs from the last step".into()));
        }
        if !self.result.is_hat_free() {
            return Err(Error::NotHatFree(self.result.to_text()));
        }
        Ok(())
    }
}

/// Records derivation steps while rewriting one expression.
pub(crate) struct Builder<'g> {
    g: &'g CausalGraph,
    goal: IntervAtom,
    current: IntervExpr,
    steps: Vec<DerivationStep>,
}

impl<'g> Builder<'g> {
    pub(crate) fn new(g: &'g CausalGraph, goal: IntervAtom) -> Self {
        Builder {
            g,
            current: IntervExpr::Atom(goal.clone()),
            goal,
            steps: Vec::new(),
        }
    }

    fn push(&mut self, kind: StepKind, label: &str, site: &[usize], moved: &NodeSet, direction: Option<Direction>) -> Result<()> {
        let mut step = DerivationStep {
            kind,
            label: (!label.is_empty()).then(|| label.to_owned()),
            site: site.to_vec(),
            moved: moved.clone(),
            direction,
            before: self.current.clone(),
            after: self.current.clone(),
            before_text: self.current.to_text(),
            after_text: String::new(),
            certificates: Vec::new(),
        };
        let (after, certs) = step.replay(self.g)?;
        step.after_text = after.to_text();
        step.after = after.clone();
        step.certificates = certs;
        self.steps.push(step);
        self.current = after;
        Ok(())
    }

    pub(crate) fn expand(&mut self, label: &str, site: &[usize], over: &NodeSet) -> Result<()> {
        self.push(StepKind::Expand, label, site, over, None)
    }

    pub(crate) fn rule(&mut self, label: &str, site: &[usize], rule: Rule, direction: Direction, moved: &NodeSet) -> Result<()> {
        self.push(StepKind::from_rule(rule), label, site, moved, Some(direction))
    }

    pub(crate) fn collapse(&mut self, label: &str, site: &[usize], over: &NodeSet) -> Result<()> {
        self.push(StepKind::BackdoorCollapse, label, site, over, None)
    }

    pub(crate) fn canonicalize_current(&mut self) {
        self.current = canonicalize(&self.current);
    }

    pub(crate) fn current(&self) -> &IntervExpr {
        &self.current
    }

    pub(crate) fn finish(self) -> Derivation {
        Derivation {
            goal: self.goal,
            steps: self.steps,
            result_text: self.current.to_text(),
            result: self.current,
        }
    }
}

/// `P(y | do(z), ctx)` at `site` becomes `Σ_over P(y | over, ctx) P(over | ctx)`
/// after removing the intervention on `z` from both factors: by Rule 3 on the
/// treatment marginal and by Rule 2 on the outcome term.
pub fn backdoor_collapse(
    g: &CausalGraph,
    expr: &IntervExpr,
    site: &[usize],
    over: &NodeSet,
) -> Result<(IntervExpr, Vec<Certificate>)> {
    let atom = expr.atom_at(site)?;
    let hats = atom.do_nodes();
    if hats.is_empty() {
        return Err(Error::InvalidArgument(format!("{atom} has no intervention to remove")));
    }
    let expanded = expand_total_probability(expr, site, over)?;
    let sub = |tail: &[usize]| -> Site { site.iter().chain(tail).copied().collect() };
    let r3 = apply_rule(g, &expanded, &sub(&[0, 1]), Rule::Three, Direction::Backward, &hats)?;
    let r2 = apply_rule(g, &r3.expr, &sub(&[0, 0]), Rule::Two, Direction::Backward, &hats)?;
    Ok((r2.expr, vec![r3.certificate, r2.certificate]))
}

/// First atom matching `pred`, by pre-order.
pub(crate) fn find_atom(e: &IntervExpr, pred: impl Fn(&IntervAtom) -> bool) -> Option<Site> {
    e.atoms().into_iter().find(|(_, a)| pred(a)).map(|(s, _)| s)
}

/// Mechanical front-door proof of `P(y | do(x))` with mediator `z`:
///
/// 1. total probability over `z`;
/// 2. Rule 2 turns `P(z | do(x))` into `P(z | x)`;
/// 3. Rule 2 turns `P(y | z, do(x))` into `P(y | do(x), do(z))`;
/// 4. Rule 3 drops `do(x)`;
/// 5. `P(y | do(z))` is collapsed by back-door adjustment over `x`.
pub fn replay_frontdoor(g: &CausalGraph, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<Derivation> {
    let report = is_frontdoor_set(g, x, y, z)?;
    if !report.satisfied {
        let why = match report.first_failure() {
            Some(c) => format!("condition ({}) fails", ["i", "ii", "iii"][(c as usize).clamp(1, 3) - 1]),
            None => "criterion fails".to_owned(),
        };
        let witness = report.witness.map(|p| format!(", witness {p}")).unwrap_or_default();
        return Err(Error::CriterionNotSatisfied(format!(
            "{} is not a front-door set for ({}, {}): {why}{witness}",
            crate::cgraph::fmt_set(z),
            crate::cgraph::fmt_set(x),
            crate::cgraph::fmt_set(y)
        )));
    }
    let goal = IntervAtom::query(y, x, &NodeSet::new())?;
    let mut b = Builder::new(g, goal);
    b.expand("Preamble", &[], z)?;

    let is_mediator_term = |a: &IntervAtom| a.outcome_nodes() == *z && a.do_nodes() == *x;
    let site = find_atom(b.current(), is_mediator_term).expect("expansion produces P(z|do(x))");
    b.rule("Step 1", &site, Rule::Two, Direction::Backward, x)?;

    let site = find_atom(b.current(), |a| a.outcome_nodes() == *y).expect("outcome term present");
    b.rule("Step 3", &site, Rule::Two, Direction::Forward, z)?;
    b.rule("Step 3", &site, Rule::Three, Direction::Backward, x)?;
    b.collapse("Step 2", &site, x)?;
    b.canonicalize_current();
    Ok(b.finish())
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "goal: {}", self.goal)?;
        for (i, s) in self.steps.iter().enumerate() {
            let label = s.label.as_deref().map(|l| format!("[{l}] ")).unwrap_or_default();
            let moved = crate::cgraph::fmt_set(&s.moved);
            let dir = match s.direction {
                Some(Direction::Forward) => " forward",
                Some(Direction::Backward) => " backward",
                None => "",
            };
            writeln!(f, "{:>2}. {label}{}{dir} on {moved}", i + 1, s.kind)?;
            writeln!(f, "      {}", s.before_text)?;
            writeln!(f, "    = {}", s.after_text)?;
            for c in &s.certificates {
                writeln!(f, "      because {c}")?;
            }
        }
        write!(f, "result: {}", self.result_text)
    }
}
