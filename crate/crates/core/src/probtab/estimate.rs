use super::{is_zero, Assignment, JointTable, Scalar};
use crate::cgraph::{NodeId, NodeSet};
use crate::error::{Error, Result};

/// `P(target | given)` as a ratio of marginals.
pub fn conditional<T: Scalar>(t: &JointTable<T>, target: &Assignment, given: &Assignment) -> Result<T> {
    let denom = t.mass(given)?;
    if is_zero(&denom) {
        return Err(Error::ConditioningOnZero(format!("P({given}) = 0")));
    }
    match target.merge(given) {
        Some(joint) => Ok(t.mass(&joint)? / denom),
        // contradictory event
        None => {
            t.mass(target)?;
            Ok(T::zero())
        }
    }
}

/// Every assignment of `vars`, last variable fastest.
fn assignments(t: &JointTable<impl Scalar>, vars: &[NodeId]) -> Result<Vec<Assignment>> {
    let mut out = vec![Assignment::new()];
    for v in vars {
        let card = t.cardinality(v.as_str())?;
        out = out
            .into_iter()
            .flat_map(|a| (0..card).map(move |s| a.clone().with(v.clone(), s)))
            .collect();
    }
    Ok(out)
}

fn distinct(nodes: &[&NodeId]) -> Result<()> {
    for (i, a) in nodes.iter().enumerate() {
        if nodes[i + 1..].contains(a) {
            return Err(Error::OverlappingSets(a.to_string()));
        }
    }
    Ok(())
}

/// Front-door adjustment `Σ_z P(z|x) Σ_x' P(y|x',z) P(x')`.
///
/// Positivity is required for every `(x', z)` cell, since the inner sum
/// touches every treatment state.
pub fn frontdoor_estimate<T: Scalar>(
    t: &JointTable<T>,
    x: &str,
    z: &NodeSet,
    y: &str,
    x_val: usize,
    y_val: usize,
) -> Result<T> {
    let (x, y) = (NodeId::from(x), NodeId::from(y));
    let mut all: Vec<&NodeId> = vec![&x, &y];
    all.extend(z.iter());
    distinct(&all)?;
    let mut vars: Vec<NodeId> = vec![x.clone()];
    vars.extend(z.iter().cloned());
    vars.push(y.clone());
    let t = t.marginal(&vars)?;
    let z_vars: Vec<NodeId> = z.iter().cloned().collect();
    let z_states = assignments(&t, &z_vars)?;
    let x_states = assignments(&t, std::slice::from_ref(&x))?;

    for xs in &x_states {
        for zs in &z_states {
            let cell = xs.merge(zs).unwrap();
            if is_zero(&t.mass(&cell)?) {
                return Err(Error::PositivityViolation(format!("P({cell})")));
            }
        }
    }

    let x_fixed = Assignment::new().with(x.clone(), x_val);
    let y_fixed = Assignment::new().with(y.clone(), y_val);
    t.mass(&x_fixed)?;
    t.mass(&y_fixed)?;
    let mut total = T::zero();
    for zs in &z_states {
        let p_z = conditional(&t, zs, &x_fixed)?;
        let mut inner = T::zero();
        for xs in &x_states {
            let given = xs.merge(zs).unwrap();
            inner = inner + conditional(&t, &y_fixed, &given)? * t.mass(xs)?;
        }
        total = total + p_z * inner;
    }
    Ok(total)
}

/// Back-door adjustment `Σ_a P(y | x, a) P(a)` over adjustment states with
/// positive mass.
pub fn backdoor_estimate<T: Scalar>(
    t: &JointTable<T>,
    treat: &str,
    outcome: &str,
    adjust: &NodeSet,
    treat_val: usize,
    outcome_val: usize,
) -> Result<T> {
    let (x, y) = (NodeId::from(treat), NodeId::from(outcome));
    let mut all: Vec<&NodeId> = vec![&x, &y];
    all.extend(adjust.iter());
    distinct(&all)?;
    let mut vars: Vec<NodeId> = vec![x.clone()];
    vars.extend(adjust.iter().cloned());
    vars.push(y.clone());
    let t = t.marginal(&vars)?;
    let a_vars: Vec<NodeId> = adjust.iter().cloned().collect();
    let x_fixed = Assignment::new().with(x, treat_val);
    let y_fixed = Assignment::new().with(y, outcome_val);
    t.mass(&x_fixed)?;
    t.mass(&y_fixed)?;

    let mut total = T::zero();
    for a in assignments(&t, &a_vars)? {
        let p_a = t.mass(&a)?;
        if is_zero(&p_a) {
            continue;
        }
        let given = a.merge(&x_fixed).unwrap();
        if is_zero(&t.mass(&given)?) {
            return Err(Error::PositivityViolation(format!("P({given})")));
        }
        total = total + conditional(&t, &y_fixed, &given)? * p_a;
    }
    Ok(total)
}
