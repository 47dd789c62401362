use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use super::expr::{IntervAtom, IntervExpr, Terms, Value};
use crate::cgraph::{NodeId, NodeSet};
use crate::error::{Error, Result};
use crate::probtab::{conditional, Assignment, Cbn, JointTable, Scalar};

trait Source<T: Scalar> {
    fn cardinality(&self, node: &str) -> Result<usize>;
    fn atom(&self, outcome: &Assignment, do_set: &Assignment, cond: &Assignment) -> Result<T>;
}

struct Observational<'a, T>(&'a JointTable<T>);

impl<T: Scalar> Source<T> for Observational<'_, T> {
    fn cardinality(&self, node: &str) -> Result<usize> {
        self.0.cardinality(node)
    }

    fn atom(&self, outcome: &Assignment, do_set: &Assignment, cond: &Assignment) -> Result<T> {
        if !do_set.is_empty() {
            return Err(Error::NotHatFree(format!("intervention on {do_set}")));
        }
        conditional(self.0, outcome, cond)
    }
}

struct Model<'a, T> {
    cbn: &'a Cbn,
    observational: JointTable<T>,
    // truncated-factorization tables keyed by intervention
    oracle: RefCell<HashMap<Assignment, JointTable<T>>>,
}

impl<T: Scalar> Source<T> for Model<'_, T> {
    fn cardinality(&self, node: &str) -> Result<usize> {
        self.cbn.cardinality(node)
    }

    fn atom(&self, outcome: &Assignment, do_set: &Assignment, cond: &Assignment) -> Result<T> {
        if do_set.is_empty() {
            return conditional(&self.observational, outcome, cond);
        }
        let mut cache = self.oracle.borrow_mut();
        if !cache.contains_key(do_set) {
            let rest: NodeSet = self
                .cbn
                .graph()
                .observed()
                .into_iter()
                .filter(|n| !do_set.contains(n.as_str()))
                .collect();
            cache.insert(do_set.clone(), self.cbn.intervene_oracle(do_set, &rest)?);
        }
        conditional(&cache[do_set], outcome, cond)
    }
}

fn bind(terms: &Terms, free: &Assignment, env: &BTreeMap<u32, usize>) -> Result<Assignment> {
    terms
        .iter()
        .map(|(n, v)| {
            let state = match v {
                Value::Free => free.get(n.as_str()),
                Value::Bound(id) => env.get(id).copied(),
            };
            state
                .map(|s| (n.clone(), s))
                .ok_or_else(|| Error::UnboundVariable(n.to_string()))
        })
        .collect()
}

fn eval<T: Scalar>(
    e: &IntervExpr,
    src: &dyn Source<T>,
    free: &Assignment,
    env: &mut BTreeMap<u32, usize>,
) -> Result<T> {
    match e {
        IntervExpr::Atom(a) => eval_atom(a, src, free, env),
        IntervExpr::Product(fs) => {
            let mut acc = T::one();
            for f in fs {
                acc = acc * eval(f, src, free, env)?;
            }
            Ok(acc)
        }
        IntervExpr::Sum { bound, body } => {
            let vars: Vec<(&NodeId, u32, usize)> = bound
                .iter()
                .map(|(n, &id)| Ok((n, id, src.cardinality(n.as_str())?)))
                .collect::<Result<_>>()?;
            let saved: Vec<Option<usize>> = vars.iter().map(|(_, id, _)| env.get(id).copied()).collect();
            let mut states = vec![0usize; vars.len()];
            let mut total = T::zero();
            'odometer: loop {
                for ((_, id, _), &s) in vars.iter().zip(&states) {
                    env.insert(*id, s);
                }
                total = total + eval(body, src, free, env)?;
                for k in (0..vars.len()).rev() {
                    states[k] += 1;
                    if states[k] < vars[k].2 {
                        continue 'odometer;
                    }
                    states[k] = 0;
                }
                break;
            }
            for ((_, id, _), prev) in vars.iter().zip(saved) {
                match prev {
                    Some(s) => env.insert(*id, s),
                    None => env.remove(id),
                };
            }
            Ok(total)
        }
    }
}

fn eval_atom<T: Scalar>(a: &IntervAtom, src: &dyn Source<T>, free: &Assignment, env: &BTreeMap<u32, usize>) -> Result<T> {
    let outcome = bind(&a.outcome, free, env)?;
    let do_set = bind(&a.do_set, free, env)?;
    let cond = bind(&a.cond, free, env)?;
    src.atom(&outcome, &do_set, &cond)
}

/// Value of a hat-free expression on an observational table, with free
/// variables taking their states from `free`.
pub fn eval_expr<T: Scalar>(expr: &IntervExpr, table: &JointTable<T>, free: &Assignment) -> Result<T> {
    if !expr.is_hat_free() {
        return Err(Error::NotHatFree(expr.to_text()));
    }
    eval(expr, &Observational(table), free, &mut BTreeMap::new())
}

/// Value of any expression under a model: intervened atoms by truncated
/// factorization, the rest from the observational joint.
pub fn eval_with_model<T: Scalar>(expr: &IntervExpr, cbn: &Cbn, free: &Assignment) -> Result<T> {
    let src = Model {
        cbn,
        observational: cbn.observational_joint(),
        oracle: RefCell::new(HashMap::new()),
    };
    eval(expr, &src, free, &mut BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgraph::node_set;
    use crate::docalculus::expr::build::*;
    use crate::docalculus::expr::frontdoor_formula;
    use crate::probtab::{cbn::fixtures::model_a, Rational};

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn frontdoor_formula_on_model_a() {
        let m = model_a();
        let t: JointTable<Rational> = m.observational_joint();
        let f = frontdoor_formula(&node_set(["X"]), &node_set(["Y"]), &node_set(["Z"]));
        let at = Assignment::new().with("X", 1).with("Y", 1);
        assert_eq!(eval_expr(&f, &t, &at).unwrap(), q(141, 200));
        let hat = atom(terms([free("Y")]), terms([free("X")]), Terms::new());
        assert_eq!(eval_with_model::<Rational>(&hat, &m, &at).unwrap(), q(141, 200));
        assert!(matches!(eval_expr(&hat, &t, &at), Err(Error::NotHatFree(_))));
    }

    #[test]
    fn copy_variable() {
        let t = JointTable::new(vec![("X".into(), 2), ("Y".into(), 2)], vec![0.4, 0.0, 0.0, 0.6]).unwrap();
        let e = atom(terms([free("Y")]), Terms::new(), terms([free("X")]));
        let v = eval_expr(&e, &t, &Assignment::new().with("X", 1).with("Y", 1)).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn summing_out_the_outcome_gives_one() {
        let t: JointTable<Rational> = model_a().observational_joint();
        let e = sum(&[("Y", 0)], atom(terms([bound("Y", 0)]), Terms::new(), terms([free("X")])));
        assert_eq!(eval_expr(&e, &t, &Assignment::new().with("X", 0)).unwrap(), q(1, 1));
    }

    #[test]
    fn unbound_and_zero_conditioning() {
        let t = JointTable::new(vec![("X".into(), 2), ("Y".into(), 2)], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let e = atom(terms([free("Y")]), Terms::new(), terms([free("X")]));
        assert_eq!(
            eval_expr(&e, &t, &Assignment::new().with("Y", 0)).unwrap_err(),
            Error::UnboundVariable("X".into())
        );
        assert!(matches!(
            eval_expr(&e, &t, &Assignment::new().with("X", 1).with("Y", 0)),
            Err(Error::ConditioningOnZero(_))
        ));
    }
}
