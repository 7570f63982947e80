//! Tarskian evaluation of formulas on finite transition structures.
//!
//! Quantifiers range over the full node set, including unsupported nodes;
//! support is a theory axiom, not a semantic restriction. Evaluation is total
//! on structurally broken structures too, which is what lets the theory
//! sentence act as a validity check. The `minimize` node is the one exception
//! with real cost: it asks the exact finite-structure minimality oracle and
//! is therefore exponential in the number of changes; a cooperative budget
//! caps that search.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{NodeId, Transition};
use crate::syntax::{Formula, FuncSym, Term, UnarySym};

pub type Assignment = BTreeMap<String, NodeId>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("assignment maps `{var}` to unknown node `{node}`")]
    UnknownNode { var: String, node: NodeId },
    #[error("minimality search budget exceeded")]
    BudgetExceeded,
}

/// Candidate-count cap for minimality searches.
#[derive(Debug, Clone)]
pub struct Budget {
    remaining: u64,
}

impl Budget {
    pub fn new(candidates: u64) -> Self {
        Budget { remaining: candidates }
    }

    pub fn unlimited() -> Self {
        Budget { remaining: u64::MAX }
    }

    pub(crate) fn spend(&mut self, n: u64) -> Result<(), EvalError> {
        if self.remaining < n {
            return Err(EvalError::BudgetExceeded);
        }
        self.remaining -= n;
        Ok(())
    }
}

struct Env<'a> {
    t: &'a Transition,
    scope: Vec<(String, NodeId)>,
}

impl<'a> Env<'a> {
    fn lookup(&self, v: &str) -> Result<&NodeId, EvalError> {
        self.scope
            .iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|(_, n)| n)
            .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
    }

    fn term(&self, term: &Term) -> Result<NodeId, EvalError> {
        match term {
            Term::Var(v) => Ok(self.lookup(v)?.clone()),
            Term::App(f, inner) => {
                let node = self.term(inner)?;
                Ok(match f {
                    FuncSym::Parent => self.t.parent_of(&node),
                    FuncSym::Child(c) => self.t.child_of(c, &node),
                })
            }
        }
    }
}

// Flattens a conjunction (or disjunction) and partitions the pieces by
// whether they mention the bound variable.
fn split_by_var<'f>(
    f: &'f Formula,
    v: &str,
    conjunctive: bool,
    dep: &mut Vec<&'f Formula>,
    indep: &mut Vec<&'f Formula>,
) {
    match (f, conjunctive) {
        (Formula::And(l, r), true) | (Formula::Or(l, r), false) => {
            split_by_var(l, v, conjunctive, dep, indep);
            split_by_var(r, v, conjunctive, dep, indep);
        }
        _ => {
            if f.free_variables().contains(v) {
                dep.push(f);
            } else {
                indep.push(f);
            }
        }
    }
}

/// Interprets a term under an assignment.
pub fn eval_term(t: &Transition, a: &Assignment, term: &Term) -> Result<NodeId, EvalError> {
    let env = Env { t, scope: a.iter().map(|(k, v)| (k.clone(), v.clone())).collect() };
    env.term(term)
}

/// Evaluates a formula with no minimality budget cap.
pub fn eval(t: &Transition, a: &Assignment, f: &Formula) -> Result<bool, EvalError> {
    eval_budgeted(t, a, f, &mut Budget::unlimited())
}

/// Evaluates a formula; `minimize` searches stop with
/// [`EvalError::BudgetExceeded`] once the budget runs out.
pub fn eval_budgeted(
    t: &Transition,
    a: &Assignment,
    f: &Formula,
    budget: &mut Budget,
) -> Result<bool, EvalError> {
    for (var, node) in a {
        if !t.nodes().contains(node) {
            return Err(EvalError::UnknownNode { var: var.clone(), node: node.clone() });
        }
    }
    let mut env = Env { t, scope: a.iter().map(|(k, v)| (k.clone(), v.clone())).collect() };
    eval_in(&mut env, f, budget)
}

fn eval_in(env: &mut Env<'_>, f: &Formula, budget: &mut Budget) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Unary(sym, term) => {
            let node = env.term(term)?;
            match sym {
                UnarySym::Presence(s) => env.t.present(*s).contains(&node),
                UnarySym::Label(s, l) => env.t.labelled(*s, l).contains(&node),
                UnarySym::Name(n) => env.t.named(n).contains(&node),
            }
        }
        Formula::Link(s, a, b) => {
            let x = env.term(a)?;
            let y = env.term(b)?;
            env.t.has_link(*s, &x, &y)
        }
        Formula::Eq(a, b) => env.term(a)? == env.term(b)?,
        Formula::Not(g) => !eval_in(env, g, budget)?,
        Formula::And(l, r) => eval_in(env, l, budget)? && eval_in(env, r, budget)?,
        Formula::Or(l, r) => eval_in(env, l, budget)? || eval_in(env, r, budget)?,
        Formula::Implies(l, r) => !eval_in(env, l, budget)? || eval_in(env, r, budget)?,
        Formula::Forall(v, g) => {
            if env.t.nodes().is_empty() {
                return Ok(true);
            }
            // conjuncts not mentioning the bound variable move out of the loop
            let mut dep = Vec::new();
            let mut indep = Vec::new();
            split_by_var(g, v, true, &mut dep, &mut indep);
            for c in &indep {
                if !eval_in(env, c, budget)? {
                    return Ok(false);
                }
            }
            if dep.is_empty() {
                return Ok(true);
            }
            let nodes: Vec<NodeId> = env.t.nodes().iter().cloned().collect();
            let mut all = true;
            'outer: for node in nodes {
                env.scope.push((v.clone(), node));
                for c in &dep {
                    match eval_in(env, c, budget) {
                        Ok(true) => {}
                        Ok(false) => {
                            env.scope.pop();
                            all = false;
                            break 'outer;
                        }
                        Err(e) => {
                            env.scope.pop();
                            return Err(e);
                        }
                    }
                }
                env.scope.pop();
            }
            all
        }
        Formula::Exists(v, g) => {
            if env.t.nodes().is_empty() {
                return Ok(false);
            }
            // disjuncts not mentioning the bound variable move out of the loop
            let mut dep = Vec::new();
            let mut indep = Vec::new();
            split_by_var(g, v, false, &mut dep, &mut indep);
            for c in &indep {
                if eval_in(env, c, budget)? {
                    return Ok(true);
                }
            }
            if dep.is_empty() {
                return Ok(false);
            }
            let nodes: Vec<NodeId> = env.t.nodes().iter().cloned().collect();
            let mut any = false;
            'outer: for node in nodes {
                env.scope.push((v.clone(), node));
                for c in &dep {
                    match eval_in(env, c, budget) {
                        Ok(true) => {
                            env.scope.pop();
                            any = true;
                            break 'outer;
                        }
                        Ok(false) => {}
                        Err(e) => {
                            env.scope.pop();
                            return Err(e);
                        }
                    }
                }
                env.scope.pop();
            }
            any
        }
        Formula::Minimize(g) => {
            if !eval_in(env, g, budget)? {
                return Ok(false);
            }
            let mut mu = Assignment::new();
            for v in g.free_variables() {
                mu.insert(v.clone(), env.lookup(&v)?.clone());
            }
            crate::circumscription::smaller_model_witness_budgeted(env.t, &mu, g, budget)?
                .is_none()
        }
    })
}
