//! Prenex normal form, fragment classification and fragment normalization.
//!
//! Quantifier extraction keeps track of which quantifier blocks came from
//! independent subformulas: blocks extracted from the two sides of a binary
//! connective never constrain each other's order. Classification therefore
//! asks whether some linearisation of that partial order lands in the target
//! prefix class, which is what lets a conjunction of a universal and an
//! existential observation classify as `exists*forall*`.
//!
//! Linearising towards a target fuses compatible quantifier layers (universal
//! layers across a conjunction, existential layers across a disjunction) so
//! prefixes stay short; this matters when a whole theory sentence is in the
//! conjunction.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::{Formula, Stage, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quant {
    Forall,
    Exists,
}

impl Quant {
    fn flip(self) -> Quant {
        match self {
            Quant::Forall => Quant::Exists,
            Quant::Exists => Quant::Forall,
        }
    }
}

/// Prefix classes reachable by reordering independent quantifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentTag {
    /// `exists*forall*` only.
    ExistsForall,
    /// `forall*exists*` only.
    ForallExists,
    /// Both classes are reachable.
    Both,
    /// Neither class is reachable.
    Other,
}

impl FragmentTag {
    pub fn allows_exists_forall(self) -> bool {
        matches!(self, FragmentTag::ExistsForall | FragmentTag::Both)
    }

    pub fn allows_forall_exists(self) -> bool {
        matches!(self, FragmentTag::ForallExists | FragmentTag::Both)
    }
}

/// The two normalization targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    ExistsForall,
    ForallExists,
}

/// A formula split into a quantifier prefix and a quantifier-free matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrenexFormula {
    pub prefix: Vec<(Quant, String)>,
    pub matrix: Formula,
}

impl PrenexFormula {
    /// Rebuilds the ordinary formula by re-attaching the prefix.
    pub fn to_formula(&self) -> Formula {
        let mut f = self.matrix.clone();
        for (q, v) in self.prefix.iter().rev() {
            f = match q {
                Quant::Forall => Formula::forall(v.clone(), f),
                Quant::Exists => Formula::exists(v.clone(), f),
            };
        }
        f
    }

    /// True iff the prefix literally reads as existentials followed by
    /// universals.
    pub fn is_exists_forall(&self) -> bool {
        let first_forall = self.prefix.iter().position(|(q, _)| *q == Quant::Forall);
        match first_forall {
            None => true,
            Some(i) => self.prefix[i..].iter().all(|(q, _)| *q == Quant::Forall),
        }
    }

    pub fn exists_count(&self) -> usize {
        self.prefix.iter().filter(|(q, _)| *q == Quant::Exists).count()
    }
}

impl fmt::Display for PrenexFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, v) in &self.prefix {
            match q {
                Quant::Forall => write!(f, "forall {v}. ")?,
                Quant::Exists => write!(f, "exists {v}. ")?,
            }
        }
        write!(f, "{}", self.matrix)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrenexError {
    #[error("formula contains a minimize node")]
    MinimizePresent,
}

// Negation normal form; also eliminates implications.
fn nnf(f: &Formula, positive: bool) -> Formula {
    match f {
        Formula::True => {
            if positive {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::False => {
            if positive {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::Unary(..) | Formula::Link(..) | Formula::Eq(..) => {
            if positive {
                f.clone()
            } else {
                Formula::not(f.clone())
            }
        }
        Formula::Not(g) => nnf(g, !positive),
        Formula::And(l, r) => {
            if positive {
                Formula::and(nnf(l, true), nnf(r, true))
            } else {
                Formula::or(nnf(l, false), nnf(r, false))
            }
        }
        Formula::Or(l, r) => {
            if positive {
                Formula::or(nnf(l, true), nnf(r, true))
            } else {
                Formula::and(nnf(l, false), nnf(r, false))
            }
        }
        Formula::Implies(l, r) => {
            if positive {
                Formula::or(nnf(l, false), nnf(r, true))
            } else {
                Formula::and(nnf(l, true), nnf(r, false))
            }
        }
        Formula::Forall(v, g) => {
            if positive {
                Formula::forall(v.clone(), nnf(g, true))
            } else {
                Formula::exists(v.clone(), nnf(g, false))
            }
        }
        Formula::Exists(v, g) => {
            if positive {
                Formula::exists(v.clone(), nnf(g, true))
            } else {
                Formula::forall(v.clone(), nnf(g, false))
            }
        }
        Formula::Minimize(_) => unreachable!("minimize rejected before NNF"),
    }
}

// Quantifier block structure of an NNF formula. `Node` children come from
// independent subformulas of one connective.
enum PTree {
    Leaf(Formula),
    Quant(Quant, String, Box<PTree>),
    Node(NodeOp, Vec<PTree>),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum NodeOp {
    And,
    Or,
}

fn extract(f: &Formula) -> PTree {
    match f {
        Formula::Forall(v, g) => PTree::Quant(Quant::Forall, v.clone(), Box::new(extract(g))),
        Formula::Exists(v, g) => PTree::Quant(Quant::Exists, v.clone(), Box::new(extract(g))),
        Formula::And(l, r) => collect_node(NodeOp::And, l, r),
        Formula::Or(l, r) => collect_node(NodeOp::Or, l, r),
        _ => PTree::Leaf(f.clone()),
    }
}

fn collect_node(op: NodeOp, l: &Formula, r: &Formula) -> PTree {
    let mut children = Vec::new();
    for side in [l, r] {
        match extract(side) {
            PTree::Node(o, cs) if o == op => children.extend(cs),
            other => children.push(other),
        }
    }
    PTree::Node(op, children)
}

fn contains_quant(t: &PTree, q: Quant) -> bool {
    match t {
        PTree::Leaf(_) => false,
        PTree::Quant(qq, _, c) => *qq == q || contains_quant(c, q),
        PTree::Node(_, cs) => cs.iter().any(|c| contains_quant(c, q)),
    }
}

// A linearisation with all existentials first exists iff no universal is
// forced before an existential along a nesting chain.
fn reachable(t: &PTree, first: Quant) -> bool {
    match t {
        PTree::Leaf(_) => true,
        PTree::Quant(q, _, c) => {
            if *q == first {
                reachable(c, first)
            } else {
                reachable(c, first) && !contains_quant(c, first)
            }
        }
        PTree::Node(_, cs) => cs.iter().all(|c| reachable(c, first)),
    }
}

fn natural_flatten(t: &PTree, prefix: &mut Vec<(Quant, String)>) -> Formula {
    match t {
        PTree::Leaf(f) => f.clone(),
        PTree::Quant(q, v, c) => {
            prefix.push((*q, v.clone()));
            natural_flatten(c, prefix)
        }
        PTree::Node(op, cs) => {
            let mut matrices = Vec::new();
            for c in cs {
                matrices.push(natural_flatten(c, prefix));
            }
            rebuild(*op, matrices)
        }
    }
}

fn rebuild(op: NodeOp, matrices: Vec<Formula>) -> Formula {
    match op {
        NodeOp::And => Formula::and_all(matrices),
        NodeOp::Or => Formula::or_all(matrices),
    }
}

struct Fresh {
    used: BTreeSet<String>,
    counter: usize,
}

impl Fresh {
    fn next(&mut self) -> String {
        loop {
            self.counter += 1;
            let cand = format!("q{}", self.counter);
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
    }
}

// Target-ordered linearisation. Returns the block of `first`-quantified
// variables, the block of the other kind, and the matrix. Universal layers
// fuse across conjunctions and existential layers across disjunctions; other
// combinations concatenate.
fn target_flatten(t: &PTree, first: Quant, fresh: &mut Fresh) -> (Vec<String>, Vec<String>, Formula) {
    match t {
        PTree::Leaf(f) => (Vec::new(), Vec::new(), f.clone()),
        PTree::Quant(q, v, c) => {
            let (mut firsts, mut seconds, m) = target_flatten(c, first, fresh);
            if *q == first {
                firsts.insert(0, v.clone());
            } else {
                seconds.insert(0, v.clone());
            }
            (firsts, seconds, m)
        }
        PTree::Node(op, cs) => {
            let fusable = match op {
                NodeOp::And => Quant::Forall,
                NodeOp::Or => Quant::Exists,
            };
            let parts: Vec<_> = cs.iter().map(|c| target_flatten(c, first, fresh)).collect();
            let mut firsts = Vec::new();
            let mut seconds = Vec::new();
            let mut matrices = Vec::new();
            // fused layer names, grown on demand
            let mut fused: Vec<String> = Vec::new();
            for (f_block, s_block, mut m) in parts {
                for (block, kind) in [(f_block, first), (s_block, first.flip())] {
                    if kind == fusable {
                        for (layer, v) in block.iter().enumerate() {
                            if layer == fused.len() {
                                fused.push(fresh.next());
                            }
                            m = m.substitute_var(v, &Term::Var(fused[layer].clone()));
                        }
                    } else if kind == first {
                        firsts.extend(block);
                    } else {
                        seconds.extend(block);
                    }
                }
                matrices.push(m);
            }
            if fusable == first {
                firsts.extend(fused);
            } else {
                seconds.extend(fused);
            }
            (firsts, seconds, rebuild(*op, matrices))
        }
    }
}

fn classify(t: &PTree) -> FragmentTag {
    let ea = reachable(t, Quant::Exists);
    let ae = reachable(t, Quant::Forall);
    match (ea, ae) {
        (true, true) => FragmentTag::Both,
        (true, false) => FragmentTag::ExistsForall,
        (false, true) => FragmentTag::ForallExists,
        (false, false) => FragmentTag::Other,
    }
}

/// Converts to prenex normal form. The returned prefix follows the input's
/// quantifier nesting order; the tag reports which prefix classes are
/// reachable by reordering independent quantifiers.
pub fn normalize_prenex(f: &Formula) -> Result<(PrenexFormula, FragmentTag), PrenexError> {
    if f.contains_minimize() {
        return Err(PrenexError::MinimizePresent);
    }
    let f = f.rename_apart();
    let n = nnf(&f, true);
    let tree = extract(&n);
    let tag = classify(&tree);
    let mut prefix = Vec::new();
    let matrix = natural_flatten(&tree, &mut prefix);
    Ok((PrenexFormula { prefix, matrix }, tag))
}

/// Prenexes directly into the target order (existentials first for
/// `exists*forall*`), fusing layers to keep the prefix short. Returns `None`
/// if the target class is not reachable by reordering alone.
pub fn prenex_into(f: &Formula, target: Target) -> Result<Option<PrenexFormula>, PrenexError> {
    if f.contains_minimize() {
        return Err(PrenexError::MinimizePresent);
    }
    let f = f.rename_apart();
    let n = nnf(&f, true);
    let tree = extract(&n);
    let first = match target {
        Target::ExistsForall => Quant::Exists,
        Target::ForallExists => Quant::Forall,
    };
    if !reachable(&tree, first) {
        return Ok(None);
    }
    let mut fresh = Fresh { used: n.all_variables(), counter: 0 };
    let (firsts, seconds, matrix) = target_flatten(&tree, first, &mut fresh);
    let mut prefix: Vec<(Quant, String)> =
        firsts.into_iter().map(|v| (first, v)).collect();
    prefix.extend(seconds.into_iter().map(|v| (first.flip(), v)));
    // drop vacuous quantifiers
    let free = matrix.free_variables();
    prefix.retain(|(_, v)| free.contains(v));
    Ok(Some(PrenexFormula { prefix, matrix }))
}

// ---------------------------------------------------------------------------
// Fragment normalization by bounded rewrite search.
// ---------------------------------------------------------------------------

/// Does the guard atom pin the quantified variable to at most one node? True
/// when one argument is the bare variable and the other does not mention it.
fn split_guard<'a>(var: &str, a: &'a Term, b: &'a Term) -> Option<&'a Term> {
    let bare = |t: &Term| matches!(t, Term::Var(v) if v == var);
    if bare(a) && b.var() != var {
        Some(b)
    } else if bare(b) && a.var() != var {
        Some(a)
    } else {
        None
    }
}

fn link_guard(f: &Formula, var: &str) -> Option<(Stage, Term, Term)> {
    if let Formula::Link(s, a, b) = f {
        split_guard(var, a, b)?;
        return Some((*s, a.clone(), b.clone()));
    }
    None
}

// One rewrite step applied at the root of a subformula. Rewrites are
// equivalences modulo link functionality, except the equality-guard
// eliminations which are plain first-order equivalences.
fn root_rewrites(f: &Formula) -> Vec<Formula> {
    let mut out = Vec::new();
    match f {
        // forall y. R(x,y) -> psi  ==  (forall y. !R(x,y)) | (exists y. R(x,y) & psi)
        Formula::Forall(y, body) => {
            if let Formula::Implies(guard, psi) = body.as_ref() {
                if let Some((s, a, b)) = link_guard(guard, y) {
                    out.push(Formula::or(
                        Formula::forall(
                            y.clone(),
                            Formula::not(Formula::Link(s, a.clone(), b.clone())),
                        ),
                        Formula::exists(
                            y.clone(),
                            Formula::and(Formula::Link(s, a, b), psi.as_ref().clone()),
                        ),
                    ));
                }
                // forall y. y = u -> psi  ==  psi[u/y]
                if let Formula::Eq(a, b) = guard.as_ref() {
                    if let Some(u) = split_guard(y, a, b) {
                        out.push(psi.substitute_var(y, u));
                    }
                }
            }
        }
        // exists y. R(x,y) & psi  ==  (exists y. R(x,y)) & (forall y. R(x,y) -> psi)
        Formula::Exists(y, body) => {
            if let Formula::And(guard, psi) = body.as_ref() {
                if let Some((s, a, b)) = link_guard(guard, y) {
                    out.push(Formula::and(
                        Formula::exists(y.clone(), Formula::Link(s, a.clone(), b.clone())),
                        Formula::forall(
                            y.clone(),
                            Formula::implies(Formula::Link(s, a, b), psi.as_ref().clone()),
                        ),
                    ));
                }
                if let Formula::Eq(a, b) = guard.as_ref() {
                    if let Some(u) = split_guard(y, a, b) {
                        out.push(psi.substitute_var(y, u));
                    }
                }
            }
        }
        // reverse functionality switch for the universal form
        Formula::Or(l, r) => {
            if let (Formula::Forall(y1, neg), Formula::Exists(y2, conj)) = (l.as_ref(), r.as_ref())
            {
                if let (Formula::Not(g1), Formula::And(g2, psi)) = (neg.as_ref(), conj.as_ref()) {
                    let renamed = g1.substitute_var(y1, &Term::Var(y2.clone()));
                    if renamed == *g2.as_ref() && link_guard(g2, y2).is_some() {
                        out.push(Formula::forall(
                            y2.clone(),
                            Formula::implies(g2.as_ref().clone(), psi.as_ref().clone()),
                        ));
                    }
                }
            }
            // boolean distribution: (a & b) | (a & c) == a & (b | c)
            if let (Formula::And(a1, b), Formula::And(a2, c)) = (l.as_ref(), r.as_ref()) {
                if a1 == a2 {
                    out.push(Formula::and(
                        a1.as_ref().clone(),
                        Formula::or(b.as_ref().clone(), c.as_ref().clone()),
                    ));
                }
            }
        }
        Formula::And(l, r) => {
            // reverse functionality switch for the existential form
            if let (Formula::Exists(y1, g1), Formula::Forall(y2, imp)) = (l.as_ref(), r.as_ref()) {
                if let Formula::Implies(g2, psi) = imp.as_ref() {
                    let renamed = g1.substitute_var(y1, &Term::Var(y2.clone()));
                    if renamed == *g2.as_ref() && link_guard(g2, y2).is_some() {
                        out.push(Formula::exists(
                            y2.clone(),
                            Formula::and(g2.as_ref().clone(), psi.as_ref().clone()),
                        ));
                    }
                }
            }
            // boolean distribution: a & (b | c) == (a & b) | (a & c)
            if let Formula::Or(b, c) = r.as_ref() {
                out.push(Formula::or(
                    Formula::and(l.as_ref().clone(), b.as_ref().clone()),
                    Formula::and(l.as_ref().clone(), c.as_ref().clone()),
                ));
            }
        }
        _ => {}
    }
    out
}

// All single-step rewrites anywhere in the formula.
fn all_rewrites(f: &Formula) -> Vec<Formula> {
    let mut out = root_rewrites(f);
    match f {
        Formula::Not(g) => {
            out.extend(all_rewrites(g).into_iter().map(Formula::not));
        }
        Formula::And(l, r) => {
            out.extend(all_rewrites(l).into_iter().map(|nl| Formula::and(nl, r.as_ref().clone())));
            out.extend(all_rewrites(r).into_iter().map(|nr| Formula::and(l.as_ref().clone(), nr)));
        }
        Formula::Or(l, r) => {
            out.extend(all_rewrites(l).into_iter().map(|nl| Formula::or(nl, r.as_ref().clone())));
            out.extend(all_rewrites(r).into_iter().map(|nr| Formula::or(l.as_ref().clone(), nr)));
        }
        Formula::Implies(l, r) => {
            out.extend(
                all_rewrites(l).into_iter().map(|nl| Formula::implies(nl, r.as_ref().clone())),
            );
            out.extend(
                all_rewrites(r).into_iter().map(|nr| Formula::implies(l.as_ref().clone(), nr)),
            );
        }
        Formula::Forall(v, g) => {
            out.extend(all_rewrites(g).into_iter().map(|ng| Formula::forall(v.clone(), ng)));
        }
        Formula::Exists(v, g) => {
            out.extend(all_rewrites(g).into_iter().map(|ng| Formula::exists(v.clone(), ng)));
        }
        _ => {}
    }
    out
}

const SEARCH_STATE_CAP: usize = 20_000;

/// Searches for a prenex form of `f` in the target fragment, using standard
/// prenex moves, the functionality switch on link-guarded quantifiers (both
/// directions) and boolean distribution. The search is breadth-first and
/// bounded; `None` means "not found within the bound", not "impossible". The
/// result is equivalent to the input on every structure whose link relations
/// are functional.
pub fn fragment_normalize(f: &Formula, target: Target) -> Result<Option<PrenexFormula>, PrenexError> {
    if f.contains_minimize() {
        return Err(PrenexError::MinimizePresent);
    }
    let start = f.rename_apart();
    let max_depth = 2 * start.quantifier_count().max(1);
    let mut queue = VecDeque::new();
    let mut seen = HashSet::new();
    queue.push_back((start.clone(), 0usize));
    seen.insert(start);
    while let Some((state, depth)) = queue.pop_front() {
        if let Some(pf) = prenex_into(&state, target)? {
            return Ok(Some(pf));
        }
        if depth >= max_depth || seen.len() >= SEARCH_STATE_CAP {
            continue;
        }
        for next in all_rewrites(&state) {
            if seen.insert(next.clone()) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_formula, parse_signature};
    use crate::syntax::FlbSignature;

    fn sig() -> FlbSignature {
        parse_signature("height 1\nchildren f1 f2\nlabels Phos Active\nnames Raf1 Src Tyr")
            .unwrap()
    }

    #[test]
    fn single_universal_tags_both() {
        let f = parse_formula("forall y. Link*(x,y) -> !Active*(parent(x))", &sig()).unwrap();
        let (pf, tag) = normalize_prenex(&f).unwrap();
        assert_eq!(pf.prefix.len(), 1);
        assert_eq!(pf.prefix[0].0, Quant::Forall);
        assert_eq!(tag, FragmentTag::Both);
    }

    #[test]
    fn quantifier_free_literal_tags_both() {
        let f = parse_formula("P(x)", &sig()).unwrap();
        let (pf, tag) = normalize_prenex(&f).unwrap();
        assert!(pf.prefix.is_empty());
        assert_eq!(tag, FragmentTag::Both);
    }

    #[test]
    fn independent_quantifiers_reorder() {
        // conjunction of a universal and an existential block: both classes
        // reachable because the blocks are independent
        let f = parse_formula(
            "(forall y. Link*(x,y) -> !Active*(parent(x))) & (exists z. Src(z) & Link*(x,z))",
            &sig(),
        )
        .unwrap();
        let (pf, tag) = normalize_prenex(&f).unwrap();
        assert_eq!(pf.prefix.len(), 2);
        assert_eq!(tag, FragmentTag::Both);
        let ea = prenex_into(&f, Target::ExistsForall).unwrap().unwrap();
        assert!(ea.is_exists_forall());
        assert_eq!(ea.prefix.len(), 2);
    }

    #[test]
    fn nested_dependent_quantifiers_tag_directionally() {
        let f = parse_formula("forall y. exists z. Link*(y,z)", &sig()).unwrap();
        let (_, tag) = normalize_prenex(&f).unwrap();
        assert_eq!(tag, FragmentTag::ForallExists);
        let g = parse_formula("exists y. forall z. Link*(y,z)", &sig()).unwrap();
        let (_, tag) = normalize_prenex(&g).unwrap();
        assert_eq!(tag, FragmentTag::ExistsForall);
    }

    #[test]
    fn minimize_is_rejected() {
        let f = parse_formula("minimize(P(x))", &sig()).unwrap();
        assert_eq!(normalize_prenex(&f).unwrap_err(), PrenexError::MinimizePresent);
    }

    #[test]
    fn functionality_switch_reaches_exists_forall() {
        // the guarded universal needs one switch to become exists*forall*
        let f = parse_formula("forall y. Link*(x,y) -> Src(y)", &sig()).unwrap();
        let (_, tag) = normalize_prenex(&f).unwrap();
        assert_eq!(tag, FragmentTag::Both); // single universal is already both
        // force a genuine switch: existential below the universal
        let g = parse_formula(
            "forall y. Link*(x,y) -> (exists z. Src(z) & Link*(y,z))",
            &sig(),
        )
        .unwrap();
        let (_, tag) = normalize_prenex(&g).unwrap();
        assert_eq!(tag, FragmentTag::ForallExists);
        let ea = fragment_normalize(&g, Target::ExistsForall).unwrap().unwrap();
        assert!(ea.is_exists_forall(), "prefix: {:?}", ea.prefix);
    }

    #[test]
    fn already_in_target_returns_prenexed_input() {
        let f = parse_formula("exists z. forall y. Link(z,y) -> Src(z)", &sig()).unwrap();
        let pf = fragment_normalize(&f, Target::ExistsForall).unwrap().unwrap();
        assert!(pf.is_exists_forall());
        assert_eq!(pf.prefix.len(), 2);
    }

    #[test]
    fn fused_universal_layers_stay_short() {
        // two independent universal blocks over a conjunction share variables
        let f = parse_formula("(forall x. P(x)) & (forall y. P*(y))", &sig()).unwrap();
        let ea = prenex_into(&f, Target::ExistsForall).unwrap().unwrap();
        assert_eq!(ea.prefix.len(), 1, "prefix: {:?}", ea.prefix);
    }

    #[test]
    fn equality_guard_eliminates_quantifier() {
        let f = parse_formula("forall y. y = parent(x) -> Phos*(y)", &sig()).unwrap();
        let rewrites = all_rewrites(&f);
        let target = parse_formula("Phos*(parent(x))", &sig()).unwrap();
        assert!(rewrites.contains(&target), "{rewrites:?}");
    }
}
