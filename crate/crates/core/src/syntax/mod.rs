//! Signatures, terms and formulas.
//!
//! A signature fixes the tree height bound, the child-function names, the
//! dynamic label predicates and the static name predicates. The presence
//! predicate `P`, the binary `Link` relation, the `parent` function and the
//! starred postcondition twins (`P*`, `Link*`, `Phos*`, ...) are implicit in
//! every signature and may not be redeclared.

pub mod parser;
pub mod prenex;
pub mod theory;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Reserved symbol names that no user declaration may shadow.
pub const RESERVED: &[&str] = &["P", "Link", "parent", "P*", "Link*", "true", "false"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("`{0}` collides with a reserved name")]
    ReservedName(String),
}

/// Vocabulary of a transition logic over forests of linked bounded trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlbSignature {
    /// Height bound `n`: every downward child path has length at most `n`.
    pub height: usize,
    /// Ordered child-function names; the tuple length bounds tree degree.
    pub child_fns: Vec<String>,
    /// Dynamic unary label names (each has an implicit starred twin).
    pub labels: Vec<String>,
    /// Static unary name predicates.
    pub names: Vec<String>,
}

impl FlbSignature {
    pub fn new(
        height: usize,
        child_fns: Vec<String>,
        labels: Vec<String>,
        names: Vec<String>,
    ) -> Result<Self, SignatureError> {
        let mut seen = BTreeSet::new();
        for sym in child_fns.iter().chain(&labels).chain(&names) {
            if RESERVED.contains(&sym.as_str()) || sym.ends_with('*') {
                return Err(SignatureError::ReservedName(sym.clone()));
            }
            if !seen.insert(sym.clone()) {
                return Err(SignatureError::DuplicateSymbol(sym.clone()));
            }
        }
        Ok(FlbSignature { height, child_fns, labels, names })
    }

    pub fn is_child_fn(&self, name: &str) -> bool {
        self.child_fns.iter().any(|f| f == name)
    }

    pub fn is_label(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l == name)
    }

    pub fn is_name(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Node count of the full tree of height `n` and branching `|f|`.
    pub fn full_tree_size(&self) -> usize {
        let b = self.child_fns.len();
        let mut total = 1usize;
        let mut layer = 1usize;
        for _ in 0..self.height {
            layer *= b;
            total += layer;
        }
        total
    }
}

/// Pre- or postcondition side of a dynamic symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Pre,
    Post,
}

impl Stage {
    pub fn star(self) -> &'static str {
        match self {
            Stage::Pre => "",
            Stage::Post => "*",
        }
    }
}

/// Unary predicate symbols: presence, dynamic labels, static names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnarySym {
    Presence(Stage),
    Label(Stage, String),
    Name(String),
}

impl UnarySym {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, UnarySym::Presence(_) | UnarySym::Label(..))
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            UnarySym::Presence(s) | UnarySym::Label(s, _) => Some(*s),
            UnarySym::Name(_) => None,
        }
    }
}

impl fmt::Display for UnarySym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnarySym::Presence(s) => write!(f, "P{}", s.star()),
            UnarySym::Label(s, l) => write!(f, "{}{}", l, s.star()),
            UnarySym::Name(n) => write!(f, "{n}"),
        }
    }
}

/// Unary function symbols: the distinguished `parent` and the child functions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FuncSym {
    Parent,
    Child(String),
}

impl fmt::Display for FuncSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncSym::Parent => write!(f, "parent"),
            FuncSym::Child(c) => write!(f, "{c}"),
        }
    }
}

/// First-order terms. All functions are unary, so a term mentions exactly one
/// variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    App(FuncSym, Box<Term>),
}

impl Term {
    /// The unique variable of the term.
    pub fn var(&self) -> &str {
        match self {
            Term::Var(v) => v,
            Term::App(_, t) => t.var(),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Term {
        match self {
            Term::Var(v) if v == from => Term::Var(to.to_string()),
            Term::Var(_) => self.clone(),
            Term::App(f, t) => Term::App(f.clone(), Box::new(t.rename(from, to))),
        }
    }

    /// Substitutes `repl` for the variable `from`.
    pub fn substitute(&self, from: &str, repl: &Term) -> Term {
        match self {
            Term::Var(v) if v == from => repl.clone(),
            Term::Var(_) => self.clone(),
            Term::App(f, t) => Term::App(f.clone(), Box::new(t.substitute(from, repl))),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(g, t) => write!(f, "{g}({t})"),
        }
    }
}

/// Formulas of the logic, including the change-minimisation node `Minimize`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Unary(UnarySym, Term),
    Link(Stage, Term, Term),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
    Minimize(Box<Formula>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StarError {
    #[error("not a pre-formula: contains postcondition symbol `{0}`")]
    NotPre(String),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::Implies(Box::new(l), Box::new(r))
    }

    pub fn forall(v: impl Into<String>, f: Formula) -> Formula {
        Formula::Forall(v.into(), Box::new(f))
    }

    pub fn exists(v: impl Into<String>, f: Formula) -> Formula {
        Formula::Exists(v.into(), Box::new(f))
    }

    /// Conjunction of a list, dropping trivial `true` conjuncts.
    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out: Option<Formula> = None;
        for f in fs {
            if f == Formula::True {
                continue;
            }
            out = Some(match out {
                None => f,
                Some(acc) => Formula::and(acc, f),
            });
        }
        out.unwrap_or(Formula::True)
    }

    /// Disjunction of a list, dropping trivial `false` disjuncts.
    pub fn or_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out: Option<Formula> = None;
        for f in fs {
            if f == Formula::False {
                continue;
            }
            out = Some(match out {
                None => f,
                Some(acc) => Formula::or(acc, f),
            });
        }
        out.unwrap_or(Formula::False)
    }

    /// Free variables of the formula.
    pub fn free_variables(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Unary(_, t) => {
                    let v = t.var();
                    if !bound.iter().any(|b| b == v) {
                        out.insert(v.to_string());
                    }
                }
                Formula::Link(_, t, u) | Formula::Eq(t, u) => {
                    for v in [t.var(), u.var()] {
                        if !bound.iter().any(|b| b == v) {
                            out.insert(v.to_string());
                        }
                    }
                }
                Formula::Not(g) | Formula::Minimize(g) => go(g, bound, out),
                Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    bound.push(v.clone());
                    go(g, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All variables mentioned anywhere, free or bound.
    pub fn all_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Unary(_, t) => {
                out.insert(t.var().to_string());
            }
            Formula::Link(_, t, u) | Formula::Eq(t, u) => {
                out.insert(t.var().to_string());
                out.insert(u.var().to_string());
            }
            Formula::Forall(v, _) | Formula::Exists(v, _) => {
                out.insert(v.clone());
            }
            _ => {}
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Not(g) | Formula::Minimize(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => {
                g.visit(f)
            }
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            _ => {}
        }
    }

    pub fn contains_minimize(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| {
            if matches!(f, Formula::Minimize(_)) {
                found = true;
            }
        });
        found
    }

    pub fn quantifier_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |f| {
            if matches!(f, Formula::Forall(..) | Formula::Exists(..)) {
                n += 1;
            }
        });
        n
    }

    /// True iff the formula uses no postcondition symbol.
    pub fn is_pre(&self) -> bool {
        let mut pre = true;
        self.visit(&mut |f| match f {
            Formula::Unary(s, _) if s.stage() == Some(Stage::Post) => pre = false,
            Formula::Link(Stage::Post, ..) => pre = false,
            _ => {}
        });
        pre
    }

    /// Replaces every precondition dynamic symbol by its starred counterpart.
    /// Static symbols and equality are untouched. Fails on formulas that
    /// already use a postcondition symbol.
    pub fn star_translate(&self) -> Result<Formula, StarError> {
        let swap = |s: &UnarySym| -> Result<UnarySym, StarError> {
            match s {
                UnarySym::Presence(Stage::Pre) => Ok(UnarySym::Presence(Stage::Post)),
                UnarySym::Label(Stage::Pre, l) => Ok(UnarySym::Label(Stage::Post, l.clone())),
                UnarySym::Name(n) => Ok(UnarySym::Name(n.clone())),
                UnarySym::Presence(Stage::Post) => Err(StarError::NotPre("P*".into())),
                UnarySym::Label(Stage::Post, l) => Err(StarError::NotPre(format!("{l}*"))),
            }
        };
        Ok(match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Unary(s, t) => Formula::Unary(swap(s)?, t.clone()),
            Formula::Link(Stage::Pre, t, u) => Formula::Link(Stage::Post, t.clone(), u.clone()),
            Formula::Link(Stage::Post, ..) => return Err(StarError::NotPre("Link*".into())),
            Formula::Eq(t, u) => Formula::Eq(t.clone(), u.clone()),
            Formula::Not(g) => Formula::not(g.star_translate()?),
            Formula::And(l, r) => Formula::and(l.star_translate()?, r.star_translate()?),
            Formula::Or(l, r) => Formula::or(l.star_translate()?, r.star_translate()?),
            Formula::Implies(l, r) => Formula::implies(l.star_translate()?, r.star_translate()?),
            Formula::Forall(v, g) => Formula::forall(v.clone(), g.star_translate()?),
            Formula::Exists(v, g) => Formula::exists(v.clone(), g.star_translate()?),
            Formula::Minimize(g) => Formula::Minimize(Box::new(g.star_translate()?)),
        })
    }

    /// Inverse of [`star_translate`]: maps a fully starred formula back to the
    /// pre-formula it came from. Fails if an unstarred dynamic symbol occurs.
    pub fn unstar(&self) -> Option<Formula> {
        Some(match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Unary(UnarySym::Presence(Stage::Post), t) => {
                Formula::Unary(UnarySym::Presence(Stage::Pre), t.clone())
            }
            Formula::Unary(UnarySym::Label(Stage::Post, l), t) => {
                Formula::Unary(UnarySym::Label(Stage::Pre, l.clone()), t.clone())
            }
            Formula::Unary(UnarySym::Name(n), t) => {
                Formula::Unary(UnarySym::Name(n.clone()), t.clone())
            }
            Formula::Unary(_, _) => return None,
            Formula::Link(Stage::Post, t, u) => Formula::Link(Stage::Pre, t.clone(), u.clone()),
            Formula::Link(Stage::Pre, ..) => return None,
            Formula::Eq(t, u) => Formula::Eq(t.clone(), u.clone()),
            Formula::Not(g) => Formula::not(g.unstar()?),
            Formula::And(l, r) => Formula::and(l.unstar()?, r.unstar()?),
            Formula::Or(l, r) => Formula::or(l.unstar()?, r.unstar()?),
            Formula::Implies(l, r) => Formula::implies(l.unstar()?, r.unstar()?),
            Formula::Forall(v, g) => Formula::forall(v.clone(), g.unstar()?),
            Formula::Exists(v, g) => Formula::exists(v.clone(), g.unstar()?),
            Formula::Minimize(g) => Formula::Minimize(Box::new(g.unstar()?)),
        })
    }

    /// Renames the bound variable `from` to `to` (alpha step helper; does not
    /// touch quantifiers, callers rename below a binder).
    pub fn rename_free(&self, from: &str, to: &str) -> Formula {
        self.substitute_var(from, &Term::Var(to.to_string()))
    }

    /// Substitutes a term for every free occurrence of a variable. Bound
    /// occurrences are left alone; callers are expected to have renamed apart.
    pub fn substitute_var(&self, from: &str, repl: &Term) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Unary(s, t) => Formula::Unary(s.clone(), t.substitute(from, repl)),
            Formula::Link(s, t, u) => {
                Formula::Link(*s, t.substitute(from, repl), u.substitute(from, repl))
            }
            Formula::Eq(t, u) => Formula::Eq(t.substitute(from, repl), u.substitute(from, repl)),
            Formula::Not(g) => Formula::not(g.substitute_var(from, repl)),
            Formula::And(l, r) => {
                Formula::and(l.substitute_var(from, repl), r.substitute_var(from, repl))
            }
            Formula::Or(l, r) => {
                Formula::or(l.substitute_var(from, repl), r.substitute_var(from, repl))
            }
            Formula::Implies(l, r) => {
                Formula::implies(l.substitute_var(from, repl), r.substitute_var(from, repl))
            }
            Formula::Forall(v, g) if v != from => {
                Formula::forall(v.clone(), g.substitute_var(from, repl))
            }
            Formula::Exists(v, g) if v != from => {
                Formula::exists(v.clone(), g.substitute_var(from, repl))
            }
            Formula::Forall(..) | Formula::Exists(..) => self.clone(),
            Formula::Minimize(g) => Formula::Minimize(Box::new(g.substitute_var(from, repl))),
        }
    }

    /// Renames bound variables so that no variable is bound twice and no bound
    /// variable collides with a free one.
    pub fn rename_apart(&self) -> Formula {
        fn fresh(base: &str, used: &mut BTreeSet<String>) -> String {
            if used.insert(base.to_string()) {
                return base.to_string();
            }
            for i in 2.. {
                let cand = format!("{base}_{i}");
                if used.insert(cand.clone()) {
                    return cand;
                }
            }
            unreachable!()
        }
        fn go(f: &Formula, used: &mut BTreeSet<String>) -> Formula {
            match f {
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    let nv = fresh(v, used);
                    let body = if nv == *v {
                        g.as_ref().clone()
                    } else {
                        g.substitute_var(v, &Term::Var(nv.clone()))
                    };
                    let body = go(&body, used);
                    match f {
                        Formula::Forall(..) => Formula::forall(nv, body),
                        _ => Formula::exists(nv, body),
                    }
                }
                Formula::Not(g) => Formula::not(go(g, used)),
                Formula::Minimize(g) => Formula::Minimize(Box::new(go(g, used))),
                Formula::And(l, r) => Formula::and(go(l, used), go(r, used)),
                Formula::Or(l, r) => Formula::or(go(l, used), go(r, used)),
                Formula::Implies(l, r) => Formula::implies(go(l, used), go(r, used)),
                _ => f.clone(),
            }
        }
        let mut used = self.free_variables();
        go(self, &mut used)
    }
}

/// Equality up to renaming of bound variables. Free variables must match
/// exactly.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    fn term_eq(t: &Term, u: &Term, pairs: &[(String, String)]) -> bool {
        match (t, u) {
            (Term::Var(v), Term::Var(w)) => {
                match pairs.iter().rev().find(|(x, y)| x == v || y == w) {
                    Some((x, y)) => x == v && y == w,
                    None => v == w,
                }
            }
            (Term::App(f, t1), Term::App(g, u1)) => f == g && term_eq(t1, u1, pairs),
            _ => false,
        }
    }
    fn go(a: &Formula, b: &Formula, pairs: &mut Vec<(String, String)>) -> bool {
        match (a, b) {
            (Formula::True, Formula::True) | (Formula::False, Formula::False) => true,
            (Formula::Unary(s1, t1), Formula::Unary(s2, t2)) => {
                s1 == s2 && term_eq(t1, t2, pairs)
            }
            (Formula::Link(s1, t1, u1), Formula::Link(s2, t2, u2)) => {
                s1 == s2 && term_eq(t1, t2, pairs) && term_eq(u1, u2, pairs)
            }
            (Formula::Eq(t1, u1), Formula::Eq(t2, u2)) => {
                term_eq(t1, t2, pairs) && term_eq(u1, u2, pairs)
            }
            (Formula::Not(f), Formula::Not(g)) | (Formula::Minimize(f), Formula::Minimize(g)) => {
                go(f, g, pairs)
            }
            (Formula::And(l1, r1), Formula::And(l2, r2))
            | (Formula::Or(l1, r1), Formula::Or(l2, r2))
            | (Formula::Implies(l1, r1), Formula::Implies(l2, r2)) => {
                go(l1, l2, pairs) && go(r1, r2, pairs)
            }
            (Formula::Forall(v, f), Formula::Forall(w, g))
            | (Formula::Exists(v, f), Formula::Exists(w, g)) => {
                pairs.push((v.clone(), w.clone()));
                let r = go(f, g, pairs);
                pairs.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

// Precedence for printing: -> is 1, | is 2, & is 3, ! is 4.
fn fmt_prec(f: &Formula, prec: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = |needed: u8| prec > needed;
    match f {
        Formula::True => write!(out, "true"),
        Formula::False => write!(out, "false"),
        Formula::Unary(s, t) => write!(out, "{s}({t})"),
        Formula::Link(s, t, u) => write!(out, "Link{}({t},{u})", s.star()),
        Formula::Eq(t, u) => write!(out, "{t} = {u}"),
        Formula::Not(g) => {
            write!(out, "!")?;
            fmt_prec(g, 4, out)
        }
        Formula::And(l, r) => {
            if paren(3) {
                write!(out, "(")?;
            }
            fmt_prec(l, 3, out)?;
            write!(out, " & ")?;
            fmt_prec(r, 3, out)?;
            if paren(3) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Or(l, r) => {
            if paren(2) {
                write!(out, "(")?;
            }
            fmt_prec(l, 2, out)?;
            write!(out, " | ")?;
            fmt_prec(r, 2, out)?;
            if paren(2) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Implies(l, r) => {
            if paren(1) {
                write!(out, "(")?;
            }
            fmt_prec(l, 2, out)?;
            write!(out, " -> ")?;
            fmt_prec(r, 1, out)?;
            if paren(1) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Forall(v, g) => {
            if prec > 0 {
                write!(out, "(")?;
            }
            write!(out, "forall {v}. ")?;
            fmt_prec(g, 0, out)?;
            if prec > 0 {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Exists(v, g) => {
            if prec > 0 {
                write!(out, "(")?;
            }
            write!(out, "exists {v}. ")?;
            fmt_prec(g, 0, out)?;
            if prec > 0 {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Minimize(g) => write!(out, "minimize({g})"),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: &str) -> Term {
        Term::Var(v.into())
    }

    #[test]
    fn signature_rejects_duplicates_and_reserved() {
        assert!(matches!(
            FlbSignature::new(0, vec![], vec!["Phos".into(), "Phos".into()], vec![]),
            Err(SignatureError::DuplicateSymbol(_))
        ));
        assert!(matches!(
            FlbSignature::new(0, vec!["parent".into()], vec![], vec![]),
            Err(SignatureError::ReservedName(_))
        ));
        // a label may not collide with a child function either
        assert!(matches!(
            FlbSignature::new(1, vec!["f".into()], vec!["f".into()], vec![]),
            Err(SignatureError::DuplicateSymbol(_))
        ));
    }

    #[test]
    fn empty_signature_is_fine() {
        let sig = FlbSignature::new(0, vec![], vec![], vec![]).unwrap();
        assert_eq!(sig.full_tree_size(), 1);
    }

    #[test]
    fn full_tree_size_sums_layers() {
        let sig = FlbSignature::new(1, vec!["f1".into(), "f2".into()], vec![], vec![]).unwrap();
        assert_eq!(sig.full_tree_size(), 3);
        let sig = FlbSignature::new(2, vec!["f1".into(), "f2".into()], vec![], vec![]).unwrap();
        assert_eq!(sig.full_tree_size(), 7);
    }

    #[test]
    fn star_translate_swaps_dynamics_only() {
        // Phos(x) -> Phos*(x)
        let f = Formula::Unary(UnarySym::Label(Stage::Pre, "Phos".into()), var("x"));
        let starred = f.star_translate().unwrap();
        assert_eq!(
            starred,
            Formula::Unary(UnarySym::Label(Stage::Post, "Phos".into()), var("x"))
        );
        // Src static, Link dynamic
        let g = Formula::and(
            Formula::Unary(UnarySym::Name("Src".into()), var("z")),
            Formula::Link(Stage::Pre, var("x"), var("z")),
        );
        let sg = g.star_translate().unwrap();
        assert_eq!(
            sg,
            Formula::and(
                Formula::Unary(UnarySym::Name("Src".into()), var("z")),
                Formula::Link(Stage::Post, var("x"), var("z")),
            )
        );
    }

    #[test]
    fn star_translate_rejects_post_symbols() {
        let f = Formula::Unary(UnarySym::Label(Stage::Post, "Phos".into()), var("x"));
        assert!(f.star_translate().is_err());
    }

    #[test]
    fn star_translate_preserves_free_variables() {
        let f = Formula::exists(
            "z",
            Formula::and(
                Formula::Unary(UnarySym::Name("Src".into()), var("z")),
                Formula::Link(Stage::Pre, var("x"), var("z")),
            ),
        );
        assert_eq!(f.free_variables(), f.star_translate().unwrap().free_variables());
    }

    #[test]
    fn rename_apart_removes_shadowing() {
        // forall x. P(x) & exists x. P*(x)
        let f = Formula::and(
            Formula::forall("x", Formula::Unary(UnarySym::Presence(Stage::Pre), var("x"))),
            Formula::exists("x", Formula::Unary(UnarySym::Presence(Stage::Post), var("x"))),
        );
        let g = f.rename_apart();
        let mut bound = Vec::new();
        g.visit(&mut |h| {
            if let Formula::Forall(v, _) | Formula::Exists(v, _) = h {
                bound.push(v.clone());
            }
        });
        assert_eq!(bound.len(), 2);
        assert_ne!(bound[0], bound[1]);
    }

    #[test]
    fn display_round_trips_precedence() {
        let f = Formula::implies(
            Formula::or(
                Formula::not(Formula::Unary(UnarySym::Presence(Stage::Pre), var("x"))),
                Formula::True,
            ),
            Formula::and(Formula::True, Formula::False),
        );
        assert_eq!(f.to_string(), "!P(x) | true -> true & false");
    }
}
