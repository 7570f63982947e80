//! Generation of the axioms characterising valid structures.
//!
//! The theory of height-`n` forests is a single universal sentence built from
//! three pieces:
//!
//! * a parent specification: the parent of a proper child is the node it hangs
//!   off, and the parent of a root is the root itself;
//! * a height bound: every composition of `n + 1` child-function applications
//!   has a stationary step, under the convention that `f(x) = x` means "no
//!   child via `f`";
//! * functionality and symmetry of the link relation, in both the pre- and
//!   the postcondition.
//!
//! The support axiom `forall x. P(x) | P*(x)` rules out nodes absent from both
//! sides of a transition.

use super::{FlbSignature, Formula, FuncSym, Stage, Term, UnarySym};

fn var(v: &str) -> Term {
    Term::Var(v.to_string())
}

fn app(f: &FuncSym, t: Term) -> Term {
    Term::App(f.clone(), Box::new(t))
}

fn parent(t: Term) -> Term {
    Term::App(FuncSym::Parent, Box::new(t))
}

/// `forall x. P(x) | P*(x)`.
pub fn support_formula() -> Formula {
    Formula::forall(
        "x",
        Formula::or(
            Formula::Unary(UnarySym::Presence(Stage::Pre), var("x")),
            Formula::Unary(UnarySym::Presence(Stage::Post), var("x")),
        ),
    )
}

/// The parent specification at `x`: for every child function `f`, if `f(x)`
/// is a proper child then its parent is `x`; and `x` is either a root
/// (parent is itself) or a child of its parent under some `f`.
fn parent_spec(sig: &FlbSignature) -> Formula {
    let x = var("x");
    let mut conjuncts = Vec::new();
    for f in &sig.child_fns {
        let f = FuncSym::Child(f.clone());
        let fx = app(&f, x.clone());
        conjuncts.push(Formula::or(
            Formula::Eq(fx.clone(), x.clone()),
            Formula::Eq(parent(fx), x.clone()),
        ));
    }
    let root_or_child = Formula::or_all(
        std::iter::once(Formula::Eq(parent(x.clone()), x.clone())).chain(
            sig.child_fns.iter().map(|f| {
                let f = FuncSym::Child(f.clone());
                Formula::Eq(app(&f, parent(x.clone())), x.clone())
            }),
        ),
    );
    conjuncts.push(root_or_child);
    Formula::and_all(conjuncts)
}

/// The height bound at `x`: for every tuple of `n + 1` child functions, some
/// application along the chain is stationary.
fn height_bound(sig: &FlbSignature) -> Formula {
    if sig.child_fns.is_empty() {
        return Formula::True;
    }
    let depth = sig.height + 1;
    let mut conjuncts = Vec::new();
    let mut tuple = vec![0usize; depth];
    loop {
        let mut chain = var("x");
        let mut disjuncts = Vec::new();
        for &fi in tuple.iter() {
            let f = FuncSym::Child(sig.child_fns[fi].clone());
            let next = app(&f, chain.clone());
            disjuncts.push(Formula::Eq(next.clone(), chain.clone()));
            chain = next;
        }
        conjuncts.push(Formula::or_all(disjuncts));
        // next tuple in lexicographic order
        let mut i = depth;
        loop {
            if i == 0 {
                return Formula::and_all(conjuncts);
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < sig.child_fns.len() {
                break;
            }
            tuple[i] = 0;
        }
    }
}

/// Functionality and symmetry of the link relation at one stage.
fn fun_sym_link(stage: Stage) -> Formula {
    let sym = Formula::forall(
        "x",
        Formula::forall(
            "y",
            Formula::implies(
                Formula::Link(stage, var("x"), var("y")),
                Formula::Link(stage, var("y"), var("x")),
            ),
        ),
    );
    let fun = Formula::forall(
        "x",
        Formula::forall(
            "y",
            Formula::forall(
                "z",
                Formula::implies(
                    Formula::and(
                        Formula::Link(stage, var("x"), var("y")),
                        Formula::Link(stage, var("x"), var("z")),
                    ),
                    Formula::Eq(var("y"), var("z")),
                ),
            ),
        ),
    );
    Formula::and(sym, fun)
}

/// The full theory sentence for a signature: the universal per-node part
/// (parent behaviour and height bound) conjoined with link functionality and
/// symmetry for both stages.
pub fn theory_formula(sig: &FlbSignature) -> Formula {
    let per_node = Formula::and_all([parent_spec(sig), height_bound(sig)]);
    Formula::and_all([
        Formula::forall("x", per_node),
        fun_sym_link(Stage::Pre),
        fun_sym_link(Stage::Post),
    ])
}

/// Theory plus the support axiom.
pub fn theory_supp(sig: &FlbSignature) -> Formula {
    Formula::and(theory_formula(sig), support_formula())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn childless_theory_reduces_to_parent_identity() {
        let sig = FlbSignature::new(0, vec![], vec![], vec![]).unwrap();
        let t = theory_formula(&sig);
        let printed = t.to_string();
        assert!(printed.contains("parent(x) = x"), "{printed}");
        // no height conjunct, both link axioms present: two symmetry atoms
        // and two functionality atoms per stage
        assert_eq!(printed.matches("Link*").count(), 4);
        assert_eq!(printed.matches("Link(").count(), 4);
    }

    #[test]
    fn height_bound_enumerates_function_tuples() {
        let sig =
            FlbSignature::new(1, vec!["f1".into(), "f2".into()], vec![], vec![]).unwrap();
        let h = height_bound(&sig);
        // 2^2 tuples of child functions at depth n + 1 = 2
        let printed = h.to_string();
        assert_eq!(printed.matches('|').count(), 4);
    }

    #[test]
    fn support_is_presence_disjunction() {
        assert_eq!(support_formula().to_string(), "forall x. P(x) | P*(x)");
    }
}
