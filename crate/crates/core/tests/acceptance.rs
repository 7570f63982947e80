//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The curated derivable suite lives in `suite()`: twelve minimize-free
//! judgments covering every rule plus one circumscribed judgment, each over
//! the smallest signature mentioning its symbols. Derivations are checked at
//! construction, so the suite's contexts are produced by the rule checker
//! rather than asserted by hand.

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flb::change::{change_leq, change_lt};
use flb::circumscription::{
    is_minimal, locality_check, minimal_models, prec_leq, preservation_check, random_shrink,
    random_transition, smaller_model_witness, transition_partition,
};
use flb::deduction::{check_derivation, BoolConnective, Derivation};
use flb::knowledge::{load_knowledge, save_model, FIG1_KF};
use flb::model::{LinkPair, Transition, TransitionParts};
use flb::semantics::{eval, Assignment};
use flb::solver::{for_each_structure, sat, SatOutcome};
use flb::syntax::parser::{parse_formula, parse_signature};
use flb::syntax::prenex::{fragment_normalize, normalize_prenex, Target};
use flb::syntax::theory::{theory_formula, theory_supp};
use flb::syntax::{FlbSignature, Formula};

fn sig_of(text: &str) -> Arc<FlbSignature> {
    Arc::new(parse_signature(text).unwrap())
}

fn vars(vs: &[&str]) -> BTreeSet<String> {
    vs.iter().map(|s| s.to_string()).collect()
}

struct Entry {
    name: &'static str,
    sig: Arc<FlbSignature>,
    formula: Formula,
    protected: BTreeSet<String>,
    distance: usize,
    minimize_free: bool,
}

/// The curated suite of derivable judgments, one per rule archetype plus the
/// worked observations. Every context is computed by `check_derivation`.
fn suite() -> Vec<Entry> {
    let s_active = sig_of("height 1\nchildren f1\nlabels Active\nnames");
    let s_src = sig_of("height 1\nchildren f1\nlabels\nnames Src");
    let s_both = sig_of("height 1\nchildren f1\nlabels Active\nnames Src");
    let s_plain = sig_of("height 1\nchildren f1\nlabels\nnames");

    let dynamic = |src: &str, sig: &Arc<FlbSignature>| {
        Box::new(Derivation::Dynamic(parse_formula(src, sig).unwrap()))
    };
    let static_ = |src: &str, sig: &Arc<FlbSignature>| {
        Box::new(Derivation::Static(parse_formula(src, sig).unwrap()))
    };

    let obs1 = |sig: &Arc<FlbSignature>| Derivation::ForallGuard {
        var: "y".into(),
        premise: dynamic("!Active*(parent(x))", sig),
        guard: dynamic("Link*(x,y)", sig),
    };
    let obs2 = |sig: &Arc<FlbSignature>| Derivation::ExistsGuard {
        var: "z".into(),
        premise: static_("Src(z)", sig),
        guard: dynamic("Link*(x,z)", sig),
    };
    let obs = |sig: &Arc<FlbSignature>| Derivation::Bool {
        op: BoolConnective::And,
        left: Box::new(Derivation::Weak {
            vars: vars(&["x"]),
            distance: 1,
            premise: Box::new(obs1(sig)),
        }),
        right: Box::new(obs2(sig)),
    };

    let mut entries = Vec::new();
    let mut push = |name: &'static str,
                    sig: &Arc<FlbSignature>,
                    dv: Derivation,
                    expect_vars: &[&str],
                    expect_distance: usize| {
        let j = check_derivation(&dv, sig)
            .unwrap_or_else(|e| panic!("suite entry {name} must check: {e}"));
        assert_eq!(j.vars, vars(expect_vars), "suite entry {name}");
        assert_eq!(j.distance, expect_distance, "suite entry {name}");
        let minimize_free = !j.formula.contains_minimize();
        entries.push(Entry {
            name,
            sig: sig.clone(),
            formula: j.formula,
            protected: j.vars,
            distance: j.distance,
            minimize_free,
        });
    };

    push("first-observation", &s_active, obs1(&s_active), &["x"], 0);
    push("second-observation", &s_src, obs2(&s_src), &["x"], 1);
    push("composed-observation", &s_both, obs(&s_both), &["x"], 1);
    push("postcondition-label", &s_active, *dynamic("Active*(x)", &s_active), &["x"], 0);
    push(
        "negated-postcondition-link",
        &s_plain,
        *dynamic("!Link*(x,y)", &s_plain),
        &["x", "y"],
        0,
    );
    push("precondition-link", &s_plain, *static_("Link(x,y)", &s_plain), &[], 0);
    push(
        "weakened-label",
        &s_active,
        Derivation::Weak {
            vars: vars(&["x", "y"]),
            distance: 2,
            premise: dynamic("Active*(x)", &s_active),
        },
        &["x", "y"],
        2,
    );
    push(
        "label-disjunction",
        &s_active,
        Derivation::Bool {
            op: BoolConnective::Or,
            left: dynamic("Active*(x)", &s_active),
            right: dynamic("!Active*(x)", &s_active),
        },
        &["x"],
        0,
    );
    push(
        "invariant-label",
        &s_active,
        Derivation::Invariant(dynamic("Active*(x)", &s_active)),
        &[],
        0,
    );
    push(
        "self-guarded-universal",
        &s_active,
        Derivation::ForallGuard {
            var: "y".into(),
            premise: dynamic("!Active*(x)", &s_active),
            guard: static_("Link(y,y)", &s_active),
        },
        &["x"],
        0,
    );
    push(
        "equality-guarded-universal",
        &s_active,
        Derivation::ForallGuard {
            var: "y".into(),
            premise: dynamic("Active*(y)", &s_active),
            guard: static_("y = x", &s_active),
        },
        &["x"],
        1,
    );
    push(
        "nested-guards",
        &s_src,
        Derivation::ForallGuard {
            var: "y".into(),
            premise: Box::new(Derivation::ExistsGuard {
                var: "z".into(),
                premise: static_("Src(z)", &s_src),
                guard: dynamic("Link*(y,z)", &s_src),
            }),
            guard: dynamic("Link*(x,y)", &s_src),
        },
        &["x"],
        2,
    );
    push(
        "minimized-composed-observation",
        &s_both,
        Derivation::Circumscribe(Box::new(obs(&s_both))),
        &["x"],
        1,
    );
    entries
}

fn mu(pairs: &[(&str, &str)]) -> Assignment {
    pairs.iter().map(|(v, n)| (v.to_string(), n.to_string())).collect()
}

// ---------------------------------------------------------------------------
// Criterion 1: exact reproduction of the worked example.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_worked_example_reproduction() {
    let kf = load_knowledge(FIG1_KF).unwrap();
    let t = kf.model("T").unwrap();
    let tp = kf.model("Tprime").unwrap();
    let obs = kf.parse_formula("Obs(x)").unwrap();
    let a = mu(&[("x", "m1")]);

    assert!(eval(t, &a, &obs).unwrap());
    assert!(eval(tp, &a, &obs).unwrap());
    assert!(change_leq(t, tp).unwrap());
    assert!(change_lt(t, tp).unwrap(), "the order must be strict");

    let phi = Formula::and(obs, theory_supp(&kf.sig));
    assert!(is_minimal(t, &a, &phi).unwrap());
    let witness = smaller_model_witness(tp, &a, &phi)
        .unwrap()
        .expect("the larger transition is not minimal");
    let serialized = save_model("witness", &witness);
    assert!(serialized.starts_with("model witness"));
    assert!(change_lt(&witness, tp).unwrap());
    assert!(eval(&witness, &a, &phi).unwrap());

    println!("[acceptance] worked-example reproduction: PASS");
}

// ---------------------------------------------------------------------------
// Criterion 2: structural validation coincides with the theory sentence.
// ---------------------------------------------------------------------------

// A structure generator that is deliberately allowed to break the forest,
// height and functionality conditions.
fn random_loose_structure(sig: &Arc<FlbSignature>, rng: &mut ChaCha8Rng) -> Transition {
    let n = rng.gen_range(1..=8);
    let names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let mut parts = TransitionParts::default();
    for name in &names {
        parts.nodes.insert(name.clone());
    }
    for f in &sig.child_fns {
        for parent in &names {
            if rng.gen_bool(0.2) {
                let child = &names[rng.gen_range(0..n)];
                if child != parent {
                    parts.child_edges.insert((f.clone(), parent.clone()), child.clone());
                }
            }
        }
    }
    for name in &names {
        if rng.gen_bool(0.6) {
            parts.pre_present.insert(name.clone());
        }
        if rng.gen_bool(0.6) {
            parts.post_present.insert(name.clone());
        }
        for l in &sig.labels {
            if rng.gen_bool(0.4) {
                parts.pre_labels.entry(l.clone()).or_default().insert(name.clone());
            }
            if rng.gen_bool(0.4) {
                parts.post_labels.entry(l.clone()).or_default().insert(name.clone());
            }
        }
        for nm in &sig.names {
            if rng.gen_bool(0.4) {
                parts.names.entry(nm.clone()).or_default().insert(name.clone());
            }
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        let a = &names[rng.gen_range(0..n)];
        let b = &names[rng.gen_range(0..n)];
        parts.pre_links.insert(LinkPair::new(a.clone(), b.clone()));
    }
    for _ in 0..rng.gen_range(0..4) {
        let a = &names[rng.gen_range(0..n)];
        let b = &names[rng.gen_range(0..n)];
        parts.post_links.insert(LinkPair::new(a.clone(), b.clone()));
    }
    Transition::new(sig.clone(), parts).unwrap()
}

#[test]
fn criterion_2_theory_sentence_matches_structural_validation() {
    let sigs = [
        sig_of("height 1\nchildren f1 f2\nlabels Phos Active\nnames Raf1 Src Tyr"),
        sig_of("height 2\nchildren f1\nlabels L\nnames"),
        sig_of("height 0\nchildren\nlabels\nnames N"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0usize;
    let mut broken_seen = 0usize;
    let mut valid_seen = 0usize;
    while checked < 1200 {
        let sig = &sigs[checked % sigs.len()];
        let t = if checked % 2 == 0 {
            random_transition(sig, &mut rng)
        } else {
            random_loose_structure(sig, &mut rng)
        };
        let structurally_valid = t.validate_flb().is_empty();
        let theory_holds = eval(&t, &Assignment::new(), &theory_formula(sig)).unwrap();
        assert_eq!(
            structurally_valid, theory_holds,
            "disagreement on structure #{checked}: {t:?}"
        );
        if structurally_valid {
            valid_seen += 1;
        } else {
            broken_seen += 1;
        }
        checked += 1;
    }
    assert!(broken_seen >= 100, "generator must produce broken structures");
    assert!(valid_seen >= 100, "generator must produce valid structures");
    println!(
        "[acceptance] theory sentence vs structural validation: PASS \
         ({checked} structures, {valid_seen} valid, {broken_seen} broken, 0 disagreements)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: the circumscription order coincides with the change order.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_circumscription_order_coincides_with_change_order() {
    // randomized: comparable pairs by construction, plus independent pairs
    let sig = sig_of("height 1\nchildren f1 f2\nlabels Phos Active\nnames Raf1 Src Tyr");
    let part = transition_partition(&sig);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agreements = 0usize;
    for i in 0..600 {
        let a = random_transition(&sig, &mut rng);
        let b = random_shrink(&a, &mut rng);
        for (x, y) in [(&b, &a), (&a, &b)] {
            assert_eq!(
                change_leq(x, y).unwrap(),
                prec_leq(x, y, &part).unwrap(),
                "disagreement on shrink pair #{i}"
            );
            agreements += 1;
        }
        let c = random_transition(&sig, &mut rng);
        for (x, y) in [(&c, &a), (&a, &c)] {
            assert_eq!(
                change_leq(x, y).unwrap(),
                prec_leq(x, y, &part).unwrap(),
                "disagreement on independent pair #{i}"
            );
            agreements += 1;
        }
    }

    // exhaustive on all pairs of structures with at most three nodes over the
    // plain signature (no children, labels or names)
    let tiny = sig_of("height 0\nchildren\nlabels\nnames");
    let tiny_part = transition_partition(&tiny);
    let mut all: Vec<Transition> = Vec::new();
    for_each_structure(&tiny, 3, false, |t| {
        all.push(t.clone());
        ControlFlow::Continue(())
    });
    let mut exhaustive_pairs = 0usize;
    for b in &all {
        for a in &all {
            assert_eq!(
                change_leq(b, a).unwrap(),
                prec_leq(b, a, &tiny_part).unwrap(),
                "exhaustive disagreement:\n{}\n{}",
                save_model("b", b),
                save_model("a", a),
            );
            exhaustive_pairs += 1;
        }
    }
    println!(
        "[acceptance] order coincidence: PASS ({agreements} randomized checks, \
         {exhaustive_pairs} exhaustive pairs over {} structures, 0 disagreements)",
        all.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: derivable judgments imply preservation.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_derived_judgments_imply_preservation() {
    let entries = suite();
    assert!(entries.len() >= 10);
    for e in &entries {
        let trials = if e.minimize_free { 500 } else { 300 };
        let report =
            preservation_check(&e.formula, &e.protected, e.distance, &e.sig, trials, 4).unwrap();
        assert!(
            report.passed(),
            "preservation failed for suite entry {}: {:?}",
            e.name,
            report.counterexample.map(|c| (save_model("structure", &c.structure),
                                           save_model("sub", &c.sub), c.mu, c.nu))
        );
    }

    // negative control: an unguarded existential over a created link is not
    // preserved at radius zero
    let sig = sig_of("height 1\nchildren f1\nlabels\nnames");
    let g = parse_formula("exists y. Link*(x,y)", &sig).unwrap();
    let report = preservation_check(&g, &vars(&["x"]), 0, &sig, 500, 4).unwrap();
    assert!(
        !report.passed(),
        "the control formula must yield a counterexample within 500 trials"
    );
    println!(
        "[acceptance] preservation of derivable judgments: PASS \
         ({} judgments, control counterexample after {} trials)",
        entries.len(),
        report.trials
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: the solver agrees with the enumeration oracle.
// ---------------------------------------------------------------------------

// Seeded family of exists-forall sentences over the tiny signature.
fn formula_family(sig: &Arc<FlbSignature>, count: usize, seed: u64) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = ["x", "y", "f1(x)", "f1(y)", "parent(x)", "parent(y)"];
    let preds = ["P", "P*", "L", "L*", "N"];
    let mut atom = |rng: &mut ChaCha8Rng| -> String {
        match rng.gen_range(0..4) {
            0 => format!(
                "{}({})",
                preds[rng.gen_range(0..preds.len())],
                terms[rng.gen_range(0..terms.len())]
            ),
            1 => format!(
                "Link({},{})",
                terms[rng.gen_range(0..terms.len())],
                terms[rng.gen_range(0..terms.len())]
            ),
            2 => format!(
                "Link*({},{})",
                terms[rng.gen_range(0..terms.len())],
                terms[rng.gen_range(0..terms.len())]
            ),
            _ => format!(
                "{} = {}",
                terms[rng.gen_range(0..terms.len())],
                terms[rng.gen_range(0..terms.len())]
            ),
        }
    };
    let mut matrix = |rng: &mut ChaCha8Rng| -> String {
        let mut leaves: Vec<String> = (0..3)
            .map(|_| {
                let a = atom(rng);
                if rng.gen_bool(0.4) {
                    format!("!{a}")
                } else {
                    a
                }
            })
            .collect();
        let ops = ["&", "|", "->"];
        let mut out = leaves.pop().unwrap();
        while let Some(l) = leaves.pop() {
            out = format!("({l} {} {out})", ops[rng.gen_range(0..ops.len())]);
        }
        out
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < count {
        let src = format!("exists x. forall y. {}", matrix(&mut rng));
        if !seen.insert(src.clone()) {
            continue;
        }
        out.push(parse_formula(&src, sig).unwrap());
    }
    out
}

#[test]
fn criterion_5_solver_agrees_with_enumeration_oracle() {
    let sig = sig_of("height 1\nchildren f1\nlabels L\nnames N");
    // the oracle space: every supported valid structure within the one-tree
    // bound (two nodes for this signature)
    let mut oracle_space: Vec<Transition> = Vec::new();
    for_each_structure(&sig, 2, true, |t| {
        oracle_space.push(t.clone());
        ControlFlow::Continue(())
    });
    let family = formula_family(&sig, 220, 5);
    let mut sat_count = 0usize;
    let mut audit_mismatches = 0usize;
    for (i, f) in family.iter().enumerate() {
        let (pf, _) = normalize_prenex(f).unwrap();
        assert!(pf.is_exists_forall(), "family member {i} must be exists-forall");
        let theory = theory_supp(&sig);
        let oracle_sat = oracle_space.iter().any(|t| {
            eval(t, &Assignment::new(), f).unwrap()
                && eval(t, &Assignment::new(), &theory).unwrap()
        });
        let outcome = sat(&pf, &sig, None, 500_000_000).unwrap();
        assert_eq!(
            outcome.is_sat(),
            oracle_sat,
            "solver/oracle disagreement on family member {i}: {f}"
        );
        if let SatOutcome::Sat { witness, assignment } = &outcome {
            assert!(witness.validate_flb().is_empty());
            assert!(witness.is_supported());
            assert!(eval(witness, assignment, f).unwrap());
            sat_count += 1;
        }
        // bound audit: one extra tree must not flip any verdict
        let widened = sat(&pf, &sig, Some(2), 500_000_000).unwrap();
        if widened.is_sat() != outcome.is_sat() {
            audit_mismatches += 1;
        }
    }
    assert_eq!(audit_mismatches, 0, "the small-model bound is too small");
    println!(
        "[acceptance] solver vs oracle: PASS ({} formulas, {} satisfiable, \
         oracle space {} structures, bound audit clean)",
        family.len(),
        sat_count,
        oracle_space.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: derivable formulas normalize into both fragments.
// ---------------------------------------------------------------------------

fn assert_equivalent_on(
    t: &Transition,
    free: &[String],
    lhs: &Formula,
    rhs: &Formula,
    what: &str,
) {
    let nodes: Vec<String> = t.nodes().iter().cloned().collect();
    let mut tuple = vec![0usize; free.len()];
    loop {
        let a: Assignment =
            free.iter().cloned().zip(tuple.iter().map(|&i| nodes[i].clone())).collect();
        assert_eq!(
            eval(t, &a, lhs).unwrap(),
            eval(t, &a, rhs).unwrap(),
            "{what} disagree under {a:?} on\n{}",
            save_model("t", t)
        );
        let mut i = 0;
        loop {
            if i == free.len() {
                return;
            }
            tuple[i] += 1;
            if tuple[i] < nodes.len() {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

fn fragment_bridge(max_exhaustive_nodes: usize, samples: usize) -> (usize, usize) {
    let entries = suite();
    let mut structures_checked = 0usize;
    let mut formulas = 0usize;
    for e in entries.iter().filter(|e| e.minimize_free) {
        formulas += 1;
        let free: Vec<String> = e.formula.free_variables().into_iter().collect();
        let ae = fragment_normalize(&e.formula, Target::ForallExists)
            .unwrap()
            .unwrap_or_else(|| panic!("{}: no forall-exists form", e.name))
            .to_formula();
        let with_theory = Formula::and(e.formula.clone(), theory_supp(&e.sig));
        let ea = fragment_normalize(&with_theory, Target::ExistsForall)
            .unwrap()
            .unwrap_or_else(|| panic!("{}: no exists-forall form", e.name))
            .to_formula();
        // exhaustive over every supported valid structure up to the bound
        for_each_structure(&e.sig, max_exhaustive_nodes, true, |t| {
            assert_equivalent_on(t, &free, &e.formula, &ae, e.name);
            assert_equivalent_on(t, &free, &with_theory, &ea, e.name);
            structures_checked += 1;
            ControlFlow::Continue(())
        });
        // seeded random structures beyond the exhaustive bound, up to four
        // nodes
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sampled = 0usize;
        while sampled < samples {
            let t = random_transition(&e.sig, &mut rng);
            if t.nodes().len() > 4 || !t.is_supported() {
                continue;
            }
            assert_equivalent_on(&t, &free, &e.formula, &ae, e.name);
            assert_equivalent_on(&t, &free, &with_theory, &ea, e.name);
            sampled += 1;
            structures_checked += 1;
        }
    }
    (formulas, structures_checked)
}

#[test]
fn criterion_6_derivable_formulas_normalize_into_both_fragments() {
    let (formulas, structures) = fragment_bridge(2, 400);
    println!(
        "[acceptance] fragment bridge: PASS ({formulas} formulas, \
         {structures} structure checks, 0 disagreements)"
    );
}

/// The same bridge with the exhaustive sweep pushed to three nodes; long.
#[test]
#[ignore = "exhaustive three-node sweep takes tens of minutes"]
fn criterion_6_extended_exhaustive_sweep() {
    let (formulas, structures) = fragment_bridge(3, 400);
    println!(
        "[acceptance] fragment bridge (extended): PASS ({formulas} formulas, \
         {structures} structure checks)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: minimal models of derivable formulas change locally.
// ---------------------------------------------------------------------------

// A precondition is coherent when its links and labels only touch nodes that
// are present in the precondition.
fn precondition_coherent(t: &Transition) -> bool {
    let present = t.present(flb::syntax::Stage::Pre);
    t.links(flb::syntax::Stage::Pre)
        .iter()
        .all(|p| present.contains(p.endpoints().0) && present.contains(p.endpoints().1))
        && t.signature()
            .labels
            .iter()
            .all(|l| t.labelled(flb::syntax::Stage::Pre, l).is_subset(present))
}

fn locality_outputs() -> (usize, usize, u64, Vec<(String, Transition, Assignment)>) {
    let entries = suite();
    let mut coherent = 0usize;
    let mut violations: Vec<(String, Transition, Assignment)> = Vec::new();
    let mut examined = 0u64;
    let mut outputs = 0usize;
    for e in &entries {
        let phi = Formula::and(e.formula.clone(), theory_supp(&e.sig));
        let template: Vec<String> = e.formula.free_variables().into_iter().collect();
        let budget = if e.minimize_free { 400_000 } else { 100_000 };
        let result = minimal_models(&phi, &e.sig, &template, 5, budget).unwrap();
        examined += result.examined;
        assert!(
            !result.entries.is_empty(),
            "{}: the enumeration should find at least one minimal model",
            e.name
        );
        for (t, assignment) in &result.entries {
            outputs += 1;
            let local = locality_check(t, assignment, &e.protected, e.distance).unwrap();
            if precondition_coherent(t) {
                coherent += 1;
                assert!(
                    local,
                    "non-local minimal model with a coherent precondition for {} under \
                     {assignment:?}:\n{}",
                    e.name,
                    save_model("t", t)
                );
            } else if !local {
                violations.push((e.name.to_string(), t.clone(), assignment.clone()));
            }
        }
    }
    (outputs, coherent, examined, violations)
}

/// The criterion as stated: every minimal model of every suite judgment is
/// change-local. This is red by design: the enumeration finds minimal models
/// whose preconditions link or label nodes that are absent from the
/// precondition presence set. The support axiom then forces those nodes to be
/// created, no smaller supported structure exists, and the forced creation
/// can sit at infinite link distance from every protected variable. See the
/// companion test below for the property that does hold.
#[test]
fn criterion_7_minimal_models_change_locally() {
    let (outputs, _, examined, violations) = locality_outputs();
    assert!(
        violations.is_empty(),
        "{} of {outputs} minimal models (over {examined} examined pairs) are non-local; \
         every one has a precondition link or label on a node absent from the \
         precondition, whose forced creation cannot be cleared without breaking \
         support. First: suite entry `{}` under {:?}:\n{}",
        violations.len(),
        violations[0].0,
        violations[0].2,
        save_model("t", &violations[0].1),
    );
    println!(
        "[acceptance] locality of minimal models: PASS ({outputs} minimal models, 0 violations)"
    );
}

/// The refined property: minimal models whose preconditions only mention
/// present nodes are change-local. The sub clearing a far tree stays
/// supported in that case (reverted nodes prune away), so far changes always
/// defeat minimality.
#[test]
fn minimal_models_with_coherent_preconditions_change_locally() {
    let (outputs, coherent, examined, violations) = locality_outputs();
    assert!(coherent > 0);
    println!(
        "[acceptance] locality over coherent preconditions: PASS ({coherent} of {outputs} \
         minimal models coherent over {examined} examined pairs, 0 violations among them; \
         {} known non-local ghost-precondition models)",
        violations.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: golden derivations check with exact judgments.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_golden_derivations() {
    let kf = load_knowledge(FIG1_KF).unwrap();
    let expected = [
        ("Observation1", vars(&["x"]), 0),
        ("Observation2", vars(&["x"]), 1),
        ("Obs", vars(&["x"]), 1),
        ("MinimizedObs", vars(&["x"]), 1),
    ];
    for (name, want_vars, want_distance) in expected {
        let dv = kf.derivation(name).unwrap_or_else(|| panic!("missing derivation {name}"));
        let j = check_derivation(dv, &kf.sig)
            .unwrap_or_else(|e| panic!("derivation {name} rejected: {e}"));
        assert_eq!(j.vars, want_vars, "{name}");
        assert_eq!(j.distance, want_distance, "{name}");
    }
    // the self-guarded existential is rejected with the named proviso
    let bad = Derivation::ExistsGuard {
        var: "z".into(),
        premise: Box::new(Derivation::Static(parse_formula("Src(z)", &kf.sig).unwrap())),
        guard: Box::new(Derivation::Static(parse_formula("z = z", &kf.sig).unwrap())),
    };
    match check_derivation(&bad, &kf.sig) {
        Err(flb::deduction::DeductionError::ProperGuardRequired(v)) => assert_eq!(v, "z"),
        other => panic!("expected the proper-guard proviso, got {other:?}"),
    }
    println!("[acceptance] golden derivations: PASS (4 accepted, self-guard rejected)");
}
