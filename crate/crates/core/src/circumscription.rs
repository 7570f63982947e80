//! Exact change-minimality on finite structures, the unified circumscription
//! order, minimal-model enumeration, preservation testing and change
//! locality.
//!
//! Minimality checking enumerates every structure strictly below the input in
//! the change order: a subset of the droppable nodes together with a subset of
//! every change set, rebuilt over the kept domain. That search is the ground
//! truth the rest of the crate is tested against; it is exponential in the
//! number of changes and guarded by a candidate budget.
//!
//! The circumscription order is checked through a second, independent route:
//! its minimized items are formulas whose extents are computed by the
//! evaluator, not by set algebra, so agreement with the change order is a real
//! cross-check rather than a tautology.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::change::{self, enumerate_subs, ChangeError, SubSpec};
use crate::model::{LinkPair, ModelError, NodeId, Transition, TransitionParts};
use crate::semantics::{eval, eval_budgeted, Assignment, Budget, EvalError};
use crate::solver::for_each_structure;
use crate::syntax::{FlbSignature, Formula, FuncSym, Stage, Term, UnarySym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircumscriptionError {
    #[error("transitions use different signatures")]
    SignatureMismatch,
    #[error("assignment does not cover variable `{0}`")]
    UncoveredVariable(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Change(#[from] ChangeError),
}

// ---------------------------------------------------------------------------
// Unified circumscription order
// ---------------------------------------------------------------------------

/// A predicate symbol of the transition vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredSym {
    Unary(UnarySym),
    Link(Stage),
}

/// The five-way symbol partition inducing a circumscription order: minimized
/// items (formulas evaluated as extents), predicates and functions fixed on
/// the restricted domain, varying predicates, and predicates fixed on the
/// initial domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircumscriptionPartition {
    pub minimized: Vec<Formula>,
    pub restricted_predicates: Vec<UnarySym>,
    pub restricted_functions: Vec<FuncSym>,
    pub varying: Vec<PredSym>,
    pub fixed: Vec<PredSym>,
}

/// The transition instantiation: changes and the domain are minimized, the
/// precondition is fixed on the initial domain, names and tree functions are
/// fixed on the restricted domain, and the postcondition varies freely.
pub fn transition_partition(sig: &FlbSignature) -> CircumscriptionPartition {
    let v = |s: &str| Term::Var(s.to_string());
    let delta_unary = |sym: UnarySym| -> Formula {
        let pre = Formula::Unary(sym.clone(), v("x"));
        let post = match &sym {
            UnarySym::Presence(_) => Formula::Unary(UnarySym::Presence(Stage::Post), v("x")),
            UnarySym::Label(_, l) => {
                Formula::Unary(UnarySym::Label(Stage::Post, l.clone()), v("x"))
            }
            UnarySym::Name(_) => unreachable!("names are static"),
        };
        Formula::or(
            Formula::and(pre.clone(), Formula::not(post.clone())),
            Formula::and(Formula::not(pre), post),
        )
    };
    let mut minimized = vec![delta_unary(UnarySym::Presence(Stage::Pre))];
    let delta_link = Formula::or(
        Formula::and(
            Formula::Link(Stage::Pre, v("x"), v("y")),
            Formula::not(Formula::Link(Stage::Post, v("x"), v("y"))),
        ),
        Formula::and(
            Formula::not(Formula::Link(Stage::Pre, v("x"), v("y"))),
            Formula::Link(Stage::Post, v("x"), v("y")),
        ),
    );
    minimized.push(delta_link);
    for l in &sig.labels {
        minimized.push(delta_unary(UnarySym::Label(Stage::Pre, l.clone())));
    }
    let mut varying = vec![PredSym::Unary(UnarySym::Presence(Stage::Post)), PredSym::Link(Stage::Post)];
    let mut fixed = vec![PredSym::Unary(UnarySym::Presence(Stage::Pre)), PredSym::Link(Stage::Pre)];
    for l in &sig.labels {
        varying.push(PredSym::Unary(UnarySym::Label(Stage::Post, l.clone())));
        fixed.push(PredSym::Unary(UnarySym::Label(Stage::Pre, l.clone())));
    }
    let restricted_predicates = sig.names.iter().map(|n| UnarySym::Name(n.clone())).collect();
    let mut restricted_functions: Vec<FuncSym> =
        sig.child_fns.iter().map(|f| FuncSym::Child(f.clone())).collect();
    restricted_functions.push(FuncSym::Parent);
    CircumscriptionPartition { minimized, restricted_predicates, restricted_functions, varying, fixed }
}

fn unary_extent(t: &Transition, f: &Formula, var: &str) -> Result<BTreeSet<NodeId>, EvalError> {
    let mut out = BTreeSet::new();
    for n in t.nodes() {
        let a: Assignment = [(var.to_string(), n.clone())].into_iter().collect();
        if eval(t, &a, f)? {
            out.insert(n.clone());
        }
    }
    Ok(out)
}

fn binary_extent(
    t: &Transition,
    f: &Formula,
    vars: (&str, &str),
) -> Result<BTreeSet<(NodeId, NodeId)>, EvalError> {
    let mut out = BTreeSet::new();
    for a in t.nodes() {
        for b in t.nodes() {
            let asg: Assignment = [
                (vars.0.to_string(), a.clone()),
                (vars.1.to_string(), b.clone()),
            ]
            .into_iter()
            .collect();
            if eval(t, &asg, f)? {
                out.insert((a.clone(), b.clone()));
            }
        }
    }
    Ok(out)
}

fn loop_free_graph(t: &Transition, f: &FuncSym) -> BTreeSet<(NodeId, NodeId)> {
    let mut out = BTreeSet::new();
    for n in t.nodes() {
        let img = match f {
            FuncSym::Parent => t.parent_of(n),
            FuncSym::Child(c) => t.child_of(c, n),
        };
        if &img != n {
            out.insert((n.clone(), img));
        }
    }
    out
}

fn pred_extent(t: &Transition, p: &PredSym) -> PredExtent {
    match p {
        PredSym::Unary(sym) => PredExtent::Unary(match sym {
            UnarySym::Presence(s) => t.present(*s).clone(),
            UnarySym::Label(s, l) => t.labelled(*s, l).clone(),
            UnarySym::Name(n) => t.named(n).clone(),
        }),
        PredSym::Link(s) => PredExtent::Pairs(t.links(*s).clone()),
    }
}

#[derive(PartialEq, Eq)]
enum PredExtent {
    Unary(BTreeSet<NodeId>),
    Pairs(BTreeSet<LinkPair>),
}

/// Tests the circumscription order induced by a partition, with the smaller
/// structure first. Minimized items are evaluated as formula extents.
pub fn prec_leq(
    b: &Transition,
    a: &Transition,
    part: &CircumscriptionPartition,
) -> Result<bool, CircumscriptionError> {
    if b.signature() != a.signature() {
        return Err(CircumscriptionError::SignatureMismatch);
    }
    if !b.nodes().is_subset(a.nodes()) {
        return Ok(false);
    }
    // fixed predicates: equal on the initial domain (checked first, it is the
    // cheapest gate and prunes most incomparable pairs)
    for p in &part.fixed {
        if pred_extent(a, p) != pred_extent(b, p) {
            return Ok(false);
        }
    }
    // minimized items: extent inclusion
    for m in &part.minimized {
        let vars: Vec<String> = m.free_variables().into_iter().collect();
        match vars.len() {
            1 => {
                let eb = unary_extent(b, m, &vars[0])?;
                let ea = unary_extent(a, m, &vars[0])?;
                if !eb.is_subset(&ea) {
                    return Ok(false);
                }
            }
            2 => {
                let eb = binary_extent(b, m, (&vars[0], &vars[1]))?;
                let ea = binary_extent(a, m, (&vars[0], &vars[1]))?;
                if !eb.is_subset(&ea) {
                    return Ok(false);
                }
            }
            n => unreachable!("minimized items are unary or binary, got {n} variables"),
        }
    }
    // restricted predicates: equal once cut down to the smaller domain
    for sym in &part.restricted_predicates {
        let ea = match pred_extent(a, &PredSym::Unary(sym.clone())) {
            PredExtent::Unary(s) => s,
            PredExtent::Pairs(_) => unreachable!(),
        };
        let eb = match pred_extent(b, &PredSym::Unary(sym.clone())) {
            PredExtent::Unary(s) => s,
            PredExtent::Pairs(_) => unreachable!(),
        };
        let cut: BTreeSet<NodeId> = ea.intersection(b.nodes()).cloned().collect();
        if cut != eb {
            return Ok(false);
        }
    }
    // restricted functions: every graph pair touching the smaller domain must
    // live wholly inside it and agree
    for f in &part.restricted_functions {
        let ga = loop_free_graph(a, f);
        let gb = loop_free_graph(b, f);
        let cut: BTreeSet<(NodeId, NodeId)> = ga
            .iter()
            .filter(|(x, y)| b.nodes().contains(x) || b.nodes().contains(y))
            .cloned()
            .collect();
        if cut.iter().any(|(x, y)| !b.nodes().contains(x) || !b.nodes().contains(y)) {
            return Ok(false);
        }
        if cut != gb {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Exact minimality
// ---------------------------------------------------------------------------

// One atomic change of a transition.
#[derive(Debug, Clone)]
enum ChangeAtom {
    Presence(NodeId),
    Label(String, NodeId),
    Plus(LinkPair),
    Minus(LinkPair),
}

/// Searches for a structure strictly below `a` in the change order that keeps
/// the image of `mu` and satisfies `phi`. `None` means `a` is minimal.
///
/// Candidates range over all domain/change subsets, not only over subs, and
/// are not required to be supported or even structurally valid; validity
/// demands belong to `phi`.
pub fn smaller_model_witness_budgeted(
    a: &Transition,
    mu: &Assignment,
    phi: &Formula,
    budget: &mut Budget,
) -> Result<Option<Transition>, EvalError> {
    let changes = change::change_sets(a);
    // nodes absent from every precondition interpretation may be dropped,
    // unless the assignment needs them
    let mu_image: BTreeSet<NodeId> = mu.values().cloned().collect();
    let droppable: Vec<NodeId> = a
        .nodes()
        .iter()
        .filter(|n| {
            !a.present(Stage::Pre).contains(*n)
                && !a.signature().labels.iter().any(|l| a.labelled(Stage::Pre, l).contains(*n))
                && !a.links(Stage::Pre).iter().any(|p| p.mentions(n))
                && !mu_image.contains(*n)
        })
        .cloned()
        .collect();
    if droppable.len() >= 20 {
        return Err(EvalError::BudgetExceeded);
    }
    for dmask in 0u32..(1u32 << droppable.len()) {
        let drop: BTreeSet<NodeId> = droppable
            .iter()
            .enumerate()
            .filter(|(i, _)| dmask & (1 << i) != 0)
            .map(|(_, n)| n.clone())
            .collect();
        // an edge may not dangle across the domain boundary
        let closed = a.child_edges().iter().all(|((_, p), c)| {
            drop.contains(p) == drop.contains(c)
        });
        if !closed {
            continue;
        }
        let kept: BTreeSet<NodeId> = a.nodes().difference(&drop).cloned().collect();
        let mut atoms: Vec<ChangeAtom> = Vec::new();
        for n in changes.presence.iter().filter(|n| kept.contains(*n)) {
            atoms.push(ChangeAtom::Presence(n.clone()));
        }
        for (l, set) in &changes.labels {
            for n in set.iter().filter(|n| kept.contains(*n)) {
                atoms.push(ChangeAtom::Label(l.clone(), n.clone()));
            }
        }
        for p in changes.plus_links.iter().filter(|p| p.within(&kept)) {
            atoms.push(ChangeAtom::Plus(p.clone()));
        }
        for p in &changes.minus_links {
            atoms.push(ChangeAtom::Minus(p.clone()));
        }
        if atoms.len() >= 24 {
            return Err(EvalError::BudgetExceeded);
        }
        let full = (1u32 << atoms.len()) - 1;
        for cmask in 0u32..=full {
            if drop.is_empty() && cmask == full {
                continue; // that is `a` itself
            }
            budget.spend(1)?;
            let mut presence = BTreeSet::new();
            let mut labels: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
            let mut plus = BTreeSet::new();
            let mut minus = BTreeSet::new();
            for (i, atom) in atoms.iter().enumerate() {
                if cmask & (1 << i) == 0 {
                    continue;
                }
                match atom {
                    ChangeAtom::Presence(n) => {
                        presence.insert(n.clone());
                    }
                    ChangeAtom::Label(l, n) => {
                        labels.entry(l.clone()).or_default().insert(n.clone());
                    }
                    ChangeAtom::Plus(p) => {
                        plus.insert(p.clone());
                    }
                    ChangeAtom::Minus(p) => {
                        minus.insert(p.clone());
                    }
                }
            }
            let b = change::rebuild_with_changes(
                a,
                Some(&drop),
                &presence,
                &labels,
                &plus,
                &minus,
                false,
                &BTreeSet::new(),
            );
            if eval_budgeted(&b, mu, phi, budget)? {
                return Ok(Some(b));
            }
        }
    }
    Ok(None)
}

/// Exact minimality of `a` among structures satisfying `phi`: true iff no
/// strictly smaller structure keeping the assignment image satisfies `phi`.
pub fn is_minimal(a: &Transition, mu: &Assignment, phi: &Formula) -> Result<bool, EvalError> {
    Ok(smaller_model_witness_budgeted(a, mu, phi, &mut Budget::unlimited())?.is_none())
}

/// Like [`is_minimal`] but returns the witness that defeats minimality.
pub fn smaller_model_witness(
    a: &Transition,
    mu: &Assignment,
    phi: &Formula,
) -> Result<Option<Transition>, EvalError> {
    smaller_model_witness_budgeted(a, mu, phi, &mut Budget::unlimited())
}

// ---------------------------------------------------------------------------
// Minimal-model enumeration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MinimalModels {
    pub entries: Vec<(Transition, Assignment)>,
    /// False when the examination budget ran out; entries are then a partial
    /// enumeration in canonical order.
    pub complete: bool,
    pub examined: u64,
}

/// Enumerates all minimal models of `phi` with at most `max_nodes` nodes over
/// valid supported structures, paired with the assignments of
/// `template` under which `phi` holds minimally; deduplicated up to node
/// renaming. `budget` caps the number of (structure, assignment) pairs
/// examined.
pub fn minimal_models(
    phi: &Formula,
    sig: &Arc<FlbSignature>,
    template: &[String],
    max_nodes: usize,
    budget: u64,
) -> Result<MinimalModels, EvalError> {
    let mut entries = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut examined = 0u64;
    let mut complete = true;
    let mut error = None;
    for_each_structure(sig, max_nodes, true, |t| {
        let nodes: Vec<NodeId> = t.nodes().iter().cloned().collect();
        let mut tuple = vec![0usize; template.len()];
        loop {
            examined += 1;
            if examined > budget {
                complete = false;
                return ControlFlow::Break(());
            }
            let mu: Assignment = template
                .iter()
                .cloned()
                .zip(tuple.iter().map(|&i| nodes[i].clone()))
                .collect();
            match minimal_at(t, &mu, phi) {
                Err(e) => {
                    error = Some(e);
                    return ControlFlow::Break(());
                }
                Ok(true) => {
                    let marks: Vec<(&str, &NodeId)> =
                        mu.iter().map(|(v, n)| (v.as_str(), n)).collect();
                    let key = t.canonical_key(&marks).expect("generated structures are valid");
                    if seen.insert(key) {
                        entries.push((t.clone(), mu));
                    }
                }
                Ok(false) => {}
            }
            // advance the assignment tuple
            let mut i = 0;
            loop {
                if i == tuple.len() {
                    return ControlFlow::Continue(());
                }
                tuple[i] += 1;
                if tuple[i] < nodes.len() {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    Ok(MinimalModels { entries, complete, examined })
}

fn minimal_at(t: &Transition, mu: &Assignment, phi: &Formula) -> Result<bool, EvalError> {
    Ok(eval(t, mu, phi)? && is_minimal(t, mu, phi)?)
}

// ---------------------------------------------------------------------------
// Preservation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PreservationCounterexample {
    pub structure: Transition,
    pub sub_spec: SubSpec,
    pub sub: Transition,
    pub mu: Assignment,
    pub nu: Assignment,
}

#[derive(Debug, Clone)]
pub struct PreservationReport {
    pub trials: usize,
    pub counterexample: Option<PreservationCounterexample>,
}

impl PreservationReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Randomized preservation test: samples structures and assignments, takes
/// every sub around the protected variables, and demands satisfaction
/// survives. Deterministic for a fixed seed.
pub fn preservation_check(
    phi: &Formula,
    protected: &BTreeSet<String>,
    radius: usize,
    sig: &Arc<FlbSignature>,
    trials: usize,
    seed: u64,
) -> Result<PreservationReport, CircumscriptionError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu_vars: Vec<String> =
        phi.free_variables().into_iter().filter(|v| !protected.contains(v)).collect();
    for trial in 0..trials {
        let a = random_transition(sig, &mut rng);
        let nodes: Vec<NodeId> = a.nodes().iter().cloned().collect();
        let mut mu = Assignment::new();
        for v in protected {
            mu.insert(v.clone(), nodes[rng.gen_range(0..nodes.len())].clone());
        }
        let kernel: BTreeSet<NodeId> = mu.values().cloned().collect();
        for (spec, sub) in enumerate_subs(&a, &kernel, radius)? {
            let sub_nodes: Vec<NodeId> = sub.nodes().iter().cloned().collect();
            if sub_nodes.is_empty() {
                continue;
            }
            for nu in nu_assignments(&nu_vars, &sub_nodes, &mut rng) {
                let mut full = mu.clone();
                full.extend(nu.clone());
                if eval(&a, &full, phi)? && !eval(&sub, &full, phi)? {
                    return Ok(PreservationReport {
                        trials: trial + 1,
                        counterexample: Some(PreservationCounterexample {
                            structure: a,
                            sub_spec: spec,
                            sub,
                            mu,
                            nu,
                        }),
                    });
                }
            }
        }
    }
    Ok(PreservationReport { trials, counterexample: None })
}

// All assignments of the remaining variables into the sub's domain when that
// space is small, otherwise a random sample.
fn nu_assignments(vars: &[String], nodes: &[NodeId], rng: &mut ChaCha8Rng) -> Vec<Assignment> {
    let total = nodes.len().checked_pow(vars.len() as u32).unwrap_or(usize::MAX);
    if total <= 128 {
        let mut out = Vec::with_capacity(total);
        let mut tuple = vec![0usize; vars.len()];
        loop {
            out.push(
                vars.iter().cloned().zip(tuple.iter().map(|&i| nodes[i].clone())).collect(),
            );
            let mut i = 0;
            loop {
                if i == vars.len() {
                    return out;
                }
                tuple[i] += 1;
                if tuple[i] < nodes.len() {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
            if vars.is_empty() {
                return out;
            }
        }
    } else {
        (0..16)
            .map(|_| {
                vars.iter()
                    .cloned()
                    .zip((0..vars.len()).map(|_| nodes[rng.gen_range(0..nodes.len())].clone()))
                    .collect()
            })
            .collect()
    }
}

/// True iff every modified node lies within the ball of the given radius
/// around the protected variables' images.
pub fn locality_check(
    a: &Transition,
    mu: &Assignment,
    protected: &BTreeSet<String>,
    radius: usize,
) -> Result<bool, CircumscriptionError> {
    let mut kernel = BTreeSet::new();
    for v in protected {
        let node =
            mu.get(v).ok_or_else(|| CircumscriptionError::UncoveredVariable(v.clone()))?;
        kernel.insert(node.clone());
    }
    let modified = change::modified_nodes(a)?;
    let protected_ball = change::ball(a, &kernel, radius)?;
    Ok(modified.is_subset(&protected_ball))
}

// ---------------------------------------------------------------------------
// Random structures
// ---------------------------------------------------------------------------

/// Samples a valid transition: one to four random trees, label density 1/2,
/// presence density 3/4 per stage, and link matchings drawn uniformly over
/// pairs of distinct trees, independently for pre and post.
pub fn random_transition(sig: &Arc<FlbSignature>, rng: &mut ChaCha8Rng) -> Transition {
    let mut parts = TransitionParts::default();
    let mut counter = 0usize;
    let trees = rng.gen_range(1..=4);
    let mut tree_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for tree in 0..trees {
        let root = format!("n{counter:02}");
        counter += 1;
        parts.nodes.insert(root.clone());
        tree_of.insert(root.clone(), tree);
        grow(sig, rng, &mut parts, &mut counter, &root, tree, &mut tree_of, 0);
    }
    for n in parts.nodes.clone() {
        if rng.gen_bool(0.75) {
            parts.pre_present.insert(n.clone());
        }
        if rng.gen_bool(0.75) {
            parts.post_present.insert(n.clone());
        }
        for l in &sig.labels {
            if rng.gen_bool(0.5) {
                parts.pre_labels.entry(l.clone()).or_default().insert(n.clone());
            }
            if rng.gen_bool(0.5) {
                parts.post_labels.entry(l.clone()).or_default().insert(n.clone());
            }
        }
        for name in &sig.names {
            if rng.gen_bool(0.5) {
                parts.names.entry(name.clone()).or_default().insert(n.clone());
            }
        }
    }
    parts.pre_links = random_matching(&parts.nodes, &tree_of, rng);
    parts.post_links = random_matching(&parts.nodes, &tree_of, rng);
    Transition::new(sig.clone(), parts).expect("generated transition is well formed")
}

#[allow(clippy::too_many_arguments)]
fn grow(
    sig: &Arc<FlbSignature>,
    rng: &mut ChaCha8Rng,
    parts: &mut TransitionParts,
    counter: &mut usize,
    node: &NodeId,
    tree: usize,
    tree_of: &mut BTreeMap<NodeId, usize>,
    depth: usize,
) {
    if depth >= sig.height {
        return;
    }
    for f in &sig.child_fns {
        if rng.gen_bool(0.5) {
            let child = format!("n{:02}", *counter);
            *counter += 1;
            parts.nodes.insert(child.clone());
            parts.child_edges.insert((f.clone(), node.clone()), child.clone());
            tree_of.insert(child.clone(), tree);
            grow(sig, rng, parts, counter, &child, tree, tree_of, depth + 1);
        }
    }
}

fn random_matching(
    nodes: &BTreeSet<NodeId>,
    tree_of: &BTreeMap<NodeId, usize>,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<LinkPair> {
    let mut shuffled: Vec<NodeId> = nodes.iter().cloned().collect();
    shuffled.shuffle(rng);
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut out = BTreeSet::new();
    for u in &shuffled {
        if used.contains(u) || !rng.gen_bool(0.5) {
            continue;
        }
        let candidates: Vec<&NodeId> = shuffled
            .iter()
            .filter(|w| !used.contains(*w) && tree_of[*w] != tree_of[u])
            .collect();
        if let Some(w) = candidates.first() {
            let w = (*w).clone();
            used.insert(u.clone());
            used.insert(w.clone());
            out.insert(LinkPair::new(u.clone(), w));
        }
    }
    out
}

/// Builds a random structure strictly or weakly below `a` in the change
/// order, by dropping a random closed set of droppable nodes and clearing a
/// random subset of changes.
pub fn random_shrink(a: &Transition, rng: &mut ChaCha8Rng) -> Transition {
    let changes = change::change_sets(a);
    let droppable: Vec<NodeId> = a
        .nodes()
        .iter()
        .filter(|n| {
            !a.present(Stage::Pre).contains(*n)
                && !a.signature().labels.iter().any(|l| a.labelled(Stage::Pre, l).contains(*n))
                && !a.links(Stage::Pre).iter().any(|p| p.mentions(n))
        })
        .cloned()
        .collect();
    let mut drop: BTreeSet<NodeId> =
        droppable.into_iter().filter(|_| rng.gen_bool(0.5)).collect();
    // close under edges
    loop {
        let blocked: Vec<NodeId> = drop
            .iter()
            .filter(|n| {
                a.child_edges()
                    .iter()
                    .any(|((_, p), c)| (p == *n) != (c == *n) && (drop.contains(p) != drop.contains(c)) && (p == *n || c == *n))
            })
            .cloned()
            .collect();
        if blocked.is_empty() {
            break;
        }
        for n in blocked {
            drop.remove(&n);
        }
    }
    let kept: BTreeSet<NodeId> = a.nodes().difference(&drop).cloned().collect();
    let presence: BTreeSet<NodeId> = changes
        .presence
        .iter()
        .filter(|n| kept.contains(*n) && rng.gen_bool(0.5))
        .cloned()
        .collect();
    let labels: BTreeMap<String, BTreeSet<NodeId>> = changes
        .labels
        .iter()
        .map(|(l, s)| {
            (
                l.clone(),
                s.iter().filter(|n| kept.contains(*n) && rng.gen_bool(0.5)).cloned().collect(),
            )
        })
        .collect();
    let plus: BTreeSet<LinkPair> = changes
        .plus_links
        .iter()
        .filter(|p| p.within(&kept) && rng.gen_bool(0.5))
        .cloned()
        .collect();
    let minus: BTreeSet<LinkPair> =
        changes.minus_links.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    change::rebuild_with_changes(a, Some(&drop), &presence, &labels, &plus, &minus, false, &BTreeSet::new())
}
