//! Satisfiability in the exists*forall* fragment by small-model search, and
//! the exhaustive-enumeration oracle used to cross-validate it.
//!
//! The search walks forest skeletons in ascending node count. For each
//! skeleton and each tuple of existential witnesses it assigns facts one at a
//! time (link partners first, then unary facts, all with the false branch
//! first) and propagates the ground instances of the universal part after
//! every decision; any instance that becomes definitely false prunes the
//! branch. The theory of supported bounded forests is conjoined internally,
//! so a reported witness is always a valid supported structure.
//!
//! The oracle side enumerates every structure up to a node bound outright:
//! forest shapes are valid by construction and link interpretations are drawn
//! from functional matchings, so no generated structure needs repair.

use std::collections::{BTreeSet, HashSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{LinkPair, NodeId, Transition, TransitionParts};
use crate::semantics::{eval, Assignment};
use crate::syntax::prenex::{prenex_into, PrenexFormula, Quant, Target};
use crate::syntax::theory::theory_supp;
use crate::syntax::{FlbSignature, Formula, FuncSym, Stage, Term, UnarySym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("formula is not in the exists*forall* fragment")]
    WrongFragment,
    #[error("formula contains a minimize node")]
    MinimizePresent,
    #[error("search budget exhausted")]
    BudgetExceeded,
}

/// Node budget justified by the small-model property: one full tree per
/// existential witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelBound {
    pub max_trees: usize,
    /// Node count of the full tree of height `n` and branching `|f|`.
    pub tree_size: usize,
    pub max_nodes: usize,
}

/// Picks the tree budget for a prenex formula: one tree per existential
/// witness (free variables count as witnesses), at least one.
pub fn small_model_bound(
    pf: &PrenexFormula,
    sig: &FlbSignature,
) -> Result<ModelBound, SolverError> {
    if !pf.is_exists_forall() {
        return Err(SolverError::WrongFragment);
    }
    let free = free_witnesses(pf);
    let max_trees = (pf.exists_count() + free.len()).max(1);
    let tree_size = sig.full_tree_size();
    Ok(ModelBound { max_trees, tree_size, max_nodes: max_trees * tree_size })
}

fn free_witnesses(pf: &PrenexFormula) -> Vec<String> {
    let bound: BTreeSet<&String> = pf.prefix.iter().map(|(_, v)| v).collect();
    pf.matrix.free_variables().into_iter().filter(|v| !bound.contains(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Sat { witness: Transition, assignment: Assignment },
    Unsat,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat { .. })
    }
}

// ---------------------------------------------------------------------------
// Forest skeletons
// ---------------------------------------------------------------------------

/// A rooted tree shape of bounded height; one optional subtree per child
/// function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TreeShape {
    children: Vec<Option<TreeShape>>,
}

impl TreeShape {
    pub fn size(&self) -> usize {
        1 + self.children.iter().flatten().map(|c| c.size()).sum::<usize>()
    }
}

/// All tree shapes of height at most `height` with `branching` child slots.
pub fn all_tree_shapes(branching: usize, height: usize) -> Vec<TreeShape> {
    if height == 0 {
        return vec![TreeShape { children: vec![None; branching] }];
    }
    let subs = all_tree_shapes(branching, height - 1);
    let mut out = Vec::new();
    let mut choice = vec![0usize; branching]; // 0 = none, i+1 = subs[i]
    loop {
        let children =
            choice.iter().map(|&c| if c == 0 { None } else { Some(subs[c - 1].clone()) }).collect();
        out.push(TreeShape { children });
        let mut i = 0;
        loop {
            if i == branching {
                out.sort();
                return out;
            }
            choice[i] += 1;
            if choice[i] <= subs.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

// Non-decreasing shape index sequences with bounded tree count and node sum.
fn forests(sizes: &[usize], max_trees: usize, max_nodes: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        sizes: &[usize],
        max_trees: usize,
        max_nodes: usize,
        min_idx: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max_trees {
            return;
        }
        for i in min_idx..sizes.len() {
            if sizes[i] <= max_nodes {
                cur.push(i);
                rec(sizes, max_trees, max_nodes - sizes[i], i, cur, out);
                cur.pop();
            }
        }
    }
    rec(sizes, max_trees, max_nodes, 0, &mut cur, &mut out);
    out.sort_by_key(|f| (f.iter().map(|&i| sizes[i]).sum::<usize>(), f.clone()));
    out
}

/// A forest instantiated with concrete node indices.
struct Skeleton {
    sig: Arc<FlbSignature>,
    node_names: Vec<NodeId>,
    /// child index per (child fn, node); identity encodes "no child"
    child: Vec<Vec<usize>>,
    parent: Vec<usize>,
}

impl Skeleton {
    fn build(sig: &Arc<FlbSignature>, shapes: &[TreeShape], forest: &[usize]) -> Skeleton {
        let mut child: Vec<Vec<usize>> = vec![Vec::new(); sig.child_fns.len()];
        let mut parent = Vec::new();
        fn place(
            shape: &TreeShape,
            child: &mut [Vec<usize>],
            parent: &mut Vec<usize>,
        ) -> usize {
            let me = parent.len();
            parent.push(me);
            for slots in child.iter_mut() {
                slots.push(me);
            }
            for (fi, sub) in shape.children.iter().enumerate() {
                if let Some(sub) = sub {
                    let c = place(sub, child, parent);
                    child[fi][me] = c;
                    parent[c] = me;
                }
            }
            me
        }
        for &si in forest {
            place(&shapes[si], &mut child, &mut parent);
        }
        let node_names = (0..parent.len()).map(|i| format!("n{i:02}")).collect();
        Skeleton { sig: sig.clone(), node_names, child, parent }
    }

    fn len(&self) -> usize {
        self.node_names.len()
    }

    fn base_parts(&self) -> TransitionParts {
        let mut parts = TransitionParts::default();
        for name in &self.node_names {
            parts.nodes.insert(name.clone());
        }
        for (fi, f) in self.sig.child_fns.iter().enumerate() {
            for (node, &c) in self.child[fi].iter().enumerate() {
                if c != node {
                    parts
                        .child_edges
                        .insert((f.clone(), self.node_names[node].clone()), self.node_names[c].clone());
                }
            }
        }
        parts
    }
}

// ---------------------------------------------------------------------------
// Exhaustive structure enumeration (the oracle)
// ---------------------------------------------------------------------------

/// All functional matchings over `k` nodes, self-pairs included. Each node
/// occurs in at most one pair.
pub fn all_matchings(k: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut free: Vec<bool> = vec![true; k];
    fn rec(
        i: usize,
        k: usize,
        free: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some(i) = (i..k).find(|&j| free[j]) else {
            out.push(cur.clone());
            return;
        };
        free[i] = false;
        // unmatched
        rec(i + 1, k, free, cur, out);
        // self pair
        cur.push((i, i));
        rec(i + 1, k, free, cur, out);
        cur.pop();
        // pair with a later free node
        for j in i + 1..k {
            if free[j] {
                free[j] = false;
                cur.push((i, j));
                rec(i + 1, k, free, cur, out);
                cur.pop();
                free[j] = true;
            }
        }
        free[i] = true;
    }
    rec(0, k, &mut free, &mut cur, &mut out);
    out
}

/// Streams every structure over the signature with 1..=`max_nodes` nodes:
/// every forest skeleton, presence combination (all nodes supported when
/// `supported_only`), label and name combination, and functional pre/post
/// link matchings. Every emitted structure is structurally valid.
pub fn for_each_structure(
    sig: &Arc<FlbSignature>,
    max_nodes: usize,
    supported_only: bool,
    mut f: impl FnMut(&Transition) -> ControlFlow<()>,
) {
    let shapes = all_tree_shapes(sig.child_fns.len(), sig.height);
    let sizes: Vec<usize> = shapes.iter().map(|s| s.size()).collect();
    for forest in forests(&sizes, max_nodes, max_nodes) {
        let skel = Skeleton::build(sig, &shapes, &forest);
        let k = skel.len();
        let matchings = all_matchings(k);
        let presence_radix = if supported_only { 3 } else { 4 };
        let n_labels = sig.labels.len();
        let n_names = sig.names.len();
        let digits = k + k * n_labels + k * n_names;
        let mut odo = vec![0u8; digits];
        'odometer: loop {
            for pre_match in &matchings {
                for post_match in &matchings {
                    let t = build_structure(&skel, &odo, pre_match, post_match);
                    if let ControlFlow::Break(()) = f(&t) {
                        return;
                    }
                }
            }
            // advance
            let mut i = 0;
            loop {
                if i == digits {
                    break 'odometer;
                }
                let radix = if i < k {
                    presence_radix
                } else if i < k + k * n_labels {
                    4
                } else {
                    2
                };
                odo[i] += 1;
                if (odo[i] as usize) < radix {
                    break;
                }
                odo[i] = 0;
                i += 1;
            }
        }
    }
}

fn build_structure(
    skel: &Skeleton,
    odo: &[u8],
    pre_match: &[(usize, usize)],
    post_match: &[(usize, usize)],
) -> Transition {
    let k = skel.len();
    let sig = &skel.sig;
    let mut parts = skel.base_parts();
    for i in 0..k {
        // presence digit: 0 = both, 1 = pre only, 2 = post only, 3 = neither
        let d = odo[i];
        if d == 0 || d == 1 {
            parts.pre_present.insert(skel.node_names[i].clone());
        }
        if d == 0 || d == 2 {
            parts.post_present.insert(skel.node_names[i].clone());
        }
    }
    for (li, label) in sig.labels.iter().enumerate() {
        for i in 0..k {
            let d = odo[k + li * k + i];
            if d & 1 != 0 {
                parts
                    .pre_labels
                    .entry(label.clone())
                    .or_default()
                    .insert(skel.node_names[i].clone());
            }
            if d & 2 != 0 {
                parts
                    .post_labels
                    .entry(label.clone())
                    .or_default()
                    .insert(skel.node_names[i].clone());
            }
        }
    }
    let name_base = k + sig.labels.len() * k;
    for (ni, name) in sig.names.iter().enumerate() {
        for i in 0..k {
            if odo[name_base + ni * k + i] == 1 {
                parts.names.entry(name.clone()).or_default().insert(skel.node_names[i].clone());
            }
        }
    }
    for &(a, b) in pre_match {
        parts.pre_links.insert(LinkPair::new(&*skel.node_names[a], &*skel.node_names[b]));
    }
    for &(a, b) in post_match {
        parts.post_links.insert(LinkPair::new(&*skel.node_names[a], &*skel.node_names[b]));
    }
    Transition::new(sig.clone(), parts).expect("generated structure is well formed")
}

/// Exhaustively enumerates all valid supported structures with at most
/// `max_nodes` nodes that satisfy `phi` (free variables are closed
/// existentially), deduplicated up to node renaming. `budget` caps the number
/// of structures examined.
pub fn enumerate_models(
    sig: &Arc<FlbSignature>,
    max_nodes: usize,
    phi: &Formula,
    budget: u64,
) -> Result<Vec<Transition>, SolverError> {
    let free: Vec<String> = phi.free_variables().into_iter().collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut examined = 0u64;
    let mut exhausted = false;
    for_each_structure(sig, max_nodes, true, |t| {
        examined += 1;
        if examined > budget {
            exhausted = true;
            return ControlFlow::Break(());
        }
        if satisfies_closed(t, phi, &free) {
            let key = t.canonical_key(&[]).expect("generated structures are valid");
            if seen.insert(key) {
                out.push(t.clone());
            }
        }
        ControlFlow::Continue(())
    });
    if exhausted {
        return Err(SolverError::BudgetExceeded);
    }
    Ok(out)
}

fn satisfies_closed(t: &Transition, phi: &Formula, free: &[String]) -> bool {
    let nodes: Vec<NodeId> = t.nodes().iter().cloned().collect();
    let mut assignment = Assignment::new();
    fn rec(
        t: &Transition,
        phi: &Formula,
        free: &[String],
        nodes: &[NodeId],
        assignment: &mut Assignment,
    ) -> bool {
        match free.split_first() {
            None => eval(t, assignment, phi).unwrap_or(false),
            Some((v, rest)) => nodes.iter().any(|n| {
                assignment.insert(v.clone(), n.clone());
                let r = rec(t, phi, rest, nodes, assignment);
                assignment.remove(v);
                r
            }),
        }
    }
    rec(t, phi, free, &nodes, &mut assignment)
}

// ---------------------------------------------------------------------------
// Backtracking satisfiability search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Partner {
    Undecided,
    Nobody,
    Node(usize),
}

struct Facts {
    /// per node: [P, P*, labels pre/post interleaved, names]
    unary: Vec<Option<bool>>,
    stride: usize,
    pre_partner: Vec<Partner>,
    post_partner: Vec<Partner>,
}

impl Facts {
    fn new(k: usize, n_labels: usize, n_names: usize) -> Facts {
        let stride = 2 + 2 * n_labels + n_names;
        Facts {
            unary: vec![None; k * stride],
            stride,
            pre_partner: vec![Partner::Undecided; k],
            post_partner: vec![Partner::Undecided; k],
        }
    }

    fn unary_idx(&self, node: usize, sym: usize) -> usize {
        node * self.stride + sym
    }

    fn link3(&self, stage: Stage, a: usize, b: usize) -> Option<bool> {
        let partners = match stage {
            Stage::Pre => &self.pre_partner,
            Stage::Post => &self.post_partner,
        };
        match (partners[a], partners[b]) {
            (Partner::Node(x), _) => Some(x == b),
            (_, Partner::Node(y)) => Some(y == a),
            (Partner::Nobody, _) | (_, Partner::Nobody) => Some(false),
            _ => None,
        }
    }
}

// Maps a unary symbol to its slot index within a node's stride.
fn sym_slot(sig: &FlbSignature, sym: &UnarySym) -> usize {
    match sym {
        UnarySym::Presence(Stage::Pre) => 0,
        UnarySym::Presence(Stage::Post) => 1,
        UnarySym::Label(stage, l) => {
            let li = sig.labels.iter().position(|x| x == l).expect("declared label");
            2 + 2 * li + if *stage == Stage::Post { 1 } else { 0 }
        }
        UnarySym::Name(n) => {
            let ni = sig.names.iter().position(|x| x == n).expect("declared name");
            2 + 2 * sig.labels.len() + ni
        }
    }
}

fn eval_term_idx(skel: &Skeleton, env: &[(String, usize)], term: &Term) -> usize {
    match term {
        Term::Var(v) => {
            env.iter().rev().find(|(name, _)| name == v).map(|(_, n)| *n).expect("bound variable")
        }
        Term::App(f, inner) => {
            let n = eval_term_idx(skel, env, inner);
            match f {
                FuncSym::Parent => skel.parent[n],
                FuncSym::Child(c) => {
                    let fi =
                        skel.sig.child_fns.iter().position(|x| x == c).expect("declared child fn");
                    skel.child[fi][n]
                }
            }
        }
    }
}

// Kleene three-valued evaluation of a quantifier-free formula.
fn eval3(
    skel: &Skeleton,
    facts: &Facts,
    env: &[(String, usize)],
    f: &Formula,
) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Unary(sym, term) => {
            let n = eval_term_idx(skel, env, term);
            facts.unary[facts.unary_idx(n, sym_slot(&skel.sig, sym))]
        }
        Formula::Link(s, a, b) => {
            let x = eval_term_idx(skel, env, a);
            let y = eval_term_idx(skel, env, b);
            facts.link3(*s, x, y)
        }
        Formula::Eq(a, b) => {
            Some(eval_term_idx(skel, env, a) == eval_term_idx(skel, env, b))
        }
        Formula::Not(g) => eval3(skel, facts, env, g).map(|b| !b),
        Formula::And(l, r) => match (eval3(skel, facts, env, l), eval3(skel, facts, env, r)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Formula::Or(l, r) => match (eval3(skel, facts, env, l), eval3(skel, facts, env, r)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Formula::Implies(l, r) => match (eval3(skel, facts, env, l), eval3(skel, facts, env, r)) {
            (Some(false), _) | (_, Some(true)) => Some(true),
            (Some(true), Some(false)) => Some(false),
            _ => None,
        },
        _ => unreachable!("matrix is quantifier-free"),
    }
}

struct Instance<'a> {
    matrix: &'a Formula,
    env: Vec<(String, usize)>,
}

struct Search<'a> {
    skel: &'a Skeleton,
    facts: Facts,
    instances: Vec<Instance<'a>>,
    satisfied: Vec<bool>,
    budget: &'a mut u64,
}

enum SlotChoice {
    Unary(usize),
    PrePartner(usize),
    PostPartner(usize),
}

impl<'a> Search<'a> {
    // Re-evaluates open instances; marks newly satisfied ones on the trail.
    // Returns false on conflict.
    fn propagate(&mut self, trail: &mut Vec<usize>) -> bool {
        for i in 0..self.instances.len() {
            if self.satisfied[i] {
                continue;
            }
            let inst = &self.instances[i];
            match eval3(self.skel, &self.facts, &inst.env, inst.matrix) {
                Some(false) => return false,
                Some(true) => {
                    self.satisfied[i] = true;
                    trail.push(i);
                }
                None => {}
            }
        }
        true
    }

    fn undo(&mut self, trail: &[usize]) {
        for &i in trail {
            self.satisfied[i] = false;
        }
    }

    fn dfs(&mut self, slots: &[SlotChoice], pos: usize) -> Result<bool, SolverError> {
        let Some(slot) = slots.get(pos) else {
            return Ok(true);
        };
        match slot {
            SlotChoice::Unary(idx) => {
                for value in [false, true] {
                    *self.budget = self.budget.checked_sub(1).ok_or(SolverError::BudgetExceeded)?;
                    self.facts.unary[*idx] = Some(value);
                    let mut trail = Vec::new();
                    if self.propagate(&mut trail) && self.dfs(slots, pos + 1)? {
                        return Ok(true);
                    }
                    self.undo(&trail);
                }
                self.facts.unary[*idx] = None;
                Ok(false)
            }
            SlotChoice::PrePartner(node) | SlotChoice::PostPartner(node) => {
                let stage = match slot {
                    SlotChoice::PrePartner(_) => Stage::Pre,
                    _ => Stage::Post,
                };
                let node = *node;
                if self.partners(stage)[node] != Partner::Undecided {
                    return self.dfs(slots, pos + 1);
                }
                let k = self.skel.len();
                let mut options = vec![Partner::Nobody, Partner::Node(node)];
                for j in node + 1..k {
                    if self.partners(stage)[j] == Partner::Undecided {
                        options.push(Partner::Node(j));
                    }
                }
                for opt in options {
                    *self.budget = self.budget.checked_sub(1).ok_or(SolverError::BudgetExceeded)?;
                    self.partners_mut(stage)[node] = opt;
                    if let Partner::Node(j) = opt {
                        if j != node {
                            self.partners_mut(stage)[j] = Partner::Node(node);
                        }
                    }
                    let mut trail = Vec::new();
                    if self.propagate(&mut trail) && self.dfs(slots, pos + 1)? {
                        return Ok(true);
                    }
                    self.undo(&trail);
                    if let Partner::Node(j) = opt {
                        if j != node {
                            self.partners_mut(stage)[j] = Partner::Undecided;
                        }
                    }
                    self.partners_mut(stage)[node] = Partner::Undecided;
                }
                Ok(false)
            }
        }
    }

    fn partners(&self, stage: Stage) -> &Vec<Partner> {
        match stage {
            Stage::Pre => &self.facts.pre_partner,
            Stage::Post => &self.facts.post_partner,
        }
    }

    fn partners_mut(&mut self, stage: Stage) -> &mut Vec<Partner> {
        match stage {
            Stage::Pre => &mut self.facts.pre_partner,
            Stage::Post => &mut self.facts.post_partner,
        }
    }
}

/// Decides satisfiability of an exists*forall* prenex formula modulo the
/// theory of supported bounded forests, by search over forests of at most
/// `max_trees` full trees (default from [`small_model_bound`]). Free
/// variables are treated as existential witnesses and reported in the
/// assignment. `budget` caps the number of search decisions.
pub fn sat(
    pf: &PrenexFormula,
    sig: &Arc<FlbSignature>,
    max_trees_override: Option<usize>,
    budget: u64,
) -> Result<SatOutcome, SolverError> {
    if pf.matrix.contains_minimize() {
        return Err(SolverError::MinimizePresent);
    }
    let bound = small_model_bound(pf, sig)?;
    let max_trees = max_trees_override.unwrap_or(bound.max_trees);

    let mut exists_vars = free_witnesses(pf);
    exists_vars.extend(
        pf.prefix.iter().filter(|(q, _)| *q == Quant::Exists).map(|(_, v)| v.clone()),
    );
    let forall_vars: Vec<String> =
        pf.prefix.iter().filter(|(q, _)| *q == Quant::Forall).map(|(_, v)| v.clone()).collect();

    let theory_pf = prenex_into(&theory_supp(sig), Target::ExistsForall)
        .expect("theory has no minimize node")
        .expect("a universal sentence is trivially exists*forall*");
    debug_assert!(theory_pf.prefix.iter().all(|(q, _)| *q == Quant::Forall));
    let theory_vars: Vec<String> = theory_pf.prefix.iter().map(|(_, v)| v.clone()).collect();

    let shapes = all_tree_shapes(sig.child_fns.len(), sig.height);
    let sizes: Vec<usize> = shapes.iter().map(|s| s.size()).collect();
    let mut budget = budget;

    for forest in forests(&sizes, max_trees, max_trees * bound.tree_size) {
        let skel = Skeleton::build(sig, &shapes, &forest);
        let k = skel.len();
        let theory_instances = ground_envs(&theory_vars, k);
        let mut witness = vec![0usize; exists_vars.len()];
        loop {
            // instances of the user matrix under this witness tuple
            let base: Vec<(String, usize)> =
                exists_vars.iter().cloned().zip(witness.iter().copied()).collect();
            let mut instances: Vec<Instance> = theory_instances
                .iter()
                .map(|env| Instance { matrix: &theory_pf.matrix, env: env.clone() })
                .collect();
            for mut env in ground_envs(&forall_vars, k) {
                let mut full = base.clone();
                full.append(&mut env);
                instances.push(Instance { matrix: &pf.matrix, env: full });
            }
            let n = instances.len();
            let mut search = Search {
                skel: &skel,
                facts: Facts::new(k, sig.labels.len(), sig.names.len()),
                instances,
                satisfied: vec![false; n],
                budget: &mut budget,
            };
            // decide the facts the user instances actually mention first, so
            // conflicts surface before the unconstrained facts are explored
            let mut relevant: HashSet<usize> = HashSet::new();
            for inst in &search.instances[theory_instances.len()..] {
                mark_relevant(&skel, &inst.env, inst.matrix, &mut relevant, &search.facts);
            }
            let mut slots = Vec::new();
            for node in 0..k {
                slots.push(SlotChoice::PrePartner(node));
                slots.push(SlotChoice::PostPartner(node));
                for sym in 0..search.facts.stride {
                    slots.push(SlotChoice::Unary(search.facts.unary_idx(node, sym)));
                }
            }
            slots.sort_by_key(|s| {
                let key = slot_key(s, &search.facts);
                (!relevant.contains(&key), key)
            });
            let mut initial = Vec::new();
            let found = search.propagate(&mut initial) && search.dfs(&slots, 0)?;
            if found {
                let witness_t = extract_witness(&skel, &search.facts);
                let assignment: Assignment = exists_vars
                    .iter()
                    .zip(&witness)
                    .map(|(v, &n)| (v.clone(), skel.node_names[n].clone()))
                    .collect();
                debug_assert!(witness_t.validate_flb().is_empty());
                debug_assert!(witness_t.is_supported());
                return Ok(SatOutcome::Sat { witness: witness_t, assignment });
            }
            // next witness tuple
            let mut i = 0;
            loop {
                if i == witness.len() {
                    break;
                }
                witness[i] += 1;
                if witness[i] < k {
                    break;
                }
                witness[i] = 0;
                i += 1;
            }
            if witness.iter().all(|&w| w == 0) || witness.is_empty() {
                break;
            }
        }
    }
    Ok(SatOutcome::Unsat)
}

// Stable identifier for a decision slot: unary slots use their fact index,
// partner slots hang off the end.
fn slot_key(slot: &SlotChoice, facts: &Facts) -> usize {
    let n = facts.unary.len();
    match slot {
        SlotChoice::Unary(idx) => *idx,
        SlotChoice::PrePartner(node) => n + 2 * node,
        SlotChoice::PostPartner(node) => n + 2 * node + 1,
    }
}

// Collects the decision slots a ground instance can observe.
fn mark_relevant(
    skel: &Skeleton,
    env: &[(String, usize)],
    f: &Formula,
    out: &mut HashSet<usize>,
    facts: &Facts,
) {
    match f {
        Formula::Unary(sym, term) => {
            let node = eval_term_idx(skel, env, term);
            out.insert(facts.unary_idx(node, sym_slot(&skel.sig, sym)));
        }
        Formula::Link(s, a, b) => {
            let n = facts.unary.len();
            for t in [a, b] {
                let node = eval_term_idx(skel, env, t);
                out.insert(n + 2 * node + usize::from(*s == Stage::Post));
            }
        }
        Formula::Not(g) => mark_relevant(skel, env, g, out, facts),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
            mark_relevant(skel, env, l, out, facts);
            mark_relevant(skel, env, r, out, facts);
        }
        _ => {}
    }
}

fn ground_envs(vars: &[String], k: usize) -> Vec<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut tuple = vec![0usize; vars.len()];
    loop {
        out.push(vars.iter().cloned().zip(tuple.iter().copied()).collect());
        let mut i = 0;
        loop {
            if i == vars.len() {
                return out;
            }
            tuple[i] += 1;
            if tuple[i] < k {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

fn extract_witness(skel: &Skeleton, facts: &Facts) -> Transition {
    let sig = &skel.sig;
    let mut parts = skel.base_parts();
    let k = skel.len();
    for node in 0..k {
        let name = &skel.node_names[node];
        let get = |sym: usize| facts.unary[facts.unary_idx(node, sym)].unwrap_or(false);
        if get(0) {
            parts.pre_present.insert(name.clone());
        }
        if get(1) {
            parts.post_present.insert(name.clone());
        }
        for (li, label) in sig.labels.iter().enumerate() {
            if get(2 + 2 * li) {
                parts.pre_labels.entry(label.clone()).or_default().insert(name.clone());
            }
            if get(2 + 2 * li + 1) {
                parts.post_labels.entry(label.clone()).or_default().insert(name.clone());
            }
        }
        for (ni, nm) in sig.names.iter().enumerate() {
            if get(2 + 2 * sig.labels.len() + ni) {
                parts.names.entry(nm.clone()).or_default().insert(name.clone());
            }
        }
        for (stage, partners) in
            [(Stage::Pre, &facts.pre_partner), (Stage::Post, &facts.post_partner)]
        {
            if let Partner::Node(j) = partners[node] {
                let pair = LinkPair::new(name.clone(), skel.node_names[j].clone());
                match stage {
                    Stage::Pre => parts.pre_links.insert(pair),
                    Stage::Post => parts.post_links.insert(pair),
                };
            }
        }
    }
    Transition::new(sig.clone(), parts).expect("witness is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidOutcome {
    Valid,
    Invalid { counter: Transition, assignment: Assignment },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidityError {
    #[error("negation does not normalize into exists*forall* within the search bound")]
    NormalizationFailed,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Prenex(#[from] crate::syntax::prenex::PrenexError),
}

/// Validity modulo the theory: the universal closure of `f` holds in every
/// supported bounded forest iff its negation is unsatisfiable.
pub fn valid(
    f: &Formula,
    sig: &Arc<FlbSignature>,
    max_trees_override: Option<usize>,
    budget: u64,
) -> Result<ValidOutcome, ValidityError> {
    let neg = Formula::not(f.clone());
    let pf = crate::syntax::prenex::fragment_normalize(&neg, Target::ExistsForall)?
        .ok_or(ValidityError::NormalizationFailed)?;
    match sat(&pf, sig, max_trees_override, budget)? {
        SatOutcome::Unsat => Ok(ValidOutcome::Valid),
        SatOutcome::Sat { witness, assignment } => {
            Ok(ValidOutcome::Invalid { counter: witness, assignment })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_formula, parse_signature};

    fn tiny_sig() -> Arc<FlbSignature> {
        Arc::new(parse_signature("height 1\nchildren f1\nlabels L\nnames N").unwrap())
    }

    fn ea(src: &str, sig: &Arc<FlbSignature>) -> PrenexFormula {
        let f = parse_formula(src, sig).unwrap();
        crate::syntax::prenex::fragment_normalize(&f, Target::ExistsForall)
            .unwrap()
            .expect("fragment reachable")
    }

    #[test]
    fn matching_counts_follow_recurrence() {
        // m(k) = 2 m(k-1) + (k-1) m(k-2): unmatched/self/paired
        assert_eq!(all_matchings(0).len(), 1);
        assert_eq!(all_matchings(1).len(), 2);
        assert_eq!(all_matchings(2).len(), 5);
        assert_eq!(all_matchings(3).len(), 14);
        assert_eq!(all_matchings(4).len(), 43);
    }

    #[test]
    fn tree_shape_counts() {
        assert_eq!(all_tree_shapes(2, 1).len(), 4);
        assert_eq!(all_tree_shapes(1, 1).len(), 2);
        assert_eq!(all_tree_shapes(2, 2).len(), 25);
        assert_eq!(all_tree_shapes(0, 3).len(), 1);
    }

    #[test]
    fn bound_arithmetic() {
        let sig = Arc::new(parse_signature("height 1\nchildren f1 f2\nlabels\nnames").unwrap());
        let pf = ea("exists z. forall y. Link(z,y) -> z = y", &sig);
        let b = small_model_bound(&pf, &sig).unwrap();
        assert_eq!((b.max_trees, b.tree_size, b.max_nodes), (1, 3, 3));

        // universal-only formulas still get one tree
        let pf = ea("forall y. P(y)", &sig);
        assert_eq!(small_model_bound(&pf, &sig).unwrap().max_trees, 1);

        let sig1 = Arc::new(parse_signature("height 1\nchildren f1\nlabels\nnames").unwrap());
        let pf = ea("exists x. exists w. forall y. Link(x,w) | P(y)", &sig1);
        let b = small_model_bound(&pf, &sig1).unwrap();
        assert_eq!((b.max_trees, b.max_nodes), (2, 4));
    }

    #[test]
    fn wrong_fragment_is_rejected() {
        let sig = tiny_sig();
        let f = parse_formula("forall y. exists z. Link(y,z)", &sig).unwrap();
        let (pf, _) = crate::syntax::prenex::normalize_prenex(&f).unwrap();
        assert_eq!(small_model_bound(&pf, &sig).unwrap_err(), SolverError::WrongFragment);
    }

    #[test]
    fn contradiction_is_unsat() {
        let sig = tiny_sig();
        let pf = ea("exists x. P(x) & !P(x)", &sig);
        assert_eq!(sat(&pf, &sig, None, 1_000_000).unwrap(), SatOutcome::Unsat);
    }

    #[test]
    fn nothing_present_contradicts_support() {
        let sig = tiny_sig();
        let pf = ea("forall x. !P(x) & !P*(x)", &sig);
        assert_eq!(sat(&pf, &sig, None, 1_000_000).unwrap(), SatOutcome::Unsat);
    }

    #[test]
    fn simple_positive_formula_is_sat_with_valid_witness() {
        let sig = tiny_sig();
        let pf = ea("exists x. L(x) & !L*(x) & N(x)", &sig);
        match sat(&pf, &sig, None, 10_000_000).unwrap() {
            SatOutcome::Sat { witness, assignment } => {
                assert!(witness.validate_flb().is_empty());
                assert!(witness.is_supported());
                let x = &assignment["x"];
                assert!(witness.labelled(Stage::Pre, "L").contains(x));
                assert!(!witness.labelled(Stage::Post, "L").contains(x));
            }
            SatOutcome::Unsat => panic!("expected SAT"),
        }
    }

    #[test]
    fn support_axiom_is_valid() {
        let sig = tiny_sig();
        let f = crate::syntax::theory::support_formula();
        assert_eq!(valid(&f, &sig, None, 10_000_000).unwrap(), ValidOutcome::Valid);
    }

    #[test]
    fn parent_is_idempotent_on_height_one_forests() {
        let sig = tiny_sig();
        let f = parse_formula("forall x. parent(parent(x)) = parent(x)", &sig).unwrap();
        assert_eq!(valid(&f, &sig, None, 50_000_000).unwrap(), ValidOutcome::Valid);
    }

    #[test]
    fn guarded_observation_is_not_valid() {
        let sig = tiny_sig();
        let f = parse_formula("forall x. forall y. Link*(x,y) -> !L*(parent(x))", &sig).unwrap();
        match valid(&f, &sig, None, 50_000_000).unwrap() {
            ValidOutcome::Invalid { counter, .. } => {
                assert!(counter.validate_flb().is_empty());
            }
            ValidOutcome::Valid => panic!("expected a counter-model"),
        }
    }

    #[test]
    fn oracle_counts_single_node_structures() {
        // no labels, no names, height 0: presence (3 supported) x pre self
        // link (2) x post self link (2)
        let sig = Arc::new(parse_signature("height 0\nchildren\nlabels\nnames").unwrap());
        let models =
            enumerate_models(&sig, 1, &Formula::True, 1_000_000).unwrap();
        assert_eq!(models.len(), 12);
    }

    #[test]
    fn oracle_filters_by_formula() {
        let sig = tiny_sig();
        let phi = parse_formula("exists x. exists y. !(x = y) & Link(x,y) & Link*(x,y)", &sig)
            .unwrap();
        let models = enumerate_models(&sig, 2, &phi, 10_000_000).unwrap();
        assert!(!models.is_empty());
        for m in &models {
            assert!(m.validate_flb().is_empty());
            assert!(m.is_supported());
        }
    }

    #[test]
    fn sat_answer_is_stable_under_variable_renaming() {
        let sig = tiny_sig();
        let a = ea("exists x. forall y. Link*(x,y) -> N(y)", &sig);
        let b = ea("exists w. forall v. Link*(w,v) -> N(v)", &sig);
        let ra = sat(&a, &sig, None, 10_000_000).unwrap();
        let rb = sat(&b, &sig, None, 10_000_000).unwrap();
        assert_eq!(ra.is_sat(), rb.is_sat());
        if let (SatOutcome::Sat { witness: wa, .. }, SatOutcome::Sat { witness: wb, .. }) =
            (ra, rb)
        {
            assert_eq!(wa.canonical_key(&[]).unwrap(), wb.canonical_key(&[]).unwrap());
        }
    }
}
