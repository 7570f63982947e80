//! Change sets, the change order, and clearing changes tree by tree.
//!
//! The change order compares two transitions with equal preconditions: the
//! smaller one has a subset of the nodes, a subset of every per-symbol change
//! set, and static data that restricts. A sub clears every change of one tree
//! outside a protected ball, with one asymmetry taken from the definition of
//! modified nodes: a link deletion survives clearing when its other endpoint
//! is modified or protected, while link additions are cleared unconditionally.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{LinkPair, ModelError, NodeId, Transition, TreeDecomposition};
use crate::syntax::Stage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChangeError {
    #[error("transitions use different signatures")]
    SignatureMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cleared tree {0} intersects the protected ball")]
    ClearedTreeInBall(usize),
    #[error("no tree with index {0}")]
    NoSuchTree(usize),
}

/// Exact per-symbol change sets of a transition.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChangeSets {
    /// Symmetric difference of the presence sets.
    pub presence: BTreeSet<NodeId>,
    /// Symmetric difference per label.
    pub labels: BTreeMap<String, BTreeSet<NodeId>>,
    /// Links present only in the postcondition.
    pub plus_links: BTreeSet<LinkPair>,
    /// Links present only in the precondition.
    pub minus_links: BTreeSet<LinkPair>,
}

impl ChangeSets {
    pub fn is_empty(&self) -> bool {
        self.presence.is_empty()
            && self.labels.values().all(|s| s.is_empty())
            && self.plus_links.is_empty()
            && self.minus_links.is_empty()
    }

    /// Total number of atomic changes.
    pub fn size(&self) -> usize {
        self.presence.len()
            + self.labels.values().map(|s| s.len()).sum::<usize>()
            + self.plus_links.len()
            + self.minus_links.len()
    }
}

pub fn change_sets(t: &Transition) -> ChangeSets {
    let sym_diff = |a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>| -> BTreeSet<NodeId> {
        a.symmetric_difference(b).cloned().collect()
    };
    let mut labels = BTreeMap::new();
    for l in &t.signature().labels {
        labels.insert(
            l.clone(),
            sym_diff(t.labelled(Stage::Pre, l), t.labelled(Stage::Post, l)),
        );
    }
    ChangeSets {
        presence: sym_diff(t.present(Stage::Pre), t.present(Stage::Post)),
        labels,
        plus_links: t.links(Stage::Post).difference(t.links(Stage::Pre)).cloned().collect(),
        minus_links: t.links(Stage::Pre).difference(t.links(Stage::Post)).cloned().collect(),
    }
}

/// A node is modified if it carries a unary change, occurs in a link
/// addition, or occurs in a link deletion whose other endpoint lies in its
/// own tree. An inter-tree link deletion does not modify its endpoints.
pub fn modified_nodes(t: &Transition) -> Result<BTreeSet<NodeId>, ModelError> {
    let decomp = t.decompose()?;
    Ok(modified_nodes_with(t, &change_sets(t), &decomp))
}

pub(crate) fn modified_nodes_with(
    t: &Transition,
    changes: &ChangeSets,
    decomp: &TreeDecomposition,
) -> BTreeSet<NodeId> {
    let _ = t;
    let mut out = changes.presence.clone();
    for set in changes.labels.values() {
        out.extend(set.iter().cloned());
    }
    for pair in &changes.plus_links {
        let (a, b) = pair.endpoints();
        out.insert(a.clone());
        out.insert(b.clone());
    }
    for pair in &changes.minus_links {
        let (a, b) = pair.endpoints();
        if decomp.tree_of[a] == decomp.tree_of[b] {
            out.insert(a.clone());
            out.insert(b.clone());
        }
    }
    out
}

/// Modified nodes outside the given tree.
pub fn modified_outside(t: &Transition, tree: usize) -> Result<BTreeSet<NodeId>, ChangeError> {
    let decomp = t.decompose()?;
    if tree >= decomp.trees.len() {
        return Err(ChangeError::NoSuchTree(tree));
    }
    let mut out = modified_nodes_with(t, &change_sets(t), &decomp);
    out.retain(|n| decomp.tree_of[n] != tree);
    Ok(out)
}

/// All nodes of all trees within link distance `d` of a tree meeting `K`.
/// Trees are adjacent when a pre- or post-link joins them; unreachable trees
/// are at infinite distance and excluded.
pub fn ball(t: &Transition, kernel: &BTreeSet<NodeId>, d: usize) -> Result<BTreeSet<NodeId>, ModelError> {
    let decomp = t.decompose()?;
    Ok(ball_with(t, &decomp, kernel, d))
}

pub(crate) fn ball_with(
    t: &Transition,
    decomp: &TreeDecomposition,
    kernel: &BTreeSet<NodeId>,
    d: usize,
) -> BTreeSet<NodeId> {
    let ntrees = decomp.trees.len();
    let mut adjacent: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ntrees];
    for pair in t.links(Stage::Pre).iter().chain(t.links(Stage::Post)) {
        let (a, b) = pair.endpoints();
        let (ta, tb) = (decomp.tree_of[a], decomp.tree_of[b]);
        adjacent[ta].insert(tb);
        adjacent[tb].insert(ta);
    }
    let mut dist: Vec<Option<usize>> = vec![None; ntrees];
    let mut frontier: Vec<usize> = Vec::new();
    for n in kernel {
        let ti = decomp.tree_of[n];
        if dist[ti].is_none() {
            dist[ti] = Some(0);
            frontier.push(ti);
        }
    }
    let mut depth = 0;
    while depth < d && !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for ti in frontier {
            for &tj in &adjacent[ti] {
                if dist[tj].is_none() {
                    dist[tj] = Some(depth);
                    next.push(tj);
                }
            }
        }
        frontier = next;
    }
    let mut out = BTreeSet::new();
    for (ti, tree) in decomp.trees.iter().enumerate() {
        if dist[ti].is_some() {
            out.extend(tree.vertices.iter().cloned());
        }
    }
    out
}

/// Tests the change order: equal preconditions, restricting statics, and
/// componentwise inclusion of changes, with the smaller structure first.
pub fn change_leq(b: &Transition, a: &Transition) -> Result<bool, ChangeError> {
    if b.signature() != a.signature() {
        return Err(ChangeError::SignatureMismatch);
    }
    let sig = a.signature();
    if !b.nodes().is_subset(a.nodes()) {
        return Ok(false);
    }
    // equal preconditions, as sets
    if b.present(Stage::Pre) != a.present(Stage::Pre)
        || b.links(Stage::Pre) != a.links(Stage::Pre)
    {
        return Ok(false);
    }
    for l in &sig.labels {
        if b.labelled(Stage::Pre, l) != a.labelled(Stage::Pre, l) {
            return Ok(false);
        }
    }
    // statics restrict: names on the common nodes, and no edge of either
    // structure may dangle across the domain boundary
    for n in &sig.names {
        let restricted: BTreeSet<NodeId> =
            a.named(n).intersection(b.nodes()).cloned().collect();
        if &restricted != b.named(n) {
            return Ok(false);
        }
    }
    for ((f, parent), child) in a.child_edges() {
        let pk = b.nodes().contains(parent);
        let ck = b.nodes().contains(child);
        if pk != ck {
            return Ok(false);
        }
        if pk && b.child_of(f, parent) != *child {
            return Ok(false);
        }
    }
    for ((f, parent), child) in b.child_edges() {
        if a.child_of(f, parent) != *child {
            return Ok(false);
        }
    }
    // changes include
    let cb = change_sets(b);
    let ca = change_sets(a);
    if !cb.presence.is_subset(&ca.presence)
        || !cb.plus_links.is_subset(&ca.plus_links)
        || !cb.minus_links.is_subset(&ca.minus_links)
    {
        return Ok(false);
    }
    for l in &sig.labels {
        if !cb.labels[l].is_subset(&ca.labels[l]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strict version of the change order.
pub fn change_lt(b: &Transition, a: &Transition) -> Result<bool, ChangeError> {
    Ok(change_leq(b, a)? && !change_leq(a, b)?)
}

/// Parameters of one sub: protect a ball of radius `radius` around `kernel`,
/// clear the changes of `cleared_tree`, optionally prune nodes that end up
/// interpretation-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubSpec {
    pub kernel: BTreeSet<NodeId>,
    pub radius: usize,
    pub cleared_tree: usize,
    pub prune: bool,
}

/// Builds the sub described by `spec`. The result always sits below the input
/// in the change order.
pub fn make_sub(a: &Transition, spec: &SubSpec) -> Result<Transition, ChangeError> {
    let decomp = a.decompose()?;
    let tree = decomp.trees.get(spec.cleared_tree).ok_or(ChangeError::NoSuchTree(spec.cleared_tree))?;
    let protected = ball_with(a, &decomp, &spec.kernel, spec.radius);
    if tree.vertices.iter().any(|v| protected.contains(v)) {
        return Err(ChangeError::ClearedTreeInBall(spec.cleared_tree));
    }
    let changes = change_sets(a);
    let cleared = &tree.vertices;
    let modified_out: BTreeSet<NodeId> = {
        let mut m = modified_nodes_with(a, &changes, &decomp);
        m.retain(|n| !cleared.contains(n));
        m
    };
    // unary deltas lose every element of the cleared tree
    let presence: BTreeSet<NodeId> =
        changes.presence.iter().filter(|n| !cleared.contains(*n)).cloned().collect();
    let labels: BTreeMap<String, BTreeSet<NodeId>> = changes
        .labels
        .iter()
        .map(|(l, s)| {
            (l.clone(), s.iter().filter(|n| !cleared.contains(*n)).cloned().collect())
        })
        .collect();
    // additions mentioning the cleared tree vanish; deletions survive when
    // they avoid the tree or touch a modified or protected node
    let plus: BTreeSet<LinkPair> = changes
        .plus_links
        .iter()
        .filter(|p| !p.mentions_any(cleared))
        .cloned()
        .collect();
    let minus: BTreeSet<LinkPair> = changes
        .minus_links
        .iter()
        .filter(|p| {
            !p.mentions_any(cleared)
                || p.mentions_any(&modified_out)
                || p.mentions_any(&protected)
        })
        .cloned()
        .collect();
    Ok(rebuild_with_changes(a, None, &presence, &labels, &plus, &minus, spec.prune, cleared))
}

/// Rebuilds a transition from its precondition and explicit change sets,
/// optionally pruning interpretation-free nodes of `prunable`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rebuild_with_changes(
    a: &Transition,
    drop: Option<&BTreeSet<NodeId>>,
    presence: &BTreeSet<NodeId>,
    labels: &BTreeMap<String, BTreeSet<NodeId>>,
    plus: &BTreeSet<LinkPair>,
    minus: &BTreeSet<LinkPair>,
    prune: bool,
    prunable: &BTreeSet<NodeId>,
) -> Transition {
    let sig = a.signature().clone();
    let mut kept: BTreeSet<NodeId> = a.nodes().clone();
    if let Some(d) = drop {
        kept.retain(|n| !d.contains(n));
    }
    let post_present: BTreeSet<NodeId> = a
        .present(Stage::Pre)
        .symmetric_difference(presence)
        .filter(|n| kept.contains(*n))
        .cloned()
        .collect();
    let mut post_labels: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
    for l in &sig.labels {
        let delta = labels.get(l).cloned().unwrap_or_default();
        post_labels.insert(
            l.clone(),
            a.labelled(Stage::Pre, l)
                .symmetric_difference(&delta)
                .filter(|n| kept.contains(*n))
                .cloned()
                .collect(),
        );
    }
    let post_links: BTreeSet<LinkPair> = a
        .links(Stage::Pre)
        .iter()
        .filter(|p| !minus.contains(*p))
        .chain(plus.iter())
        .filter(|p| p.within(&kept))
        .cloned()
        .collect();
    if prune {
        let mut removable: BTreeSet<NodeId> = prunable
            .iter()
            .filter(|n| {
                kept.contains(*n)
                    && !a.present(Stage::Pre).contains(*n)
                    && !post_present.contains(*n)
                    && !a.links(Stage::Pre).iter().any(|p| p.mentions(n))
                    && !post_links.iter().any(|p| p.mentions(n))
                    && !sig.labels.iter().any(|l| {
                        a.labelled(Stage::Pre, l).contains(*n)
                            || post_labels[l].contains(*n)
                    })
            })
            .cloned()
            .collect();
        // a removable node adjacent to a kept node must stay
        loop {
            let blocked: Vec<NodeId> = removable
                .iter()
                .filter(|n| {
                    a.child_edges().iter().any(|((_, p), c)| {
                        (p == *n && !removable.contains(c) && kept.contains(c))
                            || (c == *n && !removable.contains(p) && kept.contains(p))
                    })
                })
                .cloned()
                .collect();
            if blocked.is_empty() {
                break;
            }
            for n in blocked {
                removable.remove(&n);
            }
        }
        kept.retain(|n| !removable.contains(n));
    }
    let post_present = post_present.into_iter().filter(|n| kept.contains(n)).collect();
    let post_labels = post_labels
        .into_iter()
        .map(|(l, s)| {
            (l, s.into_iter().filter(|n: &NodeId| kept.contains(n)).collect::<BTreeSet<_>>())
        })
        .collect();
    let post_links = post_links
        .into_iter()
        .filter(|p| p.within(&kept))
        .collect();
    a.restrict_and_replace(&kept, post_present, post_labels, post_links)
}

/// All subs over every eligible cleared tree and both prune flags,
/// deduplicated up to equality of interpretations.
pub fn enumerate_subs(
    a: &Transition,
    kernel: &BTreeSet<NodeId>,
    radius: usize,
) -> Result<Vec<(SubSpec, Transition)>, ChangeError> {
    let decomp = a.decompose()?;
    let protected = ball_with(a, &decomp, kernel, radius);
    let mut out: Vec<(SubSpec, Transition)> = Vec::new();
    for (ti, tree) in decomp.trees.iter().enumerate() {
        if tree.vertices.iter().any(|v| protected.contains(v)) {
            continue;
        }
        for prune in [false, true] {
            let spec = SubSpec {
                kernel: kernel.clone(),
                radius,
                cleared_tree: ti,
                prune,
            };
            let sub = make_sub(a, &spec)?;
            if !out.iter().any(|(_, existing)| existing == &sub) {
                out.push((spec, sub));
            }
        }
    }
    Ok(out)
}
