//! Explicit finite transition structures over forests of linked bounded trees.
//!
//! A [`Transition`] packages a precondition and a postcondition over one node
//! set: presence sets, label sets and link pairings exist in a pre and a post
//! version, while names and tree edges are static. Link interpretations are
//! stored as unordered pairs, so symmetry is intrinsic and a link counts as a
//! single atomic change. The convention `f(x) = x` means "no child via `f`";
//! only proper edges are stored. `parent` is always derived from the edges,
//! never stored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{FlbSignature, Stage};

pub type NodeId = String;

/// An unordered node pair; the interpretation of one link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkPair(NodeId, NodeId);

impl LinkPair {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            LinkPair(a, b)
        } else {
            LinkPair(b, a)
        }
    }

    pub fn endpoints(&self) -> (&NodeId, &NodeId) {
        (&self.0, &self.1)
    }

    pub fn mentions(&self, n: &str) -> bool {
        self.0 == n || self.1 == n
    }

    pub fn mentions_any(&self, set: &BTreeSet<NodeId>) -> bool {
        set.contains(&self.0) || set.contains(&self.1)
    }

    /// True iff both endpoints are in `set`.
    pub fn within(&self, set: &BTreeSet<NodeId>) -> bool {
        set.contains(&self.0) && set.contains(&self.1)
    }

    /// True iff the pair relates `a` and `b` (in either order).
    pub fn is(&self, a: &str, b: &str) -> bool {
        (self.0 == a && self.1 == b) || (self.0 == b && self.1 == a)
    }
}

impl fmt::Display for LinkPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.0, self.1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("undeclared symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("child edge `{f}({parent})` may not point to its own source")]
    SelfChildEdge { f: String, parent: String },
    #[error("duplicate child edge for `{f}({parent})`")]
    DuplicateChildEdge { f: String, parent: String },
    #[error("structure is not a valid bounded forest: {0:?}")]
    InvalidStructure(Vec<Violation>),
    #[error("transitions use different signatures")]
    SignatureMismatch,
}

/// One violation of the structural conditions, with the offending nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A node with child edges from more than one distinct parent.
    MultipleParents { child: NodeId, parents: Vec<NodeId> },
    /// A node whose parent chain never reaches a root.
    Cycle { node: NodeId },
    /// A node deeper than the height bound.
    HeightExceeded { node: NodeId, depth: usize, bound: usize },
    /// A node occurring in more than one link pair of one stage.
    LinkFunctionality { stage: Stage, node: NodeId, pairs: Vec<LinkPair> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MultipleParents { child, parents } => {
                write!(f, "node `{child}` has multiple parents {parents:?}")
            }
            Violation::Cycle { node } => write!(f, "node `{node}` lies on a child-edge cycle"),
            Violation::HeightExceeded { node, depth, bound } => {
                write!(f, "node `{node}` is at depth {depth}, above the height bound {bound}")
            }
            Violation::LinkFunctionality { stage, node, pairs } => write!(
                f,
                "node `{node}` occurs in several {} link pairs: {pairs:?}",
                match stage {
                    Stage::Pre => "precondition",
                    Stage::Post => "postcondition",
                }
            ),
        }
    }
}

/// A finite transition structure. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    sig: Arc<FlbSignature>,
    nodes: BTreeSet<NodeId>,
    /// `(f, x) -> y` with `y != x`; an absent entry means `f(x) = x`.
    child_edges: BTreeMap<(String, NodeId), NodeId>,
    pre_present: BTreeSet<NodeId>,
    post_present: BTreeSet<NodeId>,
    pre_labels: BTreeMap<String, BTreeSet<NodeId>>,
    post_labels: BTreeMap<String, BTreeSet<NodeId>>,
    pre_links: BTreeSet<LinkPair>,
    post_links: BTreeSet<LinkPair>,
    names: BTreeMap<String, BTreeSet<NodeId>>,
    /// Derived: child -> parent, for proper edges. On structures violating
    /// the forest condition this keeps the least parent.
    parents: BTreeMap<NodeId, NodeId>,
}

/// All the raw interpretation parts of a transition, used for construction.
#[derive(Debug, Clone, Default)]
pub struct TransitionParts {
    pub nodes: BTreeSet<NodeId>,
    pub child_edges: BTreeMap<(String, NodeId), NodeId>,
    pub pre_present: BTreeSet<NodeId>,
    pub post_present: BTreeSet<NodeId>,
    pub pre_labels: BTreeMap<String, BTreeSet<NodeId>>,
    pub post_labels: BTreeMap<String, BTreeSet<NodeId>>,
    pub pre_links: BTreeSet<LinkPair>,
    pub post_links: BTreeSet<LinkPair>,
    pub names: BTreeMap<String, BTreeSet<NodeId>>,
}

impl Transition {
    /// Builds a transition, checking referential integrity: every mentioned
    /// node exists, every symbol is declared, child edges are proper and
    /// function-like. Structural validity (forest, height, functionality) is
    /// deliberately not enforced here; [`Transition::validate_flb`] reports it.
    pub fn new(sig: Arc<FlbSignature>, parts: TransitionParts) -> Result<Self, ModelError> {
        let TransitionParts {
            nodes,
            child_edges,
            pre_present,
            post_present,
            mut pre_labels,
            mut post_labels,
            pre_links,
            post_links,
            mut names,
        } = parts;
        let check_node = |n: &NodeId| -> Result<(), ModelError> {
            if nodes.contains(n) {
                Ok(())
            } else {
                Err(ModelError::UnknownNode(n.clone()))
            }
        };
        for ((f, parent), child) in &child_edges {
            if !sig.is_child_fn(f) {
                return Err(ModelError::UndeclaredSymbol(f.clone()));
            }
            check_node(parent)?;
            check_node(child)?;
            if parent == child {
                return Err(ModelError::SelfChildEdge { f: f.clone(), parent: parent.clone() });
            }
        }
        for n in pre_present.iter().chain(&post_present) {
            check_node(n)?;
        }
        for (label, set) in pre_labels.iter().chain(&post_labels) {
            if !sig.is_label(label) {
                return Err(ModelError::UndeclaredSymbol(label.clone()));
            }
            for n in set {
                check_node(n)?;
            }
        }
        for (name, set) in &names {
            if !sig.is_name(name) {
                return Err(ModelError::UndeclaredSymbol(name.clone()));
            }
            for n in set {
                check_node(n)?;
            }
        }
        for pair in pre_links.iter().chain(&post_links) {
            check_node(&pair.0)?;
            check_node(&pair.1)?;
        }
        for l in &sig.labels {
            pre_labels.entry(l.clone()).or_default();
            post_labels.entry(l.clone()).or_default();
        }
        for n in &sig.names {
            names.entry(n.clone()).or_default();
        }
        let mut parents = BTreeMap::new();
        for ((_, parent), child) in &child_edges {
            parents
                .entry(child.clone())
                .and_modify(|p: &mut NodeId| {
                    if parent < p {
                        *p = parent.clone();
                    }
                })
                .or_insert_with(|| parent.clone());
        }
        Ok(Transition {
            sig,
            nodes,
            child_edges,
            pre_present,
            post_present,
            pre_labels,
            post_labels,
            pre_links,
            post_links,
            names,
            parents,
        })
    }

    pub fn signature(&self) -> &Arc<FlbSignature> {
        &self.sig
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn child_edges(&self) -> &BTreeMap<(String, NodeId), NodeId> {
        &self.child_edges
    }

    pub fn present(&self, stage: Stage) -> &BTreeSet<NodeId> {
        match stage {
            Stage::Pre => &self.pre_present,
            Stage::Post => &self.post_present,
        }
    }

    pub fn labelled(&self, stage: Stage, label: &str) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        let map = match stage {
            Stage::Pre => &self.pre_labels,
            Stage::Post => &self.post_labels,
        };
        map.get(label).unwrap_or(&EMPTY)
    }

    pub fn links(&self, stage: Stage) -> &BTreeSet<LinkPair> {
        match stage {
            Stage::Pre => &self.pre_links,
            Stage::Post => &self.post_links,
        }
    }

    pub fn named(&self, name: &str) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.names.get(name).unwrap_or(&EMPTY)
    }

    pub fn names(&self) -> &BTreeMap<String, BTreeSet<NodeId>> {
        &self.names
    }

    /// The derived parent: the unique node with a child edge into `n`, or `n`
    /// itself for roots.
    pub fn parent_of(&self, n: &str) -> NodeId {
        self.parents.get(n).cloned().unwrap_or_else(|| n.to_string())
    }

    /// Child via `f`, with the identity default for "no child".
    pub fn child_of(&self, f: &str, n: &str) -> NodeId {
        self.child_edges
            .get(&(f.to_string(), n.to_string()))
            .cloned()
            .unwrap_or_else(|| n.to_string())
    }

    pub fn has_link(&self, stage: Stage, a: &str, b: &str) -> bool {
        self.links(stage).contains(&LinkPair::new(a, b))
    }

    /// Checks the structural conditions: forest shape, the height bound and
    /// link functionality on both stages. An empty result means valid.
    pub fn validate_flb(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        // distinct parents per child
        let mut parent_sets: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
        for ((_, parent), child) in &self.child_edges {
            parent_sets.entry(child).or_default().insert(parent);
        }
        for (child, parents) in &parent_sets {
            if parents.len() > 1 {
                out.push(Violation::MultipleParents {
                    child: (*child).clone(),
                    parents: parents.iter().map(|p| (*p).clone()).collect(),
                });
            }
        }
        // cycles and depth, walking the derived parent chain
        for node in &self.nodes {
            let mut cur = node.clone();
            let mut depth = 0usize;
            let mut rooted = false;
            for _ in 0..=self.nodes.len() {
                match self.parents.get(&cur) {
                    None => {
                        rooted = true;
                        break;
                    }
                    Some(p) => {
                        depth += 1;
                        cur = p.clone();
                    }
                }
            }
            if !rooted {
                out.push(Violation::Cycle { node: node.clone() });
            } else if depth > self.sig.height {
                out.push(Violation::HeightExceeded {
                    node: node.clone(),
                    depth,
                    bound: self.sig.height,
                });
            }
        }
        // link functionality
        for stage in [Stage::Pre, Stage::Post] {
            let mut occurs: BTreeMap<&NodeId, Vec<&LinkPair>> = BTreeMap::new();
            for pair in self.links(stage) {
                occurs.entry(&pair.0).or_default().push(pair);
                if pair.1 != pair.0 {
                    occurs.entry(&pair.1).or_default().push(pair);
                }
            }
            for (node, pairs) in occurs {
                if pairs.len() > 1 {
                    out.push(Violation::LinkFunctionality {
                        stage,
                        node: node.clone(),
                        pairs: pairs.into_iter().cloned().collect(),
                    });
                }
            }
        }
        out
    }

    /// True iff every node is present in the pre- or the postcondition.
    pub fn is_supported(&self) -> bool {
        self.nodes.iter().all(|n| self.pre_present.contains(n) || self.post_present.contains(n))
    }

    /// Splits the forest into its trees. Requires a structurally valid input.
    pub fn decompose(&self) -> Result<TreeDecomposition, ModelError> {
        let violations = self.validate_flb();
        if !violations.is_empty() {
            return Err(ModelError::InvalidStructure(violations));
        }
        let mut tree_of = BTreeMap::new();
        let mut trees: Vec<Tree> = Vec::new();
        let mut root_index: BTreeMap<NodeId, usize> = BTreeMap::new();
        for node in &self.nodes {
            let mut root = node.clone();
            while let Some(p) = self.parents.get(&root) {
                root = p.clone();
            }
            let idx = *root_index.entry(root.clone()).or_insert_with(|| {
                trees.push(Tree { root: root.clone(), vertices: BTreeSet::new() });
                trees.len() - 1
            });
            trees[idx].vertices.insert(node.clone());
            tree_of.insert(node.clone(), idx);
        }
        Ok(TreeDecomposition { trees, tree_of })
    }

    /// The transition with pre- and postcondition swapped.
    pub fn mirror(&self) -> Transition {
        let mut t = self.clone();
        std::mem::swap(&mut t.pre_present, &mut t.post_present);
        std::mem::swap(&mut t.pre_labels, &mut t.post_labels);
        std::mem::swap(&mut t.pre_links, &mut t.post_links);
        t
    }

    /// Rebuilds the transition keeping only `kept` nodes, with new dynamic
    /// interpretations. The caller is responsible for edge closure of the
    /// dropped set; dangling edges are dropped silently here.
    pub(crate) fn restrict_and_replace(
        &self,
        kept: &BTreeSet<NodeId>,
        post_present: BTreeSet<NodeId>,
        post_labels: BTreeMap<String, BTreeSet<NodeId>>,
        post_links: BTreeSet<LinkPair>,
    ) -> Transition {
        let restrict = |s: &BTreeSet<NodeId>| -> BTreeSet<NodeId> {
            s.intersection(kept).cloned().collect()
        };
        let nodes = kept.clone();
        let child_edges = self
            .child_edges
            .iter()
            .filter(|((_, p), c)| kept.contains(p) && kept.contains(*c))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let pre_labels =
            self.pre_labels.iter().map(|(l, s)| (l.clone(), restrict(s))).collect();
        let names = self.names.iter().map(|(l, s)| (l.clone(), restrict(s))).collect();
        let parts = TransitionParts {
            nodes,
            child_edges,
            pre_present: restrict(&self.pre_present),
            post_present,
            pre_labels,
            post_labels,
            pre_links: self
                .pre_links
                .iter()
                .filter(|p| kept.contains(&p.0) && kept.contains(&p.1))
                .cloned()
                .collect(),
            post_links,
            names,
        };
        Transition::new(self.sig.clone(), parts).expect("restriction preserves integrity")
    }

    /// A renaming-invariant key. Trees are serialised in a canonical walk
    /// order and sorted; trees with identical local content are permuted to
    /// minimise the cross-tree link serialisation. `marks` lets callers fold
    /// extra node markers (such as an assignment) into the key. Requires a
    /// valid structure.
    pub fn canonical_key(&self, marks: &[(&str, &NodeId)]) -> Result<String, ModelError> {
        let decomp = self.decompose()?;
        // walk each tree in child-function declaration order
        let mut tree_orders: Vec<Vec<NodeId>> = Vec::new();
        for tree in &decomp.trees {
            let mut order = Vec::new();
            self.walk(&tree.root, &mut order);
            tree_orders.push(order);
        }
        let local: Vec<String> = tree_orders.iter().map(|o| self.local_content(o, marks)).collect();
        // sort trees by local content, then search permutations within tie
        // groups for the least full serialisation
        let mut idx: Vec<usize> = (0..tree_orders.len()).collect();
        idx.sort_by(|&a, &b| local[a].cmp(&local[b]));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &i in &idx {
            match groups.last_mut() {
                Some(g) if local[g[0]] == local[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let mut best: Option<String> = None;
        permute_groups(&groups, &mut Vec::new(), &mut |perm| {
            let key = self.full_key(perm, &tree_orders, &local);
            if best.as_ref().map_or(true, |b| key < *b) {
                best = Some(key);
            }
        });
        Ok(best.unwrap_or_default())
    }

    fn walk(&self, node: &NodeId, out: &mut Vec<NodeId>) {
        out.push(node.clone());
        for f in &self.sig.child_fns {
            let c = self.child_of(f, node);
            if &c != node {
                self.walk(&c, out);
            }
        }
    }

    // Per-tree serialisation without cross-tree links: shape, facts, marks.
    fn local_content(&self, order: &[NodeId], marks: &[(&str, &NodeId)]) -> String {
        use std::fmt::Write;
        let pos: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut s = String::new();
        for (i, n) in order.iter().enumerate() {
            let _ = write!(s, "[{i}");
            for f in &self.sig.child_fns {
                let c = self.child_of(f, n);
                if &c != n {
                    let _ = write!(s, " {f}>{}", pos[&c]);
                }
            }
            if self.pre_present.contains(n) {
                s.push_str(" p");
            }
            if self.post_present.contains(n) {
                s.push_str(" q");
            }
            for l in &self.sig.labels {
                if self.labelled(Stage::Pre, l).contains(n) {
                    let _ = write!(s, " {l}");
                }
                if self.labelled(Stage::Post, l).contains(n) {
                    let _ = write!(s, " {l}*");
                }
            }
            for nm in &self.sig.names {
                if self.named(nm).contains(n) {
                    let _ = write!(s, " {nm}");
                }
            }
            for (var, m) in marks {
                if *m == n {
                    let _ = write!(s, " @{var}");
                }
            }
            s.push(']');
        }
        s
    }

    fn full_key(&self, perm: &[usize], tree_orders: &[Vec<NodeId>], local: &[String]) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let mut node_pos: BTreeMap<&NodeId, (usize, usize)> = BTreeMap::new();
        for (ti, &orig) in perm.iter().enumerate() {
            for (ni, n) in tree_orders[orig].iter().enumerate() {
                node_pos.insert(n, (ti, ni));
            }
        }
        for &orig in perm {
            let _ = write!(s, "T{};", local[orig]);
        }
        for (tag, links) in [("L", &self.pre_links), ("L*", &self.post_links)] {
            let mut enc: Vec<((usize, usize), (usize, usize))> = links
                .iter()
                .map(|p| {
                    let a = node_pos[&p.0];
                    let b = node_pos[&p.1];
                    (a.min(b), a.max(b))
                })
                .collect();
            enc.sort();
            for (a, b) in enc {
                let _ = write!(s, "{tag}{}.{}-{}.{};", a.0, a.1, b.0, b.1);
            }
        }
        s
    }
}

fn permute_groups(groups: &[Vec<usize>], acc: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    match groups.split_first() {
        None => f(acc),
        Some((g, rest)) => {
            let mut perm = g.clone();
            permutations(&mut perm, 0, &mut |p| {
                let len = acc.len();
                acc.extend_from_slice(p);
                permute_groups(rest, acc, f);
                acc.truncate(len);
            });
        }
    }
}

fn permutations(items: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, f);
        items.swap(k, i);
    }
}

/// The tree partition of a valid structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub trees: Vec<Tree>,
    pub tree_of: BTreeMap<NodeId, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub root: NodeId,
    pub vertices: BTreeSet<NodeId>,
}
