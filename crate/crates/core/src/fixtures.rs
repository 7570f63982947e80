//! Programmatic copies of the shipped example transitions.
//!
//! Two transitions over the same precondition: a region node `m1` of a
//! `Raf1`-named tree gets linked to a node of an `Src`-carrying tree while the
//! `Raf1` root loses `Active`. The second transition additionally clears
//! `Phos` on `m1` and creates a fresh node `m3`, which makes it strictly
//! larger in the change order. The `fixtures/fig1.kf` knowledge file encodes
//! the same data textually.

use std::sync::Arc;

use crate::model::{LinkPair, Transition, TransitionParts};
use crate::syntax::parser::parse_signature;
use crate::syntax::FlbSignature;

pub fn fig1_signature() -> Arc<FlbSignature> {
    Arc::new(
        parse_signature("height 1\nchildren f1 f2\nlabels Phos Active\nnames Raf1 Src Tyr")
            .expect("fixture signature parses"),
    )
}

fn base_parts() -> TransitionParts {
    let mut parts = TransitionParts::default();
    for n in ["r1", "m1", "r2", "m2"] {
        parts.nodes.insert(n.to_string());
        parts.pre_present.insert(n.to_string());
        parts.post_present.insert(n.to_string());
    }
    parts.child_edges.insert(("f1".into(), "r1".into()), "m1".into());
    parts.child_edges.insert(("f1".into(), "r2".into()), "m2".into());
    parts.pre_labels.entry("Active".into()).or_default().insert("r1".into());
    parts.pre_labels.entry("Phos".into()).or_default().insert("m1".into());
    parts.names.entry("Raf1".into()).or_default().insert("r1".into());
    parts.names.entry("Tyr".into()).or_default().insert("m1".into());
    parts.names.entry("Src".into()).or_default().insert("m2".into());
    parts.post_links.insert(LinkPair::new("m1", "m2"));
    parts
}

/// The change-minimal transition: `r1` loses `Active`, a link `{m1,m2}` is
/// created, `Phos` persists on `m1`.
pub fn fig1a() -> Transition {
    let mut parts = base_parts();
    parts.post_labels.entry("Phos".into()).or_default().insert("m1".into());
    Transition::new(fig1_signature(), parts).expect("fixture is well formed")
}

/// The non-minimal variant: same precondition, but `m1` loses `Phos` and a
/// fresh node `m3` appears only in the postcondition.
pub fn fig1b() -> Transition {
    let mut parts = base_parts();
    parts.nodes.insert("m3".to_string());
    parts.post_present.insert("m3".to_string());
    Transition::new(fig1_signature(), parts).expect("fixture is well formed")
}
