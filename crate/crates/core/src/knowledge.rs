//! Knowledge files: one signature, named models, named formula definitions
//! and named derivations, in a line-oriented text format.
//!
//! ```text
//! height 1
//! children f1 f2
//! labels Phos Active
//! names Raf1 Src Tyr
//! end
//!
//! model T
//!   nodes r1 m1
//!   edge f1 r1 m1
//!   pre P r1 m1
//!   post P r1 m1
//!   pre label Phos m1
//!   pre link r1 m1
//!   name Raf1 r1
//! end
//!
//! def Observation1(x) := forall y. Link*(x,y) -> !Active*(parent(x))
//!
//! derivation D1
//!   (dynamic "Link*(x,y)")
//! end
//! ```
//!
//! Unlisted facts are false and unlisted child-function values are identity.
//! Repeated fact lines accumulate. A node occurring in two precondition link
//! pairs is rejected at load.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::deduction::{parse_derivation, Derivation};
use crate::model::{LinkPair, Transition, TransitionParts};
use crate::syntax::parser::{
    parse_formula_with_defs, parse_signature, FormulaDef, ParseError,
};
use crate::syntax::{FlbSignature, Formula, Stage};

#[derive(Debug, Clone)]
pub struct KnowledgeFile {
    pub sig: Arc<FlbSignature>,
    pub models: Vec<(String, Transition)>,
    pub defs: BTreeMap<String, FormulaDef>,
    pub derivations: Vec<(String, Derivation)>,
}

impl KnowledgeFile {
    pub fn model(&self, name: &str) -> Option<&Transition> {
        self.models.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn derivation(&self, name: &str) -> Option<&Derivation> {
        self.derivations.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// Parses a formula against this file's signature and definitions.
    pub fn parse_formula(&self, text: &str) -> Result<Formula, ParseError> {
        parse_formula_with_defs(text, &self.sig, &self.defs)
    }
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, raw)| {
                let no_comment = match raw.find('#') {
                    Some(idx) => &raw[..idx],
                    None => raw,
                };
                (i + 1, no_comment.trim())
            })
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Lines { lines, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let l = self.peek();
        self.pos += 1;
        l
    }
}

/// Loads a knowledge file. Diagnostics carry source line numbers.
pub fn load_knowledge(text: &str) -> Result<KnowledgeFile, ParseError> {
    let mut lines = Lines::new(text);
    // the signature block comes first: four lines terminated by `end`
    let mut sig_text = String::new();
    let mut sig_last_line = 0;
    for _ in 0..4 {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| ParseError::new(sig_last_line, "missing signature block"))?;
        sig_last_line = ln;
        sig_text.push_str(l);
        sig_text.push('\n');
    }
    let sig = Arc::new(parse_signature(&sig_text).map_err(|mut e| {
        e.line = sig_last_line.saturating_sub(4) + e.line;
        e
    })?);
    match lines.next() {
        Some((_, "end")) => {}
        Some((ln, other)) => {
            return Err(ParseError::new(ln, format!("expected `end`, found `{other}`")))
        }
        None => return Err(ParseError::new(sig_last_line, "expected `end` after signature")),
    }

    let mut models: Vec<(String, Transition)> = Vec::new();
    let mut defs: BTreeMap<String, FormulaDef> = BTreeMap::new();
    let mut derivations: Vec<(String, Derivation)> = Vec::new();

    while let Some((ln, line)) = lines.next() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "model" => {
                if words.len() != 2 {
                    return Err(ParseError::new(ln, "expected `model NAME`"));
                }
                let name = words[1].to_string();
                if models.iter().any(|(n, _)| n == &name) {
                    return Err(ParseError::new(ln, format!("duplicate model name `{name}`")));
                }
                let t = parse_model_block(&mut lines, &sig)?;
                models.push((name, t));
            }
            "def" => {
                let rest = line.strip_prefix("def").unwrap().trim();
                let (name, def) = parse_def(rest, ln, &sig, &defs)?;
                if defs.contains_key(&name) {
                    return Err(ParseError::new(ln, format!("duplicate def name `{name}`")));
                }
                defs.insert(name, def);
            }
            "derivation" => {
                if words.len() != 2 {
                    return Err(ParseError::new(ln, "expected `derivation NAME`"));
                }
                let name = words[1].to_string();
                if derivations.iter().any(|(n, _)| n == &name) {
                    return Err(ParseError::new(
                        ln,
                        format!("duplicate derivation name `{name}`"),
                    ));
                }
                let mut body = String::new();
                loop {
                    match lines.next() {
                        Some((_, "end")) => break,
                        Some((_, l)) => {
                            body.push_str(l);
                            body.push('\n');
                        }
                        None => {
                            return Err(ParseError::new(ln, "unterminated derivation block"))
                        }
                    }
                }
                let dv = parse_derivation(&body, &sig, &defs).map_err(|mut e| {
                    e.line += ln;
                    e
                })?;
                derivations.push((name, dv));
            }
            other => {
                return Err(ParseError::new(ln, format!("unexpected directive `{other}`")))
            }
        }
    }
    Ok(KnowledgeFile { sig, models, defs, derivations })
}

fn parse_def(
    rest: &str,
    ln: usize,
    sig: &Arc<FlbSignature>,
    defs: &BTreeMap<String, FormulaDef>,
) -> Result<(String, FormulaDef), ParseError> {
    let (head, body) = rest
        .split_once(":=")
        .ok_or_else(|| ParseError::new(ln, "expected `def NAME(vars) := formula`"))?;
    let head = head.trim();
    let open = head
        .find('(')
        .ok_or_else(|| ParseError::new(ln, "expected a parameter list after the def name"))?;
    if !head.ends_with(')') {
        return Err(ParseError::new(ln, "unterminated parameter list"));
    }
    let name = head[..open].trim().to_string();
    if name.is_empty() {
        return Err(ParseError::new(ln, "missing def name"));
    }
    let params: Vec<String> = head[open + 1..head.len() - 1]
        .split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    if params.is_empty() {
        return Err(ParseError::new(ln, "defs take at least one parameter"));
    }
    let formula = parse_formula_with_defs(body.trim(), sig, defs).map_err(|mut e| {
        e.line = ln;
        e
    })?;
    Ok((name, FormulaDef { params, body: formula }))
}

fn parse_model_block(
    lines: &mut Lines<'_>,
    sig: &Arc<FlbSignature>,
) -> Result<Transition, ParseError> {
    let mut parts = TransitionParts::default();
    let mut last_line = 0;
    loop {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| ParseError::new(last_line, "unterminated model block"))?;
        last_line = ln;
        if line == "end" {
            break;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let check_node = |n: &str| -> Result<String, ParseError> {
            if parts.nodes.contains(n) {
                Ok(n.to_string())
            } else {
                Err(ParseError::new(ln, format!("unknown node `{n}`")))
            }
        };
        match words[0] {
            "nodes" => {
                for n in &words[1..] {
                    if !parts.nodes.insert(n.to_string()) {
                        return Err(ParseError::new(ln, format!("duplicate node `{n}`")));
                    }
                }
            }
            "edge" => {
                if words.len() != 4 {
                    return Err(ParseError::new(ln, "expected `edge FUNC PARENT CHILD`"));
                }
                let (f, p, c) = (words[1], check_node(words[2])?, check_node(words[3])?);
                if !sig.is_child_fn(f) {
                    return Err(ParseError::new(ln, format!("unknown child function `{f}`")));
                }
                if parts.child_edges.insert((f.to_string(), p), c).is_some() {
                    return Err(ParseError::new(ln, "duplicate child edge"));
                }
            }
            stage @ ("pre" | "post") => {
                let stage = if stage == "pre" { Stage::Pre } else { Stage::Post };
                match words.get(1) {
                    Some(&"P") => {
                        for n in &words[2..] {
                            let n = check_node(n)?;
                            match stage {
                                Stage::Pre => parts.pre_present.insert(n),
                                Stage::Post => parts.post_present.insert(n),
                            };
                        }
                    }
                    Some(&"label") => {
                        let label = words
                            .get(2)
                            .ok_or_else(|| ParseError::new(ln, "expected a label name"))?;
                        if !sig.is_label(label) {
                            return Err(ParseError::new(ln, format!("unknown label `{label}`")));
                        }
                        let map = match stage {
                            Stage::Pre => &mut parts.pre_labels,
                            Stage::Post => &mut parts.post_labels,
                        };
                        for n in &words[3..] {
                            let n = check_node(n)?;
                            map.entry(label.to_string()).or_default().insert(n);
                        }
                    }
                    Some(&"link") => {
                        if words.len() != 4 {
                            return Err(ParseError::new(ln, "expected `pre link A B`"));
                        }
                        let a = check_node(words[2])?;
                        let b = check_node(words[3])?;
                        let set = match stage {
                            Stage::Pre => &mut parts.pre_links,
                            Stage::Post => &mut parts.post_links,
                        };
                        set.insert(LinkPair::new(a, b));
                    }
                    _ => {
                        return Err(ParseError::new(
                            ln,
                            "expected `P`, `label` or `link` after the stage",
                        ))
                    }
                }
            }
            "name" => {
                let name = words
                    .get(1)
                    .ok_or_else(|| ParseError::new(ln, "expected a name symbol"))?;
                if !sig.is_name(name) {
                    return Err(ParseError::new(ln, format!("unknown name `{name}`")));
                }
                for n in &words[2..] {
                    let n = check_node(n)?;
                    parts.names.entry(name.to_string()).or_default().insert(n);
                }
            }
            other => {
                return Err(ParseError::new(ln, format!("unexpected model line `{other}`")))
            }
        }
    }
    // precondition links must already be functional at load
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    for pair in &parts.pre_links {
        let (a, b) = pair.endpoints();
        for n in [a, b] {
            if !seen.insert(n) {
                return Err(ParseError::new(
                    last_line,
                    format!("node `{n}` occurs in two precondition links"),
                ));
            }
        }
        if a == b {
            seen.remove(b);
        }
    }
    Transition::new(sig.clone(), parts)
        .map_err(|e| ParseError::new(last_line, format!("invalid model: {e}")))
}

/// Serialises a transition as a `model` block in canonical node order;
/// loading the result reproduces every interpretation.
pub fn save_model(name: &str, t: &Transition) -> String {
    let sig = t.signature();
    let mut out = String::new();
    let _ = writeln!(out, "model {name}");
    let nodes: Vec<&String> = t.nodes().iter().collect();
    if !nodes.is_empty() {
        let _ = writeln!(
            out,
            "  nodes {}",
            nodes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
        );
    }
    for ((f, p), c) in t.child_edges() {
        let _ = writeln!(out, "  edge {f} {p} {c}");
    }
    for (stage, kw) in [(Stage::Pre, "pre"), (Stage::Post, "post")] {
        let present = t.present(stage);
        if !present.is_empty() {
            let _ = writeln!(
                out,
                "  {kw} P {}",
                present.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
            );
        }
    }
    for (stage, kw) in [(Stage::Pre, "pre"), (Stage::Post, "post")] {
        for label in &sig.labels {
            let set = t.labelled(stage, label);
            if !set.is_empty() {
                let _ = writeln!(
                    out,
                    "  {kw} label {label} {}",
                    set.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
                );
            }
        }
    }
    for (stage, kw) in [(Stage::Pre, "pre"), (Stage::Post, "post")] {
        for pair in t.links(stage) {
            let (a, b) = pair.endpoints();
            let _ = writeln!(out, "  {kw} link {a} {b}");
        }
    }
    for name in &sig.names {
        let set = t.named(name);
        if !set.is_empty() {
            let _ = writeln!(
                out,
                "  name {name} {}",
                set.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
            );
        }
    }
    out.push_str("end\n");
    out
}

/// The shipped example file reproducing the worked two-transition scenario.
pub const FIG1_KF: &str = include_str!("../fixtures/fig1.kf");
