//! Parsers for the textual signature and formula formats.
//!
//! Formula grammar (ASCII), with precedence `!` > `&` > `|` > `->` and
//! quantifier scope extending maximally to the right:
//!
//! ```text
//! formula := 'forall' VAR '.' formula | 'exists' VAR '.' formula
//!          | formula '->' formula | formula '|' formula | formula '&' formula
//!          | '!' formula | '(' formula ')' | 'minimize' '(' formula ')' | atom
//! atom    := IDENT '(' term (',' term)? ')' | term '=' term | 'true' | 'false'
//! term    := VAR | IDENT '(' term ')'
//! ```
//!
//! Postcondition symbols carry a `*` suffix (`Link*`, `P*`, `Phos*`). An
//! identifier applied to arguments is resolved against the ambient signature:
//! predicates and defined formula names form atoms, child functions and
//! `parent` form terms, and anything else is a variable.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{FlbSignature, Formula, FuncSym, SignatureError, Stage, Term, UnarySym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, msg: impl Into<String>) -> Self {
        ParseError { line, msg: msg.into() }
    }
}

/// A named formula definition (`def Obs(x) := ...`), expanded at use sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaDef {
    pub params: Vec<String>,
    pub body: Formula,
}

/// Parses the four-line signature format:
///
/// ```text
/// height 1
/// children f1 f2
/// labels Phos Active
/// names Raf1 Src Tyr
/// ```
pub fn parse_signature(text: &str) -> Result<FlbSignature, ParseError> {
    let mut fields: Vec<(usize, Vec<&str>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        fields.push((i + 1, line.split_whitespace().collect()));
    }
    let expect_key = |idx: usize, key: &str| -> Result<(usize, Vec<String>), ParseError> {
        let (ln, words) = fields
            .get(idx)
            .ok_or_else(|| ParseError::new(text.lines().count(), format!("missing `{key}` line")))?;
        if words[0] != key {
            return Err(ParseError::new(*ln, format!("expected `{key}`, found `{}`", words[0])));
        }
        Ok((*ln, words[1..].iter().map(|s| s.to_string()).collect()))
    };
    let (hln, hvals) = expect_key(0, "height")?;
    if hvals.len() != 1 {
        return Err(ParseError::new(hln, "`height` takes exactly one number"));
    }
    let height: usize = hvals[0]
        .parse()
        .map_err(|_| ParseError::new(hln, format!("invalid height `{}`", hvals[0])))?;
    let (_, children) = expect_key(1, "children")?;
    let (_, labels) = expect_key(2, "labels")?;
    let (nln, names) = expect_key(3, "names")?;
    if fields.len() > 4 {
        return Err(ParseError::new(fields[4].0, "unexpected extra line in signature"));
    }
    for word in children.iter().chain(&labels).chain(&names) {
        if !is_ident(word) {
            return Err(ParseError::new(nln, format!("malformed symbol name `{word}`")));
        }
    }
    FlbSignature::new(height, children, labels, names).map_err(|e| match e {
        SignatureError::DuplicateSymbol(s) => ParseError::new(nln, format!("duplicate symbol `{s}`")),
        SignatureError::ReservedName(s) => {
            ParseError::new(nln, format!("`{s}` collides with a reserved name"))
        }
    })
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses a formula against a signature, with no definition environment.
pub fn parse_formula(text: &str, sig: &FlbSignature) -> Result<Formula, ParseError> {
    parse_formula_with_defs(text, sig, &BTreeMap::new())
}

/// Parses a formula that may mention previously defined formula names.
pub fn parse_formula_with_defs(
    text: &str,
    sig: &FlbSignature,
    defs: &BTreeMap<String, FormulaDef>,
) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut p = FormulaParser { tokens, pos: 0, sig, defs, gensym: 0 };
    let f = p.formula()?;
    p.expect_end()?;
    Ok(f.rename_apart())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Star(String), // identifier with a `*` suffix
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Arrow,
    Or,
    And,
    Not,
}

#[derive(Debug, Clone)]
struct Sp {
    tok: Tok,
    line: usize,
}

fn lex(text: &str) -> Result<Vec<Sp>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push(Sp { tok: Tok::LParen, line });
            }
            ')' => {
                chars.next();
                out.push(Sp { tok: Tok::RParen, line });
            }
            ',' => {
                chars.next();
                out.push(Sp { tok: Tok::Comma, line });
            }
            '.' => {
                chars.next();
                out.push(Sp { tok: Tok::Dot, line });
            }
            '=' => {
                chars.next();
                out.push(Sp { tok: Tok::Eq, line });
            }
            '|' => {
                chars.next();
                out.push(Sp { tok: Tok::Or, line });
            }
            '&' => {
                chars.next();
                out.push(Sp { tok: Tok::And, line });
            }
            '!' => {
                chars.next();
                out.push(Sp { tok: Tok::Not, line });
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'>') {
                    chars.next();
                    out.push(Sp { tok: Tok::Arrow, line });
                } else {
                    return Err(ParseError::new(line, "expected `->`"));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        ident.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if chars.peek() == Some(&'*') {
                    chars.next();
                    out.push(Sp { tok: Tok::Star(ident), line });
                } else {
                    out.push(Sp { tok: Tok::Ident(ident), line });
                }
            }
            other => {
                return Err(ParseError::new(line, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct FormulaParser<'a> {
    tokens: Vec<Sp>,
    pos: usize,
    sig: &'a FlbSignature,
    defs: &'a BTreeMap<String, FormulaDef>,
    gensym: usize,
}

impl<'a> FormulaParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|s| s.line)
            .unwrap_or(1)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let line = self.line();
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            _ => Err(ParseError::new(line, format!("expected {what}"))),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            return Err(ParseError::new(self.line(), "unexpected trailing input"));
        }
        Ok(())
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line(), msg)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        if let Some(Tok::Ident(kw)) = self.peek() {
            if kw == "forall" || kw == "exists" {
                let is_forall = kw == "forall";
                self.bump();
                let line = self.line();
                let var = match self.bump() {
                    Some(Tok::Ident(v)) => v,
                    _ => return Err(ParseError::new(line, "expected a variable after quantifier")),
                };
                if self.symbol_kind(&var).is_some() {
                    return Err(ParseError::new(
                        line,
                        format!("`{var}` is a declared symbol, not a variable"),
                    ));
                }
                self.expect(Tok::Dot, "`.` after quantified variable")?;
                let body = self.formula()?;
                return Ok(if is_forall {
                    Formula::forall(var, body)
                } else {
                    Formula::exists(var, body)
                });
            }
        }
        let lhs = self.or_formula()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or_formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and_formula()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            if self.at_quantifier() {
                let rhs = self.formula()?;
                return Ok(Formula::or(lhs, rhs));
            }
            let rhs = self.and_formula()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary_formula()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            if self.at_quantifier() {
                let rhs = self.formula()?;
                return Ok(Formula::and(lhs, rhs));
            }
            let rhs = self.unary_formula()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn at_quantifier(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(k)) if k == "forall" || k == "exists")
    }

    fn unary_formula(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.bump();
                Ok(Formula::not(self.unary_formula()?))
            }
            Some(Tok::LParen) => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(k)) if k == "minimize" => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `minimize`")?;
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Formula::Minimize(Box::new(f)))
            }
            Some(Tok::Ident(_)) if self.at_quantifier() => self.formula(),
            _ => self.atom(),
        }
    }

    /// Classifies a bare identifier against the signature.
    fn symbol_kind(&self, name: &str) -> Option<SymKind> {
        if name == "P" {
            Some(SymKind::Unary(UnarySym::Presence(Stage::Pre)))
        } else if name == "Link" {
            Some(SymKind::Link(Stage::Pre))
        } else if name == "parent" {
            Some(SymKind::Func(FuncSym::Parent))
        } else if self.sig.is_child_fn(name) {
            Some(SymKind::Func(FuncSym::Child(name.to_string())))
        } else if self.sig.is_label(name) {
            Some(SymKind::Unary(UnarySym::Label(Stage::Pre, name.to_string())))
        } else if self.sig.is_name(name) {
            Some(SymKind::Unary(UnarySym::Name(name.to_string())))
        } else if self.defs.contains_key(name) {
            Some(SymKind::Def(name.to_string()))
        } else {
            None
        }
    }

    fn starred_kind(&self, name: &str) -> Result<SymKind, ParseError> {
        if name == "P" {
            Ok(SymKind::Unary(UnarySym::Presence(Stage::Post)))
        } else if name == "Link" {
            Ok(SymKind::Link(Stage::Post))
        } else if self.sig.is_label(name) {
            Ok(SymKind::Unary(UnarySym::Label(Stage::Post, name.to_string())))
        } else {
            Err(self.err(format!("unknown postcondition symbol `{name}*`")))
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let line = self.line();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) if name == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Some(Tok::Ident(name)) if name == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Some(Tok::Star(name)) => {
                self.bump();
                let kind = self.starred_kind(&name)?;
                self.applied(kind, &format!("{name}*"), line)
            }
            Some(Tok::Ident(name)) => {
                match self.symbol_kind(&name) {
                    Some(SymKind::Unary(sym)) => {
                        self.bump();
                        self.applied(SymKind::Unary(sym), &name, line)
                    }
                    Some(SymKind::Link(stage)) => {
                        self.bump();
                        self.applied(SymKind::Link(stage), &name, line)
                    }
                    Some(SymKind::Def(d)) => {
                        self.bump();
                        self.applied(SymKind::Def(d), &name, line)
                    }
                    // a function symbol or plain variable starts a term
                    Some(SymKind::Func(_)) | None => {
                        let t = self.term()?;
                        self.expect(Tok::Eq, "`=` after a term")?;
                        let u = self.term()?;
                        Ok(Formula::Eq(t, u))
                    }
                }
            }
            _ => Err(ParseError::new(line, "expected an atom")),
        }
    }

    fn applied(&mut self, kind: SymKind, name: &str, line: usize) -> Result<Formula, ParseError> {
        self.expect(Tok::LParen, format!("`(` after `{name}`").as_str())?;
        let mut args = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.bump();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        match kind {
            SymKind::Unary(sym) => {
                if args.len() != 1 {
                    return Err(ParseError::new(
                        line,
                        format!("`{name}` is unary but was given {} arguments", args.len()),
                    ));
                }
                Ok(Formula::Unary(sym, args.pop().unwrap()))
            }
            SymKind::Link(stage) => {
                if args.len() != 2 {
                    return Err(ParseError::new(
                        line,
                        format!("`{name}` is binary but was given {} arguments", args.len()),
                    ));
                }
                let u = args.pop().unwrap();
                let t = args.pop().unwrap();
                Ok(Formula::Link(stage, t, u))
            }
            SymKind::Def(d) => {
                let def = self.defs.get(&d).expect("resolved def");
                if args.len() != def.params.len() {
                    return Err(ParseError::new(
                        line,
                        format!(
                            "`{name}` takes {} arguments but was given {}",
                            def.params.len(),
                            args.len()
                        ),
                    ));
                }
                Ok(self.expand_def(def, &args))
            }
            SymKind::Func(_) => unreachable!("function applications are terms"),
        }
    }

    /// Expands a definition body, renaming its bound variables to fresh names
    /// so the argument terms cannot be captured.
    fn expand_def(&mut self, def: &FormulaDef, args: &[Term]) -> Formula {
        let mut body = def.body.clone();
        let bound: Vec<String> = {
            let mut vs = Vec::new();
            collect_bound(&body, &mut vs);
            vs
        };
        for v in bound {
            self.gensym += 1;
            let fresh = format!("{v}_{}", self.gensym);
            body = rename_bound(&body, &v, &fresh);
        }
        for (param, arg) in def.params.iter().zip(args) {
            body = body.substitute_var(param, arg);
        }
        body
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let line = self.line();
        match self.bump() {
            Some(Tok::Ident(name)) => match self.symbol_kind(&name) {
                Some(SymKind::Func(f)) => {
                    self.expect(Tok::LParen, format!("`(` after `{name}`").as_str())?;
                    let inner = self.term()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Term::App(f, Box::new(inner)))
                }
                None => Ok(Term::Var(name)),
                Some(_) => Err(ParseError::new(
                    line,
                    format!("`{name}` is a predicate, expected a term"),
                )),
            },
            _ => Err(ParseError::new(line, "expected a term")),
        }
    }
}

enum SymKind {
    Unary(UnarySym),
    Link(Stage),
    Func(FuncSym),
    Def(String),
}

fn collect_bound(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            out.push(v.clone());
            collect_bound(g, out);
        }
        Formula::Not(g) | Formula::Minimize(g) => collect_bound(g, out),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
            collect_bound(l, out);
            collect_bound(r, out);
        }
        _ => {}
    }
}

fn rename_bound(f: &Formula, from: &str, to: &str) -> Formula {
    match f {
        Formula::Forall(v, g) if v == from => {
            Formula::forall(to, rename_bound(&g.substitute_var(from, &Term::Var(to.into())), from, to))
        }
        Formula::Exists(v, g) if v == from => {
            Formula::exists(to, rename_bound(&g.substitute_var(from, &Term::Var(to.into())), from, to))
        }
        Formula::Forall(v, g) => Formula::forall(v.clone(), rename_bound(g, from, to)),
        Formula::Exists(v, g) => Formula::exists(v.clone(), rename_bound(g, from, to)),
        Formula::Not(g) => Formula::not(rename_bound(g, from, to)),
        Formula::Minimize(g) => Formula::Minimize(Box::new(rename_bound(g, from, to))),
        Formula::And(l, r) => Formula::and(rename_bound(l, from, to), rename_bound(r, from, to)),
        Formula::Or(l, r) => Formula::or(rename_bound(l, from, to), rename_bound(r, from, to)),
        Formula::Implies(l, r) => {
            Formula::implies(rename_bound(l, from, to), rename_bound(r, from, to))
        }
        _ => f.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_sig() -> FlbSignature {
        parse_signature("height 1\nchildren f1 f2\nlabels Phos Active\nnames Raf1 Src Tyr")
            .unwrap()
    }

    #[test]
    fn parses_figure_signature() {
        let sig = fig1_sig();
        assert_eq!(sig.height, 1);
        assert_eq!(sig.child_fns, vec!["f1", "f2"]);
        assert_eq!(sig.labels, vec!["Phos", "Active"]);
        assert_eq!(sig.names, vec!["Raf1", "Src", "Tyr"]);
    }

    #[test]
    fn parses_minimal_signature() {
        let sig = parse_signature("height 0\nchildren\nlabels\nnames").unwrap();
        assert_eq!(sig.height, 0);
        assert!(sig.child_fns.is_empty());
    }

    #[test]
    fn rejects_duplicate_label() {
        let err = parse_signature("height 0\nchildren\nlabels Phos Phos\nnames").unwrap_err();
        assert!(err.msg.contains("duplicate"), "{err}");
    }

    #[test]
    fn parses_first_observation() {
        let sig = fig1_sig();
        let f = parse_formula("forall y. Link*(x,y) -> !Active*(parent(x))", &sig).unwrap();
        let expected = Formula::forall(
            "y",
            Formula::implies(
                Formula::Link(Stage::Post, Term::Var("x".into()), Term::Var("y".into())),
                Formula::not(Formula::Unary(
                    UnarySym::Label(Stage::Post, "Active".into()),
                    Term::App(FuncSym::Parent, Box::new(Term::Var("x".into()))),
                )),
            ),
        );
        assert_eq!(f, expected);
        assert_eq!(f.free_variables().into_iter().collect::<Vec<_>>(), vec!["x"]);
    }

    #[test]
    fn parses_equality_atom() {
        let sig = fig1_sig();
        let f = parse_formula("x = x", &sig).unwrap();
        assert_eq!(f, Formula::Eq(Term::Var("x".into()), Term::Var("x".into())));
        assert_eq!(f.free_variables().len(), 1);
    }

    #[test]
    fn rejects_label_arity_mismatch() {
        let sig = fig1_sig();
        let err = parse_formula("Phos(x,y)", &sig).unwrap_err();
        assert!(err.msg.contains("unary"), "{err}");
    }

    #[test]
    fn rejects_unknown_starred_symbol() {
        let sig = fig1_sig();
        assert!(parse_formula("Raf1*(x)", &sig).is_err());
        assert!(parse_formula("Bogus*(x)", &sig).is_err());
    }

    #[test]
    fn second_observation_has_one_free_variable() {
        let sig = fig1_sig();
        let f = parse_formula("exists z. Src(z) & Link*(x,z)", &sig).unwrap();
        assert_eq!(f.free_variables().into_iter().collect::<Vec<_>>(), vec!["x"]);
    }

    #[test]
    fn no_free_variables_in_constants() {
        let sig = fig1_sig();
        assert!(parse_formula("true", &sig).unwrap().free_variables().is_empty());
    }

    #[test]
    fn parser_renames_shadowed_binders_apart() {
        let sig = fig1_sig();
        let f = parse_formula("forall x. P(x) & (exists x. P*(x))", &sig).unwrap();
        let mut binders = Vec::new();
        fn collect(f: &Formula, out: &mut Vec<String>) {
            match f {
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    out.push(v.clone());
                    collect(g, out);
                }
                Formula::Not(g) | Formula::Minimize(g) => collect(g, out),
                Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                    collect(l, out);
                    collect(r, out);
                }
                _ => {}
            }
        }
        collect(&f, &mut binders);
        assert_eq!(binders.len(), 2);
        assert_ne!(binders[0], binders[1]);
    }

    #[test]
    fn minimize_node_parses_and_nests() {
        let sig = fig1_sig();
        let f = parse_formula("minimize(minimize(P(x)))", &sig).unwrap();
        assert!(matches!(f, Formula::Minimize(_)));
        assert!(f.contains_minimize());
    }

    #[test]
    fn def_expansion_substitutes_arguments() {
        let sig = fig1_sig();
        let mut defs = BTreeMap::new();
        let body = parse_formula("exists z. Src(z) & Link*(x,z)", &sig).unwrap();
        defs.insert(
            "Observation2".to_string(),
            FormulaDef { params: vec!["x".into()], body },
        );
        let f = parse_formula_with_defs("Observation2(parent(w))", &sig, &defs).unwrap();
        let free = f.free_variables();
        assert_eq!(free.into_iter().collect::<Vec<_>>(), vec!["w"]);
    }

    #[test]
    fn display_parses_back() {
        let sig = fig1_sig();
        for src in [
            "forall y. Link*(x,y) -> !Active*(parent(x))",
            "exists z. Src(z) & Link*(x,z)",
            "P(x) & !P*(x) | x = y -> true",
            "minimize(P(x) & Link(x,y))",
        ] {
            let f = parse_formula(src, &sig).unwrap();
            let printed = f.to_string();
            let g = parse_formula(&printed, &sig).unwrap();
            assert_eq!(f, g, "print/parse mismatch for `{src}` -> `{printed}`");
        }
    }
}
