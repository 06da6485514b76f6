//! Recursive-descent parser for class specification documents.
//!
//! Grammar (UTF-8 text, `#` comments to end of line):
//!
//! ```text
//! document    := item* | transform
//! item        := signature | constraint | eqrel | minsize
//! signature   := "signature" "{" (IDENT "/" INT ";")* "}"
//! constraint  := "constraint" "forall" IDENT ("," IDENT)* ":" formula ";"
//! formula     := iff
//! iff         := implies ("<->" implies)*
//! implies     := or ("->" or)*            (right associative)
//! or          := and ("|" and)*
//! and         := unary ("&" unary)*
//! unary       := "!" unary | primary
//! primary     := "(" formula ")" | "true" | "false"
//!              | IDENT "(" IDENT ("," IDENT)* ")"
//!              | IDENT "=" IDENT | IDENT "!=" IDENT
//! eqrel       := "eqrel" IDENT "{" "domain" (IDENT | "all") ";"
//!                "relation" IDENT ";" "length" INT ";"
//!                "star" ("trivial" | IDENT) ";" "count" (INT | "inf") ";" "}"
//! minsize     := "minsize" INT ";"
//! transform   := "transform" ("eliminate-fin" | "eliminate-inf") IDENT
//!                "of" STRING ";"
//! ```

use std::sync::Arc;

use thiserror::Error;

use super::{
    ClassSpec, Constraint, DomainRef, EqClassCount, EqRelDecl, Formula, StarRef,
};
use crate::relstruct::Signature;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct SpecParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// A reference to a transformed class: the named equivalence relation of the
/// base document is eliminated by the finite or infinite transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformDecl {
    pub kind: TransformKind,
    pub rel_id: String,
    pub base_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    EliminateFin,
    EliminateInf,
}

/// A parsed document: either a self-contained class or a transform of one.
#[derive(Debug, Clone)]
pub enum SpecDocument {
    Class(ClassSpec),
    Transform(TransformDecl),
}

/// Parse a self-contained class specification.
pub fn parse_spec(text: &str) -> Result<ClassSpec, SpecParseError> {
    match parse_document(text)? {
        SpecDocument::Class(spec) => Ok(spec),
        SpecDocument::Transform(_) => Err(SpecParseError {
            line: 1,
            col: 1,
            msg: "transform documents must be loaded through a class loader".into(),
        }),
    }
}

/// Parse any specification document.
pub fn parse_document(text: &str) -> Result<SpecDocument, SpecParseError> {
    Parser::new(text).document()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Punct(&'static str),
    Eof,
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            toks: lex(text),
            pos: 0,
        }
    }

    fn peek(&self) -> &Lexed {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> &Lexed {
        let i = self.pos.min(self.toks.len() - 1);
        self.pos += 1;
        &self.toks[i]
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SpecParseError> {
        let at = self.peek();
        Err(SpecParseError {
            line: at.line,
            col: at.col,
            msg: msg.into(),
        })
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), SpecParseError> {
        if self.peek().tok == Tok::Punct(p) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn expect_ident(&mut self) -> Result<String, SpecParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SpecParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            _ => self.err(format!("expected `{kw}`")),
        }
    }

    fn expect_int(&mut self) -> Result<u64, SpecParseError> {
        match self.peek().tok {
            Tok::Int(n) => {
                self.next();
                Ok(n)
            }
            _ => self.err("expected integer"),
        }
    }

    fn document(&mut self) -> Result<SpecDocument, SpecParseError> {
        if let Tok::Ident(s) = &self.peek().tok {
            if s == "transform" {
                return Ok(SpecDocument::Transform(self.transform()?));
            }
        }

        let mut symbols: Vec<(String, usize)> = Vec::new();
        let mut raw_constraints: Vec<(Vec<String>, RawFormula)> = Vec::new();
        let mut raw_eqrels: Vec<RawEqRel> = Vec::new();
        let mut min_size = 0usize;
        loop {
            match &self.peek().tok {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "signature" => {
                        self.next();
                        self.expect_punct("{")?;
                        while self.peek().tok != Tok::Punct("}") {
                            let name = self.expect_ident()?;
                            self.expect_punct("/")?;
                            let arity = self.expect_int()? as usize;
                            if arity == 0 {
                                return self.err("arity must be at least 1");
                            }
                            if symbols.iter().any(|(n, _)| *n == name) {
                                return self.err(format!("duplicate symbol `{name}`"));
                            }
                            symbols.push((name, arity));
                            self.expect_punct(";")?;
                        }
                        self.next();
                    }
                    "constraint" => {
                        self.next();
                        self.expect_keyword("forall")?;
                        let mut vars = vec![self.expect_ident()?];
                        while self.peek().tok == Tok::Punct(",") {
                            self.next();
                            vars.push(self.expect_ident()?);
                        }
                        self.expect_punct(":")?;
                        let body = self.formula()?;
                        self.expect_punct(";")?;
                        raw_constraints.push((vars, body));
                    }
                    "eqrel" => {
                        raw_eqrels.push(self.eqrel()?);
                    }
                    "minsize" => {
                        self.next();
                        min_size = self.expect_int()? as usize;
                        self.expect_punct(";")?;
                    }
                    other => return self.err(format!("unexpected item `{other}`")),
                },
                _ => return self.err("expected an item"),
            }
        }

        let sig = Arc::new(Signature::new(symbols).map_err(|e| SpecParseError {
            line: 1,
            col: 1,
            msg: e.to_string(),
        })?);
        let constraints = raw_constraints
            .into_iter()
            .map(|(vars, raw)| self.resolve_constraint(&sig, vars, raw))
            .collect::<Result<Vec<_>, _>>()?;
        let eqrels = self.resolve_eqrels(&sig, raw_eqrels)?;
        let mut spec = ClassSpec::new(sig, constraints, eqrels);
        spec.min_size = min_size;
        Ok(SpecDocument::Class(spec))
    }

    fn transform(&mut self) -> Result<TransformDecl, SpecParseError> {
        self.expect_keyword("transform")?;
        let kind = match &self.peek().tok {
            Tok::Ident(s) if s == "eliminate-fin" => TransformKind::EliminateFin,
            Tok::Ident(s) if s == "eliminate-inf" => TransformKind::EliminateInf,
            _ => return self.err("expected `eliminate-fin` or `eliminate-inf`"),
        };
        self.next();
        let rel_id = self.expect_ident()?;
        self.expect_keyword("of")?;
        let base_path = match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.next();
                s
            }
            _ => return self.err("expected quoted base path"),
        };
        self.expect_punct(";")?;
        if self.peek().tok != Tok::Eof {
            return self.err("transform documents contain a single declaration");
        }
        Ok(TransformDecl {
            kind,
            rel_id,
            base_path,
        })
    }

    fn eqrel(&mut self) -> Result<RawEqRel, SpecParseError> {
        self.expect_keyword("eqrel")?;
        let (line, col) = (self.peek().line, self.peek().col);
        let id = self.expect_ident()?;
        self.expect_punct("{")?;
        self.expect_keyword("domain")?;
        let domain = self.expect_ident()?;
        self.expect_punct(";")?;
        self.expect_keyword("relation")?;
        let relation = self.expect_ident()?;
        self.expect_punct(";")?;
        self.expect_keyword("length")?;
        let length = self.expect_int()? as usize;
        self.expect_punct(";")?;
        self.expect_keyword("star")?;
        let star = self.expect_ident()?;
        self.expect_punct(";")?;
        self.expect_keyword("count")?;
        let count = match &self.peek().tok {
            Tok::Ident(s) if s == "inf" => {
                self.next();
                EqClassCount::Infinite
            }
            Tok::Int(_) => {
                let v = self.expect_int()?;
                if v == 0 {
                    return self.err("count must be positive");
                }
                EqClassCount::Finite(v as u32)
            }
            _ => return self.err("expected count integer or `inf`"),
        };
        self.expect_punct(";")?;
        self.expect_punct("}")?;
        Ok(RawEqRel {
            id,
            domain,
            relation,
            length,
            star,
            count,
            line,
            col,
        })
    }

    fn resolve_constraint(
        &self,
        sig: &Arc<Signature>,
        vars: Vec<String>,
        raw: RawFormula,
    ) -> Result<Constraint, SpecParseError> {
        let body = self.resolve_formula(sig, &vars, raw)?;
        Ok(Constraint {
            var_names: vars,
            body,
        })
    }

    fn resolve_formula(
        &self,
        sig: &Arc<Signature>,
        vars: &[String],
        raw: RawFormula,
    ) -> Result<Formula, SpecParseError> {
        let var = |name: &str, line: usize, col: usize| {
            vars.iter().position(|v| v == name).ok_or(SpecParseError {
                line,
                col,
                msg: format!("unknown variable `{name}`"),
            })
        };
        Ok(match raw {
            RawFormula::True => Formula::True,
            RawFormula::False => Formula::False,
            RawFormula::Atom {
                name,
                args,
                line,
                col,
            } => {
                let sym = sig.lookup(&name).ok_or(SpecParseError {
                    line,
                    col,
                    msg: format!("unknown symbol `{name}`"),
                })?;
                if sig.arity(sym) != args.len() {
                    return Err(SpecParseError {
                        line,
                        col,
                        msg: format!(
                            "symbol `{name}` expects arity {}, got {}",
                            sig.arity(sym),
                            args.len()
                        ),
                    });
                }
                let ixs = args
                    .iter()
                    .map(|a| var(a, line, col))
                    .collect::<Result<Vec<_>, _>>()?;
                Formula::Atom(sym, ixs)
            }
            RawFormula::Eq(a, b, line, col) => {
                Formula::Eq(var(&a, line, col)?, var(&b, line, col)?)
            }
            RawFormula::Not(f) => Formula::Not(Box::new(self.resolve_formula(sig, vars, *f)?)),
            RawFormula::And(a, b) => Formula::And(
                Box::new(self.resolve_formula(sig, vars, *a)?),
                Box::new(self.resolve_formula(sig, vars, *b)?),
            ),
            RawFormula::Or(a, b) => Formula::Or(
                Box::new(self.resolve_formula(sig, vars, *a)?),
                Box::new(self.resolve_formula(sig, vars, *b)?),
            ),
            RawFormula::Implies(a, b) => Formula::Implies(
                Box::new(self.resolve_formula(sig, vars, *a)?),
                Box::new(self.resolve_formula(sig, vars, *b)?),
            ),
            RawFormula::Iff(a, b) => Formula::Iff(
                Box::new(self.resolve_formula(sig, vars, *a)?),
                Box::new(self.resolve_formula(sig, vars, *b)?),
            ),
        })
    }

    fn resolve_eqrels(
        &self,
        sig: &Arc<Signature>,
        raws: Vec<RawEqRel>,
    ) -> Result<Vec<EqRelDecl>, SpecParseError> {
        let mut out: Vec<EqRelDecl> = Vec::new();
        for raw in raws {
            let at = |msg: String| SpecParseError {
                line: raw.line,
                col: raw.col,
                msg,
            };
            if out.iter().any(|d| d.id == raw.id) {
                return Err(at(format!("duplicate eqrel id `{}`", raw.id)));
            }
            let domain = if raw.domain == "all" {
                DomainRef::All
            } else {
                let v = sig
                    .lookup(&raw.domain)
                    .ok_or_else(|| at(format!("unknown domain symbol `{}`", raw.domain)))?;
                if sig.arity(v) != raw.length {
                    return Err(at(format!(
                        "domain symbol `{}` has arity {}, expected length {}",
                        raw.domain,
                        sig.arity(v),
                        raw.length
                    )));
                }
                DomainRef::Symbol(v)
            };
            let relation = sig
                .lookup(&raw.relation)
                .ok_or_else(|| at(format!("unknown relation symbol `{}`", raw.relation)))?;
            if sig.arity(relation) != 2 * raw.length {
                return Err(at(format!(
                    "relation symbol `{}` has arity {}, expected {}",
                    raw.relation,
                    sig.arity(relation),
                    2 * raw.length
                )));
            }
            let star = if raw.star == "trivial" {
                StarRef::Trivial
            } else {
                let idx = out
                    .iter()
                    .position(|d| d.id == raw.star)
                    .ok_or_else(|| at(format!(
                        "star `{}` must reference an earlier eqrel or `trivial`",
                        raw.star
                    )))?;
                if out[idx].length != raw.length {
                    return Err(at(format!(
                        "star `{}` has length {}, expected {}",
                        raw.star, out[idx].length, raw.length
                    )));
                }
                StarRef::Earlier(idx)
            };
            if raw.count == EqClassCount::Infinite && raw.length != 1 {
                return Err(at("infinite class count requires length 1".into()));
            }
            out.push(EqRelDecl {
                id: raw.id,
                domain,
                relation,
                length: raw.length,
                star,
                count: raw.count,
            });
        }
        Ok(out)
    }

    fn formula(&mut self) -> Result<RawFormula, SpecParseError> {
        let mut lhs = self.implies()?;
        while self.peek().tok == Tok::Punct("<->") {
            self.next();
            let rhs = self.implies()?;
            lhs = RawFormula::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<RawFormula, SpecParseError> {
        let lhs = self.or()?;
        if self.peek().tok == Tok::Punct("->") {
            self.next();
            let rhs = self.implies()?;
            return Ok(RawFormula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<RawFormula, SpecParseError> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Punct("|") {
            self.next();
            let rhs = self.and()?;
            lhs = RawFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<RawFormula, SpecParseError> {
        let mut lhs = self.unary()?;
        while self.peek().tok == Tok::Punct("&") {
            self.next();
            let rhs = self.unary()?;
            lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawFormula, SpecParseError> {
        if self.peek().tok == Tok::Punct("!") {
            self.next();
            return Ok(RawFormula::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<RawFormula, SpecParseError> {
        if self.peek().tok == Tok::Punct("(") {
            self.next();
            let f = self.formula()?;
            self.expect_punct(")")?;
            return Ok(f);
        }
        let (line, col) = (self.peek().line, self.peek().col);
        let name = self.expect_ident()?;
        match name.as_str() {
            "true" => return Ok(RawFormula::True),
            "false" => return Ok(RawFormula::False),
            _ => {}
        }
        match &self.peek().tok {
            Tok::Punct("(") => {
                self.next();
                let mut args = vec![self.expect_ident()?];
                while self.peek().tok == Tok::Punct(",") {
                    self.next();
                    args.push(self.expect_ident()?);
                }
                self.expect_punct(")")?;
                Ok(RawFormula::Atom {
                    name,
                    args,
                    line,
                    col,
                })
            }
            Tok::Punct("=") => {
                self.next();
                let rhs = self.expect_ident()?;
                Ok(RawFormula::Eq(name, rhs, line, col))
            }
            Tok::Punct("!=") => {
                self.next();
                let rhs = self.expect_ident()?;
                Ok(RawFormula::Not(Box::new(RawFormula::Eq(
                    name, rhs, line, col,
                ))))
            }
            _ => self.err("expected `(`, `=` or `!=` after identifier"),
        }
    }
}

#[derive(Debug, Clone)]
enum RawFormula {
    True,
    False,
    Atom {
        name: String,
        args: Vec<String>,
        line: usize,
        col: usize,
    },
    Eq(String, String, usize, usize),
    Not(Box<RawFormula>),
    And(Box<RawFormula>, Box<RawFormula>),
    Or(Box<RawFormula>, Box<RawFormula>),
    Implies(Box<RawFormula>, Box<RawFormula>),
    Iff(Box<RawFormula>, Box<RawFormula>),
}

struct RawEqRel {
    id: String,
    domain: String,
    relation: String,
    length: usize,
    star: String,
    count: EqClassCount,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Vec<Lexed> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if c.is_whitespace() {
            chars.next();
            bump(c, &mut line, &mut col);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                chars.next();
                bump(c, &mut line, &mut col);
                if c == '\n' {
                    break;
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                    s.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push(Lexed {
                tok: Tok::Ident(s),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut n = 0u64;
            while let Some(&c) = chars.peek() {
                if let Some(d) = c.to_digit(10) {
                    n = n * 10 + d as u64;
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push(Lexed {
                tok: Tok::Int(n),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c == '"' {
            chars.next();
            bump(c, &mut line, &mut col);
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                chars.next();
                bump(c, &mut line, &mut col);
                if c == '"' {
                    break;
                }
                s.push(c);
            }
            out.push(Lexed {
                tok: Tok::Str(s),
                line: tline,
                col: tcol,
            });
            continue;
        }
        // Punctuation, longest match first.
        let rest: String = chars.clone().take(3).collect();
        let punct = ["<->", "->", "!=", "{", "}", "(", ")", ";", ":", ",", "/", "=", "!", "&", "|"]
            .into_iter()
            .find(|p| rest.starts_with(p));
        match punct {
            Some(p) => {
                for _ in 0..p.len() {
                    let c = chars.next().unwrap();
                    bump(c, &mut line, &mut col);
                }
                out.push(Lexed {
                    tok: Tok::Punct(p),
                    line: tline,
                    col: tcol,
                });
            }
            None => {
                // Emit an EOF marker carrying the position; the parser will
                // report an "unexpected token" style error here.
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Lexed {
                    tok: Tok::Punct("?"),
                    line: tline,
                    col: tcol,
                });
            }
        }
    }
    out.push(Lexed {
        tok: Tok::Eof,
        line,
        col,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_grammar() {
        let text = r#"
# two nested equivalence relations
signature { R/2; S/2; V/1; }
constraint forall x : R(x,x);
constraint forall x,y : R(x,y) -> R(y,x);
constraint forall x,y,z : R(x,y) & R(y,z) -> R(x,z);
constraint forall x,y : S(x,y) -> R(x,y);
constraint forall x,y : x != y | true;
eqrel r1 { domain all; relation R; length 1; star trivial; count inf; }
eqrel r2 { domain V; relation S; length 1; star r1; count 3; }
"#;
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.sig.len(), 3);
        assert_eq!(spec.constraints.len(), 5);
        assert_eq!(spec.eqrels.len(), 2);
        assert_eq!(spec.eqrels[1].star, StarRef::Earlier(0));
        assert_eq!(spec.eqrels[1].count, EqClassCount::Finite(3));
    }

    #[test]
    fn rejects_arity_mismatch() {
        let text = "signature { R/2; }\nconstraint forall x : R(x);\n";
        let err = parse_spec(text).unwrap_err();
        assert!(err.msg.contains("arity"));
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_unknown_symbol() {
        let text = "signature { R/2; }\nconstraint forall x : Q(x,x);\n";
        let err = parse_spec(text).unwrap_err();
        assert!(err.msg.contains("unknown symbol"));
    }

    #[test]
    fn rejects_star_forward_reference() {
        let text = "signature { R/2; S/2; }\neqrel r1 { domain all; relation R; length 1; star r2; count inf; }\neqrel r2 { domain all; relation S; length 1; star trivial; count inf; }\n";
        let err = parse_spec(text).unwrap_err();
        assert!(err.msg.contains("earlier"));
    }

    #[test]
    fn rejects_infinite_count_with_length_two() {
        let text = "signature { V/2; P/4; }\neqrel r1 { domain V; relation P; length 2; star trivial; count inf; }\n";
        let err = parse_spec(text).unwrap_err();
        assert!(err.msg.contains("length 1"));
    }

    #[test]
    fn parses_transform_document() {
        let text = "transform eliminate-inf r1 of \"equiv.kspec\";\n";
        match parse_document(text).unwrap() {
            SpecDocument::Transform(t) => {
                assert_eq!(t.kind, TransformKind::EliminateInf);
                assert_eq!(t.rel_id, "r1");
                assert_eq!(t.base_path, "equiv.kspec");
            }
            _ => panic!("expected transform"),
        }
    }

    #[test]
    fn implication_is_right_associative() {
        let text = "signature { P/1; }\nconstraint forall x : P(x) -> P(x) -> P(x);\n";
        let spec = parse_spec(text).unwrap();
        match &spec.constraints[0].body {
            Formula::Implies(_, rhs) => assert!(matches!(**rhs, Formula::Implies(..))),
            other => panic!("unexpected shape {other:?}"),
        }
    }
}
