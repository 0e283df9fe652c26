//! Recursive-descent parser.
//!
//! ```text
//! formula := 'exists' VAR '.' formula | 'forall' VAR '.' formula | iff
//! iff     := imp ('<->' imp)*
//! imp     := disj ('->' imp)?
//! disj    := conj ('|' conj)*
//! conj    := neg ('&' neg)*
//! neg     := '!' neg | quantified | prim
//! prim    := '(' formula ')' | atom
//! atom    := VAR '=' VAR | NAME '(' VARS ')' | NAME '(' VARS ')' '=' VAR
//!          | NAME '=' VAR | VAR OP VAR
//! ```
//!
//! `NAME = VAR` is a constant atom only when a vocabulary is supplied and
//! declares `NAME` as a constant; otherwise it is an equality.

use thiserror::Error;

use super::{Formula, OP_CHARS};
use crate::structures::{SymbolKind, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("symbol `{name}` at offset {pos}: {msg}")]
    Vocabulary { pos: usize, name: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Op(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Bang,
    Amp,
    Bar,
    Eq,
    Arrow,
    DoubleArrow,
    End,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        let rest = &src[i..];
        let tok = if rest.starts_with("<->") {
            i += 3;
            Tok::DoubleArrow
        } else if rest.starts_with("->") {
            i += 2;
            Tok::Arrow
        } else if c.is_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_alphanumeric() || ch == '_' || ch == '\''))
                .unwrap_or(rest.len());
            i += len;
            Tok::Ident(rest[..len].to_string())
        } else if OP_CHARS.contains(c) {
            let len = rest
                .find(|ch: char| !(OP_CHARS.contains(ch) || ch == '='))
                .unwrap_or(rest.len());
            i += len;
            Tok::Op(rest[..len].to_string())
        } else {
            i += c.len_utf8();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '!' => Tok::Bang,
                '&' => Tok::Amp,
                '|' => Tok::Bar,
                '=' => Tok::Eq,
                _ => {
                    return Err(ParseError::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        out.push((start, tok));
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    vocab: Option<&'a Vocabulary>,
}

/// Parses without a vocabulary: no arity checks, and `a = b` is always an
/// equality.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    parse_impl(text, None)
}

/// Parses against `vocab`, checking symbol kinds and arities.
pub fn parse_with(text: &str, vocab: &Vocabulary) -> Result<Formula, ParseError> {
    parse_impl(text, Some(vocab))
}

fn parse_impl(text: &str, vocab: Option<&Vocabulary>) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        vocab,
    };
    let f = p.formula()?;
    match p.peek() {
        Tok::End => Ok(f),
        t => Err(p.unexpected(&format!("{t:?}"), "end of input")),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, found: &str, wanted: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            msg: format!("expected {wanted}, found {found}"),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            let found = match self.peek() {
                Tok::End => "end of input".to_string(),
                t => format!("{t:?}"),
            };
            Err(self.unexpected(&found, wanted))
        }
    }

    fn var(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(v) if v != "exists" && v != "forall" => {
                self.bump();
                Ok(v)
            }
            Tok::End => Err(self.unexpected("end of input", "a variable")),
            t => Err(self.unexpected(&format!("{t:?}"), "a variable")),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.imp()?;
        while *self.peek() == Tok::DoubleArrow {
            self.bump();
            let g = self.imp()?;
            f = f.clone().not().or(g.clone()).and(g.not().or(f));
        }
        Ok(f)
    }

    fn imp(&mut self) -> Result<Formula, ParseError> {
        let f = self.disj()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let g = self.imp()?;
            return Ok(f.not().or(g));
        }
        Ok(f)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.conj()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            f = f.or(self.conj()?);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.neg()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            f = f.and(self.neg()?);
        }
        Ok(f)
    }

    fn neg(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(self.neg()?.not())
            }
            Tok::Ident(k) if k == "exists" || k == "forall" => {
                let exists = k == "exists";
                self.bump();
                let v = self.var()?;
                self.expect(Tok::Dot, "`.`")?;
                let body = self.formula()?;
                Ok(if exists {
                    Formula::Exists(v, Box::new(body))
                } else {
                    Formula::Forall(v, Box::new(body))
                })
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            _ => self.atom(),
        }
    }

    fn check(&self, pos: usize, name: &str, kind: SymbolKind, arity: usize) -> Result<(), ParseError> {
        let Some(vocab) = self.vocab else { return Ok(()) };
        let err = |msg: String| ParseError::Vocabulary {
            pos,
            name: name.to_string(),
            msg,
        };
        match vocab.get(name) {
            None => Err(err("not in vocabulary".into())),
            Some(s) if s.kind != kind => Err(err(format!("used as {} but declared {}", kind.tag(), s.kind.tag()))),
            Some(s) if s.arity != arity => Err(err(format!("arity mismatch: used with {arity}, declared {}", s.arity))),
            Some(_) => Ok(()),
        }
    }

    fn is_constant(&self, name: &str) -> bool {
        self.vocab
            .and_then(|v| v.get(name))
            .is_some_and(|s| s.kind == SymbolKind::Constant)
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        let name = match self.bump() {
            Tok::Ident(n) => n,
            Tok::Op(n) => n,
            Tok::End => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: "expected a formula, found end of input".into(),
                })
            }
            t => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("expected a formula, found {t:?}"),
                })
            }
        };
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let mut args = vec![self.var()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.var()?);
                }
                self.expect(Tok::RParen, "`)` or `,`")?;
                if *self.peek() == Tok::Eq {
                    self.bump();
                    let y = self.var()?;
                    self.check(pos, &name, SymbolKind::Function, args.len())?;
                    Ok(Formula::FunAtom(name, args, y))
                } else {
                    self.check(pos, &name, SymbolKind::Relation, args.len())?;
                    Ok(Formula::RelAtom(name, args))
                }
            }
            Tok::Eq if !super::is_operator_name(&name) => {
                self.bump();
                let y = self.var()?;
                if self.is_constant(&name) {
                    Ok(Formula::ConstAtom(name, y))
                } else {
                    Ok(Formula::Equal(name, y))
                }
            }
            Tok::Op(op) if !super::is_operator_name(&name) => {
                let op_pos = self.pos();
                self.bump();
                let y = self.var()?;
                self.check(op_pos, &op, SymbolKind::Relation, 2)?;
                Ok(Formula::RelAtom(op, vec![name, y]))
            }
            Tok::End => Err(self.unexpected("end of input", "`(`, `=` or an infix relation")),
            t => Err(self.unexpected(&format!("{t:?}"), "`(`, `=` or an infix relation")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Symbol;
    use proptest::prelude::*;

    #[test]
    fn grammar_examples() {
        let f = parse("exists x . forall y . !(y < x)").unwrap();
        assert_eq!(
            f,
            Formula::exists("x", Formula::forall("y", Formula::rel("<", &["y", "x"]).not()))
        );
        let g = parse("f(x)=y & x=y").unwrap();
        assert_eq!(g, Formula::fun("f", &["x"], "y").and(Formula::eq("x", "y")));
        assert_eq!(
            parse("R(x"),
            Err(ParseError::Syntax {
                pos: 3,
                msg: "expected `)` or `,`, found end of input".into()
            })
        );
    }

    #[test]
    fn precedence_and_sugar() {
        let f = parse("a = b | b = c & !c = d").unwrap();
        assert_eq!(
            f,
            Formula::eq("a", "b").or(Formula::eq("b", "c").and(Formula::eq("c", "d").not()))
        );
        let imp = parse("a = b -> b = c").unwrap();
        assert_eq!(imp, Formula::eq("a", "b").not().or(Formula::eq("b", "c")));
        let q = parse("a = b & exists x . x = a | x = b").unwrap();
        assert_eq!(
            q,
            Formula::eq("a", "b").and(Formula::exists("x", Formula::eq("x", "a").or(Formula::eq("x", "b"))))
        );
        let iff = parse("a = b <-> b = a").unwrap();
        assert_eq!(iff.quantifier_rank(), 0);
        assert_eq!(iff.free_vars().len(), 2);
    }

    #[test]
    fn vocabulary_checks() {
        let vocab = Vocabulary::from_symbols([
            Symbol::relation("<", 2),
            Symbol::function("f", 1),
            Symbol::constant("c"),
        ])
        .unwrap();
        assert_eq!(parse_with("c = x", &vocab).unwrap(), Formula::constant("c", "x"));
        assert_eq!(parse("c = x").unwrap(), Formula::eq("c", "x"));
        assert!(matches!(
            parse_with("<(x, y, z)", &vocab),
            Err(ParseError::Vocabulary { .. })
        ));
        assert!(matches!(
            parse_with("f(x, y) = z", &vocab),
            Err(ParseError::Vocabulary { .. })
        ));
        assert!(matches!(parse_with("R(x)", &vocab), Err(ParseError::Vocabulary { .. })));
        assert!(matches!(parse_with("f(x)", &vocab), Err(ParseError::Vocabulary { .. })));
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let var = prop::sample::select(vec!["x", "y", "z"]);
        let leaf = prop_oneof![
            (var.clone(), var.clone()).prop_map(|(a, b)| Formula::eq(a, b)),
            (var.clone(), var.clone()).prop_map(|(a, b)| Formula::rel("<", &[a, b])),
            (var.clone(), var.clone()).prop_map(|(a, b)| Formula::rel("R", &[a, b])),
            (var.clone(), var.clone()).prop_map(|(a, b)| Formula::fun("f", &[a], b)),
            var.clone().prop_map(|a| Formula::constant("c", a)),
        ];
        leaf.prop_recursive(4, 24, 2, move |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
                (var.clone(), inner.clone()).prop_map(|(v, a)| Formula::exists(v, a)),
                (var.clone(), inner).prop_map(|(v, a)| Formula::forall(v, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(f in arb_formula()) {
            let vocab = Vocabulary::from_symbols([
                Symbol::relation("<", 2),
                Symbol::relation("R", 2),
                Symbol::function("f", 1),
                Symbol::constant("c"),
            ]).unwrap();
            let text = f.to_string();
            let back = parse_with(&text, &vocab).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
