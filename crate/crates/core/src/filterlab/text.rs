//! Text forms: tail classes, k-sequence files and set expressions.
//!
//! ```text
//! bounded(3)   affine(1,0)   periodic(0:0,1:0)
//!
//! #kseq
//! prefix 0 1 2 3
//! tail affine(1,0)
//! anchor 4            (optional, defaults to the prefix length)
//!
//! fin{1,2} | cofin{0} & ~gen(3) | evens | odds | all | empty | period(3, 101)
//! ```

use thiserror::Error;

use super::{generator, KSeqSpec, SetExpr, TailClass, TailError, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("`gen(..)` needs a k-sequence")]
    MissingKSeq,
    #[error(transparent)]
    Tail(#[from] TailError),
}

fn syntax(pos: usize, msg: impl Into<String>) -> TextError {
    TextError::Syntax { pos, msg: msg.into() }
}

fn args<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    text.strip_prefix(name)?
        .trim_start()
        .strip_prefix('(')?
        .strip_suffix(')')
}

pub fn parse_tail(text: &str) -> Result<TailClass, TextError> {
    let text = text.trim();
    let int = |s: &str| -> Result<i64, TextError> {
        s.trim()
            .parse::<i64>()
            .map_err(|_| syntax(0, format!("bad integer `{}` in `{text}`", s.trim())))
    };
    let nat = |s: &str| -> Result<usize, TextError> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| syntax(0, format!("bad natural `{}` in `{text}`", s.trim())))
    };
    let tail = if let Some(a) = args(text, "bounded") {
        TailClass::Bounded(nat(a)?)
    } else if let Some(a) = args(text, "affine") {
        let (s, o) = a
            .split_once(',')
            .ok_or_else(|| syntax(0, "affine needs `slope,offset`"))?;
        TailClass::Affine {
            slope: nat(s)?,
            offset: int(o)?,
        }
    } else if let Some(a) = args(text, "periodic") {
        let terms = a
            .split(',')
            .map(|t| {
                let (s, o) = t
                    .split_once(':')
                    .ok_or_else(|| syntax(0, format!("periodic term `{}` needs `slope:offset`", t.trim())))?;
                Ok(Term {
                    slope: nat(s)?,
                    offset: int(o)?,
                })
            })
            .collect::<Result<Vec<_>, TextError>>()?;
        TailClass::Periodic(terms)
    } else {
        return Err(syntax(0, format!("unknown tail class `{text}`")));
    };
    tail.check()?;
    Ok(tail)
}

pub fn parse_kseq_spec(text: &str) -> Result<KSeqSpec, TextError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"));
    match lines.next() {
        Some((_, "#kseq")) => {}
        Some((line, _)) => {
            return Err(TextError::Line {
                line,
                msg: "expected `#kseq` header".into(),
            })
        }
        None => {
            return Err(TextError::Line {
                line: 1,
                msg: "empty k-sequence file".into(),
            })
        }
    }
    let (mut prefix, mut tail, mut anchor) = (None, None, None);
    for (line, l) in lines {
        let err = |msg: String| TextError::Line { line, msg };
        let (key, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        match key {
            "prefix" if prefix.is_none() => {
                prefix = Some(
                    rest.split_whitespace()
                        .map(|v| v.parse::<usize>().map_err(|_| err(format!("bad value `{v}`"))))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
            "tail" if tail.is_none() => tail = Some(parse_tail(rest).map_err(|e| err(e.to_string()))?),
            "anchor" if anchor.is_none() => {
                anchor = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| err(format!("bad anchor `{rest}`")))?,
                )
            }
            _ => return Err(err(format!("unexpected line `{l}`"))),
        }
    }
    let prefix = prefix.unwrap_or_default();
    let tail = tail.ok_or(TextError::Line {
        line: 0,
        msg: "missing `tail` line".into(),
    })?;
    let anchor = anchor.unwrap_or(prefix.len());
    Ok(KSeqSpec::anchored(prefix, tail, anchor)?)
}

pub fn print_kseq_spec(k: &KSeqSpec) -> String {
    let prefix: Vec<String> = k.prefix().iter().map(usize::to_string).collect();
    let mut out = format!("#kseq\nprefix {}\ntail {}\n", prefix.join(" "), k.tail());
    if k.anchor() != k.window_len() {
        out.push_str(&format!("anchor {}\n", k.anchor()));
    }
    out
}

/// Parsed set expression; `gen(c)` is resolved against a k-sequence by
/// [`SetTerm::eval`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetTerm {
    Fin(Vec<usize>),
    Cofin(Vec<usize>),
    Gen(usize),
    Periodic(Vec<bool>),
    Not(Box<SetTerm>),
    And(Box<SetTerm>, Box<SetTerm>),
    Or(Box<SetTerm>, Box<SetTerm>),
}

impl SetTerm {
    pub fn eval(&self, kspec: Option<&KSeqSpec>) -> Result<SetExpr, TextError> {
        Ok(match self {
            SetTerm::Fin(v) => SetExpr::finite(v.iter().copied()),
            SetTerm::Cofin(v) => SetExpr::cofinite(v.iter().copied()),
            SetTerm::Gen(c) => generator(kspec.ok_or(TextError::MissingKSeq)?, *c),
            SetTerm::Periodic(mask) => SetExpr::periodic(mask.clone()),
            SetTerm::Not(a) => a.eval(kspec)?.complement(),
            SetTerm::And(a, b) => a.eval(kspec)?.intersection(&b.eval(kspec)?),
            SetTerm::Or(a, b) => a.eval(kspec)?.union(&b.eval(kspec)?),
        })
    }
}

pub fn parse_set_term(text: &str) -> Result<SetTerm, TextError> {
    let mut p = SetParser { src: text, pos: 0 };
    let t = p.union()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(syntax(p.pos, "trailing input"));
    }
    Ok(t)
}

struct SetParser<'a> {
    src: &'a str,
    pos: usize,
}

impl SetParser<'_> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), TextError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(syntax(self.pos, format!("expected `{tok}`")))
        }
    }

    fn union(&mut self) -> Result<SetTerm, TextError> {
        let mut t = self.inter()?;
        while self.eat("|") {
            t = SetTerm::Or(Box::new(t), Box::new(self.inter()?));
        }
        Ok(t)
    }

    fn inter(&mut self) -> Result<SetTerm, TextError> {
        let mut t = self.factor()?;
        while self.eat("&") {
            t = SetTerm::And(Box::new(t), Box::new(self.factor()?));
        }
        Ok(t)
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> Result<usize, TextError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        let n = rest[..len].parse().map_err(|_| syntax(self.pos, "expected a number"))?;
        self.pos += len;
        Ok(n)
    }

    fn number_list(&mut self) -> Result<Vec<usize>, TextError> {
        self.expect("{")?;
        let mut v = Vec::new();
        if self.eat("}") {
            return Ok(v);
        }
        loop {
            v.push(self.number()?);
            if self.eat("}") {
                return Ok(v);
            }
            self.expect(",")?;
        }
    }

    fn factor(&mut self) -> Result<SetTerm, TextError> {
        if self.eat("~") {
            return Ok(SetTerm::Not(Box::new(self.factor()?)));
        }
        if self.eat("(") {
            let t = self.union()?;
            self.expect(")")?;
            return Ok(t);
        }
        let start = self.pos;
        match self.word() {
            "fin" => Ok(SetTerm::Fin(self.number_list()?)),
            "cofin" => Ok(SetTerm::Cofin(self.number_list()?)),
            "gen" => {
                self.expect("(")?;
                let c = self.number()?;
                self.expect(")")?;
                Ok(SetTerm::Gen(c))
            }
            "evens" => Ok(SetTerm::Periodic(vec![true, false])),
            "odds" => Ok(SetTerm::Periodic(vec![false, true])),
            "all" => Ok(SetTerm::Cofin(Vec::new())),
            "empty" => Ok(SetTerm::Fin(Vec::new())),
            "period" => {
                self.expect("(")?;
                let p = self.number()?;
                self.expect(",")?;
                self.skip_ws();
                let at = self.pos;
                let rest = &self.src[self.pos..];
                let len = rest.find(|c| c != '0' && c != '1').unwrap_or(rest.len());
                let mask: Vec<bool> = rest[..len].chars().map(|c| c == '1').collect();
                self.pos += len;
                if p == 0 || mask.len() != p {
                    return Err(syntax(at, format!("period({p}, ..) needs a bitmask of length {p}")));
                }
                self.expect(")")?;
                Ok(SetTerm::Periodic(mask))
            }
            w => Err(syntax(start, format!("unknown set `{w}`"))),
        }
    }
}
