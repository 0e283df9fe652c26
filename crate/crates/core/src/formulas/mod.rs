//! First-order formulas over finite relational/functional vocabularies.
//!
//! Atoms are strictly atomic: `x = y`, `R(x̄)`, `F(x̄) = y` and `c = y`,
//! always over variables. The connectives are `¬`, `∧`, `∨` and both
//! quantifiers; `->` and `<->` are accepted by the parser and desugared.

mod enumerate;
mod eval;
mod parser;

pub use enumerate::{enumerate_sentences, formula_size, SentenceEnumerator};
pub use eval::{eval, eval_sentence, EvalError, Valuation};
pub use parser::{parse, parse_with, ParseError};

use std::collections::BTreeSet;
use std::fmt;

use crate::structures::{SymbolKind, Vocabulary};

pub type Var = String;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Equal(Var, Var),
    RelAtom(String, Vec<Var>),
    /// `F(x̄) = y`
    FunAtom(String, Vec<Var>, Var),
    /// `c = y`
    ConstAtom(String, Var),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

impl Formula {
    pub fn eq(x: &str, y: &str) -> Self {
        Formula::Equal(x.into(), y.into())
    }

    pub fn rel(name: &str, args: &[&str]) -> Self {
        Formula::RelAtom(name.into(), args.iter().map(|a| a.to_string()).collect())
    }

    pub fn fun(name: &str, args: &[&str], value: &str) -> Self {
        Formula::FunAtom(name.into(), args.iter().map(|a| a.to_string()).collect(), value.into())
    }

    pub fn constant(name: &str, value: &str) -> Self {
        Formula::ConstAtom(name.into(), value.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn exists(var: &str, body: Formula) -> Self {
        Formula::Exists(var.into(), Box::new(body))
    }

    pub fn forall(var: &str, body: Formula) -> Self {
        Formula::Forall(var.into(), Box::new(body))
    }

    /// Left-nested conjunction; `None` for an empty list.
    pub fn conjunction<I: IntoIterator<Item = Formula>>(parts: I) -> Option<Self> {
        parts.into_iter().reduce(Formula::and)
    }

    /// `∃ vars . body`, outermost quantifier first.
    pub fn exists_all(vars: &[Var], body: Formula) -> Self {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::Exists(v.clone(), Box::new(acc)))
    }

    pub fn is_strictly_atomic(&self) -> bool {
        matches!(
            self,
            Formula::Equal(..) | Formula::RelAtom(..) | Formula::FunAtom(..) | Formula::ConstAtom(..)
        )
    }

    pub fn quantifier_rank(&self) -> usize {
        match self {
            Formula::Not(a) => a.quantifier_rank(),
            Formula::And(a, b) | Formula::Or(a, b) => a.quantifier_rank().max(b.quantifier_rank()),
            Formula::Exists(_, a) | Formula::Forall(_, a) => 1 + a.quantifier_rank(),
            _ => 0,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<Var>) {
        let mut see = |v: &'a Var, bound: &Vec<&'a str>| {
            if !bound.contains(&v.as_str()) {
                out.insert(v.clone());
            }
        };
        match self {
            Formula::Equal(x, y) => {
                see(x, bound);
                see(y, bound);
            }
            Formula::RelAtom(_, args) => args.iter().for_each(|a| see(a, bound)),
            Formula::FunAtom(_, args, y) => {
                args.iter().for_each(|a| see(a, bound));
                see(y, bound);
            }
            Formula::ConstAtom(_, y) => see(y, bound),
            Formula::Not(a) => a.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(v, a) | Formula::Forall(v, a) => {
                bound.push(v);
                a.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every variable name occurring in the formula, bound or free.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Equal(x, y) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            Formula::RelAtom(_, args) => out.extend(args.iter().cloned()),
            Formula::FunAtom(_, args, y) => {
                out.extend(args.iter().cloned());
                out.insert(y.clone());
            }
            Formula::ConstAtom(_, y) => {
                out.insert(y.clone());
            }
            Formula::Exists(v, _) | Formula::Forall(v, _) => {
                out.insert(v.clone());
            }
            _ => {}
        });
        out
    }

    /// Names of the non-logical symbols used.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::RelAtom(n, _) | Formula::FunAtom(n, _, _) | Formula::ConstAtom(n, _) => {
                out.insert(n.clone());
            }
            _ => {}
        });
        out
    }

    /// Whether every symbol is in `vocab` with the matching kind and arity.
    pub fn is_over(&self, vocab: &Vocabulary) -> bool {
        let mut ok = true;
        self.visit(&mut |f| {
            let fits = match f {
                Formula::RelAtom(n, a) => vocab
                    .get(n)
                    .is_some_and(|s| s.kind == SymbolKind::Relation && s.arity == a.len()),
                Formula::FunAtom(n, a, _) => vocab
                    .get(n)
                    .is_some_and(|s| s.kind == SymbolKind::Function && s.arity == a.len()),
                Formula::ConstAtom(n, _) => vocab.get(n).is_some_and(|s| s.kind == SymbolKind::Constant),
                _ => true,
            };
            ok &= fits;
        });
        ok
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => a.visit(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }
}

/// Every strictly atomic formula over `vocab` whose arguments are drawn
/// from `vars`, with `x = y` only for distinct variables (in list order).
pub fn strict_atoms(vocab: &Vocabulary, vars: &[Var]) -> Vec<Formula> {
    fn tuples(vars: &[Var], arity: usize) -> Vec<Vec<Var>> {
        let mut out = vec![Vec::new()];
        for _ in 0..arity {
            out = out
                .into_iter()
                .flat_map(|t| {
                    vars.iter().map(move |v| {
                        let mut t = t.clone();
                        t.push(v.clone());
                        t
                    })
                })
                .collect();
        }
        out
    }
    let mut out = Vec::new();
    for (i, x) in vars.iter().enumerate() {
        for y in &vars[i + 1..] {
            out.push(Formula::Equal(x.clone(), y.clone()));
        }
    }
    for s in vocab.iter() {
        match s.kind {
            SymbolKind::Relation => {
                for t in tuples(vars, s.arity) {
                    out.push(Formula::RelAtom(s.name.clone(), t));
                }
            }
            SymbolKind::Function => {
                for t in tuples(vars, s.arity) {
                    for y in vars {
                        out.push(Formula::FunAtom(s.name.clone(), t.clone(), y.clone()));
                    }
                }
            }
            SymbolKind::Constant => {
                for y in vars {
                    out.push(Formula::ConstAtom(s.name.clone(), y.clone()));
                }
            }
        }
    }
    out
}

const OP_CHARS: &str = "<>+*%^~$@?/\\";

pub(crate) fn is_operator_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| OP_CHARS.contains(c))
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Top,
    Or,
    And,
    Not,
}

impl Formula {
    fn prec(&self) -> Prec {
        match self {
            Formula::Exists(..) | Formula::Forall(..) => Prec::Top,
            Formula::Or(..) => Prec::Or,
            Formula::And(..) => Prec::And,
            _ => Prec::Not,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: Prec) -> fmt::Result {
        // Quantifiers extend as far right as possible, so they are
        // parenthesized whenever they are an operand.
        let needs_parens = self.prec() < min || (self.prec() == Prec::Top && min != Prec::Top);
        if needs_parens {
            write!(f, "(")?;
            self.write_at(f, Prec::Top)?;
            return write!(f, ")");
        }
        let args = |a: &[Var]| a.join(", ");
        match self {
            Formula::Equal(x, y) => write!(f, "{x} = {y}"),
            Formula::RelAtom(r, a) if a.len() == 2 && is_operator_name(r) => write!(f, "{} {r} {}", a[0], a[1]),
            Formula::RelAtom(r, a) => write!(f, "{r}({})", args(a)),
            Formula::FunAtom(g, a, y) => write!(f, "{g}({}) = {y}", args(a)),
            Formula::ConstAtom(c, y) => write!(f, "{c} = {y}"),
            Formula::Not(a) => {
                write!(f, "!")?;
                a.write_at(f, Prec::Not)
            }
            Formula::And(a, b) => {
                a.write_at(f, Prec::And)?;
                write!(f, " & ")?;
                b.write_at(f, Prec::Not)
            }
            Formula::Or(a, b) => {
                a.write_at(f, Prec::Or)?;
                write!(f, " | ")?;
                b.write_at(f, Prec::And)
            }
            Formula::Exists(v, a) => {
                write!(f, "exists {v} . ")?;
                a.write_at(f, Prec::Top)
            }
            Formula::Forall(v, a) => {
                write!(f, "forall {v} . ")?;
                a.write_at(f, Prec::Top)
            }
        }
    }
}

/// Canonical text: minimal parentheses, reparses to the same tree (given
/// the vocabulary, for constant atoms).
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, Prec::Top)
    }
}
