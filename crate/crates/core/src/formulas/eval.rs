use std::collections::BTreeMap;

use thiserror::Error;

use super::Formula;
use crate::structures::{Elem, FiniteStructure};

pub type Valuation = BTreeMap<String, Elem>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("symbol `{0}` not interpreted in the structure")]
    Uninterpreted(String),
    #[error("element {0} of the quantifier domain is outside the universe")]
    DomainOutOfRange(Elem),
    #[error("valuation maps `{0}` outside the universe")]
    ValuationOutOfRange(String),
}

struct Env<'a> {
    m: &'a FiniteStructure,
    domain: Vec<Elem>,
    stack: Vec<(&'a str, Elem)>,
    args: Vec<Elem>,
}

impl<'a> Env<'a> {
    fn lookup(&self, v: &str) -> Result<Elem, EvalError> {
        self.stack
            .iter()
            .rev()
            .find(|(n, _)| *n == v)
            .map(|&(_, e)| e)
            .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
    }

    fn load_args(&mut self, vars: &[String]) -> Result<(), EvalError> {
        self.args.clear();
        for v in vars {
            let e = self.lookup(v)?;
            self.args.push(e);
        }
        Ok(())
    }

    fn eval(&mut self, f: &'a Formula) -> Result<bool, EvalError> {
        match f {
            Formula::Equal(x, y) => Ok(self.lookup(x)? == self.lookup(y)?),
            Formula::RelAtom(r, a) => {
                self.load_args(a)?;
                self.m
                    .holds(r, &self.args)
                    .ok_or_else(|| EvalError::Uninterpreted(r.clone()))
            }
            Formula::FunAtom(g, a, y) => {
                self.load_args(a)?;
                let value = self
                    .m
                    .apply(g, &self.args)
                    .ok_or_else(|| EvalError::Uninterpreted(g.clone()))?;
                Ok(value == self.lookup(y)?)
            }
            Formula::ConstAtom(c, y) => {
                let value = self.m.constant(c).ok_or_else(|| EvalError::Uninterpreted(c.clone()))?;
                Ok(value == self.lookup(y)?)
            }
            Formula::Not(a) => Ok(!self.eval(a)?),
            Formula::And(a, b) => Ok(self.eval(a)? && self.eval(b)?),
            Formula::Or(a, b) => Ok(self.eval(a)? || self.eval(b)?),
            Formula::Exists(v, a) => self.quantify(v, a, true),
            Formula::Forall(v, a) => self.quantify(v, a, false),
        }
    }

    fn quantify(&mut self, v: &'a str, body: &'a Formula, exists: bool) -> Result<bool, EvalError> {
        for i in 0..self.domain.len() {
            let e = self.domain[i];
            self.stack.push((v, e));
            let r = self.eval(body);
            self.stack.pop();
            if r? == exists {
                return Ok(exists);
            }
        }
        Ok(!exists)
    }
}

/// Tarskian truth of `φ` in `m` under `v`. With `domain = Some(D)` every
/// quantifier ranges over `D` only (the relativization `φ_D`); `None`
/// means the whole universe.
pub fn eval(m: &FiniteStructure, f: &Formula, v: &Valuation, domain: Option<&[Elem]>) -> Result<bool, EvalError> {
    let domain = match domain {
        Some(d) => {
            if let Some(&bad) = d.iter().find(|&&e| e >= m.size()) {
                return Err(EvalError::DomainOutOfRange(bad));
            }
            d.to_vec()
        }
        None => m.universe().collect(),
    };
    if let Some((name, _)) = v.iter().find(|(_, &e)| e >= m.size()) {
        return Err(EvalError::ValuationOutOfRange(name.clone()));
    }
    let mut env = Env {
        m,
        domain,
        stack: v.iter().map(|(k, &e)| (k.as_str(), e)).collect(),
        args: Vec::new(),
    };
    env.eval(f)
}

pub fn eval_sentence(m: &FiniteStructure, f: &Formula) -> Result<bool, EvalError> {
    eval(m, f, &Valuation::new(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::parse;

    #[test]
    fn chain_has_a_minimum() {
        let m = FiniteStructure::linear_order(3, "<");
        let f = parse("exists x . forall y . !(y < x)").unwrap();
        assert!(eval_sentence(&m, &f).unwrap());
        assert!(eval(&m, &f, &Valuation::new(), Some(&[2])).unwrap());
    }

    #[test]
    fn relativized_pigeonhole() {
        let m = FiniteStructure::linear_order(3, "<");
        let f = parse("exists x . exists y . exists z . (!(x=y) & !(x=z) & !(y=z))").unwrap();
        assert!(eval_sentence(&m, &f).unwrap());
        assert!(!eval(&m, &f, &Valuation::new(), Some(&[0, 1])).unwrap());
    }

    #[test]
    fn relativization_to_empty_domain() {
        let m = FiniteStructure::linear_order(2, "<");
        assert!(!eval(&m, &parse("exists x . x = x").unwrap(), &Valuation::new(), Some(&[])).unwrap());
        assert!(eval(&m, &parse("forall x . x < x").unwrap(), &Valuation::new(), Some(&[])).unwrap());
    }

    #[test]
    fn errors() {
        let m = FiniteStructure::linear_order(2, "<");
        assert_eq!(
            eval_sentence(&m, &parse("x = x").unwrap()),
            Err(EvalError::UnboundVariable("x".into()))
        );
        assert_eq!(
            eval_sentence(&m, &parse("exists x . R(x)").unwrap()),
            Err(EvalError::Uninterpreted("R".into()))
        );
        assert_eq!(
            eval(&m, &parse("exists x . x = x").unwrap(), &Valuation::new(), Some(&[5])),
            Err(EvalError::DomainOutOfRange(5))
        );
    }

    #[test]
    fn free_variables_and_functions() {
        let m = FiniteStructure::new(3)
            .with_function("s", 1, vec![1, 2, 0])
            .with_constant("z", 0);
        let f = parse("exists y . s(x) = y & !(x = y)").unwrap();
        let v: Valuation = [("x".to_string(), 1)].into();
        assert!(eval(&m, &f, &v, None).unwrap());
        assert!(!eval(&m, &f, &v, Some(&[1])).unwrap());
        let vocab = crate::structures::Vocabulary::from_symbols([
            crate::structures::Symbol::function("s", 1),
            crate::structures::Symbol::constant("z"),
        ])
        .unwrap();
        let g = crate::formulas::parse_with("exists y . z = y & s(y) = y", &vocab).unwrap();
        assert!(!eval_sentence(&m, &g).unwrap());
    }
}
