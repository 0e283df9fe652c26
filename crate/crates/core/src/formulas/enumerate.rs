//! Exhaustive sentence streams for the brute-force oracle.
//!
//! Normal form: negation only on atoms, `&`/`|` chains nested to the left
//! with strictly increasing components (so no repeats and no reorderings),
//! variables drawn from `v0, v1, ...`. A quantifier under `d < w` binders
//! binds `v_d`; deeper quantifiers reuse one of `v0..v_{w-1}`.

use std::collections::HashMap;
use std::sync::Arc;

use super::{strict_atoms, Formula, Var};
use crate::structures::Vocabulary;

/// Literals count 1, each connective or quantifier adds 1.
pub fn formula_size(f: &Formula) -> usize {
    match f {
        Formula::Not(a) if a.is_strictly_atomic() => 1,
        Formula::Not(a) => 1 + formula_size(a),
        Formula::And(a, b) | Formula::Or(a, b) => 1 + formula_size(a) + formula_size(b),
        Formula::Exists(_, a) | Formula::Forall(_, a) => 1 + formula_size(a),
        _ => 1,
    }
}

fn var(i: usize) -> Var {
    format!("v{i}")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Conn {
    And,
    Or,
}

impl Conn {
    fn split(self, f: &Formula) -> Option<(&Formula, &Formula)> {
        match (self, f) {
            (Conn::And, Formula::And(a, b)) | (Conn::Or, Formula::Or(a, b)) => Some((a, b)),
            _ => None,
        }
    }

    fn build(self, a: Formula, b: Formula) -> Formula {
        match self {
            Conn::And => Formula::And(Box::new(a), Box::new(b)),
            Conn::Or => Formula::Or(Box::new(a), Box::new(b)),
        }
    }
}

type Key = (usize, usize, usize);

/// Lazy stream of sentences, by increasing size. Infinite unless no
/// sentence exists at all.
pub struct SentenceEnumerator {
    w: usize,
    rank: usize,
    literals: Vec<Arc<Vec<Formula>>>,
    memo: HashMap<Key, Arc<Vec<Formula>>>,
    size: usize,
    current: Arc<Vec<Formula>>,
    pos: usize,
    empty: bool,
}

pub fn enumerate_sentences(vocab: &Vocabulary, r: usize, w: usize) -> SentenceEnumerator {
    let literals = (0..=w)
        .map(|k| {
            let vars: Vec<Var> = (0..k).map(var).collect();
            let mut out = Vec::new();
            for a in strict_atoms(vocab, &vars) {
                out.push(Formula::Not(Box::new(a.clone())));
                out.push(a);
            }
            out.sort();
            Arc::new(out)
        })
        .collect();
    let mut e = SentenceEnumerator {
        w,
        rank: r,
        literals,
        memo: HashMap::new(),
        size: 0,
        current: Arc::new(Vec::new()),
        pos: 0,
        empty: false,
    };
    // The smallest sentence is a quantifier prefix on one literal.
    e.empty = (1..=r + 2).all(|s| e.formulas(0, r, s).is_empty());
    e
}

impl SentenceEnumerator {
    /// Formulas with every free variable among `v0..v_{k-1}`, rank ≤ `q`,
    /// size exactly `s`.
    fn formulas(&mut self, k: usize, q: usize, s: usize) -> Arc<Vec<Formula>> {
        if let Some(hit) = self.memo.get(&(k, q, s)) {
            return hit.clone();
        }
        let mut out = Vec::new();
        if s == 1 {
            out.extend(self.literals[k].iter().cloned());
        } else {
            for conn in [Conn::And, Conn::Or] {
                self.chains(conn, k, q, s, &mut out);
            }
            if q > 0 {
                let body = if k < self.w {
                    Some((k + 1, vec![var(k)]))
                } else if self.w > 0 {
                    Some((k, (0..self.w).map(var).collect()))
                } else {
                    None
                };
                if let Some((inner, binders)) = body {
                    let bodies = self.formulas(inner, q - 1, s - 1);
                    for v in &binders {
                        for b in bodies.iter() {
                            out.push(Formula::Exists(v.clone(), Box::new(b.clone())));
                            out.push(Formula::Forall(v.clone(), Box::new(b.clone())));
                        }
                    }
                }
            }
        }
        let out = Arc::new(out);
        self.memo.insert((k, q, s), out.clone());
        out
    }

    fn chains(&mut self, conn: Conn, k: usize, q: usize, s: usize, out: &mut Vec<Formula>) {
        for sa in 1..s - 1 {
            let sb = s - 1 - sa;
            let left = self.formulas(k, q, sa);
            let right = self.formulas(k, q, sb);
            for b in right.iter().filter(|b| conn.split(b).is_none()) {
                for a in left.iter() {
                    let last = conn.split(a).map_or(a, |(_, l)| l);
                    if last < b {
                        out.push(conn.build(a.clone(), b.clone()));
                    }
                }
            }
        }
    }

    pub fn rank_bound(&self) -> usize {
        self.rank
    }

    pub fn var_bound(&self) -> usize {
        self.w
    }

    /// Every sentence of exactly size `s`, in stream order.
    pub fn of_size(&mut self, s: usize) -> Vec<Formula> {
        if s == 0 {
            return Vec::new();
        }
        self.formulas(0, self.rank, s).to_vec()
    }

    /// Stream prefix: every sentence of size at most `max`.
    pub fn up_to_size(mut self, max: usize) -> impl Iterator<Item = Formula> {
        let mut all = Vec::new();
        for s in 1..=max {
            all.extend(self.of_size(s));
        }
        all.into_iter()
    }
}

impl Iterator for SentenceEnumerator {
    type Item = Formula;

    fn next(&mut self) -> Option<Formula> {
        if self.empty {
            return None;
        }
        while self.pos >= self.current.len() {
            self.size += 1;
            self.current = self.formulas(0, self.rank, self.size);
            self.pos = 0;
        }
        self.pos += 1;
        Some(self.current[self.pos - 1].clone())
    }
}
