//! Separating sentences `∃x̄ φ` with `φ` a conjunction of strictly atomic
//! `τ_{k+1}` literals, found by searching atomic types of growing width.

use std::fmt;

use super::{game_winner, Arena, GameError, SolveOptions, Winner};
use crate::formulas::{eval, eval_sentence, strict_atoms, Formula, Valuation, Var};
use crate::structures::{Elem, FiniteStructure, VocabularyChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `M¹ ⊨ σ` and `M² ⊭ σ`.
    First,
    /// `M² ⊨ σ` and `M¹ ⊭ σ`.
    Second,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::First => "1",
            Direction::Second => "2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distinguisher {
    pub sentence: Formula,
    pub direction: Direction,
    /// Width of the type that was found, before literals were pruned.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistinguishOutcome {
    Found(Distinguisher),
    /// The protagonist wins `Γ_{k+1}`, so there is nothing to separate.
    ProtagonistWins,
    /// No type of width up to `cap` separates the structures.
    NoneFound {
        cap: usize,
    },
    /// The game at `k + 1` hit the node cap.
    Undecided,
}

pub fn default_width_cap(k: usize) -> usize {
    (k + 2) * (k + 1)
}

/// A tuple of distinct `from`-elements whose atomic type no tuple of the
/// other structure realizes, searched by width then lexicographically.
struct TypeSearch<'a> {
    arena: &'a Arena,
    /// Search runs in `M²` when set; the arena is always `M¹ → M²`.
    flipped: bool,
}

impl TypeSearch<'_> {
    fn sizes(&self) -> (usize, usize) {
        if self.flipped {
            (self.arena.n2(), self.arena.n1())
        } else {
            (self.arena.n1(), self.arena.n2())
        }
    }

    fn can_add(&self, fwd: &[u8], bwd: &[u8], x: usize, y: usize) -> bool {
        if self.flipped {
            self.arena.can_add(bwd, fwd, y, x)
        } else {
            self.arena.can_add(fwd, bwd, x, y)
        }
    }

    fn empty(&self) -> (Vec<u8>, Vec<u8>) {
        let (f, b) = self.arena.empty_state();
        if self.flipped {
            (b, f)
        } else {
            (f, b)
        }
    }

    fn set(&self, fwd: &mut [u8], bwd: &mut [u8], x: usize, y: usize, on: bool) {
        fwd[x] = if on { y as u8 } else { u8::MAX };
        bwd[y] = if on { x as u8 } else { u8::MAX };
    }

    /// `cands`: images of the tuple so far that keep the type.
    fn find(&self, width: usize, tuple: &mut Vec<Elem>, cands: &[Vec<Elem>]) -> bool {
        if tuple.len() == width {
            return cands.is_empty();
        }
        let (n_from, n_to) = self.sizes();
        for x in 0..n_from {
            if tuple.contains(&x) {
                continue;
            }
            let mut next = Vec::new();
            for s in cands {
                let (mut fwd, mut bwd) = self.empty();
                for (&a, &b) in tuple.iter().zip(s) {
                    self.set(&mut fwd, &mut bwd, a, b, true);
                }
                for y in 0..n_to {
                    if self.can_add(&fwd, &bwd, x, y) {
                        let mut s2 = s.clone();
                        s2.push(y);
                        next.push(s2);
                    }
                }
            }
            tuple.push(x);
            if self.find(width, tuple, &next) {
                return true;
            }
            tuple.pop();
        }
        false
    }
}

fn distinguishes(m_yes: &FiniteStructure, m_no: &FiniteStructure, s: &Formula) -> bool {
    matches!((eval_sentence(m_yes, s), eval_sentence(m_no, s)), (Ok(true), Ok(false)))
}

/// For `k` with the antagonist winning `Γ_{k+1}`, a `τ_{k+1}`-sentence
/// true in exactly one of the two structures.
pub fn extract_distinguisher(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    k: usize,
    width_cap: Option<usize>,
    opts: SolveOptions,
) -> Result<DistinguishOutcome, GameError> {
    match game_winner(m1, m2, chain, k + 1, opts)?.0 {
        None => return Ok(DistinguishOutcome::Undecided),
        Some(Winner::Protagonist) => return Ok(DistinguishOutcome::ProtagonistWins),
        Some(Winner::Antagonist) => {}
    }
    let vocab = chain.at_budget(k + 1);
    let arena = Arena::new(m1, m2, vocab)?;
    let cap = width_cap.unwrap_or_else(|| default_width_cap(k));
    if !arena.root_ok() {
        // a variable-free atom already differs
        for atom in strict_atoms(vocab, &[]) {
            for lit in [atom.clone(), Formula::Not(Box::new(atom))] {
                for (direction, yes, no) in [(Direction::First, m1, m2), (Direction::Second, m2, m1)] {
                    if distinguishes(yes, no, &lit) {
                        return Ok(DistinguishOutcome::Found(Distinguisher {
                            sentence: lit,
                            direction,
                            width: 0,
                        }));
                    }
                }
            }
        }
    }
    for width in 1..=cap {
        for (direction, flipped) in [(Direction::First, false), (Direction::Second, true)] {
            let search = TypeSearch { arena: &arena, flipped };
            let mut tuple = Vec::new();
            if search.find(width, &mut tuple, &[Vec::new()]) {
                let (yes, no) = if flipped { (m2, m1) } else { (m1, m2) };
                let sentence = sentence_for(yes, no, vocab, &tuple)?;
                assert!(distinguishes(yes, no, &sentence), "pruned type must still separate");
                return Ok(DistinguishOutcome::Found(Distinguisher {
                    sentence,
                    direction,
                    width,
                }));
            }
        }
    }
    Ok(DistinguishOutcome::NoneFound { cap })
}

/// `∃x̄` over the type of `tuple` in `yes`, with literals dropped from the
/// end while the sentence still fails in `no`.
fn sentence_for(
    yes: &FiniteStructure,
    no: &FiniteStructure,
    vocab: &crate::structures::Vocabulary,
    tuple: &[Elem],
) -> Result<Formula, GameError> {
    let vars: Vec<Var> = (0..tuple.len()).map(|i| format!("x{i}")).collect();
    let v: Valuation = vars.iter().cloned().zip(tuple.iter().copied()).collect();
    let mut lits = Vec::new();
    for atom in strict_atoms(vocab, &vars) {
        let holds = eval(yes, &atom, &v, None).map_err(|e| GameError::Eval(e.to_string()))?;
        lits.push(if holds { atom } else { Formula::Not(Box::new(atom)) });
    }
    let build = |lits: &[Formula]| {
        let body = Formula::conjunction(lits.iter().cloned())?;
        let used = body.free_vars();
        let bound: Vec<Var> = vars.iter().filter(|x| used.contains(*x)).cloned().collect();
        Some(Formula::exists_all(&bound, body))
    };
    for i in (0..lits.len()).rev() {
        let mut trial = lits.clone();
        trial.remove(i);
        if let Some(s) = build(&trial) {
            if distinguishes(yes, no, &s) {
                lits = trial;
            }
        }
    }
    Ok(build(&lits).expect("a separating type has a literal"))
}
