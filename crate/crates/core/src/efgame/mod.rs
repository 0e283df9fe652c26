//! Exact solver for the budgeted game: `k + 1` rounds, each a challenge
//! `(A, B)` with `|A| + |B| <= k` answered by extending a partial injection
//! that preserves the strictly atomic formulas of `τ_k`.
//!
//! Two reductions keep the search small. Winning positions are closed
//! under shrinking the map (a strategy from `g` also works from any
//! `h ⊆ g`), so the protagonist only ever needs minimal responses, where
//! every new pair touches the challenge. Dually, challenged elements that
//! are already matched change nothing, so the antagonist only names
//! unmatched ones.

mod certificate;
mod distinguish;
mod kseq;

pub use certificate::{verify_antagonist, verify_protagonist, AntagonistCert, AntagonistNode, ProtagonistCert};
pub use distinguish::{extract_distinguisher, Direction, DistinguishOutcome, Distinguisher};
pub use kseq::{compute_k_seq, game_profile, KSeq, KValue};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formulas::{eval, strict_atoms, Valuation};
use crate::structures::{Elem, FiniteStructure, FunctionTable, SymbolKind, Vocabulary, VocabularyChain};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Largest universe the engine accepts (elements are stored as bytes).
pub const MAX_ENGINE_SIZE: usize = 254;

const NONE: u8 = u8::MAX;
const MAX_TABLE: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("structure {side} does not interpret `{symbol}`")]
    Uninterpreted { side: u8, symbol: String },
    #[error("structure {side} too large for the game engine: {what}")]
    TooLarge { side: u8, what: String },
    #[error("element {elem} is outside structure {side}")]
    ElementOutOfRange { side: u8, elem: Elem },
    #[error("the map is not injective")]
    NotInjective,
    #[error("element {0} of the tuple is not in the domain of the map")]
    NotInDomain(Elem),
    #[error("formula evaluation failed: {0}")]
    Eval(String),
}

/// A finite partial injection `M¹ -> M²`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartialMap {
    pairs: BTreeMap<Elem, Elem>,
}

impl PartialMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on a repeated domain element or image.
    pub fn from_pairs<I: IntoIterator<Item = (Elem, Elem)>>(pairs: I) -> Result<Self, GameError> {
        let mut f = PartialMap::new();
        for (a, b) in pairs {
            if !f.insert(a, b) {
                return Err(GameError::NotInjective);
            }
        }
        Ok(f)
    }

    /// Adds `a ↦ b`; false (and no change) if `a` or `b` is already used.
    pub fn insert(&mut self, a: Elem, b: Elem) -> bool {
        if self.pairs.contains_key(&a) || self.pairs.values().any(|&y| y == b) {
            return false;
        }
        self.pairs.insert(a, b);
        true
    }

    pub fn get(&self, a: Elem) -> Option<Elem> {
        self.pairs.get(&a).copied()
    }

    pub fn preimage(&self, b: Elem) -> Option<Elem> {
        self.pairs.iter().find(|(_, &y)| y == b).map(|(&x, _)| x)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Elem, Elem)> + '_ {
        self.pairs.iter().map(|(&a, &b)| (a, b))
    }

    pub fn domain(&self) -> Vec<Elem> {
        self.pairs.keys().copied().collect()
    }

    pub fn range(&self) -> Vec<Elem> {
        let mut r: Vec<Elem> = self.pairs.values().copied().collect();
        r.sort_unstable();
        r
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_subset(&self, other: &PartialMap) -> bool {
        self.pairs().all(|(a, b)| other.get(a) == Some(b))
    }

    pub fn inverse(&self) -> PartialMap {
        PartialMap {
            pairs: self.pairs.iter().map(|(&a, &b)| (b, a)).collect(),
        }
    }
}

impl fmt::Display for PartialMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (a, b)) in self.pairs().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}->{b}")?;
        }
        write!(f, "}}")
    }
}

/// Element sets named by the antagonist in one round.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Challenge {
    pub a: BTreeSet<Elem>,
    pub b: BTreeSet<Elem>,
}

impl Challenge {
    pub fn new<I: IntoIterator<Item = Elem>, J: IntoIterator<Item = Elem>>(a: I, b: J) -> Self {
        Challenge {
            a: a.into_iter().collect(),
            b: b.into_iter().collect(),
        }
    }

    pub fn cost(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost() == 0
    }

    /// The part of the challenge not already covered by `f`.
    pub fn fresh_part(&self, f: &PartialMap) -> Challenge {
        let ran: BTreeSet<Elem> = f.range().into_iter().collect();
        Challenge {
            a: self.a.iter().copied().filter(|&x| f.get(x).is_none()).collect(),
            b: self.b.iter().copied().filter(|y| !ran.contains(y)).collect(),
        }
    }

    pub fn is_met_by(&self, f: &PartialMap) -> bool {
        self.fresh_part(f).is_empty()
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<Elem>| s.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "A={{{}}} B={{{}}}", join(&self.a), join(&self.b))
    }
}

/// Position after round `round - 1`: the protagonist's latest map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GamePosition {
    pub round: usize,
    pub f: PartialMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Winner {
    Protagonist,
    Antagonist,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Protagonist => "protagonist",
            Winner::Antagonist => "antagonist",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Protagonist(ProtagonistCert),
    Antagonist(AntagonistCert),
    /// Node cap reached before the value was known.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub k: usize,
    pub verdict: Verdict,
    pub nodes: usize,
}

impl SolveResult {
    pub fn winner(&self) -> Option<Winner> {
        match self.verdict {
            Verdict::Protagonist(_) => Some(Winner::Protagonist),
            Verdict::Antagonist(_) => Some(Winner::Antagonist),
            Verdict::Undecided => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub node_cap: usize,
    /// Off only for cross-checking the memo against plain search.
    pub memoize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            node_cap: DEFAULT_NODE_CAP,
            memoize: true,
        }
    }
}

/// Marker for an exhausted node budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CapReached;

struct Side {
    n: usize,
    nullary: Vec<bool>,
    rels: Vec<Vec<bool>>,
    funs: Vec<Vec<u8>>,
    consts: Vec<u8>,
}

/// Both structures compiled to dense tables over one vocabulary.
pub(crate) struct Arena {
    s1: Side,
    s2: Side,
    rel_arity: Vec<usize>,
    fun_arity: Vec<usize>,
}

fn table_len(n: usize, arity: usize, side: u8, name: &str) -> Result<usize, GameError> {
    let mut len = 1usize;
    for _ in 0..arity {
        len = len
            .checked_mul(n)
            .filter(|&l| l <= MAX_TABLE)
            .ok_or_else(|| GameError::TooLarge {
                side,
                what: format!("table for `{name}`"),
            })?;
    }
    Ok(len)
}

fn tuple_of(mut index: usize, n: usize, arity: usize) -> Vec<Elem> {
    let mut t = vec![0; arity];
    for slot in t.iter_mut().rev() {
        *slot = index % n;
        index /= n;
    }
    t
}

impl Side {
    fn compile(m: &FiniteStructure, vocab: &Vocabulary, side: u8) -> Result<Side, GameError> {
        let n = m.size();
        if n > MAX_ENGINE_SIZE {
            return Err(GameError::TooLarge {
                side,
                what: format!("universe of size {n}"),
            });
        }
        let missing = |s: &str| GameError::Uninterpreted {
            side,
            symbol: s.to_string(),
        };
        let mut out = Side {
            n,
            nullary: Vec::new(),
            rels: Vec::new(),
            funs: Vec::new(),
            consts: Vec::new(),
        };
        for s in vocab.iter() {
            match s.kind {
                SymbolKind::Relation if s.arity == 0 => {
                    out.nullary.push(m.holds(&s.name, &[]).ok_or_else(|| missing(&s.name))?);
                }
                SymbolKind::Relation => {
                    let tuples = m.relation(&s.name).ok_or_else(|| missing(&s.name))?;
                    let mut table = vec![false; table_len(n, s.arity, side, &s.name)?];
                    for t in tuples {
                        if t.len() != s.arity || t.iter().any(|&e| e >= n) {
                            return Err(missing(&s.name));
                        }
                        table[FunctionTable::index(n, t)] = true;
                    }
                    out.rels.push(table);
                }
                SymbolKind::Function => {
                    let len = table_len(n, s.arity, side, &s.name)?;
                    let mut table = Vec::with_capacity(len);
                    for i in 0..len {
                        let v = m
                            .apply(&s.name, &tuple_of(i, n, s.arity))
                            .filter(|&v| v < n)
                            .ok_or_else(|| missing(&s.name))?;
                        table.push(v as u8);
                    }
                    out.funs.push(table);
                }
                SymbolKind::Constant => {
                    let c = m.constant(&s.name).filter(|&c| c < n).ok_or_else(|| missing(&s.name))?;
                    out.consts.push(c as u8);
                }
            }
        }
        Ok(out)
    }
}

/// Odometer over `len^arity` index tuples.
fn next_tuple(t: &mut [usize], len: usize) -> bool {
    for slot in t.iter_mut().rev() {
        *slot += 1;
        if *slot < len {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Called with each `(fwd, bwd)` response; `Ok(true)` stops the walk.
type Visitor<'a, E> = dyn FnMut(&[u8], &[u8]) -> Result<bool, E> + 'a;

impl Arena {
    pub(crate) fn new(m1: &FiniteStructure, m2: &FiniteStructure, vocab: &Vocabulary) -> Result<Arena, GameError> {
        let s1 = Side::compile(m1, vocab, 1)?;
        let s2 = Side::compile(m2, vocab, 2)?;
        let positive = |k: SymbolKind| vocab.iter().filter(move |s| s.kind == k);
        Ok(Arena {
            s1,
            s2,
            rel_arity: positive(SymbolKind::Relation)
                .filter(|s| s.arity > 0)
                .map(|s| s.arity)
                .collect(),
            fun_arity: positive(SymbolKind::Function).map(|s| s.arity).collect(),
        })
    }

    pub(crate) fn n1(&self) -> usize {
        self.s1.n
    }

    pub(crate) fn n2(&self) -> usize {
        self.s2.n
    }

    /// The empty map preserves the variable-free atoms.
    pub(crate) fn root_ok(&self) -> bool {
        self.s1.nullary == self.s2.nullary
    }

    pub(crate) fn empty_state(&self) -> (Vec<u8>, Vec<u8>) {
        (vec![NONE; self.s1.n], vec![NONE; self.s2.n])
    }

    /// Can `a ↦ b` be added to the (already legal) map `fwd`/`bwd`?
    pub(crate) fn can_add(&self, fwd: &[u8], bwd: &[u8], a: usize, b: usize) -> bool {
        if fwd[a] != NONE || bwd[b] != NONE {
            return false;
        }
        let (s1, s2) = (&self.s1, &self.s2);
        for (&c1, &c2) in s1.consts.iter().zip(&s2.consts) {
            if (c1 as usize == a) != (c2 as usize == b) {
                return false;
            }
        }
        let mut xs: Vec<(usize, usize)> = fwd
            .iter()
            .enumerate()
            .filter(|(_, &y)| y != NONE)
            .map(|(x, &y)| (x, y as usize))
            .collect();
        let old = xs.len();
        xs.push((a, b));
        let len = xs.len();
        let mut t = Vec::new();
        for (r, &arity) in self.rel_arity.iter().enumerate() {
            t.clear();
            t.resize(arity, 0);
            loop {
                if t.contains(&old) {
                    let i1 = t.iter().fold(0, |acc, &i| acc * s1.n + xs[i].0);
                    let i2 = t.iter().fold(0, |acc, &i| acc * s2.n + xs[i].1);
                    if s1.rels[r][i1] != s2.rels[r][i2] {
                        return false;
                    }
                }
                if !next_tuple(&mut t, len) {
                    break;
                }
            }
        }
        let img = |v1: usize| {
            if v1 == a {
                Some(b)
            } else {
                Some(fwd[v1]).filter(|&y| y != NONE).map(usize::from)
            }
        };
        let pre = |v2: usize| {
            if v2 == b {
                Some(a)
            } else {
                Some(bwd[v2]).filter(|&x| x != NONE).map(usize::from)
            }
        };
        for (g, &arity) in self.fun_arity.iter().enumerate() {
            t.clear();
            t.resize(arity, 0);
            loop {
                let i1 = t.iter().fold(0, |acc, &i| acc * s1.n + xs[i].0);
                let i2 = t.iter().fold(0, |acc, &i| acc * s2.n + xs[i].1);
                let (v1, v2) = (s1.funs[g][i1] as usize, s2.funs[g][i2] as usize);
                if t.contains(&old) {
                    match (img(v1), pre(v2)) {
                        (Some(y), Some(_)) if y == v2 => {}
                        (None, None) => {}
                        _ => return false,
                    }
                } else if (v1 == a) != (v2 == b) {
                    return false;
                }
                if !next_tuple(&mut t, len) {
                    break;
                }
            }
        }
        true
    }

    pub(crate) fn state_of(&self, f: &PartialMap) -> Result<(Vec<u8>, Vec<u8>), GameError> {
        let (mut fwd, mut bwd) = self.empty_state();
        for (a, b) in f.pairs() {
            if a >= self.s1.n {
                return Err(GameError::ElementOutOfRange { side: 1, elem: a });
            }
            if b >= self.s2.n {
                return Err(GameError::ElementOutOfRange { side: 2, elem: b });
            }
            fwd[a] = b as u8;
            bwd[b] = a as u8;
        }
        Ok((fwd, bwd))
    }

    /// Every minimal legal extension of the map covering `a_new` (unmatched
    /// side-1 elements) and `b_new` (unmatched side-2 elements). The
    /// callback returns `Ok(true)` to stop early.
    pub(crate) fn for_each_response<E>(
        &self,
        fwd: &mut Vec<u8>,
        bwd: &mut Vec<u8>,
        a_new: &[usize],
        b_new: &[usize],
        visit: &mut Visitor<'_, E>,
    ) -> Result<bool, E> {
        if let Some((&a, rest)) = a_new.split_first() {
            for b in 0..self.s2.n {
                if self.can_add(fwd, bwd, a, b) {
                    fwd[a] = b as u8;
                    bwd[b] = a as u8;
                    let stop = self.for_each_response(fwd, bwd, rest, b_new, visit);
                    fwd[a] = NONE;
                    bwd[b] = NONE;
                    if stop? {
                        return Ok(true);
                    }
                }
            }
            return Ok(false);
        }
        match b_new.iter().position(|&b| bwd[b] == NONE) {
            None => visit(fwd, bwd),
            Some(i) => {
                let b = b_new[i];
                let rest = &b_new[i + 1..];
                for a in 0..self.s1.n {
                    if self.can_add(fwd, bwd, a, b) {
                        fwd[a] = b as u8;
                        bwd[b] = a as u8;
                        let stop = self.for_each_response(fwd, bwd, &[], rest, visit);
                        fwd[a] = NONE;
                        bwd[b] = NONE;
                        if stop? {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
        }
    }

    /// Nonempty challenges on unmatched elements within budget `k`,
    /// largest first, each as (side-1 part, side-2 part).
    pub(crate) fn challenges(&self, fwd: &[u8], bwd: &[u8], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let fresh: Vec<(u8, usize)> = (0..self.s1.n)
            .filter(|&x| fwd[x] == NONE)
            .map(|x| (1, x))
            .chain((0..self.s2.n).filter(|&y| bwd[y] == NONE).map(|y| (2, y)))
            .collect();
        let mut out = Vec::new();
        for size in (1..=k.min(fresh.len())).rev() {
            let mut idx: Vec<usize> = (0..size).collect();
            loop {
                let pick = idx.iter().map(|&i| fresh[i]);
                out.push((
                    pick.clone().filter(|p| p.0 == 1).map(|p| p.1).collect(),
                    pick.filter(|p| p.0 == 2).map(|p| p.1).collect(),
                ));
                // next combination
                let mut i = size;
                while i > 0 && idx[i - 1] == fresh.len() - size + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for j in i..size {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        out
    }
}

pub(crate) fn map_of(fwd: &[u8]) -> PartialMap {
    PartialMap {
        pairs: fwd
            .iter()
            .enumerate()
            .filter(|(_, &y)| y != NONE)
            .map(|(x, &y)| (x, y as usize))
            .collect(),
    }
}

/// Memoized game search over `(rounds remaining, map)`.
pub(crate) struct Solver {
    pub(crate) arena: Arc<Arena>,
    pub(crate) k: usize,
    memo: HashMap<(usize, Vec<u8>), bool>,
    pub(crate) nodes: usize,
    opts: SolveOptions,
}

impl Solver {
    pub(crate) fn new(arena: Arc<Arena>, k: usize, opts: SolveOptions) -> Self {
        Solver {
            arena,
            k,
            memo: HashMap::new(),
            nodes: 0,
            opts,
        }
    }

    /// Does the protagonist win with `rounds` rounds left from this map?
    pub(crate) fn wins(&mut self, rounds: usize, fwd: &[u8], bwd: &[u8]) -> Result<bool, CapReached> {
        if rounds == 0 {
            return Ok(true);
        }
        if self.opts.memoize {
            if let Some(&v) = self.memo.get(&(rounds, fwd.to_vec())) {
                return Ok(v);
            }
        }
        self.nodes += 1;
        if self.nodes > self.opts.node_cap {
            return Err(CapReached);
        }
        let arena = self.arena.clone();
        let mut value = true;
        for (a_new, b_new) in arena.challenges(fwd, bwd, self.k) {
            if !self.answer(rounds, fwd, bwd, &a_new, &b_new)?.is_some() {
                value = false;
                break;
            }
        }
        if self.opts.memoize {
            self.memo.insert((rounds, fwd.to_vec()), value);
        }
        Ok(value)
    }

    /// First minimal response leading to a protagonist win, if any.
    pub(crate) fn answer(
        &mut self,
        rounds: usize,
        fwd: &[u8],
        bwd: &[u8],
        a_new: &[usize],
        b_new: &[usize],
    ) -> Result<Option<Vec<u8>>, CapReached> {
        let arena = self.arena.clone();
        let (mut f, mut g) = (fwd.to_vec(), bwd.to_vec());
        let mut found = None;
        arena.for_each_response(&mut f, &mut g, a_new, b_new, &mut |f2, g2| {
            if self.wins(rounds - 1, f2, g2)? {
                found = Some(f2.to_vec());
                Ok(true)
            } else {
                Ok(false)
            }
        })?;
        Ok(found)
    }

    pub(crate) fn root(&mut self) -> Result<bool, CapReached> {
        if !self.arena.root_ok() {
            return Ok(false);
        }
        let (fwd, bwd) = self.arena.empty_state();
        self.wins(self.k + 1, &fwd, &bwd)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("challenge {challenge} costs more than the budget {k}")]
    Budget { challenge: Challenge, k: usize },
    #[error("round {round} is past the last round {k}")]
    Round { round: usize, k: usize },
    #[error("node cap reached while consulting the strategy")]
    Cap,
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The canonical protagonist strategy for `Γ_k` on one pair: the first
/// minimal response (in engine order) that keeps a winning position.
pub struct Strategy {
    solver: Solver,
}

impl Strategy {
    pub fn new(
        m1: &FiniteStructure,
        m2: &FiniteStructure,
        chain: &VocabularyChain,
        k: usize,
        opts: SolveOptions,
    ) -> Result<Strategy, GameError> {
        let arena = Arc::new(Arena::new(m1, m2, chain.at_budget(k))?);
        Ok(Strategy {
            solver: Solver::new(arena, k, opts),
        })
    }

    pub fn k(&self) -> usize {
        self.solver.k
    }

    /// Does the protagonist win from `f` when `round` rounds have been played?
    pub fn wins_from(&mut self, round: usize, f: &PartialMap) -> Result<bool, StrategyError> {
        let k = self.solver.k;
        if round > k + 1 {
            return Err(StrategyError::Round { round, k });
        }
        if !self.solver.arena.root_ok() {
            return Ok(false);
        }
        let (fwd, bwd) = self.solver.arena.state_of(f)?;
        self.solver
            .wins(k + 1 - round, &fwd, &bwd)
            .map_err(|_| StrategyError::Cap)
    }

    /// Reply to `ch` in round `round` from `f`; `None` if every legal reply
    /// loses (or there is none).
    pub fn respond(
        &mut self,
        round: usize,
        f: &PartialMap,
        ch: &Challenge,
    ) -> Result<Option<PartialMap>, StrategyError> {
        let k = self.solver.k;
        if round > k {
            return Err(StrategyError::Round { round, k });
        }
        if ch.cost() > k {
            return Err(StrategyError::Budget {
                challenge: ch.clone(),
                k,
            });
        }
        let arena = self.solver.arena.clone();
        if let Some(&a) = ch.a.iter().find(|&&a| a >= arena.n1()) {
            return Err(GameError::ElementOutOfRange { side: 1, elem: a }.into());
        }
        if let Some(&b) = ch.b.iter().find(|&&b| b >= arena.n2()) {
            return Err(GameError::ElementOutOfRange { side: 2, elem: b }.into());
        }
        let (fwd, bwd) = arena.state_of(f)?;
        let fresh = ch.fresh_part(f);
        let a_new: Vec<usize> = fresh.a.into_iter().collect();
        let b_new: Vec<usize> = fresh.b.into_iter().collect();
        if a_new.is_empty() && b_new.is_empty() {
            let keep = self.wins_from(round + 1, f)?;
            return Ok(keep.then(|| f.clone()));
        }
        let reply = self
            .solver
            .answer(k + 1 - round, &fwd, &bwd, &a_new, &b_new)
            .map_err(|_| StrategyError::Cap)?;
        Ok(reply.map(|r| map_of(&r)))
    }
}

/// Minimal legal responses to `ch` from `f` over `vocab`: extensions that
/// cover the challenge, where every new pair has its first coordinate in
/// `A` or its second in `B`. Empty when the protagonist is stuck.
pub fn legal_responses(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    vocab: &Vocabulary,
    f: &PartialMap,
    ch: &Challenge,
) -> Result<Vec<PartialMap>, GameError> {
    let arena = Arena::new(m1, m2, vocab)?;
    let (mut fwd, mut bwd) = arena.state_of(f)?;
    if let Some(&a) = ch.a.iter().find(|&&a| a >= arena.n1()) {
        return Err(GameError::ElementOutOfRange { side: 1, elem: a });
    }
    if let Some(&b) = ch.b.iter().find(|&&b| b >= arena.n2()) {
        return Err(GameError::ElementOutOfRange { side: 2, elem: b });
    }
    if !is_partial_isomorphism(m1, m2, vocab, f)? {
        return Ok(Vec::new());
    }
    let fresh = ch.fresh_part(f);
    let a_new: Vec<usize> = fresh.a.into_iter().collect();
    let b_new: Vec<usize> = fresh.b.into_iter().collect();
    let mut out = Vec::new();
    arena
        .for_each_response::<()>(&mut fwd, &mut bwd, &a_new, &b_new, &mut |f2, _| {
            out.push(map_of(f2));
            Ok(false)
        })
        .expect("collecting replies cannot fail");
    Ok(out)
}

/// Does `f` preserve every strictly atomic `vocab`-formula with arguments
/// in its domain? Checked by evaluating each atom on both sides, with no
/// shared code with the solver.
pub fn is_partial_isomorphism(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    vocab: &Vocabulary,
    f: &PartialMap,
) -> Result<bool, GameError> {
    let dom = f.domain();
    let vars: Vec<String> = (0..dom.len()).map(|i| format!("x{i}")).collect();
    let v1: Valuation = vars.iter().cloned().zip(dom.iter().copied()).collect();
    let v2: Valuation = vars
        .iter()
        .cloned()
        .zip(dom.iter().map(|&a| f.get(a).unwrap()))
        .collect();
    for atom in strict_atoms(vocab, &vars) {
        let t1 = eval(m1, &atom, &v1, None).map_err(|e| GameError::Eval(e.to_string()))?;
        let t2 = eval(m2, &atom, &v2, None).map_err(|e| GameError::Eval(e.to_string()))?;
        if t1 != t2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solve `Γ_k` over `τ_k` (the top level when `k` exceeds the chain).
pub fn solve_game(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    k: usize,
) -> Result<SolveResult, GameError> {
    solve_game_with(m1, m2, chain, k, SolveOptions::default())
}

pub fn solve_game_with(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    k: usize,
    opts: SolveOptions,
) -> Result<SolveResult, GameError> {
    let arena = Arc::new(Arena::new(m1, m2, chain.at_budget(k))?);
    let mut solver = Solver::new(arena, k, opts);
    let verdict = match solver.root() {
        Err(CapReached) => Verdict::Undecided,
        Ok(true) => match certificate::protagonist_cert(&mut solver) {
            Ok(c) => Verdict::Protagonist(c),
            Err(CapReached) => Verdict::Undecided,
        },
        Ok(false) => match certificate::antagonist_cert(&mut solver) {
            Ok(c) => Verdict::Antagonist(c),
            Err(CapReached) => Verdict::Undecided,
        },
    };
    Ok(SolveResult {
        k,
        verdict,
        nodes: solver.nodes,
    })
}

/// The winner alone, without building a certificate.
pub fn game_winner(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    k: usize,
    opts: SolveOptions,
) -> Result<(Option<Winner>, usize), GameError> {
    let arena = Arc::new(Arena::new(m1, m2, chain.at_budget(k))?);
    let mut solver = Solver::new(arena, k, opts);
    let w = match solver.root() {
        Ok(true) => Some(Winner::Protagonist),
        Ok(false) => Some(Winner::Antagonist),
        Err(CapReached) => None,
    };
    Ok((w, solver.nodes))
}

/// Relativized transfer along `f`: compares `φ_dom(f)` at `v` in `M¹` with
/// `φ_range(f)` at `f∘v` in `M²`.
pub fn check_ss1(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    f: &PartialMap,
    phi: &crate::formulas::Formula,
    v: &Valuation,
) -> Result<bool, GameError> {
    let mut image = Valuation::new();
    for (name, &x) in v {
        let y = f.get(x).ok_or(GameError::NotInDomain(x))?;
        image.insert(name.clone(), y);
    }
    let t1 = eval(m1, phi, v, Some(&f.domain())).map_err(|e| GameError::Eval(e.to_string()))?;
    let t2 = eval(m2, phi, &image, Some(&f.range())).map_err(|e| GameError::Eval(e.to_string()))?;
    Ok(t1 == t2)
}
