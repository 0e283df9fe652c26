//! Approximations: one partial play per index, the protagonist following
//! the canonical winning strategy of `Γ^n_{k_n}`. Filter-large sets are
//! rendered as active windows `W(c, n0) = {n ∈ [n0, N) : k_n > c}`.

mod script;
mod transcript;

pub use script::{check_formulas, parse_script, run_script, ScriptError, ScriptOp, ScriptReport, Sets, Step};
pub use transcript::{parse_transcript, print_transcript, spec_digest, Transcript, TranscriptError};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Mutex;

use thiserror::Error;

use crate::efgame::{check_ss1, Challenge, GameError, PartialMap, SolveOptions, Strategy, StrategyError};
use crate::formulas::{Formula, Valuation};
use crate::structures::{Elem, ProblemSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackForthError {
    #[error("k-sequence has {len} entries, window is {window}")]
    KSeqLength { len: usize, window: usize },
    #[error("index {index}: expected {expected} entries, found {found}")]
    Shape {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("index {index}: challenge of size {size} exceeds k = {k}")]
    ChallengeBudget { index: usize, size: usize, k: usize },
    #[error("index {index}: element {elem} is outside structure {side}")]
    ElementOutOfRange { index: usize, side: u8, elem: Elem },
    #[error("index {index}, round {round}: strategy replay failed: {reason}")]
    Replay { index: usize, round: usize, reason: String },
    #[error("chain is not increasing between positions {at} and {next} on the window")]
    NotIncreasing { at: usize, next: usize },
    #[error("empty chain")]
    EmptyChain,
    #[error("the active window {0} is empty")]
    EmptyWindow(Window),
    #[error("index {index}: k = {k} is below the {needed} rounds needed")]
    Shortfall { index: usize, k: usize, needed: usize },
    #[error("evaluation failed at index {index}: {reason}")]
    Eval { index: usize, reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Parameters of the active window `{n ∈ [n0, N) : k_n > c}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    pub c: usize,
    pub n0: usize,
}

impl Window {
    pub fn new(c: usize, n0: usize) -> Self {
        Window { c, n0 }
    }

    pub fn indices(&self, k: &[usize]) -> Vec<usize> {
        (self.n0..k.len()).filter(|&n| k[n] > self.c).collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W(c={},n0={})", self.c, self.n0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Round {
    pub challenge: Challenge,
    pub response: PartialMap,
}

/// A play prefix `g_{s,n}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Play {
    pub rounds: Vec<Round>,
}

impl Play {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// The last protagonist map, `∅` before the first round.
    pub fn map(&self) -> PartialMap {
        self.rounds.last().map(|r| r.response.clone()).unwrap_or_default()
    }

    pub fn is_prefix_of(&self, other: &Play) -> bool {
        self.len() <= other.len() && self.rounds[..] == other.rounds[..self.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Approximation {
    pub plays: Vec<Play>,
}

impl Approximation {
    pub fn rounds(&self, n: usize) -> usize {
        self.plays[n].len()
    }

    pub fn map(&self, n: usize) -> PartialMap {
        self.plays[n].map()
    }
}

/// Side of the challenge in an extension step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub fn from_number(x: u8) -> Option<Side> {
        match x {
            1 => Some(Side::One),
            2 => Some(Side::Two),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Side::One => 1,
            Side::Two => 2,
        }
    }
}

/// `slack(n) >= sigma` on every index of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackWitness {
    pub sigma: usize,
    pub window: Window,
}

/// Problem plus `k`-sequence, with the per-index canonical strategies
/// built on first use.
pub struct BackForth<'a> {
    spec: &'a ProblemSpec,
    k: Vec<usize>,
    strategies: Vec<Mutex<Option<Strategy>>>,
    opts: SolveOptions,
}

impl<'a> BackForth<'a> {
    pub fn new(spec: &'a ProblemSpec, k: Vec<usize>, opts: SolveOptions) -> Result<Self, BackForthError> {
        if k.len() != spec.pairs.len() {
            return Err(BackForthError::KSeqLength {
                len: k.len(),
                window: spec.pairs.len(),
            });
        }
        Ok(BackForth {
            spec,
            strategies: (0..k.len()).map(|_| Mutex::new(None)).collect(),
            k,
            opts,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn window_len(&self) -> usize {
        self.k.len()
    }

    pub fn active(&self, w: Window) -> Vec<usize> {
        w.indices(&self.k)
    }

    pub fn slack(&self, s: &Approximation, n: usize) -> isize {
        self.k[n] as isize - s.rounds(n) as isize
    }

    pub fn empty_approx(&self) -> Approximation {
        Approximation {
            plays: vec![Play::default(); self.k.len()],
        }
    }

    /// Largest `σ` with `slack >= σ` on the window; `None` if it is empty.
    pub fn slack_witness(&self, s: &Approximation, w: Window) -> Option<SlackWitness> {
        let sigma = self
            .active(w)
            .into_iter()
            .map(|n| self.slack(s, n).max(0) as usize)
            .min()?;
        Some(SlackWitness { sigma, window: w })
    }

    pub fn witness_holds(&self, s: &Approximation, wit: &SlackWitness) -> bool {
        self.active(wit.window)
            .into_iter()
            .all(|n| self.slack(s, n) >= wit.sigma as isize)
    }

    pub fn leq_ap(&self, s: &Approximation, t: &Approximation, w: Window) -> bool {
        self.active(w).into_iter().all(|n| s.plays[n].is_prefix_of(&t.plays[n]))
    }

    fn respond(&self, n: usize, round: usize, f: &PartialMap, ch: &Challenge) -> Result<PartialMap, BackForthError> {
        let replay = |reason: String| BackForthError::Replay {
            index: n,
            round,
            reason,
        };
        let mut slot = self.strategies[n].lock().unwrap();
        if slot.is_none() {
            let (m1, m2) = self.spec.pair(n);
            *slot = Some(Strategy::new(m1, m2, &self.spec.chain, self.k[n], self.opts)?);
        }
        let strategy = slot.as_mut().unwrap();
        match strategy.respond(round, f, ch) {
            Ok(Some(g)) => Ok(g),
            Ok(None) => Err(replay(format!("no winning reply to {ch} from {f}"))),
            Err(StrategyError::Budget { challenge, k }) => Err(BackForthError::ChallengeBudget {
                index: n,
                size: challenge.cost(),
                k,
            }),
            Err(e) => Err(replay(e.to_string())),
        }
    }

    /// One more round at every index with `slack > sigma`: the challenge
    /// is `w_n` on the given side, answered by the canonical strategy.
    pub fn extend(
        &self,
        s: &Approximation,
        side: Side,
        w: &[BTreeSet<Elem>],
        sigma: usize,
    ) -> Result<Approximation, BackForthError> {
        if w.len() != self.k.len() {
            return Err(BackForthError::Shape {
                index: 0,
                expected: self.k.len(),
                found: w.len(),
            });
        }
        let mut t = s.clone();
        for (n, wn) in w.iter().enumerate() {
            let (m1, m2) = self.spec.pair(n);
            let size = if side == Side::One { m1.size() } else { m2.size() };
            if let Some(&elem) = wn.iter().find(|&&e| e >= size) {
                return Err(BackForthError::ElementOutOfRange {
                    index: n,
                    side: side.number(),
                    elem,
                });
            }
            if self.slack(s, n) <= sigma as isize {
                continue;
            }
            if wn.len() > self.k[n] {
                return Err(BackForthError::ChallengeBudget {
                    index: n,
                    size: wn.len(),
                    k: self.k[n],
                });
            }
            let challenge = match side {
                Side::One => Challenge::new(wn.iter().copied(), []),
                Side::Two => Challenge::new([], wn.iter().copied()),
            };
            let round = s.rounds(n);
            let response = self.respond(n, round, &s.map(n), &challenge)?;
            t.plays[n].rounds.push(Round { challenge, response });
        }
        Ok(t)
    }

    /// Upper bound of a chain `s_0 ⊴ ... ⊴ s_{L-1}` on the window.
    pub fn merge_chain(
        &self,
        chain: &[Approximation],
        sigma_target: usize,
        w: Window,
    ) -> Result<Merge, BackForthError> {
        if chain.is_empty() {
            return Err(BackForthError::EmptyChain);
        }
        for i in 0..chain.len() - 1 {
            if !self.leq_ap(&chain[i], &chain[i + 1], w) {
                return Err(BackForthError::NotIncreasing { at: i, next: i + 1 });
            }
        }
        let last = chain.len() - 1;
        let mut plays = Vec::with_capacity(self.k.len());
        let mut ell = Vec::with_capacity(self.k.len());
        let mut eta = Vec::with_capacity(self.k.len());
        for n in 0..self.k.len() {
            let slacks: Vec<isize> = chain.iter().map(|s| self.slack(s, n)).collect();
            let e = slacks.iter().copied().min().unwrap().max(0).min(sigma_target as isize) as usize;
            // (b) with positions past the end of the chain read as satisfied
            let increasing_to =
                |l: usize| (0..l.min(last)).all(|i| chain[i].plays[n].is_prefix_of(&chain[i + 1].plays[n]));
            let mut best = 0;
            for l in (0..=e.min(last)).rev() {
                let b = increasing_to(l + 1);
                let c = slacks[..=l].iter().all(|&x| x >= e as isize);
                if b && c {
                    best = l;
                    break;
                }
            }
            plays.push(chain[best].plays[n].clone());
            ell.push(best);
            eta.push(e);
        }
        Ok(Merge {
            approx: Approximation { plays },
            ell,
            eta,
        })
    }

    /// Candidates matched by the maps on some nonempty active window,
    /// tagged with the largest such window.
    pub fn h_pairs(
        &self,
        s: &Approximation,
        candidates: &[(Vec<Elem>, Vec<Elem>)],
    ) -> Result<Vec<TaggedPair>, BackForthError> {
        let big = self.k.iter().copied().max().unwrap_or(0);
        let mut out = Vec::new();
        for (i, (h1, h2)) in candidates.iter().enumerate() {
            for h in [h1, h2] {
                if h.len() != self.k.len() {
                    return Err(BackForthError::Shape {
                        index: i,
                        expected: self.k.len(),
                        found: h.len(),
                    });
                }
            }
            let matched: Vec<bool> = (0..self.k.len()).map(|n| s.map(n).get(h1[n]) == Some(h2[n])).collect();
            let mut best: Option<(usize, Window, Vec<usize>)> = None;
            for c in 0..big {
                for n0 in 0..self.k.len() {
                    let win = Window::new(c, n0);
                    let idx = self.active(win);
                    if idx.is_empty() || !idx.iter().all(|&n| matched[n]) {
                        continue;
                    }
                    if best.as_ref().is_none_or(|b| idx.len() > b.0) {
                        best = Some((idx.len(), win, idx));
                    }
                }
            }
            if let Some((_, window, active)) = best {
                out.push(TaggedPair {
                    candidate: i,
                    h1: h1.clone(),
                    h2: h2.clone(),
                    window,
                    active,
                });
            }
        }
        Ok(out)
    }

    /// Relativized transfer along `f_{s,n}` for every formula and every
    /// tuple from the domain, at indices with `slack >= r`.
    pub fn check_partial_elementary(
        &self,
        s: &Approximation,
        formulas: &[Formula],
        r: usize,
    ) -> Result<ElementaryReport, BackForthError> {
        let mut report = ElementaryReport::default();
        for n in 0..self.k.len() {
            if self.slack(s, n) < r as isize {
                continue;
            }
            let (m1, m2) = self.spec.pair(n);
            let f = s.map(n);
            let dom = f.domain();
            for phi in formulas {
                let vars: Vec<String> = phi.free_vars().into_iter().collect();
                let mut idx = vec![0usize; vars.len()];
                if !vars.is_empty() && dom.is_empty() {
                    continue;
                }
                loop {
                    let tuple: Vec<Elem> = idx.iter().map(|&i| dom[i]).collect();
                    let v: Valuation = vars.iter().cloned().zip(tuple.iter().copied()).collect();
                    let ok = check_ss1(m1, m2, &f, phi, &v).map_err(|e| BackForthError::Eval {
                        index: n,
                        reason: e.to_string(),
                    })?;
                    report.checked += 1;
                    if !ok {
                        report.violations.push(ElementaryViolation {
                            index: n,
                            formula: phi.clone(),
                            tuple,
                        });
                    }
                    if !odometer(&mut idx, dom.len()) {
                        break;
                    }
                }
            }
        }
        Ok(report)
    }

    /// Replays every round of `s` against the canonical strategy.
    pub fn verify(&self, s: &Approximation) -> Result<(), BackForthError> {
        if s.plays.len() != self.k.len() {
            return Err(BackForthError::Shape {
                index: 0,
                expected: self.k.len(),
                found: s.plays.len(),
            });
        }
        for (n, play) in s.plays.iter().enumerate() {
            if play.len() > self.k[n] {
                return Err(BackForthError::Replay {
                    index: n,
                    round: play.len(),
                    reason: format!("{} rounds exceed k = {}", play.len(), self.k[n]),
                });
            }
            let mut f = PartialMap::new();
            for (round, r) in play.rounds.iter().enumerate() {
                let g = self.respond(n, round, &f, &r.challenge)?;
                if g != r.response {
                    return Err(BackForthError::Replay {
                        index: n,
                        round,
                        reason: format!("recorded {} but the strategy plays {g}", r.response),
                    });
                }
                f = g;
            }
        }
        Ok(())
    }

    /// Alternating extensions covering `e1` into domains and `e2` into
    /// ranges, one round per entry.
    pub fn assemble(
        &self,
        e1: &[Vec<Elem>],
        e2: &[Vec<Elem>],
        window: Option<Window>,
    ) -> Result<Assembly, BackForthError> {
        let needed = e1.len() + e2.len();
        let window = window.unwrap_or(Window::new(needed.saturating_sub(1), 0));
        let active = self.active(window);
        if active.is_empty() {
            return Err(BackForthError::EmptyWindow(window));
        }
        if let Some(&n) = active.iter().find(|&&n| self.k[n] < needed) {
            return Err(BackForthError::Shortfall {
                index: n,
                k: self.k[n],
                needed,
            });
        }
        for (i, h) in e1.iter().chain(e2).enumerate() {
            if h.len() != self.k.len() {
                return Err(BackForthError::Shape {
                    index: i,
                    expected: self.k.len(),
                    found: h.len(),
                });
            }
        }
        let single = |h: &Vec<Elem>| h.iter().map(|&x| BTreeSet::from([x])).collect::<Vec<_>>();
        let mut s = self.empty_approx();
        for j in 0..e1.len().max(e2.len()) {
            if let Some(h) = e1.get(j) {
                s = self.extend(&s, Side::One, &single(h), 0)?;
            }
            if let Some(h) = e2.get(j) {
                s = self.extend(&s, Side::Two, &single(h), 0)?;
            }
        }
        let mut rows = Vec::new();
        for (j, h) in e1.iter().enumerate() {
            rows.push(TableRow {
                side: Side::One,
                entry: j,
                h1: h.iter().map(|&x| Some(x)).collect(),
                h2: h.iter().enumerate().map(|(n, &x)| s.map(n).get(x)).collect(),
            });
        }
        for (j, h) in e2.iter().enumerate() {
            rows.push(TableRow {
                side: Side::Two,
                entry: j,
                h1: h.iter().enumerate().map(|(n, &y)| s.map(n).preimage(y)).collect(),
                h2: h.iter().map(|&y| Some(y)).collect(),
            });
        }
        Ok(Assembly {
            approx: s,
            window,
            active,
            rows,
        })
    }
}

fn odometer(t: &mut [usize], len: usize) -> bool {
    for slot in t.iter_mut().rev() {
        *slot += 1;
        if *slot < len {
            return true;
        }
        *slot = 0;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub approx: Approximation,
    /// `ℓ_n`: which chain element each index was taken from.
    pub ell: Vec<usize>,
    pub eta: Vec<usize>,
}

impl Merge {
    /// Indices of the window where `ℓ_n >= l_star`.
    pub fn sub_window(&self, active: &[usize], l_star: usize) -> Vec<usize> {
        active.iter().copied().filter(|&n| self.ell[n] >= l_star).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedPair {
    pub candidate: usize,
    pub h1: Vec<Elem>,
    pub h2: Vec<Elem>,
    pub window: Window,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementaryViolation {
    pub index: usize,
    pub formula: Formula,
    pub tuple: Vec<Elem>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementaryReport {
    pub checked: usize,
    pub violations: Vec<ElementaryViolation>,
}

impl ElementaryReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub side: Side,
    pub entry: usize,
    pub h1: Vec<Option<Elem>>,
    pub h2: Vec<Option<Elem>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub approx: Approximation,
    pub window: Window,
    pub active: Vec<usize>,
    pub rows: Vec<TableRow>,
}

impl Assembly {
    /// Every row is defined on the window and agrees with the final maps,
    /// so the induced correspondence is a function and injective there.
    pub fn check_table(&self) -> Result<(), String> {
        for &n in &self.active {
            let f = self.approx.map(n);
            for row in &self.rows {
                match (row.h1[n], row.h2[n]) {
                    (Some(a), Some(b)) if f.get(a) == Some(b) => {}
                    _ => return Err(format!("row {:?}#{} is not matched at index {n}", row.side, row.entry)),
                }
            }
        }
        Ok(())
    }
}
