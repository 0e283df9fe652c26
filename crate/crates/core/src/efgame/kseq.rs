use std::fmt;
use std::sync::Mutex;

use super::{game_winner, GameError, SolveOptions, Winner};
use crate::structures::{FiniteStructure, ProblemSpec, VocabularyChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KValue {
    Exact(usize),
    /// Some `k` above every known protagonist win hit the node cap.
    Undecided,
}

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KValue::Exact(k) => write!(f, "{k}"),
            KValue::Undecided => f.write_str("?"),
        }
    }
}

/// `k_{m,n}` on the window, with total search nodes per index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KSeq {
    pub values: Vec<KValue>,
    pub nodes: Vec<usize>,
}

impl KSeq {
    /// All values, if every index was decided.
    pub fn exact(&self) -> Option<Vec<usize>> {
        self.values
            .iter()
            .map(|v| match v {
                KValue::Exact(k) => Some(*k),
                KValue::Undecided => None,
            })
            .collect()
    }
}

/// Winner of `Γ_k` for each `k <= kmax`; `None` where the cap was hit.
pub fn game_profile(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    kmax: usize,
    opts: SolveOptions,
) -> Result<Vec<Option<Winner>>, GameError> {
    (0..=kmax)
        .map(|k| game_winner(m1, m2, chain, k, opts).map(|r| r.0))
        .collect()
}

/// Largest `k <= n` the protagonist wins, searching down from `n` so no
/// monotonicity in `k` is assumed.
fn k_value(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    n: usize,
    opts: SolveOptions,
) -> Result<(KValue, usize), GameError> {
    let mut nodes = 0;
    for k in (0..=n).rev() {
        let (w, used) = game_winner(m1, m2, chain, k, opts)?;
        nodes += used;
        match w {
            Some(Winner::Protagonist) => return Ok((KValue::Exact(k), nodes)),
            Some(Winner::Antagonist) => {}
            None => return Ok((KValue::Undecided, nodes)),
        }
    }
    // Γ_0 is lost only when a variable-free atom already differs.
    Ok((KValue::Exact(0), nodes))
}

type Slot = Option<Result<(KValue, usize), GameError>>;

/// `k_{m,n}` for every `n` in the window, over `jobs` worker threads.
pub fn compute_k_seq(spec: &ProblemSpec, opts: SolveOptions, jobs: usize) -> Result<KSeq, GameError> {
    let n = spec.pairs.len();
    let slots: Mutex<Vec<Slot>> = Mutex::new(vec![None; n]);
    let next = Mutex::new(0usize);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = {
                    let mut g = next.lock().unwrap();
                    let i = *g;
                    *g += 1;
                    i
                };
                if i >= n {
                    break;
                }
                let (m1, m2) = spec.pair(i);
                let r = k_value(m1, m2, &spec.chain, i, opts);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut values = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    for r in slots.into_inner().unwrap() {
        let (v, used) = r.expect("every index computed")?;
        values.push(v);
        nodes.push(used);
    }
    Ok(KSeq { values, nodes })
}
