//! Chain scripts: one operation per line.
//!
//! ```text
//! window <c> <n0>            active window for mark/merge (default 0 0)
//! extend <1|2> all:<set> [sigma=K]
//! extend <1|2> <set>;<set>;... [sigma=K]
//! mark                       push the current approximation on the chain
//! merge <sigma_target>       replace the current approximation by the merge
//! check <r> <max_size>       partial elementarity at rank r
//! ```
//!
//! Sets are comma-separated element lists; an empty list is an empty set.
//! `//` starts a comment.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use super::{Approximation, BackForth, BackForthError, ElementaryReport, Merge, Side, Window};
use crate::formulas::{enumerate_sentences, Formula};
use crate::structures::Elem;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Step { line: usize, source: BackForthError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sets {
    All(BTreeSet<Elem>),
    PerIndex(Vec<BTreeSet<Elem>>),
}

impl Sets {
    pub fn expand(&self, len: usize) -> Vec<BTreeSet<Elem>> {
        match self {
            Sets::All(s) => vec![s.clone(); len],
            Sets::PerIndex(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOp {
    Window(Window),
    Extend { side: Side, sets: Sets, sigma: usize },
    Mark,
    Merge { sigma_target: usize },
    Check { rank: usize, max_size: usize },
}

fn perr(line: usize, msg: impl Into<String>) -> ScriptError {
    ScriptError::Parse { line, msg: msg.into() }
}

fn num(line: usize, w: Option<&str>, what: &str) -> Result<usize, ScriptError> {
    let w = w.ok_or_else(|| perr(line, format!("missing {what}")))?;
    w.parse().map_err(|_| perr(line, format!("bad {what} `{w}`")))
}

fn set(line: usize, text: &str) -> Result<BTreeSet<Elem>, ScriptError> {
    text.split(',')
        .filter(|w| !w.is_empty())
        .map(|w| w.parse().map_err(|_| perr(line, format!("bad element `{w}`"))))
        .collect()
}

pub fn parse_script(text: &str) -> Result<Vec<(usize, ScriptOp)>, ScriptError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split("//").next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let op = match words.next().unwrap() {
            "window" => ScriptOp::Window(Window::new(
                num(line, words.next(), "c")?,
                num(line, words.next(), "n0")?,
            )),
            "extend" => {
                let side = num(line, words.next(), "side")?;
                let side = Side::from_number(side as u8)
                    .filter(|_| side <= 2)
                    .ok_or_else(|| perr(line, "side must be 1 or 2"))?;
                let spec = words.next().ok_or_else(|| perr(line, "missing sets"))?;
                let sets = match spec.strip_prefix("all:") {
                    Some(rest) => Sets::All(set(line, rest)?),
                    None => Sets::PerIndex(spec.split(';').map(|s| set(line, s)).collect::<Result<_, _>>()?),
                };
                let sigma = match words.next() {
                    None => 0,
                    Some(w) => num(line, w.strip_prefix("sigma="), "sigma")?,
                };
                ScriptOp::Extend { side, sets, sigma }
            }
            "mark" => ScriptOp::Mark,
            "merge" => ScriptOp::Merge {
                sigma_target: num(line, words.next(), "sigma target")?,
            },
            "check" => ScriptOp::Check {
                rank: num(line, words.next(), "rank")?,
                max_size: num(line, words.next(), "max size")?,
            },
            w => return Err(perr(line, format!("unknown operation `{w}`"))),
        };
        if let Some(extra) = words.next() {
            return Err(perr(line, format!("unexpected `{extra}`")));
        }
        ops.push((line, op));
    }
    Ok(ops)
}

/// Sentences of rank `<= r` up to `max_size`, plus the matrix under each
/// leading quantifier as a one-variable formula.
pub fn check_formulas(bf: &BackForth<'_>, r: usize, max_size: usize) -> Vec<Formula> {
    let vocab = bf.spec().chain.at_budget(r);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in enumerate_sentences(vocab, r, r.max(1)).up_to_size(max_size) {
        let body = match &s {
            Formula::Exists(_, b) | Formula::Forall(_, b) => Some((**b).clone()),
            _ => None,
        };
        for f in std::iter::once(s).chain(body) {
            if seen.insert(f.clone()) {
                out.push(f);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub op: ScriptOp,
    pub window: Window,
    pub before: Approximation,
    pub after: Approximation,
    /// The chain that was merged, with the merge itself.
    pub merge: Option<(Vec<Approximation>, Merge)>,
    pub check: Option<ElementaryReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptReport {
    pub steps: Vec<Step>,
    pub result: Approximation,
}

pub fn run_script(bf: &BackForth<'_>, ops: &[(usize, ScriptOp)]) -> Result<ScriptReport, ScriptError> {
    let mut window = Window::new(0, 0);
    let mut s = bf.empty_approx();
    let mut chain: Vec<Approximation> = Vec::new();
    let mut steps = Vec::new();
    for (line, op) in ops {
        let line = *line;
        let step_err = |source| ScriptError::Step { line, source };
        let before = s.clone();
        let mut merge = None;
        let mut check = None;
        match op {
            ScriptOp::Window(w) => window = *w,
            ScriptOp::Extend { side, sets, sigma } => {
                let w = sets.expand(bf.window_len());
                s = bf.extend(&s, *side, &w, *sigma).map_err(step_err)?;
            }
            ScriptOp::Mark => chain.push(s.clone()),
            ScriptOp::Merge { sigma_target } => {
                let m = bf.merge_chain(&chain, *sigma_target, window).map_err(step_err)?;
                s = m.approx.clone();
                merge = Some((std::mem::take(&mut chain), m));
            }
            ScriptOp::Check { rank, max_size } => {
                let phis = check_formulas(bf, *rank, *max_size);
                check = Some(bf.check_partial_elementary(&s, &phis, *rank).map_err(step_err)?);
            }
        }
        steps.push(Step {
            line,
            op: op.clone(),
            window,
            before,
            after: s.clone(),
            merge,
            check,
        });
    }
    Ok(ScriptReport { steps, result: s })
}
