//! Slaloms over a finite window: capacity-`g` value cells that must catch
//! every function of a family, everywhere or only on the active window of
//! a `k`-sequence.

mod family_file;

pub use family_file::{parse_family, print_family, FamilyFile, FamilyParseError};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::filterlab::KSeqSpec;

pub const DEFAULT_EXACT_BOUND: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlalomError {
    #[error("function {index} has length {len}, window is {window}")]
    Length { index: usize, len: usize, window: usize },
    #[error("function {index} takes value {value} at {n}, bound is {bound}")]
    Value {
        index: usize,
        n: usize,
        value: usize,
        bound: usize,
    },
    #[error("capacity has length {len}, window is {window}")]
    Capacity { len: usize, window: usize },
    #[error("slalom {index} does not fit the window or its capacity")]
    Slalom { index: usize },
    #[error("family of {size} functions exceeds the exhaustive bound {bound}")]
    TooLarge { size: usize, bound: usize },
}

/// Functions `[0, N) -> [0, V)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowFunctionFamily {
    window: usize,
    bound: usize,
    functions: Vec<Vec<usize>>,
}

impl WindowFunctionFamily {
    pub fn new(window: usize, bound: usize, functions: Vec<Vec<usize>>) -> Result<Self, SlalomError> {
        for (index, f) in functions.iter().enumerate() {
            if f.len() != window {
                return Err(SlalomError::Length {
                    index,
                    len: f.len(),
                    window,
                });
            }
            if let Some((n, &value)) = f.iter().enumerate().find(|(_, &v)| v >= bound) {
                return Err(SlalomError::Value { index, n, value, bound });
            }
        }
        Ok(WindowFunctionFamily {
            window,
            bound,
            functions,
        })
    }

    /// Every function `[0, window) -> [0, bound)`, in lexicographic order.
    pub fn all(window: usize, bound: usize) -> Self {
        let mut functions = vec![Vec::new()];
        for _ in 0..window {
            functions = functions
                .into_iter()
                .flat_map(|f| {
                    (0..bound).map(move |v| {
                        let mut f = f.clone();
                        f.push(v);
                        f
                    })
                })
                .collect();
        }
        WindowFunctionFamily {
            window,
            bound,
            functions,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn functions(&self) -> &[Vec<usize>] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    fn check_capacity(&self, g: &[usize]) -> Result<(), SlalomError> {
        if g.len() != self.window {
            return Err(SlalomError::Capacity {
                len: g.len(),
                window: self.window,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slalom {
    pub capacity: Vec<usize>,
    pub cells: Vec<BTreeSet<usize>>,
}

impl Slalom {
    pub fn catches(&self, eta: &[usize], n: usize) -> bool {
        self.cells[n].contains(&eta[n])
    }

    fn fits(&self, window: usize) -> bool {
        self.capacity.len() == window
            && self.cells.len() == window
            && self.cells.iter().zip(&self.capacity).all(|(c, &g)| c.len() <= g)
    }
}

impl fmt::Display for Slalom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .cells
            .iter()
            .map(|c| format!("{{{}}}", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        f.write_str(&cells.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverMode {
    Everywhere,
    /// Only the active window `{n >= n0 : k_n > c}` must be caught.
    Filtered {
        c: usize,
        n0: usize,
        kseq: KSeqSpec,
    },
}

impl CoverMode {
    pub fn required(&self, n: usize) -> bool {
        match self {
            CoverMode::Everywhere => true,
            CoverMode::Filtered { c, n0, kseq } => n >= *n0 && kseq.value(n) > *c,
        }
    }

    pub fn required_set(&self, window: usize) -> Vec<usize> {
        (0..window).filter(|&n| self.required(n)).collect()
    }
}

impl fmt::Display for CoverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverMode::Everywhere => f.write_str("everywhere"),
            CoverMode::Filtered { c, n0, .. } => write!(f, "filtered:c={c},n0={n0}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverCheck {
    /// Index of a catching slalom for each function.
    Covered(Vec<usize>),
    /// `eta` escapes every slalom; `index` is where it escapes the first.
    Uncovered { eta: usize, index: Option<usize> },
}

impl CoverCheck {
    pub fn is_covered(&self) -> bool {
        matches!(self, CoverCheck::Covered(_))
    }
}

pub fn check_cover(h: &WindowFunctionFamily, family: &[Slalom], mode: &CoverMode) -> Result<CoverCheck, SlalomError> {
    if let Some(index) = family.iter().position(|s| !s.fits(h.window)) {
        return Err(SlalomError::Slalom { index });
    }
    let req = mode.required_set(h.window);
    let mut witnesses = Vec::with_capacity(h.len());
    for (i, eta) in h.functions.iter().enumerate() {
        match family.iter().position(|s| req.iter().all(|&n| s.catches(eta, n))) {
            Some(j) => witnesses.push(j),
            None => {
                let index = family
                    .first()
                    .and_then(|s| req.iter().copied().find(|&n| !s.catches(eta, n)));
                return Ok(CoverCheck::Uncovered { eta: i, index });
            }
        }
    }
    Ok(CoverCheck::Covered(witnesses))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasible {
    pub index: usize,
    /// `η(index)` for every function, in family order.
    pub values: Vec<usize>,
}

fn distinct_at(functions: &[&Vec<usize>], n: usize) -> BTreeSet<usize> {
    functions.iter().map(|f| f[n]).collect()
}

/// Union of values per cell, cut down to the smallest `g(n)` values.
fn truncated(functions: &[&Vec<usize>], window: usize, g: &[usize]) -> Slalom {
    Slalom {
        capacity: g.to_vec(),
        cells: (0..window)
            .map(|n| distinct_at(functions, n).into_iter().take(g[n]).collect())
            .collect(),
    }
}

fn single(functions: &[&Vec<usize>], window: usize, g: &[usize], mode: &CoverMode) -> Result<Slalom, Infeasible> {
    for n in 0..window {
        if mode.required(n) && distinct_at(functions, n).len() > g[n] {
            return Err(Infeasible {
                index: n,
                values: functions.iter().map(|f| f[n]).collect(),
            });
        }
    }
    Ok(truncated(functions, window, g))
}

/// The union-of-values slalom. Outside the required indices cells keep the
/// smallest `g(n)` values.
pub fn single_slalom_cover(
    h: &WindowFunctionFamily,
    g: &[usize],
    mode: &CoverMode,
) -> Result<Result<Slalom, Infeasible>, SlalomError> {
    h.check_capacity(g)?;
    let fs: Vec<&Vec<usize>> = h.functions.iter().collect();
    Ok(single(&fs, h.window, g, mode))
}

fn fits_with(group: &[&Vec<usize>], eta: &[usize], req: &[usize], g: &[usize]) -> bool {
    req.iter().all(|&n| {
        let mut values = distinct_at(group, n);
        values.insert(eta[n]);
        values.len() <= g[n]
    })
}

/// First fit in input order. An unsatisfiable function (which can only
/// happen when some required `g(n)` is 0) gets a slalom of its own that
/// still fails `check_cover`.
pub fn greedy_cover(h: &WindowFunctionFamily, g: &[usize], mode: &CoverMode) -> Result<Vec<Slalom>, SlalomError> {
    h.check_capacity(g)?;
    let req = mode.required_set(h.window);
    let mut groups: Vec<Vec<&Vec<usize>>> = Vec::new();
    for eta in &h.functions {
        match groups.iter_mut().find(|grp| fits_with(grp, eta, &req, g)) {
            Some(grp) => grp.push(eta),
            None => groups.push(vec![eta]),
        }
    }
    Ok(groups
        .iter()
        .map(|grp| single(grp, h.window, g, mode).unwrap_or_else(|_| truncated(grp, h.window, g)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCover {
    /// `None` when some function alone cannot be caught.
    pub size: Option<usize>,
    pub family: Vec<Slalom>,
}

/// Smallest family, by branch and bound over set partitions of `H`.
pub fn min_cover_exact(
    h: &WindowFunctionFamily,
    g: &[usize],
    mode: &CoverMode,
    bound: usize,
) -> Result<ExactCover, SlalomError> {
    h.check_capacity(g)?;
    if h.len() > bound {
        return Err(SlalomError::TooLarge { size: h.len(), bound });
    }
    let req = mode.required_set(h.window);
    if h.functions.iter().any(|eta| !fits_with(&[], eta, &req, g)) {
        return Ok(ExactCover {
            size: None,
            family: Vec::new(),
        });
    }
    let greedy = greedy_cover(h, g, mode)?;
    let mut best: Option<Vec<Vec<usize>>> = None;
    let mut best_len = greedy.len();
    let mut parts: Vec<Vec<usize>> = Vec::new();
    fn search(
        i: usize,
        h: &WindowFunctionFamily,
        req: &[usize],
        g: &[usize],
        parts: &mut Vec<Vec<usize>>,
        best: &mut Option<Vec<Vec<usize>>>,
        best_len: &mut usize,
    ) {
        let limit = if best.is_some() { *best_len - 1 } else { *best_len };
        if parts.len() > limit {
            return;
        }
        if i == h.functions.len() {
            *best_len = parts.len();
            *best = Some(parts.clone());
            return;
        }
        let eta = &h.functions[i];
        for p in 0..parts.len() {
            let group: Vec<&Vec<usize>> = parts[p].iter().map(|&j| &h.functions[j]).collect();
            if fits_with(&group, eta, req, g) {
                parts[p].push(i);
                search(i + 1, h, req, g, parts, best, best_len);
                parts[p].pop();
            }
        }
        parts.push(vec![i]);
        search(i + 1, h, req, g, parts, best, best_len);
        parts.pop();
    }
    search(0, h, &req, g, &mut parts, &mut best, &mut best_len);
    let parts = best.expect("greedy size is attainable");
    let family = parts
        .iter()
        .map(|p| {
            let fs: Vec<&Vec<usize>> = p.iter().map(|&j| &h.functions[j]).collect();
            single(&fs, h.window, g, mode).expect("parts are feasible")
        })
        .collect::<Vec<_>>();
    Ok(ExactCover {
        size: Some(family.len()),
        family,
    })
}
