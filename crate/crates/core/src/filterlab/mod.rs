//! The filter `D_k` on ω generated by the co-bounded sets and the tails
//! `{n : k_n > c}`, decided exactly on eventually periodic sets.
//!
//! A sequence `k` is given by an explicit prefix and a [`TailClass`]. Every
//! generator `{n : k_n > c}` of such a sequence is eventually periodic, so
//! membership of an eventually periodic set in `D_k` reduces to a
//! finiteness test on one set difference (see [`in_filter`]).

mod setexpr;
mod text;

pub use setexpr::SetExpr;
pub use text::{parse_kseq_spec, parse_set_term, parse_tail, print_kseq_spec, SetTerm, TextError};

use std::fmt;

use thiserror::Error;

use crate::structures::ProblemSpec;

/// One affine rule `slope·n + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term {
    pub slope: usize,
    pub offset: i64,
}

impl Term {
    pub fn eval(self, n: usize) -> i64 {
        self.slope as i64 * n as i64 + self.offset
    }

    fn grows(self) -> bool {
        self.slope > 0
    }

    /// Smallest `n` with `eval(n) > c` for a growing term.
    fn first_above(self, c: usize) -> usize {
        debug_assert!(self.grows());
        let gap = c as i64 - self.offset;
        if gap < 0 {
            0
        } else {
            (gap / self.slope as i64 + 1) as usize
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.slope, self.offset)
    }
}

/// Behavior of `k_n` from the tail start on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TailClass {
    /// Constant value `b`.
    Bounded(usize),
    /// `slope·n + offset` with `slope >= 1`.
    Affine { slope: usize, offset: i64 },
    /// `pattern[(n - anchor) mod len]` evaluated at `n`.
    Periodic(Vec<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TailError {
    #[error("affine tail needs slope >= 1")]
    FlatAffine,
    #[error("periodic tail needs a nonempty pattern")]
    EmptyPattern,
    #[error("tail value at n={0} is negative")]
    Negative(usize),
    #[error("tail anchor {anchor} lies after the prefix end {start}")]
    Anchor { anchor: usize, start: usize },
}

impl TailClass {
    pub fn check(&self) -> Result<(), TailError> {
        match self {
            TailClass::Affine { slope: 0, .. } => Err(TailError::FlatAffine),
            TailClass::Periodic(p) if p.is_empty() => Err(TailError::EmptyPattern),
            _ => Ok(()),
        }
    }

    fn terms(&self) -> Vec<Term> {
        match self {
            TailClass::Bounded(b) => vec![Term {
                slope: 0,
                offset: *b as i64,
            }],
            TailClass::Affine { slope, offset } => vec![Term {
                slope: *slope,
                offset: *offset,
            }],
            TailClass::Periodic(p) => p.clone(),
        }
    }

    pub fn pattern_len(&self) -> usize {
        match self {
            TailClass::Periodic(p) => p.len().max(1),
            _ => 1,
        }
    }

    /// Tail rule at `n`, with periodic patterns anchored at `anchor`.
    pub fn value(&self, n: usize, anchor: usize) -> i64 {
        let terms = self.terms();
        let idx = (n as i64 - anchor as i64).rem_euclid(terms.len() as i64) as usize;
        terms[idx].eval(n)
    }

    /// Whether the tail has limsup ∞.
    pub fn unbounded(&self) -> bool {
        self.terms().iter().any(|t| t.grows())
    }

    fn negative_from(&self, start: usize, anchor: usize) -> Option<usize> {
        // Growing terms are monotone, so one period past the start decides.
        let p = self.pattern_len();
        (start..start + p).find(|&n| self.value(n, anchor) < 0)
    }
}

impl fmt::Display for TailClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailClass::Bounded(b) => write!(f, "bounded({b})"),
            TailClass::Affine { slope, offset } => write!(f, "affine({slope},{offset})"),
            TailClass::Periodic(p) => {
                write!(f, "periodic(")?;
                for (i, t) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A full sequence `k`: explicit values on `[0, N)`, then the tail rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KSeqSpec {
    prefix: Vec<usize>,
    tail: TailClass,
    anchor: usize,
}

impl KSeqSpec {
    /// Tail anchored at the prefix end.
    pub fn new(prefix: Vec<usize>, tail: TailClass) -> Result<Self, TailError> {
        let anchor = prefix.len();
        Self::anchored(prefix, tail, anchor)
    }

    /// Periodic tails index their pattern from `anchor <= prefix.len()`.
    pub fn anchored(prefix: Vec<usize>, tail: TailClass, anchor: usize) -> Result<Self, TailError> {
        tail.check()?;
        if anchor > prefix.len() {
            return Err(TailError::Anchor {
                anchor,
                start: prefix.len(),
            });
        }
        if let Some(n) = tail.negative_from(prefix.len(), anchor) {
            return Err(TailError::Negative(n));
        }
        Ok(KSeqSpec { prefix, tail, anchor })
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn tail(&self) -> &TailClass {
        &self.tail
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn window_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn value(&self, n: usize) -> usize {
        match self.prefix.get(n) {
            Some(&v) => v,
            None => self.tail.value(n, self.anchor) as usize,
        }
    }

    /// An index `T >= N`, congruent to the anchor modulo the pattern
    /// length, from which every growing term exceeds `c`.
    fn stable_from(&self, c: usize) -> usize {
        let n = self.prefix.len();
        let p = self.tail.pattern_len();
        let need = self
            .tail
            .terms()
            .iter()
            .filter(|t| t.grows())
            .map(|t| t.first_above(c))
            .max()
            .unwrap_or(0)
            .max(n);
        let rem = (need + p - self.anchor % p) % p;
        if rem == 0 {
            need
        } else {
            need + p - rem
        }
    }

    /// Largest value that is not eventually exceeded: prefix values and
    /// flat tail terms.
    fn critical_value(&self) -> usize {
        let flat = self
            .tail
            .terms()
            .into_iter()
            .filter(|t| !t.grows())
            .map(|t| t.offset.max(0) as usize);
        self.prefix.iter().copied().chain(flat).max().unwrap_or(0)
    }
}

/// `{n : k_n > c}` as an eventually periodic set.
pub fn generator(kspec: &KSeqSpec, c: usize) -> SetExpr {
    let start = kspec.stable_from(c);
    let head = (0..start).map(|n| kspec.value(n) > c).collect();
    let phase = (start..start + kspec.tail.pattern_len())
        .map(|n| kspec.value(n) > c)
        .collect();
    SetExpr::from_parts(head, phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterClass {
    ProperNonprincipal,
    Improper,
}

impl fmt::Display for FilterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterClass::ProperNonprincipal => "proper-nonprincipal",
            FilterClass::Improper => "improper",
        })
    }
}

pub fn classify(kspec: &KSeqSpec) -> FilterClass {
    if kspec.tail.unbounded() {
        FilterClass::ProperNonprincipal
    } else {
        FilterClass::Improper
    }
}

/// Evidence for an [`in_filter`] answer, checkable by direct evaluation of
/// `k_n` and set membership on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// Every `n >= n0` with `k_n > c` lies in the set.
    Contains { c: usize, n0: usize, horizon: usize },
    /// `start + i·step` is outside the set for all `i`, and `k` grows
    /// without bound along that progression, so no generator tail fits.
    Escapes { start: usize, step: usize, horizon: usize },
}

impl Certificate {
    pub fn horizon(&self) -> usize {
        match self {
            Certificate::Contains { horizon, .. } | Certificate::Escapes { horizon, .. } => *horizon,
        }
    }

    /// Re-checks the certificate pointwise on `[0, horizon)`.
    pub fn verify(&self, kspec: &KSeqSpec, set: &SetExpr) -> bool {
        match *self {
            Certificate::Contains { c, n0, horizon } => (n0..horizon).all(|n| kspec.value(n) <= c || set.contains(n)),
            Certificate::Escapes { start, step, horizon } => {
                let along: Vec<usize> = (start..horizon).step_by(step).collect();
                // at least two members of the progression in range, none in
                // the set, and k strictly increasing along it
                along.len() >= 2
                    && along.iter().all(|&n| !set.contains(n))
                    && along.windows(2).all(|w| kspec.value(w[1]) > kspec.value(w[0]))
            }
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Contains { c, n0, horizon } => {
                write!(f, "contains c={c} n0={n0} horizon={horizon}")
            }
            Certificate::Escapes { start, step, horizon } => {
                write!(f, "escapes start={start} step={step} horizon={horizon}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterDecision {
    pub member: bool,
    pub certificate: Certificate,
}

/// Decides `set ∈ D_k`.
///
/// The generators decrease in `c`, and for `c` at least every prefix value
/// and every flat tail term, `{n : k_n > c}` changes only by finitely many
/// elements as `c` grows. So `set ∈ D_k` iff `generator(c*) \ set` is
/// finite for that critical `c*`.
pub fn in_filter(kspec: &KSeqSpec, set: &SetExpr) -> FilterDecision {
    let c = kspec.critical_value();
    let gen = generator(kspec, c);
    let escape = gen.difference(set);
    let horizon_for = |anchor: usize, period: usize| anchor.max(kspec.window_len()) + 2 * period;
    if classify(kspec) == FilterClass::Improper {
        // Every value is at most c, so the generator is empty.
        debug_assert!(gen.is_empty());
        return FilterDecision {
            member: true,
            certificate: Certificate::Contains {
                c,
                n0: 0,
                horizon: horizon_for(0, set.period().max(kspec.tail.pattern_len())),
            },
        };
    }
    if escape.is_finite() {
        let n0 = escape.max_element().map_or(0, |m| m + 1);
        let period = gen.period().max(set.period());
        let anchor = n0.max(gen.threshold()).max(set.threshold());
        FilterDecision {
            member: true,
            certificate: Certificate::Contains {
                c,
                n0,
                horizon: horizon_for(anchor, period),
            },
        }
    } else {
        // staying on one residue of the tail pattern keeps the progression
        // on a single term, which grows since flat terms are at most c
        let (a, b) = (escape.period(), kspec.tail.pattern_len());
        let step = a / setexpr::gcd(a, b) * b;
        let start = escape
            .first_from(escape.threshold().max(kspec.window_len()))
            .expect("infinite set has members past its threshold");
        FilterDecision {
            member: false,
            certificate: Certificate::Escapes {
                start,
                step,
                horizon: horizon_for(start, step),
            },
        }
    }
}

/// `∀_D n φ(n)` where `holds = {n : φ(n)}`.
pub fn forall_d(kspec: &KSeqSpec, holds: &SetExpr) -> bool {
    in_filter(kspec, holds).member
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProblemClassError {
    #[error("computed k-sequence has {got} values for a window of {expected}")]
    Length { got: usize, expected: usize },
    #[error("declared tail disagrees with computed values at {}", fmt_mismatches(.0))]
    Inconsistent(Vec<TailMismatch>),
    #[error("invalid tail: {0}")]
    Tail(#[from] TailError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailMismatch {
    pub index: usize,
    pub computed: usize,
    pub declared: i64,
}

fn fmt_mismatches(m: &[TailMismatch]) -> String {
    m.iter()
        .map(|t| format!("n={} (computed {}, declared {})", t.index, t.computed, t.declared))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The sequence `k` a problem declares: computed window values followed by
/// its tail rule.
pub fn problem_kseq_spec(spec: &ProblemSpec, window: &[usize]) -> Result<KSeqSpec, ProblemClassError> {
    if window.len() != spec.window_len {
        return Err(ProblemClassError::Length {
            got: window.len(),
            expected: spec.window_len,
        });
    }
    Ok(KSeqSpec::anchored(
        window.to_vec(),
        spec.tail.clone(),
        spec.tail_start(),
    )?)
}

/// True iff the declared tail has limsup ∞. The tail rule must agree with
/// the computed values at every window index from its start on.
pub fn is_ultraproduct_problem(spec: &ProblemSpec, window: &[usize]) -> Result<bool, ProblemClassError> {
    let kspec = problem_kseq_spec(spec, window)?;
    let mismatches: Vec<TailMismatch> = (spec.tail_start()..spec.window_len)
        .filter_map(|n| {
            let declared = spec.tail.value(n, spec.tail_start());
            (declared != window[n] as i64).then_some(TailMismatch {
                index: n,
                computed: window[n],
                declared,
            })
        })
        .collect();
    if !mismatches.is_empty() {
        return Err(ProblemClassError::Inconsistent(mismatches));
    }
    Ok(classify(&kspec) == FilterClass::ProperNonprincipal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> KSeqSpec {
        KSeqSpec::new(vec![0, 1, 2, 3], TailClass::Affine { slope: 1, offset: 0 }).unwrap()
    }

    fn alternating() -> KSeqSpec {
        // ⟨0, n⟩ alternating from index 4 on
        KSeqSpec::new(
            vec![0, 1, 0, 3],
            TailClass::Periodic(vec![Term { slope: 0, offset: 0 }, Term { slope: 1, offset: 0 }]),
        )
        .unwrap()
    }

    #[test]
    fn identity_generator_is_cofinite() {
        let g = generator(&identity(), 3);
        assert!(g.is_cofinite());
        assert_eq!(g.first_from(0), Some(4));
        assert_eq!(g, SetExpr::cofinite(0..4));
    }

    #[test]
    fn escape_stays_on_one_growing_term() {
        // ⟨n + 2, 2n + 3⟩ is not monotone step by step
        let k = KSeqSpec::new(
            vec![],
            TailClass::Periodic(vec![Term { slope: 1, offset: 2 }, Term { slope: 2, offset: 3 }]),
        )
        .unwrap();
        let set = generator(&k, 3).complement();
        let d = in_filter(&k, &set);
        assert!(!d.member);
        assert!(matches!(d.certificate, Certificate::Escapes { step: 2, .. }));
        assert!(d.certificate.verify(&k, &set));
    }

    #[test]
    fn constant_generator_is_empty() {
        let k = KSeqSpec::new(vec![3, 3], TailClass::Bounded(3)).unwrap();
        assert!(generator(&k, 5).is_empty());
    }

    #[test]
    fn alternating_generator_matches_direct_evaluation() {
        let k = alternating();
        let g = generator(&k, 0);
        for n in 0..100 {
            let direct = if n < 4 {
                [0, 1, 0, 3][n]
            } else if (n - 4) % 2 == 0 {
                0
            } else {
                n
            };
            assert_eq!(g.contains(n), direct > 0, "n={n}");
        }
        // beyond the prefix: the odd positions
        assert_eq!(g.elements_below(12), vec![1, 3, 5, 7, 9, 11]);
    }

    #[test]
    fn improper_filter_contains_everything() {
        let k = KSeqSpec::new(vec![0, 2], TailClass::Bounded(3)).unwrap();
        assert_eq!(classify(&k), FilterClass::Improper);
        let d = in_filter(&k, &SetExpr::empty());
        assert!(d.member);
        assert!(d.certificate.verify(&k, &SetExpr::empty()));
    }

    #[test]
    fn evens_are_not_in_identity_filter() {
        let k = identity();
        let d = in_filter(&k, &SetExpr::evens());
        assert!(!d.member);
        assert!(d.certificate.verify(&k, &SetExpr::evens()));
        assert!(matches!(d.certificate, Certificate::Escapes { step: 2, .. }));
    }

    #[test]
    fn evens_are_in_filter_when_k_grows_only_on_evens() {
        let k = KSeqSpec::new(
            vec![0],
            TailClass::Periodic(vec![Term { slope: 0, offset: 1 }, Term { slope: 1, offset: 0 }]),
        )
        .unwrap();
        // anchored at 1: odd n take the flat term, even n >= 2 grow
        let odds = SetExpr::odds();
        let evens = SetExpr::evens();
        assert!(in_filter(&k, &evens).member);
        assert!(!in_filter(&k, &odds).member);
    }

    #[test]
    fn forall_d_basics() {
        let k = identity();
        assert!(forall_d(&k, &SetExpr::cofinite([0, 5])));
        assert!(!forall_d(&k, &SetExpr::finite([1, 2, 3])));
        assert!(forall_d(&k, &generator(&k, 7)));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&identity()), FilterClass::ProperNonprincipal);
        assert_eq!(classify(&alternating()), FilterClass::ProperNonprincipal);
        let b = KSeqSpec::new(vec![], TailClass::Bounded(3)).unwrap();
        assert_eq!(classify(&b), FilterClass::Improper);
    }

    #[test]
    fn negative_tails_are_rejected() {
        assert_eq!(
            KSeqSpec::new(vec![0], TailClass::Affine { slope: 1, offset: -3 }),
            Err(TailError::Negative(1))
        );
        assert!(KSeqSpec::new(vec![0, 0, 0, 0], TailClass::Affine { slope: 1, offset: -3 }).is_ok());
    }
}
