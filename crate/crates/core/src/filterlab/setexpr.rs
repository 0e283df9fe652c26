use std::collections::BTreeSet;
use std::fmt;

pub(super) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// An eventually periodic subset of ω.
///
/// Membership of `n < head.len()` is `head[n]`; beyond the head it is
/// `phase[(n - head.len()) % phase.len()]`. Values are kept normalized
/// (shortest period, then shortest head) so derived equality is set
/// equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SetExpr {
    head: Vec<bool>,
    phase: Vec<bool>,
}

impl SetExpr {
    /// `phase` must be nonempty.
    pub fn from_parts(head: Vec<bool>, phase: Vec<bool>) -> Self {
        assert!(!phase.is_empty(), "period must be positive");
        let mut s = SetExpr { head, phase };
        s.normalize();
        s
    }

    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), vec![false])
    }

    pub fn all() -> Self {
        Self::from_parts(Vec::new(), vec![true])
    }

    pub fn finite<I: IntoIterator<Item = usize>>(elems: I) -> Self {
        let elems: BTreeSet<usize> = elems.into_iter().collect();
        let len = elems.last().map_or(0, |m| m + 1);
        let head = (0..len).map(|n| elems.contains(&n)).collect();
        Self::from_parts(head, vec![false])
    }

    /// ω minus the given finite set.
    pub fn cofinite<I: IntoIterator<Item = usize>>(missing: I) -> Self {
        Self::finite(missing).complement()
    }

    /// `{n : n mod period ∈ residues}`; `mask[i]` selects residue `i`.
    pub fn periodic(mask: Vec<bool>) -> Self {
        Self::from_parts(Vec::new(), mask)
    }

    pub fn evens() -> Self {
        Self::periodic(vec![true, false])
    }

    pub fn odds() -> Self {
        Self::periodic(vec![false, true])
    }

    pub fn contains(&self, n: usize) -> bool {
        match self.head.get(n) {
            Some(&b) => b,
            None => self.phase[(n - self.head.len()) % self.phase.len()],
        }
    }

    /// Index from which membership is purely periodic.
    pub fn threshold(&self) -> usize {
        self.head.len()
    }

    pub fn period(&self) -> usize {
        self.phase.len()
    }

    pub fn is_finite(&self) -> bool {
        self.phase.iter().all(|b| !b)
    }

    pub fn is_cofinite(&self) -> bool {
        self.phase.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        self.is_finite() && self.head.iter().all(|b| !b)
    }

    /// Largest element of a finite nonempty set.
    pub fn max_element(&self) -> Option<usize> {
        if !self.is_finite() {
            return None;
        }
        self.head.iter().rposition(|&b| b)
    }

    /// First `n >= from` in the set, if any.
    pub fn first_from(&self, from: usize) -> Option<usize> {
        let limit = from.max(self.threshold()) + self.period();
        (from..limit).find(|&n| self.contains(n))
    }

    pub fn elements_below(&self, bound: usize) -> Vec<usize> {
        (0..bound).filter(|&n| self.contains(n)).collect()
    }

    pub fn complement(&self) -> Self {
        Self::from_parts(
            self.head.iter().map(|b| !b).collect(),
            self.phase.iter().map(|b| !b).collect(),
        )
    }

    pub fn union(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    fn combine(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        let threshold = self.threshold().max(other.threshold());
        let period = lcm(self.period(), other.period());
        let head = (0..threshold)
            .map(|n| op(self.contains(n), other.contains(n)))
            .collect();
        let phase = (threshold..threshold + period)
            .map(|n| op(self.contains(n), other.contains(n)))
            .collect();
        Self::from_parts(head, phase)
    }

    fn normalize(&mut self) {
        let p = self.phase.len();
        if let Some(q) = (1..p)
            .filter(|&q| p.is_multiple_of(q))
            .find(|&q| (0..p).all(|i| self.phase[i] == self.phase[i % q]))
        {
            self.phase.truncate(q);
        }
        while let Some(&last) = self.head.last() {
            if last != *self.phase.last().unwrap() {
                break;
            }
            self.head.pop();
            self.phase.rotate_right(1);
        }
    }
}

impl fmt::Debug for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `head:<bits>/phase:<bits>`, the same shape `period(...)` accepts.
impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        write!(f, "head:{}/phase:{}", bits(&self.head), bits(&self.phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_set() -> impl Strategy<Value = SetExpr> {
        (
            proptest::collection::vec(any::<bool>(), 0..8),
            proptest::collection::vec(any::<bool>(), 1..5),
        )
            .prop_map(|(h, p)| SetExpr::from_parts(h, p))
    }

    #[test]
    fn constructors() {
        let f = SetExpr::finite([1, 3]);
        assert_eq!(f.elements_below(6), vec![1, 3]);
        assert!(f.is_finite());
        let c = SetExpr::cofinite([0, 2]);
        assert!(c.is_cofinite());
        assert!(!c.contains(2) && c.contains(3) && c.contains(100));
        assert_eq!(SetExpr::evens().elements_below(7), vec![0, 2, 4, 6]);
        assert_eq!(SetExpr::finite([]), SetExpr::empty());
    }

    #[test]
    fn normal_form_is_canonical() {
        let a = SetExpr::from_parts(vec![true, false, true, false], vec![true, false, true, false]);
        assert_eq!(a, SetExpr::evens());
        assert_eq!(a.threshold(), 0);
        assert_eq!(a.period(), 2);
    }

    proptest! {
        #[test]
        fn operations_are_pointwise(a in arb_set(), b in arb_set()) {
            let u = a.union(&b);
            let i = a.intersection(&b);
            let c = a.complement();
            for n in 0..60 {
                prop_assert_eq!(u.contains(n), a.contains(n) || b.contains(n));
                prop_assert_eq!(i.contains(n), a.contains(n) && b.contains(n));
                prop_assert_eq!(c.contains(n), !a.contains(n));
            }
        }

        #[test]
        fn equality_is_extensional(a in arb_set(), b in arb_set()) {
            let same = (0..80).all(|n| a.contains(n) == b.contains(n));
            prop_assert_eq!(a == b, same);
        }
    }
}
