#![allow(dead_code)]

use std::collections::BTreeSet;

use efk::filterlab::TailClass;
use efk::structures::{Elem, FiniteStructure, ProblemSpec, Symbol, Vocabulary, VocabularyChain};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn binary_vocab() -> Vocabulary {
    Vocabulary::from_symbols([Symbol::relation("R", 2)]).unwrap()
}

pub fn binary_chain() -> VocabularyChain {
    VocabularyChain::constant(binary_vocab(), 4)
}

pub fn order_vocab() -> Vocabulary {
    Vocabulary::from_symbols([Symbol::relation("<", 2)]).unwrap()
}

pub fn permutations(n: usize) -> Vec<Vec<Elem>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// The image of `m` under the bijection `p` of its universe.
pub fn permute(m: &FiniteStructure, p: &[Elem]) -> FiniteStructure {
    let n = m.size();
    let mut out = FiniteStructure::new(n);
    for (name, arity, tuples) in m.relations() {
        out.set_relation(name, arity, tuples.iter().map(|t| t.iter().map(|&x| p[x]).collect()));
    }
    for (name, table) in m.functions() {
        let mut values = vec![0; table.values.len()];
        let mut args = vec![0; table.arity];
        for (i, &v) in table.values.iter().enumerate() {
            let mut r = i;
            for slot in args.iter_mut().rev() {
                *slot = r % n;
                r /= n;
            }
            let image: Vec<Elem> = args.iter().map(|&x| p[x]).collect();
            values[efk::structures::FunctionTable::index(n, &image)] = p[v];
        }
        out.set_function(name, table.arity, values);
    }
    for (name, c) in m.constants() {
        out.set_constant(name, p[c]);
    }
    out
}

pub fn isomorphic(a: &FiniteStructure, b: &FiniteStructure) -> bool {
    a.size() == b.size() && permutations(a.size()).iter().any(|p| &permute(a, p) == b)
}

fn binary_from_mask(n: usize, mask: u32) -> FiniteStructure {
    let tuples = (0..n * n).filter(|i| mask >> i & 1 == 1).map(|i| vec![i / n, i % n]);
    FiniteStructure::new(n).with_relation("R", 2, tuples)
}

fn mask_of(m: &FiniteStructure) -> u32 {
    let n = m.size();
    m.relation("R").unwrap().iter().map(|t| 1u32 << (t[0] * n + t[1])).sum()
}

/// Every structure with one binary relation `R` and `1 <= size <= max`, one
/// per isomorphism class, smallest encoding first.
pub fn binary_structures(max: usize) -> Vec<FiniteStructure> {
    let mut out = Vec::new();
    for n in 1..=max {
        let perms = permutations(n);
        let mut seen = BTreeSet::new();
        for mask in 0..(1u32 << (n * n)) {
            let m = binary_from_mask(n, mask);
            let canon = perms.iter().map(|p| mask_of(&permute(&m, p))).min().unwrap();
            if seen.insert(canon) {
                out.push(binary_from_mask(n, canon));
            }
        }
    }
    out
}

/// Random interpretation of every symbol of `vocab`.
pub fn random_structure<R: Rng>(rng: &mut R, size: usize, vocab: &Vocabulary, density: f64) -> FiniteStructure {
    let mut m = FiniteStructure::new(size);
    for sym in vocab.iter() {
        match sym.kind {
            efk::structures::SymbolKind::Relation => {
                let mut tuples = Vec::new();
                let total = size.pow(sym.arity as u32);
                for i in 0..total {
                    if rng.gen_bool(density) {
                        let mut t = vec![0; sym.arity];
                        let mut r = i;
                        for slot in t.iter_mut().rev() {
                            *slot = r % size;
                            r /= size;
                        }
                        tuples.push(t);
                    }
                }
                m.set_relation(&sym.name, sym.arity, tuples);
            }
            efk::structures::SymbolKind::Function => {
                let values = (0..size.pow(sym.arity as u32))
                    .map(|_| rng.gen_range(0..size))
                    .collect();
                m.set_function(&sym.name, sym.arity, values);
            }
            efk::structures::SymbolKind::Constant => m.set_constant(&sym.name, rng.gen_range(0..size)),
        }
    }
    m
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<Elem> {
    let mut p: Vec<Elem> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// `N` pairs `(M_n, π_n M_n)` over a constant chain, declared `k_n = n`.
pub fn iso_problem<R: Rng>(rng: &mut R, window: usize, size: usize, vocab: &Vocabulary) -> ProblemSpec {
    let chain = VocabularyChain::constant(vocab.clone(), window.max(2));
    let pairs = (0..window)
        .map(|_| {
            let m = random_structure(rng, size, vocab, 0.4);
            let p = random_permutation(rng, size);
            let copy = permute(&m, &p);
            (m, copy)
        })
        .collect();
    ProblemSpec::new(chain, pairs, TailClass::Affine { slope: 1, offset: 0 })
}
