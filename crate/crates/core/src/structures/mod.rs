//! Vocabularies, vocabulary chains, finite structures and truncated
//! problem descriptions.
//!
//! A [`ProblemSpec`] holds a finite window of structure pairs over an
//! increasing chain of vocabularies, together with a declared tail for the
//! game invariant beyond the window. Universes are always initial segments
//! `{0, .., size-1}` of the naturals.

mod problem_file;

pub use problem_file::{parse_problem, print_problem, ProblemParseError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::filterlab::TailClass;

/// Universe element.
pub type Elem = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Relation,
    Function,
    Constant,
}

impl SymbolKind {
    pub fn tag(self) -> &'static str {
        match self {
            SymbolKind::Relation => "rel",
            SymbolKind::Function => "fun",
            SymbolKind::Constant => "const",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    pub arity: usize,
}

impl Symbol {
    pub fn relation(name: impl Into<String>, arity: usize) -> Self {
        Symbol {
            name: name.into(),
            kind: SymbolKind::Relation,
            arity,
        }
    }

    pub fn function(name: impl Into<String>, arity: usize) -> Self {
        Symbol {
            name: name.into(),
            kind: SymbolKind::Function,
            arity,
        }
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Symbol {
            name: name.into(),
            kind: SymbolKind::Constant,
            arity: 0,
        }
    }

    fn well_formed(&self) -> bool {
        match self.kind {
            SymbolKind::Constant => self.arity == 0,
            _ => self.arity >= 1,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}:{}", self.name, self.arity, self.kind.tag())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("duplicate symbol `{0}` in vocabulary")]
    DuplicateSymbol(String),
    #[error("vocabulary level {level} out of range (chain has levels 0..={top})")]
    LevelOutOfRange { level: usize, top: usize },
    #[error("element {elem} outside universe of size {size}")]
    ElementOutOfRange { elem: Elem, size: usize },
    #[error("symbol `{0}` has the wrong arity")]
    ArityMismatch(String),
    #[error("function table for `{name}` has {got} entries, expected {expected}")]
    TableSize { name: String, got: usize, expected: usize },
    #[error("structures must have a nonempty universe")]
    EmptyUniverse,
}

/// A finite set of symbols with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    symbols: BTreeMap<String, Symbol>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Result<Self, StructureError> {
        let mut v = Vocabulary::new();
        for s in symbols {
            v.insert(s)?;
        }
        Ok(v)
    }

    pub fn insert(&mut self, symbol: Symbol) -> Result<(), StructureError> {
        if self.symbols.contains_key(&symbol.name) {
            return Err(StructureError::DuplicateSymbol(symbol.name));
        }
        self.symbols.insert(symbol.name.clone(), symbol);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.symbols.get(&symbol.name) == Some(symbol)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_subset(&self, other: &Vocabulary) -> bool {
        self.iter().all(|s| other.contains(s))
    }
}

/// `τ_0 ⊆ τ_1 ⊆ … ⊆ τ_L` with `τ_0 = ∅`.
///
/// Construction does not enforce the invariants; [`VocabularyChain::violations`]
/// reports them so malformed inputs can be diagnosed instead of rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VocabularyChain {
    levels: Vec<Vocabulary>,
}

impl VocabularyChain {
    pub fn new(levels: Vec<Vocabulary>) -> Self {
        assert!(!levels.is_empty(), "a vocabulary chain needs level 0");
        VocabularyChain { levels }
    }

    /// `⟨∅, τ, τ, …⟩` with `levels` copies of `τ` after the empty level.
    pub fn constant(vocab: Vocabulary, levels: usize) -> Self {
        let mut all = vec![Vocabulary::new()];
        all.extend(std::iter::repeat_n(vocab, levels));
        VocabularyChain { levels: all }
    }

    pub fn levels(&self) -> &[Vocabulary] {
        &self.levels
    }

    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn top(&self) -> &Vocabulary {
        &self.levels[self.top_level()]
    }

    pub fn level(&self, j: usize) -> Result<&Vocabulary, StructureError> {
        self.levels.get(j).ok_or(StructureError::LevelOutOfRange {
            level: j,
            top: self.top_level(),
        })
    }

    /// The vocabulary used by a game with budget `k`: `τ_k`, or the top
    /// level when the chain is shorter than `k`.
    pub fn at_budget(&self, k: usize) -> &Vocabulary {
        &self.levels[k.min(self.top_level())]
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.levels[0].is_empty() {
            out.push(Violation::chain(0, None, "τ_0 nonempty"));
        }
        for (j, level) in self.levels.iter().enumerate() {
            for s in level.iter() {
                if !s.well_formed() {
                    out.push(Violation::chain(j, Some(&s.name), "bad arity for symbol kind"));
                }
            }
        }
        for (j, pair) in self.levels.windows(2).enumerate() {
            for s in pair[0].iter() {
                if !pair[1].contains(s) {
                    out.push(Violation::chain(j + 1, Some(&s.name), "chain not increasing"));
                }
            }
        }
        out
    }
}

/// Dense function table, indexed by the mixed-radix encoding of the argument
/// tuple (first argument most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionTable {
    pub arity: usize,
    pub values: Vec<Elem>,
}

impl FunctionTable {
    pub fn index(size: usize, args: &[Elem]) -> usize {
        args.iter().fold(0, |acc, &a| acc * size + a)
    }
}

/// A finite structure with universe `{0, .., size-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteStructure {
    size: usize,
    relations: BTreeMap<String, (usize, BTreeSet<Vec<Elem>>)>,
    functions: BTreeMap<String, FunctionTable>,
    constants: BTreeMap<String, Elem>,
}

impl FiniteStructure {
    /// A bare universe. Size zero is accepted here so parsers can report
    /// it through validation; game and formula code assume `size >= 1`.
    pub fn new(size: usize) -> Self {
        FiniteStructure {
            size,
            relations: BTreeMap::new(),
            functions: BTreeMap::new(),
            constants: BTreeMap::new(),
        }
    }

    /// The strict linear order `0 < 1 < … < size-1` under `name`.
    pub fn linear_order(size: usize, name: &str) -> Self {
        let tuples = (0..size).flat_map(|a| (a + 1..size).map(move |b| vec![a, b])).collect();
        let mut m = FiniteStructure::new(size);
        m.relations.insert(name.to_string(), (2, tuples));
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn universe(&self) -> std::ops::Range<Elem> {
        0..self.size
    }

    /// Stores tuples without range checks; see [`FiniteStructure::violations`].
    pub fn set_relation<I>(&mut self, name: &str, arity: usize, tuples: I)
    where
        I: IntoIterator<Item = Vec<Elem>>,
    {
        self.relations
            .insert(name.to_string(), (arity, tuples.into_iter().collect()));
    }

    pub fn with_relation<I>(mut self, name: &str, arity: usize, tuples: I) -> Self
    where
        I: IntoIterator<Item = Vec<Elem>>,
    {
        self.set_relation(name, arity, tuples);
        self
    }

    pub fn set_function(&mut self, name: &str, arity: usize, values: Vec<Elem>) {
        self.functions.insert(name.to_string(), FunctionTable { arity, values });
    }

    pub fn with_function(mut self, name: &str, arity: usize, values: Vec<Elem>) -> Self {
        self.set_function(name, arity, values);
        self
    }

    pub fn set_constant(&mut self, name: &str, value: Elem) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn with_constant(mut self, name: &str, value: Elem) -> Self {
        self.set_constant(name, value);
        self
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Vec<Elem>>> {
        self.relations.get(name).map(|(_, t)| t)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionTable> {
        self.functions.get(name)
    }

    pub fn constant(&self, name: &str) -> Option<Elem> {
        self.constants.get(name).copied()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize, &BTreeSet<Vec<Elem>>)> {
        self.relations.iter().map(|(n, (a, t))| (n.as_str(), *a, t))
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &FunctionTable)> {
        self.functions.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn constants(&self) -> impl Iterator<Item = (&str, Elem)> {
        self.constants.iter().map(|(n, c)| (n.as_str(), *c))
    }

    /// `None` when `name` is not an interpreted relation.
    pub fn holds(&self, name: &str, args: &[Elem]) -> Option<bool> {
        self.relations.get(name).map(|(_, t)| t.contains(args))
    }

    /// `None` when `name` is not an interpreted function.
    pub fn apply(&self, name: &str, args: &[Elem]) -> Option<Elem> {
        let table = self.functions.get(name)?;
        table.values.get(FunctionTable::index(self.size, args)).copied()
    }

    pub fn interprets(&self, symbol: &Symbol) -> bool {
        match symbol.kind {
            SymbolKind::Relation => self
                .relations
                .get(&symbol.name)
                .is_some_and(|(a, _)| *a == symbol.arity),
            SymbolKind::Function => self
                .functions
                .get(&symbol.name)
                .is_some_and(|t| t.arity == symbol.arity),
            SymbolKind::Constant => self.constants.contains_key(&symbol.name),
        }
    }

    pub fn interprets_all(&self, vocab: &Vocabulary) -> bool {
        vocab.iter().all(|s| self.interprets(s))
    }

    /// Restriction to the symbols of `vocab`.
    pub fn restrict(&self, vocab: &Vocabulary) -> FiniteStructure {
        FiniteStructure {
            size: self.size,
            relations: self
                .relations
                .iter()
                .filter(|(n, _)| vocab.get(n).is_some_and(|s| s.kind == SymbolKind::Relation))
                .map(|(n, r)| (n.clone(), r.clone()))
                .collect(),
            functions: self
                .functions
                .iter()
                .filter(|(n, _)| vocab.get(n).is_some_and(|s| s.kind == SymbolKind::Function))
                .map(|(n, t)| (n.clone(), t.clone()))
                .collect(),
            constants: self
                .constants
                .iter()
                .filter(|(n, _)| vocab.get(n).is_some_and(|s| s.kind == SymbolKind::Constant))
                .map(|(n, c)| (n.clone(), *c))
                .collect(),
        }
    }

    /// Reduct to level `j` of `chain`.
    pub fn reduct(&self, j: usize, chain: &VocabularyChain) -> Result<FiniteStructure, StructureError> {
        Ok(self.restrict(chain.level(j)?))
    }

    /// Structural problems with this structure as a model of `vocab`.
    /// `index` and `side` only label the reported violations.
    pub fn violations(&self, vocab: &Vocabulary, index: Option<usize>, side: Option<u8>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut v = |symbol: Option<&str>, clause: &str| {
            out.push(Violation {
                index,
                side,
                symbol: symbol.map(str::to_string),
                clause: clause.to_string(),
            })
        };
        if self.size == 0 {
            v(None, "empty universe");
        }
        for s in vocab.iter() {
            if !self.interprets(s) {
                v(Some(&s.name), "symbol not interpreted");
            }
        }
        for (name, (arity, tuples)) in &self.relations {
            if vocab.get(name).is_none_or(|s| s.kind != SymbolKind::Relation) {
                v(Some(name), "symbol outside vocabulary");
            }
            for t in tuples {
                if t.len() != *arity {
                    v(Some(name), "tuple arity mismatch");
                } else if t.iter().any(|&e| e >= self.size) {
                    v(Some(name), "tuple out of universe");
                }
            }
        }
        for (name, table) in &self.functions {
            if vocab.get(name).is_none_or(|s| s.kind != SymbolKind::Function) {
                v(Some(name), "symbol outside vocabulary");
            }
            let expected = self.size.checked_pow(table.arity as u32).unwrap_or(usize::MAX);
            if table.values.len() != expected {
                v(Some(name), "function table not total");
            }
            if table.values.iter().any(|&e| e >= self.size) {
                v(Some(name), "function value out of universe");
            }
        }
        for (name, &c) in &self.constants {
            if vocab.get(name).is_none_or(|s| s.kind != SymbolKind::Constant) {
                v(Some(name), "symbol outside vocabulary");
            }
            if c >= self.size {
                v(Some(name), "constant out of universe");
            }
        }
        out
    }
}

/// One failed clause of a validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Window index (or chain level for chain violations).
    pub index: Option<usize>,
    pub side: Option<u8>,
    pub symbol: Option<String>,
    pub clause: String,
}

impl Violation {
    fn chain(level: usize, symbol: Option<&str>, clause: &str) -> Self {
        Violation {
            index: Some(level),
            side: None,
            symbol: symbol.map(str::to_string),
            clause: clause.to_string(),
        }
    }

    fn window(index: Option<usize>, side: Option<u8>, clause: &str) -> Self {
        Violation {
            index,
            side,
            symbol: None,
            clause: clause.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.clause)?;
        if let Some(i) = self.index {
            write!(f, " index={i}")?;
        }
        if let Some(s) = self.side {
            write!(f, " side={s}")?;
        }
        if let Some(sym) = &self.symbol {
            write!(f, " symbol={sym}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_clause(&self, clause: &str) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

/// A window `[0, N)` of structure pairs plus a declared tail for `k_{m,n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub chain: VocabularyChain,
    pub window_len: usize,
    pub pairs: Vec<(FiniteStructure, FiniteStructure)>,
    pub size_bound: Option<Vec<usize>>,
    pub tail: TailClass,
    /// First index the tail rule covers; `None` means `window_len`.
    pub tail_start: Option<usize>,
}

impl ProblemSpec {
    pub fn new(chain: VocabularyChain, pairs: Vec<(FiniteStructure, FiniteStructure)>, tail: TailClass) -> Self {
        ProblemSpec {
            chain,
            window_len: pairs.len(),
            pairs,
            size_bound: None,
            tail,
            tail_start: None,
        }
    }

    pub fn tail_start(&self) -> usize {
        self.tail_start.unwrap_or(self.window_len)
    }

    pub fn pair(&self, n: usize) -> (&FiniteStructure, &FiniteStructure) {
        let (a, b) = &self.pairs[n];
        (a, b)
    }
}

pub fn validate_problem(spec: &ProblemSpec) -> ValidationReport {
    let mut violations = spec.chain.violations();
    if spec.window_len == 0 {
        violations.push(Violation::window(None, None, "window empty"));
    }
    if spec.pairs.len() != spec.window_len {
        violations.push(Violation::window(None, None, "window length mismatch"));
    }
    let top = spec.chain.top();
    for (n, (m1, m2)) in spec.pairs.iter().enumerate() {
        violations.extend(m1.violations(top, Some(n), Some(1)));
        violations.extend(m2.violations(top, Some(n), Some(2)));
    }
    if let Some(bound) = &spec.size_bound {
        if bound.len() < spec.pairs.len() {
            violations.push(Violation::window(None, None, "size bound shorter than window"));
        }
        for (n, &f) in bound.iter().enumerate() {
            if f < 2 {
                violations.push(Violation::window(Some(n), None, "size bound below 2"));
            }
        }
        for (n, (m1, m2)) in spec.pairs.iter().enumerate() {
            let Some(&f) = bound.get(n) else { break };
            for (side, m) in [(1, m1), (2, m2)] {
                if m.size() > f {
                    violations.push(Violation::window(Some(n), Some(side), "structure exceeds size bound"));
                }
            }
        }
    }
    if let Err(e) = spec.tail.check() {
        violations.push(Violation::window(None, None, &format!("bad tail: {e}")));
    }
    if spec.tail_start.is_some_and(|s| s > spec.window_len) {
        violations.push(Violation::window(None, None, "tail start beyond window"));
    }
    ValidationReport { violations }
}

/// Largest universe in the window.
pub fn kappa(spec: &ProblemSpec) -> usize {
    spec.pairs
        .iter()
        .map(|(a, b)| a.size().max(b.size()))
        .max()
        .unwrap_or(0)
}
