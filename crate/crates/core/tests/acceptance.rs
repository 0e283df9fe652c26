//! The acceptance gate. Each criterion prints one `PASS`/`FAIL` line and
//! fails its test on any violation.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use efk::backforth::{check_formulas, parse_script, run_script, Approximation, BackForth, ScriptOp, Side};
use efk::efgame::{
    check_ss1, compute_k_seq, extract_distinguisher, game_winner, is_partial_isomorphism, solve_game_with,
    verify_antagonist, verify_protagonist, Challenge, Direction, DistinguishOutcome, PartialMap, SolveOptions,
    Strategy, Verdict, Winner,
};
use efk::filterlab::{classify, in_filter, Certificate, FilterClass, KSeqSpec, SetTerm, TailClass, Term};
use efk::formulas::{enumerate_sentences, eval_sentence, Formula, Valuation};
use efk::slalom::{min_cover_exact, single_slalom_cover, CoverMode, Slalom, WindowFunctionFamily};
use efk::structures::{Elem, FiniteStructure, Symbol, Vocabulary, VocabularyChain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n} [{name}]: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // bypasses the harness capture so the line lands in the log either way
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn winner(m1: &FiniteStructure, m2: &FiniteStructure, chain: &VocabularyChain, k: usize) -> Winner {
    game_winner(m1, m2, chain, k, opts())
        .unwrap()
        .0
        .expect("small games stay under the cap")
}

// ---------------------------------------------------------------- 1

const ORACLE_MAX_SIZE: [usize; 3] = [0, 8, 7];

#[test]
fn criterion_1_oracle_equivalence() {
    let start = std::time::Instant::now();
    let structs = binary_structures(3);
    assert_eq!(structs.len(), 116);
    let chain = binary_chain();
    let mut violations = 0;
    let mut checked_pairs = 0;
    let mut sentence_counts = Vec::new();
    for (k, &max_size) in ORACLE_MAX_SIZE.iter().enumerate() {
        let sentences: Vec<Formula> = enumerate_sentences(chain.at_budget(k), k, k)
            .up_to_size(max_size)
            .collect();
        sentence_counts.push(sentences.len());
        let truth: Vec<Vec<bool>> = structs
            .iter()
            .map(|m| sentences.iter().map(|s| eval_sentence(m, s).unwrap()).collect())
            .collect();
        for i in 0..structs.len() {
            for j in i..structs.len() {
                if winner(&structs[i], &structs[j], &chain, k) == Winner::Protagonist {
                    checked_pairs += 1;
                    if truth[i] != truth[j] {
                        violations += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "oracle equivalence",
        violations == 0 && secs <= 600.0,
        &format!(
            "116 structures, sentences per k={sentence_counts:?} up to sizes {ORACLE_MAX_SIZE:?}, {checked_pairs} protagonist pairs, {violations} violations, {secs:.1}s"
        ),
    );
}

// ---------------------------------------------------------------- 2

fn distinguisher_vocabs() -> Vec<Vocabulary> {
    vec![
        binary_vocab(),
        Vocabulary::from_symbols([Symbol::relation("R", 2), Symbol::relation("P", 1)]).unwrap(),
        Vocabulary::from_symbols([Symbol::relation("R", 2), Symbol::constant("c")]).unwrap(),
        Vocabulary::from_symbols([Symbol::relation("P", 1), Symbol::function("f", 1)]).unwrap(),
    ]
}

#[test]
fn criterion_2_distinguisher_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd157);
    let vocabs = distinguisher_vocabs();
    let (mut pairs, mut found, mut none_found, mut unsound) = (0, 0, 0, 0);
    let (mut at_kmax_none, mut at_kmax_runs) = (0, 0);
    while pairs < 1000 {
        let vocab = &vocabs[rng.gen_range(0..vocabs.len())];
        let chain = VocabularyChain::constant(vocab.clone(), 10);
        let (s1, s2) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let m1 = random_structure(&mut rng, s1, vocab, 0.35);
        let m2 = random_structure(&mut rng, s2, vocab, 0.35);
        if isomorphic(&m1, &m2) {
            continue;
        }
        pairs += 1;
        let first_loss = (0..=9)
            .find(|&k| winner(&m1, &m2, &chain, k) == Winner::Antagonist)
            .expect("non-isomorphic pairs are separated by k = 8");
        let kmax = first_loss.checked_sub(1);
        let k = kmax.unwrap_or(0).max(1);
        match extract_distinguisher(&m1, &m2, &chain, k, None, opts()).unwrap() {
            DistinguishOutcome::Found(d) => {
                found += 1;
                let (a, b) = (
                    eval_sentence(&m1, &d.sentence).unwrap(),
                    eval_sentence(&m2, &d.sentence).unwrap(),
                );
                let ok = match d.direction {
                    Direction::First => a && !b,
                    Direction::Second => b && !a,
                };
                let vocab_ok = d.sentence.is_over(chain.at_budget(k + 1)) && d.sentence.is_sentence();
                if !ok || !vocab_ok {
                    unsound += 1;
                }
            }
            DistinguishOutcome::NoneFound { .. } => none_found += 1,
            other => panic!("antagonist wins Γ_{} but got {other:?}", k + 1),
        }
        if let Some(km) = kmax {
            at_kmax_runs += 1;
            if let DistinguishOutcome::NoneFound { .. } =
                extract_distinguisher(&m1, &m2, &chain, km, None, opts()).unwrap()
            {
                at_kmax_none += 1;
            }
        }
    }
    let rate = none_found as f64 / pairs as f64;
    report(
        2,
        "distinguisher soundness",
        unsound == 0 && rate <= 0.05,
        &format!(
            "{pairs} pairs, {found} sentences all checked, {unsound} unsound, none-found {:.1}% at k=max(kmax,1); at k=kmax {at_kmax_none}/{at_kmax_runs}",
            rate * 100.0
        ),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_game_invariants() {
    let structs = binary_structures(3);
    let chain = binary_chain();
    let mut bad = Vec::new();
    let mut certs = 0;
    for i in 0..structs.len() {
        for j in i..structs.len() {
            let (m1, m2) = (&structs[i], &structs[j]);
            let mut profile = Vec::new();
            for k in 0..=2 {
                let res = solve_game_with(m1, m2, &chain, k, opts()).unwrap();
                let plain = solve_game_with(
                    m1,
                    m2,
                    &chain,
                    k,
                    SolveOptions {
                        memoize: false,
                        ..opts()
                    },
                )
                .unwrap();
                if res.winner() != plain.winner() {
                    bad.push(format!("memo/plain disagree ({i},{j}) k={k}"));
                }
                let verified = match &res.verdict {
                    Verdict::Protagonist(c) => verify_protagonist(m1, m2, &chain, c),
                    Verdict::Antagonist(c) => verify_antagonist(m1, m2, &chain, c),
                    Verdict::Undecided => Err("undecided".into()),
                };
                certs += 1;
                if let Err(e) = verified {
                    bad.push(format!("certificate ({i},{j}) k={k}: {e}"));
                }
                profile.push(res.winner().unwrap());
            }
            if profile[0] != Winner::Protagonist {
                bad.push(format!("k=0 totality ({i},{j})"));
            }
            if profile
                .windows(2)
                .any(|w| w[0] == Winner::Antagonist && w[1] == Winner::Protagonist)
            {
                bad.push(format!("budget monotonicity ({i},{j}): {profile:?}"));
            }
        }
    }
    // isomorphism ceiling: a window of four copies of (M, πM)
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in &structs {
        let pairs = (0..4)
            .map(|_| {
                let p = random_permutation(&mut rng, m.size());
                (m.clone(), permute(m, &p))
            })
            .collect();
        let spec = efk::structures::ProblemSpec::new(chain.clone(), pairs, TailClass::Affine { slope: 1, offset: 0 });
        let ks = compute_k_seq(&spec, opts(), 1).unwrap();
        if ks.exact() != Some(vec![0, 1, 2, 3]) {
            bad.push(format!("isomorphism ceiling: {:?}", ks.values));
        }
    }
    report(
        3,
        "game invariants",
        bad.is_empty(),
        &format!(
            "{} pairs x k<=2, {certs} certificates replayed, 116 ceilings, {} violations {:?}",
            structs.len() * (structs.len() + 1) / 2,
            bad.len(),
            bad.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------- 4

fn all_challenges(n1: usize, n2: usize, k: usize) -> Vec<Challenge> {
    let mut out = Vec::new();
    for a in 0..(1u32 << n1) {
        for b in 0..(1u32 << n2) {
            if (a.count_ones() + b.count_ones()) as usize <= k {
                out.push(Challenge::new(
                    (0..n1).filter(|i| a >> i & 1 == 1),
                    (0..n2).filter(|i| b >> i & 1 == 1),
                ));
            }
        }
    }
    out
}

/// Every map the canonical strategy produces against every challenge
/// sequence of `Γ_k`.
fn strategy_maps(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    k: usize,
) -> BTreeSet<PartialMap> {
    let mut strat = Strategy::new(m1, m2, chain, k, opts()).unwrap();
    let challenges = all_challenges(m1.size(), m2.size(), k);
    let mut maps = BTreeSet::new();
    let mut seen = HashSet::new();
    let mut stack = vec![(0usize, PartialMap::new())];
    while let Some((round, f)) = stack.pop() {
        if round > k || !seen.insert((round, f.clone())) {
            continue;
        }
        for ch in &challenges {
            let g = strat
                .respond(round, &f, ch)
                .unwrap()
                .expect("a winning strategy always answers");
            maps.insert(g.clone());
            stack.push((round + 1, g));
        }
    }
    maps
}

/// Rank `<= 2` formulas with free variables among `v0, v1`: sentences and
/// the matrices left after stripping one or two leading quantifiers.
fn ss1_formulas(vocab: &Vocabulary) -> Vec<Formula> {
    let mut out = BTreeSet::new();
    for s in enumerate_sentences(vocab, 4, 2).up_to_size(7) {
        let mut f = s;
        loop {
            if f.quantifier_rank() <= 2 {
                out.insert(f.clone());
            }
            f = match f {
                Formula::Exists(_, b) | Formula::Forall(_, b) => *b,
                _ => break,
            };
        }
    }
    out.into_iter().filter(|f| f.free_vars().len() <= 2).collect()
}

#[test]
fn criterion_4_relativized_transfer() {
    let structs = binary_structures(3);
    let chain = binary_chain();
    let all_formulas = ss1_formulas(&binary_vocab());
    let (mut games, mut distinct_pairs, mut maps_checked, mut checks, mut violations) = (0, 0, 0, 0usize, 0);
    for k in 1..=2 {
        let formulas: Vec<&Formula> = all_formulas.iter().filter(|f| f.quantifier_rank() <= k).collect();
        for i in 0..structs.len() {
            for j in 0..structs.len() {
                let (m1, m2) = (&structs[i], &structs[j]);
                if winner(m1, m2, &chain, k) != Winner::Protagonist {
                    continue;
                }
                games += 1;
                distinct_pairs += usize::from(i != j);
                for f in strategy_maps(m1, m2, &chain, k) {
                    maps_checked += 1;
                    let dom = f.domain();
                    for &phi in &formulas {
                        let vars: Vec<String> = phi.free_vars().into_iter().collect();
                        let tuples: Vec<Vec<Elem>> = match vars.len() {
                            0 => vec![vec![]],
                            1 => dom.iter().map(|&a| vec![a]).collect(),
                            _ => dom.iter().flat_map(|&a| dom.iter().map(move |&b| vec![a, b])).collect(),
                        };
                        for t in tuples {
                            let v: Valuation = vars.iter().cloned().zip(t).collect();
                            checks += 1;
                            if !check_ss1(m1, m2, &f, phi, &v).unwrap() {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    report(
        4,
        "relativized transfer on winning plays",
        violations == 0 && games > 0,
        &format!(
            "{games} protagonist games at k=1,2 ({distinct_pairs} between non-isomorphic structures), {maps_checked} play maps, {} formulas, {checks} checks, {violations} violations",
            all_formulas.len()
        ),
    );
}

// ---------------------------------------------------------------- 5

/// Independent reading of a k-sequence from its parameters.
struct KOracle {
    prefix: Vec<usize>,
    terms: Vec<(i64, i64)>,
    anchor: usize,
}

impl KOracle {
    fn new(prefix: &[usize], tail: &TailClass, anchor: usize) -> Self {
        let terms = match tail {
            TailClass::Bounded(b) => vec![(0, *b as i64)],
            TailClass::Affine { slope, offset } => vec![(*slope as i64, *offset)],
            TailClass::Periodic(p) => p.iter().map(|t| (t.slope as i64, t.offset)).collect(),
        };
        KOracle {
            prefix: prefix.to_vec(),
            terms,
            anchor,
        }
    }

    fn k(&self, n: usize) -> i64 {
        if n < self.prefix.len() {
            return self.prefix[n] as i64;
        }
        let len = self.terms.len() as i64;
        let (s, o) = self.terms[(((n as i64 - self.anchor as i64) % len + len) % len) as usize];
        s * n as i64 + o
    }

    fn member(&self, t: &SetTerm, n: usize) -> bool {
        match t {
            SetTerm::Fin(v) => v.contains(&n),
            SetTerm::Cofin(v) => !v.contains(&n),
            SetTerm::Gen(c) => self.k(n) > *c as i64,
            SetTerm::Periodic(mask) => mask[n % mask.len()],
            SetTerm::Not(a) => !self.member(a, n),
            SetTerm::And(a, b) => self.member(a, n) && self.member(b, n),
            SetTerm::Or(a, b) => self.member(a, n) || self.member(b, n),
        }
    }

    /// Some generator minus the set has no element in the upper half of a
    /// long horizon.
    fn in_filter(&self, t: &SetTerm, horizon: usize) -> bool {
        (0..=40).any(|c| (horizon / 2..horizon).all(|n| self.k(n) <= c || self.member(t, n)))
    }
}

fn random_term(rng: &mut ChaCha8Rng, depth: usize) -> SetTerm {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        match rng.gen_range(0..4) {
            0 => SetTerm::Fin((0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..12)).collect()),
            1 => SetTerm::Cofin((0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..12)).collect()),
            2 => SetTerm::Gen(rng.gen_range(0..7)),
            _ => {
                let len = rng.gen_range(1..=4);
                let mut mask: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.5)).collect();
                if rng.gen_bool(0.2) {
                    mask.iter_mut().for_each(|b| *b = true);
                }
                SetTerm::Periodic(mask)
            }
        }
    } else {
        match rng.gen_range(0..3) {
            0 => SetTerm::Not(Box::new(random_term(rng, depth - 1))),
            1 => SetTerm::And(
                Box::new(random_term(rng, depth - 1)),
                Box::new(random_term(rng, depth - 1)),
            ),
            _ => SetTerm::Or(
                Box::new(random_term(rng, depth - 1)),
                Box::new(random_term(rng, depth - 1)),
            ),
        }
    }
}

fn random_tail(rng: &mut ChaCha8Rng) -> TailClass {
    match rng.gen_range(0..3) {
        0 => TailClass::Bounded(rng.gen_range(0..5)),
        1 => TailClass::Affine {
            slope: rng.gen_range(1..3),
            offset: rng.gen_range(-1..4),
        },
        _ => TailClass::Periodic(
            (0..rng.gen_range(1..4))
                .map(|_| Term {
                    slope: rng.gen_range(0..3),
                    offset: rng.gen_range(0..5),
                })
                .collect(),
        ),
    }
}

fn certificate_holds(o: &KOracle, t: &SetTerm, cert: &Certificate) -> bool {
    match *cert {
        Certificate::Contains { c, n0, horizon } => (n0..horizon).all(|n| o.k(n) <= c as i64 || o.member(t, n)),
        Certificate::Escapes { start, step, horizon } => {
            let along: Vec<usize> = (start..horizon).step_by(step).collect();
            along.len() >= 2
                && along.iter().all(|&n| !o.member(t, n))
                && along.windows(2).all(|w| o.k(w[1]) > o.k(w[0]))
        }
    }
}

#[test]
fn criterion_5_filter_decisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf11);
    let (mut instances, mut wrong, mut bad_cert, mut members) = (0, 0, 0, 0);
    while instances < 300 {
        let prefix: Vec<usize> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..6)).collect();
        let tail = random_tail(&mut rng);
        let anchor = rng.gen_range(0..=prefix.len());
        let Ok(kspec) = KSeqSpec::anchored(prefix.clone(), tail.clone(), anchor) else {
            continue;
        };
        let term = random_term(&mut rng, 3);
        let set = term.eval(Some(&kspec)).unwrap();
        instances += 1;
        let o = KOracle::new(&prefix, &tail, anchor);
        let d = in_filter(&kspec, &set);
        members += usize::from(d.member);
        if d.member != o.in_filter(&term, 2000) {
            wrong += 1;
        }
        if !certificate_holds(&o, &term, &d.certificate) {
            bad_cert += 1;
        }
    }
    // classification over every tail constructor
    let mut tails = Vec::new();
    for b in 0..5 {
        tails.push(TailClass::Bounded(b));
    }
    for slope in 1..4 {
        for offset in 0..3 {
            tails.push(TailClass::Affine { slope, offset });
        }
    }
    let grid = [(0, 0), (0, 3), (1, 0), (2, 1)];
    for len in 1..=3 {
        for mut code in 0..grid.len().pow(len as u32) {
            let terms = (0..len)
                .map(|_| {
                    let (slope, offset) = grid[code % grid.len()];
                    code /= grid.len();
                    Term { slope, offset }
                })
                .collect();
            tails.push(TailClass::Periodic(terms));
        }
    }
    let mut class_wrong = 0;
    for tail in &tails {
        let kspec = KSeqSpec::new(vec![2, 0, 1], tail.clone()).unwrap();
        let o = KOracle::new(&[2, 0, 1], tail, 3);
        let unbounded = (900..1000).any(|n| o.k(n) > 100);
        let expected = if unbounded {
            FilterClass::ProperNonprincipal
        } else {
            FilterClass::Improper
        };
        let empty_in = in_filter(&kspec, &efk::filterlab::SetExpr::empty()).member;
        // the remark: otherwise D_k is the full power set, so ∅ belongs to it
        if classify(&kspec) != expected || empty_in != !unbounded {
            class_wrong += 1;
        }
    }
    report(
        5,
        "filter decisions",
        wrong == 0 && bad_cert == 0 && class_wrong == 0,
        &format!(
            "{instances} random instances ({members} members), {wrong} wrong answers, {bad_cert} bad certificates; {} tails classified, {class_wrong} wrong",
            tails.len()
        ),
    );
}

// ---------------------------------------------------------------- 6

fn all_functions(window: usize, bound: usize) -> Vec<Vec<usize>> {
    (0..bound.pow(window as u32))
        .map(|mut code| {
            (0..window)
                .map(|_| {
                    let v = code % bound;
                    code /= bound;
                    v
                })
                .collect()
        })
        .collect()
}

fn subsets_up_to(items: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &frontier {
            let from = s.last().map_or(0, |&l: &usize| l + 1);
            for i in from..items {
                let mut t: Vec<usize> = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn block_fits(h: &[Vec<usize>], block: &[usize], g: &[usize], req: &[usize]) -> bool {
    req.iter()
        .all(|&n| block.iter().map(|&i| h[i][n]).collect::<BTreeSet<_>>().len() <= g[n])
}

/// Fewest blocks over all set partitions of `0..h.len()`.
fn brute_min_partition(h: &[Vec<usize>], g: &[usize], req: &[usize]) -> Option<usize> {
    fn go(
        i: usize,
        blocks: &mut Vec<Vec<usize>>,
        h: &[Vec<usize>],
        g: &[usize],
        req: &[usize],
        best: &mut Option<usize>,
    ) {
        if i == h.len() {
            if blocks.iter().all(|b| block_fits(h, b, g, req)) && best.is_none_or(|b| blocks.len() < b) {
                *best = Some(blocks.len());
            }
            return;
        }
        for j in 0..blocks.len() {
            blocks[j].push(i);
            go(i + 1, blocks, h, g, req, best);
            blocks[j].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, blocks, h, g, req, best);
        blocks.pop();
    }
    let mut best = None;
    go(0, &mut Vec::new(), h, g, req, &mut best);
    best
}

fn slalom_ok(s: &Slalom, h: &[Vec<usize>], g: &[usize], req: &[usize]) -> bool {
    s.cells.iter().zip(g).all(|(c, &gn)| c.len() <= gn)
        && h.iter().all(|eta| req.iter().all(|&n| s.cells[n].contains(&eta[n])))
}

/// Any slalom with cells inside `0..bound` catching all of `h`?
fn brute_single_exists(h: &[Vec<usize>], g: &[usize], req: &[usize], bound: usize) -> bool {
    let cells: Vec<Vec<BTreeSet<usize>>> = g
        .iter()
        .map(|&gn| {
            (0u32..1 << bound)
                .filter(|m| m.count_ones() as usize <= gn)
                .map(|m| (0..bound).filter(|v| m >> v & 1 == 1).collect())
                .collect()
        })
        .collect();
    let mut idx = vec![0; g.len()];
    loop {
        let ok = h
            .iter()
            .all(|eta| req.iter().all(|&n| cells[n][idx[n]].contains(&eta[n])));
        if ok {
            return true;
        }
        let mut n = 0;
        loop {
            if n == g.len() {
                return false;
            }
            idx[n] += 1;
            if idx[n] < cells[n].len() {
                break;
            }
            idx[n] = 0;
            n += 1;
        }
    }
}

fn modes(window: usize) -> Vec<CoverMode> {
    let kseq = KSeqSpec::new(
        (0..window).map(|n| n % 3).collect(),
        TailClass::Affine { slope: 1, offset: 0 },
    )
    .unwrap();
    vec![
        CoverMode::Everywhere,
        CoverMode::Filtered {
            c: 0,
            n0: 0,
            kseq: kseq.clone(),
        },
        CoverMode::Filtered { c: 1, n0: 1, kseq },
    ]
}

#[test]
fn criterion_6_slalom_exactness() {
    let (mut singles, mut single_bad, mut brute_checked) = (0usize, 0, 0);
    for window in 1..=3 {
        for bound in 1..=3 {
            let fns = all_functions(window, bound);
            let caps = all_functions(window, bound + 1);
            for mode in modes(window) {
                let req = mode.required_set(window);
                for pick in subsets_up_to(fns.len(), 4) {
                    let h: Vec<Vec<usize>> = pick.iter().map(|&i| fns[i].clone()).collect();
                    let fam = WindowFunctionFamily::new(window, bound, h.clone()).unwrap();
                    for g in &caps {
                        singles += 1;
                        let expected = req
                            .iter()
                            .all(|&n| h.iter().map(|f| f[n]).collect::<BTreeSet<_>>().len() <= g[n]);
                        let got = single_slalom_cover(&fam, g, &mode).unwrap();
                        let ok = match &got {
                            Ok(s) => expected && slalom_ok(s, &h, g, &req),
                            Err(inf) => !expected && inf.values.iter().collect::<BTreeSet<_>>().len() > g[inf.index],
                        };
                        if window <= 2 && h.len() <= 3 {
                            brute_checked += 1;
                            if brute_single_exists(&h, g, &req, bound) != expected {
                                single_bad += 1;
                            }
                        }
                        if !ok {
                            single_bad += 1;
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a);
    let (mut exact_runs, mut exact_bad) = (0, 0);
    for _ in 0..400 {
        let window = rng.gen_range(1..=3);
        let bound = rng.gen_range(1..=4);
        let size = rng.gen_range(0..=6);
        let h: Vec<Vec<usize>> = (0..size)
            .map(|_| (0..window).map(|_| rng.gen_range(0..bound)).collect())
            .collect();
        let g: Vec<usize> = (0..window).map(|_| rng.gen_range(0..=bound)).collect();
        let mode = modes(window).swap_remove(rng.gen_range(0..3));
        let req = mode.required_set(window);
        let fam = WindowFunctionFamily::new(window, bound, h.clone()).unwrap();
        let ex = min_cover_exact(&fam, &g, &mode, 10).unwrap();
        exact_runs += 1;
        let brute = brute_min_partition(&h, &g, &req);
        let family_ok = ex
            .family
            .iter()
            .all(|s| s.cells.iter().zip(&g).all(|(c, &gn)| c.len() <= gn))
            && (ex.size.is_none()
                || h.iter().all(|eta| {
                    ex.family
                        .iter()
                        .any(|s| req.iter().all(|&n| s.cells[n].contains(&eta[n])))
                }));
        if ex.size != brute || !family_ok || ex.size.is_some_and(|s| s != ex.family.len()) {
            exact_bad += 1;
        }
    }
    let four = WindowFunctionFamily::new(2, 4, vec![vec![0, 0], vec![1, 1], vec![2, 2], vec![3, 3]]).unwrap();
    let four_min = min_cover_exact(&four, &[1, 1], &CoverMode::Everywhere, 10)
        .unwrap()
        .size;
    report(
        6,
        "slalom exactness",
        single_bad == 0 && exact_bad == 0 && four_min == Some(4),
        &format!(
            "{singles} feasibility cases ({brute_checked} also by slalom search), {single_bad} wrong; {exact_runs} exact covers vs partition search, {exact_bad} wrong; four-function minimum {four_min:?}"
        ),
    );
}

// ---------------------------------------------------------------- 7

fn random_sets(rng: &mut ChaCha8Rng, k: &[usize], size: usize) -> String {
    if rng.gen_bool(0.4) {
        return format!("all:{}", rng.gen_range(0..size));
    }
    k.iter()
        .map(|&kn| {
            let take = rng.gen_range(0..=kn.min(2));
            let mut s: Vec<usize> = (0..size).collect();
            rand::seq::SliceRandom::shuffle(&mut s[..], rng);
            let mut s: Vec<usize> = s.into_iter().take(take).collect();
            s.sort();
            s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn random_script(rng: &mut ChaCha8Rng, k: &[usize], size: usize) -> String {
    let mut lines = vec![
        format!("window {} {}", rng.gen_range(0..2), rng.gen_range(0..2)),
        "mark".to_string(),
    ];
    for _ in 0..rng.gen_range(2..6) {
        let side = rng.gen_range(1..=2);
        let sigma = if rng.gen_bool(0.7) { 0 } else { 1 };
        lines.push(format!("extend {side} {} sigma={sigma}", random_sets(rng, k, size)));
        if rng.gen_bool(0.7) {
            lines.push("mark".into());
        }
    }
    lines.push(format!("merge {}", rng.gen_range(1..5)));
    lines.push("check 1 6".into());
    lines.push("check 2 6".into());
    lines.join("\n") + "\n"
}

/// `ℓ_n` straight from the three clauses.
fn clause_ell(bf: &BackForth, chain: &[Approximation], eta: usize, n: usize) -> usize {
    let l_last = chain.len() - 1;
    (0..=l_last)
        .filter(|&l| {
            let a = l <= eta;
            let b = (0..=l + 1).all(|i| i >= l_last || chain[i].plays[n].is_prefix_of(&chain[i + 1].plays[n]));
            let c = (0..=l).all(|i| bf.slack(&chain[i], n) >= eta as isize);
            a && b && c
        })
        .max()
        .unwrap_or(0)
}

#[test]
fn criterion_7_back_and_forth_postconditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbf);
    let vocabs = [
        binary_vocab(),
        Vocabulary::from_symbols([Symbol::relation("R", 2), Symbol::relation("P", 1)]).unwrap(),
    ];
    let mut bad: Vec<String> = Vec::new();
    let (mut chains, mut extends, mut merges, mut checked) = (0, 0, 0, 0usize);
    for run in 0..60 {
        let spec = iso_problem(&mut rng, 6, 3, &vocabs[run % 2]);
        let k = compute_k_seq(&spec, opts(), 1).unwrap().exact().unwrap();
        if k != vec![0, 1, 2, 3, 4, 5] {
            bad.push(format!("run {run}: k = {k:?}"));
            continue;
        }
        let bf = BackForth::new(&spec, k.clone(), opts()).unwrap();
        let text = random_script(&mut rng, &k, 3);
        let ops = parse_script(&text).unwrap();
        let report = match run_script(&bf, &ops) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("run {run}: {e}"));
                continue;
            }
        };
        chains += 1;
        for step in &report.steps {
            let w = step.window;
            let active = bf.active(w);
            // every map the engine produced is legal
            for (n, play) in step.after.plays.iter().enumerate() {
                let (m1, m2) = spec.pair(n);
                for r in &play.rounds {
                    if !is_partial_isomorphism(m1, m2, spec.chain.at_budget(k[n]), &r.response).unwrap() {
                        bad.push(format!("run {run} line {}: illegal map at {n}", step.line));
                    }
                }
            }
            match &step.op {
                ScriptOp::Extend { side, sets, sigma } => {
                    extends += 1;
                    if !bf.leq_ap(&step.before, &step.after, w) {
                        bad.push(format!("run {run} line {}: extend not above its input", step.line));
                    }
                    let wn = sets.expand(k.len());
                    for &n in &active {
                        let f = step.after.map(n);
                        let covered = match side {
                            Side::One => wn[n].iter().all(|&a| f.get(a).is_some()),
                            Side::Two => wn[n].iter().all(|&b| f.preimage(b).is_some()),
                        };
                        if bf.slack(&step.before, n) > *sigma as isize && !covered {
                            bad.push(format!("run {run} line {}: {:?} not covered at {n}", step.line, wn[n]));
                        }
                    }
                }
                ScriptOp::Merge { sigma_target } => {
                    merges += 1;
                    let (chain, m) = step.merge.as_ref().unwrap();
                    for i in 0..chain.len() {
                        if !bf.leq_ap(&chain[i], &chain[i], w) {
                            bad.push("leq_ap not reflexive".into());
                        }
                        for j in i..chain.len() {
                            if !bf.leq_ap(&chain[i], &chain[j], w) {
                                bad.push(format!("run {run}: chain not transitive at {i},{j}"));
                            }
                        }
                    }
                    for n in 0..k.len() {
                        let eta = chain
                            .iter()
                            .map(|s| bf.slack(s, n))
                            .min()
                            .unwrap()
                            .max(0)
                            .min(*sigma_target as isize) as usize;
                        if m.eta[n] != eta {
                            bad.push(format!("run {run}: eta at {n} is {} not {eta}", m.eta[n]));
                        }
                        let ell = clause_ell(&bf, chain, eta, n);
                        if m.ell[n] != ell || step.after.plays[n] != chain[ell].plays[n] {
                            bad.push(format!("run {run}: ell at {n} is {} not {ell}", m.ell[n]));
                        }
                        if bf.slack(&step.after, n) < eta as isize {
                            bad.push(format!("run {run}: slack below eta at {n}"));
                        }
                    }
                    for (l_star, s) in chain.iter().enumerate() {
                        for n in m.sub_window(&active, l_star) {
                            if !s.plays[n].is_prefix_of(&step.after.plays[n]) {
                                bad.push(format!("run {run}: chain member {l_star} not below the merge at {n}"));
                            }
                        }
                    }
                }
                ScriptOp::Check { .. } => {
                    let c = step.check.as_ref().unwrap();
                    checked += c.checked;
                    for v in &c.violations {
                        bad.push(format!(
                            "run {run}: {} at index {} on {:?}",
                            v.formula, v.index, v.tuple
                        ));
                    }
                }
                _ => {}
            }
        }
        // rank <= 2 cleanliness on every marked member too
        let phis = check_formulas(&bf, 2, 6);
        for step in &report.steps {
            if let Some((chain, _)) = &step.merge {
                for s in chain {
                    let r = bf.check_partial_elementary(s, &phis, 2).unwrap();
                    checked += r.checked;
                    if !r.is_clean() {
                        bad.push(format!("run {run}: dirty chain member"));
                    }
                }
            }
        }
    }
    report(
        7,
        "back-and-forth postconditions",
        bad.is_empty() && chains >= 50,
        &format!("{chains} scripted chains, {extends} extends, {merges} merges, {checked} elementary checks, {} violations {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()),
    );
}

// ---------------------------------------------------------------- 8

fn cli_assemble(problem: &str, enums: &str, tag: usize) -> (i32, Vec<u8>) {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let p = dir.join(format!("assemble-{tag}.problem"));
    let e = dir.join(format!("assemble-{tag}.enum"));
    std::fs::write(&p, problem).unwrap();
    std::fs::write(&e, enums).unwrap();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = efk::cli::run(
        [
            "efk",
            "--format",
            "records",
            "assemble",
            p.to_str().unwrap(),
            e.to_str().unwrap(),
        ],
        &mut out,
        &mut err,
    );
    (code, out)
}

#[test]
fn criterion_8_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa55);
    let mut bad: Vec<String> = Vec::new();
    let mut runs = 0;
    for run in 0..12 {
        let vocab = if run % 2 == 0 { binary_vocab() } else { order_vocab() };
        let spec = iso_problem(&mut rng, 6, 3, &vocab);
        let k = compute_k_seq(&spec, opts(), 1).unwrap().exact().unwrap();
        let seq = |rng: &mut ChaCha8Rng| (0..6).map(|_| rng.gen_range(0..3)).collect::<Vec<Elem>>();
        let e1 = vec![seq(&mut rng), seq(&mut rng)];
        let e2 = vec![seq(&mut rng), seq(&mut rng)];
        let bf = BackForth::new(&spec, k.clone(), opts()).unwrap();
        let a = bf.assemble(&e1, &e2, None).unwrap();
        runs += 1;
        if a.active.iter().any(|&n| k[n] < 4) || a.active.is_empty() {
            bad.push(format!("run {run}: window {:?} has k below 4", a.active));
        }
        for &n in &a.active {
            let (m1, m2) = spec.pair(n);
            let f = a.approx.map(n);
            let mut forward = BTreeMap::new();
            let mut backward = BTreeMap::new();
            for row in &a.rows {
                let (Some(x), Some(y)) = (row.h1[n], row.h2[n]) else {
                    bad.push(format!("run {run}: row {:?}#{} undefined at {n}", row.side, row.entry));
                    continue;
                };
                if *forward.entry(x).or_insert(y) != y || *backward.entry(y).or_insert(x) != x || f.get(x) != Some(y) {
                    bad.push(format!("run {run}: table not an injective part of f at {n}"));
                }
            }
            for h in &e1 {
                if f.get(h[n]).is_none() {
                    bad.push(format!("run {run}: E1 entry not in the domain at {n}"));
                }
            }
            for h in &e2 {
                if f.preimage(h[n]).is_none() {
                    bad.push(format!("run {run}: E2 entry not in the range at {n}"));
                }
            }
            if !is_partial_isomorphism(m1, m2, spec.chain.top(), &f).unwrap() {
                bad.push(format!("run {run}: atomic type not preserved at {n}"));
            }
            // the same check through an independent evaluation of atoms
            let dom = f.domain();
            for &x in &dom {
                for &y in &dom {
                    for rel in ["R", "<"] {
                        if m1.holds(rel, &[x, y]) != m2.holds(rel, &[f.get(x).unwrap(), f.get(y).unwrap()]) {
                            bad.push(format!("run {run}: {rel} not preserved at {n}"));
                        }
                    }
                }
            }
        }
        let phis = check_formulas(&bf, 1, 6);
        let r = bf.check_partial_elementary(&a.approx, &phis, 1).unwrap();
        if !r.is_clean() {
            bad.push(format!("run {run}: rank-1 check has {} violations", r.violations.len()));
        }
        let again = BackForth::new(&spec, k.clone(), opts())
            .unwrap()
            .assemble(&e1, &e2, None)
            .unwrap();
        if again != a {
            bad.push(format!("run {run}: assembly not reproducible"));
        }
        let problem = efk::structures::print_problem(&spec);
        let enums: String = e1
            .iter()
            .map(|h| (1, h))
            .chain(e2.iter().map(|h| (2, h)))
            .map(|(s, h)| {
                format!(
                    "{s}: {}\n",
                    h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
                )
            })
            .collect();
        let (c1, o1) = cli_assemble(&problem, &enums, 2 * run);
        let (c2, o2) = cli_assemble(&problem, &enums, 2 * run + 1);
        if c1 != 0 || c2 != 0 || o1 != o2 || o1.is_empty() {
            bad.push(format!("run {run}: cli output differs or failed ({c1}, {c2})"));
        }
    }
    report(
        8,
        "assembly",
        bad.is_empty(),
        &format!(
            "{runs} assemblies on size-3 isomorphic pairs, byte-identical reruns, {} violations {:?}",
            bad.len(),
            bad.iter().take(3).collect::<Vec<_>>()
        ),
    );
}
