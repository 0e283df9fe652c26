use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{is_partial_isomorphism, map_of, CapReached, Challenge, GameError, PartialMap, Solver};
use crate::structures::{Elem, FiniteStructure, VocabularyChain};

/// Protagonist strategy restricted to the positions it can reach. Keyed by
/// (round, current map, unmatched part of the challenge); challenges whose
/// unmatched part is empty are answered by keeping the map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtagonistCert {
    pub k: usize,
    pub table: BTreeMap<(usize, PartialMap, Challenge), PartialMap>,
}

impl ProtagonistCert {
    pub fn response(&self, round: usize, f: &PartialMap, ch: &Challenge) -> Option<PartialMap> {
        let fresh = ch.fresh_part(f);
        if fresh.is_empty() {
            return Some(f.clone());
        }
        self.table.get(&(round, f.clone(), fresh)).cloned()
    }
}

/// One antagonist move and its continuation against every minimal reply.
/// A node without replies is a position where the protagonist is stuck.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntagonistNode {
    pub f: PartialMap,
    pub challenge: Challenge,
    pub replies: Vec<(PartialMap, AntagonistNode)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntagonistCert {
    pub k: usize,
    pub root: AntagonistNode,
}

impl AntagonistNode {
    pub fn size(&self) -> usize {
        1 + self.replies.iter().map(|(_, n)| n.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.replies.iter().map(|(_, n)| n.depth()).max().unwrap_or(0)
    }
}

fn challenge_of(a: &[usize], b: &[usize]) -> Challenge {
    Challenge::new(a.iter().copied(), b.iter().copied())
}

pub(super) fn protagonist_cert(solver: &mut Solver) -> Result<ProtagonistCert, CapReached> {
    let mut table = BTreeMap::new();
    let mut seen = HashSet::new();
    let (fwd, bwd) = solver.arena.empty_state();
    walk(solver, 0, fwd, bwd, &mut table, &mut seen)?;
    Ok(ProtagonistCert { k: solver.k, table })
}

fn walk(
    solver: &mut Solver,
    round: usize,
    fwd: Vec<u8>,
    bwd: Vec<u8>,
    table: &mut BTreeMap<(usize, PartialMap, Challenge), PartialMap>,
    seen: &mut HashSet<(usize, Vec<u8>)>,
) -> Result<(), CapReached> {
    if round > solver.k || !seen.insert((round, fwd.clone())) {
        return Ok(());
    }
    let rounds = solver.k + 1 - round;
    let arena = solver.arena.clone();
    for (a_new, b_new) in arena.challenges(&fwd, &bwd, solver.k) {
        let reply = solver
            .answer(rounds, &fwd, &bwd, &a_new, &b_new)?
            .expect("winning position answers every challenge");
        let f2 = map_of(&reply);
        table.insert((round, map_of(&fwd), challenge_of(&a_new, &b_new)), f2.clone());
        let (r1, r2) = arena.state_of(&f2).expect("engine map fits");
        walk(solver, round + 1, r1, r2, table, seen)?;
    }
    // a challenge on matched elements only leaves the map as it is
    walk(solver, round + 1, fwd, bwd, table, seen)
}

pub(super) fn antagonist_cert(solver: &mut Solver) -> Result<AntagonistCert, CapReached> {
    let (fwd, bwd) = solver.arena.empty_state();
    let root = if solver.arena.root_ok() {
        refute(solver, 0, fwd, bwd)?
    } else {
        AntagonistNode {
            f: PartialMap::new(),
            challenge: Challenge::default(),
            replies: Vec::new(),
        }
    };
    Ok(AntagonistCert { k: solver.k, root })
}

fn refute(solver: &mut Solver, round: usize, fwd: Vec<u8>, bwd: Vec<u8>) -> Result<AntagonistNode, CapReached> {
    let rounds = solver.k + 1 - round;
    let arena = solver.arena.clone();
    for (a_new, b_new) in arena.challenges(&fwd, &bwd, solver.k) {
        if solver.answer(rounds, &fwd, &bwd, &a_new, &b_new)?.is_some() {
            continue;
        }
        let mut replies = Vec::new();
        let (mut f, mut g) = (fwd.clone(), bwd.clone());
        arena
            .for_each_response::<()>(&mut f, &mut g, &a_new, &b_new, &mut |f2, g2| {
                replies.push((f2.to_vec(), g2.to_vec()));
                Ok(false)
            })
            .expect("collecting replies cannot fail");
        let mut children = Vec::new();
        for (f2, g2) in replies {
            let map = map_of(&f2);
            children.push((map, refute(solver, round + 1, f2, g2)?));
        }
        return Ok(AntagonistNode {
            f: map_of(&fwd),
            challenge: challenge_of(&a_new, &b_new),
            replies: children,
        });
    }
    unreachable!("losing position without a refuting challenge")
}

/// Every challenge `A ⊆ M¹`, `B ⊆ M²` with `|A| + |B| <= k`.
fn all_challenges(n1: usize, n2: usize, k: usize) -> Vec<Challenge> {
    let total = n1 + n2;
    assert!(total < 26, "exhaustive challenge enumeration is for tiny universes");
    (0u32..1 << total)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| {
            Challenge::new(
                (0..n1).filter(|&i| m >> i & 1 == 1),
                (0..n2).filter(|&j| m >> (n1 + j) & 1 == 1),
            )
        })
        .collect()
}

/// Replays the table against every challenge sequence of `Γ_k`.
pub fn verify_protagonist(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    cert: &ProtagonistCert,
) -> Result<(), String> {
    let vocab = chain.at_budget(cert.k);
    let iso = |f: &PartialMap| is_partial_isomorphism(m1, m2, vocab, f).map_err(|e| e.to_string());
    if !iso(&PartialMap::new())? {
        return Err("the empty map is not legal".into());
    }
    let challenges = all_challenges(m1.size(), m2.size(), cert.k);
    let mut frontier = BTreeSet::from([PartialMap::new()]);
    for round in 0..=cert.k {
        let mut next = BTreeSet::new();
        for f in &frontier {
            for ch in &challenges {
                let g = cert
                    .response(round, f, ch)
                    .ok_or_else(|| format!("round {round}: no response to {ch} from {f}"))?;
                if !f.is_subset(&g) {
                    return Err(format!("round {round}: {g} does not extend {f}"));
                }
                if !ch.is_met_by(&g) {
                    return Err(format!("round {round}: {g} does not cover {ch}"));
                }
                if g.pairs().any(|(a, b)| a >= m1.size() || b >= m2.size()) || !iso(&g)? {
                    return Err(format!("round {round}: {g} is not a partial isomorphism"));
                }
                next.insert(g);
            }
        }
        frontier = next;
    }
    Ok(())
}

/// All minimal legal replies, by brute force over sets of candidate pairs.
fn brute_replies(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    vocab: &crate::structures::Vocabulary,
    f: &PartialMap,
    ch: &Challenge,
) -> Result<BTreeSet<PartialMap>, GameError> {
    let fresh = ch.fresh_part(f);
    let ran: BTreeSet<Elem> = f.range().into_iter().collect();
    let mut cand = Vec::new();
    for a in (0..m1.size()).filter(|&a| f.get(a).is_none()) {
        for b in (0..m2.size()).filter(|b| !ran.contains(b)) {
            if fresh.a.contains(&a) || fresh.b.contains(&b) {
                cand.push((a, b));
            }
        }
    }
    let mut out = BTreeSet::new();
    let limit = fresh.cost();
    let mut chosen = Vec::new();
    fn go(
        i: usize,
        cand: &[(Elem, Elem)],
        chosen: &mut Vec<(Elem, Elem)>,
        limit: usize,
        f: &PartialMap,
        ch: &Challenge,
        keep: &mut dyn FnMut(PartialMap) -> Result<(), GameError>,
    ) -> Result<(), GameError> {
        if i == cand.len() {
            let mut g = f.clone();
            for &(a, b) in chosen.iter() {
                if !g.insert(a, b) {
                    return Ok(());
                }
            }
            if ch.is_met_by(&g) {
                keep(g)?;
            }
            return Ok(());
        }
        go(i + 1, cand, chosen, limit, f, ch, keep)?;
        if chosen.len() < limit {
            chosen.push(cand[i]);
            go(i + 1, cand, chosen, limit, f, ch, keep)?;
            chosen.pop();
        }
        Ok(())
    }
    go(0, &cand, &mut chosen, limit, f, ch, &mut |g| {
        if is_partial_isomorphism(m1, m2, vocab, &g)? {
            out.insert(g);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Checks that the tree answers every minimal reply, stays within budget
/// and round count, and ends only where the protagonist has no reply.
pub fn verify_antagonist(
    m1: &FiniteStructure,
    m2: &FiniteStructure,
    chain: &VocabularyChain,
    cert: &AntagonistCert,
) -> Result<(), String> {
    let vocab = chain.at_budget(cert.k);
    fn check(
        node: &AntagonistNode,
        f: &PartialMap,
        round: usize,
        k: usize,
        m1: &FiniteStructure,
        m2: &FiniteStructure,
        vocab: &crate::structures::Vocabulary,
    ) -> Result<(), String> {
        if round > k {
            return Err(format!("the protagonist survived all {} rounds at {f}", k + 1));
        }
        if &node.f != f {
            return Err(format!("round {round}: node map {} differs from play {f}", node.f));
        }
        let ch = &node.challenge;
        if ch.cost() > k || ch.a.iter().any(|&a| a >= m1.size()) || ch.b.iter().any(|&b| b >= m2.size()) {
            return Err(format!("round {round}: illegal challenge {ch}"));
        }
        let legal = brute_replies(m1, m2, vocab, f, ch).map_err(|e| e.to_string())?;
        let answered: BTreeSet<PartialMap> = node.replies.iter().map(|(g, _)| g.clone()).collect();
        if legal != answered || answered.len() != node.replies.len() {
            return Err(format!(
                "round {round}: replies to {ch} from {f} do not match the legal minimal replies"
            ));
        }
        for (g, child) in &node.replies {
            check(child, g, round + 1, k, m1, m2, vocab)?;
        }
        Ok(())
    }
    check(&cert.root, &PartialMap::new(), 0, cert.k, m1, m2, vocab)
}
