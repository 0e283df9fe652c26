use std::collections::BTreeSet;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Approximation, Play, Round};
use crate::efgame::{Challenge, PartialMap};
use crate::structures::{print_problem, Elem, ProblemSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct TranscriptError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> TranscriptError {
    TranscriptError { line, msg: msg.into() }
}

/// SHA-256 of the canonical problem text, hex encoded.
pub fn spec_digest(spec: &ProblemSpec) -> String {
    hex::encode(Sha256::digest(print_problem(spec).as_bytes()))
}

fn join<I: IntoIterator<Item = T>, T: ToString>(xs: I, sep: &str) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// ```text
/// #approx N=3 spec=<sha256> kseq=0,1,2
/// #index 1 rounds=1
/// A=0 B= f=0:0
/// ```
pub fn print_transcript(digest: &str, kseq: &[usize], s: &Approximation) -> String {
    let mut out = format!("#approx N={} spec={digest} kseq={}\n", kseq.len(), join(kseq, ","));
    for (n, play) in s.plays.iter().enumerate() {
        let _ = writeln!(out, "#index {n} rounds={}", play.len());
        for r in &play.rounds {
            let f = join(r.response.pairs().map(|(a, b)| format!("{a}:{b}")), ",");
            let _ = writeln!(
                out,
                "A={} B={} f={f}",
                join(&r.challenge.a, ","),
                join(&r.challenge.b, ",")
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub digest: String,
    pub kseq: Vec<usize>,
    pub approx: Approximation,
}

fn elems(line: usize, text: &str) -> Result<BTreeSet<Elem>, TranscriptError> {
    if text.is_empty() {
        return Ok(BTreeSet::new());
    }
    text.split(',')
        .map(|w| w.parse().map_err(|_| err(line, format!("bad element `{w}`"))))
        .collect()
}

fn field<'a>(line: usize, word: Option<&'a str>, key: &str) -> Result<&'a str, TranscriptError> {
    word.and_then(|w| w.strip_prefix(key))
        .and_then(|w| w.strip_prefix('='))
        .ok_or_else(|| err(line, format!("expected `{key}=`")))
}

pub fn parse_transcript(text: &str) -> Result<Transcript, TranscriptError> {
    let mut header: Option<(String, Vec<usize>)> = None;
    let mut plays: Vec<Play> = Vec::new();
    let mut declared: Vec<usize> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let first = words.next().unwrap();
        match first {
            "#approx" => {
                if header.is_some() {
                    return Err(err(line, "duplicate #approx header"));
                }
                let n: usize = field(line, words.next(), "N")?
                    .parse()
                    .map_err(|_| err(line, "bad N"))?;
                let digest = field(line, words.next(), "spec")?.to_string();
                let kseq: Vec<usize> = match field(line, words.next(), "kseq")? {
                    "" => Vec::new(),
                    ks => ks
                        .split(',')
                        .map(|w| w.parse().map_err(|_| err(line, format!("bad k value `{w}`"))))
                        .collect::<Result<_, _>>()?,
                };
                if kseq.len() != n {
                    return Err(err(line, format!("kseq has {} entries, N={n}", kseq.len())));
                }
                header = Some((digest, kseq));
            }
            "#index" => {
                let (_, kseq) = header.as_ref().ok_or_else(|| err(line, "#index before #approx"))?;
                let n: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err(line, "bad index"))?;
                if n != plays.len() || n >= kseq.len() {
                    return Err(err(line, format!("expected index {}", plays.len())));
                }
                let rounds: usize = field(line, words.next(), "rounds")?
                    .parse()
                    .map_err(|_| err(line, "bad rounds"))?;
                plays.push(Play::default());
                declared.push(rounds);
            }
            _ => {
                let play = plays.last_mut().ok_or_else(|| err(line, "round before #index"))?;
                let a = elems(line, field(line, Some(first), "A")?)?;
                let b = elems(line, field(line, words.next(), "B")?)?;
                let f = field(line, words.next(), "f")?;
                let mut pairs = Vec::new();
                if !f.is_empty() {
                    for p in f.split(',') {
                        let (x, y) = p.split_once(':').ok_or_else(|| err(line, format!("bad pair `{p}`")))?;
                        let x = x.parse().map_err(|_| err(line, format!("bad pair `{p}`")))?;
                        let y = y.parse().map_err(|_| err(line, format!("bad pair `{p}`")))?;
                        pairs.push((x, y));
                    }
                }
                let response = PartialMap::from_pairs(pairs).map_err(|e| err(line, e.to_string()))?;
                play.rounds.push(Round {
                    challenge: Challenge { a, b },
                    response,
                });
            }
        }
    }
    let (digest, kseq) = header.ok_or_else(|| err(0, "missing #approx header"))?;
    if plays.len() != kseq.len() {
        return Err(err(0, format!("{} index blocks, N={}", plays.len(), kseq.len())));
    }
    for (n, (p, &d)) in plays.iter().zip(&declared).enumerate() {
        if p.len() != d {
            return Err(err(0, format!("index {n} declares {d} rounds, has {}", p.len())));
        }
    }
    Ok(Transcript {
        digest,
        kseq,
        approx: Approximation { plays },
    })
}
