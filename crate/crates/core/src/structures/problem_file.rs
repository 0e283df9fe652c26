//! Line-oriented problem files.
//!
//! ```text
//! #problem N=2 tail=affine(1,0)
//! #bound 3 3                       (optional per-index size cap)
//! #vocab level=0
//! #vocab level=1 </2:rel c/0:const
//! #structure side=1 index=0 size=3
//! <: 0 1; 0 2; 1 2
//! c: 0
//! #structure side=2 index=0 size=3
//! ...
//! ```
//!
//! Each `#vocab` line lists the full vocabulary of its level. A tail may
//! carry a start index, `tail=bounded(1)@0`; without one it starts at `N`.
//! Blank lines and lines starting with `//` are skipped. Everything else is
//! strict.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{FiniteStructure, ProblemSpec, Symbol, SymbolKind, Vocabulary, VocabularyChain};
use crate::filterlab::parse_tail;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ProblemParseError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> ProblemParseError {
    ProblemParseError { line, msg: msg.into() }
}

fn key_values(line: usize, fields: &[&str]) -> Result<BTreeMap<String, String>, ProblemParseError> {
    let mut out = BTreeMap::new();
    for f in fields {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got `{f}`")))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(line, format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

fn take_num(line: usize, kv: &mut BTreeMap<String, String>, key: &str) -> Result<usize, ProblemParseError> {
    let v = kv.remove(key).ok_or_else(|| err(line, format!("missing `{key}=`")))?;
    v.parse().map_err(|_| err(line, format!("bad value `{v}` for `{key}`")))
}

fn no_extra(line: usize, kv: &BTreeMap<String, String>) -> Result<(), ProblemParseError> {
    match kv.keys().next() {
        Some(k) => Err(err(line, format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

fn parse_symbol(line: usize, text: &str) -> Result<Symbol, ProblemParseError> {
    let (body, kind) = match text.rsplit_once(':') {
        Some((b, "rel")) => (b, SymbolKind::Relation),
        Some((b, "fun")) => (b, SymbolKind::Function),
        Some((b, "const")) => (b, SymbolKind::Constant),
        Some((_, k)) => return Err(err(line, format!("unknown symbol kind `{k}`"))),
        None => (text, SymbolKind::Relation),
    };
    let (name, arity) = body
        .rsplit_once('/')
        .ok_or_else(|| err(line, format!("symbol `{text}` needs `name/arity`")))?;
    if name.is_empty() || name.contains(|c: char| c.is_whitespace() || ";:,()=".contains(c)) {
        return Err(err(line, format!("bad symbol name `{name}`")));
    }
    let arity = arity.parse().map_err(|_| err(line, format!("bad arity in `{text}`")))?;
    Ok(Symbol {
        name: name.to_string(),
        kind,
        arity,
    })
}

fn parse_elems(line: usize, text: &str, size: usize) -> Result<Vec<usize>, ProblemParseError> {
    text.split_whitespace()
        .map(|t| {
            let e: usize = t.parse().map_err(|_| err(line, format!("bad element `{t}`")))?;
            if e >= size {
                return Err(err(line, format!("element {e} outside universe of size {size}")));
            }
            Ok(e)
        })
        .collect()
}

struct Pending {
    side: u8,
    index: usize,
    structure: FiniteStructure,
    seen: Vec<String>,
}

fn interpret(line: usize, text: &str, vocab: &Vocabulary, p: &mut Pending) -> Result<(), ProblemParseError> {
    let (name, body) = text
        .split_once(':')
        .ok_or_else(|| err(line, "expected `symbol: ...`"))?;
    let name = name.trim();
    let sym = vocab
        .get(name)
        .ok_or_else(|| err(line, format!("symbol `{name}` not in the top vocabulary")))?;
    if p.seen.iter().any(|s| s == name) {
        return Err(err(line, format!("symbol `{name}` interpreted twice")));
    }
    p.seen.push(name.to_string());
    let size = p.structure.size();
    let entries = body.split(';').map(str::trim).filter(|e| !e.is_empty());
    match sym.kind {
        SymbolKind::Relation => {
            let tuples = entries
                .map(|e| {
                    let t = parse_elems(line, e, size)?;
                    if t.len() != sym.arity {
                        return Err(err(line, format!("tuple `{e}` has wrong arity for `{name}`")));
                    }
                    Ok(t)
                })
                .collect::<Result<Vec<_>, _>>()?;
            p.structure.set_relation(name, sym.arity, tuples);
        }
        SymbolKind::Function => {
            let cells = size.pow(sym.arity as u32);
            let mut table = vec![None; cells];
            for e in entries {
                let (args, value) = e
                    .split_once("->")
                    .ok_or_else(|| err(line, format!("function entry `{e}` needs `->`")))?;
                let args = parse_elems(line, args, size)?;
                let value = parse_elems(line, value, size)?;
                if args.len() != sym.arity || value.len() != 1 {
                    return Err(err(line, format!("bad function entry `{e}`")));
                }
                let slot = &mut table[super::FunctionTable::index(size, &args)];
                if slot.is_some() {
                    return Err(err(line, format!("function `{name}` defined twice at `{e}`")));
                }
                *slot = Some(value[0]);
            }
            let values = table
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| err(line, format!("function `{name}` is not total")))?;
            p.structure.set_function(name, sym.arity, values);
        }
        SymbolKind::Constant => {
            let v = parse_elems(line, body, size)?;
            if v.len() != 1 {
                return Err(err(line, format!("constant `{name}` needs exactly one element")));
            }
            p.structure.set_constant(name, v[0]);
        }
    }
    Ok(())
}

fn finish(
    structures: &mut BTreeMap<(usize, u8), FiniteStructure>,
    p: Option<Pending>,
    top: Option<&Vocabulary>,
    line: usize,
) -> Result<(), ProblemParseError> {
    let Some(p) = p else { return Ok(()) };
    if let Some(missing) = top.and_then(|top| top.iter().find(|s| !p.seen.contains(&s.name))) {
        return Err(err(
            line,
            format!(
                "structure side={} index={} does not interpret `{}`",
                p.side, p.index, missing.name
            ),
        ));
    }
    if structures.insert((p.index, p.side), p.structure).is_some() {
        return Err(err(
            line,
            format!("duplicate structure side={} index={}", p.side, p.index),
        ));
    }
    Ok(())
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, ProblemParseError> {
    let mut header: Option<(usize, String, Option<usize>)> = None;
    let mut bound = None;
    let mut levels: Vec<Vocabulary> = Vec::new();
    let mut structures: BTreeMap<(usize, u8), FiniteStructure> = BTreeMap::new();
    let mut current: Option<Pending> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with("//") {
            continue;
        }
        if let Some(h) = l.strip_prefix('#') {
            let mut fields = h.split_whitespace();
            let tag = fields.next().unwrap_or("");
            let fields: Vec<&str> = fields.collect();
            match tag {
                "problem" => {
                    if header.is_some() || !levels.is_empty() || current.is_some() {
                        return Err(err(line, "`#problem` must be the first header, once"));
                    }
                    let mut kv = key_values(line, &fields)?;
                    let n = take_num(line, &mut kv, "N")?;
                    let tail = kv.remove("tail").ok_or_else(|| err(line, "missing `tail=`"))?;
                    let (tail, start) = match tail.split_once('@') {
                        Some((t, s)) => (
                            t.to_string(),
                            Some(s.parse().map_err(|_| err(line, format!("bad tail start `{s}`")))?),
                        ),
                        None => (tail, None),
                    };
                    no_extra(line, &kv)?;
                    header = Some((n, tail, start));
                }
                "bound" => {
                    if header.is_none() || bound.is_some() {
                        return Err(err(line, "`#bound` must follow `#problem`, once"));
                    }
                    bound = Some(
                        fields
                            .iter()
                            .map(|f| f.parse().map_err(|_| err(line, format!("bad bound `{f}`"))))
                            .collect::<Result<Vec<usize>, _>>()?,
                    );
                }
                "vocab" => {
                    if header.is_none() || current.is_some() || !structures.is_empty() {
                        return Err(err(line, "`#vocab` lines go after `#problem` and before structures"));
                    }
                    let (first, rest) = fields.split_first().ok_or_else(|| err(line, "missing `level=`"))?;
                    let mut kv = key_values(line, &[first])?;
                    let level = take_num(line, &mut kv, "level")?;
                    no_extra(line, &kv)?;
                    if level != levels.len() {
                        return Err(err(line, format!("expected level={}, got level={level}", levels.len())));
                    }
                    let mut vocab = Vocabulary::new();
                    for s in rest {
                        vocab
                            .insert(parse_symbol(line, s)?)
                            .map_err(|e| err(line, e.to_string()))?;
                    }
                    levels.push(vocab);
                }
                "structure" => {
                    let Some((n, _, _)) = &header else {
                        return Err(err(line, "`#structure` before `#problem`"));
                    };
                    if levels.is_empty() {
                        return Err(err(line, "`#structure` before any `#vocab`"));
                    }
                    finish(&mut structures, current.take(), levels.last(), line)?;
                    let mut kv = key_values(line, &fields)?;
                    let side = take_num(line, &mut kv, "side")?;
                    let index = take_num(line, &mut kv, "index")?;
                    let size = take_num(line, &mut kv, "size")?;
                    no_extra(line, &kv)?;
                    if side != 1 && side != 2 {
                        return Err(err(line, format!("side must be 1 or 2, got {side}")));
                    }
                    if index >= *n {
                        return Err(err(line, format!("index {index} outside window N={n}")));
                    }
                    if size == 0 {
                        return Err(err(line, "size must be at least 1"));
                    }
                    current = Some(Pending {
                        side: side as u8,
                        index,
                        structure: FiniteStructure::new(size),
                        seen: Vec::new(),
                    });
                }
                _ => return Err(err(line, format!("unknown header `#{tag}`"))),
            }
        } else {
            let p = current
                .as_mut()
                .ok_or_else(|| err(line, "interpretation line outside a structure"))?;
            interpret(line, l, levels.last().expect("vocab before structures"), p)?;
        }
    }
    let last_line = text.lines().count();
    finish(&mut structures, current.take(), levels.last(), last_line)?;

    let (n, tail, tail_start) = header.ok_or_else(|| err(1, "missing `#problem` header"))?;
    if levels.is_empty() {
        return Err(err(last_line, "missing `#vocab` lines"));
    }
    let tail = parse_tail(&tail).map_err(|e| err(1, e.to_string()))?;
    let mut pairs = Vec::with_capacity(n);
    for index in 0..n {
        let a = structures.remove(&(index, 1));
        let b = structures.remove(&(index, 2));
        match (a, b) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => return Err(err(last_line, format!("index {index} needs structures on both sides"))),
        }
    }
    Ok(ProblemSpec {
        chain: VocabularyChain::new(levels),
        window_len: n,
        pairs,
        size_bound: bound,
        tail,
        tail_start,
    })
}

fn print_structure(out: &mut String, side: u8, index: usize, m: &FiniteStructure) {
    out.push_str(&format!("#structure side={side} index={index} size={}\n", m.size()));
    let join = |t: &[usize]| t.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    for (name, _, tuples) in m.relations() {
        let body: Vec<String> = tuples.iter().map(|t| join(t)).collect();
        out.push_str(&format!("{name}: {}\n", body.join("; ")).replace(": \n", ":\n"));
    }
    for (name, table) in m.functions() {
        let mut body = Vec::new();
        let mut args = vec![0; table.arity];
        for v in &table.values {
            body.push(format!("{} -> {v}", join(&args)));
            for a in args.iter_mut().rev() {
                *a += 1;
                if *a < m.size() {
                    break;
                }
                *a = 0;
            }
        }
        out.push_str(&format!("{name}: {}\n", body.join("; ")));
    }
    for (name, c) in m.constants() {
        out.push_str(&format!("{name}: {c}\n"));
    }
}

pub fn print_problem(spec: &ProblemSpec) -> String {
    let mut out = format!("#problem N={} tail={}", spec.window_len, spec.tail);
    if let Some(s) = spec.tail_start {
        out.push_str(&format!("@{s}"));
    }
    out.push('\n');
    if let Some(b) = &spec.size_bound {
        let b: Vec<String> = b.iter().map(usize::to_string).collect();
        out.push_str(&format!("#bound {}\n", b.join(" ")));
    }
    for (j, level) in spec.chain.levels().iter().enumerate() {
        out.push_str(&format!("#vocab level={j}"));
        for s in level.iter() {
            out.push_str(&format!(" {s}"));
        }
        out.push('\n');
    }
    for (n, (a, b)) in spec.pairs.iter().enumerate() {
        print_structure(&mut out, 1, n, a);
        print_structure(&mut out, 2, n, b);
    }
    out
}
