use std::fmt::Write as _;

use thiserror::Error;

use super::{SlalomError, WindowFunctionFamily};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct FamilyParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyFile {
    pub family: WindowFunctionFamily,
    pub capacity: Option<Vec<usize>>,
}

fn err(line: usize, msg: impl Into<String>) -> FamilyParseError {
    FamilyParseError { line, msg: msg.into() }
}

fn numbers(line: usize, words: &[&str]) -> Result<Vec<usize>, FamilyParseError> {
    words
        .iter()
        .map(|w| {
            w.parse()
                .map_err(|_| err(line, format!("expected a number, found `{w}`")))
        })
        .collect()
}

/// `#family N=<int> V=<int>`, then one function per line and an optional
/// `#g v0 v1 ...` capacity line.
pub fn parse_family(text: &str) -> Result<FamilyFile, FamilyParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut functions = Vec::new();
    let mut capacity = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split("//").next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        match words[0] {
            "#family" => {
                if header.is_some() {
                    return Err(err(line, "duplicate #family header"));
                }
                let (mut n, mut v) = (None, None);
                for w in &words[1..] {
                    let (key, val) = w
                        .split_once('=')
                        .ok_or_else(|| err(line, format!("expected key=value, found `{w}`")))?;
                    let val: usize = val.parse().map_err(|_| err(line, format!("bad number in `{w}`")))?;
                    match key {
                        "N" => n = Some(val),
                        "V" => v = Some(val),
                        _ => return Err(err(line, format!("unknown key `{key}`"))),
                    }
                }
                header = Some((
                    n.ok_or_else(|| err(line, "missing N="))?,
                    v.ok_or_else(|| err(line, "missing V="))?,
                ));
            }
            "#g" => {
                let (n, _) = header.ok_or_else(|| err(line, "#g before #family"))?;
                if capacity.is_some() {
                    return Err(err(line, "duplicate #g line"));
                }
                let g = numbers(line, &words[1..])?;
                if g.len() != n {
                    return Err(err(line, format!("capacity has {} entries, window is {n}", g.len())));
                }
                capacity = Some(g);
            }
            w if w.starts_with('#') => return Err(err(line, format!("unknown directive `{w}`"))),
            _ => {
                let (n, v) = header.ok_or_else(|| err(line, "function before #family"))?;
                let f = numbers(line, &words)?;
                if f.len() != n {
                    return Err(err(line, format!("function has {} values, window is {n}", f.len())));
                }
                if let Some(bad) = f.iter().find(|&&x| x >= v) {
                    return Err(err(line, format!("value {bad} is not below V={v}")));
                }
                functions.push(f);
            }
        }
    }
    let (n, v) = header.ok_or_else(|| err(0, "missing #family header"))?;
    let family = WindowFunctionFamily::new(n, v, functions).map_err(|e: SlalomError| err(0, e.to_string()))?;
    Ok(FamilyFile { family, capacity })
}

pub fn print_family(file: &FamilyFile) -> String {
    let h = &file.family;
    let mut out = format!("#family N={} V={}\n", h.window(), h.bound());
    for f in h.functions() {
        let _ = writeln!(out, "{}", f.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
    }
    if let Some(g) = &file.capacity {
        let _ = writeln!(
            out,
            "#g {}",
            g.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        );
    }
    out
}
