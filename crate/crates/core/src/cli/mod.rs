//! The `efk` command line: one subcommand per module operation, output as
//! `key=value` lines or as JSON-lines records behind a schema header.
//!
//! Exit codes: 0 success, 1 domain-level negative (a failed `--expect`, an
//! invalid problem, a violated check), 2 input error, 3 node cap reached.

mod records;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::backforth::{parse_script, print_transcript, run_script, spec_digest, BackForth, ScriptOp, Window};
use crate::efgame::{
    compute_k_seq, extract_distinguisher, game_winner, solve_game_with, verify_antagonist, verify_protagonist,
    DistinguishOutcome, SolveOptions, Verdict, DEFAULT_NODE_CAP,
};
use crate::filterlab::{classify, in_filter, parse_kseq_spec, parse_set_term, KSeqSpec};
use crate::formulas::{enumerate_sentences, eval_sentence};
use crate::slalom::{
    check_cover, greedy_cover, min_cover_exact, parse_family, single_slalom_cover, CoverMode, DEFAULT_EXACT_BOUND,
};
use crate::structures::{parse_problem, validate_problem, Elem, ProblemSpec};

pub use records::{inputs_digest, parse_records, RecordError, SCHEMA, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Records,
}

#[derive(Debug, Parser)]
#[command(
    name = "efk",
    version,
    about = "Budgeted EF games, filters, slaloms and approximations on finite structures"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, global = true, value_enum, default_value = "human")]
    pub format: Format,
    /// Memoized positions per game before giving up.
    #[arg(long, global = true, env = "EFK_NODE_CAP", default_value_t = DEFAULT_NODE_CAP)]
    pub node_cap: usize,
    /// Exit 1 unless the command's verdict equals this string.
    #[arg(long, global = true)]
    pub expect: Option<String>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Add wall-clock milliseconds to the stats (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a problem file against the well-formedness clauses.
    Validate { problem: PathBuf },
    /// Compute k_{m,n} on the window.
    Kseq { problem: PathBuf },
    /// Solve one game and certify the winner.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        k: usize,
        /// Replay the certificate with the independent verifier.
        #[arg(long)]
        verify: bool,
    },
    /// A sentence separating the pair at `index`, for `k` with Γ_{k+1} lost.
    Distinguish {
        problem: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        width_cap: Option<usize>,
    },
    /// Membership in the filter generated by a k-sequence, or its class.
    Filter {
        #[arg(long)]
        kseq: PathBuf,
        #[arg(long, conflicts_with = "classify")]
        set: Option<String>,
        #[arg(long)]
        classify: bool,
    },
    /// Slalom cover operations on a family file.
    Slalom {
        family: PathBuf,
        #[arg(long, value_enum, default_value = "greedy")]
        op: SlalomOp,
        /// `everywhere` or `filtered:c=<c>,n0=<n0>` (needs `--kseq`).
        #[arg(long, default_value = "everywhere")]
        mode: String,
        #[arg(long)]
        kseq: Option<PathBuf>,
        /// Capacity `g`, overriding the file's `#g` line.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        g: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_EXACT_BOUND)]
        bound: usize,
    },
    /// Run a chain script (extend, mark, merge, check) on a problem.
    Chain {
        problem: PathBuf,
        script: PathBuf,
        /// Use these k values instead of solving the games.
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
    },
    /// Alternating extensions over two enumerations of window sequences.
    Assemble {
        problem: PathBuf,
        /// Lines `1: v0 v1 ...` (side 1) and `2: v0 v1 ...` (side 2).
        enumerations: PathBuf,
        /// `c,n0`; defaults to the smallest c that leaves room for every round.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1)]
        check_rank: usize,
        #[arg(long, default_value_t = 5)]
        check_size: usize,
    },
    /// Compare the pair at `index` on enumerated sentences.
    Oracle {
        problem: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 5)]
        max_size: usize,
        /// Check only this many sentences, drawn with `--seed`.
        #[arg(long)]
        sample: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlalomOp {
    Single,
    Greedy,
    Exact,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Cap(String),
}

/// What a command produced: a verdict for `--expect`, output lines and
/// whether the result is a domain-level negative on its own.
struct Report {
    verdict: String,
    human: Vec<String>,
    records: Vec<Value>,
    negative: bool,
    capped: bool,
}

impl Report {
    fn new(verdict: impl Into<String>) -> Self {
        Report {
            verdict: verdict.into(),
            human: Vec::new(),
            records: Vec::new(),
            negative: false,
            capped: false,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<(String, ProblemSpec), Failure> {
    let text = read(path)?;
    let spec = parse_problem(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok((text, spec))
}

fn load_kseq(path: &Path) -> Result<(String, KSeqSpec), Failure> {
    let text = read(path)?;
    let k = parse_kseq_spec(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok((text, k))
}

fn check_index(spec: &ProblemSpec, index: usize) -> Result<(), Failure> {
    if index >= spec.window_len {
        return Err(Failure::Input(format!(
            "index {index} is outside the window of {}",
            spec.window_len
        )));
    }
    Ok(())
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// Parses `argv` (program name first), runs the command and writes its
/// output. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let cfg = cli.config.clone();
    let start = Instant::now();
    let result = dispatch(&cli.command, &cfg);
    let millis = start.elapsed().as_millis() as u64;
    match result {
        Ok(mut report) => {
            if cfg.timing {
                for r in &mut report.records {
                    if let Some(stats) = r.get_mut("stats").and_then(Value::as_object_mut) {
                        stats.insert("millis".into(), json!(millis));
                    }
                }
            }
            let expect_failed = cfg.expect.as_ref().is_some_and(|e| *e != report.verdict);
            match cfg.format {
                Format::Human => {
                    for line in &report.human {
                        let _ = writeln!(out, "{line}");
                    }
                }
                Format::Records => {
                    let _ = writeln!(out, "{}", records::header(command_name(&cli.command), cfg.seed));
                    for r in &report.records {
                        let _ = writeln!(out, "{r}");
                    }
                }
            }
            if expect_failed {
                let _ = writeln!(
                    err,
                    "error[expect]: verdict `{}` differs from expected `{}`",
                    report.verdict,
                    cfg.expect.as_deref().unwrap_or_default()
                );
                return 1;
            }
            if report.capped {
                let _ = writeln!(err, "error[cap]: node cap {} reached", cfg.node_cap);
                return 3;
            }
            i32::from(report.negative)
        }
        Err(f) => {
            let (kind, reason, code) = match f {
                Failure::Input(r) => ("input", r, 2),
                Failure::Cap(r) => ("cap", r, 3),
            };
            let reason = reason.replace('\n', " ");
            if cfg.format == Format::Records {
                let _ = writeln!(out, "{}", records::header(command_name(&cli.command), cfg.seed));
                let _ = writeln!(
                    out,
                    "{}",
                    json!({"op": command_name(&cli.command), "error": {"kind": kind, "reason": reason}})
                );
            }
            let _ = writeln!(err, "error[{kind}]: {reason}");
            code
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Kseq { .. } => "kseq",
        Command::Solve { .. } => "solve",
        Command::Distinguish { .. } => "distinguish",
        Command::Filter { .. } => "filter",
        Command::Slalom { .. } => "slalom",
        Command::Chain { .. } => "chain",
        Command::Assemble { .. } => "assemble",
        Command::Oracle { .. } => "oracle",
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Report, Failure> {
    let opts = SolveOptions {
        node_cap: cfg.node_cap,
        ..SolveOptions::default()
    };
    match cmd {
        Command::Validate { problem } => validate(problem),
        Command::Kseq { problem } => kseq(problem, opts, cfg.jobs),
        Command::Solve {
            problem,
            index,
            k,
            verify,
        } => solve(problem, *index, *k, *verify, opts),
        Command::Distinguish {
            problem,
            index,
            k,
            width_cap,
        } => distinguish(problem, *index, *k, *width_cap, opts),
        Command::Filter { kseq, set, classify } => filter(kseq, set.as_deref(), *classify),
        Command::Slalom {
            family,
            op,
            mode,
            kseq,
            g,
            bound,
        } => slalom(family, *op, mode, kseq.as_deref(), g.as_deref(), *bound),
        Command::Chain {
            problem,
            script,
            k_values,
        } => chain(problem, script, k_values.as_deref(), opts, cfg.jobs),
        Command::Assemble {
            problem,
            enumerations,
            window,
            k_values,
            check_rank,
            check_size,
        } => assemble(
            problem,
            enumerations,
            window.as_deref(),
            k_values.as_deref(),
            *check_rank,
            *check_size,
            opts,
            cfg.jobs,
        ),
        Command::Oracle {
            problem,
            index,
            rank,
            width,
            max_size,
            sample,
        } => oracle(
            problem,
            *index,
            *rank,
            width.unwrap_or(*rank),
            *max_size,
            *sample,
            cfg.seed,
            opts,
        ),
    }
}

fn validate(path: &Path) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    let v = validate_problem(&spec);
    let mut r = Report::new(if v.is_ok() { "ok" } else { "invalid" });
    r.negative = !v.is_ok();
    r.human.push(format!("valid={}", v.is_ok()));
    r.human.extend(v.violations.iter().map(|x| format!("violation: {x}")));
    r.records.push(json!({
        "op": "validate",
        "inputs": inputs_digest(&[&text], ""),
        "valid": v.is_ok(),
        "violations": v.violations.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "stats": {},
    }));
    Ok(r)
}

fn exact_kseq(spec: &ProblemSpec, opts: SolveOptions, jobs: Option<usize>) -> Result<(Vec<usize>, usize), Failure> {
    let ks = compute_k_seq(spec, opts, jobs_or_default(jobs)).map_err(|e| Failure::Input(e.to_string()))?;
    let nodes = ks.nodes.iter().sum();
    ks.exact()
        .map(|k| (k, nodes))
        .ok_or_else(|| Failure::Cap(format!("k-sequence undecided: {}", join(&ks.values, " "))))
}

fn jobs_or_default(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn kseq(path: &Path, opts: SolveOptions, jobs: Option<usize>) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    let ks = compute_k_seq(&spec, opts, jobs_or_default(jobs)).map_err(|e| Failure::Input(e.to_string()))?;
    let line = join(&ks.values, " ");
    let mut r = Report::new(line.clone());
    r.capped = ks.exact().is_none();
    r.human.push(line);
    let values: Vec<Value> = ks
        .values
        .iter()
        .map(|v| match v {
            crate::efgame::KValue::Exact(k) => json!(k),
            crate::efgame::KValue::Undecided => Value::Null,
        })
        .collect();
    r.records.push(json!({
        "op": "kseq",
        "inputs": inputs_digest(&[&text], &format!("node_cap={}", opts.node_cap)),
        "kseq": values,
        "stats": {"nodes": ks.nodes.iter().sum::<usize>(), "nodes_per_index": ks.nodes},
    }));
    Ok(r)
}

fn solve(path: &Path, index: usize, k: usize, verify: bool, opts: SolveOptions) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    check_index(&spec, index)?;
    let (m1, m2) = spec.pair(index);
    let res = solve_game_with(m1, m2, &spec.chain, k, opts).map_err(|e| Failure::Input(e.to_string()))?;
    let winner = res.winner().map_or("undecided".to_string(), |w| w.to_string());
    let mut r = Report::new(winner.clone());
    r.capped = res.winner().is_none();
    r.human.push(format!("winner={winner}"));
    r.human.push(format!("nodes={}", res.nodes));
    let mut cert = json!(null);
    if verify {
        let checked = match &res.verdict {
            Verdict::Protagonist(c) => Some(verify_protagonist(m1, m2, &spec.chain, c)),
            Verdict::Antagonist(c) => Some(verify_antagonist(m1, m2, &spec.chain, c)),
            Verdict::Undecided => None,
        };
        if let Some(checked) = checked {
            let ok = checked.is_ok();
            r.negative = !ok;
            r.human
                .push(format!("certificate={}", if ok { "verified" } else { "rejected" }));
            if let Err(e) = &checked {
                r.human.push(format!("reason: {e}"));
            }
            cert = json!({"verified": ok, "reason": checked.err()});
        }
    }
    r.records.push(json!({
        "op": "solve",
        "inputs": inputs_digest(&[&text], &format!("index={index} k={k} node_cap={}", opts.node_cap)),
        "index": index,
        "k": k,
        "winner": winner,
        "certificate": cert,
        "stats": {"nodes": res.nodes},
    }));
    Ok(r)
}

fn distinguish(path: &Path, index: usize, k: usize, cap: Option<usize>, opts: SolveOptions) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    check_index(&spec, index)?;
    let (m1, m2) = spec.pair(index);
    let out = extract_distinguisher(m1, m2, &spec.chain, k, cap, opts).map_err(|e| Failure::Input(e.to_string()))?;
    let digest = inputs_digest(
        &[&text],
        &format!("index={index} k={k} width_cap={cap:?} node_cap={}", opts.node_cap),
    );
    let mut r;
    match out {
        DistinguishOutcome::Found(d) => {
            r = Report::new("found");
            r.human.push(format!("sentence={}", d.sentence));
            r.human.push(format!("direction={}", d.direction));
            r.human.push(format!("width={}", d.width));
            r.records.push(json!({
                "op": "distinguish", "inputs": digest, "index": index, "k": k, "outcome": "found",
                "sentence": d.sentence.to_string(), "direction": d.direction.to_string(), "width": d.width, "stats": {},
            }));
        }
        other => {
            let (name, cap) = match other {
                DistinguishOutcome::ProtagonistWins => ("protagonist-wins", None),
                DistinguishOutcome::NoneFound { cap } => ("none-found", Some(cap)),
                _ => ("undecided", None),
            };
            r = Report::new(name);
            r.capped = name == "undecided";
            r.human.push(format!("outcome={name}"));
            if let Some(c) = cap {
                r.human.push(format!("width_cap={c}"));
            }
            r.records.push(json!({
                "op": "distinguish", "inputs": digest, "index": index, "k": k, "outcome": name,
                "width_cap": cap, "stats": {},
            }));
        }
    }
    Ok(r)
}

fn filter(kpath: &Path, set: Option<&str>, want_class: bool) -> Result<Report, Failure> {
    let (ktext, kspec) = load_kseq(kpath)?;
    if want_class || set.is_none() {
        let class = classify(&kspec).to_string();
        let mut r = Report::new(class.clone());
        r.human.push(format!("class={class}"));
        r.records
            .push(json!({"op": "filter", "inputs": inputs_digest(&[&ktext], "classify"), "class": class, "stats": {}}));
        return Ok(r);
    }
    let set_text = set.unwrap();
    let term = parse_set_term(set_text).map_err(|e| Failure::Input(format!("--set: {e}")))?;
    let expr = term
        .eval(Some(&kspec))
        .map_err(|e| Failure::Input(format!("--set: {e}")))?;
    let d = in_filter(&kspec, &expr);
    let verified = d.certificate.verify(&kspec, &expr);
    let mut r = Report::new(d.member.to_string());
    r.negative = !verified;
    r.human.push(format!("in_filter={}", d.member));
    r.human.push(format!("certificate={}", d.certificate));
    r.human.push(format!("verified={verified}"));
    r.records.push(json!({
        "op": "filter",
        "inputs": inputs_digest(&[&ktext], &format!("set={set_text}")),
        "in_filter": d.member,
        "certificate": d.certificate.to_string(),
        "verified": verified,
        "stats": {},
    }));
    Ok(r)
}

fn parse_mode(mode: &str, kseq: Option<&Path>) -> Result<(CoverMode, String), Failure> {
    if mode == "everywhere" {
        return Ok((CoverMode::Everywhere, String::new()));
    }
    let bad = || {
        Failure::Input(format!(
            "--mode: expected `everywhere` or `filtered:c=<c>,n0=<n0>`, got `{mode}`"
        ))
    };
    let rest = mode.strip_prefix("filtered:").ok_or_else(bad)?;
    let (mut c, mut n0) = (None, None);
    for part in rest.split(',') {
        let (key, v) = part.split_once('=').ok_or_else(bad)?;
        let v: usize = v.parse().map_err(|_| bad())?;
        match key {
            "c" => c = Some(v),
            "n0" => n0 = Some(v),
            _ => return Err(bad()),
        }
    }
    let path = kseq.ok_or_else(|| Failure::Input("--mode filtered needs --kseq".into()))?;
    let (text, k) = load_kseq(path)?;
    Ok((
        CoverMode::Filtered {
            c: c.ok_or_else(bad)?,
            n0: n0.unwrap_or(0),
            kseq: k,
        },
        text,
    ))
}

fn slalom(
    path: &Path,
    op: SlalomOp,
    mode: &str,
    kseq: Option<&Path>,
    g: Option<&[usize]>,
    bound: usize,
) -> Result<Report, Failure> {
    let text = read(path)?;
    let file = parse_family(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let (mode, ktext) = parse_mode(mode, kseq)?;
    let g: Vec<usize> = g
        .map(<[usize]>::to_vec)
        .or(file.capacity.clone())
        .ok_or_else(|| Failure::Input("no capacity: give --g or a #g line".into()))?;
    let h = &file.family;
    let input_err = |e: crate::slalom::SlalomError| Failure::Input(e.to_string());
    let digest = inputs_digest(
        &[&text, &ktext],
        &format!("op={op:?} mode={mode} g={} bound={bound}", join(&g, ",")),
    );
    let show = |fam: &[crate::slalom::Slalom]| fam.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let r = match op {
        SlalomOp::Single => match single_slalom_cover(h, &g, &mode).map_err(input_err)? {
            Ok(s) => {
                let mut r = Report::new("feasible");
                r.human.push("feasible=true".into());
                r.human.push(format!("slalom={s}"));
                r.records.push(json!({"op": "slalom", "inputs": digest, "action": "single", "feasible": true, "slaloms": [s.to_string()], "stats": {}}));
                r
            }
            Err(inf) => {
                let mut r = Report::new("infeasible");
                r.human.push("feasible=false".into());
                r.human
                    .push(format!("index={} values={}", inf.index, join(&inf.values, ",")));
                r.records.push(
                    json!({"op": "slalom", "inputs": digest, "action": "single", "feasible": false,
                    "index": inf.index, "values": inf.values, "stats": {}}),
                );
                r
            }
        },
        SlalomOp::Greedy => {
            let fam = greedy_cover(h, &g, &mode).map_err(input_err)?;
            let covered = check_cover(h, &fam, &mode).map_err(input_err)?.is_covered();
            let mut r = Report::new(fam.len().to_string());
            r.negative = !covered;
            r.human.push(format!("size={}", fam.len()));
            r.human.push(format!("covered={covered}"));
            r.human.extend(show(&fam).into_iter().map(|s| format!("slalom={s}")));
            r.records.push(
                json!({"op": "slalom", "inputs": digest, "action": "greedy", "size": fam.len(),
                "covered": covered, "slaloms": show(&fam), "stats": {}}),
            );
            r
        }
        SlalomOp::Exact => {
            let ex = min_cover_exact(h, &g, &mode, bound).map_err(input_err)?;
            let size = ex.size.map_or("none".to_string(), |s| s.to_string());
            let mut r = Report::new(size.clone());
            r.human.push(format!("size={size}"));
            r.human
                .extend(show(&ex.family).into_iter().map(|s| format!("slalom={s}")));
            r.records.push(
                json!({"op": "slalom", "inputs": digest, "action": "exact", "size": ex.size,
                "slaloms": show(&ex.family), "stats": {}}),
            );
            r
        }
    };
    Ok(r)
}

fn kvalues(
    spec: &ProblemSpec,
    given: Option<&[usize]>,
    opts: SolveOptions,
    jobs: Option<usize>,
) -> Result<(Vec<usize>, usize), Failure> {
    match given {
        Some(k) => {
            if k.len() != spec.window_len {
                return Err(Failure::Input(format!(
                    "--k-values has {} entries, window is {}",
                    k.len(),
                    spec.window_len
                )));
            }
            Ok((k.to_vec(), 0))
        }
        None => exact_kseq(spec, opts, jobs),
    }
}

fn chain(
    path: &Path,
    script: &Path,
    given: Option<&[usize]>,
    opts: SolveOptions,
    jobs: Option<usize>,
) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    let stext = read(script)?;
    let ops = parse_script(&stext).map_err(|e| Failure::Input(format!("{}: {e}", script.display())))?;
    let (k, nodes) = kvalues(&spec, given, opts, jobs)?;
    let bf = BackForth::new(&spec, k.clone(), opts).map_err(|e| Failure::Input(e.to_string()))?;
    let report = run_script(&bf, &ops).map_err(|e| Failure::Input(format!("{}: {e}", script.display())))?;
    let digest = inputs_digest(&[&text, &stext], &format!("k={}", join(&k, ",")));
    let mut violations = 0;
    let mut r = Report::new("");
    for step in &report.steps {
        let rounds: Vec<usize> = step.after.plays.iter().map(|p| p.len()).collect();
        let action = match &step.op {
            ScriptOp::Window(_) => "window",
            ScriptOp::Extend { .. } => "extend",
            ScriptOp::Mark => "mark",
            ScriptOp::Merge { .. } => "merge",
            ScriptOp::Check { .. } => "check",
        };
        let mut rec = json!({"op": "chain", "inputs": digest, "line": step.line, "action": action,
            "window": [step.window.c, step.window.n0], "rounds": rounds, "stats": {}});
        let mut human = format!("line {} {action} rounds={}", step.line, join(&rounds, ","));
        if let Some((_, m)) = &step.merge {
            rec["ell"] = json!(m.ell);
            rec["eta"] = json!(m.eta);
            human.push_str(&format!(" ell={} eta={}", join(&m.ell, ","), join(&m.eta, ",")));
        }
        if let Some(c) = &step.check {
            violations += c.violations.len();
            rec["checked"] = json!(c.checked);
            rec["violations"] = json!(c
                .violations
                .iter()
                .map(|v| json!({"index": v.index, "formula": v.formula.to_string(), "tuple": v.tuple}))
                .collect::<Vec<_>>());
            human.push_str(&format!(" checked={} violations={}", c.checked, c.violations.len()));
        }
        r.human.push(human);
        r.records.push(rec);
    }
    let transcript = print_transcript(&spec_digest(&spec), &k, &report.result);
    r.human.extend(transcript.lines().map(str::to_string));
    r.records.push(
        json!({"op": "chain", "inputs": digest, "action": "result", "transcript": transcript,
        "stats": {"nodes": nodes}}),
    );
    r.verdict = if violations == 0 {
        "clean".into()
    } else {
        "violations".into()
    };
    r.negative = violations > 0;
    Ok(r)
}

type Enumerations = (Vec<Vec<Elem>>, Vec<Vec<Elem>>);

fn parse_enumerations(text: &str, len: usize) -> Result<Enumerations, String> {
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split("//").next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (side, rest) = body
            .split_once(':')
            .ok_or_else(|| format!("line {}: expected `<side>: values`", i + 1))?;
        let values: Vec<Elem> = rest
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| format!("line {}: bad value `{w}`", i + 1)))
            .collect::<Result<_, _>>()?;
        if values.len() != len {
            return Err(format!("line {}: {} values, window is {len}", i + 1, values.len()));
        }
        match side.trim() {
            "1" => e1.push(values),
            "2" => e2.push(values),
            s => return Err(format!("line {}: side must be 1 or 2, got `{s}`", i + 1)),
        }
    }
    Ok((e1, e2))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    path: &Path,
    epath: &Path,
    window: Option<&[usize]>,
    given: Option<&[usize]>,
    check_rank: usize,
    check_size: usize,
    opts: SolveOptions,
    jobs: Option<usize>,
) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    let etext = read(epath)?;
    let (e1, e2) =
        parse_enumerations(&etext, spec.window_len).map_err(|e| Failure::Input(format!("{}: {e}", epath.display())))?;
    for (side, list) in [(1u8, &e1), (2, &e2)] {
        for h in list {
            for (n, &x) in h.iter().enumerate() {
                let (m1, m2) = spec.pair(n);
                let size = if side == 1 { m1.size() } else { m2.size() };
                if x >= size {
                    return Err(Failure::Input(format!(
                        "side {side} value {x} at index {n} is outside the universe"
                    )));
                }
            }
        }
    }
    let (k, nodes) = kvalues(&spec, given, opts, jobs)?;
    let bf = BackForth::new(&spec, k.clone(), opts).map_err(|e| Failure::Input(e.to_string()))?;
    let window = window.map(|w| Window::new(w[0], w[1]));
    let a = bf
        .assemble(&e1, &e2, window)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let table_ok = a.check_table();
    let phis = crate::backforth::check_formulas(&bf, check_rank, check_size);
    let elementary = bf
        .check_partial_elementary(&a.approx, &phis, check_rank)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let digest = inputs_digest(
        &[&text, &etext],
        &format!(
            "k={} window={:?} rank={check_rank} size={check_size}",
            join(&k, ","),
            window
        ),
    );
    let clean = table_ok.is_ok() && elementary.is_clean();
    let mut r = Report::new(if clean { "clean" } else { "violations" });
    r.negative = !clean;
    r.human.push(format!(
        "window c={} n0={} active={}",
        a.window.c,
        a.window.n0,
        join(&a.active, ",")
    ));
    let cell = |x: &Option<Elem>| x.map_or("-".to_string(), |v| v.to_string());
    for row in &a.rows {
        let source = format!("{}#{}", row.side.number(), row.entry);
        r.human.push(format!(
            "row {source} h1={} h2={}",
            row.h1.iter().map(cell).collect::<Vec<_>>().join(","),
            row.h2.iter().map(cell).collect::<Vec<_>>().join(",")
        ));
        r.records
            .push(json!({"op": "assemble", "inputs": digest, "row": source, "h1": row.h1, "h2": row.h2, "stats": {}}));
    }
    r.human
        .push(format!("table={}", if table_ok.is_ok() { "ok" } else { "broken" }));
    r.human.push(format!(
        "elementary checked={} violations={}",
        elementary.checked,
        elementary.violations.len()
    ));
    r.records.push(json!({
        "op": "assemble", "inputs": digest, "window": [a.window.c, a.window.n0], "active": a.active,
        "table_ok": table_ok.is_ok(), "checked": elementary.checked, "violations": elementary.violations.len(),
        "transcript": print_transcript(&spec_digest(&spec), &k, &a.approx),
        "stats": {"nodes": nodes},
    }));
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    path: &Path,
    index: usize,
    rank: usize,
    width: usize,
    max_size: usize,
    sample: Option<usize>,
    seed: u64,
    opts: SolveOptions,
) -> Result<Report, Failure> {
    let (text, spec) = load_problem(path)?;
    check_index(&spec, index)?;
    let (m1, m2) = spec.pair(index);
    let vocab = spec.chain.at_budget(rank);
    let mut sentences: Vec<_> = enumerate_sentences(vocab, rank, width).up_to_size(max_size).collect();
    if let Some(n) = sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> = (0..sentences.len()).collect::<Vec<_>>();
        picks.shuffle(&mut rng);
        let keep: BTreeSet<usize> = picks.into_iter().take(n).collect();
        sentences = sentences
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(i))
            .map(|(_, s)| s)
            .collect();
    }
    let mut disagree = None;
    for s in &sentences {
        let a = eval_sentence(m1, s).map_err(|e| Failure::Input(e.to_string()))?;
        let b = eval_sentence(m2, s).map_err(|e| Failure::Input(e.to_string()))?;
        if a != b {
            disagree = Some((s.clone(), a));
            break;
        }
    }
    let (winner, nodes) = game_winner(m1, m2, &spec.chain, rank, opts).map_err(|e| Failure::Input(e.to_string()))?;
    let winner = winner.map_or("undecided".to_string(), |w| w.to_string());
    let mut r = Report::new(if disagree.is_none() { "agree" } else { "disagree" });
    r.human.push(format!("sentences={}", sentences.len()));
    r.human.push(format!("agree={}", disagree.is_none()));
    if let Some((s, a)) = &disagree {
        r.human.push(format!("witness={s}"));
        r.human.push(format!("holds_in={}", if *a { 1 } else { 2 }));
    }
    r.human.push(format!("winner={winner}"));
    r.records.push(json!({
        "op": "oracle",
        "inputs": inputs_digest(&[&text], &format!("index={index} rank={rank} width={width} size={max_size} sample={sample:?} seed={seed}")),
        "sentences": sentences.len(),
        "agree": disagree.is_none(),
        "witness": disagree.as_ref().map(|(s, _)| s.to_string()),
        "holds_in": disagree.as_ref().map(|(_, a)| if *a { 1 } else { 2 }),
        "winner": winner,
        "stats": {"nodes": nodes},
    }));
    Ok(r)
}
