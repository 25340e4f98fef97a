//! Command-line surface: bisimilarity checks, normal forms, transition
//! traces, prime decomposition, a differential self-test, and a scaling
//! benchmark. Exit codes: 0 bisimilar, 1 not bisimilar, 2 error, 3 engine
//! disagreement.

use std::io::Read as _;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hopim::batch::{run_parallel, Engine, PairVerdict};
use hopim::bisim::{hoio_bisimilar, prime_factors, Session, Witness};
use hopim::corpus::{bench_pair, bisimilar_pair, enumerate_small, TermGen};
use hopim::normalizer::{dump, nf, nf_equal, tree_to_term, TreeStore};
use hopim::parser::{parse, print as print_term};
use hopim::semantics::transitions;
use hopim::{Error, Sort, SortEnv, Term};

#[derive(Parser)]
#[command(name = "hopim", about = "Bisimilarity checker for higher-order processes with name and process parameterization", version)]
struct Cli {
    /// Emit a JSON report object instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// Free variable declarations, e.g. "X:proc,y:name".
    #[arg(long, global = true, default_value = "")]
    free: String,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fast,
    Oracle,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide bisimilarity of two terms, or of `;;`-separated pairs on stdin.
    Check {
        p: Option<String>,
        q: Option<String>,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
    },
    /// Print the normal form of a term.
    Nf {
        term: String,
        /// Also dump the interned tree (one node per line).
        #[arg(long)]
        dump_tree: bool,
    },
    /// Print the transition tree of a term to a given depth.
    Trace {
        term: String,
        #[arg(long, default_value = "3")]
        max_steps: u32,
    },
    /// Print the prime decomposition of a term.
    Primes { term: String },
    /// Decide bisimilarity with the inductive decision procedure only.
    Oracle { p: String, q: String },
    /// Differential run of both engines over enumerated and random terms.
    Selftest {
        #[arg(long, default_value = "5")]
        max_nodes: usize,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long, default_value = "200")]
        random_pairs: usize,
    },
    /// Scaling run over synthesized terms; emits CSV (n, time_ms, nodes, verdict_count).
    Bench {
        #[arg(long, default_value = "1000,10000,100000", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Repetitions per size; the fastest run is reported.
        #[arg(long, default_value = "3")]
        repeats: usize,
    },
}

fn parse_free(spec: &str) -> Result<SortEnv, Error> {
    let mut env = SortEnv::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((name, sort)) = item.split_once(':') else {
            return Err(Error::sort(format!("bad free declaration {item:?}, expected ident:proc or ident:name")));
        };
        match sort.trim() {
            "proc" => {
                env.proc_vars.insert(name.trim().to_string(), Sort::Proc);
            }
            "name" => env.name_vars.push(name.trim().to_string()),
            other => return Err(Error::sort(format!("unknown sort tag {other:?}"))),
        }
    }
    Ok(env)
}

fn fail(json_mode: bool, command: &str, err: &Error) -> ! {
    if json_mode {
        println!("{}", json!({ "command": command, "error": err.to_string() }));
    } else {
        eprintln!("error: {err}");
    }
    std::process::exit(2)
}

fn verdict_word(v: &PairVerdict) -> String {
    match v {
        PairVerdict::Equal => "bisimilar".into(),
        PairVerdict::NotEqual => "not-bisimilar".into(),
        PairVerdict::Disagree(f, o) => format!("disagree fast={f} oracle={o}"),
        PairVerdict::Error(e) => format!("error: {e}"),
    }
}

fn exit_for(verdicts: &[PairVerdict]) -> i32 {
    let mut code = 0;
    for v in verdicts {
        let c = match v {
            PairVerdict::Equal => 0,
            PairVerdict::NotEqual => 1,
            PairVerdict::Error(_) => 2,
            PairVerdict::Disagree(..) => 3,
        };
        code = code.max(c);
    }
    code
}

fn cmd_check(json_mode: bool, env: &SortEnv, p: Option<String>, q: Option<String>, mode: Mode) -> i32 {
    let engine = match mode {
        Mode::Fast => Engine::Fast,
        Mode::Oracle => Engine::Oracle,
        Mode::Both => Engine::Both,
    };
    let pairs_src: Vec<(String, String)> = match (p, q) {
        (Some(p), Some(q)) => vec![(p, q)],
        (None, None) => {
            let mut buf = String::new();
            if std::io::stdin().read_to_string(&mut buf).is_err() {
                fail(json_mode, "check", &Error::sort("cannot read stdin"));
            }
            buf.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| match l.split_once(";;") {
                    Some((a, b)) => (a.trim().to_string(), b.trim().to_string()),
                    None => (l.to_string(), String::new()),
                })
                .collect()
        }
        _ => fail(json_mode, "check", &Error::sort("check needs two terms or a stdin batch")),
    };
    let start = Instant::now();
    let mut pairs = Vec::new();
    let mut verdicts = vec![None; pairs_src.len()];
    for (i, (ps, qs)) in pairs_src.iter().enumerate() {
        if qs.is_empty() {
            verdicts[i] = Some(PairVerdict::Error("missing `;;` separator".into()));
            continue;
        }
        match (parse(ps, env), parse(qs, env)) {
            (Ok(p), Ok(q)) => pairs.push((i, p, q)),
            (Err(e), _) | (_, Err(e)) => verdicts[i] = Some(PairVerdict::Error(e.to_string())),
        }
    }
    let terms: Vec<(Term, Term)> = pairs.iter().map(|(_, p, q)| (p.clone(), q.clone())).collect();
    for ((i, _, _), v) in pairs.iter().zip(run_parallel(&terms, engine)) {
        verdicts[*i] = Some(v);
    }
    let verdicts: Vec<PairVerdict> = verdicts.into_iter().map(Option::unwrap).collect();
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    if json_mode {
        let vs: Vec<_> = verdicts.iter().map(verdict_word).collect();
        println!(
            "{}",
            json!({ "command": "check", "mode": match mode { Mode::Fast => "fast", Mode::Oracle => "oracle", Mode::Both => "both" },
                    "verdicts": vs, "equal": verdicts.iter().all(|v| *v == PairVerdict::Equal),
                    "time_ms": ms })
        );
    } else {
        for v in &verdicts {
            println!("{}", verdict_word(v));
        }
    }
    exit_for(&verdicts)
}

fn cmd_nf(json_mode: bool, env: &SortEnv, src: &str, dump_tree: bool) -> i32 {
    let t = parse(src, env).unwrap_or_else(|e| fail(json_mode, "nf", &e));
    let start = Instant::now();
    let mut store = TreeStore::new();
    let root = nf(&mut store, &t).unwrap_or_else(|e| fail(json_mode, "nf", &e));
    let back = tree_to_term(&store, root, env).unwrap_or_else(|e| fail(json_mode, "nf", &e));
    let text = print_term(&back);
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    if json_mode {
        let mut report = json!({ "command": "nf", "normal_form": text,
                                 "nodes": store.reachable_count(root), "time_ms": ms });
        if dump_tree {
            report["tree"] = json!(dump(&store, root));
        }
        println!("{report}");
    } else {
        println!("{text}");
        if dump_tree {
            print!("{}", dump(&store, root));
        }
    }
    0
}

fn trace_into(t: &Term, depth: u32, indent: usize, lines: &mut Vec<String>) -> Result<(), Error> {
    if depth == 0 {
        return Ok(());
    }
    for (action, next) in transitions(t)? {
        lines.push(format!("{}{} -> {}", "  ".repeat(indent), action, print_term(&next)));
        trace_into(&next, depth - 1, indent + 1, lines)?;
    }
    Ok(())
}

fn cmd_trace(json_mode: bool, env: &SortEnv, src: &str, max_steps: u32) -> i32 {
    let t = parse(src, env).unwrap_or_else(|e| fail(json_mode, "trace", &e));
    let start = Instant::now();
    let mut lines = Vec::new();
    trace_into(&t, max_steps, 0, &mut lines).unwrap_or_else(|e| fail(json_mode, "trace", &e));
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    if json_mode {
        println!("{}", json!({ "command": "trace", "steps": lines, "time_ms": ms }));
    } else if lines.is_empty() {
        println!("no transitions");
    } else {
        for l in &lines {
            println!("{l}");
        }
    }
    0
}

fn cmd_primes(json_mode: bool, env: &SortEnv, src: &str) -> i32 {
    let t = parse(src, env).unwrap_or_else(|e| fail(json_mode, "primes", &e));
    let start = Instant::now();
    let factors = prime_factors(&t, env).unwrap_or_else(|e| fail(json_mode, "primes", &e));
    let texts: Vec<String> = factors.iter().map(print_term).collect();
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    if json_mode {
        println!("{}", json!({ "command": "primes", "factors": texts, "time_ms": ms }));
    } else if texts.is_empty() {
        println!("0 (no prime factors)");
    } else {
        for f in &texts {
            println!("{f}");
        }
    }
    0
}

fn cmd_oracle(json_mode: bool, env: &SortEnv, ps: &str, qs: &str) -> i32 {
    let p = parse(ps, env).unwrap_or_else(|e| fail(json_mode, "oracle", &e));
    let q = parse(qs, env).unwrap_or_else(|e| fail(json_mode, "oracle", &e));
    let start = Instant::now();
    let verdict = hoio_bisimilar(&p, &q).unwrap_or_else(|e| fail(json_mode, "oracle", &e));
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    let steps: Vec<String> = match &verdict.witness {
        Witness::Distinguisher(ds) => {
            ds.iter().map(|d| format!("clause {}: {}", d.clause, d.detail)).collect()
        }
        _ => vec![],
    };
    if json_mode {
        println!(
            "{}",
            json!({ "command": "oracle", "equal": verdict.equal, "distinguisher": steps, "time_ms": ms })
        );
    } else {
        println!("{}", if verdict.equal { "bisimilar" } else { "not-bisimilar" });
        for s in &steps {
            println!("  {s}");
        }
    }
    if verdict.equal {
        0
    } else {
        1
    }
}

fn cmd_selftest(json_mode: bool, max_nodes: usize, seed: u64, random_pairs: usize) -> i32 {
    let start = Instant::now();
    let terms = enumerate_small(max_nodes);
    // stream the exhaustive quadratic run instead of materializing the pairs
    let mut store = TreeStore::new();
    let mut sess = Session::new();
    let mut classes = Vec::with_capacity(terms.len());
    let mut keys = Vec::with_capacity(terms.len());
    for t in &terms {
        match (nf(&mut store, t), sess.key_of(t)) {
            (Ok(c), Ok(k)) => {
                classes.push(c);
                keys.push(k);
            }
            (Err(e), _) | (_, Err(e)) => fail(json_mode, "selftest", &e),
        }
    }
    let mut enumerated = 0usize;
    let mut mismatches: Vec<(usize, usize)> = Vec::new();
    for i in 0..terms.len() {
        for j in i..terms.len() {
            enumerated += 1;
            let fast = classes[i] == classes[j];
            match sess.check_with_keys(&terms[i], &terms[j], keys[i], keys[j]) {
                Ok(slow) if slow == fast => {}
                _ => mismatches.push((i, j)),
            }
        }
        if sess.memo_len() > 4_000_000 {
            sess.clear_memo();
        }
    }
    let mut gen = TermGen::new(seed);
    let mut pairs = Vec::new();
    for _ in 0..random_pairs {
        let (l, r, _) = bisimilar_pair(&mut gen, 8);
        pairs.push((l, r));
    }
    let verdicts = run_parallel(&pairs, Engine::Both);
    let random_bad: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != PairVerdict::Equal)
        .map(|(i, _)| i)
        .collect();
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    let ok = mismatches.is_empty() && random_bad.is_empty();
    if json_mode {
        println!(
            "{}",
            json!({ "command": "selftest", "terms": terms.len(),
                    "pairs": enumerated + pairs.len(),
                    "disagreements": mismatches.len(), "refuted_known_equal": random_bad.len(),
                    "ok": ok, "time_ms": ms })
        );
    } else {
        println!(
            "selftest: {} terms, {} pairs, {} disagreements, {} refuted known-equal pairs ({:.0} ms)",
            terms.len(),
            enumerated + pairs.len(),
            mismatches.len(),
            random_bad.len(),
            ms
        );
        for (i, j) in mismatches.iter().take(5) {
            println!(
                "  mismatch: {} ;; {}",
                print_term(&terms[*i]),
                print_term(&terms[*j])
            );
        }
        for i in random_bad.iter().take(5) {
            println!(
                "  refuted known-equal: {} ;; {} -> {}",
                print_term(&pairs[*i].0),
                print_term(&pairs[*i].1),
                verdict_word(&verdicts[*i])
            );
        }
    }
    if ok {
        0
    } else {
        3
    }
}

fn cmd_bench(json_mode: bool, sizes: &[usize], repeats: usize) -> i32 {
    let mut rows = Vec::new();
    for &n in sizes {
        let (base, variant) = bench_pair(n);
        let mut best = f64::MAX;
        let mut nodes = 0;
        let mut verdict_count = 0usize;
        for _ in 0..repeats.max(1) {
            let mut store = TreeStore::new();
            let start = Instant::now();
            match nf_equal(&mut store, &base, &variant) {
                Ok(v) => {
                    verdict_count += 1;
                    if !v.equal {
                        fail(json_mode, "bench", &Error::sort("equal-by-law pair not equal"));
                    }
                }
                Err(e) => fail(json_mode, "bench", &e),
            }
            best = best.min(start.elapsed().as_secs_f64() * 1000.0);
            nodes = store.len();
        }
        rows.push((n, best, nodes, verdict_count));
    }
    if json_mode {
        let rs: Vec<_> = rows
            .iter()
            .map(|(n, ms, nodes, vc)| json!({ "n": n, "time_ms": ms, "nodes": nodes, "verdict_count": vc }))
            .collect();
        println!("{}", json!({ "command": "bench", "rows": rs }));
    } else {
        println!("n,time_ms,nodes,verdict_count");
        for (n, ms, nodes, vc) in &rows {
            println!("{n},{ms:.3},{nodes},{vc}");
        }
    }
    0
}

fn main() {
    let cli = Cli::parse();
    let env = match parse_free(&cli.free) {
        Ok(env) => env,
        Err(e) => fail(cli.json, "free", &e),
    };
    let code = match cli.command {
        Cmd::Check { p, q, mode } => cmd_check(cli.json, &env, p, q, mode),
        Cmd::Nf { term, dump_tree } => cmd_nf(cli.json, &env, &term, dump_tree),
        Cmd::Trace { term, max_steps } => cmd_trace(cli.json, &env, &term, max_steps),
        Cmd::Primes { term } => cmd_primes(cli.json, &env, &term),
        Cmd::Oracle { p, q } => cmd_oracle(cli.json, &env, &p, &q),
        Cmd::Selftest { max_nodes, seed, random_pairs } => {
            cmd_selftest(cli.json, max_nodes, seed, random_pairs)
        }
        Cmd::Bench { sizes, repeats } => cmd_bench(cli.json, &sizes, repeats),
    };
    std::process::exit(code);
}
