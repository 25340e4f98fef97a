//! End-to-end acceptance suite. Each criterion prints one pass/fail line;
//! the test fails if any criterion does.

use std::time::Instant;

use rayon::prelude::*;

use hopim::bisim::{bounded_ctx_probe, prime_factors, Session};
use hopim::corpus::{
    annotate_closed, bench_pair, bisimilar_pair, congruent_variant, constant_to_var,
    dis_pair, enumerate_small, sprinkle, TermGen,
};
use hopim::normalizer::{nf, nf_equal, NodeId, TreeStore};
use hopim::parser::parse;
use hopim::semantics::{
    canonicalize, struct_congruent, transitions, Action,
};
use hopim::syntax::{depth, rename_proc_var, subst_name, subst_proc};
use hopim::{Name, ProcVar, Sort, SortEnv, Term};

type Outcome = Result<String, String>;

fn equal_fast(p: &Term, q: &Term) -> bool {
    let mut store = TreeStore::new();
    nf_equal(&mut store, p, q).unwrap().equal
}

fn both_engines_agree_equal(session: &mut Session, p: &Term, q: &Term) -> bool {
    equal_fast(p, q) && session.check(p, q).unwrap()
}

/// Open variant of a random term: some nil leaves become the free process
/// variable V and channel c becomes the free name variable y.
fn open_term(seed: u64, budget: usize) -> (Term, SortEnv) {
    let mut gen = TermGen::new(seed);
    let base = gen.gen_proc(budget);
    let hole = Term::Var(ProcVar::proc("V"));
    let opened = sprinkle(gen.rng(), &base, &hole);
    let opened = constant_to_var(&opened, "c", "y");
    let mut env = SortEnv::default();
    env.proc_vars.insert("V".into(), Sort::Proc);
    env.name_vars.push("y".into());
    (opened, env)
}

/// Exhaustive differential run: every congruence class of well-sorted terms
/// with at most 6 AST nodes over channels {a, b}, one free process variable X,
/// and at most one abstraction layer. The tree engine and the inductive oracle
/// must agree on every unordered pair.
fn c1_exhaustive_differential() -> Outcome {
    let start = Instant::now();
    let terms = enumerate_small(6);
    let n = terms.len();
    let mut store = TreeStore::new();
    let classes: Vec<NodeId> = terms
        .iter()
        .map(|t| nf(&mut store, t).unwrap())
        .collect();
    // per-worker session: keys are store-local, so each worker interns the
    // corpus once and the memo persists across its rows
    let worker = || {
        let mut sess = Session::new();
        let keys: Vec<NodeId> = terms.iter().map(|t| sess.key_of(t).unwrap()).collect();
        (sess, keys)
    };
    let row = |sess: &mut Session, keys: &[NodeId], i: usize| -> usize {
        let mut bad = 0usize;
        for j in i..n {
            let fast = classes[i] == classes[j];
            let slow = sess
                .check_with_keys(&terms[i], &terms[j], keys[i], keys[j])
                .unwrap();
            if fast != slow {
                bad += 1;
            }
        }
        if sess.memo_len() > 4_000_000 {
            sess.clear_memo();
        }
        bad
    };
    let bad: usize = (0..n)
        .into_par_iter()
        .map_init(worker, |(sess, keys), i| row(sess, keys, i))
        .sum();
    let secs = start.elapsed().as_secs_f64();
    let pairs = n * (n + 1) / 2;
    if bad == 0 && secs < 600.0 {
        Ok(format!("{n} classes, {pairs} pairs, 100% agreement, {secs:.1}s"))
    } else {
        Err(format!("{bad} disagreements over {pairs} pairs, {secs:.1}s"))
    }
}

/// Channel-negotiation protocol: trace the composed system and require exactly
/// three tau steps landing on R{B/Y} in parallel with O.
fn c2_protocol_trace() -> Outcome {
    let env = SortEnv::default();
    let a_src = "<x>b!(<Z>x!(Z))";
    let b_src = "d!(0)";
    let o_src = "e!(0)";
    let r_src = "f!(0)";
    let p_src = format!("a!({a_src}) | b(X).(X<{b_src}> | {o_src})");
    let q_src = format!("a(X).(X<c> | c(Y).{r_src})");
    let p = parse(&p_src, &env).map_err(|e| format!("parse P: {e}"))?;
    let q = parse(&q_src, &env).map_err(|e| format!("parse Q: {e}"))?;
    let b = parse(b_src, &env).map_err(|e| format!("parse B: {e}"))?;
    let o = parse(o_src, &env).map_err(|e| format!("parse O: {e}"))?;
    let r = parse(r_src, &env).map_err(|e| format!("parse R: {e}"))?;

    let mut state = Term::par(p, q);
    for step in 1..=3 {
        let taus: Vec<Term> = transitions(&state)
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(|(act, _)| *act == Action::Tau)
            .map(|(_, res)| res)
            .collect();
        if taus.len() != 1 {
            return Err(format!("step {step}: {} tau successors, expected 1", taus.len()));
        }
        state = taus.into_iter().next().unwrap();
    }
    let leftover = transitions(&state)
        .map_err(|e| e.to_string())?
        .into_iter()
        .any(|(act, _)| act == Action::Tau);
    if leftover {
        return Err("a fourth tau step exists".into());
    }
    let expected = Term::par(
        subst_proc(&r, &b, &ProcVar::proc("Y")).map_err(|e| e.to_string())?,
        o,
    );
    if struct_congruent(&state, &expected).map_err(|e| e.to_string())? {
        Ok("3 tau steps, final state congruent to R{B/Y} | O".into())
    } else {
        Err("final state differs from R{B/Y} | O".into())
    }
}

/// Distribution law a(X).(P | prod^{k-1} a(X).P) ~ prod^k a(X).P over random P
/// and k in {2,3,4}, including the degenerate P = 0 family, on both engines.
fn c3_distribution_family() -> Outcome {
    let mut session = Session::new();
    let chan = Name::constant("a");
    let mut failures = 0usize;
    let mut cases = 0usize;
    for i in 0..500u64 {
        let p = if i == 0 {
            Term::Nil
        } else {
            TermGen::new(i).gen_proc(1 + (i as usize % 6))
        };
        for k in 2..=4 {
            let (l, r) = dis_pair(&p, &chan, k);
            let l = annotate_closed(&l).unwrap();
            let r = annotate_closed(&r).unwrap();
            cases += 1;
            if !both_engines_agree_equal(&mut session, &l, &r) {
                failures += 1;
            }
        }
    }
    if failures == 0 {
        Ok(format!("{cases} cases, 0 failures"))
    } else {
        Err(format!("{failures} of {cases} cases failed"))
    }
}

/// Application laws (<X>P)<Q> ~ P{Q/X} and (<x>P)<m> ~ P{m/x} over random
/// open bodies, arguments, and names, on both engines.
fn c4_application_laws() -> Outcome {
    let mut session = Session::new();
    let mut failures = 0usize;
    let mut cases = 0usize;
    for i in 0..500u64 {
        let mut gen = TermGen::new(i);
        let base = gen.gen_proc(2 + (i as usize % 5));
        let hole = Term::Var(ProcVar::proc("X"));
        let body = sprinkle(gen.rng(), &base, &hole);
        let arg = TermGen::new(i ^ 0xa5a5).gen_proc(1 + (i as usize % 4));
        let x = ProcVar::proc("X");
        let l = Term::proc_app(Term::proc_abs(x.clone(), body.clone()), arg.clone());
        let r = subst_proc(&body, &arg, &x).unwrap();
        let l = annotate_closed(&l).unwrap();
        let r = annotate_closed(&r).unwrap();
        cases += 1;
        if !both_engines_agree_equal(&mut session, &l, &r) {
            failures += 1;
        }

        let named = constant_to_var(&base, "c", "y");
        let m = Name::constant(["a", "b", "d"][(i % 3) as usize]);
        let l = Term::name_app(Term::name_abs(Name::variable("y"), named.clone()), m.clone());
        let r = subst_name(&named, &m, "y");
        let l = annotate_closed(&l).unwrap();
        let r = annotate_closed(&r).unwrap();
        cases += 1;
        if !both_engines_agree_equal(&mut session, &l, &r) {
            failures += 1;
        }
    }
    if failures == 0 {
        Ok(format!("{cases} cases, 0 failures"))
    } else {
        Err(format!("{failures} of {cases} cases failed"))
    }
}

const SUITE_CASES: u64 = 1000;

fn suite(name: &str, case: impl Fn(u64) -> bool) -> Result<(), String> {
    let failures = (0..SUITE_CASES).filter(|&i| !case(i)).count();
    if failures == 0 {
        Ok(())
    } else {
        Err(format!("{name}: {failures} of {SUITE_CASES} cases failed"))
    }
}

fn suite_depth_invariance(i: u64) -> bool {
    let mut gen = TermGen::new(i);
    let (l, r, _) = bisimilar_pair(&mut gen, 1 + (i as usize % 8));
    let l = annotate_closed(&l).unwrap();
    let r = annotate_closed(&r).unwrap();
    depth(&l).unwrap() == depth(&r).unwrap()
}

fn suite_congruence_closure(i: u64) -> bool {
    let mut gen = TermGen::new(i);
    let (p, q, _) = bisimilar_pair(&mut gen, 1 + (i as usize % 7));
    let p = annotate_closed(&p).unwrap();
    let q = annotate_closed(&q).unwrap();
    let r = gen.gen_proc(5);
    let a = Name::constant("a");
    let x = ProcVar::proc("W");
    let closures = [
        (
            Term::input(a.clone(), x.clone(), p.clone()),
            Term::input(a.clone(), x.clone(), q.clone()),
        ),
        (Term::output(a.clone(), p.clone()), Term::output(a.clone(), q.clone())),
        (Term::par(p.clone(), r.clone()), Term::par(q.clone(), r.clone())),
        (Term::proc_abs(x.clone(), p.clone()), Term::proc_abs(x.clone(), q.clone())),
        (
            Term::name_abs(Name::variable("w"), p.clone()),
            Term::name_abs(Name::variable("w"), q.clone()),
        ),
        (
            Term::proc_app(Term::proc_abs(x.clone(), Term::Var(x.clone())), p.clone()),
            Term::proc_app(Term::proc_abs(x.clone(), Term::Var(x.clone())), q.clone()),
        ),
    ];
    closures.into_iter().all(|(cp, cq)| {
        let cp = annotate_closed(&cp).unwrap();
        let cq = annotate_closed(&cq).unwrap();
        equal_fast(&cp, &cq)
    })
}

fn suite_substitution_preservation(i: u64) -> bool {
    let (open, env) = open_term(i, 1 + (i as usize % 7));
    let open = hopim::annotate(&open, &env).unwrap().term;
    let mut gen2 = TermGen::new(i ^ 1);
    let variant = congruent_variant(gen2.rng(), &open);
    let variant = hopim::annotate(&variant, &env).unwrap().term;
    let arg = TermGen::new(i ^ 2).gen_proc(5);
    let v = ProcVar::proc("V");
    let l = subst_proc(&open, &arg, &v).unwrap();
    let r = subst_proc(&variant, &arg, &v).unwrap();
    let m = Name::constant("b");
    let l = subst_name(&l, &m, "y");
    let r = subst_name(&r, &m, "y");
    equal_fast(&l, &r)
}

fn suite_tau_preservation(i: u64) -> bool {
    let mut gen = TermGen::new(i);
    let (p, q, _) = bisimilar_pair(&mut gen, 2 + (i as usize % 7));
    let p = annotate_closed(&p).unwrap();
    let q = annotate_closed(&q).unwrap();
    let tq = transitions(&q).unwrap();
    transitions(&p).unwrap().iter().all(|(act, res_p)| {
        *act != Action::Tau
            || tq
                .iter()
                .any(|(aq, res_q)| *aq == Action::Tau && equal_fast(res_p, res_q))
    })
}

fn suite_cancellation(i: u64) -> bool {
    let p = TermGen::new(i).gen_proc(1 + (i as usize % 6));
    let q = TermGen::new(i ^ 0x9e37).gen_proc(1 + ((i / 7) as usize % 6));
    let r = TermGen::new(i ^ 0x79b9).gen_proc(5);
    let lhs = equal_fast(
        &annotate_closed(&Term::par(p.clone(), r.clone())).unwrap(),
        &annotate_closed(&Term::par(q.clone(), r.clone())).unwrap(),
    );
    lhs == equal_fast(&p, &q)
}

fn suite_unique_prime_decomposition(i: u64) -> bool {
    let mut gen = TermGen::new(i);
    let (p, q, _) = bisimilar_pair(&mut gen, 1 + (i as usize % 8));
    let p = annotate_closed(&p).unwrap();
    let q = annotate_closed(&q).unwrap();
    let env = SortEnv::default();
    let fp = prime_factors(&p, &env).unwrap();
    let fq = prime_factors(&q, &env).unwrap();
    fp.len() == fq.len()
        && fp.iter().zip(fq.iter()).all(|(a, b)| equal_fast(a, b))
}

fn suite_transition_substitution_commutation(i: u64) -> bool {
    let mut gen = TermGen::new(i);
    let base = gen.gen_proc(2 + (i as usize % 6));
    let hole = Term::Var(ProcVar::proc("V"));
    let open = sprinkle(gen.rng(), &base, &hole);
    let mut env = SortEnv::default();
    env.proc_vars.insert("V".into(), Sort::Proc);
    let open = hopim::annotate(&open, &env).unwrap().term;
    let arg = TermGen::new(i ^ 5).gen_proc(4);
    let v = ProcVar::proc("V");
    let closed = subst_proc(&open, &arg, &v).unwrap();
    let closed_tr = transitions(&closed).unwrap();
    transitions(&open).unwrap().into_iter().all(|(act, res)| {
        let res_s = subst_proc(&res, &arg, &v).unwrap();
        closed_tr.iter().any(|(act_c, res_c)| match (&act, act_c) {
            (Action::Tau, Action::Tau) => equal_fast(&res_s, res_c),
            (
                Action::In { chan: c1, bound: b1 },
                Action::In { chan: c2, bound: b2 },
            ) => c1 == c2 && b1 == b2 && equal_fast(&res_s, res_c),
            (
                Action::Out { chan: c1, payload: p1 },
                Action::Out { chan: c2, payload: p2 },
            ) => {
                c1 == c2
                    && equal_fast(&subst_proc(p1, &arg, &v).unwrap(), p2)
                    && equal_fast(&res_s, res_c)
            }
            _ => false,
        })
    })
}

fn suite_io_decomposition(i: u64) -> bool {
    let p = TermGen::new(i).gen_proc(2 + (i as usize % 8));
    let comps = canonicalize(&p).unwrap().components;
    transitions(&p).unwrap().into_iter().all(|(act, res)| match act {
        Action::Out { chan, payload } => {
            let rebuilt = Term::par(Term::output(chan, payload), res);
            struct_congruent(&p, &rebuilt).unwrap()
        }
        Action::In { chan, bound } => comps.iter().enumerate().any(|(idx, c)| {
            if let Term::Input { chan: c2, bound: b2, body } = c {
                if *c2 != chan {
                    return false;
                }
                let body = rename_proc_var(body, &b2.ident, &bound.ident);
                let mut rest: Vec<Term> = comps.clone();
                rest.remove(idx);
                rest.insert(0, body);
                struct_congruent(&res, &Term::par_all(rest)).unwrap()
            } else {
                false
            }
        }),
        Action::Tau => true,
    })
}

/// Eight meta-theorem suites, 1000 random cases each.
fn c5_meta_theorem_suites() -> Outcome {
    let suites: [(&str, fn(u64) -> bool); 8] = [
        ("depth invariance", suite_depth_invariance),
        ("congruence closure", suite_congruence_closure),
        ("substitution preservation", suite_substitution_preservation),
        ("tau preservation", suite_tau_preservation),
        ("cancellation", suite_cancellation),
        ("unique prime decomposition", suite_unique_prime_decomposition),
        (
            "transition/substitution commutation",
            suite_transition_substitution_commutation,
        ),
        ("output/input decomposition", suite_io_decomposition),
    ];
    let mut errors = Vec::new();
    for (name, f) in suites {
        if let Err(e) = suite(name, f) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(format!("8 suites x {SUITE_CASES} cases, 0 failures"))
    } else {
        Err(errors.join("; "))
    }
}

/// Scaling: end-to-end check time grows at most 12x per 10x size step and the
/// interning table stays within 3x the input node count.
fn c6_scaling() -> Outcome {
    const REPEATS: usize = 5;
    let mut report = Vec::new();
    let mut times = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        let (l, r) = bench_pair(n);
        let input_nodes = l.size() + r.size();
        let mut best = f64::MAX;
        let mut nodes = 0usize;
        for _ in 0..REPEATS {
            let mut store = TreeStore::new();
            let t0 = Instant::now();
            let verdict = nf_equal(&mut store, &l, &r).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            if !verdict.equal {
                return Err(format!("n={n}: benchmark pair not equal"));
            }
            if dt < best {
                best = dt;
                nodes = store.len();
            }
        }
        if nodes > 3 * input_nodes {
            return Err(format!(
                "n={n}: {nodes} interned nodes exceeds 3x{input_nodes}"
            ));
        }
        report.push(format!("n={n}: {:.1}ms, {nodes} nodes", best * 1e3));
        times.push(best);
    }
    for w in times.windows(2) {
        let ratio = w[1] / w[0];
        if ratio > 12.0 {
            return Err(format!("time ratio {ratio:.1}x exceeds 12x per 10x step"));
        }
    }
    Ok(format!(
        "{}; ratios {:.1}x, {:.1}x",
        report.join("; "),
        times[1] / times[0],
        times[2] / times[1]
    ))
}

/// Soundness probe: pairs the oracle declares bisimilar survive a bounded
/// context-bisimulation probe with a 10-element probe set at depth 4.
fn c7_context_probe() -> Outcome {
    let env = SortEnv::default();
    let probe_srcs = [
        "0",
        "a!(0)",
        "b!(0)",
        "c!(0)",
        "a(X).X",
        "a(X).0",
        "a!(b!(0))",
        "a!(0) | b!(0)",
        "<X>(X | a!(0))",
        "<x>x!(0)",
    ];
    let probes: Vec<Term> = probe_srcs
        .iter()
        .map(|s| parse(s, &env).unwrap())
        .collect();
    assert_eq!(probes.len(), 10);
    let mut session = Session::new();
    let mut checked = 0usize;
    let mut seed = 0u64;
    while checked < 200 {
        let mut gen = TermGen::new(seed);
        seed += 1;
        let (l, r, _) = bisimilar_pair(&mut gen, 2 + (seed as usize % 6));
        let l = annotate_closed(&l).unwrap();
        let r = annotate_closed(&r).unwrap();
        if !session.check(&l, &r).unwrap() {
            return Err(format!("seed {}: generated pair not oracle-bisimilar", seed - 1));
        }
        checked += 1;
        if !bounded_ctx_probe(&l, &r, &probes, 4).unwrap() {
            return Err(format!("seed {}: context probe refuted the pair", seed - 1));
        }
    }
    Ok("200 pairs, 10 probes, depth 4, 0 refutations".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 exhaustive small-term differential", c1_exhaustive_differential),
        ("2 protocol trace", c2_protocol_trace),
        ("3 distribution family", c3_distribution_family),
        ("4 application laws", c4_application_laws),
        ("5 meta-theorem suites", c5_meta_theorem_suites),
        ("6 scaling", c6_scaling),
        ("7 context probe soundness", c7_context_probe),
    ];
    let mut failed = false;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("criterion {name}: pass ({detail})"),
            Err(detail) => {
                failed = true;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    assert!(!failed, "one or more acceptance criteria failed");
}
