//! Term corpora for testing and benchmarking: exhaustive enumeration of small
//! well-sorted terms, a seeded random generator, constructions of pairs that
//! are bisimilar by the algebraic laws, and synthesized benchmark terms.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::normalizer::{congruent_tree, TreeStore};
use crate::sorts::{annotate, sort_check, SortEnv};
use crate::syntax::{fresh_ident, Name, NameKind, ProcVar, Sort, Term};

/// Context used by the exhaustive corpus: one free process variable X of
/// plain process sort; channel payload sorts inferred per term.
pub fn corpus_env() -> SortEnv {
    SortEnv {
        proc_vars: [("X".to_string(), Sort::Proc)].into(),
        ..Default::default()
    }
}

fn count_abstractions(t: &Term) -> usize {
    match t {
        Term::Nil | Term::Var(_) => 0,
        Term::Input { body, .. } => count_abstractions(body),
        Term::Output { payload, .. } => count_abstractions(payload),
        Term::Par(l, r) => count_abstractions(l) + count_abstractions(r),
        Term::ProcAbs { body, .. } => 1 + count_abstractions(body),
        Term::ProcApp { fun, arg } => count_abstractions(fun) + count_abstractions(arg),
        Term::NameAbs { body, .. } => 1 + count_abstractions(body),
        Term::NameApp { fun, .. } => count_abstractions(fun),
    }
}

/// Raw structural enumeration of candidate terms with exactly `size` nodes.
/// Scope is characterized by counts, so results memoize on (size, np, nn);
/// binder identifiers are derived from the counts.
fn enumerate_raw(
    size: usize,
    np: usize,
    nn: usize,
    memo: &mut std::collections::HashMap<(usize, usize, usize), Vec<Term>>,
) -> Vec<Term> {
    if size == 0 {
        return vec![];
    }
    if let Some(v) = memo.get(&(size, np, nn)) {
        return v.clone();
    }
    let chans = [Name::constant("a"), Name::constant("b")];
    let mut out = Vec::new();
    if size == 1 {
        out.push(Term::Nil);
        out.push(Term::Var(ProcVar::proc("X")));
        for i in 0..np {
            out.push(Term::Var(ProcVar::proc(format!("P{i}"))));
        }
    } else {
        let inner = enumerate_raw(size - 1, np, nn, memo);
        let inner_p = enumerate_raw(size - 1, np + 1, nn, memo);
        let inner_n = enumerate_raw(size - 1, np, nn + 1, memo);
        for c in &chans {
            for b in &inner_p {
                out.push(Term::input(c.clone(), ProcVar::proc(format!("P{np}")), b.clone()));
            }
            for p in &inner {
                out.push(Term::output(c.clone(), p.clone()));
            }
        }
        for s1 in 1..size - 1 {
            let left = enumerate_raw(s1, np, nn, memo);
            let right = enumerate_raw(size - 1 - s1, np, nn, memo);
            for l in &left {
                for r in &right {
                    out.push(Term::par(l.clone(), r.clone()));
                    out.push(Term::proc_app(l.clone(), r.clone()));
                }
            }
        }
        for b in &inner_p {
            out.push(Term::proc_abs(ProcVar::proc(format!("P{np}")), b.clone()));
        }
        for b in &inner_n {
            out.push(Term::name_abs(Name::variable(format!("m{nn}")), b.clone()));
        }
        for f in &inner {
            for c in &chans {
                out.push(Term::name_app(f.clone(), c.clone()));
            }
            for i in 0..nn {
                out.push(Term::name_app(f.clone(), Name::variable(format!("m{i}"))));
            }
        }
    }
    memo.insert((size, np, nn), out.clone());
    out
}

/// All well-sorted terms up to `max_nodes` AST nodes over channels {a, b},
/// one free process variable X, and at most one abstraction node, deduplicated
/// up to structural congruence (one representative per congruence class).
pub fn enumerate_small(max_nodes: usize) -> Vec<Term> {
    let env = corpus_env();
    let mut memo = std::collections::HashMap::new();
    let mut store = TreeStore::new();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for size in 1..=max_nodes {
        for t in enumerate_raw(size, 0, 0, &mut memo) {
            if count_abstractions(&t) > 1 {
                continue;
            }
            let Ok(checked) = annotate(&t, &env) else { continue };
            let Ok(key) = congruent_tree(&mut store, &checked.term) else { continue };
            if seen.insert(key) {
                out.push(checked.term);
            }
        }
    }
    out
}

/// Seeded random generator of well-sorted terms. Channels a, b, c carry plain
/// processes; channel p carries process abstractions; channel m carries name
/// abstractions.
pub struct TermGen {
    rng: ChaCha8Rng,
    counter: u64,
}

fn chan_payload(name: &str) -> Sort {
    match name {
        "p" => Sort::pabs(Sort::Proc, Sort::Proc),
        "m" => Sort::nabs(Sort::Proc),
        _ => Sort::Proc,
    }
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), counter: 0 }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.counter += 1;
        format!("{stem}%g{}", self.counter)
    }

    /// A closed, well-sorted plain process with roughly `budget` nodes.
    pub fn gen_proc(&mut self, budget: usize) -> Term {
        let t = self.gen(&Sort::Proc, budget, &mut Vec::new());
        annotate(&t, &SortEnv::default()).expect("generated term must sort-check").term
    }

    fn pick_chan(&mut self, payload: &Sort, names: &[(String, Sort)]) -> Name {
        let mut cands: Vec<Name> = match payload {
            Sort::Proc => vec![Name::constant("a"), Name::constant("b"), Name::constant("c")],
            Sort::PAbs(a, r) if **a == Sort::Proc && **r == Sort::Proc => {
                vec![Name::constant("p")]
            }
            Sort::NAbs(r) if **r == Sort::Proc => vec![Name::constant("m")],
            _ => vec![],
        };
        for (id, s) in names {
            if s == payload {
                cands.push(Name::variable(id.clone()));
            }
        }
        if cands.is_empty() {
            cands.push(Name::constant("a"));
        }
        cands[self.rng.gen_range(0..cands.len())].clone()
    }

    fn gen(&mut self, sort: &Sort, budget: usize, scope: &mut Vec<(String, Sort)>) -> Term {
        // Bound name variables carry plain-process payloads.
        let name_scope: Vec<(String, Sort)> = Vec::new();
        match sort {
            Sort::Proc => {
                let vars: Vec<String> = scope
                    .iter()
                    .filter(|(_, s)| *s == Sort::Proc)
                    .map(|(id, _)| id.clone())
                    .collect();
                if budget <= 1 {
                    if !vars.is_empty() && self.rng.gen_bool(0.4) {
                        let id = &vars[self.rng.gen_range(0..vars.len())];
                        return Term::Var(ProcVar::proc(id.clone()));
                    }
                    return Term::Nil;
                }
                match self.rng.gen_range(0..10) {
                    0 | 1 => {
                        // input prefix
                        let chan = self.pick_chan(&Sort::Proc, &name_scope);
                        let payload = chan_payload(&chan.ident);
                        let v = self.fresh("G");
                        scope.push((v.clone(), payload.clone()));
                        let body = self.gen(&Sort::Proc, budget - 1, scope);
                        scope.pop();
                        Term::input(chan, ProcVar::new(v, payload), body)
                    }
                    2 | 3 => {
                        let chan = self.pick_chan(&Sort::Proc, &name_scope);
                        let payload = chan_payload(&chan.ident);
                        let p = self.gen(&payload, budget - 1, scope);
                        Term::output(chan, p)
                    }
                    4 | 5 | 6 => {
                        let l = self.gen(&Sort::Proc, budget / 2, scope);
                        let r = self.gen(&Sort::Proc, budget - 1 - budget / 2, scope);
                        Term::par(l, r)
                    }
                    7 => {
                        // application of a generated process abstraction
                        let f = self.gen(&Sort::pabs(Sort::Proc, Sort::Proc), budget / 2, scope);
                        let a = self.gen(&Sort::Proc, budget - 1 - budget / 2, scope);
                        Term::proc_app(f, a)
                    }
                    8 => {
                        // application of a generated name abstraction
                        let f = self.gen(&Sort::nabs(Sort::Proc), budget - 1, scope);
                        let arg = ["a", "b", "c"][self.rng.gen_range(0..3)];
                        Term::name_app(f, Name::constant(arg))
                    }
                    _ => {
                        if !vars.is_empty() {
                            let id = &vars[self.rng.gen_range(0..vars.len())];
                            Term::Var(ProcVar::proc(id.clone()))
                        } else {
                            Term::Nil
                        }
                    }
                }
            }
            Sort::PAbs(a, r) => {
                let scoped: Vec<String> = scope
                    .iter()
                    .filter(|(_, s)| s == sort)
                    .map(|(id, _)| id.clone())
                    .collect();
                if !scoped.is_empty() && self.rng.gen_bool(0.25) {
                    let id = &scoped[self.rng.gen_range(0..scoped.len())];
                    return Term::Var(ProcVar::new(id.clone(), sort.clone()));
                }
                let v = self.fresh("F");
                scope.push((v.clone(), (**a).clone()));
                let body = self.gen(r, budget.saturating_sub(1).max(1), scope);
                scope.pop();
                Term::proc_abs(ProcVar::new(v, (**a).clone()), body)
            }
            Sort::NAbs(r) => {
                let v = self.fresh("x");
                // The bound name is usable as a plain-process channel.
                let body =
                    self.gen_with_name(r, budget.saturating_sub(1).max(1), scope, &v);
                Term::name_abs(Name::variable(v), body)
            }
        }
    }

    fn gen_with_name(
        &mut self,
        sort: &Sort,
        budget: usize,
        scope: &mut Vec<(String, Sort)>,
        name: &str,
    ) -> Term {
        // Use the bound name in a prefix with probability, then fill the rest.
        if *sort == Sort::Proc && budget >= 2 && self.rng.gen_bool(0.7) {
            let chan = Name::variable(name);
            if self.rng.gen_bool(0.5) {
                let v = self.fresh("G");
                let body = self.gen(&Sort::Proc, budget - 1, scope);
                Term::input(chan, ProcVar::proc(v), body)
            } else {
                let p = self.gen(&Sort::Proc, budget - 1, scope);
                Term::output(chan, p)
            }
        } else {
            self.gen(sort, budget, scope)
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

fn flatten_components(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Par(l, r) => {
            flatten_components(l, out);
            flatten_components(r, out);
        }
        other => out.push(other.clone()),
    }
}

/// A structurally congruent variant: shuffled and re-associated parallel
/// components, possibly an extra nil, possibly a beta-expansion wrapper.
pub fn congruent_variant(rng: &mut ChaCha8Rng, t: &Term) -> Term {
    let mut comps = Vec::new();
    flatten_components(t, &mut comps);
    comps.shuffle(rng);
    if rng.gen_bool(0.5) {
        comps.push(Term::Nil);
    }
    let mut v = if rng.gen_bool(0.5) {
        Term::par_all(comps)
    } else {
        // right-nested association
        let mut it = comps.into_iter().rev();
        let last = it.next().unwrap_or(Term::Nil);
        it.fold(last, |acc, c| Term::par(c, acc))
    };
    if rng.gen_bool(0.3) {
        let x = fresh_ident("E");
        v = Term::proc_app(Term::proc_abs(ProcVar::proc(x.clone()), Term::Var(ProcVar::proc(x))), v);
    }
    v
}

/// Shuffled components under a balanced re-association: still congruent, but
/// keeps the tree shallow so large benchmark variants normalize in near-linear
/// time (a left-deep chain costs a vector copy per level).
pub fn shuffled_balanced(rng: &mut ChaCha8Rng, t: &Term) -> Term {
    let mut comps = Vec::new();
    flatten_components(t, &mut comps);
    comps.shuffle(rng);
    par_balanced(comps)
}

/// The distribution-law pair on payload `p` and channel `chan` with `k`
/// copies: (chan(X).(p | k-1 copies of chan(X).p), k copies of chan(X).p).
pub fn dis_pair(p: &Term, chan: &Name, k: usize) -> (Term, Term) {
    let x = fresh_ident("D");
    let copy = Term::input(chan.clone(), ProcVar::proc(x.clone()), p.clone());
    let mut inner = vec![p.clone()];
    inner.extend(std::iter::repeat(copy.clone()).take(k - 1));
    let lhs = Term::input(chan.clone(), ProcVar::proc(x), Term::par_all(inner));
    let rhs = Term::par_all(vec![copy; k]);
    (lhs, rhs)
}

/// Replace nil leaves by `with` with probability 1/3 each; used to open up a
/// closed generated term with a free variable.
pub fn sprinkle(rng: &mut ChaCha8Rng, t: &Term, with: &Term) -> Term {
    match t {
        Term::Nil => {
            if rng.gen_bool(1.0 / 3.0) {
                with.clone()
            } else {
                Term::Nil
            }
        }
        Term::Var(_) => t.clone(),
        Term::Input { chan, bound, body } => {
            Term::input(chan.clone(), bound.clone(), sprinkle(rng, body, with))
        }
        Term::Output { chan, payload } => Term::output(chan.clone(), sprinkle(rng, payload, with)),
        Term::Par(l, r) => Term::par(sprinkle(rng, l, with), sprinkle(rng, r, with)),
        Term::ProcAbs { bound, body } => {
            Term::proc_abs(bound.clone(), sprinkle(rng, body, with))
        }
        Term::ProcApp { fun, arg } => {
            Term::proc_app(sprinkle(rng, fun, with), sprinkle(rng, arg, with))
        }
        Term::NameAbs { bound, body } => {
            Term::name_abs(bound.clone(), sprinkle(rng, body, with))
        }
        Term::NameApp { fun, arg } => Term::name_app(sprinkle(rng, fun, with), arg.clone()),
    }
}

/// Rename every occurrence of the channel constant `from` to the name
/// variable `to`; used to build name-abstraction law instances.
pub fn constant_to_var(t: &Term, from: &str, to: &str) -> Term {
    let map = |n: &Name| {
        if n.kind == NameKind::Constant && n.ident == from {
            Name::variable(to)
        } else {
            n.clone()
        }
    };
    match t {
        Term::Nil | Term::Var(_) => t.clone(),
        Term::Input { chan, bound, body } => {
            Term::input(map(chan), bound.clone(), constant_to_var(body, from, to))
        }
        Term::Output { chan, payload } => {
            Term::output(map(chan), constant_to_var(payload, from, to))
        }
        Term::Par(l, r) => Term::par(constant_to_var(l, from, to), constant_to_var(r, from, to)),
        Term::ProcAbs { bound, body } => {
            Term::proc_abs(bound.clone(), constant_to_var(body, from, to))
        }
        Term::ProcApp { fun, arg } => {
            Term::proc_app(constant_to_var(fun, from, to), constant_to_var(arg, from, to))
        }
        Term::NameAbs { bound, body } => {
            if bound.ident == to {
                t.clone()
            } else {
                Term::name_abs(bound.clone(), constant_to_var(body, from, to))
            }
        }
        Term::NameApp { fun, arg } => Term::name_app(constant_to_var(fun, from, to), map(arg)),
    }
}

/// A pair of terms bisimilar by construction, with the law used as a tag.
pub fn bisimilar_pair(gen: &mut TermGen, budget: usize) -> (Term, Term, &'static str) {
    let base = gen.gen_proc(budget);
    match gen.rng().gen_range(0..4) {
        0 => {
            let v = congruent_variant(gen.rng(), &base);
            (base, v, "congruence")
        }
        1 => {
            let k = gen.rng().gen_range(2..=4);
            let chan = Name::constant(["a", "b", "c"][gen.rng().gen_range(0..3)]);
            let (l, r) = dis_pair(&base, &chan, k);
            (l, r, "distribution")
        }
        2 => {
            // beta law on a sprinkled body
            let x = fresh_ident("A");
            let hole = Term::Var(ProcVar::proc(x.clone()));
            let body = sprinkle(gen.rng(), &base, &hole);
            let arg = gen.gen_proc(budget / 2 + 1);
            let lhs = Term::proc_app(Term::proc_abs(ProcVar::proc(x.clone()), body.clone()), arg.clone());
            let rhs = crate::syntax::subst_proc(&body, &arg, &ProcVar::proc(x)).unwrap();
            (lhs, rhs, "beta-proc")
        }
        _ => {
            let y = fresh_ident("y");
            let open = constant_to_var(&base, "c", &y);
            let m = Name::constant(["a", "b"][gen.rng().gen_range(0..2)]);
            let lhs = Term::name_app(Term::name_abs(Name::variable(y.clone()), open.clone()), m.clone());
            let rhs = crate::syntax::subst_name(&open, &m, &y);
            (lhs, rhs, "beta-name")
        }
    }
}

/// Balanced parallel composition; keeps tree height logarithmic so large
/// benchmark terms do not exhaust the stack in recursive passes.
pub fn par_balanced(mut parts: Vec<Term>) -> Term {
    if parts.is_empty() {
        return Term::Nil;
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len() / 2 + 1);
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(Term::par(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Synthesized benchmark term with roughly `n` AST nodes: a wide parallel
/// composition of independent gadgets mixing distribution chains and beta
/// redexes, so normalization exercises every pass with linear total work.
pub fn bench_term(n: usize) -> Term {
    let a = Name::constant("a");
    let b = Name::constant("b");
    let c = Name::constant("c");
    // distribution gadget: a(X).(c!(0) | a(X).c!(0))  -- 9 nodes
    let c0 = Term::output(c.clone(), Term::Nil);
    let copy = Term::input(a.clone(), ProcVar::proc("X"), c0.clone());
    let dis = Term::input(a, ProcVar::proc("X"), Term::par(c0.clone(), copy));
    // beta gadget: (<X>(X | X))<b!(0)>  -- 7 nodes
    let x = ProcVar::proc("X");
    let beta = Term::proc_app(
        Term::proc_abs(x.clone(), Term::par(Term::Var(x.clone()), Term::Var(x))),
        Term::output(b, Term::Nil),
    );
    let gadget_nodes = dis.size() + beta.size() + 2;
    let m = (n / gadget_nodes).max(1);
    let mut parts = Vec::with_capacity(2 * m);
    for _ in 0..m {
        parts.push(dis.clone());
        parts.push(beta.clone());
    }
    par_balanced(parts)
}

/// Benchmark pair with roughly `n` AST nodes each: the gadget term and its
/// law-expanded form, where every distribution gadget is replaced by its
/// distributed copies and every beta redex by its reduct, under a rotated
/// component order. Equal by one law application per gadget.
pub fn bench_pair(n: usize) -> (Term, Term) {
    let base = bench_term(n);
    let mut comps = Vec::new();
    flatten_components(&base, &mut comps);
    let mut expanded = Vec::new();
    for c in comps {
        match &c {
            // a(X).(P | a(X).P)  ->  a(X).P | a(X).P
            Term::Input { chan, bound, body } => {
                if let Term::Par(p, _) = &**body {
                    let copy = Term::input(chan.clone(), bound.clone(), (**p).clone());
                    expanded.push(copy.clone());
                    expanded.push(copy);
                } else {
                    expanded.push(c);
                }
            }
            // (<X>(X | X))<A>  ->  A | A
            Term::ProcApp { arg, .. } => {
                expanded.push((**arg).clone());
                expanded.push((**arg).clone());
            }
            _ => expanded.push(c),
        }
    }
    let offset = expanded.len() / 3 | 1;
    expanded.rotate_right(offset);
    (base, par_balanced(expanded))
}

/// Sort-check helper used by tests over generated corpora.
pub fn well_sorted(t: &Term, env: &SortEnv) -> bool {
    sort_check(t, env).is_ok()
}

/// Annotate under the default (empty) context.
pub fn annotate_closed(t: &Term) -> Result<Term> {
    Ok(annotate(t, &SortEnv::default())?.term)
}
