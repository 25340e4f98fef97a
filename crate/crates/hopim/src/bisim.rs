//! The reference engine: a direct decision procedure for strong bisimilarity
//! on open terms, by induction on the depth measure. Eight clauses: shape
//! agreement for non-abstractions and both abstraction forms, output and input
//! simulation, and three open-form decompositions (bare variable, process
//! application, name application). There is no tau clause; tau preservation is
//! a consequence, not part of the definition.
//!
//! Verdicts are memoized per session on pairs of congruence-tree ids, so the
//! exponential candidate exploration collapses on shared subproblems.

use rustc_hash::FxHashMap as HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::normalizer::{self, congruent_tree, NodeId, TreeStore};
use crate::parser::print;
use crate::semantics::{beta_normalize, open_decompositions, transitions, Action, SpineArg};
use crate::sorts::SortEnv;
use crate::syntax::{
    fresh_ident, rename_name_var, rename_proc_var, sort_of, subst_proc, Name, ProcVar, Term,
};

const GUARD: u32 = 4096;

/// One step of a distinguishing strategy: the clause index (1-8) and what the
/// losing side cannot match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistStep {
    pub clause: u8,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Bisimilar,
    NormalForms { left: String, right: String },
    Distinguisher(Vec<DistStep>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub equal: bool,
    pub witness: Witness,
}

/// Open decompositions with the congruence key of every recursion target
/// precomputed, so clause matching is a memo lookup in the common case.
enum CachedArg {
    Proc(Term, NodeId),
    Name(Name),
}

type Decomp = Vec<(ProcVar, Vec<CachedArg>, Term, NodeId)>;

/// A cached transition: the residual's congruence key plus an auxiliary key
/// (output payload, or the alpha-invariant key of the input residual wrapped
/// in its binder, which shortcuts congruent input matches without renaming).
struct CachedTr {
    act: Action,
    res: Term,
    res_key: NodeId,
    aux_key: NodeId,
}

const NO_KEY: NodeId = NodeId(u32::MAX);

/// A checking session: owns the tree store used for congruence keys, the
/// verdict memo, and per-term caches keyed by congruence key.
pub struct Session {
    store: TreeStore,
    memo: HashMap<(NodeId, NodeId), bool>,
    beta_cache: HashMap<NodeId, Arc<Term>>,
    tr_cache: HashMap<NodeId, Arc<Vec<CachedTr>>>,
    dec_cache: HashMap<NodeId, Arc<Decomp>>,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Session {
    pub fn new() -> Self {
        Session {
            store: TreeStore::new(),
            memo: HashMap::default(),
            beta_cache: HashMap::default(),
            tr_cache: HashMap::default(),
            dec_cache: HashMap::default(),
        }
    }

    /// Decide bisimilarity of two well-sorted annotated terms sharing a
    /// free-variable context.
    pub fn check(&mut self, p: &Term, q: &Term) -> Result<bool> {
        self.check_guarded(p, q, 0)
    }

    /// Number of memoized pair verdicts; lets long batch runs bound memory.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Drop the pair memo but keep the per-term caches.
    pub fn clear_memo(&mut self) {
        self.memo = HashMap::default();
    }

    fn beta(&mut self, p: &Term, k: NodeId) -> Result<Arc<Term>> {
        if let Some(b) = self.beta_cache.get(&k) {
            return Ok(b.clone());
        }
        let b = Arc::new(beta_normalize(p)?);
        self.beta_cache.insert(k, b.clone());
        Ok(b)
    }

    fn trs(&mut self, p: &Term, k: NodeId) -> Result<Arc<Vec<CachedTr>>> {
        if let Some(t) = self.tr_cache.get(&k) {
            return Ok(t.clone());
        }
        let mut out = Vec::new();
        for (act, res) in transitions(p)? {
            let res_key = congruent_tree(&mut self.store, &res)?;
            let aux_key = match &act {
                Action::Out { payload, .. } => congruent_tree(&mut self.store, payload)?,
                Action::In { bound, .. } => {
                    let abs = Term::proc_abs(bound.clone(), res.clone());
                    congruent_tree(&mut self.store, &abs)?
                }
                Action::Tau => NO_KEY,
            };
            out.push(CachedTr { act, res, res_key, aux_key });
        }
        let t = Arc::new(out);
        self.tr_cache.insert(k, t.clone());
        Ok(t)
    }

    fn decs(&mut self, p: &Term, k: NodeId) -> Result<Arc<Decomp>> {
        if let Some(d) = self.dec_cache.get(&k) {
            return Ok(d.clone());
        }
        let raw = open_decompositions(p)?;
        let mut keyed = Vec::with_capacity(raw.len());
        for (x, spine, rest) in raw {
            let mut args = Vec::with_capacity(spine.len());
            for arg in spine {
                args.push(match arg {
                    SpineArg::Proc(a) => {
                        let ka = congruent_tree(&mut self.store, &a)?;
                        CachedArg::Proc(a, ka)
                    }
                    SpineArg::Name(n) => CachedArg::Name(n),
                });
            }
            let kr = congruent_tree(&mut self.store, &rest)?;
            keyed.push((x, args, rest, kr));
        }
        let d = Arc::new(keyed);
        self.dec_cache.insert(k, d.clone());
        Ok(d)
    }

    /// Intern a term's congruence key in this session's store; pair keys feed
    /// `check_with_keys` so batch callers compute each key once.
    pub fn key_of(&mut self, t: &Term) -> Result<NodeId> {
        congruent_tree(&mut self.store, t)
    }

    /// Decide bisimilarity given keys previously obtained from `key_of`.
    pub fn check_with_keys(&mut self, p: &Term, q: &Term, kp: NodeId, kq: NodeId) -> Result<bool> {
        self.check_keyed(p, q, kp, kq, 0)
    }

    fn check_guarded(&mut self, p: &Term, q: &Term, depth: u32) -> Result<bool> {
        if depth > GUARD {
            return Err(Error::DepthBudget);
        }
        let kp = congruent_tree(&mut self.store, p)?;
        let kq = congruent_tree(&mut self.store, q)?;
        self.check_keyed(p, q, kp, kq, depth)
    }

    fn check_keyed(&mut self, p: &Term, q: &Term, kp: NodeId, kq: NodeId, depth: u32) -> Result<bool> {
        if depth > GUARD {
            return Err(Error::DepthBudget);
        }
        if kp == kq {
            return Ok(true);
        }
        let k = key(kp, kq);
        if let Some(v) = self.memo.get(&k) {
            return Ok(*v);
        }
        let v = self.clauses(p, q, kp, kq, depth)?;
        self.memo.insert(k, v);
        Ok(v)
    }

    fn clauses(&mut self, p: &Term, q: &Term, kp: NodeId, kq: NodeId, depth: u32) -> Result<bool> {
        let bp = self.beta(p, kp)?;
        let bq = self.beta(q, kq)?;
        match (&*bp, &*bq) {
            (Term::ProcAbs { bound: xb, body: a }, Term::ProcAbs { bound: yb, body: b }) => {
                if xb.sort != yb.sort {
                    return Ok(false);
                }
                // depth-indexed rename: deterministic so memo keys repeat, and
                // collision-free because enclosing renames use smaller depths
                let z = format!("B%c{depth}");
                let a = rename_proc_var(a, &xb.ident, &z);
                let b = rename_proc_var(b, &yb.ident, &z);
                self.check_guarded(&a, &b, depth + 1)
            }
            (Term::NameAbs { bound: xb, body: a }, Term::NameAbs { bound: yb, body: b }) => {
                let z = format!("b%c{depth}");
                let a = rename_name_var(a, &xb.ident, &z);
                let b = rename_name_var(b, &yb.ident, &z);
                self.check_guarded(&a, &b, depth + 1)
            }
            // Clause 1 and its symmetric direction: shape classes must agree.
            _ if bp.is_abstraction() || bq.is_abstraction() => Ok(false),
            _ => {
                let bp = bp.clone();
                let bq = bq.clone();
                self.process_clauses(&bp, &bq, kp, kq, depth)
            }
        }
    }

    fn process_clauses(
        &mut self,
        p: &Term,
        q: &Term,
        kp: NodeId,
        kq: NodeId,
        depth: u32,
    ) -> Result<bool> {
        let tp = self.trs(p, kp)?;
        let tq = self.trs(q, kq)?;
        Ok(self.simulate_actions(&tp, &tq, depth)?
            && self.simulate_actions(&tq, &tp, depth)?
            && self.simulate_open(p, q, kp, kq, depth)?
            && self.simulate_open(q, p, kq, kp, depth)?)
    }

    /// Output and input simulation in one direction. Tau transitions carry no
    /// clause of their own.
    fn simulate_actions(
        &mut self,
        from: &[CachedTr],
        into: &[CachedTr],
        depth: u32,
    ) -> Result<bool> {
        for e in from {
            match &e.act {
                Action::Tau => {}
                Action::Out { chan, payload } => {
                    let mut matched = false;
                    for e2 in into {
                        if let Action::Out { chan: c2, payload: pl2 } = &e2.act {
                            if c2 == chan
                                && self.check_keyed(payload, pl2, e.aux_key, e2.aux_key, depth + 1)?
                                && self.check_keyed(&e.res, &e2.res, e.res_key, e2.res_key, depth + 1)?
                            {
                                matched = true;
                                break;
                            }
                        }
                    }
                    if !matched {
                        return Ok(false);
                    }
                }
                Action::In { chan, bound } => {
                    let mut matched = false;
                    for e2 in into {
                        if let Action::In { chan: c2, bound: b2 } = &e2.act {
                            if c2 != chan || b2.sort != bound.sort {
                                continue;
                            }
                            // congruent up to the binder: bisimilar for free
                            if e.aux_key == e2.aux_key {
                                matched = true;
                                break;
                            }
                            let z = format!("I%c{depth}");
                            let r1 = rename_proc_var(&e.res, &bound.ident, &z);
                            let r2 = rename_proc_var(&e2.res, &b2.ident, &z);
                            if self.check_guarded(&r1, &r2, depth + 1)? {
                                matched = true;
                                break;
                            }
                        }
                    }
                    if !matched {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Clauses 6-8 in one direction: every open decomposition of `p` must be
    /// matched by one of `q` on the same free variable.
    fn simulate_open(
        &mut self,
        p: &Term,
        q: &Term,
        kp: NodeId,
        kq: NodeId,
        depth: u32,
    ) -> Result<bool> {
        let dp = self.decs(p, kp)?;
        let dq = self.decs(q, kq)?;
        for (x, spine, rest, kr) in &*dp {
            let mut matched = false;
            'cand: for (y, spine2, rest2, kr2) in &*dq {
                if y.ident != x.ident || spine2.len() != spine.len() {
                    continue;
                }
                for (a, b) in spine.iter().zip(spine2.iter()) {
                    match (a, b) {
                        (CachedArg::Name(m), CachedArg::Name(n)) => {
                            if m != n {
                                continue 'cand;
                            }
                        }
                        (CachedArg::Proc(a, ka), CachedArg::Proc(b, kb)) => {
                            if !self.check_keyed(a, b, *ka, *kb, depth + 1)? {
                                continue 'cand;
                            }
                        }
                        _ => continue 'cand,
                    }
                }
                if self.check_keyed(rest, rest2, *kr, *kr2, depth + 1)? {
                    matched = true;
                    break;
                }
            }
            if !matched {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Build a distinguishing sequence for a pair already known unequal.
    fn distinguish(&mut self, p: &Term, q: &Term, depth: u32) -> Result<Vec<DistStep>> {
        if depth > GUARD {
            return Err(Error::DepthBudget);
        }
        let bp = beta_normalize(p)?;
        let bq = beta_normalize(q)?;
        match (&bp, &bq) {
            (Term::ProcAbs { bound: xb, body: a }, Term::ProcAbs { bound: yb, body: b }) => {
                if xb.sort != yb.sort {
                    return Ok(vec![DistStep {
                        clause: 2,
                        detail: format!("binder sorts differ: {} vs {}", xb.sort, yb.sort),
                    }]);
                }
                let z = fresh_ident("B");
                let a = rename_proc_var(a, &xb.ident, &z);
                let b = rename_proc_var(b, &yb.ident, &z);
                let mut steps = vec![DistStep {
                    clause: 2,
                    detail: "process-abstraction bodies differ".into(),
                }];
                steps.extend(self.distinguish(&a, &b, depth + 1)?);
                return Ok(steps);
            }
            (Term::NameAbs { bound: xb, body: a }, Term::NameAbs { bound: yb, body: b }) => {
                let z = fresh_ident("b");
                let a = rename_name_var(a, &xb.ident, &z);
                let b = rename_name_var(b, &yb.ident, &z);
                let mut steps =
                    vec![DistStep { clause: 3, detail: "name-abstraction bodies differ".into() }];
                steps.extend(self.distinguish(&a, &b, depth + 1)?);
                return Ok(steps);
            }
            _ if bp.is_abstraction() != bq.is_abstraction()
                || (bp.is_abstraction() && bq.is_abstraction()) =>
            {
                let shape = |t: &Term| match t {
                    Term::ProcAbs { .. } => "a process abstraction",
                    Term::NameAbs { .. } => "a name abstraction",
                    _ => "a non-abstraction",
                };
                return Ok(vec![DistStep {
                    clause: 1,
                    detail: format!("one side is {}, the other {}", shape(&bp), shape(&bq)),
                }]);
            }
            _ => {}
        }
        for (a, b, swapped) in [(&bp, &bq, false), (&bq, &bp, true)] {
            if let Some(steps) = self.distinguish_dir(a, b, swapped, depth)? {
                return Ok(steps);
            }
        }
        Ok(vec![DistStep { clause: 0, detail: "no distinguishing clause found".into() }])
    }

    fn distinguish_dir(
        &mut self,
        p: &Term,
        q: &Term,
        swapped: bool,
        depth: u32,
    ) -> Result<Option<Vec<DistStep>>> {
        let side = if swapped { "right" } else { "left" };
        let tp = transitions(p)?;
        let tq = transitions(q)?;
        for (act, res) in &tp {
            match act {
                Action::Tau => continue,
                Action::Out { chan, payload } => {
                    let mut best: Option<(Term, Term, Term, Term)> = None;
                    let mut matched = false;
                    for (act2, res2) in &tq {
                        if let Action::Out { chan: c2, payload: pl2 } = act2 {
                            if c2 != chan {
                                continue;
                            }
                            let pay_ok = self.check_guarded(payload, pl2, depth + 1)?;
                            let res_ok = self.check_guarded(res, res2, depth + 1)?;
                            if pay_ok && res_ok {
                                matched = true;
                                break;
                            }
                            if best.is_none() {
                                best = Some(if pay_ok {
                                    (res.clone(), res2.clone(), Term::Nil, Term::Nil)
                                } else {
                                    (payload.clone(), pl2.clone(), Term::Nil, Term::Nil)
                                });
                            }
                        }
                    }
                    if !matched {
                        let mut steps = vec![DistStep {
                            clause: 4,
                            detail: format!("{side} side outputs {act} with no match"),
                        }];
                        if let Some((x, y, _, _)) = best {
                            steps.extend(self.distinguish(&x, &y, depth + 1)?);
                        }
                        return Ok(Some(steps));
                    }
                }
                Action::In { chan, bound } => {
                    let mut best: Option<(Term, Term)> = None;
                    let mut matched = false;
                    for (act2, res2) in &tq {
                        if let Action::In { chan: c2, bound: b2 } = act2 {
                            if c2 != chan || b2.sort != bound.sort {
                                continue;
                            }
                            let z = format!("I%c{depth}");
                            let r1 = rename_proc_var(res, &bound.ident, &z);
                            let r2 = rename_proc_var(res2, &b2.ident, &z);
                            if self.check_guarded(&r1, &r2, depth + 1)? {
                                matched = true;
                                break;
                            }
                            if best.is_none() {
                                best = Some((r1, r2));
                            }
                        }
                    }
                    if !matched {
                        let mut steps = vec![DistStep {
                            clause: 5,
                            detail: format!("{side} side inputs on {chan} with no match"),
                        }];
                        if let Some((x, y)) = best {
                            steps.extend(self.distinguish(&x, &y, depth + 1)?);
                        }
                        return Ok(Some(steps));
                    }
                }
            }
        }
        let dp = open_decompositions(p)?;
        let dq = open_decompositions(q)?;
        for (x, spine, rest) in &dp {
            let mut ok = false;
            'cand: for (y, spine2, rest2) in &dq {
                if y.ident != x.ident || spine2.len() != spine.len() {
                    continue;
                }
                for (a, b) in spine.iter().zip(spine2.iter()) {
                    match (a, b) {
                        (SpineArg::Name(m), SpineArg::Name(n)) => {
                            if m != n {
                                continue 'cand;
                            }
                        }
                        (SpineArg::Proc(a), SpineArg::Proc(b)) => {
                            if !self.check_guarded(a, b, depth + 1)? {
                                continue 'cand;
                            }
                        }
                        _ => continue 'cand,
                    }
                }
                if self.check_guarded(rest, rest2, depth + 1)? {
                    ok = true;
                    break;
                }
            }
            if !ok {
                let (clause, shown) = match spine.first() {
                    None => (6, format!("bare {}", x.ident)),
                    Some(SpineArg::Proc(a)) => (7, format!("{}<{}>", x.ident, print(a))),
                    Some(SpineArg::Name(n)) => (8, format!("{}<{}>", x.ident, n.ident)),
                };
                return Ok(Some(vec![DistStep {
                    clause,
                    detail: format!("{side} side exposes {shown} with no match"),
                }]));
            }
        }
        Ok(None)
    }
}

/// Decide strong bisimilarity and produce a verdict with a witness: a
/// distinguishing sequence on inequality.
pub fn hoio_bisimilar(p: &Term, q: &Term) -> Result<Verdict> {
    let mut session = Session::new();
    let equal = session.check(p, q)?;
    let witness = if equal {
        Witness::Bisimilar
    } else {
        Witness::Distinguisher(session.distinguish(p, q, 0)?)
    };
    Ok(Verdict { equal, witness })
}

/// Prime factors of a term: the parallel components of its normal form, each
/// not bisimilar to nil. Rebuilt as terms under the declared context.
pub fn prime_factors(p: &Term, env: &SortEnv) -> Result<Vec<Term>> {
    let mut store = TreeStore::new();
    let root = normalizer::nf(&mut store, p)?;
    let ids = match store.kind(root) {
        normalizer::NodeKind::Zero => vec![],
        normalizer::NodeKind::Par => store.get(root).children.to_vec(),
        _ => vec![root],
    };
    ids.into_iter().map(|n| normalizer::tree_to_term(&store, n, env)).collect()
}

fn probe_contexts(probes: &[Term]) -> Vec<Term> {
    // A probe acts as a context when it has a free occurrence of the hole
    // variable X; plain probes still contribute the trivial context X | probe.
    probes
        .iter()
        .map(|p| {
            let (pv, _) = crate::syntax::free_vars(p);
            if pv.contains("X") {
                p.clone()
            } else {
                Term::par(Term::Var(ProcVar::proc("X")), p.clone())
            }
        })
        .collect()
}

fn fill_hole(ctx: &Term, a: &Term) -> Result<Term> {
    let sort = sort_of(a)?;
    subst_proc(ctx, a, &ProcVar::new("X", sort))
}

/// Context-bisimulation clauses with every quantifier restricted to the probe
/// set and recursion bounded by `depth`. Returns false only on a concrete
/// refutation, so a true result at depth 0 is the optimistic base.
pub fn bounded_ctx_probe(p: &Term, q: &Term, probes: &[Term], depth: u32) -> Result<bool> {
    if depth == 0 {
        return Ok(true);
    }
    let bp = beta_normalize(p)?;
    let bq = beta_normalize(q)?;
    match (&bp, &bq) {
        (Term::ProcAbs { bound: xb, body: a }, Term::ProcAbs { bound: yb, body: b }) => {
            if xb.sort != yb.sort {
                return Ok(false);
            }
            for r in probes {
                if sort_of(r)? != xb.sort {
                    continue;
                }
                let ia = subst_proc(a, r, &ProcVar::new(xb.ident.clone(), xb.sort.clone()))?;
                let ib = subst_proc(b, r, &ProcVar::new(yb.ident.clone(), yb.sort.clone()))?;
                if !bounded_ctx_probe(&ia, &ib, probes, depth - 1)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        (Term::NameAbs { bound: xb, body: a }, Term::NameAbs { bound: yb, body: b }) => {
            let z = fresh_ident("b");
            let a = rename_name_var(a, &xb.ident, &z);
            let b = rename_name_var(b, &yb.ident, &z);
            return bounded_ctx_probe(&a, &b, probes, depth - 1);
        }
        _ if bp.is_abstraction() || bq.is_abstraction() => return Ok(false),
        _ => {}
    }
    let tp = transitions(&bp)?;
    let tq = transitions(&bq)?;
    let contexts = probe_contexts(probes);
    for (from, into) in [(&tp, &tq), (&tq, &tp)] {
        for (act, res) in from.iter() {
            match act {
                Action::Tau => {
                    let mut ok = false;
                    for (act2, res2) in into.iter() {
                        if *act2 == Action::Tau
                            && bounded_ctx_probe(res, res2, probes, depth - 1)?
                        {
                            ok = true;
                            break;
                        }
                    }
                    if !ok {
                        return Ok(false);
                    }
                }
                Action::In { chan, bound } => {
                    let mut ok = false;
                    'cand: for (act2, res2) in into.iter() {
                        if let Action::In { chan: c2, bound: b2 } = act2 {
                            if c2 != chan || b2.sort != bound.sort {
                                continue;
                            }
                            for r in probes {
                                if sort_of(r)? != bound.sort {
                                    continue;
                                }
                                let i1 = subst_proc(res, r, bound)?;
                                let i2 = subst_proc(res2, r, b2)?;
                                if !bounded_ctx_probe(&i1, &i2, probes, depth - 1)? {
                                    continue 'cand;
                                }
                            }
                            ok = true;
                            break;
                        }
                    }
                    if !ok {
                        return Ok(false);
                    }
                }
                Action::Out { chan, payload } => {
                    let shape_class = |t: &Term| match t {
                        Term::ProcAbs { .. } => 1,
                        Term::NameAbs { .. } => 2,
                        _ => 0,
                    };
                    let mut ok = false;
                    'ocand: for (act2, res2) in into.iter() {
                        if let Action::Out { chan: c2, payload: pl2 } = act2 {
                            if c2 != chan || shape_class(payload) != shape_class(pl2) {
                                continue;
                            }
                            for ctx in &contexts {
                                let Ok(ea) = fill_hole(ctx, payload) else { continue };
                                let Ok(eb) = fill_hole(ctx, pl2) else { continue };
                                let l = Term::par(ea, res.clone());
                                let r = Term::par(eb, res2.clone());
                                if !bounded_ctx_probe(&l, &r, probes, depth - 1)? {
                                    continue 'ocand;
                                }
                            }
                            ok = true;
                            break;
                        }
                    }
                    if !ok {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
