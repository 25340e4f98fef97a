//! Structural congruence and the labelled transition system.
//!
//! Congruence is the parallel monoid laws plus performing applications of
//! explicit abstractions; it is decided by comparing trees after the beta and
//! parallel-normalization passes (no distribution rewriting, which is a
//! bisimilarity law and not a congruence law).

use crate::error::Result;
use crate::normalizer::{cmp_nodes, congruent_tree, TreeStore};
use crate::syntax::{
    free_vars, rename_proc_var, subst_name, subst_proc, Name, ProcVar, Sort, Term,
};

/// A one-step action: input binds a variable (late instantiation, the bound
/// variable stays free in the residual), output carries its payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    In { chan: Name, bound: ProcVar },
    Out { chan: Name, payload: Term },
    Tau,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::In { chan, bound } => write!(f, "{chan}({bound})"),
            Action::Out { chan, payload } => {
                write!(f, "{chan}!({})", crate::parser::print(payload))
            }
            Action::Tau => f.write_str("tau"),
        }
    }
}

/// Perform every application of an explicit abstraction, everywhere in the
/// term. Variable-headed applications remain. Requires an annotated term.
pub fn beta_normalize(t: &Term) -> Result<Term> {
    Ok(match t {
        Term::Nil | Term::Var(_) => t.clone(),
        Term::Input { chan, bound, body } => {
            Term::input(chan.clone(), bound.clone(), beta_normalize(body)?)
        }
        Term::Output { chan, payload } => Term::output(chan.clone(), beta_normalize(payload)?),
        Term::Par(l, r) => Term::par(beta_normalize(l)?, beta_normalize(r)?),
        Term::ProcAbs { bound, body } => Term::proc_abs(bound.clone(), beta_normalize(body)?),
        Term::ProcApp { fun, arg } => {
            let f = beta_normalize(fun)?;
            let a = beta_normalize(arg)?;
            if let Term::ProcAbs { bound, body } = &f {
                beta_normalize(&subst_proc(body, &a, bound)?)?
            } else {
                Term::proc_app(f, a)
            }
        }
        Term::NameAbs { bound, body } => Term::name_abs(bound.clone(), beta_normalize(body)?),
        Term::NameApp { fun, arg } => {
            let f = beta_normalize(fun)?;
            if let Term::NameAbs { bound, body } = &f {
                beta_normalize(&subst_name(body, arg, &bound.ident))?
            } else {
                Term::name_app(f, arg.clone())
            }
        }
    })
}

/// Top-level parallel components of the beta-normal form, nils removed. The
/// empty list is the nil process; an abstraction is its own single component.
pub fn components(t: &Term) -> Result<Vec<Term>> {
    let n = beta_normalize(t)?;
    let mut out = Vec::new();
    fn flatten(t: Term, out: &mut Vec<Term>) {
        match t {
            Term::Nil => {}
            Term::Par(l, r) => {
                flatten(*l, out);
                flatten(*r, out);
            }
            other => out.push(other),
        }
    }
    flatten(n, &mut out);
    Ok(out)
}

/// Canonical form: the multiset of top-level components, deterministically
/// ordered by their congruence-tree key. Two terms are structurally congruent
/// exactly when their canonical forms are equal.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub components: Vec<Term>,
}

impl CanonicalForm {
    /// Recompose into a single term.
    pub fn term(&self) -> Term {
        Term::par_all(self.components.clone())
    }
}

/// Compute the canonical form of a well-sorted (annotated) term.
pub fn canonicalize(t: &Term) -> Result<CanonicalForm> {
    let comps = components(t)?;
    let mut store = TreeStore::new();
    let mut keyed: Vec<(crate::normalizer::NodeId, Term)> = Vec::with_capacity(comps.len());
    for c in comps {
        let k = congruent_tree(&mut store, &c)?;
        keyed.push((k, c));
    }
    keyed.sort_by(|a, b| cmp_nodes(&store, a.0, b.0));
    Ok(CanonicalForm { components: keyed.into_iter().map(|(_, c)| c).collect() })
}

/// Decide structural congruence.
pub fn struct_congruent(p: &Term, q: &Term) -> Result<bool> {
    let mut store = TreeStore::new();
    Ok(congruent_tree(&mut store, p)? == congruent_tree(&mut store, q)?)
}

/// Deterministic input-binder identifier that cannot clash with surface
/// identifiers or the free variables of `t`.
fn canonical_bound_ident(t: &Term) -> String {
    let (pv, _) = free_vars(t);
    let mut k = 0;
    loop {
        let cand = format!("I%{k}");
        if !pv.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

fn same_channel(a: &Name, b: &Name) -> bool {
    // Name-variable channels interact only when they are literally the same
    // variable; there is no unification.
    a == b
}

fn par_rest(comps: &[Term], skip: &[usize]) -> Vec<Term> {
    comps
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, c)| c.clone())
        .collect()
}

/// All one-step transitions up to congruence and alpha. Input residuals carry
/// the (canonically renamed) bound variable free; tau steps pair an output
/// with an input on the same channel, late-instantiating the continuation.
pub fn transitions(t: &Term) -> Result<Vec<(Action, Term)>> {
    let comps = components(t)?;
    let fresh = canonical_bound_ident(t);
    let mut out: Vec<(Action, Term)> = Vec::new();
    let push = |out: &mut Vec<(Action, Term)>, act: Action, res: Term| -> Result<()> {
        for (a, r) in out.iter() {
            if *a == act && struct_congruent(r, &res)? {
                return Ok(());
            }
        }
        out.push((act, res));
        Ok(())
    };
    for (i, c) in comps.iter().enumerate() {
        match c {
            Term::Input { chan, bound, body } => {
                let bv = ProcVar::new(fresh.clone(), bound.sort.clone());
                let body = rename_proc_var(body, &bound.ident, &bv.ident);
                let mut parts = vec![body];
                parts.extend(par_rest(&comps, &[i]));
                push(
                    &mut out,
                    Action::In { chan: chan.clone(), bound: bv },
                    Term::par_all(parts),
                )?;
            }
            Term::Output { chan, payload } => {
                push(
                    &mut out,
                    Action::Out { chan: chan.clone(), payload: (**payload).clone() },
                    Term::par_all(par_rest(&comps, &[i])),
                )?;
            }
            _ => {}
        }
    }
    for (i, ci) in comps.iter().enumerate() {
        let Term::Output { chan: oc, payload } = ci else { continue };
        for (j, cj) in comps.iter().enumerate() {
            if i == j {
                continue;
            }
            let Term::Input { chan: ic, bound, body } = cj else { continue };
            if !same_channel(oc, ic) {
                continue;
            }
            let instantiated = subst_proc(body, payload, bound)?;
            let mut parts = vec![instantiated];
            parts.extend(par_rest(&comps, &[i, j]));
            push(&mut out, Action::Tau, Term::par_all(parts))?;
        }
    }
    Ok(out)
}

/// One argument in a variable-headed application spine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpineArg {
    Proc(Term),
    Name(Name),
}

/// Decompositions of the canonical form exposing an open top-level component:
/// a variable head under zero or more applications (bare X, X<A>, X<d>,
/// X<A><d>, ...), with its argument spine in application order and the
/// parallel remainder. After beta normalization every application chain in a
/// component bottoms out in a variable, so nothing else is open.
pub fn open_decompositions(t: &Term) -> Result<Vec<(ProcVar, Vec<SpineArg>, Term)>> {
    let comps = components(t)?;
    let mut out = Vec::new();
    for (i, c) in comps.iter().enumerate() {
        let mut spine = Vec::new();
        let mut head = c;
        loop {
            match head {
                Term::ProcApp { fun, arg } => {
                    spine.push(SpineArg::Proc((**arg).clone()));
                    head = fun;
                }
                Term::NameApp { fun, arg } => {
                    spine.push(SpineArg::Name(arg.clone()));
                    head = fun;
                }
                _ => break,
            }
        }
        if let Term::Var(v) = head {
            spine.reverse();
            let rest = Term::par_all(par_rest(&comps, &[i]));
            out.push((v.clone(), spine, rest));
        }
    }
    Ok(out)
}

/// Sort of an annotated term's input bound variable for `In` actions; helper
/// for callers that need to instantiate late inputs.
pub fn instantiate_input(residual: &Term, bound: &ProcVar, with: &Term) -> Result<Term> {
    subst_proc(residual, with, bound)
}

/// Sort lookup helper: the declared or inferred sort of a variable occurrence.
pub fn var_sort(v: &ProcVar) -> &Sort {
    &v.sort
}
