//! Terms of the calculus: nil, process variables, input prefix, asynchronous
//! output, parallel composition, and abstraction/application over both
//! processes and names. Operations here are pure; the only shared state is the
//! fresh-name counter used for capture-avoiding renaming.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Names are split into constants (`a`, `b`, ...) and variables (`x`, `y`,
/// ...). A lowercase identifier denotes a variable only when it is bound by an
/// enclosing name abstraction or declared free; otherwise it is a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameKind {
    Constant,
    Variable,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    pub kind: NameKind,
    pub ident: String,
}

impl Name {
    pub fn constant(ident: impl Into<String>) -> Self {
        Name { kind: NameKind::Constant, ident: ident.into() }
    }
    pub fn variable(ident: impl Into<String>) -> Self {
        Name { kind: NameKind::Variable, ident: ident.into() }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ident)
    }
}

/// Simple sort of a term or variable: plain process, process abstraction, or
/// name abstraction. Sorts are finite trees, which keeps application chains
/// terminating.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Proc,
    PAbs(Box<Sort>, Box<Sort>),
    NAbs(Box<Sort>),
}

impl Sort {
    pub fn pabs(arg: Sort, result: Sort) -> Self {
        Sort::PAbs(Box::new(arg), Box::new(result))
    }
    pub fn nabs(result: Sort) -> Self {
        Sort::NAbs(Box::new(result))
    }
    pub fn is_abstraction(&self) -> bool {
        !matches!(self, Sort::Proc)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Proc => f.write_str("proc"),
            Sort::PAbs(a, r) => write!(f, "({a})->{r}"),
            Sort::NAbs(r) => write!(f, "name->{r}"),
        }
    }
}

/// A process variable with its sort. Identifiers start with an uppercase
/// letter; internally generated names use a `%` infix, which the surface
/// grammar cannot produce.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcVar {
    pub ident: String,
    pub sort: Sort,
}

impl ProcVar {
    pub fn new(ident: impl Into<String>, sort: Sort) -> Self {
        ProcVar { ident: ident.into(), sort }
    }
    pub fn proc(ident: impl Into<String>) -> Self {
        ProcVar::new(ident, Sort::Proc)
    }
}

impl fmt::Display for ProcVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ident)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Nil,
    Var(ProcVar),
    Input { chan: Name, bound: ProcVar, body: Box<Term> },
    Output { chan: Name, payload: Box<Term> },
    Par(Box<Term>, Box<Term>),
    ProcAbs { bound: ProcVar, body: Box<Term> },
    ProcApp { fun: Box<Term>, arg: Box<Term> },
    NameAbs { bound: Name, body: Box<Term> },
    NameApp { fun: Box<Term>, arg: Name },
}

impl Term {
    pub fn input(chan: Name, bound: ProcVar, body: Term) -> Term {
        Term::Input { chan, bound, body: Box::new(body) }
    }
    pub fn output(chan: Name, payload: Term) -> Term {
        Term::Output { chan, payload: Box::new(payload) }
    }
    pub fn par(left: Term, right: Term) -> Term {
        Term::Par(Box::new(left), Box::new(right))
    }
    pub fn proc_abs(bound: ProcVar, body: Term) -> Term {
        Term::ProcAbs { bound, body: Box::new(body) }
    }
    pub fn proc_app(fun: Term, arg: Term) -> Term {
        Term::ProcApp { fun: Box::new(fun), arg: Box::new(arg) }
    }
    pub fn name_abs(bound: Name, body: Term) -> Term {
        Term::NameAbs { bound, body: Box::new(body) }
    }
    pub fn name_app(fun: Term, arg: Name) -> Term {
        Term::NameApp { fun: Box::new(fun), arg }
    }

    /// Parallel composition of a list of components; empty list is nil.
    pub fn par_all(mut components: Vec<Term>) -> Term {
        match components.len() {
            0 => Term::Nil,
            1 => components.pop().unwrap(),
            _ => {
                let mut it = components.into_iter();
                let first = it.next().unwrap();
                it.fold(first, Term::par)
            }
        }
    }

    pub fn is_abstraction(&self) -> bool {
        matches!(self, Term::ProcAbs { .. } | Term::NameAbs { .. })
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Nil | Term::Var(_) => 1,
            Term::Input { body, .. } => 1 + body.size(),
            Term::Output { payload, .. } => 1 + payload.size(),
            Term::Par(l, r) => 1 + l.size() + r.size(),
            Term::ProcAbs { body, .. } => 1 + body.size(),
            Term::ProcApp { fun, arg } => 1 + fun.size() + arg.size(),
            Term::NameAbs { body, .. } => 1 + body.size(),
            Term::NameApp { fun, .. } => 1 + fun.size(),
        }
    }
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A globally fresh identifier derived from `base`. The `%` separator keeps
/// generated names out of the surface-identifier namespace.
pub fn fresh_ident(base: &str) -> String {
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    let stem: String = base.chars().take_while(|c| *c != '%').collect();
    // The `%f` marker keeps fresh names disjoint from the `%<digits>` names
    // produced by alpha normalization.
    format!("{stem}%f{n}")
}

/// Free process variables and free name variables of a term.
pub fn free_vars(t: &Term) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut pv = BTreeSet::new();
    let mut nv = BTreeSet::new();
    fn name_occ(n: &Name, bound_names: &[String], nv: &mut BTreeSet<String>) {
        if n.kind == NameKind::Variable && !bound_names.iter().any(|b| *b == n.ident) {
            nv.insert(n.ident.clone());
        }
    }
    fn walk(
        t: &Term,
        bound_procs: &mut Vec<String>,
        bound_names: &mut Vec<String>,
        pv: &mut BTreeSet<String>,
        nv: &mut BTreeSet<String>,
    ) {
        match t {
            Term::Nil => {}
            Term::Var(v) => {
                if !bound_procs.iter().any(|b| *b == v.ident) {
                    pv.insert(v.ident.clone());
                }
            }
            Term::Input { chan, bound, body } => {
                name_occ(chan, bound_names, nv);
                bound_procs.push(bound.ident.clone());
                walk(body, bound_procs, bound_names, pv, nv);
                bound_procs.pop();
            }
            Term::Output { chan, payload } => {
                name_occ(chan, bound_names, nv);
                walk(payload, bound_procs, bound_names, pv, nv);
            }
            Term::Par(l, r) => {
                walk(l, bound_procs, bound_names, pv, nv);
                walk(r, bound_procs, bound_names, pv, nv);
            }
            Term::ProcAbs { bound, body } => {
                bound_procs.push(bound.ident.clone());
                walk(body, bound_procs, bound_names, pv, nv);
                bound_procs.pop();
            }
            Term::ProcApp { fun, arg } => {
                walk(fun, bound_procs, bound_names, pv, nv);
                walk(arg, bound_procs, bound_names, pv, nv);
            }
            Term::NameAbs { bound, body } => {
                bound_names.push(bound.ident.clone());
                walk(body, bound_procs, bound_names, pv, nv);
                bound_names.pop();
            }
            Term::NameApp { fun, arg } => {
                walk(fun, bound_procs, bound_names, pv, nv);
                name_occ(arg, bound_names, nv);
            }
        }
    }
    walk(t, &mut Vec::new(), &mut Vec::new(), &mut pv, &mut nv);
    (pv, nv)
}

/// Synthesize the sort of a term from the sort annotations on its variables.
pub fn sort_of(t: &Term) -> Result<Sort> {
    match t {
        Term::Nil | Term::Input { .. } | Term::Output { .. } | Term::Par(_, _) => Ok(Sort::Proc),
        Term::Var(v) => Ok(v.sort.clone()),
        Term::ProcAbs { bound, body } => Ok(Sort::pabs(bound.sort.clone(), sort_of(body)?)),
        Term::ProcApp { fun, arg } => match sort_of(fun)? {
            Sort::PAbs(expect, result) => {
                let got = sort_of(arg)?;
                if got != *expect {
                    Err(Error::sort(format!(
                        "application argument has sort {got}, expected {expect}"
                    )))
                } else {
                    Ok(*result)
                }
            }
            s => Err(Error::sort(format!("cannot apply a term of sort {s} to a process"))),
        },
        Term::NameAbs { body, .. } => Ok(Sort::nabs(sort_of(body)?)),
        Term::NameApp { fun, .. } => match sort_of(fun)? {
            Sort::NAbs(result) => Ok(*result),
            s => Err(Error::sort(format!("cannot apply a term of sort {s} to a name"))),
        },
    }
}

/// Capture-avoiding substitution of process `r` for free occurrences of the
/// process variable `x`. Binders in `t` that would capture free variables of
/// `r` are freshly renamed on the way down.
pub fn subst_proc(t: &Term, r: &Term, x: &ProcVar) -> Result<Term> {
    let r_sort = sort_of(r)?;
    if r_sort != x.sort {
        return Err(Error::sort(format!(
            "substituting a term of sort {} for {} of sort {}",
            r_sort, x.ident, x.sort
        )));
    }
    let (r_pv, r_nv) = free_vars(r);
    Ok(subst_proc_inner(t, r, &x.ident, &r_pv, &r_nv))
}

fn subst_proc_inner(
    t: &Term,
    r: &Term,
    x: &str,
    r_pv: &BTreeSet<String>,
    r_nv: &BTreeSet<String>,
) -> Term {
    match t {
        Term::Nil => Term::Nil,
        Term::Var(v) => {
            if v.ident == x {
                r.clone()
            } else {
                t.clone()
            }
        }
        Term::Input { chan, bound, body } => {
            if bound.ident == x {
                t.clone()
            } else if r_pv.contains(&bound.ident) {
                let fresh = ProcVar::new(fresh_ident(&bound.ident), bound.sort.clone());
                let renamed = rename_proc_var(body, &bound.ident, &fresh.ident);
                Term::input(chan.clone(), fresh, subst_proc_inner(&renamed, r, x, r_pv, r_nv))
            } else {
                Term::input(
                    chan.clone(),
                    bound.clone(),
                    subst_proc_inner(body, r, x, r_pv, r_nv),
                )
            }
        }
        Term::Output { chan, payload } => {
            Term::output(chan.clone(), subst_proc_inner(payload, r, x, r_pv, r_nv))
        }
        Term::Par(l, r2) => Term::par(
            subst_proc_inner(l, r, x, r_pv, r_nv),
            subst_proc_inner(r2, r, x, r_pv, r_nv),
        ),
        Term::ProcAbs { bound, body } => {
            if bound.ident == x {
                t.clone()
            } else if r_pv.contains(&bound.ident) {
                let fresh = ProcVar::new(fresh_ident(&bound.ident), bound.sort.clone());
                let renamed = rename_proc_var(body, &bound.ident, &fresh.ident);
                Term::proc_abs(fresh, subst_proc_inner(&renamed, r, x, r_pv, r_nv))
            } else {
                Term::proc_abs(bound.clone(), subst_proc_inner(body, r, x, r_pv, r_nv))
            }
        }
        Term::ProcApp { fun, arg } => Term::proc_app(
            subst_proc_inner(fun, r, x, r_pv, r_nv),
            subst_proc_inner(arg, r, x, r_pv, r_nv),
        ),
        Term::NameAbs { bound, body } => {
            // A name binder cannot capture process variables, but it can
            // capture free name variables of r.
            if r_nv.contains(&bound.ident) {
                let fresh = Name::variable(fresh_ident(&bound.ident));
                let renamed = rename_name_var(body, &bound.ident, &fresh.ident);
                Term::name_abs(fresh, subst_proc_inner(&renamed, r, x, r_pv, r_nv))
            } else {
                Term::name_abs(bound.clone(), subst_proc_inner(body, r, x, r_pv, r_nv))
            }
        }
        Term::NameApp { fun, arg } => {
            Term::name_app(subst_proc_inner(fun, r, x, r_pv, r_nv), arg.clone())
        }
    }
}

/// Substitution of name `g` for free occurrences of the name variable `m`,
/// in both channel and application-argument positions.
pub fn subst_name(t: &Term, g: &Name, m: &str) -> Term {
    let sub = |n: &Name| -> Name {
        if n.kind == NameKind::Variable && n.ident == m {
            g.clone()
        } else {
            n.clone()
        }
    };
    match t {
        Term::Nil => Term::Nil,
        Term::Var(_) => t.clone(),
        Term::Input { chan, bound, body } => {
            Term::input(sub(chan), bound.clone(), subst_name(body, g, m))
        }
        Term::Output { chan, payload } => Term::output(sub(chan), subst_name(payload, g, m)),
        Term::Par(l, r) => Term::par(subst_name(l, g, m), subst_name(r, g, m)),
        Term::ProcAbs { bound, body } => Term::proc_abs(bound.clone(), subst_name(body, g, m)),
        Term::ProcApp { fun, arg } => {
            Term::proc_app(subst_name(fun, g, m), subst_name(arg, g, m))
        }
        Term::NameAbs { bound, body } => {
            if bound.ident == m {
                t.clone()
            } else if g.kind == NameKind::Variable && g.ident == bound.ident {
                let fresh = Name::variable(fresh_ident(&bound.ident));
                let renamed = rename_name_var(body, &bound.ident, &fresh.ident);
                Term::name_abs(fresh, subst_name(&renamed, g, m))
            } else {
                Term::name_abs(bound.clone(), subst_name(body, g, m))
            }
        }
        Term::NameApp { fun, arg } => Term::name_app(subst_name(fun, g, m), sub(arg)),
    }
}

/// Rename free occurrences of process variable `from` to `to` (used for alpha
/// renaming; `to` is assumed fresh).
pub fn rename_proc_var(t: &Term, from: &str, to: &str) -> Term {
    match t {
        Term::Nil => Term::Nil,
        Term::Var(v) => {
            if v.ident == from {
                Term::Var(ProcVar::new(to, v.sort.clone()))
            } else {
                t.clone()
            }
        }
        Term::Input { chan, bound, body } => {
            if bound.ident == from {
                t.clone()
            } else {
                Term::input(chan.clone(), bound.clone(), rename_proc_var(body, from, to))
            }
        }
        Term::Output { chan, payload } => {
            Term::output(chan.clone(), rename_proc_var(payload, from, to))
        }
        Term::Par(l, r) => Term::par(rename_proc_var(l, from, to), rename_proc_var(r, from, to)),
        Term::ProcAbs { bound, body } => {
            if bound.ident == from {
                t.clone()
            } else {
                Term::proc_abs(bound.clone(), rename_proc_var(body, from, to))
            }
        }
        Term::ProcApp { fun, arg } => {
            Term::proc_app(rename_proc_var(fun, from, to), rename_proc_var(arg, from, to))
        }
        Term::NameAbs { bound, body } => {
            Term::name_abs(bound.clone(), rename_proc_var(body, from, to))
        }
        Term::NameApp { fun, arg } => {
            Term::name_app(rename_proc_var(fun, from, to), arg.clone())
        }
    }
}

/// Rename free occurrences of name variable `from` to `to` (`to` fresh).
pub fn rename_name_var(t: &Term, from: &str, to: &str) -> Term {
    subst_name(t, &Name::variable(to), from)
}

/// Reduce the functor of an application to either an abstraction or a
/// variable-headed form.
enum FunctorShape {
    ProcAbsHead(ProcVar, Term),
    NameAbsHead(Name, Term),
    VarHead,
}

fn functor_shape(t: &Term) -> Result<FunctorShape> {
    match t {
        Term::ProcAbs { bound, body } => {
            Ok(FunctorShape::ProcAbsHead(bound.clone(), (**body).clone()))
        }
        Term::NameAbs { bound, body } => {
            Ok(FunctorShape::NameAbsHead(bound.clone(), (**body).clone()))
        }
        Term::Var(_) => Ok(FunctorShape::VarHead),
        Term::ProcApp { fun, arg } => match functor_shape(fun)? {
            FunctorShape::ProcAbsHead(b, body) => functor_shape(&subst_proc(&body, arg, &b)?),
            FunctorShape::VarHead => Ok(FunctorShape::VarHead),
            FunctorShape::NameAbsHead(..) => {
                Err(Error::sort("process application of a name abstraction"))
            }
        },
        Term::NameApp { fun, arg } => match functor_shape(fun)? {
            FunctorShape::NameAbsHead(x, body) => {
                functor_shape(&subst_name(&body, arg, &x.ident))
            }
            FunctorShape::VarHead => Ok(FunctorShape::VarHead),
            FunctorShape::ProcAbsHead(..) => {
                Err(Error::sort("name application of a process abstraction"))
            }
        },
        other => Err(Error::sort(format!(
            "application functor is neither an abstraction nor a variable: {other:?}"
        ))),
    }
}

/// The depth measure. Application cases go through real substitution, so this
/// requires a well-sorted term to terminate.
pub fn depth(t: &Term) -> Result<u64> {
    match t {
        Term::Nil => Ok(0),
        Term::Var(_) => Ok(1),
        Term::Input { body, .. } => Ok(depth(body)? + 1),
        Term::Output { payload, .. } => Ok(depth(payload)? + 1),
        Term::Par(l, r) => Ok(depth(l)? + depth(r)?),
        Term::ProcAbs { body, .. } => Ok(depth(body)? + 1),
        Term::ProcApp { fun, arg } => match functor_shape(fun)? {
            FunctorShape::ProcAbsHead(b, body) => depth(&subst_proc(&body, arg, &b)?),
            FunctorShape::VarHead => Ok(depth(arg)? + 1),
            FunctorShape::NameAbsHead(..) => {
                Err(Error::sort("process application of a name abstraction"))
            }
        },
        Term::NameAbs { body, .. } => Ok(depth(body)? + 1),
        Term::NameApp { fun, arg } => match functor_shape(fun)? {
            FunctorShape::NameAbsHead(x, body) => depth(&subst_name(&body, arg, &x.ident)),
            FunctorShape::VarHead => Ok(1),
            FunctorShape::ProcAbsHead(..) => {
                Err(Error::sort("name application of a process abstraction"))
            }
        },
    }
}

/// A variable is guarded if each of its occurrences sits under an input
/// prefix, inside the argument of an application headed by another variable,
/// or under an output.
pub fn is_guarded(ident: &str, t: &Term) -> bool {
    fn walk(t: &Term, x: &str, guarded: bool, shadow_p: bool, shadow_n: bool) -> bool {
        let chan_ok = |n: &Name, shadow_n: bool| -> bool {
            // Channel occurrences are themselves inside a prefix subexpression.
            let _ = (n, shadow_n);
            true
        };
        match t {
            Term::Nil => true,
            Term::Var(v) => {
                if !shadow_p && v.ident == x {
                    guarded
                } else {
                    true
                }
            }
            Term::Input { chan, bound, body } => {
                chan_ok(chan, shadow_n)
                    && walk(body, x, true, shadow_p || bound.ident == x, shadow_n)
            }
            Term::Output { payload, .. } => walk(payload, x, true, shadow_p, shadow_n),
            Term::Par(l, r) => {
                walk(l, x, guarded, shadow_p, shadow_n) && walk(r, x, guarded, shadow_p, shadow_n)
            }
            Term::ProcAbs { bound, body } => {
                walk(body, x, guarded, shadow_p || bound.ident == x, shadow_n)
            }
            Term::ProcApp { fun, arg } => {
                let arg_guarded = match &**fun {
                    Term::Var(v) if v.ident != x => true,
                    _ => guarded,
                };
                walk(fun, x, guarded, shadow_p, shadow_n)
                    && walk(arg, x, arg_guarded, shadow_p, shadow_n)
            }
            Term::NameAbs { bound, body } => {
                walk(body, x, guarded, shadow_p, shadow_n || bound.ident == x)
            }
            Term::NameApp { fun, arg } => {
                let arg_ok = match (&**fun, arg.kind) {
                    (_, NameKind::Constant) => true,
                    (Term::Var(_), _) => true,
                    _ => arg.ident != x || shadow_n || guarded,
                };
                walk(fun, x, guarded, shadow_p, shadow_n) && arg_ok
            }
        }
    }
    walk(t, ident, false, false, false)
}

/// True when every free variable of the term is guarded.
pub fn term_guarded(t: &Term) -> bool {
    let (pv, nv) = free_vars(t);
    pv.iter().all(|v| is_guarded(v, t)) && nv.iter().all(|v| is_guarded(v, t))
}

/// Canonical renaming of every bound variable, in traversal order. Two terms
/// are alpha-equivalent exactly when their alpha-normal forms are equal.
pub fn alpha_normalize(t: &Term) -> Term {
    fn walk(t: &Term, counter: &mut u64, penv: &mut Vec<(String, String)>, nenv: &mut Vec<(String, String)>) -> Term {
        match t {
            Term::Nil => Term::Nil,
            Term::Var(v) => {
                let ident = penv
                    .iter()
                    .rev()
                    .find(|(from, _)| *from == v.ident)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| v.ident.clone());
                Term::Var(ProcVar::new(ident, v.sort.clone()))
            }
            Term::Input { chan, bound, body } => {
                let chan = rename_name(chan, nenv);
                let to = format!("B%{}", bump(counter));
                penv.push((bound.ident.clone(), to.clone()));
                let body = walk(body, counter, penv, nenv);
                penv.pop();
                Term::input(chan, ProcVar::new(to, bound.sort.clone()), body)
            }
            Term::Output { chan, payload } => {
                Term::output(rename_name(chan, nenv), walk(payload, counter, penv, nenv))
            }
            Term::Par(l, r) => {
                Term::par(walk(l, counter, penv, nenv), walk(r, counter, penv, nenv))
            }
            Term::ProcAbs { bound, body } => {
                let to = format!("B%{}", bump(counter));
                penv.push((bound.ident.clone(), to.clone()));
                let body = walk(body, counter, penv, nenv);
                penv.pop();
                Term::proc_abs(ProcVar::new(to, bound.sort.clone()), body)
            }
            Term::ProcApp { fun, arg } => {
                Term::proc_app(walk(fun, counter, penv, nenv), walk(arg, counter, penv, nenv))
            }
            Term::NameAbs { bound, body } => {
                let to = format!("b%{}", bump(counter));
                nenv.push((bound.ident.clone(), to.clone()));
                let body = walk(body, counter, penv, nenv);
                nenv.pop();
                Term::name_abs(Name::variable(to), body)
            }
            Term::NameApp { fun, arg } => {
                Term::name_app(walk(fun, counter, penv, nenv), rename_name(arg, nenv))
            }
        }
    }
    fn bump(counter: &mut u64) -> u64 {
        let v = *counter;
        *counter += 1;
        v
    }
    fn rename_name(n: &Name, nenv: &[(String, String)]) -> Name {
        if n.kind == NameKind::Variable {
            if let Some((_, to)) = nenv.iter().rev().find(|(from, _)| *from == n.ident) {
                return Name::variable(to.clone());
            }
        }
        n.clone()
    }
    walk(t, &mut 0, &mut Vec::new(), &mut Vec::new())
}

/// Alpha-equivalence.
pub fn alpha_eq(p: &Term, q: &Term) -> bool {
    p == q || alpha_normalize(p) == alpha_normalize(q)
}
