//! A minimal simple-sort checker. Its only job is well-formedness: every
//! application is of an abstraction (or a variable) of matching sort, no
//! abstraction dangles as a parallel component or input continuation, and all
//! sorts are finite trees so that application chains terminate. Sorts are
//! inferred by unification with an occurs check, which rejects self-application
//! terms outright.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::syntax::{Name, NameKind, ProcVar, Sort, Term};

/// Declared context: sorts for free process variables, the set of declared
/// free name variables, and payload sorts for channels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortEnv {
    pub proc_vars: BTreeMap<String, Sort>,
    pub name_vars: Vec<String>,
    pub channels: BTreeMap<String, Sort>,
}

impl SortEnv {
    pub fn is_free_name_var(&self, ident: &str) -> bool {
        self.name_vars.iter().any(|n| n == ident)
    }
}

/// Result of a successful check: the term with every variable annotated with
/// its resolved sort, the overall sort, and the inferred channel payload table.
#[derive(Debug, Clone)]
pub struct Checked {
    pub term: Term,
    pub sort: Sort,
    pub channels: BTreeMap<String, Sort>,
}

#[derive(Debug, Clone, PartialEq)]
enum MS {
    V(u32),
    Proc,
    PAbs(Box<MS>, Box<MS>),
    NAbs(Box<MS>),
}

struct Infer {
    next: u32,
    subst: BTreeMap<u32, MS>,
    // Sorts, in pre-order traversal encounter order, one per ProcVar node.
    fixups: Vec<MS>,
    // Payload sort metas for channel constants and free name variables.
    chan_payload: BTreeMap<String, MS>,
    // Metas for free process variables.
    free_proc: BTreeMap<String, MS>,
    // Payload meta of the most recently checked name abstraction binder.
    last_nabs_payload: Option<MS>,
}

impl Infer {
    fn fresh(&mut self) -> MS {
        let v = self.next;
        self.next += 1;
        MS::V(v)
    }

    fn resolve(&self, ms: &MS) -> MS {
        let mut cur = ms.clone();
        while let MS::V(v) = cur {
            match self.subst.get(&v) {
                Some(next) => cur = next.clone(),
                None => return MS::V(v),
            }
        }
        cur
    }

    fn occurs(&self, v: u32, ms: &MS) -> bool {
        match self.resolve(ms) {
            MS::V(w) => w == v,
            MS::Proc => false,
            MS::PAbs(a, r) => self.occurs(v, &a) || self.occurs(v, &r),
            MS::NAbs(r) => self.occurs(v, &r),
        }
    }

    fn unify(&mut self, a: &MS, b: &MS) -> Result<()> {
        let ra = self.resolve(a);
        let rb = self.resolve(b);
        match (ra, rb) {
            (MS::V(v), MS::V(w)) if v == w => Ok(()),
            (MS::V(v), other) | (other, MS::V(v)) => {
                if self.occurs(v, &other) {
                    return Err(Error::sort(
                        "self-application: a variable cannot take an argument of its own sort",
                    ));
                }
                self.subst.insert(v, other);
                Ok(())
            }
            (MS::Proc, MS::Proc) => Ok(()),
            (MS::PAbs(a1, r1), MS::PAbs(a2, r2)) => {
                self.unify(&a1, &a2)?;
                self.unify(&r1, &r2)
            }
            (MS::NAbs(r1), MS::NAbs(r2)) => self.unify(&r1, &r2),
            (x, y) => Err(Error::sort(format!(
                "sort mismatch: {} vs {}",
                self.to_sort(&x),
                self.to_sort(&y)
            ))),
        }
    }

    fn to_sort(&self, ms: &MS) -> Sort {
        match self.resolve(ms) {
            MS::V(_) => Sort::Proc,
            MS::Proc => Sort::Proc,
            MS::PAbs(a, r) => Sort::pabs(self.to_sort(&a), self.to_sort(&r)),
            MS::NAbs(r) => Sort::nabs(self.to_sort(&r)),
        }
    }

    fn from_sort(s: &Sort) -> MS {
        match s {
            Sort::Proc => MS::Proc,
            Sort::PAbs(a, r) => MS::PAbs(Box::new(Self::from_sort(a)), Box::new(Self::from_sort(r))),
            Sort::NAbs(r) => MS::NAbs(Box::new(Self::from_sort(r))),
        }
    }
}

/// True when the term is an application whose (transitive) functor head is a
/// variable that is itself already applied, e.g. `(X<A>)<B>`. Such chains fall
/// outside the shape every term is kept in, so they are rejected here.
fn nested_var_application(fun: &Term) -> bool {
    fn head_is_var(t: &Term) -> bool {
        match t {
            Term::Var(_) => true,
            Term::ProcApp { fun, .. } | Term::NameApp { fun, .. } => head_is_var(fun),
            _ => false,
        }
    }
    matches!(fun, Term::ProcApp { .. } | Term::NameApp { .. }) && head_is_var(fun)
}

struct Scope<'a> {
    env: &'a SortEnv,
    // bound process vars: (ident, meta)
    pstack: Vec<(String, MS)>,
    // bound name vars: (ident, payload meta)
    nstack: Vec<(String, MS)>,
}

impl Infer {
    fn payload_meta(&mut self, chan: &Name, scope: &mut Scope<'_>) -> Result<MS> {
        if chan.kind == NameKind::Variable {
            if let Some((_, m)) = scope.nstack.iter().rev().find(|(id, _)| *id == chan.ident) {
                return Ok(m.clone());
            }
            if !scope.env.is_free_name_var(&chan.ident) {
                return Err(Error::sort(format!(
                    "name variable '{}' is neither bound nor declared free",
                    chan.ident
                )));
            }
        }
        if let Some(m) = self.chan_payload.get(&chan.ident) {
            return Ok(m.clone());
        }
        let m = self.fresh();
        if let Some(declared) = scope.env.channels.get(&chan.ident) {
            let d = Self::from_sort(declared);
            self.chan_payload.insert(chan.ident.clone(), m.clone());
            self.unify(&m, &d)?;
        } else {
            self.chan_payload.insert(chan.ident.clone(), m.clone());
        }
        Ok(m)
    }

    fn check(&mut self, t: &Term, scope: &mut Scope<'_>) -> Result<MS> {
        match t {
            Term::Nil => Ok(MS::Proc),
            Term::Var(v) => {
                let m = if let Some((_, m)) =
                    scope.pstack.iter().rev().find(|(id, _)| *id == v.ident)
                {
                    m.clone()
                } else if let Some(m) = self.free_proc.get(&v.ident) {
                    m.clone()
                } else {
                    let m = self.fresh();
                    if let Some(declared) = scope.env.proc_vars.get(&v.ident) {
                        let d = Self::from_sort(declared);
                        self.unify(&m, &d)?;
                    }
                    self.free_proc.insert(v.ident.clone(), m.clone());
                    m
                };
                self.fixups.push(m.clone());
                Ok(m)
            }
            Term::Input { chan, bound, body } => {
                let payload = self.payload_meta(chan, scope)?;
                self.fixups.push(payload.clone());
                scope.pstack.push((bound.ident.clone(), payload));
                let b = self.check(body, scope)?;
                scope.pstack.pop();
                self.unify(&b, &MS::Proc)
                    .map_err(|_| Error::sort("input continuation must be a process"))?;
                Ok(MS::Proc)
            }
            Term::Output { chan, payload } => {
                let pm = self.payload_meta(chan, scope)?;
                let ps = self.check(payload, scope)?;
                self.unify(&pm, &ps)?;
                Ok(MS::Proc)
            }
            Term::Par(l, r) => {
                let ls = self.check(l, scope)?;
                self.unify(&ls, &MS::Proc)
                    .map_err(|_| Error::sort("dangling abstraction in parallel composition"))?;
                let rs = self.check(r, scope)?;
                self.unify(&rs, &MS::Proc)
                    .map_err(|_| Error::sort("dangling abstraction in parallel composition"))?;
                Ok(MS::Proc)
            }
            Term::ProcAbs { bound, body } => {
                let m = self.fresh();
                self.fixups.push(m.clone());
                scope.pstack.push((bound.ident.clone(), m.clone()));
                let b = self.check(body, scope)?;
                scope.pstack.pop();
                Ok(MS::PAbs(Box::new(m), Box::new(b)))
            }
            Term::ProcApp { fun, arg } => {
                if nested_var_application(fun) {
                    return Err(Error::sort("nested application of a variable"));
                }
                let fs = self.check(fun, scope)?;
                let as_ = self.check(arg, scope)?;
                let r = self.fresh();
                self.unify(&fs, &MS::PAbs(Box::new(as_), Box::new(r.clone())))?;
                Ok(r)
            }
            Term::NameAbs { bound, body } => {
                let payload = self.fresh();
                scope.nstack.push((bound.ident.clone(), payload.clone()));
                let b = self.check(body, scope)?;
                scope.nstack.pop();
                self.last_nabs_payload = Some(payload);
                Ok(MS::NAbs(Box::new(b)))
            }
            Term::NameApp { fun, arg } => {
                if nested_var_application(fun) {
                    return Err(Error::sort("nested application of a variable"));
                }
                self.last_nabs_payload = None;
                let fs = self.check(fun, scope)?;
                let binder_payload = self.last_nabs_payload.take();
                let r = self.fresh();
                self.unify(&fs, &MS::NAbs(Box::new(r.clone())))?;
                // Instantiating a name abstraction equates the argument's
                // channel payload with the binder's.
                if matches!(**fun, Term::NameAbs { .. }) {
                    if let Some(bp) = binder_payload {
                        let ap = self.payload_meta(arg, scope)?;
                        self.unify(&bp, &ap)?;
                    }
                } else if arg.kind == NameKind::Variable
                    && !scope.nstack.iter().any(|(id, _)| *id == arg.ident)
                    && !scope.env.is_free_name_var(&arg.ident)
                {
                    return Err(Error::sort(format!(
                        "name variable '{}' is neither bound nor declared free",
                        arg.ident
                    )));
                }
                Ok(r)
            }
        }
    }
}

/// Pre-order rewrite of every `ProcVar` node, matching the traversal order of
/// `Infer::check`.
fn write_fixups(t: &Term, resolved: &mut std::vec::IntoIter<Sort>) -> Term {
    match t {
        Term::Nil => Term::Nil,
        Term::Var(v) => {
            let sort = resolved.next().expect("fixup underflow");
            Term::Var(ProcVar::new(v.ident.clone(), sort))
        }
        Term::Input { chan, bound, body } => {
            let sort = resolved.next().expect("fixup underflow");
            Term::input(
                chan.clone(),
                ProcVar::new(bound.ident.clone(), sort),
                write_fixups(body, resolved),
            )
        }
        Term::Output { chan, payload } => {
            Term::output(chan.clone(), write_fixups(payload, resolved))
        }
        Term::Par(l, r) => Term::par(write_fixups(l, resolved), write_fixups(r, resolved)),
        Term::ProcAbs { bound, body } => {
            let sort = resolved.next().expect("fixup underflow");
            Term::proc_abs(
                ProcVar::new(bound.ident.clone(), sort),
                write_fixups(body, resolved),
            )
        }
        Term::ProcApp { fun, arg } => {
            Term::proc_app(write_fixups(fun, resolved), write_fixups(arg, resolved))
        }
        Term::NameAbs { bound, body } => {
            Term::name_abs(bound.clone(), write_fixups(body, resolved))
        }
        Term::NameApp { fun, arg } => Term::name_app(write_fixups(fun, resolved), arg.clone()),
    }
}

/// Check well-sortedness and return the annotated term, its sort, and the
/// channel payload table.
pub fn annotate(t: &Term, env: &SortEnv) -> Result<Checked> {
    let mut infer = Infer {
        next: 0,
        subst: BTreeMap::new(),
        fixups: Vec::new(),
        chan_payload: BTreeMap::new(),
        free_proc: BTreeMap::new(),
        last_nabs_payload: None,
    };
    let mut scope = Scope { env, pstack: Vec::new(), nstack: Vec::new() };
    let sort = infer.check(t, &mut scope)?;
    let sort = infer.to_sort(&sort);
    let resolved: Vec<Sort> = infer.fixups.iter().map(|m| infer.to_sort(m)).collect();
    let mut it = resolved.into_iter();
    let term = write_fixups(t, &mut it);
    debug_assert!(it.next().is_none(), "fixup overflow");
    let channels = infer
        .chan_payload
        .iter()
        .map(|(k, m)| (k.clone(), infer.to_sort(m)))
        .collect();
    Ok(Checked { term, sort, channels })
}

/// Sort of a term under the given context, or an error if ill-formed.
pub fn sort_check(t: &Term, env: &SortEnv) -> Result<Sort> {
    annotate(t, env).map(|c| c.sort)
}
