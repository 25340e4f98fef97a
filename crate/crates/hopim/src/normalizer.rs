//! The fast engine: terms become interned binder-indexed trees, then three
//! normalization passes rewrite them to a canonical form. Two terms are
//! bisimilar exactly when their normal-form roots are the same node.
//!
//! Passes:
//! - `ns1` performs every application of an abstraction (beta steps), leaving
//!   variable-headed applications alone.
//! - `ns2` erases nil under parallel, flattens nested parallel, collapses
//!   singletons, and sorts children by a fixed total order.
//! - `ns3` rewrites the distribution pattern a(X).(P | k-1 copies of a(X).P)
//!   into k copies of a(X).P, including the degenerate P = 0 instances.
//!
//! `ns2; ns3` is iterated to a fixpoint: an `ns3` rewrite can break parallel
//! flatness above it and enable further matches higher up.

use rustc_hash::FxHashMap as HashMap;
use smallvec::{smallvec, SmallVec};

/// Child list; at most two children except for flattened parallel nodes, so
/// small lists live inline in the node.
pub type Children = SmallVec<[NodeId; 2]>;

use crate::error::{Error, Result};
use crate::sorts::{annotate, SortEnv};
use crate::syntax::{Name, NameKind, ProcVar, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Node kinds. Process abstraction and name abstraction are distinct kinds:
/// conflating them would equate <X>0 with <x>0, which are not bisimilar.
/// `NameLeaf` only occurs as the second child of an `App`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Zero,
    Var,
    Inp,
    Out,
    Par,
    AbsProc,
    AbsName,
    App,
    NameLeaf,
}

/// Labels: binder indices count every enclosing binder (input, process
/// abstraction, name abstraction share one namespace), index 1 innermost.
/// Free occurrences keep their source identifiers. Variant order puts indices
/// before names, which is the order `ns2` sorts by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    None,
    Index(u32),
    Name(NameKind, String),
    ProcVar(String),
}

impl Label {
    fn display(&self) -> String {
        match self {
            Label::None => "-".to_string(),
            Label::Index(i) => i.to_string(),
            Label::Name(_, id) | Label::ProcVar(id) => id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeData {
    pub kind: NodeKind,
    pub label: Label,
    pub children: Children,
}

/// Memo table over dense node ids; `u32::MAX` marks an absent entry.
#[derive(Debug, Default)]
struct IdMemo(Vec<NodeId>);

const NO_ID: NodeId = NodeId(u32::MAX);

impl IdMemo {
    fn get(&self, n: NodeId) -> Option<NodeId> {
        match self.0.get(n.0 as usize) {
            Some(&r) if r != NO_ID => Some(r),
            _ => None,
        }
    }

    fn insert(&mut self, n: NodeId, r: NodeId) {
        let i = n.0 as usize;
        if i >= self.0.len() {
            self.0.resize(i + 1, NO_ID);
        }
        self.0[i] = r;
    }
}

/// Interning store. Structurally equal subtrees are the same `NodeId`, so
/// equality checks are id comparisons and sharing is maximal.
#[derive(Debug, Default)]
pub struct TreeStore {
    nodes: Vec<NodeData>,
    // maps a node's content hash to its id; contents live in `nodes` only
    index: hashbrown::HashTable<NodeId>,
    hasher: hashbrown::DefaultHashBuilder,
    // pass memos persist across calls: ids are canonical and never reassigned
    ns1_memo: IdMemo,
    ns2_memo: IdMemo,
    ns3_memo: IdMemo,
}

impl TreeStore {
    pub fn new() -> Self {
        TreeStore::default()
    }

    pub fn intern(&mut self, data: NodeData) -> NodeId {
        use std::hash::BuildHasher;
        let hash = self.hasher.hash_one(&data);
        let nodes = &self.nodes;
        if let Some(&id) = self.index.find(hash, |&id| nodes[id.0 as usize] == data) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(data);
        let nodes = &self.nodes;
        let hasher = &self.hasher;
        self.index.insert_unique(hash, id, |&id| {
            hasher.hash_one(&nodes[id.0 as usize])
        });
        id
    }

    fn mk(&mut self, kind: NodeKind, label: Label, children: Children) -> NodeId {
        self.intern(NodeData { kind, label, children })
    }

    pub fn get(&self, id: NodeId) -> &NodeData {
        &self.nodes[id.0 as usize]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.get(id).kind
    }

    /// Total number of distinct interned nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of distinct nodes reachable from `root`.
    pub fn reachable_count(&self, root: NodeId) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        let mut count = 0;
        while let Some(n) = stack.pop() {
            if seen[n.0 as usize] {
                continue;
            }
            seen[n.0 as usize] = true;
            count += 1;
            stack.extend(self.get(n).children.iter().copied());
        }
        count
    }
}

enum Binder {
    Proc(String),
    Name(String),
}

fn name_label(n: &Name, stack: &[Binder]) -> Label {
    if n.kind == NameKind::Variable {
        for (dist, b) in stack.iter().rev().enumerate() {
            if let Binder::Name(id) = b {
                if *id == n.ident {
                    return Label::Index(dist as u32 + 1);
                }
            }
        }
    }
    Label::Name(n.kind, n.ident.clone())
}

fn to_tree_walk(store: &mut TreeStore, t: &Term, stack: &mut Vec<Binder>) -> NodeId {
    match t {
        Term::Nil => store.mk(NodeKind::Zero, Label::None, smallvec![]),
        Term::Var(v) => {
            for (dist, b) in stack.iter().rev().enumerate() {
                if let Binder::Proc(id) = b {
                    if *id == v.ident {
                        let l = Label::Index(dist as u32 + 1);
                        return store.mk(NodeKind::Var, l, smallvec![]);
                    }
                }
            }
            store.mk(NodeKind::Var, Label::ProcVar(v.ident.clone()), smallvec![])
        }
        Term::Input { chan, bound, body } => {
            let l = name_label(chan, stack);
            stack.push(Binder::Proc(bound.ident.clone()));
            let b = to_tree_walk(store, body, stack);
            stack.pop();
            store.mk(NodeKind::Inp, l, smallvec![b])
        }
        Term::Output { chan, payload } => {
            let l = name_label(chan, stack);
            let p = to_tree_walk(store, payload, stack);
            store.mk(NodeKind::Out, l, smallvec![p])
        }
        Term::Par(l, r) => {
            let a = to_tree_walk(store, l, stack);
            let b = to_tree_walk(store, r, stack);
            store.mk(NodeKind::Par, Label::None, smallvec![a, b])
        }
        Term::ProcAbs { bound, body } => {
            stack.push(Binder::Proc(bound.ident.clone()));
            let b = to_tree_walk(store, body, stack);
            stack.pop();
            store.mk(NodeKind::AbsProc, Label::None, smallvec![b])
        }
        Term::ProcApp { fun, arg } => {
            let f = to_tree_walk(store, fun, stack);
            let a = to_tree_walk(store, arg, stack);
            store.mk(NodeKind::App, Label::None, smallvec![f, a])
        }
        Term::NameAbs { bound, body } => {
            stack.push(Binder::Name(bound.ident.clone()));
            let b = to_tree_walk(store, body, stack);
            stack.pop();
            store.mk(NodeKind::AbsName, Label::None, smallvec![b])
        }
        Term::NameApp { fun, arg } => {
            let f = to_tree_walk(store, fun, stack);
            let l = name_label(arg, stack);
            let leaf = store.mk(NodeKind::NameLeaf, l, smallvec![]);
            store.mk(NodeKind::App, Label::None, smallvec![f, leaf])
        }
    }
}

/// Binder-indexed tree of a term. Free variables keep their identifiers.
pub fn to_tree(store: &mut TreeStore, t: &Term) -> NodeId {
    to_tree_walk(store, t, &mut Vec::new())
}

/// Add `amount` to every index >= `cutoff` (indices free relative to the
/// subtree rooted where `cutoff` started at 1).
fn shift(store: &mut TreeStore, n: NodeId, amount: u32, cutoff: u32) -> NodeId {
    fn go(
        store: &mut TreeStore,
        n: NodeId,
        amount: u32,
        cutoff: u32,
        memo: &mut HashMap<(NodeId, u32), NodeId>,
    ) -> NodeId {
        if let Some(r) = memo.get(&(n, cutoff)) {
            return *r;
        }
        let data = store.get(n).clone();
        let bump = |l: &Label| match l {
            Label::Index(i) if *i >= cutoff => Label::Index(i + amount),
            other => other.clone(),
        };
        let r = match data.kind {
            NodeKind::Zero => n,
            NodeKind::Var | NodeKind::NameLeaf => {
                store.mk(data.kind, bump(&data.label), smallvec![])
            }
            NodeKind::Inp | NodeKind::AbsProc | NodeKind::AbsName => {
                let c = go(store, data.children[0], amount, cutoff + 1, memo);
                let l = bump(&data.label);
                store.mk(data.kind, l, smallvec![c])
            }
            NodeKind::Out => {
                let c = go(store, data.children[0], amount, cutoff, memo);
                let l = bump(&data.label);
                store.mk(data.kind, l, smallvec![c])
            }
            NodeKind::Par | NodeKind::App => {
                let cs = data
                    .children
                    .iter()
                    .map(|c| go(store, *c, amount, cutoff, memo))
                    .collect();
                store.mk(data.kind, data.label.clone(), cs)
            }
        };
        memo.insert((n, cutoff), r);
        r
    }
    if amount == 0 {
        return n;
    }
    go(store, n, amount, cutoff, &mut HashMap::default())
}

/// Substitute `n_eval` for binder index `ind` throughout `n_raw`. `n_eval` is
/// a process tree or a name leaf; a name leaf lands in channel labels and
/// name-argument leaves, a process tree lands in variable positions. Indices
/// free in `n_eval` are lifted by the binders crossed, and indices above the
/// consumed binder are decremented.
pub fn app_substitute(
    store: &mut TreeStore,
    n_raw: NodeId,
    ind: u32,
    n_eval: NodeId,
) -> Result<NodeId> {
    let eval_is_name = store.kind(n_eval) == NodeKind::NameLeaf;
    fn go(
        store: &mut TreeStore,
        n: NodeId,
        j: u32,
        n_eval: NodeId,
        eval_is_name: bool,
        memo: &mut HashMap<(NodeId, u32), NodeId>,
    ) -> Result<NodeId> {
        if let Some(r) = memo.get(&(n, j)) {
            return Ok(*r);
        }
        let data = store.get(n).clone();
        // Channel labels and name leaves live in the name namespace; a name
        // leaf has no binders, so lifting is a plain index offset.
        let name_pos_label = |store: &TreeStore, l: &Label| -> Result<Label> {
            match l {
                Label::Index(i) if *i == j => {
                    if !eval_is_name {
                        return Err(Error::kind(
                            "process substituted into a name position",
                        ));
                    }
                    Ok(match &store.get(n_eval).label {
                        Label::Index(k) => Label::Index(k + (j - 1)),
                        other => other.clone(),
                    })
                }
                Label::Index(i) if *i > j => Ok(Label::Index(i - 1)),
                other => Ok(other.clone()),
            }
        };
        let r = match data.kind {
            NodeKind::Zero => n,
            NodeKind::Var => match data.label {
                Label::Index(i) if i == j => {
                    if eval_is_name {
                        return Err(Error::kind("name substituted into a process position"));
                    }
                    shift(store, n_eval, j - 1, 1)
                }
                Label::Index(i) if i > j => store.mk(NodeKind::Var, Label::Index(i - 1), smallvec![]),
                _ => n,
            },
            NodeKind::NameLeaf => {
                let l = name_pos_label(store, &data.label)?;
                store.mk(NodeKind::NameLeaf, l, smallvec![])
            }
            NodeKind::Inp => {
                let l = name_pos_label(store, &data.label)?;
                let c = go(store, data.children[0], j + 1, n_eval, eval_is_name, memo)?;
                store.mk(NodeKind::Inp, l, smallvec![c])
            }
            NodeKind::Out => {
                let l = name_pos_label(store, &data.label)?;
                let c = go(store, data.children[0], j, n_eval, eval_is_name, memo)?;
                store.mk(NodeKind::Out, l, smallvec![c])
            }
            NodeKind::AbsProc | NodeKind::AbsName => {
                let c = go(store, data.children[0], j + 1, n_eval, eval_is_name, memo)?;
                store.mk(data.kind, Label::None, smallvec![c])
            }
            NodeKind::Par | NodeKind::App => {
                let mut cs = Children::with_capacity(data.children.len());
                for c in &data.children {
                    cs.push(go(store, *c, j, n_eval, eval_is_name, memo)?);
                }
                store.mk(data.kind, data.label.clone(), cs)
            }
        };
        memo.insert((n, j), r);
        Ok(r)
    }
    go(store, n_raw, ind, n_eval, eval_is_name, &mut HashMap::default())
}

/// Beta pass: every application whose functor is an abstraction is performed;
/// variable-headed applications remain. Substitution can uncover new redexes,
/// so results are re-traversed; finite sorts bound the rewrite chains.
pub fn ns1(store: &mut TreeStore, root: NodeId) -> Result<NodeId> {
    fn go(
        store: &mut TreeStore,
        n: NodeId,
        memo: &mut IdMemo,
    ) -> Result<NodeId> {
        if let Some(r) = memo.get(n) {
            return Ok(r);
        }
        let data = store.get(n).clone();
        let mut cs = Children::with_capacity(data.children.len());
        for c in &data.children {
            cs.push(go(store, *c, memo)?);
        }
        let r = if data.kind == NodeKind::App {
            let fun = cs[0];
            let arg = cs[1];
            match store.kind(fun) {
                NodeKind::AbsProc => {
                    if store.kind(arg) == NodeKind::NameLeaf {
                        return Err(Error::kind(
                            "name argument applied to a process abstraction",
                        ));
                    }
                    let body = store.get(fun).children[0];
                    let reduced = app_substitute(store, body, 1, arg)?;
                    go(store, reduced, memo)?
                }
                NodeKind::AbsName => {
                    if store.kind(arg) != NodeKind::NameLeaf {
                        return Err(Error::kind(
                            "process argument applied to a name abstraction",
                        ));
                    }
                    let body = store.get(fun).children[0];
                    let reduced = app_substitute(store, body, 1, arg)?;
                    go(store, reduced, memo)?
                }
                _ => store.mk(NodeKind::App, data.label.clone(), cs),
            }
        } else {
            store.mk(data.kind, data.label.clone(), cs)
        };
        memo.insert(n, r);
        // the result is beta-irreducible, so it is its own fixpoint
        memo.insert(r, r);
        Ok(r)
    }
    let mut memo = std::mem::take(&mut store.ns1_memo);
    let out = go(store, root, &mut memo);
    store.ns1_memo = memo;
    out
}

fn kind_rank(k: NodeKind) -> u8 {
    match k {
        NodeKind::Zero => 0,
        NodeKind::Var => 1,
        NodeKind::Inp => 2,
        NodeKind::Out => 3,
        NodeKind::Par => 4,
        NodeKind::AbsProc => 5,
        NodeKind::AbsName => 6,
        NodeKind::App => 7,
        NodeKind::NameLeaf => 8,
    }
}

/// Total order on nodes: kind rank, then label (indices before names), then
/// child count, then children lexicographically. Interning makes the equality
/// fast path an id comparison.
pub fn cmp_nodes(store: &TreeStore, a: NodeId, b: NodeId) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    if a == b {
        return Ordering::Equal;
    }
    let da = store.get(a);
    let db = store.get(b);
    kind_rank(da.kind)
        .cmp(&kind_rank(db.kind))
        .then_with(|| da.label.cmp(&db.label))
        .then_with(|| da.children.len().cmp(&db.children.len()))
        .then_with(|| {
            for (x, y) in da.children.iter().zip(db.children.iter()) {
                let o = cmp_nodes(store, *x, *y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

/// Parallel normalization: drop nils, flatten nested parallel, collapse
/// singletons, sort children. After this pass every parallel node has at
/// least two sorted children, none of them nil or parallel.
pub fn ns2(store: &mut TreeStore, root: NodeId) -> NodeId {
    fn go(store: &mut TreeStore, n: NodeId, memo: &mut IdMemo) -> NodeId {
        if let Some(r) = memo.get(n) {
            return r;
        }
        let data = store.get(n).clone();
        let cs: Children = data.children.iter().map(|c| go(store, *c, memo)).collect();
        let r = if data.kind == NodeKind::Par {
            let mut flat = Children::with_capacity(cs.len());
            for c in cs {
                match store.kind(c) {
                    NodeKind::Zero => {}
                    NodeKind::Par => flat.extend(store.get(c).children.iter().copied()),
                    _ => flat.push(c),
                }
            }
            match flat.len() {
                0 => store.mk(NodeKind::Zero, Label::None, smallvec![]),
                1 => flat[0],
                _ => {
                    let in_order = flat
                        .windows(2)
                        .all(|w| cmp_nodes(store, w[0], w[1]) != std::cmp::Ordering::Greater);
                    if !in_order {
                        flat.sort_by(|a, b| cmp_nodes(store, *a, *b));
                    }
                    store.mk(NodeKind::Par, Label::None, flat)
                }
            }
        } else {
            store.mk(data.kind, data.label.clone(), cs)
        };
        memo.insert(n, r);
        // the result is flat and sorted, so it is its own fixpoint
        memo.insert(r, r);
        r
    }
    let mut memo = std::mem::take(&mut store.ns2_memo);
    let out = go(store, root, &mut memo);
    store.ns2_memo = memo;
    out
}

/// Match the distribution pattern at an input node `inp(la)[body]` and return
/// the rewritten parallel composition if it fires.
///
/// Pattern: body splits into a payload P (possibly empty) plus c identical
/// copies of g, where g is an input on the same channel whose continuation is
/// P lifted under one extra binder. The whole node then equals c+1 copies of
/// inp(la)[P]. P may use the binder (index 1): each copy's prefix re-binds it,
/// so the lift keeps index 1 fixed. A bound channel appears as la at the node
/// but lifted by one inside the body.
fn try_dis(store: &mut TreeStore, la: &Label, body: NodeId) -> Option<NodeId> {
    let la_in = match la {
        Label::Index(i) => Label::Index(i + 1),
        other => other.clone(),
    };
    let cs: Children = match store.kind(body) {
        NodeKind::Par => store.get(body).children.clone(),
        _ => smallvec![body],
    };
    let mut tried: Vec<NodeId> = Vec::new();
    for i in 0..cs.len() {
        let g = cs[i];
        let gd = store.get(g);
        if gd.kind != NodeKind::Inp || gd.label != la_in || tried.contains(&g) {
            continue;
        }
        tried.push(g);
        let g_body = gd.children[0];
        let mult = cs.iter().filter(|c| **c == g).count();
        for used in (1..=mult).rev() {
            let mut remaining: Children = Children::with_capacity(cs.len() - used);
            let mut dropped = 0;
            for c in &cs {
                if *c == g && dropped < used {
                    dropped += 1;
                } else {
                    remaining.push(*c);
                }
            }
            let payload = match remaining.len() {
                0 => store.mk(NodeKind::Zero, Label::None, smallvec![]),
                1 => remaining[0],
                _ => store.mk(NodeKind::Par, Label::None, remaining),
            };
            // the binder (index 1) is re-bound by each copy's own prefix, so
            // it stays fixed and only outer indices lift
            let lifted = shift(store, payload, 1, 2);
            if g_body == lifted {
                let h = store.mk(NodeKind::Inp, la.clone(), smallvec![payload]);
                let copies: Children = std::iter::repeat(h).take(used + 1).collect();
                return Some(store.mk(NodeKind::Par, Label::None, copies));
            }
        }
    }
    None
}

/// Distribution pass, bottom-up. A rewrite can break parallel flatness above
/// it; the caller iterates `ns2; ns3` to a fixpoint.
pub fn ns3(store: &mut TreeStore, root: NodeId) -> NodeId {
    fn go(store: &mut TreeStore, n: NodeId, memo: &mut IdMemo) -> NodeId {
        if let Some(r) = memo.get(n) {
            return r;
        }
        let data = store.get(n).clone();
        let cs: Children = data.children.iter().map(|c| go(store, *c, memo)).collect();
        let rebuilt = store.mk(data.kind, data.label.clone(), cs);
        let r = if data.kind == NodeKind::Inp {
            let d = store.get(rebuilt).clone();
            try_dis(store, &d.label, d.children[0]).unwrap_or(rebuilt)
        } else {
            rebuilt
        };
        memo.insert(n, r);
        r
    }
    let mut memo = std::mem::take(&mut store.ns3_memo);
    let out = go(store, root, &mut memo);
    store.ns3_memo = memo;
    out
}

/// Full normal form: beta, then parallel and distribution passes to fixpoint.
/// Requires a well-sorted (annotated) term so the beta pass terminates.
pub fn nf(store: &mut TreeStore, t: &Term) -> Result<NodeId> {
    let root = to_tree(store, t);
    nf_of_tree(store, root)
}

/// Normal form of an already-built tree.
pub fn nf_of_tree(store: &mut TreeStore, root: NodeId) -> Result<NodeId> {
    let mut r = ns1(store, root)?;
    loop {
        let next = ns2(store, r);
        let next = ns3(store, next);
        if next == r {
            return Ok(r);
        }
        r = next;
    }
}

/// Outcome of a normal-form comparison, carrying both normal forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NfVerdict {
    pub equal: bool,
    pub nf_left: NodeId,
    pub nf_right: NodeId,
}

/// Decide bisimilarity by normal-form identity.
pub fn nf_equal(store: &mut TreeStore, p: &Term, q: &Term) -> Result<NfVerdict> {
    let l = nf(store, p)?;
    let r = nf(store, q)?;
    Ok(NfVerdict { equal: l == r, nf_left: l, nf_right: r })
}

/// Structural congruence: beta plus the parallel monoid laws, decided by
/// equality after `ns1; ns2` (no distribution rewriting).
pub fn congruent_tree(store: &mut TreeStore, t: &Term) -> Result<NodeId> {
    let root = to_tree(store, t);
    let r = ns1(store, root)?;
    Ok(ns2(store, r))
}

fn gen_ident(used: &mut std::collections::BTreeSet<String>, upper: bool) -> String {
    let stem = if upper { "V" } else { "v" };
    let mut k = used.len();
    loop {
        let cand = format!("{stem}{k}");
        if used.insert(cand.clone()) {
            return cand;
        }
        k += 1;
    }
}

fn collect_free_idents(store: &TreeStore, n: NodeId, used: &mut std::collections::BTreeSet<String>) {
    let d = store.get(n);
    match &d.label {
        Label::Name(_, id) | Label::ProcVar(id) => {
            used.insert(id.clone());
        }
        _ => {}
    }
    for c in &d.children {
        collect_free_idents(store, *c, used);
    }
}

/// Rebuild a term from a tree, inventing binder names and re-deriving variable
/// sorts by annotation under `env`.
pub fn tree_to_term(store: &TreeStore, root: NodeId, env: &SortEnv) -> Result<Term> {
    let mut used = std::collections::BTreeSet::new();
    collect_free_idents(store, root, &mut used);
    enum B {
        P(String),
        N(String),
    }
    fn go(
        store: &TreeStore,
        n: NodeId,
        stack: &mut Vec<B>,
        used: &mut std::collections::BTreeSet<String>,
    ) -> Result<Term> {
        let resolve_name = |l: &Label, stack: &[B]| -> Result<Name> {
            match l {
                Label::Index(i) => {
                    let pos = stack
                        .len()
                        .checked_sub(*i as usize)
                        .ok_or_else(|| Error::kind("dangling binder index"))?;
                    match &stack[pos] {
                        B::N(id) => Ok(Name::variable(id.clone())),
                        B::P(_) => Err(Error::kind("name index resolves to a process binder")),
                    }
                }
                Label::Name(k, id) => Ok(Name { kind: *k, ident: id.clone() }),
                _ => Err(Error::kind("missing channel label")),
            }
        };
        let d = store.get(n).clone();
        match d.kind {
            NodeKind::Zero => Ok(Term::Nil),
            NodeKind::Var => match &d.label {
                Label::Index(i) => {
                    let pos = stack
                        .len()
                        .checked_sub(*i as usize)
                        .ok_or_else(|| Error::kind("dangling binder index"))?;
                    match &stack[pos] {
                        B::P(id) => Ok(Term::Var(ProcVar::proc(id.clone()))),
                        B::N(_) => Err(Error::kind("process index resolves to a name binder")),
                    }
                }
                Label::ProcVar(id) => Ok(Term::Var(ProcVar::proc(id.clone()))),
                _ => Err(Error::kind("bad variable label")),
            },
            NodeKind::Inp => {
                let chan = resolve_name(&d.label, stack)?;
                let id = gen_ident(used, true);
                stack.push(B::P(id.clone()));
                let body = go(store, d.children[0], stack, used)?;
                stack.pop();
                Ok(Term::input(chan, ProcVar::proc(id), body))
            }
            NodeKind::Out => {
                let chan = resolve_name(&d.label, stack)?;
                let payload = go(store, d.children[0], stack, used)?;
                Ok(Term::output(chan, payload))
            }
            NodeKind::Par => {
                let mut parts = Vec::with_capacity(d.children.len());
                for c in &d.children {
                    parts.push(go(store, *c, stack, used)?);
                }
                Ok(Term::par_all(parts))
            }
            NodeKind::AbsProc => {
                let id = gen_ident(used, true);
                stack.push(B::P(id.clone()));
                let body = go(store, d.children[0], stack, used)?;
                stack.pop();
                Ok(Term::proc_abs(ProcVar::proc(id), body))
            }
            NodeKind::AbsName => {
                let id = gen_ident(used, false);
                stack.push(B::N(id.clone()));
                let body = go(store, d.children[0], stack, used)?;
                stack.pop();
                Ok(Term::name_abs(Name::variable(id), body))
            }
            NodeKind::App => {
                let fun = go(store, d.children[0], stack, used)?;
                let arg = d.children[1];
                if store.kind(arg) == NodeKind::NameLeaf {
                    let name = resolve_name(&store.get(arg).label, stack)?;
                    Ok(Term::name_app(fun, name))
                } else {
                    let arg = go(store, arg, stack, used)?;
                    Ok(Term::proc_app(fun, arg))
                }
            }
            NodeKind::NameLeaf => Err(Error::kind("name leaf outside application")),
        }
    }
    let raw = go(store, root, &mut Vec::new(), &mut used)?;
    Ok(annotate(&raw, env)?.term)
}

/// One reachable node per line: id, kind, label, child ids.
pub fn dump(store: &TreeStore, root: NodeId) -> String {
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            stack.extend(store.get(n).children.iter().copied());
        }
    }
    let kind_str = |k: NodeKind| match k {
        NodeKind::Zero => "zero",
        NodeKind::Var => "var",
        NodeKind::Inp => "inp",
        NodeKind::Out => "out",
        NodeKind::Par => "par",
        NodeKind::AbsProc => "abs-proc",
        NodeKind::AbsName => "abs-name",
        NodeKind::App => "app",
        NodeKind::NameLeaf => "name",
    };
    let mut out = String::new();
    for n in seen {
        let d = store.get(n);
        let children = if d.children.is_empty() {
            "-".to_string()
        } else {
            d.children.iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&format!(
            "{}, {}, {}, {}\n",
            n.0,
            kind_str(d.kind),
            d.label.display(),
            children
        ));
    }
    out
}
