//! Property suites for the algebraic meta-theory: both engines agree, normal
//! forms are canonical, bisimilarity is a congruence, and transitions respect
//! substitution and structural decomposition.

use proptest::prelude::*;

use hopim::bisim::{hoio_bisimilar, prime_factors};
use hopim::corpus::{
    annotate_closed, bisimilar_pair, congruent_variant, constant_to_var, sprinkle, TermGen,
};
use hopim::normalizer::{nf_equal, to_tree, tree_to_term, TreeStore};
use hopim::parser::{parse, print};
use hopim::semantics::{canonicalize, instantiate_input, struct_congruent, transitions, Action};
use hopim::syntax::{depth, rename_proc_var, subst_name, subst_proc};
use hopim::{Name, ProcVar, Sort, SortEnv, Term};

fn gen_term(seed: u64, budget: usize) -> Term {
    TermGen::new(seed).gen_proc(budget)
}

fn equal_fast(p: &Term, q: &Term) -> bool {
    let mut store = TreeStore::new();
    nf_equal(&mut store, p, q).unwrap().equal
}

/// Open variant of `t`: nil leaves may become the free process variable V,
/// and channel c becomes the free name variable y.
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_roundtrip(seed in any::<u64>(), budget in 1usize..12) {
        let t = gen_term(seed, budget);
        let env = SortEnv::default();
        // rebuild through the tree to give binders surface-legal names
        let mut store = TreeStore::new();
        let root = to_tree(&mut store, &t);
        let surface = tree_to_term(&store, root, &env).unwrap();
        let reparsed = parse(&print(&surface), &env).unwrap();
        prop_assert!(struct_congruent(&t, &reparsed).unwrap());
    }

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>(), budget in 1usize..12) {
        let t = gen_term(seed, budget);
        let c1 = canonicalize(&t).unwrap();
        let c2 = canonicalize(&c1.term()).unwrap();
        prop_assert_eq!(c1.components.len(), c2.components.len());
        for (a, b) in c1.components.iter().zip(c2.components.iter()) {
            prop_assert!(struct_congruent(a, b).unwrap());
        }
    }

    #[test]
    fn engines_agree_on_law_pairs(seed in any::<u64>(), budget in 1usize..9) {
        let mut gen = TermGen::new(seed);
        let (l, r, _) = bisimilar_pair(&mut gen, budget);
        let l = annotate_closed(&l).unwrap();
        let r = annotate_closed(&r).unwrap();
        prop_assert!(equal_fast(&l, &r));
        prop_assert!(hoio_bisimilar(&l, &r).unwrap().equal);
    }

    #[test]
    fn depth_invariant_under_bisimilarity(seed in any::<u64>(), budget in 1usize..9) {
        let mut gen = TermGen::new(seed);
        let (l, r, _) = bisimilar_pair(&mut gen, budget);
        let l = annotate_closed(&l).unwrap();
        let r = annotate_closed(&r).unwrap();
        prop_assert_eq!(depth(&l).unwrap(), depth(&r).unwrap());
    }

    #[test]
    fn congruence_closure(seed in any::<u64>(), budget in 1usize..8) {
        let mut gen = TermGen::new(seed);
        let (p, q, _) = bisimilar_pair(&mut gen, budget);
        let p = annotate_closed(&p).unwrap();
        let q = annotate_closed(&q).unwrap();
        let r = gen.gen_proc(6);
        let a = Name::constant("a");
        let x = ProcVar::proc("W");
        let closures = [
            (Term::input(a.clone(), x.clone(), p.clone()), Term::input(a.clone(), x.clone(), q.clone())),
            (Term::output(a.clone(), p.clone()), Term::output(a.clone(), q.clone())),
            (Term::par(p.clone(), r.clone()), Term::par(q.clone(), r.clone())),
            (Term::proc_abs(x.clone(), p.clone()), Term::proc_abs(x.clone(), q.clone())),
            (Term::name_abs(Name::variable("w"), p.clone()), Term::name_abs(Name::variable("w"), q.clone())),
            (
                Term::proc_app(Term::proc_abs(x.clone(), Term::Var(x.clone())), p.clone()),
                Term::proc_app(Term::proc_abs(x.clone(), Term::Var(x.clone())), q.clone()),
            ),
        ];
        for (cp, cq) in closures {
            let cp = annotate_closed(&cp).unwrap();
            let cq = annotate_closed(&cq).unwrap();
            prop_assert!(equal_fast(&cp, &cq));
        }
    }

    #[test]
    fn substitution_preserves_bisimilarity(seed in any::<u64>(), budget in 1usize..8) {
        let (open, env) = open_term(seed, budget);
        let open = hopim::annotate(&open, &env).unwrap().term;
        let mut gen2 = TermGen::new(seed ^ 1);
        let variant = congruent_variant(gen2.rng(), &open);
        let variant = hopim::annotate(&variant, &env).unwrap().term;
        let arg = gen_term(seed ^ 2, 6);
        let v = ProcVar::proc("V");
        let l = subst_proc(&open, &arg, &v).unwrap();
        let r = subst_proc(&variant, &arg, &v).unwrap();
        let m = Name::constant("b");
        let l = subst_name(&l, &m, "y");
        let r = subst_name(&r, &m, "y");
        prop_assert!(equal_fast(&l, &r));
    }

    #[test]
    fn tau_preservation(seed in any::<u64>(), budget in 2usize..9) {
        let mut gen = TermGen::new(seed);
        let (p, q, _) = bisimilar_pair(&mut gen, budget);
        let p = annotate_closed(&p).unwrap();
        let q = annotate_closed(&q).unwrap();
        for (act, res_p) in transitions(&p).unwrap() {
            if act != Action::Tau {
                continue;
            }
            let mut matched = false;
            for (act_q, res_q) in transitions(&q).unwrap() {
                if act_q == Action::Tau && equal_fast(&res_p, &res_q) {
                    matched = true;
                    break;
                }
            }
            prop_assert!(matched, "unmatched tau residual");
        }
    }

    #[test]
    fn cancellation(seed in any::<u64>(), b1 in 1usize..7, b2 in 1usize..7) {
        let p = gen_term(seed, b1);
        let q = gen_term(seed ^ 0x9e37, b2);
        let r = gen_term(seed ^ 0x79b9, 5);
        let lhs = equal_fast(
            &annotate_closed(&Term::par(p.clone(), r.clone())).unwrap(),
            &annotate_closed(&Term::par(q.clone(), r.clone())).unwrap(),
        );
        prop_assert_eq!(lhs, equal_fast(&p, &q));
    }

    #[test]
    fn unique_prime_decomposition(seed in any::<u64>(), budget in 1usize..9) {
        let mut gen = TermGen::new(seed);
        let (p, q, _) = bisimilar_pair(&mut gen, budget);
        let p = annotate_closed(&p).unwrap();
        let q = annotate_closed(&q).unwrap();
        let env = SortEnv::default();
        let fp = prime_factors(&p, &env).unwrap();
        let fq = prime_factors(&q, &env).unwrap();
        prop_assert_eq!(fp.len(), fq.len());
        // factors come out of the normal form already ordered canonically
        for (a, b) in fp.iter().zip(fq.iter()) {
            prop_assert!(equal_fast(a, b));
        }
    }

    #[test]
    fn transitions_commute_with_substitution(seed in any::<u64>(), budget in 2usize..8) {
        let mut gen = TermGen::new(seed);
        let base = gen.gen_proc(budget);
        let hole = Term::Var(ProcVar::proc("V"));
        let open = sprinkle(gen.rng(), &base, &hole);
        let mut env = SortEnv::default();
        env.proc_vars.insert("V".into(), Sort::Proc);
        let open = hopim::annotate(&open, &env).unwrap().term;
        let arg = gen_term(seed ^ 5, 5);
        let v = ProcVar::proc("V");
        let closed = subst_proc(&open, &arg, &v).unwrap();
        let closed_tr = transitions(&closed).unwrap();
        for (act, res) in transitions(&open).unwrap() {
            let res_s = subst_proc(&res, &arg, &v).unwrap();
            let found = closed_tr.iter().any(|(act_c, res_c)| match (&act, act_c) {
                (Action::Tau, Action::Tau) => equal_fast(&res_s, res_c),
                (Action::In { chan: c1, bound: b1 }, Action::In { chan: c2, bound: b2 }) => {
                    c1 == c2 && b1 == b2 && equal_fast(&res_s, res_c)
                }
                (Action::Out { chan: c1, payload: p1 }, Action::Out { chan: c2, payload: p2 }) => {
                    c1 == c2
                        && equal_fast(&subst_proc(p1, &arg, &v).unwrap(), p2)
                        && equal_fast(&res_s, res_c)
                }
                _ => false,
            });
            prop_assert!(found, "transition lost under substitution: {act}");
        }
    }

    #[test]
    fn output_and_input_decomposition(seed in any::<u64>(), budget in 2usize..10) {
        let p = gen_term(seed, budget);
        let comps = canonicalize(&p).unwrap().components;
        for (act, res) in transitions(&p).unwrap() {
            match act {
                Action::Out { chan, payload } => {
                    let rebuilt = Term::par(Term::output(chan, payload), res);
                    prop_assert!(struct_congruent(&p, &rebuilt).unwrap());
                }
                Action::In { chan, bound } => {
                    let mut matched = false;
                    for (i, c) in comps.iter().enumerate() {
                        if let Term::Input { chan: c2, bound: b2, body } = c {
                            if *c2 != chan {
                                continue;
                            }
                            let body = rename_proc_var(body, &b2.ident, &bound.ident);
                            let mut rest: Vec<Term> = comps.clone();
                            rest.remove(i);
                            rest.insert(0, body);
                            if struct_congruent(&res, &Term::par_all(rest)).unwrap() {
                                matched = true;
                                break;
                            }
                        }
                    }
                    prop_assert!(matched, "input residual has no prefix decomposition");
                }
                Action::Tau => {}
            }
        }
    }

    #[test]
    fn input_instantiation_matches_communication(seed in any::<u64>(), budget in 2usize..8) {
        // every tau is an output payload fed into a matching input residual
        let p = gen_term(seed, budget);
        let trs = transitions(&p).unwrap();
        for (act, res) in &trs {
            if *act != Action::Tau {
                continue;
            }
            let mut matched = false;
            'outer: for (ao, _) in &trs {
                let Action::Out { chan: oc, payload } = ao else { continue };
                for (ai, ri) in &trs {
                    let Action::In { chan: ic, bound } = ai else { continue };
                    if oc != ic {
                        continue;
                    }
                    // communication removes both prefixes; compare against the
                    // input residual with the output component erased
                    let inst = instantiate_input(ri, bound, payload).unwrap();
                    let out_comp = Term::output(oc.clone(), payload.clone());
                    let with_out = Term::par(res.clone(), out_comp);
                    if equal_fast(&inst, &with_out) || equal_fast(&inst, res) {
                        matched = true;
                        break 'outer;
                    }
                }
            }
            prop_assert!(matched, "tau not explained by an output/input pair");
        }
    }
}
