//! Batch checking of term pairs. The parallel lane (feature `parallel`,
//! enabled by default) fans pairs out with rayon; every worker owns its own
//! tree store and oracle session, so no locking is needed.

use crate::bisim::Session;
use crate::error::Result;
use crate::normalizer::{nf_equal, TreeStore};
use crate::syntax::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Tree normalization only.
    Fast,
    /// Inductive decision procedure only.
    Oracle,
    /// Both engines; disagreement is reported per pair.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairVerdict {
    Equal,
    NotEqual,
    /// Engines disagree: (fast verdict, oracle verdict).
    Disagree(bool, bool),
    Error(String),
}

fn check_one(store: &mut TreeStore, session: &mut Session, p: &Term, q: &Term, engine: Engine) -> PairVerdict {
    let mut run = || -> Result<PairVerdict> {
        Ok(match engine {
            Engine::Fast => {
                if nf_equal(store, p, q)?.equal {
                    PairVerdict::Equal
                } else {
                    PairVerdict::NotEqual
                }
            }
            Engine::Oracle => {
                if session.check(p, q)? {
                    PairVerdict::Equal
                } else {
                    PairVerdict::NotEqual
                }
            }
            Engine::Both => {
                let fast = nf_equal(store, p, q)?.equal;
                let oracle = session.check(p, q)?;
                if fast == oracle {
                    if fast {
                        PairVerdict::Equal
                    } else {
                        PairVerdict::NotEqual
                    }
                } else {
                    PairVerdict::Disagree(fast, oracle)
                }
            }
        })
    };
    run().unwrap_or_else(|e| PairVerdict::Error(e.to_string()))
}

/// Check all pairs sequentially, sharing one store and one session so common
/// subterms are interned and memoized once.
pub fn run_serial(pairs: &[(Term, Term)], engine: Engine) -> Vec<PairVerdict> {
    let mut store = TreeStore::new();
    let mut session = Session::new();
    pairs
        .iter()
        .map(|(p, q)| check_one(&mut store, &mut session, p, q, engine))
        .collect()
}

/// Check all pairs in parallel. Each rayon worker builds its own store and
/// session, so sharing happens within a worker's slice only.
#[cfg(feature = "parallel")]
pub fn run_parallel(pairs: &[(Term, Term)], engine: Engine) -> Vec<PairVerdict> {
    use rayon::prelude::*;
    pairs
        .par_iter()
        .map_init(
            || (TreeStore::new(), Session::new()),
            |(store, session), (p, q)| check_one(store, session, p, q, engine),
        )
        .collect()
}

/// Sequential fallback with the same signature when rayon is compiled out.
#[cfg(not(feature = "parallel"))]
pub fn run_parallel(pairs: &[(Term, Term)], engine: Engine) -> Vec<PairVerdict> {
    run_serial(pairs, engine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bisimilar_pair, TermGen};
    use crate::parser::parse;
    use crate::sorts::SortEnv;

    fn pairs() -> Vec<(Term, Term)> {
        let env = SortEnv::default();
        let mut out = vec![
            (parse("a!(0) | b!(0)", &env).unwrap(), parse("b!(0) | a!(0)", &env).unwrap()),
            (parse("a!(0)", &env).unwrap(), parse("b!(0)", &env).unwrap()),
        ];
        let mut gen = TermGen::new(17);
        for _ in 0..20 {
            let (l, r, _) = bisimilar_pair(&mut gen, 8);
            out.push((
                crate::corpus::annotate_closed(&l).unwrap(),
                crate::corpus::annotate_closed(&r).unwrap(),
            ));
        }
        out
    }

    #[test]
    fn serial_and_parallel_agree() {
        let ps = pairs();
        for engine in [Engine::Fast, Engine::Oracle, Engine::Both] {
            let s = run_serial(&ps, engine);
            let p = run_parallel(&ps, engine);
            assert_eq!(s, p);
            assert_eq!(s[0], PairVerdict::Equal);
            assert_eq!(s[1], PairVerdict::NotEqual);
            for v in &s[2..] {
                assert_eq!(*v, PairVerdict::Equal);
            }
        }
    }
}
