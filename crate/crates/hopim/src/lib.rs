//! Strong bisimilarity checking for higher-order processes with name and
//! process parameterization. Two engines are provided: a brute-force inductive
//! decision procedure over the labelled transition system, and a fast
//! normalizer over interned binder-indexed trees. Both decide the same
//! relation; the harness in `batch` runs them differentially.

pub mod batch;
pub mod bisim;
pub mod corpus;
pub mod error;
pub mod normalizer;
pub mod parser;
pub mod semantics;
pub mod sorts;
pub mod syntax;

pub use error::{Error, Result};
pub use sorts::{annotate, sort_check, SortEnv};
pub use syntax::{Name, NameKind, ProcVar, Sort, Term};
