//! Evaluation, analysis and equivalence checking for deterministic tree transducers.
//!
//! The crate covers top-down, bottom-up and macro tree transducers, regular look-ahead,
//! the earliest canonical form of total top-down transducers, a difference-automaton
//! equivalence test for top-down transducers, a bounded HDT0L reduction for monadic
//! macro tree transducers, and a Parikh-image test for finite-copying tree-to-string
//! transducers.

pub mod automata;
pub mod domain;
pub mod dtop_equiv;
pub mod earliest;
pub mod error;
pub mod format;
pub mod lookahead;
pub mod monadic;
pub mod mtt;
pub mod par;
pub mod parikh;
pub mod semilinear;
pub mod trees;

pub use error::{Error, Result};
pub use trees::{parse_term, parse_tree, Path, RankedAlphabet, Sym, Tree};
