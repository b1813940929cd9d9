//! Symbolic regression by genetic programming with guided ("gene editing")
//! mutation and crossover.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] — vocabulary, preorder trees, parsing, simplification, edit distance
//! * [`data`] — benchmark registry, sampling, noise, data summaries
//! * [`eval`] — protected evaluation, R², recovery checks
//! * [`constopt`] — BFGS over expression constants
//! * [`relax`] — softmax-relaxed mutation used to harvest training pairs
//! * [`guidance`] — mutation/crossover guides and pair collection
//! * [`engine`] — the evolutionary loop and the efficiency simulator
//! * [`dynsys`] — chaotic ODE registry and vector-field benchmark

pub mod constopt;
pub mod data;
pub mod dynsys;
pub mod engine;
pub mod eval;
pub mod expr;
pub mod guidance;
pub mod relax;
pub mod rng;

pub use expr::{ExprTree, Token, TokenSeq};
