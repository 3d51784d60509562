//! Synthesis of slow-but-equivalent SQL, plus the kernels and tooling used
//! to train and evaluate query optimizers on it.

pub mod corpus;
pub mod degrade;
pub mod exec;
pub mod fixtures;
pub mod mcts;
pub mod mutate;
pub mod repair;
pub mod sql;
pub mod ted;
pub mod tree;

pub use sql::{parse, Dialect, ParseError, SqlTree};
pub use tree::LabeledTree;
