//! Learning to solve goal-predefined combinatorial puzzles from random scrambles.
//!
//! The pipeline: generate random scrambles branching from the goal state,
//! train a dense network to predict the last scramble move from the resulting
//! state, then solve new states by beam-searching backward over the inverses
//! of predicted moves, ranked by cumulative log-probability. Exact solvers
//! (exhaustive BFS tables, IDA*, a GF(2) solver for Lights Out) provide
//! ground truth on fully enumerable puzzles, and a power-law fitter estimates
//! compute-optimal model/data allocation from (params, states, loss)
//! observations.

pub mod blob;
pub mod error;
pub mod nn;
pub mod oracle;
pub mod puzzle;
pub mod scaling;
pub mod scramble;
pub mod solver;

pub use error::{Error, Result};
pub use puzzle::{Family, Metric, Move, Puzzle, PuzzleSpec, State};
