//! Iterative-deepening A*: depth-first search under an f = g + h threshold
//! that rises to the smallest pruned value each iteration. With an
//! admissible heuristic the first solution found is optimal; the zero
//! heuristic degenerates to plain iterative-deepening depth-first search.

use super::DistanceTable;
use crate::error::{Error, Result};
use crate::puzzle::{Move, Puzzle, State};

/// Admissible lower bound on the remaining distance to the goal.
pub trait Heuristic: Sync {
    fn estimate(&self, puzzle: &Puzzle, state: &State) -> u32;
}

/// h = 0 everywhere.
pub struct ZeroHeuristic;

impl Heuristic for ZeroHeuristic {
    fn estimate(&self, _puzzle: &Puzzle, _state: &State) -> u32 {
        0
    }
}

/// An exact distance table is the strongest admissible heuristic.
impl Heuristic for DistanceTable {
    fn estimate(&self, puzzle: &Puzzle, state: &State) -> u32 {
        self.distance(puzzle, state).unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct IdaResult {
    pub solution: Vec<Move>,
    pub nodes_expanded: u64,
}

enum Dfs {
    Found,
    Min(u32),
    Budget,
}

/// Provably optimal solve (given an admissible heuristic) or
/// `BudgetExceeded` after expanding `node_budget` nodes.
pub fn ida_star(
    puzzle: &Puzzle,
    start: &State,
    heuristic: &dyn Heuristic,
    node_budget: u64,
) -> Result<IdaResult> {
    let goal = puzzle.goal();
    let mut nodes = 0u64;
    let mut threshold = heuristic.estimate(puzzle, start);
    let mut path: Vec<Move> = Vec::new();
    loop {
        let mut stack = vec![start.clone()];
        match dfs(
            puzzle, &goal, heuristic, &mut stack, 0, threshold, &mut path, &mut nodes, node_budget,
        ) {
            Dfs::Found => {
                return Ok(IdaResult { solution: path, nodes_expanded: nodes });
            }
            Dfs::Min(next) => {
                if next == u32::MAX {
                    // Space exhausted below the threshold: unreachable goal.
                    return Err(Error::BudgetExceeded { budget: node_budget });
                }
                threshold = next;
            }
            Dfs::Budget => return Err(Error::BudgetExceeded { budget: node_budget }),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    puzzle: &Puzzle,
    goal: &State,
    heuristic: &dyn Heuristic,
    stack: &mut Vec<State>,
    g: u32,
    threshold: u32,
    path: &mut Vec<Move>,
    nodes: &mut u64,
    budget: u64,
) -> Dfs {
    let state = &stack[g as usize];
    let f = g + heuristic.estimate(puzzle, state);
    if f > threshold {
        return Dfs::Min(f);
    }
    if state == goal {
        return Dfs::Found;
    }
    *nodes += 1;
    if *nodes > budget {
        return Dfs::Budget;
    }

    if stack.len() <= (g + 1) as usize {
        stack.push(goal.clone()); // placeholder buffer, overwritten below
    }
    let mut min_excess = u32::MAX;
    for m in puzzle.moves() {
        if puzzle.redundant(path, m) || !puzzle.is_legal(&stack[g as usize], m) {
            continue;
        }
        {
            let (cur, rest) = stack.split_at_mut((g + 1) as usize);
            puzzle
                .apply_into(&cur[g as usize], m, &mut rest[0])
                .expect("legality checked");
        }
        path.push(m);
        match dfs(puzzle, goal, heuristic, stack, g + 1, threshold, path, nodes, budget) {
            Dfs::Found => return Dfs::Found,
            Dfs::Min(v) => min_excess = min_excess.min(v),
            Dfs::Budget => return Dfs::Budget,
        }
        path.pop();
    }
    Dfs::Min(min_excess)
}
