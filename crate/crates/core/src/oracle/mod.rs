//! Ground-truth optimal solvers for desk-scale verification: exhaustive BFS
//! distance tables over fully enumerable puzzles, IDA* with admissible
//! heuristics, pattern-abstraction heuristics, and an algebraic Lights Out
//! solver over GF(2).

mod ida;
mod lightsout;
mod pattern;

pub use ida::{ida_star, Heuristic, IdaResult, ZeroHeuristic};
pub use lightsout::{lightsout_kernel_dim, lightsout_optimal, LightsOutOracle};
pub use pattern::{pattern_heuristic, Abstraction, MaxHeuristic, PatternHeuristic};

use std::path::Path;

use rustc_hash::FxHashMap;

use crate::blob::{Container, Tensor};
use crate::error::{Error, Result};
use crate::puzzle::{Puzzle, PuzzleSpec, State};
use crate::solver::SearchResult;

/// Exact optimal distances for every state reachable from the goal.
/// Keys are the compact canonical state keys, stored sorted for binary
/// search; built tables are immutable.
pub struct DistanceTable {
    spec: PuzzleSpec,
    keys: Vec<u128>,
    dists: Vec<u8>,
    max_depth: u32,
}

impl DistanceTable {
    pub fn spec(&self) -> &PuzzleSpec {
        &self.spec
    }

    pub fn state_count(&self) -> usize {
        self.keys.len()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn distance_by_key(&self, key: u128) -> Option<u32> {
        self.keys
            .binary_search(&key)
            .ok()
            .map(|i| self.dists[i] as u32)
    }

    pub fn distance(&self, puzzle: &Puzzle, s: &State) -> Option<u32> {
        debug_assert_eq!(puzzle.spec(), &self.spec);
        puzzle.state_key(s).and_then(|k| self.distance_by_key(k))
    }

    /// Deterministically sample `count` distinct states uniformly from the
    /// table (sorted-key order, seeded shuffle of indices).
    pub fn sample_states(&self, puzzle: &Puzzle, count: usize, seed: u64) -> Vec<State> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.keys.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(count);
        idx.iter()
            .map(|&i| puzzle.state_from_key(self.keys[i]).expect("table keys are valid"))
            .collect()
    }

    /// File layout: the standard blob container with kind "distance-table",
    /// holding sorted key halves and distances. Loading verifies the state
    /// count and that the goal is at distance zero.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::json!({
            "kind": "distance-table",
            "puzzle": self.spec,
            "count": self.keys.len() as u64,
            "max_depth": self.max_depth,
        });
        let mut container = Container::new(header);
        let n = self.keys.len() as u32;
        let lo: Vec<u64> = self.keys.iter().map(|&k| k as u64).collect();
        let hi: Vec<u64> = self.keys.iter().map(|&k| (k >> 64) as u64).collect();
        container.push(Tensor::from_u64("key_lo", vec![n], &lo));
        container.push(Tensor::from_u64("key_hi", vec![n], &hi));
        container.push(Tensor::from_u8("distance", vec![n], &self.dists));
        container.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let container = Container::load(path)?;
        if container.header.get("kind").and_then(|k| k.as_str()) != Some("distance-table") {
            return Err(Error::BadCheckpoint("not a distance table file".into()));
        }
        let spec: PuzzleSpec = serde_json::from_value(
            container
                .header
                .get("puzzle")
                .cloned()
                .ok_or_else(|| Error::BadCheckpoint("missing puzzle header".into()))?,
        )
        .map_err(|e| Error::BadCheckpoint(format!("puzzle header: {e}")))?;
        let count = container
            .header
            .get("count")
            .and_then(|c| c.as_u64())
            .ok_or_else(|| Error::BadCheckpoint("missing count header".into()))? as usize;
        let max_depth = container
            .header
            .get("max_depth")
            .and_then(|c| c.as_u64())
            .ok_or_else(|| Error::BadCheckpoint("missing max_depth header".into()))?
            as u32;
        let lo = container.find("key_lo")?.as_u64()?;
        let hi = container.find("key_hi")?.as_u64()?;
        let dists = container.find("distance")?.as_u8()?;
        if lo.len() != count || hi.len() != count || dists.len() != count {
            return Err(Error::BadCheckpoint(format!(
                "table holds {} keys, header says {count}",
                lo.len()
            )));
        }
        let keys: Vec<u128> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| (l as u128) | ((h as u128) << 64))
            .collect();
        let table = DistanceTable { spec, keys, dists, max_depth };

        let puzzle = Puzzle::new(spec);
        let goal_key = puzzle
            .state_key(&puzzle.goal())
            .ok_or_else(|| Error::BadCheckpoint("puzzle has no compact key".into()))?;
        if table.distance_by_key(goal_key) != Some(0) {
            return Err(Error::BadCheckpoint("goal is not at distance zero".into()));
        }
        Ok(table)
    }
}

/// Exhaustive breadth-first enumeration from the goal. Fails with
/// `StateSpaceTooLarge` when the reachable set exceeds `budget` states or
/// the puzzle has no compact state key (the 3x3x3 cube).
pub fn bfs_enumerate(puzzle: &Puzzle, budget: usize) -> Result<DistanceTable> {
    let goal = puzzle.goal();
    let goal_key = puzzle
        .state_key(&goal)
        .ok_or(Error::StateSpaceTooLarge { budget })?;

    let mut dist: FxHashMap<u128, u8> = FxHashMap::default();
    dist.insert(goal_key, 0);
    let mut frontier = vec![goal_key];
    let mut depth = 0u32;
    let mut scratch;
    let mut child = goal.clone();

    while !frontier.is_empty() {
        if depth >= u8::MAX as u32 {
            return Err(Error::StateSpaceTooLarge { budget });
        }
        let mut next = Vec::new();
        for &key in &frontier {
            scratch = puzzle.state_from_key(key).expect("keys round trip");
            for m in puzzle.moves() {
                if !puzzle.is_legal(&scratch, m) {
                    continue;
                }
                puzzle.apply_into(&scratch, m, &mut child).expect("legal move");
                let ck = puzzle.state_key(&child).expect("keys round trip");
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(ck) {
                    e.insert((depth + 1) as u8);
                    next.push(ck);
                }
            }
        }
        if dist.len() > budget {
            return Err(Error::StateSpaceTooLarge { budget });
        }
        if next.is_empty() {
            break;
        }
        depth += 1;
        frontier = next;
    }

    let mut pairs: Vec<(u128, u8)> = dist.into_iter().collect();
    pairs.sort_unstable_by_key(|&(k, _)| k);
    let keys: Vec<u128> = pairs.iter().map(|&(k, _)| k).collect();
    let dists: Vec<u8> = pairs.iter().map(|&(_, d)| d).collect();
    Ok(DistanceTable { spec: *puzzle.spec(), keys, dists, max_depth: depth })
}

/// Anything that can report the exact optimal solution length of a state.
pub trait OptimalLen: Sync {
    fn optimal_len(&self, puzzle: &Puzzle, state: &State) -> Result<usize>;
}

impl OptimalLen for DistanceTable {
    fn optimal_len(&self, puzzle: &Puzzle, state: &State) -> Result<usize> {
        self.distance(puzzle, state)
            .map(|d| d as usize)
            .ok_or_else(|| Error::MissingOracle(puzzle.format_state(state)))
    }
}

/// Percentage of solved results whose length equals the oracle optimum.
/// Every result must be solved; an empty result set is an error, not 0.
pub fn optimality_rate(
    puzzle: &Puzzle,
    results: &[(State, SearchResult)],
    oracle: &dyn OptimalLen,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut optimal = 0usize;
    for (state, res) in results {
        if !res.solved {
            return Err(Error::MissingOracle(format!(
                "unsolved case {} has no defined optimality",
                puzzle.format_state(state)
            )));
        }
        if res.length == oracle.optimal_len(puzzle, state)? {
            optimal += 1;
        }
    }
    Ok(100.0 * optimal as f64 / results.len() as f64)
}
