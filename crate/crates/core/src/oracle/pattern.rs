//! Pattern-database heuristics: project states onto a smaller enumerable
//! abstraction, enumerate the abstract space exhaustively, and use exact
//! abstract distances as lower bounds. Every abstraction here is a quotient
//! of the concrete move graph (moves act identically on abstract states), so
//! a concrete path projects to an abstract path of equal length and the
//! heuristic is admissible by construction.

use rustc_hash::FxHashMap;

use super::ida::Heuristic;
use super::{bfs_enumerate, DistanceTable};
use crate::error::{Error, Result};
use crate::puzzle::{self, Family, Puzzle, PuzzleSpec, State};

/// Wildcard marker: one past the largest real sticker color.
const CUBE_WILD: u8 = 6;

#[derive(Clone, Debug)]
pub enum Abstraction {
    /// Sliding puzzles: keep the blank and the listed tiles distinct, blur
    /// every other tile into a wildcard.
    TileSubset(Vec<u8>),
    /// 2x2x2: keep the stickers of the listed corner slots (home-slot ids
    /// 0..8 in the order ULB, UBR, UFL, URF, DFL, DFR, DBL, DBR), blur the
    /// rest.
    CornerSubset(Vec<usize>),
    /// 3x3x3: project onto the corner stickers and quotient out whole-cube
    /// rotations, which lands exactly in the fixed-corner 2x2x2 space.
    Cube3Corners,
}

enum Projector {
    Tiles { tiles: Vec<u8>, wild: u8 },
    Corners { tracked: Vec<[u8; 3]> },
}

impl Projector {
    fn project(&self, state: &State) -> Vec<u8> {
        match self {
            Projector::Tiles { tiles, wild } => state
                .cells()
                .iter()
                .map(|&t| if t == 0 || tiles.contains(&t) { t } else { *wild })
                .collect(),
            Projector::Corners { tracked } => {
                let mut out = state.cells().to_vec();
                for slot in 0..8 {
                    let colors = corner_colors(state.cells(), slot);
                    if !tracked.contains(&colors) {
                        for &i in &puzzle::cube2_corner_facelets(slot) {
                            out[i] = CUBE_WILD;
                        }
                    }
                }
                out
            }
        }
    }
}

enum Inner {
    Map { projector: Projector, map: FxHashMap<u128, u8> },
    Cube3 { cube2: Puzzle, table: DistanceTable },
}

pub struct PatternHeuristic {
    abstraction: Abstraction,
    inner: Inner,
}

impl PatternHeuristic {
    pub fn abstraction(&self) -> &Abstraction {
        &self.abstraction
    }

    /// Number of abstract states enumerated.
    pub fn table_len(&self) -> usize {
        match &self.inner {
            Inner::Map { map, .. } => map.len(),
            Inner::Cube3 { table, .. } => table.state_count(),
        }
    }
}

/// Build the exact-abstract-distance heuristic for `puzzle`.
pub fn pattern_heuristic(
    puzzle: &Puzzle,
    abstraction: Abstraction,
    budget: usize,
) -> Result<PatternHeuristic> {
    match (&abstraction, puzzle.spec().family) {
        (Abstraction::TileSubset(tiles), Family::Sliding(n)) => {
            let nn = (n as usize).pow(2);
            if tiles.iter().any(|&t| t == 0 || t as usize >= nn) {
                return Err(Error::Parse(format!("tracked tiles must be in 1..{nn}")));
            }
            let projector = Projector::Tiles { tiles: tiles.clone(), wild: nn as u8 };
            let map = abstract_bfs(puzzle, budget, &projector)?;
            Ok(PatternHeuristic { abstraction, inner: Inner::Map { projector, map } })
        }
        (Abstraction::CornerSubset(slots), Family::Cube2) => {
            if slots.iter().any(|&s| s >= 8) {
                return Err(Error::Parse("corner slots are 0..8".into()));
            }
            let goal = puzzle.goal();
            let tracked: Vec<[u8; 3]> = slots
                .iter()
                .map(|&s| corner_colors(goal.cells(), s))
                .collect();
            let projector = Projector::Corners { tracked };
            let map = abstract_bfs(puzzle, budget, &projector)?;
            Ok(PatternHeuristic { abstraction, inner: Inner::Map { projector, map } })
        }
        (Abstraction::Cube3Corners, Family::Cube3) => {
            let cube2 = Puzzle::new(PuzzleSpec::new(Family::Cube2, puzzle.spec().metric));
            let table = bfs_enumerate(&cube2, budget)?;
            Ok(PatternHeuristic { abstraction, inner: Inner::Cube3 { cube2, table } })
        }
        _ => Err(Error::Parse(format!(
            "abstraction {abstraction:?} does not apply to {}",
            puzzle.spec()
        ))),
    }
}

impl Heuristic for PatternHeuristic {
    fn estimate(&self, _puzzle: &Puzzle, state: &State) -> u32 {
        match &self.inner {
            Inner::Map { projector, map } => {
                let abs = projector.project(state);
                map.get(&pack_cells(&abs)).copied().unwrap_or(0) as u32
            }
            Inner::Cube3 { cube2, table } => {
                let corners = puzzle::cube3_corner_projection(state);
                let canon = puzzle::cube2_canonicalize(cube2, &corners)
                    .expect("legal cube states have a DBL cubie");
                let key = cube2
                    .state_key(&State::from_cells(canon))
                    .expect("2x2x2 states pack into keys");
                table.distance_by_key(key).unwrap_or(0)
            }
        }
    }
}

/// Pointwise maximum of admissible heuristics, itself admissible.
pub struct MaxHeuristic(pub Vec<Box<dyn Heuristic + Send + Sync>>);

impl Heuristic for MaxHeuristic {
    fn estimate(&self, puzzle: &Puzzle, state: &State) -> u32 {
        self.0
            .iter()
            .map(|h| h.estimate(puzzle, state))
            .max()
            .unwrap_or(0)
    }
}

fn corner_colors(cells: &[u8], slot: usize) -> [u8; 3] {
    let f = puzzle::cube2_corner_facelets(slot);
    let mut colors = [cells[f[0]], cells[f[1]], cells[f[2]]];
    colors.sort_unstable();
    colors
}

/// Pack abstract cells at 5 bits per cell (values up to 31, length up to 25).
fn pack_cells(cells: &[u8]) -> u128 {
    debug_assert!(cells.len() * 5 <= 128);
    let mut key = 0u128;
    for (i, &c) in cells.iter().enumerate() {
        key |= (c as u128) << (i * 5);
    }
    key
}

/// BFS over the abstract graph: moves act directly on abstracted cells.
fn abstract_bfs(
    puzzle: &Puzzle,
    budget: usize,
    projector: &Projector,
) -> Result<FxHashMap<u128, u8>> {
    let goal_abs = projector.project(&puzzle.goal());
    if goal_abs.len() * 5 > 128 {
        return Err(Error::StateSpaceTooLarge { budget });
    }
    let mut dist: FxHashMap<u128, u8> = FxHashMap::default();
    dist.insert(pack_cells(&goal_abs), 0);
    let mut frontier = vec![goal_abs.clone()];
    let mut depth = 0u8;
    let mut child = State::from_cells(goal_abs);

    while !frontier.is_empty() {
        let mut next = Vec::new();
        for cells in &frontier {
            let state = State::from_cells(cells.clone());
            for m in puzzle.moves() {
                if !puzzle.is_legal(&state, m) {
                    continue;
                }
                puzzle.apply_into(&state, m, &mut child).expect("legal move");
                let key = pack_cells(child.cells());
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(key) {
                    e.insert(depth + 1);
                    next.push(child.cells().to_vec());
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
    Ok(dist)
}
