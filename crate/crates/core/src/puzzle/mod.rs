//! Reversible-puzzle abstraction: goal states, indexed move sets, inversion,
//! redundancy filtering, neural encodings, and text notation for four puzzle
//! families (3x3x3 cube, 2x2x2 cube, n x n sliding tiles, n x n Lights Out).

mod cube;
mod lightsout;
mod sliding;


use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which puzzle is being played.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Cube3,
    Cube2,
    /// n x n sliding-tile puzzle (n*n - 1 numbered tiles plus a blank).
    Sliding(u8),
    /// n x n Lights Out board.
    LightsOut(u8),
}

/// Cube move-counting convention. Ignored by non-cube families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    /// 90-degree turns only; a 180-degree turn costs two moves.
    QuarterTurn,
    /// 90- and 180-degree turns each count as one move.
    HalfTurn,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Cube3 => write!(f, "cube3"),
            Family::Cube2 => write!(f, "cube2"),
            Family::Sliding(n) => write!(f, "sliding-{n}"),
            Family::LightsOut(n) => write!(f, "lightsout-{n}"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fam = match s {
            "cube3" => Family::Cube3,
            "cube2" => Family::Cube2,
            _ => {
                let parse_n = |prefix: &str| -> Option<u8> {
                    s.strip_prefix(prefix).and_then(|t| t.parse().ok())
                };
                if let Some(n) = parse_n("sliding-") {
                    if !(2..=8).contains(&n) {
                        return Err(Error::Parse(format!("sliding board size {n} out of range 2..=8")));
                    }
                    Family::Sliding(n)
                } else if let Some(n) = parse_n("lightsout-") {
                    if !(2..=8).contains(&n) {
                        return Err(Error::Parse(format!("lightsout board size {n} out of range 2..=8")));
                    }
                    Family::LightsOut(n)
                } else {
                    return Err(Error::Parse(format!("unknown puzzle family `{s}`")));
                }
            }
        };
        Ok(fam)
    }
}

impl TryFrom<String> for Family {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::QuarterTurn => write!(f, "qtm"),
            Metric::HalfTurn => write!(f, "htm"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qtm" | "quarter" | "quarter-turn" => Ok(Metric::QuarterTurn),
            "htm" | "half" | "half-turn" => Ok(Metric::HalfTurn),
            _ => Err(Error::Parse(format!("unknown metric `{s}`"))),
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

/// Static description of a puzzle instance: family, metric, and the derived
/// move-set size, encoding width, and solution-length bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleSpec {
    pub family: Family,
    pub metric: Metric,
}

impl PuzzleSpec {
    pub fn new(family: Family, metric: Metric) -> Self {
        PuzzleSpec { family, metric }
    }

    /// Number of cells in the raw state vector.
    pub fn state_len(&self) -> usize {
        match self.family {
            Family::Cube3 => 54,
            Family::Cube2 => 24,
            Family::Sliding(n) | Family::LightsOut(n) => (n as usize).pow(2),
        }
    }

    /// Size of the move set |M|.
    pub fn move_count(&self) -> usize {
        match (self.family, self.metric) {
            (Family::Cube3, Metric::QuarterTurn) => 12,
            (Family::Cube3, Metric::HalfTurn) => 18,
            // One corner is held fixed, so only the three faces that do not
            // touch it are turnable.
            (Family::Cube2, Metric::QuarterTurn) => 6,
            (Family::Cube2, Metric::HalfTurn) => 9,
            (Family::Sliding(_), _) => 4,
            (Family::LightsOut(n), _) => (n as usize).pow(2),
        }
    }

    /// Width of the neural input vector.
    pub fn encoding_dim(&self) -> usize {
        match self.family {
            Family::Cube3 => 324,
            Family::Cube2 => 144,
            Family::Sliding(n) => (n as usize).pow(4),
            Family::LightsOut(n) => (n as usize).pow(2),
        }
    }

    /// Upper bound on the optimal solution length, when known.
    pub fn gods_number_hint(&self) -> Option<u32> {
        match (self.family, self.metric) {
            (Family::Cube3, Metric::QuarterTurn) => Some(26),
            (Family::Cube3, Metric::HalfTurn) => Some(20),
            (Family::Cube2, Metric::QuarterTurn) => Some(14),
            (Family::Cube2, Metric::HalfTurn) => Some(11),
            (Family::Sliding(3), _) => Some(31),
            (Family::Sliding(4), _) => Some(80),
            (Family::Sliding(_), _) => None,
            (Family::LightsOut(n), _) => Some((n as u32).pow(2)),
        }
    }
}

impl fmt::Display for PuzzleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Cube3 | Family::Cube2 => write!(f, "{} {}", self.family, self.metric),
            _ => write!(f, "{}", self.family),
        }
    }
}

/// One puzzle configuration: a fixed-length vector of small cell values.
///
/// Cube states hold 54 (or 24) sticker color indices 0..=5, sliding states a
/// permutation of 0..n*n with 0 as the blank, Lights Out states n*n bits.
/// Value type with structural equality and a stable hash.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct State {
    cells: Box<[u8]>,
}

impl State {
    pub(crate) fn from_cells(cells: Vec<u8>) -> Self {
        State { cells: cells.into_boxed_slice() }
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [u8] {
        &mut self.cells
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "State({:?})", &self.cells)
    }
}

/// A move in the indexed generator set, 0..|M|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move(pub u16);

impl Move {
    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

pub(crate) enum Mechanics {
    Cube(cube::CubeMech),
    Sliding(sliding::SlideMech),
    Lights(lightsout::LightsMech),
}

/// A puzzle instance with precomputed move tables. All operations are pure
/// functions on immutable values; a `Puzzle` is freely shareable across
/// threads.
pub struct Puzzle {
    spec: PuzzleSpec,
    mech: Mechanics,
}

impl Puzzle {
    pub fn new(spec: PuzzleSpec) -> Self {
        let mech = match spec.family {
            Family::Cube3 => Mechanics::Cube(cube::CubeMech::new(3, spec.metric)),
            Family::Cube2 => Mechanics::Cube(cube::CubeMech::new(2, spec.metric)),
            Family::Sliding(n) => Mechanics::Sliding(sliding::SlideMech::new(n as usize)),
            Family::LightsOut(n) => Mechanics::Lights(lightsout::LightsMech::new(n as usize)),
        };
        Puzzle { spec, mech }
    }

    pub fn spec(&self) -> &PuzzleSpec {
        &self.spec
    }

    pub fn move_count(&self) -> usize {
        self.spec.move_count()
    }

    pub fn encoding_dim(&self) -> usize {
        self.spec.encoding_dim()
    }

    pub fn moves(&self) -> impl Iterator<Item = Move> {
        (0..self.move_count() as u16).map(Move)
    }

    /// The canonical solved state.
    pub fn goal(&self) -> State {
        match &self.mech {
            Mechanics::Cube(c) => c.goal(),
            Mechanics::Sliding(s) => s.goal(),
            Mechanics::Lights(l) => l.goal(),
        }
    }

    pub fn is_goal(&self, s: &State) -> bool {
        *s == self.goal()
    }

    /// Whether `m` can be applied in `s`. Always true except for sliding
    /// moves that would push the blank off the board.
    pub fn is_legal(&self, s: &State, m: Move) -> bool {
        match &self.mech {
            Mechanics::Sliding(sl) => sl.is_legal(s.cells(), m),
            _ => m.index() < self.move_count(),
        }
    }

    /// Apply `m` to `s`, returning the successor. `s` is unmodified.
    pub fn apply(&self, s: &State, m: Move) -> Result<State> {
        let mut out = s.clone();
        self.apply_into(s, m, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`Puzzle::apply`] for hot loops.
    /// `out` must have the same length as `s`.
    pub fn apply_into(&self, s: &State, m: Move, out: &mut State) -> Result<()> {
        debug_assert_eq!(s.cells().len(), out.cells().len());
        if m.index() >= self.move_count() {
            return Err(Error::IllegalMove {
                move_label: format!("#{}", m.index()),
                state: self.format_state(s),
            });
        }
        match &self.mech {
            Mechanics::Cube(c) => {
                c.apply(s.cells(), m, out.cells_mut());
                Ok(())
            }
            Mechanics::Sliding(sl) => {
                if !sl.is_legal(s.cells(), m) {
                    return Err(Error::IllegalMove {
                        move_label: self.move_label(m).to_string(),
                        state: self.format_state(s),
                    });
                }
                sl.apply(s.cells(), m, out.cells_mut());
                Ok(())
            }
            Mechanics::Lights(l) => {
                l.apply(s.cells(), m, out.cells_mut());
                Ok(())
            }
        }
    }

    /// The move undoing `m`: apply(apply(s, m), inverse(m)) = s.
    pub fn inverse(&self, m: Move) -> Move {
        match &self.mech {
            Mechanics::Cube(c) => c.inverse(m),
            Mechanics::Sliding(s) => s.inverse(m),
            Mechanics::Lights(_) => m,
        }
    }

    /// Redundancy filter shared by scramble generation and solver pruning.
    ///
    /// `history` is the move sequence so far; returns true when appending
    /// `m` is excluded by policy: a move immediately followed by its inverse
    /// (cube, sliding), a third consecutive identical quarter turn (cube in
    /// the quarter-turn metric), or any repeat of an already-applied move
    /// (Lights Out). Cube and sliding rules inspect at most the last two
    /// entries of `history`.
    pub fn redundant(&self, history: &[Move], m: Move) -> bool {
        match &self.mech {
            Mechanics::Cube(c) => {
                if let Some(&last) = history.last() {
                    if c.inverse(last) == m {
                        return true;
                    }
                    if c.metric() == Metric::QuarterTurn
                        && last == m
                        && history.len() >= 2
                        && history[history.len() - 2] == m
                    {
                        return true;
                    }
                }
                false
            }
            Mechanics::Sliding(s) => match history.last() {
                Some(&last) => s.inverse(last) == m,
                None => false,
            },
            Mechanics::Lights(_) => history.contains(&m),
        }
    }

    /// Write the one-hot (cube, sliding) or raw-bit (Lights Out) encoding of
    /// `s` into `out`, which must be zeroed and of length `encoding_dim()`.
    pub fn encode_into<F: num_traits::Float>(&self, s: &State, out: &mut [F]) {
        debug_assert_eq!(out.len(), self.encoding_dim());
        let one = F::one();
        match &self.mech {
            Mechanics::Cube(_) => {
                for (i, &c) in s.cells().iter().enumerate() {
                    out[i * 6 + c as usize] = one;
                }
            }
            Mechanics::Sliding(sl) => {
                let nn = sl.cell_count();
                for (i, &t) in s.cells().iter().enumerate() {
                    out[i * nn + t as usize] = one;
                }
            }
            Mechanics::Lights(_) => {
                for (i, &b) in s.cells().iter().enumerate() {
                    if b != 0 {
                        out[i] = one;
                    }
                }
            }
        }
    }

    pub fn encode(&self, s: &State) -> Vec<f32> {
        let mut out = vec![0.0f32; self.encoding_dim()];
        self.encode_into(s, &mut out);
        out
    }

    /// Invert [`Puzzle::encode`]: one-hot blocks via argmax, bits via a 0.5
    /// threshold.
    pub fn decode(&self, v: &[f32]) -> Result<State> {
        if v.len() != self.encoding_dim() {
            return Err(Error::ShapeMismatch(format!(
                "encoding length {} != {}",
                v.len(),
                self.encoding_dim()
            )));
        }
        let argmax = |block: &[f32]| -> u8 {
            let mut best = 0usize;
            for (i, &x) in block.iter().enumerate() {
                if x > block[best] {
                    best = i;
                }
            }
            best as u8
        };
        let cells: Vec<u8> = match &self.mech {
            Mechanics::Cube(_) => v.chunks_exact(6).map(argmax).collect(),
            Mechanics::Sliding(sl) => v.chunks_exact(sl.cell_count()).map(argmax).collect(),
            Mechanics::Lights(_) => v.iter().map(|&x| u8::from(x >= 0.5)).collect(),
        };
        Ok(State::from_cells(cells))
    }

    pub fn move_label(&self, m: Move) -> &str {
        match &self.mech {
            Mechanics::Cube(c) => c.label(m),
            Mechanics::Sliding(s) => s.label(m),
            Mechanics::Lights(l) => l.label(m),
        }
    }

    pub fn parse_move(&self, text: &str) -> Result<Move> {
        let found = self
            .moves()
            .find(|&m| self.move_label(m) == text.trim());
        found.ok_or_else(|| Error::Parse(format!("`{text}` is not a move of {}", self.spec)))
    }

    /// Space-separated move notation.
    pub fn format_moves(&self, moves: &[Move]) -> String {
        moves
            .iter()
            .map(|&m| self.move_label(m))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_moves(&self, text: &str) -> Result<Vec<Move>> {
        text.split_whitespace().map(|t| self.parse_move(t)).collect()
    }

    /// Text notation: cube states as 54- or 24-char color strings in face
    /// order U,D,L,R,B,F row-major; sliding states as comma-separated tile
    /// lists; Lights Out states as row-major bitstrings.
    pub fn format_state(&self, s: &State) -> String {
        match &self.mech {
            Mechanics::Cube(_) => s
                .cells()
                .iter()
                .map(|&c| cube::COLOR_CHARS[c as usize])
                .collect(),
            Mechanics::Sliding(_) => s
                .cells()
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(","),
            Mechanics::Lights(_) => s
                .cells()
                .iter()
                .map(|&b| if b == 0 { '0' } else { '1' })
                .collect(),
        }
    }

    /// Parse and validate the text notation produced by `format_state`.
    /// Round trips bit-exactly.
    pub fn parse_state(&self, text: &str) -> Result<State> {
        let text = text.trim();
        let cells: Vec<u8> = match &self.mech {
            Mechanics::Cube(_) => text
                .chars()
                .map(|ch| {
                    cube::COLOR_CHARS
                        .iter()
                        .position(|&c| c == ch)
                        .map(|i| i as u8)
                        .ok_or_else(|| Error::Parse(format!("bad sticker color `{ch}`")))
                })
                .collect::<Result<_>>()?,
            Mechanics::Sliding(_) => text
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::Parse(format!("bad tile `{t}`")))
                })
                .collect::<Result<_>>()?,
            Mechanics::Lights(_) => text
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::Parse(format!("bad light `{ch}`"))),
                })
                .collect::<Result<_>>()?,
        };
        self.validate_cells(cells)
    }

    /// Check family invariants and wrap the cells in a `State`.
    pub fn validate_cells(&self, cells: Vec<u8>) -> Result<State> {
        if cells.len() != self.spec.state_len() {
            return Err(Error::Parse(format!(
                "state has {} cells, expected {}",
                cells.len(),
                self.spec.state_len()
            )));
        }
        match &self.mech {
            Mechanics::Cube(c) => c.validate(&cells)?,
            Mechanics::Sliding(s) => s.validate(&cells)?,
            Mechanics::Lights(l) => l.validate(&cells)?,
        }
        Ok(State::from_cells(cells))
    }

    /// Compact canonical key for table lookups, when the state packs into
    /// 128 bits (everything except the 3x3x3 cube).
    pub fn state_key(&self, s: &State) -> Option<u128> {
        let bits = self.key_bits_per_cell()?;
        let mut key: u128 = 0;
        for (i, &c) in s.cells().iter().enumerate() {
            key |= (c as u128) << (i * bits);
        }
        Some(key)
    }

    /// Inverse of [`Puzzle::state_key`]. The key must come from a valid state.
    pub fn state_from_key(&self, key: u128) -> Option<State> {
        let bits = self.key_bits_per_cell()?;
        let mask = (1u128 << bits) - 1;
        let cells: Vec<u8> = (0..self.spec.state_len())
            .map(|i| ((key >> (i * bits)) & mask) as u8)
            .collect();
        Some(State::from_cells(cells))
    }

    fn key_bits_per_cell(&self) -> Option<usize> {
        let len = self.spec.state_len();
        let max_value = match self.spec.family {
            Family::Cube3 | Family::Cube2 => 5,
            Family::Sliding(n) => (n as usize).pow(2) - 1,
            Family::LightsOut(_) => 1,
        };
        let bits = usize::BITS as usize - (max_value as usize).leading_zeros() as usize;
        (len * bits <= 128).then_some(bits)
    }

}

/// Corner stickers of a 3x3x3 state in the 2x2x2 layout.
pub(crate) fn cube3_corner_projection(s: &State) -> Vec<u8> {
    cube::extract_corners(s.cells())
}

/// Rotate 2x2x2 sticker cells so the DBL cubie is home. `cube2` must be a
/// 2x2x2 puzzle.
pub(crate) fn cube2_canonicalize(cube2: &Puzzle, cells: &[u8]) -> Option<Vec<u8>> {
    match &cube2.mech {
        Mechanics::Cube(c) => cube::canonicalize_fixed_corner(c, cells),
        _ => None,
    }
}

pub(crate) fn cube2_corner_facelets(slot: usize) -> [usize; 3] {
    cube::CUBE2_CORNER_FACELETS[slot]
}
