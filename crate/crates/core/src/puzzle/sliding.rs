//! n x n sliding-tile mechanics. Moves are blank movements (U, D, L, R);
//! pushing the blank off the board is an error, not a no-op, so the move set
//! stays at four and callers must mask legality.

use crate::error::{Error, Result};
use crate::puzzle::{Move, State};

const LABELS: [&str; 4] = ["U", "D", "L", "R"];

pub(crate) struct SlideMech {
    n: usize,
}

impl SlideMech {
    pub(crate) fn new(n: usize) -> Self {
        assert!((2..=8).contains(&n));
        SlideMech { n }
    }

    pub(crate) fn cell_count(&self) -> usize {
        self.n * self.n
    }

    pub(crate) fn goal(&self) -> State {
        let nn = self.cell_count();
        let mut cells: Vec<u8> = (1..nn as u8).collect();
        cells.push(0);
        State::from_cells(cells)
    }

    fn blank_pos(cells: &[u8]) -> usize {
        cells.iter().position(|&t| t == 0).expect("state has a blank")
    }

    /// Target cell the blank swaps with, if the move stays on the board.
    fn target(&self, blank: usize, m: Move) -> Option<usize> {
        let n = self.n;
        match m.index() {
            0 => (blank >= n).then(|| blank - n),          // U
            1 => (blank + n < n * n).then(|| blank + n),   // D
            2 => (blank % n > 0).then(|| blank - 1),       // L
            3 => (blank % n < n - 1).then(|| blank + 1),   // R
            _ => None,
        }
    }

    pub(crate) fn is_legal(&self, cells: &[u8], m: Move) -> bool {
        m.index() < 4 && self.target(Self::blank_pos(cells), m).is_some()
    }

    pub(crate) fn apply(&self, cells: &[u8], m: Move, out: &mut [u8]) {
        let blank = Self::blank_pos(cells);
        let target = self.target(blank, m).expect("legality checked by caller");
        out.copy_from_slice(cells);
        out.swap(blank, target);
    }

    pub(crate) fn inverse(&self, m: Move) -> Move {
        Move(m.0 ^ 1)
    }

    pub(crate) fn label(&self, m: Move) -> &str {
        LABELS[m.index()]
    }

    /// Cells must be a permutation of 0..n*n whose parity matches the
    /// blank's taxicab distance from its home corner; every blank move is a
    /// transposition and changes that distance by one, so the invariant
    /// holds exactly on the states reachable from the goal.
    pub(crate) fn validate(&self, cells: &[u8]) -> Result<()> {
        let nn = self.cell_count();
        let mut seen = vec![false; nn];
        for &t in cells {
            if (t as usize) >= nn || seen[t as usize] {
                return Err(Error::Parse(format!(
                    "tiles must be a permutation of 0..{nn}"
                )));
            }
            seen[t as usize] = true;
        }

        // Rank of each tile in the goal ordering 1, 2, ..., nn-1, blank.
        let rank = |t: u8| -> usize {
            if t == 0 {
                nn - 1
            } else {
                t as usize - 1
            }
        };
        let mut inversions = 0usize;
        for i in 0..nn {
            for j in i + 1..nn {
                if rank(cells[i]) > rank(cells[j]) {
                    inversions += 1;
                }
            }
        }
        let blank = Self::blank_pos(cells);
        let (r, c) = (blank / self.n, blank % self.n);
        let taxicab = (self.n - 1 - r) + (self.n - 1 - c);
        if inversions % 2 != taxicab % 2 {
            return Err(Error::Parse(
                "tile arrangement is not reachable from the goal".into(),
            ));
        }
        Ok(())
    }
}
