//! Exact Lights Out solver over the two-element field.
//!
//! Pressing is linear over GF(2): state = A x where column j of A is the
//! toggle footprint of press j. Gaussian elimination yields a particular
//! solution and a kernel basis; enumerating the kernel coset gives the
//! minimum-weight press set (unique solutions when the kernel is trivial).

use super::OptimalLen;
use crate::error::{Error, Result};
use crate::puzzle::{Family, Move, Puzzle, State};

/// Enumeration cap: kernels wider than this are refused rather than
/// enumerated (2^dim coset members).
pub const NULLITY_CAP: usize = 8;

struct Gf2System {
    /// rows[i] = equation for cell i: bitmask over press variables.
    rows: Vec<u64>,
    vars: usize,
}

fn toggle_matrix(puzzle: &Puzzle) -> Gf2System {
    let vars = puzzle.move_count();
    debug_assert!(vars <= 64);
    let mut rows = vec![0u64; puzzle.spec().state_len()];
    let goal = puzzle.goal();
    let mut scratch = goal.clone();
    for m in puzzle.moves() {
        puzzle.apply_into(&goal, m, &mut scratch).expect("presses are legal");
        for (cell, &v) in scratch.cells().iter().enumerate() {
            if v != 0 {
                rows[cell] |= 1u64 << m.index();
            }
        }
    }
    Gf2System { rows, vars }
}

struct Solved {
    particular: u64,
    kernel: Vec<u64>,
}

fn solve_gf2(sys: &Gf2System, rhs: &[u8]) -> Result<Solved> {
    let mut rows: Vec<(u64, u8)> = sys
        .rows
        .iter()
        .zip(rhs)
        .map(|(&r, &b)| (r, b & 1))
        .collect();

    // Forward elimination to row echelon form, recording pivot columns.
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; sys.vars];
    let mut rank = 0usize;
    for col in 0..sys.vars {
        let bit = 1u64 << col;
        let Some(pivot_row) = (rank..rows.len()).find(|&r| rows[r].0 & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot_row);
        let (prow, pb) = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.0 & bit != 0 {
                row.0 ^= prow;
                row.1 ^= pb;
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }

    // Inconsistent system: a zero row demanding 1.
    if rows[rank..].iter().any(|&(r, b)| r == 0 && b == 1) {
        return Err(Error::Unsolvable);
    }

    // Particular solution: free variables zero, pivots from the rhs.
    let mut particular = 0u64;
    for col in 0..sys.vars {
        if let Some(r) = pivot_of_col[col] {
            if rows[r].1 == 1 {
                particular |= 1u64 << col;
            }
        }
    }

    // Kernel basis: one vector per free column.
    let mut kernel = Vec::new();
    for free in 0..sys.vars {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = 1u64 << free;
        let fbit = 1u64 << free;
        for col in 0..sys.vars {
            if let Some(r) = pivot_of_col[col] {
                if rows[r].0 & fbit != 0 {
                    v |= 1u64 << col;
                }
            }
        }
        kernel.push(v);
    }
    Ok(Solved { particular, kernel })
}

/// Kernel dimension of the puzzle's toggle matrix (classically 2 for the
/// 5x5 board and 0 for the 7x7 board).
pub fn lightsout_kernel_dim(puzzle: &Puzzle) -> usize {
    let sys = toggle_matrix(puzzle);
    let zeros = vec![0u8; puzzle.spec().state_len()];
    solve_gf2(&sys, &zeros).expect("homogeneous system is consistent").kernel.len()
}

/// Minimum-weight press set reaching all-off, as sorted move indices.
/// `Unsolvable` when the system is inconsistent.
pub fn lightsout_optimal(puzzle: &Puzzle, state: &State) -> Result<Vec<Move>> {
    if !matches!(puzzle.spec().family, Family::LightsOut(_)) {
        return Err(Error::Parse(format!(
            "{} is not a lights-out puzzle",
            puzzle.spec()
        )));
    }
    let sys = toggle_matrix(puzzle);
    let solved = solve_gf2(&sys, state.cells())?;
    if solved.kernel.len() > NULLITY_CAP {
        return Err(Error::NullityTooLarge {
            nullity: solved.kernel.len(),
            cap: NULLITY_CAP,
        });
    }

    // Enumerate the coset; pick minimum weight, then lowest mask for ties.
    let mut best = solved.particular;
    for combo in 1u64..(1 << solved.kernel.len()) {
        let mut x = solved.particular;
        for (k, &kv) in solved.kernel.iter().enumerate() {
            if combo & (1 << k) != 0 {
                x ^= kv;
            }
        }
        let better = (x.count_ones(), x) < (best.count_ones(), best);
        if better {
            best = x;
        }
    }

    Ok((0..puzzle.move_count() as u16)
        .filter(|&i| best & (1 << i) != 0)
        .map(Move)
        .collect())
}

/// The GF(2) solver as an optimal-length oracle.
pub struct LightsOutOracle;

impl OptimalLen for LightsOutOracle {
    fn optimal_len(&self, puzzle: &Puzzle, state: &State) -> Result<usize> {
        lightsout_optimal(puzzle, state).map(|presses| presses.len())
    }
}
