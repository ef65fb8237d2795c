//! Sticker-permutation mechanics for the 3x3x3 and 2x2x2 cubes.
//!
//! Faces are ordered U, D, L, R, B, F; each face is stored row-major as seen
//! from outside the cube, with sticker index `face * n*n + row * n + col`.
//! Row/column conventions: U row 0 borders B; D row 0 borders F; L, R, B, F
//! row 0 border U; L col 0 borders B, R col 0 borders F, B col 0 borders R,
//! F col 0 borders L. Colors are indexed by home face, so the solved state is
//! `cells[face * n*n + i] = face`.
//!
//! Every move is a precomputed sticker permutation in `src_of` form:
//! `new[i] = old[perm[i]]`. The 2x2x2 quotients out whole-cube rotations by
//! fixing the DBL corner, so only the U, R and F faces are turnable.

use crate::error::{Error, Result};
use crate::puzzle::{Metric, Move, State};

pub(crate) const COLOR_CHARS: [char; 6] = ['U', 'D', 'L', 'R', 'B', 'F'];

const FACE_U: usize = 0;
const FACE_D: usize = 1;
const FACE_L: usize = 2;
const FACE_R: usize = 3;
const FACE_B: usize = 4;
const FACE_F: usize = 5;

/// Facelet triples of the eight 2x2x2 corner slots, in the order
/// ULB, UBR, UFL, URF, DFL, DFR, DBL, DBR.
pub(crate) const CUBE2_CORNER_FACELETS: [[usize; 3]; 8] = [
    [0, 8, 17],
    [1, 16, 13],
    [2, 20, 9],
    [3, 12, 21],
    [4, 22, 11],
    [5, 14, 23],
    [6, 19, 10],
    [7, 18, 15],
];

/// DBL corner home stickers in the 2x2x2 layout: D at 6, B at 19, L at 10.
const DBL_CHECKS: [(usize, u8); 3] = [(6, FACE_D as u8), (19, FACE_B as u8), (10, FACE_L as u8)];

pub(crate) struct CubeMech {
    n: usize,
    metric: Metric,
    move_perms: Vec<Vec<u8>>,
    labels: Vec<String>,
    inverses: Vec<u16>,
    /// Whole-cube rotations (2x2x2 only), identity first.
    rotations: Vec<Vec<u8>>,
}

fn sticker(n: usize, face: usize, r: usize, c: usize) -> usize {
    face * n * n + r * n + c
}

/// Build the clockwise quarter-turn of `face` as a `dst_of` map
/// (content at i moves to dst_of[i]).
fn face_turn_dst(n: usize, face: usize) -> Vec<u8> {
    let e = n - 1;
    let total = 6 * n * n;
    let mut dst: Vec<u8> = (0..total as u8).collect();
    let idx = |f: usize, r: usize, c: usize| sticker(n, f, r, c);

    // The turned face itself rotates (r, c) -> (c, e - r).
    for r in 0..n {
        for c in 0..n {
            dst[idx(face, r, c)] = idx(face, c, e - r) as u8;
        }
    }

    // Adjacent strips cycle; one 4-cycle per line index.
    let mut cycle = |quad: [usize; 4]| {
        dst[quad[0]] = quad[1] as u8;
        dst[quad[1]] = quad[2] as u8;
        dst[quad[2]] = quad[3] as u8;
        dst[quad[3]] = quad[0] as u8;
    };
    for k in 0..n {
        match face {
            FACE_U => cycle([
                idx(FACE_F, 0, k),
                idx(FACE_L, 0, k),
                idx(FACE_B, 0, k),
                idx(FACE_R, 0, k),
            ]),
            FACE_D => cycle([
                idx(FACE_F, e, k),
                idx(FACE_R, e, k),
                idx(FACE_B, e, k),
                idx(FACE_L, e, k),
            ]),
            FACE_L => cycle([
                idx(FACE_U, k, 0),
                idx(FACE_F, k, 0),
                idx(FACE_D, k, 0),
                idx(FACE_B, e - k, e),
            ]),
            FACE_R => cycle([
                idx(FACE_U, k, e),
                idx(FACE_B, e - k, 0),
                idx(FACE_D, k, e),
                idx(FACE_F, k, e),
            ]),
            FACE_F => cycle([
                idx(FACE_U, e, k),
                idx(FACE_R, k, 0),
                idx(FACE_D, 0, e - k),
                idx(FACE_L, e - k, e),
            ]),
            FACE_B => cycle([
                idx(FACE_U, 0, k),
                idx(FACE_L, e - k, 0),
                idx(FACE_D, e, e - k),
                idx(FACE_R, k, e),
            ]),
            _ => unreachable!(),
        }
    }
    dst
}

fn invert_perm(p: &[u8]) -> Vec<u8> {
    let mut inv = vec![0u8; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v as usize] = i as u8;
    }
    inv
}

/// Compose in application order: applying `p` then `q` (both `src_of`).
fn compose(p: &[u8], q: &[u8]) -> Vec<u8> {
    q.iter().map(|&i| p[i as usize]).collect()
}

pub(crate) fn apply_perm(cells: &[u8], perm: &[u8], out: &mut [u8]) {
    for (o, &src) in out.iter_mut().zip(perm.iter()) {
        *o = cells[src as usize];
    }
}

impl CubeMech {
    pub(crate) fn new(n: usize, metric: Metric) -> Self {
        assert!(n == 2 || n == 3);
        let movable: &[usize] = if n == 3 {
            &[FACE_U, FACE_D, FACE_L, FACE_R, FACE_B, FACE_F]
        } else {
            &[FACE_U, FACE_R, FACE_F]
        };

        let mut move_perms = Vec::new();
        let mut labels = Vec::new();
        let mut inverses = Vec::new();
        for &face in movable {
            let ccw = face_turn_dst(n, face); // dst_of(cw) == src_of(ccw)
            let cw = invert_perm(&ccw);
            let face_char = COLOR_CHARS[face];
            let base = move_perms.len() as u16;
            match metric {
                Metric::QuarterTurn => {
                    move_perms.push(cw);
                    move_perms.push(ccw);
                    labels.push(format!("{face_char}"));
                    labels.push(format!("{face_char}'"));
                    inverses.push(base + 1);
                    inverses.push(base);
                }
                Metric::HalfTurn => {
                    let half = compose(&cw, &cw);
                    move_perms.push(cw);
                    move_perms.push(ccw);
                    move_perms.push(half);
                    labels.push(format!("{face_char}"));
                    labels.push(format!("{face_char}'"));
                    labels.push(format!("{face_char}2"));
                    inverses.push(base + 1);
                    inverses.push(base);
                    inverses.push(base + 2);
                }
            }
        }

        let rotations = if n == 2 { build_rotations(n) } else { Vec::new() };

        CubeMech { n, metric, move_perms, labels, inverses, rotations }
    }

    pub(crate) fn metric(&self) -> Metric {
        self.metric
    }

    pub(crate) fn goal(&self) -> State {
        let nn = self.n * self.n;
        let cells = (0..6 * nn).map(|i| (i / nn) as u8).collect();
        State::from_cells(cells)
    }

    pub(crate) fn apply(&self, cells: &[u8], m: Move, out: &mut [u8]) {
        apply_perm(cells, &self.move_perms[m.index()], out);
    }

    pub(crate) fn inverse(&self, m: Move) -> Move {
        Move(self.inverses[m.index()])
    }

    pub(crate) fn label(&self, m: Move) -> &str {
        &self.labels[m.index()]
    }

    pub(crate) fn validate(&self, cells: &[u8]) -> Result<()> {
        let nn = self.n * self.n;
        let mut counts = [0usize; 6];
        for &c in cells {
            if c > 5 {
                return Err(Error::Parse(format!("sticker color {c} out of range")));
            }
            counts[c as usize] += 1;
        }
        if counts.iter().any(|&k| k != nn) {
            return Err(Error::Parse(format!(
                "each color must appear exactly {nn} times, got {counts:?}"
            )));
        }
        if self.n == 3 {
            for face in 0..6 {
                if cells[sticker(3, face, 1, 1)] != face as u8 {
                    return Err(Error::Parse(format!(
                        "center sticker of face {} must be {}",
                        COLOR_CHARS[face], COLOR_CHARS[face]
                    )));
                }
            }
        } else {
            for (i, want) in DBL_CHECKS {
                if cells[i] != want {
                    return Err(Error::Parse(
                        "2x2x2 states must keep the DBL corner fixed in place".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The 24 whole-cube rotations (2x2x2 only).
    pub(crate) fn rotations(&self) -> &[Vec<u8>] {
        &self.rotations
    }
}

fn build_rotations(n: usize) -> Vec<Vec<u8>> {
    // x: whole-cube rotation like R (R plus L'); y: like U (U plus D').
    let r_cw = invert_perm(&face_turn_dst(n, FACE_R));
    let l_ccw = face_turn_dst(n, FACE_L);
    let u_cw = invert_perm(&face_turn_dst(n, FACE_U));
    let d_ccw = face_turn_dst(n, FACE_D);
    let x = compose(&r_cw, &l_ccw);
    let y = compose(&u_cw, &d_ccw);

    let identity: Vec<u8> = (0..(6 * n * n) as u8).collect();
    let mut rotations = vec![identity];
    let mut seen: std::collections::HashSet<Vec<u8>> =
        rotations.iter().cloned().collect();
    let mut head = 0;
    while head < rotations.len() {
        let cur = rotations[head].clone();
        head += 1;
        for gen in [&x, &y] {
            let next = compose(&cur, gen);
            if seen.insert(next.clone()) {
                rotations.push(next);
            }
        }
    }
    assert_eq!(rotations.len(), 24, "rotation group closure");
    rotations
}

/// Project a 3x3x3 state onto its 24 corner stickers in the 2x2x2 layout.
pub(crate) fn extract_corners(cube3_cells: &[u8]) -> Vec<u8> {
    debug_assert_eq!(cube3_cells.len(), 54);
    let mut out = vec![0u8; 24];
    for face in 0..6 {
        for r in 0..2 {
            for c in 0..2 {
                out[sticker(2, face, r, c)] = cube3_cells[sticker(3, face, 2 * r, 2 * c)];
            }
        }
    }
    out
}

/// Rotate a 2x2x2 sticker vector so the DBL corner cubie sits at home.
/// Returns None when no rotation achieves it (corner-invalid input).
pub(crate) fn canonicalize_fixed_corner(mech: &CubeMech, cells: &[u8]) -> Option<Vec<u8>> {
    let mut out = vec![0u8; 24];
    for rot in mech.rotations() {
        apply_perm(cells, rot, &mut out);
        if DBL_CHECKS.iter().all(|&(i, want)| out[i] == want) {
            return Some(out);
        }
    }
    None
}
