//! Training-data generation: seeded random scrambles branching from the
//! goal, emitting one (encoded state, label) example per scramble step.
//!
//! Each scramble draws uniformly among the moves that are legal in the
//! current state and pass the redundancy filter, so no generated sequence
//! contains a self-canceling or dominated continuation. Scrambles are seeded
//! independently per (run seed, scramble index), which makes batches
//! reproducible and independent of generation order or parallel scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Labels, Mat, Scalar};
use crate::puzzle::{Family, Move, Puzzle, State};

/// Splittable seed derivation (splitmix64 over a salted base).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How examples are labeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// The index of the move applied at this step (categorical target).
    LastMove,
    /// Binary vector marking every move applied an odd number of times so
    /// far; with the no-repeat policy this is "applied at all". Lights Out
    /// only.
    MoveMultiset,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScrambleConfig {
    /// Moves per scramble (N). Should match the puzzle's God's Number or an
    /// upper bound on it.
    pub scramble_length: usize,
    /// Scrambles per batch (B); a batch holds B * N examples.
    pub batch_scrambles: usize,
    pub label_mode: LabelMode,
    pub seed: u64,
}

impl ScrambleConfig {
    pub fn examples_per_batch(&self) -> usize {
        self.scramble_length * self.batch_scrambles
    }

    pub fn validate(&self, puzzle: &Puzzle) -> Result<()> {
        if self.scramble_length == 0 || self.batch_scrambles == 0 {
            return Err(Error::Parse(
                "scramble length and batch scrambles must be at least 1".into(),
            ));
        }
        if self.label_mode == LabelMode::MoveMultiset
            && !matches!(puzzle.spec().family, Family::LightsOut(_))
        {
            return Err(Error::Parse(
                "move-multiset labels are only defined for lights-out puzzles".into(),
            ));
        }
        if matches!(puzzle.spec().family, Family::LightsOut(_))
            && self.scramble_length > puzzle.move_count()
        {
            return Err(Error::Parse(
                "lights-out scrambles cannot exceed one press per light".into(),
            ));
        }
        Ok(())
    }
}

/// B * N encoded states plus labels; example `i * N + n` is scramble `i`
/// after `n + 1` moves.
pub struct TrainingBatch<F: Scalar> {
    pub inputs: Mat<F>,
    pub labels: Labels<F>,
    /// The underlying scrambles, for replay checks and dumps.
    pub scrambles: Vec<Vec<Move>>,
}

/// One seeded scramble: returns the moves applied and the visited states
/// (one per move, goal excluded).
pub fn sample_scramble(puzzle: &Puzzle, length: usize, seed: u64) -> (Vec<Move>, Vec<State>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = puzzle.goal();
    let mut history: Vec<Move> = Vec::with_capacity(length);
    let mut states = Vec::with_capacity(length);
    let mut candidates: Vec<Move> = Vec::with_capacity(puzzle.move_count());
    for _ in 0..length {
        candidates.clear();
        candidates.extend(
            puzzle
                .moves()
                .filter(|&m| puzzle.is_legal(&state, m) && !puzzle.redundant(&history, m)),
        );
        debug_assert!(!candidates.is_empty(), "redundancy filter exhausted the move set");
        let m = candidates[rng.gen_range(0..candidates.len())];
        state = puzzle.apply(&state, m).expect("candidate moves are legal");
        history.push(m);
        states.push(state.clone());
    }
    (history, states)
}

/// Generate one training batch. Deterministic in (puzzle, config): scramble
/// `i` is seeded with `derive_seed(config.seed, i)` regardless of thread
/// scheduling.
pub fn generate_batch<F: Scalar>(puzzle: &Puzzle, config: &ScrambleConfig) -> Result<TrainingBatch<F>> {
    config.validate(puzzle)?;
    let n = config.scramble_length;
    let b = config.batch_scrambles;
    let dim = puzzle.encoding_dim();
    let move_count = puzzle.move_count();

    let scrambles: Vec<(Vec<Move>, Vec<State>)> = (0..b)
        .into_par_iter()
        .map(|i| sample_scramble(puzzle, n, derive_seed(config.seed, i as u64)))
        .collect();

    let mut inputs = Mat::zeros(b * n, dim);
    for (i, (_, states)) in scrambles.iter().enumerate() {
        for (step, state) in states.iter().enumerate() {
            puzzle.encode_into(state, inputs.row_mut(i * n + step));
        }
    }

    let labels = match config.label_mode {
        LabelMode::LastMove => {
            let mut classes = Vec::with_capacity(b * n);
            for (moves, _) in &scrambles {
                classes.extend(moves.iter().map(|m| m.index() as u32));
            }
            Labels::Classes(classes)
        }
        LabelMode::MoveMultiset => {
            let mut bits = Mat::zeros(b * n, move_count);
            for (i, (moves, _)) in scrambles.iter().enumerate() {
                let mut pressed = vec![false; move_count];
                for (step, m) in moves.iter().enumerate() {
                    pressed[m.index()] ^= true;
                    let row = bits.row_mut(i * n + step);
                    for (slot, &on) in row.iter_mut().zip(pressed.iter()) {
                        *slot = if on { F::one() } else { F::zero() };
                    }
                }
            }
            Labels::Bits(bits)
        }
    };

    Ok(TrainingBatch {
        inputs,
        labels,
        scrambles: scrambles.into_iter().map(|(moves, _)| moves).collect(),
    })
}

/// Uniformly random solvable Lights Out state: every press applied
/// independently with probability 1/2 (press subsets cover the solvable
/// space uniformly).
pub fn sample_press_subset(puzzle: &Puzzle, seed: u64) -> State {
    debug_assert!(matches!(puzzle.spec().family, Family::LightsOut(_)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = puzzle.goal();
    for m in puzzle.moves() {
        if rng.gen_bool(0.5) {
            state = puzzle.apply(&state, m).expect("presses are legal");
        }
    }
    state
}

/// Exact probability that the generator produces `sequence` as a scramble
/// prefix: the product over steps of 1/(number of legal, non-redundant moves
/// at that step). Errors when the sequence itself violates the policy.
pub fn scramble_path_probability(puzzle: &Puzzle, sequence: &[Move]) -> Result<f64> {
    let mut state = puzzle.goal();
    let mut history: Vec<Move> = Vec::with_capacity(sequence.len());
    let mut prob = 1.0f64;
    for (step, &m) in sequence.iter().enumerate() {
        if puzzle.redundant(&history, m) || !puzzle.is_legal(&state, m) {
            return Err(Error::RedundantSequence {
                step,
                move_label: puzzle.move_label(m).to_string(),
            });
        }
        let candidates = puzzle
            .moves()
            .filter(|&c| puzzle.is_legal(&state, c) && !puzzle.redundant(&history, c))
            .count();
        prob /= candidates as f64;
        state = puzzle.apply(&state, m)?;
        history.push(m);
    }
    Ok(prob)
}

/// Plain-text batch dump: a commented header followed by one
/// `state<TAB>label` row per example (move notation for last-move labels,
/// a bitstring over move indices for multiset labels).
pub fn dump_batch<F: Scalar>(
    puzzle: &Puzzle,
    config: &ScrambleConfig,
    batch: &TrainingBatch<F>,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# unscramble batch dump v1\n# puzzle: {}\n", puzzle.spec()));
    out.push_str(&format!(
        "# scramble_length: {} batch_scrambles: {} label_mode: {:?} seed: {}\n",
        config.scramble_length, config.batch_scrambles, config.label_mode, config.seed
    ));
    let n = config.scramble_length;
    for (i, moves) in batch.scrambles.iter().enumerate() {
        let mut state = puzzle.goal();
        let mut pressed = vec![false; puzzle.move_count()];
        for (step, &m) in moves.iter().enumerate() {
            state = puzzle.apply(&state, m).expect("dump replays recorded moves");
            pressed[m.index()] ^= true;
            let label = match config.label_mode {
                LabelMode::LastMove => puzzle.move_label(m).to_string(),
                LabelMode::MoveMultiset => pressed
                    .iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect(),
            };
            debug_assert_eq!(i * n + step < batch.inputs.rows(), true);
            out.push_str(&format!("{}\t{}\n", puzzle.format_state(&state), label));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzle::{Family, Metric, Puzzle, PuzzleSpec};

    fn cube3() -> Puzzle {
        Puzzle::new(PuzzleSpec::new(Family::Cube3, Metric::QuarterTurn))
    }

    fn cfg(n: usize, b: usize, seed: u64) -> ScrambleConfig {
        ScrambleConfig {
            scramble_length: n,
            batch_scrambles: b,
            label_mode: LabelMode::LastMove,
            seed,
        }
    }

    #[test]
    fn batch_shape_matches_config() {
        let p = cube3();
        let batch = generate_batch::<f32>(&p, &cfg(26, 10, 1)).unwrap();
        assert_eq!(batch.inputs.rows(), 260);
        assert_eq!(batch.inputs.cols(), 324);
        assert_eq!(batch.labels.len(), 260);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let p = cube3();
        let a = generate_batch::<f32>(&p, &cfg(8, 5, 42)).unwrap();
        let b = generate_batch::<f32>(&p, &cfg(8, 5, 42)).unwrap();
        assert_eq!(a.inputs.data(), b.inputs.data());
        assert_eq!(a.scrambles, b.scrambles);
        let c = generate_batch::<f32>(&p, &cfg(8, 5, 43)).unwrap();
        assert_ne!(a.scrambles, c.scrambles);
    }

    #[test]
    fn replaying_scrambles_reproduces_states() {
        let p = cube3();
        let config = cfg(12, 4, 7);
        let batch = generate_batch::<f32>(&p, &config).unwrap();
        for (i, moves) in batch.scrambles.iter().enumerate() {
            let mut s = p.goal();
            for (step, &m) in moves.iter().enumerate() {
                s = p.apply(&s, m).unwrap();
                let row = batch.inputs.row(i * config.scramble_length + step);
                assert_eq!(p.decode(row).unwrap(), s);
                match &batch.labels {
                    Labels::Classes(ys) => {
                        assert_eq!(ys[i * config.scramble_length + step], m.index() as u32);
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn no_filtered_pairs_in_scrambles() {
        let p = cube3();
        let batch = generate_batch::<f32>(&p, &cfg(26, 50, 3)).unwrap();
        for moves in &batch.scrambles {
            for w in moves.windows(2) {
                assert_ne!(w[1], p.inverse(w[0]), "adjacent self-canceling pair");
            }
            for w in moves.windows(3) {
                assert!(!(w[0] == w[1] && w[1] == w[2]), "triple repeat");
            }
        }
    }

    #[test]
    fn lights_multiset_labels_track_presses()  {
        let p = Puzzle::new(PuzzleSpec::new(Family::LightsOut(5), Metric::QuarterTurn));
        let config = ScrambleConfig {
            scramble_length: 10,
            batch_scrambles: 6,
            label_mode: LabelMode::MoveMultiset,
            seed: 5,
        };
        let batch = generate_batch::<f32>(&p, &config).unwrap();
        let Labels::Bits(bits) = &batch.labels else { panic!("multiset labels") };
        for (i, moves) in batch.scrambles.iter().enumerate() {
            // No repeats, so "odd count" is exactly "applied so far".
            let mut seen = std::collections::HashSet::new();
            for (step, &m) in moves.iter().enumerate() {
                assert!(seen.insert(m), "repeated press in scramble");
                let row = bits.row(i * 10 + step);
                for j in 0..25 {
                    let want = seen.contains(&crate::puzzle::Move(j as u16));
                    assert_eq!(row[j] == 1.0, want);
                }
            }
        }
    }

    #[test]
    fn path_probability_examples() {
        let p = cube3();
        let u = p.parse_move("U").unwrap();
        let up = p.parse_move("U'").unwrap();
        let r = p.parse_move("R").unwrap();
        assert!((scramble_path_probability(&p, &[u]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        // After U, only U' is filtered: 11 candidates.
        assert!(
            (scramble_path_probability(&p, &[u, r]).unwrap() - 1.0 / (12.0 * 11.0)).abs() < 1e-15
        );
        // UU is allowed (second repeat), UUU is not.
        assert!(scramble_path_probability(&p, &[u, u]).is_ok());
        assert!(matches!(
            scramble_path_probability(&p, &[u, up]),
            Err(Error::RedundantSequence { step: 1, .. })
        ));
        assert!(matches!(
            scramble_path_probability(&p, &[u, u, u]),
            Err(Error::RedundantSequence { step: 2, .. })
        ));
    }

    #[test]
    fn sliding_path_probability_counts_legal_moves() {
        let p = Puzzle::new(PuzzleSpec::new(Family::Sliding(3), Metric::QuarterTurn));
        // Goal has the blank in a corner: two legal first moves.
        let up = p.parse_move("U").unwrap();
        let left = p.parse_move("L").unwrap();
        assert!((scramble_path_probability(&p, &[up]).unwrap() - 0.5).abs() < 1e-15);
        // After U the blank sits on an edge: 3 legal, minus the inverse = 2.
        assert!((scramble_path_probability(&p, &[up, up]).unwrap() - 0.25).abs() < 1e-15);
        assert!((scramble_path_probability(&p, &[up, left]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn multiset_mode_rejected_off_lightsout() {
        let p = cube3();
        let config = ScrambleConfig {
            scramble_length: 4,
            batch_scrambles: 2,
            label_mode: LabelMode::MoveMultiset,
            seed: 0,
        };
        assert!(generate_batch::<f32>(&p, &config).is_err());
    }
}
