//! Backward search to the goal guided by the trained network.
//!
//! At each depth every surviving candidate state is scored by the network:
//! the predicted distribution over *scramble* moves tells us how likely each
//! move was the last one applied, the child undoes that move (applies its
//! inverse), and the child's score adds the move's log-probability. The top
//! k candidates by cumulative log-probability survive to the next depth
//! (beam search); k = 1 is greedy. Scoring is done in log space, so the
//! ranking matches the cumulative product of probabilities.

use std::time::Instant;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::nn::{Mat, ModelBundle, OutputHead, Scalar};
use crate::oracle::OptimalLen;
use crate::puzzle::{Family, Move, Puzzle, State};

/// Outcome of one search. `solved == false` means no candidate reached the
/// goal within `max_depth` (beam search is not complete); diagnostics are
/// retained in `nodes_expanded`, `score`, and `wall_time`.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub solved: bool,
    /// Moves that take the start state to the goal.
    pub solution: Vec<Move>,
    pub length: usize,
    /// Children scored by the network during the search.
    pub nodes_expanded: u64,
    /// Sum of log-probabilities along the solution (or best surviving path).
    pub score: f64,
    pub wall_time: f64,
}

/// Default search horizon: twice the God's-Number hint.
pub fn default_max_depth(puzzle: &Puzzle) -> Option<usize> {
    puzzle.spec().gods_number_hint().map(|g| 2 * g as usize)
}

struct PathArena {
    nodes: Vec<(u32, u16)>,
}

const ROOT: u32 = u32::MAX;

impl PathArena {
    fn new() -> Self {
        PathArena { nodes: Vec::new() }
    }

    fn push(&mut self, parent: u32, mv: Move) -> u32 {
        self.nodes.push((parent, mv.0));
        (self.nodes.len() - 1) as u32
    }

    /// Predicted scramble moves from depth 1 to this node, in search order.
    fn history(&self, mut node: u32) -> Vec<Move> {
        let mut moves = Vec::new();
        while node != ROOT {
            let (parent, mv) = self.nodes[node as usize];
            moves.push(Move(mv));
            node = parent;
        }
        moves.reverse();
        moves
    }
}

struct Candidate {
    state: State,
    score: f64,
    node: u32,
}

/// Per-state log-probabilities of each scramble move, from the model head.
fn score_pool<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    states: &[&State],
) -> Result<Vec<Vec<f64>>> {
    const CHUNK: usize = 4096;
    let dim = puzzle.encoding_dim();
    let mut out = Vec::with_capacity(states.len());
    for chunk in states.chunks(CHUNK) {
        let mut inputs = Mat::<F>::zeros(chunk.len(), dim);
        for (i, s) in chunk.iter().enumerate() {
            puzzle.encode_into(s, inputs.row_mut(i));
        }
        let logits = bundle.forward_eval(&inputs)?;
        for b in 0..chunk.len() {
            let z = logits.row(b);
            let row: Vec<f64> = match bundle.config.head {
                OutputHead::SoftmaxCategorical => {
                    let zmax = z.iter().cloned().fold(F::neg_infinity(), F::max);
                    let mut sum = 0.0f64;
                    for &v in z {
                        sum += (v - zmax).into_f64().exp();
                    }
                    let lse = zmax.into_f64() + sum.ln();
                    z.iter().map(|&v| v.into_f64() - lse).collect()
                }
                OutputHead::SigmoidMultilabel => z
                    .iter()
                    .map(|&v| {
                        // ln sigmoid(z), stable.
                        let zf = v.into_f64();
                        zf.min(0.0) - (-zf.abs()).exp().ln_1p()
                    })
                    .collect(),
            };
            out.push(row);
        }
    }
    Ok(out)
}

/// Depth-synchronous beam search with deterministic tie-breaking: on equal
/// scores the earlier (parent order, move index) child wins. Duplicate
/// states within a depth are merged keeping the best score. The same
/// redundancy filter used during training prunes continuations the model
/// never saw.
pub fn beam_search<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    start: &State,
    width: usize,
    max_depth: usize,
) -> Result<SearchResult> {
    if width == 0 {
        return Err(Error::Parse("beam width must be at least 1".into()));
    }
    let t0 = Instant::now();
    let goal = puzzle.goal();
    if *start == goal {
        return Ok(SearchResult {
            solved: true,
            solution: Vec::new(),
            length: 0,
            nodes_expanded: 0,
            score: 0.0,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }

    let mut arena = PathArena::new();
    let mut pool = vec![Candidate { state: start.clone(), score: 0.0, node: ROOT }];
    let mut nodes = 0u64;

    for _depth in 1..=max_depth {
        if pool.is_empty() {
            break;
        }
        let states: Vec<&State> = pool.iter().map(|c| &c.state).collect();
        let logp = score_pool(bundle, puzzle, &states)?;

        let mut children: Vec<Candidate> = Vec::with_capacity(pool.len() * puzzle.move_count());
        let mut alive: Vec<bool> = Vec::with_capacity(children.capacity());
        let mut by_state: FxHashMap<Box<[u8]>, usize> = FxHashMap::default();

        for (pi, parent) in pool.iter().enumerate() {
            let history = arena.history(parent.node);
            for m in puzzle.moves() {
                if puzzle.redundant(&history, m) {
                    continue;
                }
                let undo = puzzle.inverse(m);
                if !puzzle.is_legal(&parent.state, undo) {
                    continue;
                }
                let child_state = puzzle.apply(&parent.state, undo)?;
                nodes += 1;
                let score = parent.score + logp[pi][m.index()];
                if child_state == goal {
                    let mut solution: Vec<Move> =
                        history.iter().map(|&p| puzzle.inverse(p)).collect();
                    solution.push(undo);
                    let length = solution.len();
                    return Ok(SearchResult {
                        solved: true,
                        solution,
                        length,
                        nodes_expanded: nodes,
                        score,
                        wall_time: t0.elapsed().as_secs_f64(),
                    });
                }
                let key: Box<[u8]> = child_state.cells().into();
                match by_state.entry(key) {
                    std::collections::hash_map::Entry::Occupied(e) => {
                        let prev = *e.get();
                        if score > children[prev].score {
                            alive[prev] = false;
                            let node = arena.push(parent.node, m);
                            children.push(Candidate { state: child_state, score, node });
                            alive.push(true);
                            *e.into_mut() = children.len() - 1;
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        let node = arena.push(parent.node, m);
                        children.push(Candidate { state: child_state, score, node });
                        alive.push(true);
                        e.insert(children.len() - 1);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..children.len()).filter(|&i| alive[i]).collect();
        order.sort_by(|&a, &b| {
            children[b]
                .score
                .total_cmp(&children[a].score)
                .then(a.cmp(&b))
        });
        order.truncate(width);
        let mut survivors = Vec::with_capacity(order.len());
        let mut taken: Vec<Option<Candidate>> = children.into_iter().map(Some).collect();
        for i in order {
            survivors.push(taken[i].take().expect("indices are unique"));
        }
        pool = survivors;
    }

    let best_score = pool
        .iter()
        .map(|c| c.score)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SearchResult {
        solved: false,
        solution: Vec::new(),
        length: 0,
        nodes_expanded: nodes,
        score: best_score,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

/// Greedy multilabel solve for Lights Out: repeatedly press the
/// not-yet-pressed move with the highest predicted probability (presses are
/// involutions, so the press itself undoes the scramble move). Expands only
/// the chosen node at each step.
pub fn greedy_lightsout<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    start: &State,
) -> Result<SearchResult> {
    if bundle.config.head != OutputHead::SigmoidMultilabel {
        return Err(Error::ShapeMismatch(
            "greedy lights-out solving needs a multilabel-head model".into(),
        ));
    }
    if !matches!(puzzle.spec().family, Family::LightsOut(_)) {
        return Err(Error::Parse(format!(
            "{} is not a lights-out puzzle",
            puzzle.spec()
        )));
    }
    let t0 = Instant::now();
    let goal = puzzle.goal();
    let mut state = start.clone();
    let mut pressed = vec![false; puzzle.move_count()];
    let mut solution = Vec::new();
    let mut score = 0.0f64;
    let mut nodes = 0u64;

    while state != goal {
        if pressed.iter().all(|&p| p) {
            return Ok(SearchResult {
                solved: false,
                solution: Vec::new(),
                length: 0,
                nodes_expanded: nodes,
                score,
                wall_time: t0.elapsed().as_secs_f64(),
            });
        }
        let logp = &score_pool(bundle, puzzle, &[&state])?[0];
        let best = (0..puzzle.move_count())
            .filter(|&j| !pressed[j])
            .max_by(|&a, &b| logp[a].total_cmp(&logp[b]).then(b.cmp(&a)))
            .expect("an unpressed move exists");
        let m = Move(best as u16);
        state = puzzle.apply(&state, m)?;
        pressed[best] = true;
        solution.push(m);
        score += logp[best];
        nodes += 1;
    }

    let length = solution.len();
    Ok(SearchResult {
        solved: true,
        solution,
        length,
        nodes_expanded: nodes,
        score,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

/// True iff folding `apply` over `solution` from `start` reaches the goal.
pub fn verify_solution(puzzle: &Puzzle, start: &State, solution: &[Move]) -> Result<bool> {
    let mut state = start.clone();
    for &m in solution {
        state = puzzle.apply(&state, m)?;
    }
    Ok(puzzle.is_goal(&state))
}

/// One evaluation case.
#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub id: String,
    pub state: State,
}

#[derive(Clone, Debug)]
pub struct CaseRow {
    pub case_id: String,
    pub width: usize,
    pub result: SearchResult,
    pub optimal_length: Option<usize>,
}

/// Aggregates over one beam width: mean length over solved cases,
/// optimality over all cases (unsolved counts as non-optimal), mean nodes
/// and seconds over all cases.
#[derive(Clone, Debug)]
pub struct WidthSummary {
    pub width: usize,
    pub cases: usize,
    pub solved: usize,
    pub mean_length: Option<f64>,
    pub optimality_pct: Option<f64>,
    pub mean_nodes: f64,
    pub mean_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct WidthReport {
    pub rows: Vec<CaseRow>,
    pub summary: WidthSummary,
}

/// Greedy evaluation over a case set (multilabel models). Rows are
/// reported at width 1: greedy keeps a single candidate per depth.
pub fn greedy_suite<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    cases: &[SuiteCase],
    oracle: Option<&dyn OptimalLen>,
) -> Result<WidthReport> {
    let rows: Vec<CaseRow> = cases
        .par_iter()
        .map(|case| -> Result<CaseRow> {
            let result = greedy_lightsout(bundle, puzzle, &case.state)?;
            let optimal_length = match oracle {
                Some(o) => Some(o.optimal_len(puzzle, &case.state)?),
                None => None,
            };
            Ok(CaseRow { case_id: case.id.clone(), width: 1, result, optimal_length })
        })
        .collect::<Result<_>>()?;
    Ok(WidthReport { summary: summarize(1, &rows), rows })
}

/// Solve every case at every width. Cases within a width run in parallel
/// over a shared read-only model; rows keep case order.
pub fn solve_suite<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    cases: &[SuiteCase],
    widths: &[usize],
    max_depth: usize,
    oracle: Option<&dyn OptimalLen>,
) -> Result<Vec<WidthReport>> {
    let mut reports = Vec::with_capacity(widths.len());
    for &width in widths {
        let rows: Vec<CaseRow> = cases
            .par_iter()
            .map(|case| -> Result<CaseRow> {
                let result = beam_search(bundle, puzzle, &case.state, width, max_depth)?;
                let optimal_length = match oracle {
                    Some(o) => Some(o.optimal_len(puzzle, &case.state)?),
                    None => None,
                };
                Ok(CaseRow { case_id: case.id.clone(), width, result, optimal_length })
            })
            .collect::<Result<_>>()?;
        reports.push(WidthReport { summary: summarize(width, &rows), rows });
    }
    Ok(reports)
}

pub fn summarize(width: usize, rows: &[CaseRow]) -> WidthSummary {
    let cases = rows.len();
    let solved_rows: Vec<&CaseRow> = rows.iter().filter(|r| r.result.solved).collect();
    let solved = solved_rows.len();
    let mean_length = (solved > 0).then(|| {
        solved_rows.iter().map(|r| r.result.length as f64).sum::<f64>() / solved as f64
    });
    let have_oracle = rows.iter().all(|r| r.optimal_length.is_some()) && cases > 0;
    let optimality_pct = have_oracle.then(|| {
        let optimal = rows
            .iter()
            .filter(|r| r.result.solved && Some(r.result.length) == r.optimal_length)
            .count();
        100.0 * optimal as f64 / cases as f64
    });
    let mean_nodes = if cases > 0 {
        rows.iter().map(|r| r.result.nodes_expanded as f64).sum::<f64>() / cases as f64
    } else {
        0.0
    };
    let mean_seconds = if cases > 0 {
        rows.iter().map(|r| r.result.wall_time).sum::<f64>() / cases as f64
    } else {
        0.0
    };
    WidthSummary {
        width,
        cases,
        solved,
        mean_length,
        optimality_pct,
        mean_nodes,
        mean_seconds,
    }
}
