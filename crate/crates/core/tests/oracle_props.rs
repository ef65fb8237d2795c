//! Oracle correctness: exhaustive enumeration counts, distance-table
//! persistence, IDA* against BFS ground truth, pattern-heuristic
//! admissibility, and the GF(2) Lights Out solver against brute force.

use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unscramble_core::oracle::{
    bfs_enumerate, ida_star, lightsout_kernel_dim, lightsout_optimal, optimality_rate,
    pattern_heuristic, Abstraction, DistanceTable, LightsOutOracle, OptimalLen, ZeroHeuristic,
};
use unscramble_core::solver::SearchResult;
use unscramble_core::{Error, Family, Metric, Move, Puzzle, PuzzleSpec};

fn puzzle(family: Family) -> Puzzle {
    Puzzle::new(PuzzleSpec::new(family, Metric::QuarterTurn))
}

static SLIDING3: LazyLock<(Puzzle, DistanceTable)> = LazyLock::new(|| {
    let p = puzzle(Family::Sliding(3));
    let t = bfs_enumerate(&p, 1_000_000).unwrap();
    (p, t)
});

static CUBE2: LazyLock<(Puzzle, DistanceTable)> = LazyLock::new(|| {
    let p = puzzle(Family::Cube2);
    let t = bfs_enumerate(&p, 5_000_000).unwrap();
    (p, t)
});

#[test]
fn sliding3_enumeration() {
    let (p, table) = &*SLIDING3;
    assert_eq!(table.state_count(), 181_440);
    assert_eq!(table.max_depth(), 31);
    assert_eq!(table.distance(p, &p.goal()), Some(0));
}

#[test]
fn cube2_enumeration() {
    let (p, table) = &*CUBE2;
    assert_eq!(table.state_count(), 3_674_160);
    assert_eq!(table.max_depth(), 14); // quarter-turn God's Number for 2x2x2
    assert_eq!(table.distance(p, &p.goal()), Some(0));
}

#[test]
fn table_local_consistency() {
    // Neighboring states differ by at most one move of optimal distance.
    let (p, table) = &*SLIDING3;
    let states = table.sample_states(p, 300, 0xc0);
    for s in &states {
        let d = table.distance(p, s).unwrap() as i64;
        for m in p.moves() {
            if !p.is_legal(s, m) {
                continue;
            }
            let t = p.apply(s, m).unwrap();
            let dt = table.distance(p, &t).unwrap() as i64;
            assert!((d - dt).abs() <= 1, "d={d} dt={dt}");
        }
    }
}

#[test]
fn budget_guard_trips() {
    let p = puzzle(Family::Sliding(3));
    assert!(matches!(
        bfs_enumerate(&p, 1000),
        Err(Error::StateSpaceTooLarge { .. })
    ));
    // The 3x3x3 cube has no compact key and is never enumerable here.
    let c3 = puzzle(Family::Cube3);
    assert!(bfs_enumerate(&c3, usize::MAX).is_err());
}

#[test]
fn table_save_load_round_trip() {
    let p = puzzle(Family::Sliding(2));
    let table = bfs_enumerate(&p, 100).unwrap();
    assert_eq!(table.state_count(), 12); // 4!/2
    let dir = std::env::temp_dir().join(format!("uscr-table-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sliding2.uscr");
    table.save(&path).unwrap();
    let loaded = DistanceTable::load(&path).unwrap();
    assert_eq!(loaded.state_count(), table.state_count());
    assert_eq!(loaded.max_depth(), table.max_depth());
    let states = table.sample_states(&p, 12, 3);
    for s in &states {
        assert_eq!(loaded.distance(&p, s), table.distance(&p, s));
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn ida_zero_heuristic_matches_bfs_on_sliding3() {
    let (p, table) = &*SLIDING3;
    let states = table.sample_states(p, 100, 0x1da);
    for s in &states {
        let res = ida_star(p, s, &ZeroHeuristic, 200_000_000).unwrap();
        assert_eq!(res.solution.len() as u32, table.distance(p, s).unwrap());
        assert!(unscramble_core::solver::verify_solution(p, s, &res.solution).unwrap());
    }
}

#[test]
fn ida_goal_is_empty_solution() {
    let (p, _) = &*SLIDING3;
    let res = ida_star(p, &p.goal(), &ZeroHeuristic, 1000).unwrap();
    assert!(res.solution.is_empty());
}

#[test]
fn ida_budget_exceeded() {
    let (p, table) = &*SLIDING3;
    let deep = table.sample_states(p, 50, 7);
    let hard = deep
        .iter()
        .max_by_key(|s| table.distance(p, s).unwrap())
        .unwrap();
    assert!(matches!(
        ida_star(p, hard, &ZeroHeuristic, 10),
        Err(Error::BudgetExceeded { .. })
    ));
}

#[test]
fn exact_table_heuristic_expands_fewer_nodes() {
    // With h = exact distances, IDA* only walks optimal-f contours; node
    // counts can never exceed the zero-heuristic run on the same state.
    let (p, table) = &*SLIDING3;
    let states = table.sample_states(p, 40, 0xbeef);
    for s in &states {
        let zero = ida_star(p, s, &ZeroHeuristic, 500_000_000).unwrap();
        let exact = ida_star(p, s, table, 500_000_000).unwrap();
        assert_eq!(zero.solution.len(), exact.solution.len());
        assert!(
            exact.nodes_expanded <= zero.nodes_expanded,
            "exact {} > zero {}",
            exact.nodes_expanded,
            zero.nodes_expanded
        );
    }
}

#[test]
fn sliding_pattern_heuristic_admissible_everywhere() {
    let (p, table) = &*SLIDING3;
    let h = pattern_heuristic(p, Abstraction::TileSubset(vec![1, 2, 3]), 100_000).unwrap();
    // Blank + 3 tracked tiles over 9 cells: 9*8*7*6 abstract states.
    assert_eq!(h.table_len(), 3024);
    use unscramble_core::oracle::Heuristic;
    assert_eq!(h.estimate(p, &p.goal()), 0);
    // Exhaustive admissibility over the whole space.
    let all = table.sample_states(p, table.state_count(), 0);
    for s in &all {
        let est = h.estimate(p, s);
        let d = table.distance(p, s).unwrap();
        assert!(est <= d, "h={est} > d={d}");
    }
}

#[test]
fn sliding_pattern_ida_matches_bfs() {
    let (p, table) = &*SLIDING3;
    let h = pattern_heuristic(p, Abstraction::TileSubset(vec![1, 2, 3, 4]), 100_000).unwrap();
    let states = table.sample_states(p, 120, 0xabc);
    for s in &states {
        let res = ida_star(p, s, &h, 500_000_000).unwrap();
        assert_eq!(res.solution.len() as u32, table.distance(p, s).unwrap());
    }
}

#[test]
fn cube2_pattern_heuristic() {
    let (p, table) = &*CUBE2;
    let h = pattern_heuristic(p, Abstraction::CornerSubset(vec![0, 1, 2, 3, 4]), 1_000_000)
        .unwrap();
    // 5 tracked cubies over the 7 movable slots with free orientations:
    // 7*6*5*4*3 * 3^5 abstract states.
    assert_eq!(h.table_len(), 612_360);
    use unscramble_core::oracle::Heuristic;
    assert_eq!(h.estimate(p, &p.goal()), 0);

    let states = table.sample_states(p, 5000, 0xdef);
    for s in &states {
        assert!(h.estimate(p, s) <= table.distance(p, s).unwrap());
    }
    for s in &states[..40] {
        let res = ida_star(p, s, &h, 500_000_000).unwrap();
        assert_eq!(res.solution.len() as u32, table.distance(p, s).unwrap());
    }
}

#[test]
fn cube3_corner_heuristic() {
    let p = puzzle(Family::Cube3);
    let h = pattern_heuristic(&p, Abstraction::Cube3Corners, 5_000_000).unwrap();
    // The corner quotient is exactly the fixed-corner 2x2x2 space.
    assert_eq!(h.table_len(), 3_674_160);
    use unscramble_core::oracle::Heuristic;
    assert_eq!(h.estimate(&p, &p.goal()), 0);

    // h is bounded by any witnessed path length.
    let mut rng = ChaCha8Rng::seed_from_u64(0xcc);
    for _ in 0..50 {
        let len = rng.gen_range(0..=12);
        let (moves, states) = unscramble_core::scramble::sample_scramble(&p, len, rng.gen());
        let s = states.last().cloned().unwrap_or_else(|| p.goal());
        assert!(
            h.estimate(&p, &s) as usize <= moves.len(),
            "h exceeds witnessed distance"
        );
    }

    // Short scrambles solve optimally-or-better with the corner heuristic.
    for seed in 0..10 {
        let (moves, states) = unscramble_core::scramble::sample_scramble(&p, 5, 7000 + seed);
        let s = states.last().unwrap().clone();
        let res = ida_star(&p, &s, &h, 500_000_000).unwrap();
        assert!(res.solution.len() <= moves.len());
        assert!(unscramble_core::solver::verify_solution(&p, &s, &res.solution).unwrap());
    }
}

#[test]
fn lightsout3_gf2_matches_bfs_everywhere() {
    // 3x3 has a trivial kernel: every state is solvable with a unique press
    // set, and minimum weight equals BFS distance over single presses.
    let p = puzzle(Family::LightsOut(3));
    assert_eq!(lightsout_kernel_dim(&p), 0);
    let table = bfs_enumerate(&p, 1000).unwrap();
    assert_eq!(table.state_count(), 512);
    let all = table.sample_states(&p, 512, 0);
    for s in &all {
        let presses = lightsout_optimal(&p, s).unwrap();
        assert_eq!(presses.len() as u32, table.distance(&p, s).unwrap());
        // Replay reaches the goal; no repeats.
        let mut state = s.clone();
        for &m in &presses {
            state = p.apply(&state, m).unwrap();
        }
        assert!(p.is_goal(&state));
        let unique: std::collections::HashSet<_> = presses.iter().collect();
        assert_eq!(unique.len(), presses.len());
    }
}

#[test]
fn lightsout4_gf2_full_sweep() {
    // 4x4 has a 4-dimensional kernel: 4096 solvable states out of 65536.
    // The GF(2) minimum must equal BFS distance on solvable states and
    // report Unsolvable exactly on the rest.
    let p = puzzle(Family::LightsOut(4));
    assert_eq!(lightsout_kernel_dim(&p), 4);
    let table = bfs_enumerate(&p, 100_000).unwrap();
    assert_eq!(table.state_count(), 4096);
    for raw in 0..(1u32 << 16) {
        let cells: Vec<u8> = (0..16).map(|i| ((raw >> i) & 1) as u8).collect();
        let s = p.validate_cells(cells).unwrap();
        match lightsout_optimal(&p, &s) {
            Ok(presses) => {
                let d = table
                    .distance(&p, &s)
                    .expect("solvable states are reachable by presses");
                assert_eq!(presses.len() as u32, d);
            }
            Err(Error::Unsolvable) => {
                assert_eq!(table.distance(&p, &s), None);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}

#[test]
fn lightsout5_kernel_and_weight_bound() {
    let p = puzzle(Family::LightsOut(5));
    assert_eq!(lightsout_kernel_dim(&p), 2);
    assert_eq!(lightsout_kernel_dim(&puzzle(Family::LightsOut(7))), 0);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5a);
    for _ in 0..100 {
        // Random press subsets are always solvable.
        let mut s = p.goal();
        for j in 0..25u16 {
            if rng.gen_bool(0.5) {
                s = p.apply(&s, Move(j)).unwrap();
            }
        }
        let presses = lightsout_optimal(&p, &s).unwrap();
        assert!(presses.len() <= 25);
        let mut state = s.clone();
        for &m in &presses {
            state = p.apply(&state, m).unwrap();
        }
        assert!(p.is_goal(&state));
    }

    // All-off needs zero presses.
    assert!(lightsout_optimal(&p, &p.goal()).unwrap().is_empty());
    // One press is undone by exactly that press.
    let one = p.apply(&p.goal(), Move(12)).unwrap();
    assert_eq!(lightsout_optimal(&p, &one).unwrap(), vec![Move(12)]);
}

#[test]
fn optimality_rate_contract() {
    let (p, table) = &*SLIDING3;
    let states = table.sample_states(p, 10, 0xaa);
    let solved = |len: usize| SearchResult {
        solved: true,
        solution: Vec::new(),
        length: len,
        nodes_expanded: 0,
        score: 0.0,
        wall_time: 0.0,
    };
    let results: Vec<_> = states
        .iter()
        .map(|s| (s.clone(), solved(table.distance(p, s).unwrap() as usize)))
        .collect();
    assert_eq!(optimality_rate(p, &results, table).unwrap(), 100.0);

    // One suboptimal length drops the rate to 90%.
    let mut off = results.clone();
    off[0].1.length += 2;
    assert_eq!(optimality_rate(p, &off, table).unwrap(), 90.0);

    // Empty input is an error, not zero.
    assert!(matches!(
        optimality_rate(p, &[], table),
        Err(Error::EmptyResults)
    ));

    // The lights-out oracle plugs into the same interface.
    let lp = puzzle(Family::LightsOut(5));
    let one = lp.apply(&lp.goal(), Move(3)).unwrap();
    let lr = vec![(one, solved(1))];
    assert_eq!(optimality_rate(&lp, &lr, &LightsOutOracle).unwrap(), 100.0);
}
