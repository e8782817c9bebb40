use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gapfill::metrics::{direct_measure, neighbor_measure, perfect};
use gapfill::pairgen::Direction;
use gapfill::placer::{self, best_buddies, compatibility, Board, FrameMode, PlaceOptions};
use gapfill::puzzle::{erode, permutation, shuffle, slice_image, Solution};
use gapfill::scorer::{self, DissimilarityTensor, ScorerKind, TensorMeta};

fn meta() -> TensorMeta {
    TensorMeta {
        scorer: ScorerKind::Baseline,
        checkpoint: None,
        seed: None,
        erosion_width: 0,
        piece_size: 0,
    }
}

fn random_tensor(n: usize, seed: u64, levels: u32) -> DissimilarityTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DissimilarityTensor::from_fn(n, meta(), |_, _, _| {
        if levels > 0 {
            rng.gen_range(0..levels) as f64
        } else {
            rng.gen_range(0.0..5.0)
        }
    })
}

fn grid() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4, 1usize..=5).prop_filter("at least two pieces", |(r, c)| r * c >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn baseline_tensor_is_symmetric((rows, cols) in grid(), seed in any::<u64>(), pct in prop::sample::select(vec![0.0, 0.07, 0.14, 0.25])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = image::RgbImage::from_fn(cols as u32 * 16, rows as u32 * 16, |_, _| image::Rgb(rng.gen()));
        let (b, s) = slice_image(&img, 16).unwrap();
        let (b, _) = shuffle(&erode(&b, pct).unwrap(), &s, seed);
        let t = scorer::baseline_dissimilarity(&b).unwrap();
        prop_assert!(t.validate().is_ok());
        for x in 0..t.n() {
            for d in Direction::ALL {
                prop_assert_eq!(t.get(x, x, d), f64::INFINITY);
                for y in (0..t.n()).filter(|&y| y != x) {
                    prop_assert_eq!(t.get(x, y, d), t.get(y, x, d.opposite()));
                    prop_assert!(t.get(x, y, d) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn placement_is_a_bijection((rows, cols) in grid(), seed in any::<u64>(), levels in 0u32..4, unbounded in any::<bool>(), tie_seed in prop::option::of(any::<u64>())) {
        let n = rows * cols;
        let t = random_tensor(n, seed, levels);
        let opts = PlaceOptions {
            frame: if unbounded { FrameMode::Unbounded } else { FrameMode::Constrained },
            rows,
            cols,
            tiebreak_seed: tie_seed,
        };
        let board = placer::solve(&t, &opts).unwrap();
        let mut seen = vec![false; n];
        for p in board.cells().iter().flatten() {
            prop_assert!(!seen[*p], "piece {} placed twice", p);
            seen[*p] = true;
        }
        prop_assert!(seen.iter().all(|s| *s));
        if unbounded {
            let l = rows.max(cols);
            prop_assert!(board.rows <= l && board.cols <= l);
        } else {
            prop_assert_eq!((board.rows, board.cols), (rows, cols));
        }
        // determinism
        prop_assert_eq!(placer::solve(&t, &opts).unwrap(), board);
    }

    #[test]
    fn placement_ignores_positive_scaling((rows, cols) in grid(), seed in any::<u64>(), exp in -8i32..8) {
        let t = random_tensor(rows * cols, seed, 0);
        let k = 2f64.powi(exp);
        let mut scaled = t.clone();
        for x in 0..t.n() {
            for y in (0..t.n()).filter(|&y| y != x) {
                for d in [Direction::Right, Direction::Down] {
                    scaled.set_pair(x, y, d, t.get(x, y, d) * k);
                }
            }
        }
        let opts = PlaceOptions::constrained(rows, cols);
        prop_assert_eq!(placer::solve(&t, &opts).unwrap(), placer::solve(&scaled, &opts).unwrap());
    }

    #[test]
    fn best_buddies_are_mutual(n in 2usize..9, seed in any::<u64>(), levels in 0u32..3) {
        let c = compatibility(&random_tensor(n, seed, levels)).unwrap();
        let buddies = best_buddies(&c);
        for &(x, y, d) in &buddies {
            prop_assert!(buddies.contains(&(y, x, d.opposite())));
        }
    }

    #[test]
    fn metrics_ignore_relabeling((rows, cols) in grid(), seed in any::<u64>()) {
        let n = rows * cols;
        let sol = Solution::identity(rows, cols);
        let order = permutation(n, seed);
        let board = Board::from_cells(rows, cols, order.iter().map(|&p| Some(p)).collect(), FrameMode::Constrained).unwrap();
        let relabel = permutation(n, seed ^ 0xFFFF);
        let board2 = Board::from_cells(rows, cols, order.iter().map(|&p| Some(relabel[p])).collect(), FrameMode::Constrained).unwrap();
        let mut slots2 = vec![(0, 0); n];
        for (p, &slot) in sol.slots.iter().enumerate() {
            slots2[relabel[p]] = slot;
        }
        let sol2 = Solution { rows, cols, slots: slots2 };
        let nb = neighbor_measure(&board, &sol).unwrap();
        let dm = direct_measure(&board, &sol).unwrap();
        prop_assert_eq!(nb, neighbor_measure(&board2, &sol2).unwrap());
        prop_assert_eq!(dm, direct_measure(&board2, &sol2).unwrap());
        prop_assert!((0.0..=1.0).contains(&nb) && (0.0..=1.0).contains(&dm));
        if perfect(&board, &sol).unwrap() {
            prop_assert_eq!(nb, 1.0);
        }
    }

    #[test]
    fn neighbor_measure_ignores_translation((rows, cols) in grid(), dr in 0usize..3, dc in 0usize..3) {
        let sol = Solution::identity(rows, cols);
        let l = rows.max(cols) + 2;
        let mut b = Board::empty(l, l, FrameMode::Unbounded);
        for (p, &(r, c)) in sol.slots.iter().enumerate() {
            b.set(r + dr, c + dc, Some(p));
        }
        prop_assert_eq!(neighbor_measure(&b, &sol).unwrap(), 1.0);
        prop_assert_eq!(direct_measure(&b, &sol).unwrap(), 1.0);
    }

    // two pieces have no runner-up, so every compatibility is -inf and the
    // order falls to the tie-break; three or more are enough
    #[test]
    fn oracle_always_reconstructs((rows, cols) in grid().prop_filter("three or more pieces", |(r, c)| r * c >= 3), seed in any::<u64>()) {
        let n = rows * cols;
        let slots: Vec<(usize, usize)> = permutation(n, seed).into_iter().map(|i| (i / cols, i % cols)).collect();
        let sol = Solution { rows, cols, slots };
        let t = scorer::oracle_dissimilarity(&sol, n).unwrap();
        let b = placer::solve(&t, &PlaceOptions::constrained(rows, cols)).unwrap();
        prop_assert!(perfect(&b, &sol).unwrap());
    }
}
