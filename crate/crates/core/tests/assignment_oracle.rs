mod common;

use common::{all_optimal_assignments, brute_force_assignment};
use egotrack::{solve, CostMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, integer: bool) -> CostMatrix {
    let rows = rng.random_range(1..=6);
    let cols = rng.random_range(1..=6);
    CostMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < 0.2 {
            f64::INFINITY
        } else if integer {
            rng.random_range(0..10) as f64
        } else {
            rng.random::<f64>() * 100.0
        }
    })
    .unwrap()
}

#[test]
fn matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..2000 {
        let m = random_matrix(&mut rng, case % 2 == 0);
        let a = solve(&m);
        let (card, cost, _) = brute_force_assignment(&m);
        assert_eq!(a.len(), card, "cardinality, case {case}: {m:?}");
        assert_eq!(a.total_cost(&m), cost, "cost, case {case}: {m:?}");
    }
}

#[test]
fn output_is_a_partial_permutation_of_finite_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let m = random_matrix(&mut rng, false);
        let a = solve(&m);
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols.dedup();
        assert_eq!(cols.len(), a.len());
        assert!(a.pairs.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(a.pairs.iter().all(|&(i, j)| m.get(i, j).is_finite()));
    }
}

#[test]
fn ties_resolve_to_one_of_the_optima() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let m = CostMatrix::from_fn(4, 4, |_, _| rng.random_range(0..3) as f64).unwrap();
        let a = solve(&m);
        assert!(all_optimal_assignments(&m).contains(&a.pairs));
        assert_eq!(solve(&m), a);
    }
}

fn square_matrix() -> impl Strategy<Value = (usize, Vec<u32>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(0u32..50, n * n)))
}

proptest! {
    #[test]
    fn permuting_rows_and_columns_permutes_the_answer(
        (n, data) in square_matrix(),
        row_seed in any::<u64>(),
        col_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let m = CostMatrix::from_row_major(n, n, data.iter().map(|&c| c as f64).collect()).unwrap();
        let mut pr: Vec<usize> = (0..n).collect();
        let mut pc: Vec<usize> = (0..n).collect();
        pr.shuffle(&mut ChaCha8Rng::seed_from_u64(row_seed));
        pc.shuffle(&mut ChaCha8Rng::seed_from_u64(col_seed));
        let permuted = CostMatrix::from_fn(n, n, |i, j| m.get(pr[i], pc[j])).unwrap();
        let a = solve(&m);
        let b = solve(&permuted);
        prop_assert_eq!(a.total_cost(&m), b.total_cost(&permuted));
        // Mapped back, b is an optimum of the original.
        let mut back: Vec<(usize, usize)> = b.pairs.iter().map(|&(i, j)| (pr[i], pc[j])).collect();
        back.sort_unstable();
        prop_assert!(all_optimal_assignments(&m).contains(&back));
    }

    #[test]
    fn constant_shift_keeps_the_optimal_set(
        (n, data) in square_matrix(),
        shift in 0u32..1000,
    ) {
        let m = CostMatrix::from_row_major(n, n, data.iter().map(|&c| c as f64).collect()).unwrap();
        let shifted = CostMatrix::from_row_major(n, n, data.iter().map(|&c| (c + shift) as f64).collect()).unwrap();
        let mut a = all_optimal_assignments(&m);
        let mut b = all_optimal_assignments(&shifted);
        a.sort();
        b.sort();
        prop_assert_eq!(&a, &b);
        prop_assert!(b.contains(&solve(&shifted).pairs));
    }

    #[test]
    fn gating_never_adds_pairs_above_the_threshold(
        (n, data) in square_matrix(),
        tau in 0u32..50,
    ) {
        let m = CostMatrix::from_row_major(n, n, data.iter().map(|&c| c as f64).collect()).unwrap().gate(tau as f64);
        let a = solve(&m);
        prop_assert!(a.pairs.iter().all(|&(i, j)| m.get(i, j) <= tau as f64));
    }
}
