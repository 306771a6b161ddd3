use metricfit::grid::Grid;
use metricfit::instance::{emv_objective, gen_planted, gen_random_nonmetric, gen_rank_one, load_emv, lra_objective};
use metricfit::oracle::{brute_force_emv, brute_force_lra, filtered_brute_force_lra, grid_points, local_search_emv, MAX_STATES};
use metricfit::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain nested enumeration over every grid assignment.
fn naive_emv_opt(d: &[Vec<f64>], vals: &[f64]) -> f64 {
    let inst = load_emv(d, 1).unwrap();
    let n = inst.n();
    let q = vals.len();
    let mut best = f64::INFINITY;
    for code in 0..q.pow(n as u32) {
        let mut c = code;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v = vals[c % q];
                c /= q;
                vec![v]
            })
            .collect();
        best = best.min(emv_objective(&inst, &x).unwrap());
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn brute_force_matches_naive_enumeration(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = gen_random_nonmetric(4, 3.0, &mut rng).unwrap();
        let vals = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let (best, opt) = brute_force_emv(&inst, &Grid::custom(vals).unwrap(), MAX_STATES).unwrap();
        let naive = naive_emv_opt(&inst.matrix(), &vals);
        prop_assert!((opt - naive).abs() <= 1e-12 * naive.max(1.0));
        prop_assert!((emv_objective(&inst, &best.points).unwrap() - opt).abs() <= 1e-12 * opt.max(1.0));
    }

    #[test]
    fn oracle_ignores_point_order(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = gen_random_nonmetric(4, 3.0, &mut rng).unwrap();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let d = inst.matrix();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| d[i][j]).collect()).collect();
        let grid = Grid::custom([-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let (_, a) = brute_force_emv(&inst, &grid, MAX_STATES).unwrap();
        let (_, b) = brute_force_emv(&load_emv(&permuted, 1).unwrap(), &grid, MAX_STATES).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn filtered_never_beats_unfiltered(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = gen_rank_one(2, 3, 2, 0.7, &mut rng).unwrap();
        let grid = Grid::custom([-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let (best, opt) = brute_force_lra(&inst, &grid, MAX_STATES).unwrap();
        let su: f64 = best.u.iter().map(|x| x * x).sum();
        let sv: f64 = best.v.iter().map(|x| x * x).sum();
        let (_, at_argmin) = filtered_brute_force_lra(&inst, &grid, su, sv, MAX_STATES).unwrap().unwrap();
        prop_assert!((at_argmin - opt).abs() <= 1e-12 * opt.max(1.0));
        for (a, b) in [(1.0, 4.0), (4.0, 1.0), (2.0, 2.0)] {
            if let Some((r, f)) = filtered_brute_force_lra(&inst, &grid, a, b, MAX_STATES).unwrap() {
                prop_assert!(f >= opt - 1e-12);
                prop_assert!((lra_objective(&inst, &r.u, &r.v).unwrap() - f).abs() <= 1e-12 * f.max(1.0));
            }
        }
    }
}

#[test]
fn planted_optimum_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let planted = gen_planted(5, 1, 0.0, &mut rng).unwrap();
    let mut vals: Vec<f64> = planted.points.iter().map(|p| p[0]).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let (_, opt) = brute_force_emv(&planted.instance, &Grid::custom(vals).unwrap(), MAX_STATES).unwrap();
    assert!(opt <= 1e-12);
}

#[test]
fn local_search_improves_on_collapsed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = gen_random_nonmetric(5, 4.0, &mut rng).unwrap();
    let collapsed = emv_objective(&inst, &vec![vec![0.0]; 5]).unwrap();
    assert!(collapsed <= inst.mean_sq() + 1e-12);
    let ls = local_search_emv(&inst, 3, &mut rng).unwrap();
    assert!(ls.embedding.objective < collapsed);
    assert!(ls.sweep_objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn state_cap_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inst = gen_random_nonmetric(6, 2.0, &mut rng).unwrap();
    let grid = Grid::custom((-5..=5).map(f64::from)).unwrap();
    assert!(matches!(brute_force_emv(&inst, &grid, 1e3), Err(Error::TooLarge(_))));
    assert_eq!(grid_points(&Grid::custom([0.0, 1.0]).unwrap(), 2).len(), 4);
}
