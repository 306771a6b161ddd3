use metricfit::emv::{lp_lower_bound, pick_anchors, solve_emv, Anchors, EmvParams, GridChoice, BALL_CONSTANT};
use metricfit::grid::Grid;
use metricfit::instance::{emv_objective, gen_planted, gen_random_nonmetric, load_emv};
use metricfit::oracle::{brute_force_emv, MAX_STATES};
use metricfit::rounding::SeedStrategy;
use metricfit::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_params(rng_seed: u64) -> EmvParams {
    EmvParams {
        anchors: Anchors::All,
        repeats: 10,
        rng_seed,
        grid: GridChoice::Custom(vec![-2.0, -1.0, 0.0, 1.0, 2.0]),
        ..EmvParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rounded_objective_is_sandwiched(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = gen_random_nonmetric(4, 3.0, &mut rng).unwrap();
        let res = solve_emv(&inst, &small_params(seed)).unwrap();
        let obj = res.embedding.objective;
        prop_assert!(obj >= 0.0);
        prop_assert!(res.lp_value() <= obj + 1e-7);
        let recomputed = emv_objective(&inst, &res.embedding.points).unwrap();
        prop_assert!((recomputed - obj).abs() <= 1e-9 * recomputed.max(1.0));
        for run in &res.runs {
            for r in &run.reports {
                prop_assert!(r.objective >= run.lp_value.unwrap() - 1e-7);
            }
        }
    }

    #[test]
    fn translation_leaves_objective_unchanged(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted = gen_planted(5, 2, 0.4, &mut rng).unwrap();
        let moved: Vec<Vec<f64>> = planted.points.iter().map(|p| vec![p[0] + shift, p[1] - shift]).collect();
        let a = emv_objective(&planted.instance, &planted.points).unwrap();
        let b = emv_objective(&planted.instance, &moved).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn same_seed_same_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = gen_random_nonmetric(5, 4.0, &mut rng).unwrap();
    let params = EmvParams {
        rng_seed: 11,
        ..EmvParams::default()
    };
    let a = solve_emv(&inst, &params).unwrap();
    let b = solve_emv(&inst, &params).unwrap();
    assert_eq!(a.embedding.points, b.embedding.points);
    assert_eq!(a.embedding.provenance, b.embedding.provenance);
}

#[test]
fn lower_bound_grows_with_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let inst = gen_random_nonmetric(4, 4.0, &mut rng).unwrap();
    let mut p2 = small_params(0);
    p2.degree = 2;
    p2.seed = SeedStrategy::sampled(0);
    let mut p3 = p2.clone();
    p3.degree = 3;
    let b2 = lp_lower_bound(&inst, 0, &p2).unwrap();
    let b3 = lp_lower_bound(&inst, 0, &p3).unwrap();
    assert!(b3 >= b2 - 1e-8, "{b3} < {b2}");
}

#[test]
fn lower_bound_below_anchored_oracle() {
    // the oracle argmin shifted so the anchor sits at 0 is feasible for the
    // anchored relaxation whenever it lies inside the ball
    let grid_values = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
        let inst = gen_random_nonmetric(4, 3.0, &mut rng).unwrap();
        let (best, opt) = brute_force_emv(&inst, &Grid::custom(grid_values.iter().copied()).unwrap(), MAX_STATES).unwrap();
        let x = &best.points;
        let n = inst.n();
        for a in 0..n {
            let spread: f64 = x.iter().map(|p| (p[0] - x[a][0]).powi(2)).sum::<f64>() / n as f64;
            if spread <= BALL_CONSTANT * inst.mean_sq() {
                let lb = lp_lower_bound(&inst, a, &small_params(0)).unwrap();
                assert!(lb <= opt + 1e-7, "anchor {a}: {lb} > {opt}");
            }
        }
    }
}

#[test]
fn ball_contains_some_anchor_of_good_embeddings() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70 + seed);
        let inst = gen_random_nonmetric(5, 4.0, &mut rng).unwrap();
        let (best, opt) = brute_force_emv(&inst, &Grid::custom((-3..=3).map(f64::from)).unwrap(), MAX_STATES).unwrap();
        assert!(opt <= 2.0 * inst.mean_sq());
        let x = &best.points;
        let n = inst.n() as f64;
        let ok = (0..x.len()).any(|a| {
            x.iter().map(|p| (p[0] - x[a][0]).powi(2)).sum::<f64>() / n <= BALL_CONSTANT * inst.mean_sq()
        });
        assert!(ok, "seed {seed}");
    }
}

#[test]
fn anchor_policies() {
    assert_eq!(pick_anchors(4, &Anchors::All, 0).unwrap(), vec![0, 1, 2, 3]);
    assert_eq!(pick_anchors(4, &Anchors::Sample(2), 5).unwrap(), pick_anchors(4, &Anchors::Sample(2), 5).unwrap());
    assert_eq!(pick_anchors(4, &Anchors::Sample(9), 5).unwrap().len(), 4);
    assert!(pick_anchors(4, &Anchors::Fixed(vec![7]), 0).is_err());
}

#[test]
fn rejects_bad_parameters() {
    let inst = load_emv(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1).unwrap();
    let bad_eps = EmvParams {
        eps: 1.5,
        ..EmvParams::default()
    };
    assert!(matches!(solve_emv(&inst, &bad_eps), Err(Error::BadEpsilon(_))));
    let low_degree = EmvParams {
        degree: 2,
        seed: SeedStrategy::Exhaustive(1),
        ..EmvParams::default()
    };
    assert!(solve_emv(&inst, &low_degree).is_err());
}

#[test]
fn all_zero_instance_is_solved_exactly() {
    let inst = load_emv(&vec![vec![0.0; 3]; 3], 2).unwrap();
    let res = solve_emv(&inst, &EmvParams::default()).unwrap();
    assert_eq!(res.embedding.objective, 0.0);
}
