mod common;

use metricfit::pseudodist::{
    avg_pairwise_tv, check_var_reduction, condition, condition_all, entropy_potential_truncated, pe,
    variance_potential, JointTable, Junta, PseudoDistribution, Truncation, VariableSpace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mu_from(seed: u64, n: usize, q: usize, degree: usize) -> PseudoDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_mu(n, q, degree, &mut rng)
}

/// Expectation of `f` under the joint distribution directly, without tables.
fn joint_expectation(joint: &[f64], n: usize, q: usize, support: &[usize], f: &Junta) -> f64 {
    let alpha = common::line_alphabet(q);
    let mut total = 0.0;
    for (idx, &p) in joint.iter().enumerate() {
        let mut digits = vec![0; n];
        let mut rest = idx;
        for d in (0..n).rev() {
            digits[d] = rest % q;
            rest /= q;
        }
        let pts: Vec<&[f64]> = support.iter().map(|&v| alpha.point(digits[v])).collect();
        total += p * f.eval(&pts);
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pe_matches_joint_expectation(seed in 0u64..10_000, n in 2usize..5, q in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joint = common::random_joint(n, q, &mut rng);
        let space = VariableSpace::uniform(n, common::line_alphabet(q), 2);
        let mu = PseudoDistribution::from_joint(space, &joint, &common::supports_upto(n, 2)).unwrap();
        let f = Junta::new(vec![0, n - 1], |p| (p[0][0] - p[1][0]).powi(2) + p[0][0]);
        let direct = joint_expectation(&joint, n, q, &[0, n - 1], &f);
        prop_assert!((pe(&mu, &f).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn pe_is_linear(seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mu = mu_from(seed, 4, 3, 3);
        let f = Junta::new(vec![0, 2], |p| p[0][0] * p[1][0]);
        let g = Junta::new(vec![0, 2], |p| (p[0][0] + 1.0).powi(3) - p[1][0]);
        let (ff, gg) = (f.clone(), g.clone());
        let combo = Junta::new(vec![0, 2], move |p| alpha * ff.eval(p) + beta * gg.eval(p));
        let lhs = pe(&mu, &combo).unwrap();
        let rhs = alpha * pe(&mu, &f).unwrap() + beta * pe(&mu, &g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn conditioning_keeps_tables_consistent(seed in 0u64..10_000, i in 0usize..4) {
        let mu = mu_from(seed, 4, 3, 4);
        prop_assert!(mu.consistency_gap() <= 1e-12);
        for (s, &p) in mu.marginal(i).iter().enumerate() {
            if p <= 1e-12 {
                continue;
            }
            let c = condition(&mu, i, s).unwrap();
            prop_assert_eq!(c.degree(), 3);
            prop_assert!(c.consistency_gap() <= 1e-10);
            prop_assert!((c.marginal(i)[0] - 1.0).abs() <= 1e-12);
            for t in c.tables() {
                prop_assert!((t.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn potentials_drop_in_expectation(seed in 0u64..10_000, i in 0usize..4) {
        let mu = mu_from(seed, 4, 3, 3);
        let trunc = Truncation::from_mu(&mu, 2.0);
        let mut var_after = 0.0;
        let mut ent_after = 0.0;
        for (s, &p) in mu.marginal(i).iter().enumerate() {
            if p <= 1e-12 {
                continue;
            }
            let c = condition(&mu, i, s).unwrap();
            var_after += p * variance_potential(&c);
            ent_after += p * entropy_potential_truncated(&c, &trunc);
        }
        prop_assert!(var_after <= variance_potential(&mu) + 1e-9);
        prop_assert!(ent_after <= entropy_potential_truncated(&mu, &trunc) + 1e-9);
    }

    #[test]
    fn variance_reduction_on_random_joints(
        u in prop::collection::vec(-5.0f64..5.0, 2..5),
        v in prop::collection::vec(-5.0f64..5.0, 2..5),
        raw in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let probs: Vec<Vec<f64>> = (0..u.len())
            .map(|a| (0..v.len()).map(|b| raw[(a * 4 + b) % raw.len()] + 1e-3).collect())
            .collect();
        let total: f64 = probs.iter().flatten().sum();
        let probs = probs.into_iter().map(|r| r.into_iter().map(|p| p / total).collect()).collect();
        let joint = JointTable { u_values: u, v_values: v, probs };
        prop_assert!(check_var_reduction(&joint));
    }
}

#[test]
fn product_has_no_pairwise_correlation() {
    let space = VariableSpace::uniform(3, common::line_alphabet(3), 3);
    let marg = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![1.0 / 3.0; 3]];
    let mu = PseudoDistribution::product(space, &marg).unwrap();
    assert!(avg_pairwise_tv(&mu, |_, _| 1.0).unwrap() <= 1e-15);
}

#[test]
fn perfectly_correlated_pair_pins_together() {
    // x0 = x1 uniformly on three symbols
    let joint: Vec<f64> = (0..9).map(|idx| if idx / 3 == idx % 3 { 1.0 / 3.0 } else { 0.0 }).collect();
    let space = VariableSpace::uniform(2, common::line_alphabet(3), 2);
    let mu = PseudoDistribution::from_joint(space, &joint, &[vec![0, 1]]).unwrap();
    assert!((avg_pairwise_tv(&mu, |_, _| 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let c = condition_all(&mu, &[(0, 2)]).unwrap();
    assert_eq!(c.marginal(1), &[0.0, 0.0, 1.0]);
}

#[test]
fn conditioning_on_impossible_value_fails() {
    let space = VariableSpace::uniform(2, common::line_alphabet(2), 2);
    let mu = PseudoDistribution::product(space, &[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    assert!(condition(&mu, 0, 1).is_err());
}
