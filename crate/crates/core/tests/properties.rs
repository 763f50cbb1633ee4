//! Property tests for the reward, the oracles and the ridge estimate.
//! Independent oracles: nalgebra dense solves and direct enumeration.

use c4bandit::environment::full_observation_probability;
use c4bandit::{
    brute_force_oracle, greedy_oracle, ArmBounds, DiscountProfile, EllipsoidState, Observation, RewardSpec, SuperArm,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Non-increasing discounts in (0, 1] of length 1..=k.
fn discounts(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..=1.0, 1..=k).prop_map(|mut g| {
        g.sort_by(|a, b| b.total_cmp(a));
        g
    })
}

fn spec_of(g: &[f64]) -> RewardSpec {
    RewardSpec::disjunctive(DiscountProfile::new(g.to_vec()).unwrap())
}

/// Direct sum over click positions, written independently of the crate.
fn disjunctive(g: &[f64], w: &[f64]) -> f64 {
    let mut none_yet = 1.0;
    let mut total = 0.0;
    for (k, wk) in w.iter().enumerate() {
        total += g[k] * none_yet * wk;
        none_yet *= 1.0 - wk;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reward_matches_direct_sum_and_range(
        g in discounts(4),
        w in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let k = g.len();
        let arm = SuperArm::new((0..k).collect(), k).unwrap();
        let f = spec_of(&g).reward(&arm, &w).unwrap();
        prop_assert!((f - disjunctive(&g, &w[..k])).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn reward_is_monotone(
        g in discounts(4),
        w in prop::collection::vec(0.0f64..=1.0, 4),
        pos in 0usize..4,
        bump in 0.0f64..=1.0,
    ) {
        let k = g.len();
        let arm = SuperArm::new((0..k).collect(), k).unwrap();
        let spec = spec_of(&g);
        let mut raised = w.clone();
        raised[pos] = (w[pos] + bump).min(1.0);
        prop_assert!(spec.reward(&arm, &raised).unwrap() >= spec.reward(&arm, &w).unwrap() - 1e-15);
    }

    #[test]
    fn reward_is_lipschitz_with_discounts(
        g in discounts(4),
        w in prop::collection::vec(0.0f64..=1.0, 4),
        v in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let k = g.len();
        let arm = SuperArm::new((0..k).collect(), k).unwrap();
        let spec = spec_of(&g);
        let gap = (spec.reward(&arm, &w).unwrap() - spec.reward(&arm, &v).unwrap()).abs();
        let budget: f64 = (0..k).map(|i| g[i] * (w[i] - v[i]).abs()).sum();
        prop_assert!(gap <= budget + 1e-15);
    }

    #[test]
    fn greedy_matches_brute_force(
        g in discounts(3),
        w in prop::collection::vec(0.0f64..=1.0, 1..=8),
    ) {
        let spec = spec_of(&g);
        let k = g.len();
        let greedy = greedy_oracle(&spec, &w, k).unwrap();
        let brute = brute_force_oracle(&spec, &w, k).unwrap();
        let fg = spec.reward(&greedy, &w).unwrap();
        let fb = spec.reward(&brute, &w).unwrap();
        prop_assert!((fg - fb).abs() <= 1e-12, "greedy {fg} vs brute {fb}");
    }

    #[test]
    fn full_observation_matches_click_enumeration(w in prop::collection::vec(0.0f64..=1.0, 1..=5)) {
        // Sum the probability of every click pattern whose first click, if
        // any, is on the last position or absent.
        let n = w.len();
        let mut mass = 0.0;
        for mask in 0u32..(1 << n) {
            let p: f64 = (0..n)
                .map(|i| if mask >> i & 1 == 1 { w[i] } else { 1.0 - w[i] })
                .product();
            let first = (0..n).find(|&i| mask >> i & 1 == 1);
            if first.is_none_or(|i| i == n - 1) {
                mass += p;
            }
        }
        prop_assert!((full_observation_probability(&w) - mass).abs() < 1e-12);
    }

    #[test]
    fn arm_bounds_are_ordered(mean in -2.0f64..2.0, radius in 0.0f64..3.0) {
        let b = ArmBounds::from_mean_radius(mean, radius);
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
        prop_assert_eq!(b.upper, (mean + radius).clamp(0.0, 1.0));
    }
}

#[derive(Debug, Clone)]
struct Sample {
    x: Vec<f64>,
    gamma: f64,
    w: f64,
}

fn samples(d: usize, n: usize) -> impl Strategy<Value = Vec<Sample>> {
    prop::collection::vec(
        (prop::collection::vec(-1.0f64..1.0, d), 0.1f64..=1.0, 0.0f64..=1.0),
        1..=n,
    )
    .prop_map(|rows| rows.into_iter().map(|(x, gamma, w)| Sample { x, gamma, w }).collect())
}

fn instance() -> impl Strategy<Value = (usize, f64, Vec<Sample>)> {
    (1usize..=10, 0.05f64..2.0).prop_flat_map(|(d, lambda)| (Just(d), Just(lambda), samples(d, 500)))
}

/// Batch ridge solve `(λI + Σγ²xxᵀ) θ = Σγ²wx` plus `ln det`.
fn batch(d: usize, lambda: f64, data: &[Sample]) -> (DVector<f64>, f64) {
    let mut v = DMatrix::<f64>::identity(d, d) * lambda;
    let mut b = DVector::<f64>::zeros(d);
    for s in data {
        let x = DVector::from_column_slice(&s.x);
        v += &x * x.transpose() * (s.gamma * s.gamma);
        b += &x * (s.gamma * s.gamma * s.w);
    }
    let chol = v.clone().cholesky().expect("ridge matrix is positive definite");
    let theta = chol.solve(&b);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    (theta, log_det)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn incremental_estimate_matches_batch_solve((d, lambda, data) in instance()) {
        let mut m = EllipsoidState::new(d, lambda, 0.5, 0.1).unwrap();
        let mut last = m.log_det();
        for chunk in data.chunks(3) {
            let obs: Vec<Observation> = chunk
                .iter()
                .map(|s| Observation { context: &s.x, discount: s.gamma, weight: s.w })
                .collect();
            m.update(&obs).unwrap();
            prop_assert!(m.log_det() >= last - 1e-12, "ln det decreased");
            last = m.log_det();
        }
        let (theta, log_det) = batch(d, lambda, &data);
        for i in 0..d {
            prop_assert!((m.theta_hat()[i] - theta[i]).abs() <= 1e-8, "θ̂[{i}] {} vs {}", m.theta_hat()[i], theta[i]);
        }
        prop_assert!((m.log_det() - log_det).abs() <= 1e-8 * log_det.abs().max(1.0));
    }
}

/// `max |V·V⁻¹ − I|` for the model's flat row-major matrices.
fn identity_error(m: &EllipsoidState) -> f64 {
    let d = m.dim();
    let v = DMatrix::from_row_slice(d, d, m.gram());
    let vi = DMatrix::from_row_slice(d, d, m.gram_inv());
    (v * vi - DMatrix::<f64>::identity(d, d)).abs().max()
}

#[test]
fn inverse_stays_consistent_over_ten_thousand_updates() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let d = 20;
    let mut m = EllipsoidState::new(d, 0.1, 0.5, 0.1).unwrap();
    let mut worst: f64 = 0.0;
    for step in 0..10_000 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) / (d as f64).sqrt()).collect();
        m.update(&[Observation {
            context: &x,
            discount: 1.0,
            weight: rng.random(),
        }])
        .unwrap();
        // The re-inversion epoch resets drift; sample just before it too.
        if step % 997 == 0 || step % 1000 == 998 {
            worst = worst.max(identity_error(&m));
        }
    }
    worst = worst.max(identity_error(&m));
    assert!(worst < 1e-6, "max |V V⁻¹ − I| = {worst:e}");
    assert!(m.epoch() >= 9);
    let v = m.gram();
    for i in 0..d {
        for j in 0..d {
            assert_eq!(v[i * d + j], v[j * d + i]);
        }
    }
}
