mod common;

use common::{dense_log_normal, rel_err, rel_frobenius, LinearCase};
use dada_core::evidence::{bayes_ratio_check, evidence_from_run, posterior_mean_trajectory, World};
use dada_core::filters::{kf_analysis, kf_run, GaussianBelief};
use dada_core::models::{ar1_loglik, Ar1Spec, ObservationSequence};
use dada_core::seeds::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn kf_log_evidence(case: &LinearCase, y: &ObservationSequence) -> f64 {
    let spec = case.spec();
    let run = kf_run(&spec, &case.prior(), y).unwrap();
    evidence_from_run(&run, y, spec.h(), spec.r(), World::Factual)
        .unwrap()
        .total()
}

#[test]
fn kf_evidence_equals_joint_density_on_random_models() {
    let mut rng = rng_from_seed(101);
    for n in 1..=3 {
        for d in 1..=3 {
            for steps in [0, 1, 5, 10] {
                let case = LinearCase::random(&mut rng, n, d);
                let (_, y) = case.sample(steps, &mut rng);
                let a = kf_log_evidence(&case, &y);
                let b = case.joint_loglik(&y);
                assert!(rel_err(a, b) < 1e-9, "n={n} d={d} T={steps}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn bayes_identity_holds_at_distinct_trajectories() {
    let mut rng = rng_from_seed(202);
    for _ in 0..20 {
        let case = LinearCase::random(&mut rng, 3, 2);
        let (truth, y) = case.sample(6, &mut rng);
        let spec = case.spec();
        let smooth = posterior_mean_trajectory(&spec, &case.prior(), &y).unwrap();
        for x in [&truth, &smooth] {
            let res = bayes_ratio_check(&spec, &case.prior(), &y, x).unwrap();
            assert!(res.abs() < 1e-8, "residual {res}");
        }
    }
}

#[test]
fn kf_analysis_matches_conjugate_posterior() {
    let mut rng = rng_from_seed(303);
    for _ in 0..100 {
        let case = LinearCase::random(&mut rng, 3, 2);
        let y = common::gaussian_vector(&mut rng, 2);
        let fb = case.prior();
        let ab = kf_analysis(&fb, &y, &case.h, &case.r).unwrap();
        let (m, p) = LinearCase::conjugate_posterior(&fb.mean, &fb.cov, &case.h, &case.r, &y);
        assert!((&ab.mean - &m).norm() <= 1e-10 * m.norm().max(1.0));
        assert!(rel_frobenius(&ab.cov, &p) <= 1e-10);
    }
}

#[test]
fn ar1_loglik_equals_yule_walker_joint_density() {
    let mut rng = rng_from_seed(404);
    let (a, s) = (0.7, 1.3);
    let spec = Ar1Spec::stationary_scalar(a, s).unwrap();
    let y = spec.simulate(50, &mut rng);
    let n = y.len();
    let gamma0 = s * s / (1.0 - a * a);
    let cov = DMatrix::from_fn(n, n, |i, j| gamma0 * a.powi((i as i32 - j as i32).abs()));
    let stacked = DVector::from_iterator(n, y.obs.iter().map(|v| v[0]));
    let oracle = dense_log_normal(&stacked, &DVector::zeros(n), &cov);
    let got = ar1_loglik(&y, &spec).unwrap();
    assert!(rel_err(got, oracle) < 1e-10, "{got} vs {oracle}");
}

#[test]
fn evidence_is_invariant_to_prior_relabelling_of_a_single_step() {
    // With T = 0 the evidence is the prior predictive density of y_0.
    let mut rng = rng_from_seed(505);
    let case = LinearCase::random(&mut rng, 2, 2);
    let (_, y) = case.sample(0, &mut rng);
    let pred_cov = &case.h * &case.prior_cov * case.h.transpose() + &case.r;
    let oracle = dense_log_normal(&y.obs[0], &(&case.h * &case.prior_mean), &pred_cov);
    assert!(rel_err(kf_log_evidence(&case, &y), oracle) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evidence_matches_oracle_for_any_seed(seed in any::<u64>(), n in 1usize..=3, d in 1usize..=3, steps in 0usize..=6) {
        let mut rng = rng_from_seed(seed);
        let case = LinearCase::random(&mut rng, n, d);
        let (_, y) = case.sample(steps, &mut rng);
        prop_assert!(rel_err(kf_log_evidence(&case, &y), case.joint_loglik(&y)) < 1e-8);
    }

    #[test]
    fn analysis_covariance_never_exceeds_forecast(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let case = LinearCase::random(&mut rng, 3, 2);
        let y = common::gaussian_vector(&mut rng, 2);
        let fb = GaussianBelief::prior(case.prior_mean.clone(), case.prior_cov.clone()).unwrap();
        let ab = kf_analysis(&fb, &y, &case.h, &case.r).unwrap();
        let diff = &fb.cov - &ab.cov;
        let min_eig = diff.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig > -1e-10);
    }
}
