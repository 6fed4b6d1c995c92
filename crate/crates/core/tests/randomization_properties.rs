use proptest::prelude::*;
use rand::Rng;
use swsr::randtest::{permuted_assignment, rand_test, PermutationPlan, RandStatistic};
use swsr::rng::stream;
use swsr::simcore::{generate_trial, Scenario, ScenarioSpec, VarianceSetting};
use swsr::{Arm, TrialData};

fn random_trial(seed: u64, n: usize, n_t: usize) -> TrialData<f64> {
    let mut rng = stream(seed, 0);
    let y = (0..n).map(|_| rng.random::<f64>()).collect();
    let t = (1..=n).map(|i| i as f64).collect();
    let arm = (0..n)
        .map(|i| if i < n_t { Arm::Treatment } else { Arm::Placebo })
        .collect();
    TrialData::new(y, t, arm).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn deterministic_and_bounded(seed: u64, plan_seed: u64, n in 6usize..80, frac in 0.1f64..0.9, welch: bool) {
        let n_t = ((n as f64 * frac).round() as usize).clamp(2, n - 2);
        let d = random_trial(seed, n, n_t);
        let stat = if welch { RandStatistic::WelchT } else { RandStatistic::RankSum };
        let plan = PermutationPlan::new(150, plan_seed);
        let a = rand_test(&d, stat, &plan).unwrap();
        let b = rand_test(&d, stat, &plan).unwrap();
        prop_assert_eq!(a.p_one_sided.to_bits(), b.p_one_sided.to_bits());
        prop_assert!(a.p_one_sided >= 1.0 / 151.0 && a.p_one_sided <= 1.0);
        prop_assert!(a.theta_hat.is_none() && a.se.is_none() && a.ci95.is_none());
    }

    #[test]
    fn margins_preserved(n in 2usize..400, frac in 0.0f64..1.0, seed: u64, b in 0usize..10_000) {
        let n_t = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let a = permuted_assignment(n, n_t, &PermutationPlan::new(1, seed), b);
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a.iter().filter(|x| **x == Arm::Treatment).count(), n_t);
    }
}

#[test]
fn p_value_independent_of_thread_count() {
    let d = random_trial(3, 200, 120);
    let plan = PermutationPlan::new(999, 11);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rand_test(&d, RandStatistic::WelchT, &plan).unwrap().p_one_sided)
    };
    assert_eq!(run(1).to_bits(), run(8).to_bits());
}

#[test]
fn exact_on_exchangeable_null() {
    // y i.i.d., theta = 0: rejection at 2.5% stays within 3 Monte Carlo SEs of alpha
    let spec = ScenarioSpec::named(Scenario::S1, VarianceSetting::Equal, 0.0, Default::default());
    let spec = ScenarioSpec { n_p: 30, n_t: 30, ..spec };
    let n_trials = 5_000;
    let alpha = 0.025;
    let mut rejections = 0;
    for i in 0..n_trials {
        let d = generate_trial(&spec, i).unwrap();
        let r = rand_test(&d, RandStatistic::WelchT, &PermutationPlan::new(199, i + 1)).unwrap();
        rejections += (r.p_one_sided < alpha) as usize;
    }
    let rate = rejections as f64 / n_trials as f64;
    let mcse = (alpha * (1.0 - alpha) / n_trials as f64).sqrt();
    assert!(rate <= alpha + 3.0 * mcse, "rate {rate}");
}
