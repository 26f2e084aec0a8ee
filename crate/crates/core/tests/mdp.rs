mod common;

use proptest::prelude::*;
use rand::Rng;
use rllow_core::analysis::hardness;
use rllow_core::estimator::{local_weights_qp_oracle, rl_low, variance_proxy, Target};
use rllow_core::instance::sample_dataset;
use rllow_core::mdp::{
    mdp_hardness, mdp_policy_search, mdp_regret, optimal_policy, policy_objective, rl_low_mdp, stationary_distribution,
    Policy, SearchMode, TransitionKernel,
};

use common::*;

fn random_rho(rng: &mut impl Rng, s: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn random_rewards(rng: &mut impl Rng, s: usize, a: usize) -> Vec<Vec<f64>> {
    (0..s).map(|_| (0..a).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn random_policy(rng: &mut impl Rng, s: usize, a: usize) -> Policy {
    Policy::new((0..s).map(|_| rng.random_range(0..a)).collect())
}

#[test]
fn reward_rows_equal_to_rho_scale_the_gap_per_state() {
    let v = t2();
    let kernel = TransitionKernel::state_independent(v.rho(), 2).unwrap();
    let h = mdp_hardness(&v, &kernel).unwrap();
    assert_eq!(h.optimal.actions, vec![0, 0]);
    // One state deviates: gamma 1, gap rho_k * 1 = 0.5.
    assert!((h.h_mdp - 4.0).abs() < 1e-8, "{}", h.h_mdp);
    assert_eq!(h.policies.len(), 3);
}

#[test]
fn single_state_lift_matches_static_hardness() {
    let v = t1();
    let kernel = TransitionKernel::state_independent(v.rho(), 2).unwrap();
    let h = mdp_hardness(&v, &kernel).unwrap();
    let stat = hardness(&v, None).unwrap();
    assert!((h.h_mdp - stat.h).abs() < 1e-9);
    assert!((h.h_mdp - 1.0).abs() < 1e-9);
}

#[test]
fn periodic_chain_averages_over_the_cycle() {
    let kernel = TransitionKernel::from_nested(&[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]]).unwrap();
    let d = stationary_distribution(&kernel, &Policy::new(vec![0, 0]), &[0.9, 0.1]).unwrap();
    assert!((d[0] - 0.5).abs() < 1e-9 && (d[1] - 0.5).abs() < 1e-9);
}

#[test]
fn absorbing_states_keep_their_start_mass() {
    let kernel = TransitionKernel::self_loops(3, 2).unwrap();
    let rho = [0.2, 0.3, 0.5];
    let d = stationary_distribution(&kernel, &Policy::new(vec![1, 0, 1]), &rho).unwrap();
    for (x, y) in d.iter().zip(rho) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn kernel_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.json");
    let k = random_kernel(&mut rng(3), 3, 2);
    k.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(&text).unwrap().get("P").is_some());
    assert_eq!(TransitionKernel::load(&path).unwrap(), k);
}

#[test]
fn malformed_kernels_are_rejected() {
    assert!(TransitionKernel::from_nested(&[vec![vec![0.5, 0.4]], vec![vec![1.0, 0.0]]]).is_err());
    assert!(TransitionKernel::from_nested(&[vec![vec![1.2, -0.2]], vec![vec![1.0, 0.0]]]).is_err());
    assert!(TransitionKernel::from_nested(&[vec![vec![1.0]], vec![vec![1.0, 0.0]]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupancy_is_a_stationary_probability_vector(seed in any::<u64>(), s in 1usize..6, a in 1usize..4) {
        let mut g = rng(seed);
        let kernel = random_kernel(&mut g, s, a);
        let pi = random_policy(&mut g, s, a);
        let rho = random_rho(&mut g, s);
        let d = stationary_distribution(&kernel, &pi, &rho).unwrap();
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = kernel.policy_matrix(&pi).unwrap();
        for j in 0..s {
            let moved: f64 = (0..s).map(|i| d[i] * p[(i, j)]).sum();
            prop_assert!((moved - d[j]).abs() < 1e-8, "{} vs {}", moved, d[j]);
        }
    }

    #[test]
    fn state_independent_kernels_pick_each_state_argmax(seed in any::<u64>(), s in 1usize..5, a in 2usize..5) {
        let mut g = rng(seed);
        let rho = random_rho(&mut g, s);
        let kernel = TransitionKernel::state_independent(&rho, a).unwrap();
        let rewards = random_rewards(&mut g, s, a);
        let out = mdp_policy_search(&rewards, &kernel, &rho, SearchMode::Enumerate).unwrap();
        let argmax: Vec<usize> = rewards
            .iter()
            .map(|row| (0..a).fold(0, |b, i| if row[i] > row[b] { i } else { b }))
            .collect();
        prop_assert_eq!(&out.policy.actions, &argmax);
        let expected: f64 = (0..s).map(|k| rho[k] * rewards[k][argmax[k]]).sum();
        prop_assert!((out.value - expected).abs() < 1e-9);
    }

    #[test]
    fn enumeration_and_policy_iteration_agree(seed in any::<u64>(), s in 1usize..5, a in 2usize..5) {
        let mut g = rng(seed);
        let kernel = random_kernel(&mut g, s, a);
        let rho = random_rho(&mut g, s);
        let rewards = random_rewards(&mut g, s, a);
        let e = mdp_policy_search(&rewards, &kernel, &rho, SearchMode::Enumerate).unwrap();
        let i = mdp_policy_search(&rewards, &kernel, &rho, SearchMode::Iterate).unwrap();
        prop_assert!((e.value - i.value).abs() <= 1e-9 * e.value.abs().max(1.0), "{} vs {}", e.value, i.value);
        prop_assert!(e.optimal.contains(&e.policy));
        let by_hand = policy_objective(&rewards, &kernel, &e.policy, &rho).unwrap();
        prop_assert!((by_hand - e.value).abs() <= 1e-9 * e.value.abs().max(1.0));
    }

    #[test]
    fn regret_is_nonnegative_and_zero_only_at_the_optimum(seed in any::<u64>()) {
        let mut g = rng(seed);
        let v = random_instance(&mut g, &SMALL);
        let kernel = random_kernel(&mut g, v.num_states(), v.num_actions());
        let Ok(best) = optimal_policy(&v, &kernel) else {
            return Ok(());
        };
        prop_assert_eq!(mdp_regret(&v, &kernel, &best.policy).unwrap(), 0.0);
        for _ in 0..5 {
            let pi = random_policy(&mut g, v.num_states(), v.num_actions());
            let r = mdp_regret(&v, &kernel, &pi).unwrap();
            prop_assert!(r >= 0.0);
            if pi != best.policy {
                let value = policy_objective(&v.rewards(), &kernel, &pi, v.rho()).unwrap();
                prop_assert!((best.value - value - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hardness_matches_brute_force(seed in any::<u64>()) {
        let mut g = rng(seed);
        let v = random_instance(&mut g, &SMALL);
        let kernel = random_kernel(&mut g, v.num_states(), v.num_actions());
        let Ok(h) = mdp_hardness(&v, &kernel) else {
            return Ok(());
        };
        let pairs: Vec<_> = v.schedule().observed().collect();
        let best = optimal_policy(&v, &kernel).unwrap();
        let (s, a) = (v.num_states(), v.num_actions());
        let mut expected = 0.0f64;
        for p in 0..a.pow(s as u32) {
            let pi = Policy::from_index(p, s, a);
            if pi == best.policy {
                continue;
            }
            let gap = best.value - policy_objective(&v.rewards(), &kernel, &pi, v.rho()).unwrap();
            let gamma = (0..s)
                .filter(|&k| pi.actions[k] != best.policy.actions[k])
                .map(|k| {
                    let t = Target::new(k, pi.actions[k], best.policy.actions[k]);
                    variance_proxy(&pairs, &local_weights_qp_oracle(t, v.schedule(), v.features()).unwrap())
                })
                .fold(0.0, f64::max);
            expected = expected.max(gamma / (gap * gap));
        }
        prop_assert!((h.h_mdp - expected).abs() <= 1e-9 * expected.max(1.0), "{} vs {}", h.h_mdp, expected);
    }

    #[test]
    fn state_independent_policy_search_reduces_to_static_selection(seed in any::<u64>(), n in 1usize..100) {
        let mut g = rng(seed);
        let v = random_instance(&mut g, &SMALL);
        let data = sample_dataset(&v, n, seed).unwrap();
        let kernel = TransitionKernel::state_independent(v.rho(), v.num_actions()).unwrap();
        let loops = TransitionKernel::self_loops(v.num_states(), v.num_actions()).unwrap();
        let stat = rl_low(&data, v.features(), v.reward_bound(), seed).unwrap();
        for k in [&kernel, &loops] {
            let pi = rl_low_mdp(&data, v.features(), v.reward_bound(), k, v.rho(), seed).unwrap();
            prop_assert_eq!(&pi.actions, &stat.selections);
        }
    }
}
