use proptest::prelude::*;

use incompat::discrimination::{
    bound_report, psg_best_lo, psg_best_locc1, psg_fixed, random_task, BoundOptions, DiscriminationTask, Mode,
};
use incompat::incompatibility::{compute_roi, compute_roi_with, RoiOptions};
use incompat::io;
use incompat::measurements::{random_projective_set, random_set, MeasurementSet};
use incompat::oracle::{brute_force_psg_with, random_compatible_set, random_strategy, simulate_game_with};
use incompat::par::Execution;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizers_agree_with_enumeration(seed in 0u64..1_000_000, n_ens in 1usize..3, n_states in 2usize..4) {
        let task = random_task(&[2, 2], n_ens, n_states, seed).unwrap();
        let a = random_set(2, 2, 2, seed ^ 1).unwrap();
        let b = random_set(2, 2, 3, seed ^ 2).unwrap();
        let sets = [a.clone(), b.clone()];
        let lo = psg_best_lo(&task, &a, &b).unwrap();
        let locc = psg_best_locc1(&task, &a, &b).unwrap();
        let bf_lo = brute_force_psg_with(&task, &sets, Mode::Lo, Execution::Sequential).unwrap();
        let bf_locc = brute_force_psg_with(&task, &sets, Mode::Locc1, Execution::Parallel).unwrap();
        prop_assert!((lo.0 - bf_lo).abs() <= 1e-12);
        prop_assert!((locc.0 - bf_locc).abs() <= 1e-12);
        prop_assert!(locc.0 >= lo.0 - 1e-12);
        // the returned strategies attain the reported values
        prop_assert!((psg_fixed(&task, &a, &b, &lo.1).unwrap() - lo.0).abs() <= 1e-12);
        prop_assert!((psg_fixed(&task, &a, &b, &locc.1).unwrap() - locc.0).abs() <= 1e-12);
    }

    #[test]
    fn any_strategy_is_below_the_optimum(seed in 0u64..1_000_000) {
        let task = random_task(&[2, 2], 2, 3, seed).unwrap();
        let a = random_set(2, 2, 2, seed ^ 3).unwrap();
        let b = random_set(2, 3, 2, seed ^ 4).unwrap();
        let best = psg_best_locc1(&task, &a, &b).unwrap().0;
        for (i, mode) in [Mode::Lo, Mode::Locc1].into_iter().enumerate() {
            let s = random_strategy(&task, &a, &b, mode, seed + i as u64);
            prop_assert!(psg_fixed(&task, &a, &b, &s).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn task_files_round_trip(seed in 0u64..1_000_000, parties in 1usize..4) {
        let dims = vec![2; parties];
        let task = random_task(&dims, 2, 2, seed).unwrap();
        let text = io::to_string(&task, None).unwrap();
        let back: DiscriminationTask = io::from_str(&text).unwrap();
        prop_assert_eq!(&back, &task);
        prop_assert_eq!(io::to_string(&back, None).unwrap(), text);
    }

    #[test]
    fn simulation_does_not_depend_on_execution(seed in 0u64..1_000_000) {
        let task = random_task(&[2, 2], 2, 2, seed).unwrap();
        let a = random_set(2, 2, 2, seed ^ 5).unwrap();
        let s = random_strategy(&task, &a, &a, Mode::Locc1, seed);
        let x = simulate_game_with(&task, &a, &a, &s, 40_000, seed, Execution::Sequential).unwrap();
        let y = simulate_game_with(&task, &a, &a, &s, 40_000, seed, Execution::Parallel).unwrap();
        prop_assert_eq!(x, y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn post_processed_sets_are_compatible(seed in 0u64..1_000_000, dim in 2usize..4, parent_out in 2usize..5) {
        let set = random_compatible_set(dim, 2, 2, parent_out, seed).unwrap();
        prop_assert!(compute_roi(&set).unwrap().roi <= 1e-6);
    }

    #[test]
    fn bound_chain_holds(seed in 0u64..1_000_000) {
        let a = random_projective_set(2, 2, 2, seed).unwrap();
        let b = random_set(2, 2, 2, seed ^ 6).unwrap();
        let task = random_task(&[2, 2], 2, 2, seed ^ 7).unwrap();
        let r = bound_report(&task, &[a, b], &BoundOptions::default()).unwrap();
        prop_assert!(r.pass, "{:?}", r);
        prop_assert!(r.p_i_lo <= r.bound_factor * r.proof_chain_value + 1e-7);
    }

    #[test]
    fn roi_does_not_depend_on_execution(seed in 0u64..1_000_000) {
        let set: MeasurementSet = random_projective_set(2, 3, 2, seed).unwrap();
        let seq = compute_roi_with(&set, &RoiOptions { execution: Execution::Sequential, ..RoiOptions::default() }).unwrap();
        let par = compute_roi_with(&set, &RoiOptions { execution: Execution::Parallel, ..RoiOptions::default() }).unwrap();
        prop_assert_eq!(seq, par);
    }
}
