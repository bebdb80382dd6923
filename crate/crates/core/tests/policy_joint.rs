mod common;

use std::collections::HashMap;

use fscap_core::info::{
    conditional_directed_information, directed_information, directed_information_view,
    mutual_information, InputView,
};
use fscap_core::oracle::literal_channel_law;
use fscap_core::policy::build_joint;
use fscap_core::{ActionSystem, CausalPolicy, FscKernel, HistoryIndexer, ROW_SUM_TOL};
use proptest::prelude::*;
use rand::Rng;

fn random_policy(k: &FscKernel, sys: &ActionSystem, n: usize, seed: u64) -> CausalPolicy {
    let ix = HistoryIndexer::for_system(k, sys, n).unwrap();
    CausalPolicy::random(ix, &mut common::rng(seed))
}

/// `P(s0) Π_i r(u_i | h_i) P(y^N || x^N, s0)` for one trajectory.
fn closed_form(
    policy: &CausalPolicy,
    k: &FscKernel,
    sys: &ActionSystem,
    s0: Option<usize>,
    code: usize,
) -> f64 {
    let ix = policy.indexer();
    let n = ix.block_length();
    let traj = ix.decode_trajectory(n, code);
    let mut hist = 0;
    let mut mass = 1.0;
    for (i, &(u, y)) in traj.iter().enumerate() {
        mass *= policy.prob(i + 1, hist, u);
        let (_, a) = ix.split_letter(u);
        hist = ix.push_history(hist, u, sys.z(a, 0, y));
    }
    let xs: Vec<usize> = traj.iter().map(|&(u, _)| ix.split_letter(u).0).collect();
    let ys: Vec<usize> = traj.iter().map(|&(_, y)| y).collect();
    mass * literal_channel_law(k, &xs, &ys, s0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_policies_are_normalized(seed in any::<u64>(), n in 1usize..=3) {
        let k = common::random_kernel(seed, 2, 2, 2);
        let sys = common::erasure_feedback(2);
        let policy = random_policy(&k, &sys, n, seed ^ 1);
        prop_assert!(policy.validate().is_ok());
        let ix = policy.indexer();
        for i in 1..=n {
            for h in 0..ix.histories(i) {
                let s: f64 = policy.slice(i, h).iter().sum();
                prop_assert!((s - 1.0).abs() <= ROW_SUM_TOL);
            }
        }
    }

    #[test]
    fn joint_factorizes_into_policy_and_channel(
        seed in any::<u64>(),
        ns in 1usize..=3,
        n in 1usize..=3,
        averaged in any::<bool>(),
    ) {
        let k = common::random_kernel(seed, ns, 2, 2);
        let sys = common::erasure_feedback(2);
        let policy = random_policy(&k, &sys, n, seed.wrapping_add(7));
        let s0 = if averaged { None } else { Some(seed as usize % ns) };
        let joint = build_joint(&policy, &k, &sys, s0).unwrap();
        prop_assert!((joint.total_mass() - 1.0).abs() <= 1e-9);
        prop_assert!(joint.check_normalized(1e-9).is_ok());
        for (code, &p) in joint.probs().iter().enumerate() {
            let expect = closed_form(&policy, &k, &sys, s0, code);
            prop_assert!((p - expect).abs() <= 1e-12, "code {code}: {p} vs {expect}");
        }
    }

    #[test]
    fn initial_state_changes_directed_information_by_at_most_its_entropy(
        seed in any::<u64>(),
        ns in 2usize..=3,
        n in 1usize..=3,
    ) {
        let k = common::random_kernel(seed, ns, 2, 2);
        let sys = common::erasure_feedback(2);
        let policy = random_policy(&k, &sys, n, seed ^ 0xabc);
        let avg = directed_information(&build_joint(&policy, &k, &sys, None).unwrap()).unwrap();
        let parts: Vec<_> = (0..ns)
            .map(|s| build_joint(&policy, &k, &sys, Some(s)).unwrap())
            .collect();
        let weighted: Vec<_> = parts.iter().enumerate().map(|(s, j)| (k.initial()[s], j)).collect();
        let cond = conditional_directed_information(&weighted).unwrap();
        let h0 = common::entropy(k.initial());
        prop_assert!(h0 <= (ns as f64).log2() + 1e-12);
        prop_assert!((avg - cond.weighted).abs() <= h0 + 1e-12, "{avg} vs {} (H = {h0})", cond.weighted);
    }

    #[test]
    fn feedback_blind_policies_lose_nothing_to_mutual_information(
        seed in any::<u64>(),
        ns in 1usize..=3,
        n in 1usize..=3,
    ) {
        let k = common::random_kernel(seed, ns, 2, 2);
        let sys = common::erasure_feedback(2);
        let ix = HistoryIndexer::for_system(&k, &sys, n).unwrap();
        let mut r = common::rng(seed ^ 0x5a5a);
        let mut tables: HashMap<(usize, Vec<usize>), Vec<f64>> = HashMap::new();
        let policy = CausalPolicy::from_fn(ix, |i, hist, u| {
            let key = (i, hist.iter().map(|&(u, _)| u).collect());
            tables.entry(key).or_insert_with(|| common::simplex(&mut r, ix.letters(), true))[u]
        })
        .unwrap();
        let joint = build_joint(&policy, &k, &sys, Some(0)).unwrap();
        let di = directed_information(&joint).unwrap();
        let mi = mutual_information(&joint).unwrap();
        prop_assert!(di <= mi + 1e-12, "{di} > {mi}");
        if ns == 1 {
            prop_assert!((di - mi).abs() <= 1e-12, "memoryless: {di} vs {mi}");
        }
    }

    #[test]
    fn action_letters_carry_no_extra_directed_information(seed in any::<u64>(), n in 1usize..=3) {
        let k = common::random_kernel(seed, 2, 2, 2);
        let sys = common::erasure_feedback(2);
        let joint = build_joint(&random_policy(&k, &sys, n, seed), &k, &sys, Some(1)).unwrap();
        let letters = directed_information_view(&joint, InputView::Letters).unwrap();
        let inputs = directed_information_view(&joint, InputView::ChannelInputs).unwrap();
        prop_assert!((letters - inputs).abs() <= 1e-12);
    }
}

#[test]
fn decoder_strategy_expansion_reproduces_feedback_and_cost() {
    let mut r = common::rng(11);
    for _ in 0..20 {
        let (ne, nd, ny, nz): (usize, usize, usize, usize) = (2, 2, 2, 3);
        let sampling: Vec<Vec<Vec<usize>>> = (0..ne)
            .map(|_| (0..nd).map(|_| (0..ny).map(|_| r.gen_range(0..nz)).collect()).collect())
            .collect();
        let cost: Vec<Vec<f64>> = (0..ne).map(|_| (0..nd).map(|_| r.gen::<f64>()).collect()).collect();
        let sys = ActionSystem::from_nested(&sampling, &cost, nz, 1.0).unwrap();
        let exp = sys
            .expand_decoder_strategies(&common::alphabet(ny), fscap_core::DEFAULT_EXPANSION_CAP)
            .unwrap();
        let nphi = exp.expanded_alphabet().size();
        assert_eq!(nphi, nd.pow(ny as u32));
        // every length-2 trajectory of (a_e, φ, y)
        let steps: Vec<(usize, usize, usize)> = (0..ne)
            .flat_map(|e| (0..nphi).flat_map(move |p| (0..ny).map(move |y| (e, p, y))))
            .collect();
        for first in &steps {
            for second in &steps {
                for &(e, p, y) in [first, second] {
                    let ad = exp.strategy(p)[y];
                    assert_eq!(exp.induced_sampling(e, p, y), sys.z(e, ad, y));
                    assert_eq!(exp.induced_cost(e, p, y), sys.cost(e, ad));
                }
            }
        }
    }
}

#[test]
fn expansion_respects_the_cap() {
    let sys = ActionSystem::from_nested(&[vec![vec![0; 4]; 3]], &[vec![0.0; 3]], 1, 0.0).unwrap();
    assert!(sys.expand_decoder_strategies(&common::alphabet(4), 80).is_err());
    assert!(sys.expand_decoder_strategies(&common::alphabet(4), 81).is_ok());
}
