mod common;

use fscap_core::baa::BaaProblem;
use fscap_core::oracle::literal_channel_law;
use fscap_core::FscKernel;
use proptest::prelude::*;

fn sequences(alphabet: usize, n: usize) -> Vec<Vec<usize>> {
    (0..alphabet.pow(n as u32))
        .map(|mut code| {
            let mut v = vec![0; n];
            for slot in v.iter_mut().rev() {
                *slot = code % alphabet;
                code /= alphabet;
            }
            v
        })
        .collect()
}

fn check_law(k: &FscKernel, n: usize) -> Result<(), TestCaseError> {
    let (ns, nx, ny) = (k.states().size(), k.inputs().size(), k.outputs().size());
    let ys_all = sequences(ny, n);
    for xs in sequences(nx, n) {
        for s0 in 0..ns {
            let mut total = 0.0;
            for ys in &ys_all {
                let fwd = k.causal_prob(&xs, ys, s0).unwrap();
                let lit = literal_channel_law(k, &xs, ys, Some(s0));
                prop_assert!((fwd - lit).abs() <= 1e-12, "{xs:?} {ys:?} s0={s0}: {fwd} vs {lit}");
                total += fwd;
            }
            prop_assert!((total - 1.0).abs() <= 1e-9, "mass {total}");
        }
        for ys in &ys_all {
            let avg = k.causal_prob_averaged(&xs, ys).unwrap();
            let mix: f64 = (0..ns)
                .map(|s| k.initial()[s] * k.causal_prob(&xs, ys, s).unwrap())
                .sum();
            prop_assert!((avg - mix).abs() <= 1e-12);
            prop_assert!((avg - literal_channel_law(k, &xs, ys, None)).abs() <= 1e-12);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_recursion_matches_state_path_sum(
        seed in any::<u64>(),
        ns in 1usize..=3,
        nx in 1usize..=2,
        ny in 1usize..=3,
        n in 1usize..=3,
    ) {
        let k = common::random_kernel(seed, ns, nx, ny);
        prop_assert!(k.validate().is_empty());
        check_law(&k, n)?;
    }

    #[test]
    fn tabulated_law_matches_state_path_sum(seed in any::<u64>(), ns in 1usize..=3, n in 1usize..=2) {
        let k = common::random_kernel(seed, ns, 2, 2);
        let sys = common::erasure_feedback(2);
        for s0 in (0..ns).map(Some).chain([None]) {
            let pb = BaaProblem::new(&k, &sys, n, s0).unwrap();
            let ix = *pb.indexer();
            for (t, &p) in pb.channel_law().iter().enumerate() {
                let traj = ix.decode_trajectory(n, t);
                let xs: Vec<usize> = traj.iter().map(|&(u, _)| ix.split_letter(u).0).collect();
                let ys: Vec<usize> = traj.iter().map(|&(_, y)| y).collect();
                let lit = literal_channel_law(&k, &xs, &ys, s0);
                prop_assert!((p - lit).abs() <= 1e-12, "t={t}: {p} vs {lit}");
            }
        }
    }
}

#[test]
fn observed_state_law_on_the_feed_example() {
    let (k, _) = fscap_core::instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
    assert_eq!(k.outputs().size(), 4);
    check_law(&k, 3).unwrap();
}

#[test]
fn structural_predicates_of_the_feed_example() {
    let k = fscap_core::instances::to_feed_or_not(0.3, 0.6, 0.5, 0.5);
    assert!(k.is_no_isi());
    let info = k.indecomposability().unwrap();
    let pi = info.stationary_dist.expect("indecomposable");
    assert!((pi[0] - 2.0 / 3.0).abs() < 1e-10);
    let t = k.state_transition().unwrap();
    for j in 0..2 {
        let moved: f64 = (0..2).map(|i| pi[i] * t[i][j]).sum();
        assert!((moved - pi[j]).abs() < 1e-10);
    }
    assert!(!fscap_core::instances::trapdoor_like().is_no_isi());
}
