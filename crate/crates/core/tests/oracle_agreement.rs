mod common;

use fscap_core::baa::{BaaOptions, BaaProblem, BaaState};
use fscap_core::info::{directed_information_view, InputView};
use fscap_core::instances;
use fscap_core::oracle::{
    grid_capacity, literal_directed_info, literal_r_update, max_policy_gap, policy_tables,
    GridObjective, JointLayout, LiteralInstance, OracleMethod, OracleReport,
};
use fscap_core::tradeoff::{default_lambda_grid, sweep_lambda};
use fscap_core::{ActionSystem, FscKernel, HistoryIndexer, TrajectoryDistribution};
use proptest::prelude::*;

/// Largest entrywise gap between the literal update and `update_r` after
/// `warmup` ordinary iterations.
fn r_update_gap(k: &FscKernel, sys: &ActionSystem, n: usize, s0: Option<usize>, lambda: f64, warmup: usize) -> f64 {
    let pb = BaaProblem::new(k, sys, n, s0).unwrap();
    let mut st = BaaState::new(&pb, lambda).unwrap();
    for _ in 0..warmup {
        st.step();
    }
    let before = policy_tables(st.policy());
    let q = st.reverse();
    let ix = *pb.indexer();
    let lookup = |us: &[usize], ys: &[usize]| {
        let code = us.iter().zip(ys).fold(0, |c, (&u, &y)| ix.push_trajectory(c, u, y));
        q[code]
    };
    let inst = LiteralInstance { kernel: k, sys, block_length: n, initial_state: s0 };
    let literal = literal_r_update(&inst, lambda, &before, &lookup).unwrap();
    st.update_r();
    max_policy_gap(&literal, st.policy())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn literal_r_update_matches_the_backward_pass(
        seed in any::<u64>(),
        ns in 1usize..=2,
        n in 1usize..=2,
        warmup in 0usize..4,
        lambda in prop::sample::select(vec![0.0, 0.2, 1.7, 1e3]),
        averaged in any::<bool>(),
    ) {
        let k = common::random_kernel(seed, ns, 2, 2);
        let sys = common::erasure_feedback(2);
        let s0 = if averaged { None } else { Some(0) };
        let gap = r_update_gap(&k, &sys, n, s0, lambda, warmup);
        prop_assert!(gap <= 1e-10, "gap {gap}");
    }
}

#[test]
fn literal_r_update_on_the_feed_example() {
    let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
    for n in [1, 2] {
        for lambda in [0.0, 0.05, 0.3, 1e3] {
            for warmup in [0, 1, 5] {
                let gap = r_update_gap(&k, &sys, n, Some(0), lambda, warmup);
                assert!(gap <= 1e-10, "N={n} λ={lambda}: {gap}");
            }
        }
    }
}

#[test]
fn heavy_penalty_update_concentrates_on_free_actions() {
    let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
    let pb = BaaProblem::new(&k, &sys, 1, Some(0)).unwrap();
    let mut st = BaaState::new(&pb, 1e3).unwrap();
    st.update_r();
    let ix = pb.indexer();
    let costly: f64 = (0..ix.letters())
        .filter(|&u| ix.split_letter(u).1 == 1)
        .map(|u| st.policy().prob(1, 0, u))
        .sum();
    assert!(costly < 1e-100);
}

#[test]
fn literal_directed_information_matches_chain_rule_on_random_joints() {
    let mut rng = common::rng(0xd1);
    let shapes = [(1, 2, 1, 2), (2, 2, 2, 2), (2, 2, 1, 3), (3, 2, 1, 2), (2, 3, 2, 2)];
    for case in 0..100 {
        let (n, nx, na, ny) = shapes[case % shapes.len()];
        let ix = HistoryIndexer::new(n, nx, na, ny, 1).unwrap();
        let probs = common::simplex(&mut rng, ix.trajectories(), case % 2 == 0);
        let joint = TrajectoryDistribution::from_dense(ix, probs.clone(), vec![0; na * ny], None).unwrap();
        let chain = directed_information_view(&joint, InputView::ChannelInputs).unwrap();
        let layout = JointLayout { block_length: n, inputs: nx, actions: na, outputs: ny };
        let literal = literal_directed_info(layout, &probs).unwrap();
        assert!((chain - literal).abs() <= 1e-9, "case {case}: {chain} vs {literal}");
    }
}

#[test]
fn literal_directed_information_closed_forms() {
    // BSC(0.25) with i.i.d. uniform inputs over two uses
    let k = instances::bsc(0.25);
    let sys = instances::no_feedback(2);
    let ix = HistoryIndexer::for_system(&k, &sys, 2).unwrap();
    let joint = fscap_core::policy::build_joint(&fscap_core::CausalPolicy::uniform(ix), &k, &sys, Some(0)).unwrap();
    let layout = JointLayout { block_length: 2, inputs: 2, actions: 1, outputs: 2 };
    let v = literal_directed_info(layout, joint.probs()).unwrap();
    assert!((v - 2.0 * 0.188721875540867).abs() < 1e-12);
}

fn envelope_at(k: &FscKernel, sys: &ActionSystem, n: usize, gamma: f64) -> f64 {
    let opts = BaaOptions { epsilon: 1e-7, max_iters: 100_000, initial_state: Some(0), ..Default::default() };
    sweep_lambda(k, sys, n, &default_lambda_grid(), &opts).unwrap().envelope(gamma)
}

#[test]
fn grid_search_agrees_with_the_envelope() {
    let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
    for (n, step) in [(1, 0.05), (2, 0.1)] {
        for gamma in [0.0, 0.05, 1.0] {
            let grid = grid_capacity(&k, &sys, n, step, gamma, GridObjective::InitialState(0)).unwrap();
            let report = OracleReport {
                quantity: format!("C_{n}({gamma})"),
                oracle_value: grid.value,
                main_value: envelope_at(&k, &sys, n, gamma),
                search_space_size: grid.points,
                method: OracleMethod::GridSearch,
                tolerance: 5e-3,
            };
            assert!(report.passed(), "{report:?}");
            // grid points are feasible policies, the envelope an upper bound
            assert!(report.oracle_value <= report.main_value + 1e-9, "{report:?}");
        }
    }
}

#[test]
fn grid_search_on_the_bsc() {
    let k = instances::bsc(0.25);
    let sys = instances::no_feedback(2);
    let grid = grid_capacity(&k, &sys, 1, 0.01, 0.0, GridObjective::WorstCase).unwrap();
    assert!((grid.value - 0.188722).abs() <= 2e-4);
    let main = fscap_core::baa::run_baa(&k, &sys, 1, 0.0, &BaaOptions::default()).unwrap().point.i_upper;
    assert!((grid.value - main).abs() <= 5e-3);
}

#[test]
fn oracle_report_gap_is_recomputed() {
    let mut r = OracleReport {
        quantity: "x".into(),
        oracle_value: 1.0,
        main_value: 1.0,
        search_space_size: 1,
        method: OracleMethod::LiteralSum,
        tolerance: 1e-10,
    };
    assert!(r.passed());
    r.main_value = 1.1;
    assert!((r.absolute_gap() - 0.1).abs() < 1e-12);
    assert!(!r.passed());
}
