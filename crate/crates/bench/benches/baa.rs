use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fscap_bench::{feed_example, feed_problem};
use fscap_core::baa::{run_baa_on, BaaOptions, BaaState};
use fscap_core::info::directed_information;
use fscap_core::policy::build_joint;
use fscap_core::{CausalPolicy, HistoryIndexer};

fn iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("baa_iteration");
    for n in [2usize, 3] {
        let problem = feed_problem(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| {
            let mut state = BaaState::new(p, 0.1).unwrap();
            b.iter(|| {
                state.step();
                black_box(state.gap())
            })
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let problem = feed_problem(2);
    let opts = BaaOptions {
        initial_state: Some(0),
        ..Default::default()
    };
    c.bench_function("baa_run_n2_lambda0.05", |b| {
        b.iter(|| black_box(run_baa_on(&problem, 0.05, &opts).unwrap().point))
    });
}

fn joint_and_di(c: &mut Criterion) {
    let (k, sys) = feed_example();
    let ix = HistoryIndexer::for_system(&k, &sys, 3).unwrap();
    let policy = CausalPolicy::uniform(ix);
    c.bench_function("joint_plus_directed_info_n3", |b| {
        b.iter(|| {
            let joint = build_joint(&policy, &k, &sys, Some(0)).unwrap();
            black_box(directed_information(&joint).unwrap())
        })
    });
}

criterion_group!(benches, iteration, full_run, joint_and_di);
criterion_main!(benches);
