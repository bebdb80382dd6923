//! Fixtures shared by the criterion benches.

use fscap_core::baa::BaaProblem;
use fscap_core::instances;
use fscap_core::{ActionSystem, FscKernel};

/// The two-state to-feed-or-not channel (all parameters 0.5) with state
/// feedback actions.
pub fn feed_example() -> (FscKernel, ActionSystem) {
    instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0)
}

/// Prepared tables for the example at block length `n`, conditioned on state 0.
pub fn feed_problem(n: usize) -> BaaProblem {
    let (k, sys) = feed_example();
    BaaProblem::new(&k, &sys, n, Some(0)).expect("example fits the table caps")
}
