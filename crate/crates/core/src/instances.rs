//! Canonical channels and action systems used in tests, examples and benches.

use crate::action::ActionSystem;
use crate::kernel::{Alphabet, FscKernel};

/// Binary symmetric channel with crossover `p`, as a one-state kernel.
pub fn bsc(p: f64) -> FscKernel {
    FscKernel::memoryless(&[vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("static shape")
}

/// Noiseless channel on `n` symbols.
pub fn noiseless(n: usize) -> FscKernel {
    let m: Vec<Vec<f64>> = (0..n)
        .map(|x| (0..n).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
        .collect();
    FscKernel::memoryless(&m).expect("static shape")
}

/// Binary-input channel whose output law ignores the input.
pub fn useless(p_one: f64) -> FscKernel {
    FscKernel::memoryless(&[vec![1.0 - p_one, p_one], vec![1.0 - p_one, p_one]])
        .expect("static shape")
}

/// Two-state Markov-modulated binary channel: a Z-channel in state 0 (a sent
/// `1` flips to `0` with probability `eps`) and an S-channel in state 1 (a
/// sent `0` flips to `1` with probability `delta`). The state chain moves
/// `0 → 1` with probability `alpha` and `1 → 0` with probability `beta`,
/// independently of the input. The initial distribution is stationary.
pub fn to_feed_or_not(alpha: f64, beta: f64, eps: f64, delta: f64) -> FscKernel {
    let z = vec![vec![1.0, 0.0], vec![eps, 1.0 - eps]];
    let s = vec![vec![1.0 - delta, delta], vec![0.0, 1.0]];
    let t = vec![vec![1.0 - alpha, alpha], vec![beta, 1.0 - beta]];
    let pi0 = if alpha + beta > 0.0 {
        beta / (alpha + beta)
    } else {
        0.5
    };
    FscKernel::markov_modulated(&[z, s], &t, vec![pi0, 1.0 - pi0]).expect("static shape")
}

/// Binary kernel whose next state equals the current input (state depends on
/// the input, i.e. the channel has ISI); output is `x XOR s`.
pub fn trapdoor_like() -> FscKernel {
    let mut nested = vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2];
    for (s, by_x) in nested.iter_mut().enumerate() {
        for (x, by_y) in by_x.iter_mut().enumerate() {
            by_y[x ^ s][x] = 1.0;
        }
    }
    FscKernel::from_nested(&nested, vec![0.5, 0.5]).expect("static shape")
}

/// Encoder-action system for a kernel whose output is `(y, s')` (see
/// [`FscKernel::with_observed_state`]): action `1` feeds the new state back,
/// action `0` yields the erasure symbol (last feedback index). `Λ(a) = a`.
pub fn state_feedback_actions(outputs: usize, states: usize, budget: f64) -> ActionSystem {
    let erasure = states;
    let sampling: Vec<usize> = (0..2)
        .flat_map(|a| {
            (0..outputs).map(move |out| if a == 1 { out % states } else { erasure })
        })
        .collect();
    let mut labels: Vec<String> = (0..states).map(|s| format!("s{s}")).collect();
    labels.push("*".into());
    ActionSystem::new(
        Alphabet::with_labels(["off", "on"]).expect("distinct"),
        Alphabet::singleton(),
        Alphabet::with_labels(labels).expect("distinct"),
        sampling,
        vec![0.0, 1.0],
        budget,
    )
    .expect("static shape")
}

/// The to-feed-or-not example with the state observed by the receiver and the
/// matching encoder action system.
pub fn to_feed_or_not_system(
    alpha: f64,
    beta: f64,
    eps: f64,
    delta: f64,
    budget: f64,
) -> (FscKernel, ActionSystem) {
    let kernel = to_feed_or_not(alpha, beta, eps, delta).with_observed_state();
    let sys = state_feedback_actions(kernel.outputs().size(), kernel.states().size(), budget);
    (kernel, sys)
}

/// Action system with a single (free) action and full output feedback `z = y`.
pub fn full_feedback(outputs: usize) -> ActionSystem {
    ActionSystem::no_actions(outputs, true)
}

/// Action system with a single (free) action and no feedback at all.
pub fn no_feedback(outputs: usize) -> ActionSystem {
    ActionSystem::no_actions(outputs, false)
}
