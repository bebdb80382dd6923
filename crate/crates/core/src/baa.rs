//! Alternating maximization of `(1/N) I(X^N → Y^N) − λ E[Λ]` over causal
//! encoder policies `r(x^N, a^N || z^{N-1})`.
//!
//! Each outer iteration runs a backward pass of per-step `r` updates
//! (`i = N, …, 1`, each a closed-form coordinate maximizer given the reverse
//! channel `q` and the already updated later factors), then sets `q` to the
//! posterior `q(x^N, a^N | y^N) ∝ r · p`. After every iteration the
//! Lagrangian is bracketed by `I_L ≤ optimum ≤ I_U`.
//!
//! Trajectories are enumerated densely; all products of probabilities along a
//! trajectory are carried as base-2 log sums.

use crate::action::ActionSystem;
use crate::error::{Error, Result};
use crate::kernel::FscKernel;
use crate::numeric::{normalize_log2, weighted, CompensatedSum};
use crate::policy::{build_joint, CausalPolicy, HistoryIndexer, TrajectoryDistribution};
use serde::{Deserialize, Serialize};

/// Stopping rule and conditioning for [`run_baa`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaaOptions {
    /// Stop once `I_U − I_L ≤ epsilon` (bits).
    pub epsilon: f64,
    pub max_iters: usize,
    /// Condition on this initial state; `None` averages over the kernel's
    /// initial distribution.
    pub initial_state: Option<usize>,
    /// Keep `(I_L, I_U)` for every iteration.
    pub record_trace: bool,
}

impl Default for BaaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 10_000,
            initial_state: None,
            record_trace: false,
        }
    }
}

/// Read-only tables shared by every λ at one block length.
#[derive(Debug, Clone)]
pub struct BaaProblem {
    ix: HistoryIndexer,
    initial_state: Option<usize>,
    max_cost: f64,
    /// `P(y^N || x^N)` per trajectory code.
    law: Vec<f64>,
    log_law: Vec<f64>,
    /// `Σ_j Λ(a_j)` per trajectory.
    cost: Vec<f64>,
    /// `history[i-1][t]`: step-`i` history code of trajectory `t`.
    history: Vec<Vec<u32>>,
    /// `(u^N, z^N)` code of each trajectory.
    leaf: Vec<u32>,
    /// `y^N` code of each trajectory.
    outputs: Vec<u32>,
}

impl BaaProblem {
    pub fn new(kernel: &FscKernel, sys: &ActionSystem, n: usize, initial_state: Option<usize>) -> Result<Self> {
        kernel.ensure_valid()?;
        let ix = HistoryIndexer::for_system(kernel, sys, n)?;
        let causal = kernel.causal_law(n, initial_state)?;
        let (nu, ny, nz) = (ix.letters(), ix.outputs(), ix.feedback());
        let total = ix.trajectories();
        let leaves = (nu * nz).pow(n as u32);
        if leaves > u32::MAX as usize {
            return Err(Error::SizeCap {
                what: "policy tree",
                size: leaves as u128,
                cap: u32::MAX as usize,
            });
        }
        let mut law = Vec::with_capacity(total);
        let mut cost = Vec::with_capacity(total);
        let mut history = vec![Vec::with_capacity(total); n];
        let mut leaf = Vec::with_capacity(total);
        let mut outputs = Vec::with_capacity(total);
        for t in 0..total {
            let (mut xy, mut h, mut yc, mut c) = (0usize, 0usize, 0usize, CompensatedSum::new());
            for (i, (u, y)) in ix.decode_trajectory(n, t).into_iter().enumerate() {
                history[i].push(h as u32);
                let (x, a) = ix.split_letter(u);
                xy = xy * ix.inputs() * ny + x * ny + y;
                h = ix.push_history(h, u, sys.z(a, 0, y));
                yc = yc * ny + y;
                c.add(sys.cost(a, 0));
            }
            law.push(causal.full()[xy]);
            cost.push(c.value());
            leaf.push(h as u32);
            outputs.push(yc as u32);
        }
        let log_law = law.iter().map(|p| p.log2()).collect();
        Ok(Self {
            ix,
            initial_state,
            max_cost: sys.max_cost(),
            law,
            log_law,
            cost,
            history,
            leaf,
            outputs,
        })
    }

    pub fn indexer(&self) -> &HistoryIndexer {
        &self.ix
    }

    pub fn block_length(&self) -> usize {
        self.ix.block_length()
    }

    pub fn initial_state(&self) -> Option<usize> {
        self.initial_state
    }

    /// Largest single-step action cost.
    pub fn max_cost(&self) -> f64 {
        self.max_cost
    }

    /// `P(y^N || x^N)` indexed by trajectory code.
    pub fn channel_law(&self) -> &[f64] {
        &self.law
    }

    /// `Σ_j Λ(a_j)` indexed by trajectory code.
    pub fn cost_sums(&self) -> &[f64] {
        &self.cost
    }

    /// Step-`i` history code of trajectory `t`.
    #[inline]
    pub fn history_of(&self, i: usize, t: usize) -> usize {
        self.history[i - 1][t] as usize
    }

    /// `y^N` code of trajectory `t`.
    #[inline]
    pub fn output_of(&self, t: usize) -> usize {
        self.outputs[t] as usize
    }

    /// Letter `u_i` of trajectory `t`.
    #[inline]
    pub fn letter_of(&self, i: usize, t: usize) -> usize {
        let ix = &self.ix;
        let radix = ix.letters() * ix.outputs();
        (t / radix.pow((ix.block_length() - i) as u32) / ix.outputs()) % ix.letters()
    }

    fn output_count(&self) -> usize {
        self.ix.outputs().pow(self.ix.block_length() as u32)
    }

    /// `log2 r(u^N || z^{N-1})` for every trajectory.
    pub fn log_policy(&self, r: &CausalPolicy) -> Vec<f64> {
        (0..self.law.len())
            .map(|t| {
                (1..=self.block_length())
                    .map(|i| r.prob(i, self.history_of(i, t), self.letter_of(i, t)).log2())
                    .sum()
            })
            .collect()
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Iterate of the alternating maximization at a fixed λ.
#[derive(Debug, Clone)]
pub struct BaaState<'a> {
    problem: &'a BaaProblem,
    lambda: f64,
    r: CausalPolicy,
    /// `log2 q(u^N | y^N)` per trajectory.
    log_q: Vec<f64>,
    /// `log2 Σ_{u^N} r p` per output sequence.
    log_output: Vec<f64>,
    iteration: usize,
    lower: f64,
    upper: f64,
    unreachable_r: usize,
    unreachable_q: usize,
}

impl<'a> BaaState<'a> {
    /// Uniform `r`, `q = q*(r)`, bounds evaluated.
    pub fn new(problem: &'a BaaProblem, lambda: f64) -> Result<Self> {
        Self::with_policy(problem, lambda, CausalPolicy::uniform(problem.ix))
    }

    pub fn with_policy(problem: &'a BaaProblem, lambda: f64, r: CausalPolicy) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ must be finite and ≥ 0, got {lambda}")));
        }
        if *r.indexer() != problem.ix {
            return Err(Error::InvalidArgument("policy shape does not match the problem".into()));
        }
        let mut state = Self {
            problem,
            lambda,
            r,
            log_q: Vec::new(),
            log_output: Vec::new(),
            iteration: 0,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            unreachable_r: 0,
            unreachable_q: 0,
        };
        state.update_q();
        state.refresh_bounds();
        Ok(state)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn policy(&self) -> &CausalPolicy {
        &self.r
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn lower(&self) -> f64 {
        self.lower
    }
    pub fn upper(&self) -> f64 {
        self.upper
    }
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
    /// `log2 q(u^N | y^N)` by trajectory code.
    pub fn log_reverse(&self) -> &[f64] {
        &self.log_q
    }
    /// `q(u^N | y^N)` by trajectory code.
    pub fn reverse(&self) -> Vec<f64> {
        self.log_q.iter().map(|v| v.exp2()).collect()
    }
    /// Policy slices set uniform because no compatible output prefix had
    /// positive weight (last `r` update).
    pub fn unreachable_policy_slices(&self) -> usize {
        self.unreachable_r
    }
    /// Output sequences with zero probability under the current policy.
    pub fn unreachable_outputs(&self) -> usize {
        self.unreachable_q
    }

    /// Replaces `q` with the posterior `r·p / Σ_{x^N,a^N} r·p`.
    pub fn update_q(&mut self) {
        let pb = self.problem;
        let nu_n = pb.ix.letters().pow(pb.block_length() as u32) as f64;
        let log_r = pb.log_policy(&self.r);
        let mut mass = vec![CompensatedSum::new(); pb.output_count()];
        for t in 0..pb.law.len() {
            if pb.law[t] > 0.0 && log_r[t] > f64::NEG_INFINITY {
                mass[pb.output_of(t)].add((log_r[t] + pb.log_law[t]).exp2());
            }
        }
        self.log_output = mass.iter().map(|m| m.value().log2()).collect();
        self.unreachable_q = self.log_output.iter().filter(|v| **v == f64::NEG_INFINITY).count();
        self.log_q = (0..pb.law.len())
            .map(|t| {
                let out = self.log_output[pb.output_of(t)];
                if out == f64::NEG_INFINITY {
                    -nu_n.log2()
                } else {
                    log_r[t] + pb.log_law[t] - out
                }
            })
            .collect();
    }

    /// Backward pass over steps `N, …, 1`, each step using the factors of the
    /// later steps already updated in this pass.
    pub fn update_r(&mut self) {
        let pb = self.problem;
        let n = pb.block_length();
        let nu = pb.ix.letters();
        let mut suffix = vec![0.0f64; pb.law.len()];
        self.unreachable_r = 0;
        for i in (1..=n).rev() {
            let slots = pb.ix.histories(i) * nu;
            let mut num = vec![CompensatedSum::new(); slots];
            let mut den = vec![CompensatedSum::new(); slots];
            // a letter whose posterior vanished somewhere stays at zero
            let mut dead = vec![false; slots];
            for t in 0..pb.law.len() {
                if pb.law[t] == 0.0 || suffix[t] == f64::NEG_INFINITY {
                    continue;
                }
                let w = pb.law[t] * suffix[t].exp2();
                if w == 0.0 {
                    continue;
                }
                let slot = pb.history_of(i, t) * nu + pb.letter_of(i, t);
                let value = self.log_q[t] - suffix[t] - self.lambda * pb.cost[t];
                if value == f64::NEG_INFINITY {
                    dead[slot] = true;
                    continue;
                }
                num[slot].add(weighted(w, value));
                den[slot].add(w);
            }
            for h in 0..pb.ix.histories(i) {
                let mut logs: Vec<f64> = (0..nu)
                    .map(|u| {
                        let d = den[h * nu + u].value();
                        if d > 0.0 && !dead[h * nu + u] {
                            num[h * nu + u].value() / d
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                if !normalize_log2(&mut logs) {
                    self.unreachable_r += 1;
                }
                self.r.slice_mut(i, h).copy_from_slice(&logs);
            }
            for (t, s) in suffix.iter_mut().enumerate() {
                *s += self.r.prob(i, pb.history_of(i, t), pb.letter_of(i, t)).log2();
            }
        }
    }

    /// `I_L = (1/N) Σ r p log(q / r) − λ E[Λ]` at the current `(r, q)`.
    pub fn lower_bound(&self) -> f64 {
        let pb = self.problem;
        let log_r = pb.log_policy(&self.r);
        let mut acc = CompensatedSum::new();
        for t in 0..pb.law.len() {
            let rp = (log_r[t] + pb.log_law[t]).exp2();
            if rp > 0.0 {
                acc.add(rp * (self.log_q[t] - log_r[t] - self.lambda * pb.cost[t]));
            }
        }
        acc.value() / pb.block_length() as f64
    }

    /// Terminal payoff `Σ p·[log(p / p_r(y^N)) − λ ΣΛ]` aggregated on each
    /// `(u^N, z^N)` leaf of the policy tree.
    fn leaf_payoffs(&self, key: impl Fn(usize) -> usize, size: usize) -> Vec<f64> {
        let pb = self.problem;
        let mut leaves = vec![CompensatedSum::new(); size];
        for t in 0..pb.law.len() {
            let p = pb.law[t];
            if p == 0.0 {
                continue;
            }
            let g = pb.log_law[t] - self.log_output[pb.output_of(t)] - self.lambda * pb.cost[t];
            leaves[key(t)].add(p * g);
        }
        leaves.iter().map(CompensatedSum::value).collect()
    }

    /// Upper bound on the Lagrangian maximum: the best response of a causal
    /// policy that sees the sampled feedback, against the current output law.
    /// Ties in the maximization go to the lowest letter index.
    pub fn upper_bound(&self) -> f64 {
        self.upper_bound_with_policy().0
    }

    /// [`Self::upper_bound`] together with the deterministic maximizing policy.
    pub fn upper_bound_with_policy(&self) -> (f64, CausalPolicy) {
        let pb = self.problem;
        let ix = pb.ix;
        let (nu, nz, n) = (ix.letters(), ix.feedback(), ix.block_length());
        let mut level = self.leaf_payoffs(|t| pb.leaf[t] as usize, (nu * nz).pow(n as u32));
        let mut tables = vec![Vec::new(); n];
        for i in (1..=n).rev() {
            let nodes = ix.histories(i);
            let mut next = vec![0.0; nodes];
            let mut table = vec![0.0; nodes * nu];
            for h in 0..nodes {
                let (best_u, best) = best_letter(nu, |u| {
                    (0..nz)
                        .map(|z| level[ix.push_history(h, u, z)])
                        .collect::<CompensatedSum>()
                        .value()
                });
                next[h] = best;
                table[h * nu + best_u] = 1.0;
            }
            tables[i - 1] = table;
            level = next;
        }
        let policy = CausalPolicy::from_tables(ix, tables).expect("one-hot slices");
        (level[0] / n as f64, policy)
    }

    /// The looser variant that maximizes over letters with the full past
    /// output in view (equal to [`Self::upper_bound`] under full feedback).
    pub fn upper_bound_output_nested(&self) -> f64 {
        let pb = self.problem;
        let ix = pb.ix;
        let (nu, ny, n) = (ix.letters(), ix.outputs(), ix.block_length());
        let mut level = self.leaf_payoffs(|t| t, pb.law.len());
        for i in (1..=n).rev() {
            let nodes = (nu * ny).pow((i - 1) as u32);
            level = (0..nodes)
                .map(|node| {
                    best_letter(nu, |u| {
                        (0..ny)
                            .map(|y| level[ix.push_trajectory(node, u, y)])
                            .collect::<CompensatedSum>()
                            .value()
                    })
                    .1
                })
                .collect();
        }
        level[0] / n as f64
    }

    /// `E_r[(1/N) Σ Λ(a_i)]`.
    pub fn expected_cost(&self) -> f64 {
        let pb = self.problem;
        let log_r = pb.log_policy(&self.r);
        let mut acc = CompensatedSum::new();
        for t in 0..pb.law.len() {
            let rp = (log_r[t] + pb.log_law[t]).exp2();
            if rp > 0.0 {
                acc.add(rp * pb.cost[t]);
            }
        }
        acc.value() / pb.block_length() as f64
    }

    fn refresh_bounds(&mut self) {
        self.lower = self.lower_bound();
        self.upper = self.upper_bound();
    }

    /// One `r` pass, one `q` update, bounds refreshed.
    pub fn step(&mut self) {
        self.update_r();
        self.update_q();
        self.refresh_bounds();
        self.iteration += 1;
    }

    /// Joint distribution induced by the current policy.
    pub fn joint(&self, kernel: &FscKernel, sys: &ActionSystem) -> Result<TrajectoryDistribution> {
        build_joint(&self.r, kernel, sys, self.problem.initial_state)
    }
}

fn best_letter(nu: usize, mut value: impl FnMut(usize) -> f64) -> (usize, f64) {
    let mut best = (0, value(0));
    for u in 1..nu {
        let v = value(u);
        if v > best.1 {
            best = (u, v);
        }
    }
    best
}

/// Result of one λ: Lagrangian bracket, cost and the implied rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    /// Expected per-step cost `Γ^(λ)` of the final policy.
    pub gamma: f64,
    /// Rate `I_U + λ Γ^(λ)`; the supporting line `I_U + λ Γ` upper-bounds
    /// `C_N(Γ)` for every `Γ`.
    pub c_lambda: f64,
    /// Final Lagrangian lower bound.
    pub i_lower: f64,
    /// Final Lagrangian upper bound.
    pub i_upper: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_gap: f64,
}

impl TradeoffPoint {
    /// Value of the supporting line at cost `gamma`.
    pub fn line(&self, gamma: f64) -> f64 {
        self.i_upper + self.lambda * gamma
    }
}

/// Full output of [`run_baa`].
#[derive(Debug, Clone)]
pub struct BaaRun {
    pub point: TradeoffPoint,
    pub policy: CausalPolicy,
    /// Empty unless [`BaaOptions::record_trace`] was set.
    pub trace: Vec<IterationTrace>,
}

/// Runs the alternating maximization at one λ on a prepared problem.
pub fn run_baa_on(problem: &BaaProblem, lambda: f64, opts: &BaaOptions) -> Result<BaaRun> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut state = BaaState::new(problem, lambda)?;
    let mut trace = Vec::new();
    let record = |s: &BaaState, trace: &mut Vec<IterationTrace>| {
        if opts.record_trace {
            trace.push(IterationTrace {
                iteration: s.iteration,
                lower: s.lower,
                upper: s.upper,
            });
        }
    };
    record(&state, &mut trace);
    while state.gap() > opts.epsilon && state.iteration < opts.max_iters {
        state.step();
        record(&state, &mut trace);
    }
    let gamma = state.expected_cost();
    let point = TradeoffPoint {
        lambda,
        gamma,
        c_lambda: state.upper + lambda * gamma,
        i_lower: state.lower,
        i_upper: state.upper,
        iterations: state.iteration,
        converged: state.gap() <= opts.epsilon,
        final_gap: state.gap(),
    };
    Ok(BaaRun {
        point,
        policy: state.r,
        trace,
    })
}

/// Convenience wrapper: builds the problem tables and runs one λ.
pub fn run_baa(
    kernel: &FscKernel,
    sys: &ActionSystem,
    n: usize,
    lambda: f64,
    opts: &BaaOptions,
) -> Result<BaaRun> {
    let problem = BaaProblem::new(kernel, sys, n, opts.initial_state)?;
    run_baa_on(&problem, lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::directed_information;
    use crate::instances;
    use crate::numeric::binary_entropy;

    #[test]
    fn bsc_single_letter_capacity() {
        let k = instances::bsc(0.25);
        let sys = instances::no_feedback(2);
        let opts = BaaOptions {
            epsilon: 1e-9,
            ..Default::default()
        };
        let run = run_baa(&k, &sys, 1, 0.0, &opts).unwrap();
        assert!(run.point.converged);
        assert!((run.point.i_upper - (1.0 - binary_entropy(0.25))).abs() < 1e-6);
    }

    #[test]
    fn bayes_posterior_on_bsc() {
        let k = instances::bsc(0.25);
        let sys = instances::no_feedback(2);
        let pb = BaaProblem::new(&k, &sys, 1, None).unwrap();
        let st = BaaState::new(&pb, 0.0).unwrap();
        let q = st.reverse();
        // trajectory code = u * 2 + y
        assert!((q[0] - 0.75).abs() < 1e-15);
        assert!((q[2] - 0.25).abs() < 1e-15);
        assert!((q[1] - 0.25).abs() < 1e-15);
        assert!((q[3] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn noiseless_posterior_is_identity() {
        let k = instances::noiseless(2);
        let sys = instances::no_feedback(2);
        let pb = BaaProblem::new(&k, &sys, 1, None).unwrap();
        let st = BaaState::new(&pb, 0.0).unwrap();
        assert_eq!(st.reverse(), vec![1.0, 0.0, 0.0, 1.0]);
        assert!((st.lower() - 1.0).abs() < 1e-15);
        assert!((st.upper() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_iterate_brackets_bsc_capacity() {
        let k = instances::bsc(0.25);
        let sys = instances::no_feedback(2);
        let pb = BaaProblem::new(&k, &sys, 1, None).unwrap();
        let mut st = BaaState::new(&pb, 0.0).unwrap();
        st.step();
        let c = 1.0 - binary_entropy(0.25);
        assert!(st.lower() <= c + 1e-12 && c <= st.upper() + 1e-12);
    }

    #[test]
    fn lagrangian_matches_directed_information() {
        let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
        let pb = BaaProblem::new(&k, &sys, 2, Some(0)).unwrap();
        let mut st = BaaState::new(&pb, 0.3).unwrap();
        for _ in 0..5 {
            st.step();
        }
        let di = directed_information(&st.joint(&k, &sys).unwrap()).unwrap();
        let lhs = st.lower() + 0.3 * st.expected_cost();
        assert!((lhs - di / 2.0).abs() < 1e-9, "{lhs} vs {}", di / 2.0);
    }

    #[test]
    fn output_nested_bound_is_looser() {
        let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
        let pb = BaaProblem::new(&k, &sys, 2, Some(0)).unwrap();
        let mut st = BaaState::new(&pb, 0.1).unwrap();
        for _ in 0..3 {
            st.step();
            assert!(st.upper_bound() <= st.upper_bound_output_nested() + 1e-12);
            assert!(st.lower() <= st.upper() + 1e-12);
        }
    }

    #[test]
    fn heavy_penalty_switches_actions_off() {
        let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
        let opts = BaaOptions {
            initial_state: Some(0),
            ..Default::default()
        };
        let run = run_baa(&k, &sys, 2, 1e3, &opts).unwrap();
        assert!(run.point.gamma < 1e-6);
    }

    #[test]
    fn negative_lambda_rejected() {
        let k = instances::bsc(0.1);
        let sys = instances::no_feedback(2);
        assert!(run_baa(&k, &sys, 1, -1.0, &BaaOptions::default()).is_err());
    }
}
