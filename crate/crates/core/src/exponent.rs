//! Random-coding exponent `E_{o,N}(ρ)` for a causal policy and initial state.

use serde::{Deserialize, Serialize};

use crate::action::ActionSystem;
use crate::baa::BaaProblem;
use crate::error::{Error, Result};
use crate::kernel::FscKernel;
use crate::numeric::CompensatedSum;
use crate::policy::CausalPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuery {
    pub rho: f64,
    pub initial_state: usize,
}

/// `E_{o,N}(ρ) = −(1/N) log2 Σ_{y^N} [Σ_{x^N,a^N} r · p(y^N||x^N,s0)^{1/(1+ρ)}]^{1+ρ}`.
///
/// At `ρ = 0` the bracket is a probability sum and the exponent is returned
/// as exactly `0`.
pub fn gallager_exponent(
    policy: &CausalPolicy,
    kernel: &FscKernel,
    sys: &ActionSystem,
    query: ExponentQuery,
) -> Result<f64> {
    let problem = BaaProblem::new(kernel, sys, policy.block_length(), Some(query.initial_state))?;
    exponent_on(&problem, policy, query.rho)
}

/// [`gallager_exponent`] on prepared tables (the problem fixes the initial state).
pub fn exponent_on(problem: &BaaProblem, policy: &CausalPolicy, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("ρ must lie in [0, 1], got {rho}")));
    }
    if policy.indexer() != problem.indexer() {
        return Err(Error::InvalidArgument("policy shape does not match the channel".into()));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let log_r = problem.log_policy(policy);
    let law = problem.channel_law();
    let mut inner = vec![CompensatedSum::new(); problem.indexer().outputs().pow(problem.block_length() as u32)];
    let power = 1.0 / (1.0 + rho);
    for t in 0..law.len() {
        if law[t] > 0.0 && log_r[t] > f64::NEG_INFINITY {
            inner[problem.output_of(t)].add((log_r[t] + power * law[t].log2()).exp2());
        }
    }
    let outer: CompensatedSum = inner
        .iter()
        .map(|s| s.value())
        .filter(|v| *v > 0.0)
        .map(|v| ((1.0 + rho) * v.log2()).exp2())
        .collect();
    Ok(-outer.value().log2() / problem.block_length() as f64)
}

/// Slope of `E_{o,N}` at `ρ = 0⁺` by Richardson extrapolation of forward
/// differences at `h` and `2h`.
pub fn slope_at_zero(problem: &BaaProblem, policy: &CausalPolicy, h: f64) -> Result<f64> {
    let e1 = exponent_on(problem, policy, h)?;
    let e2 = exponent_on(problem, policy, 2.0 * h)?;
    Ok((4.0 * e1 - e2) / (2.0 * h))
}

/// Second difference `E(2h) − 2E(h) + E(0)` divided by `h²`.
pub fn curvature_near_zero(problem: &BaaProblem, policy: &CausalPolicy, h: f64) -> Result<f64> {
    let e1 = exponent_on(problem, policy, h)?;
    let e2 = exponent_on(problem, policy, 2.0 * h)?;
    Ok((e2 - 2.0 * e1) / (h * h))
}

/// `−ρ log2|S| / N + max_k min_{s0} E_{o,N}(ρ, policy_k, s0)` over the supplied
/// candidates only (no global search). Returns the value and the best index.
pub fn exponent_over_candidates(
    candidates: &[CausalPolicy],
    kernel: &FscKernel,
    sys: &ActionSystem,
    rho: f64,
) -> Result<(f64, usize)> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::InvalidArgument("no candidate policies".into()))?;
    let n = first.block_length();
    let ns = kernel.states().size();
    let problems = (0..ns)
        .map(|s| BaaProblem::new(kernel, sys, n, Some(s)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, policy) in candidates.iter().enumerate() {
        let worst = problems
            .iter()
            .map(|p| exponent_on(p, policy, rho))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if worst > best.0 {
            best = (worst, k);
        }
    }
    Ok((best.0 - rho * (ns as f64).log2() / n as f64, best.1))
}
