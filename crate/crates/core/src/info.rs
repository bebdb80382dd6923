//! Information functionals of a [`TrajectoryDistribution`].
//!
//! Directed information is evaluated through the chain rule
//! `Σ_i H(Y_i | Y^{i-1}) − H(Y_i | Y^{i-1}, V^i)` where `V` is either the
//! `(x, a)` letter or the channel input alone. Entropies are accumulated with
//! compensated sums and the `0 log 0 = 0` guard.

use crate::error::{Error, Result};
use crate::numeric::{entropy, CompensatedSum};
use crate::policy::{HistoryIndexer, TrajectoryDistribution};

/// Joints whose total mass is further than this from 1 are rejected.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Which part of the letter counts as "the input" of the directed information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputView {
    /// The `(x, a)` pair.
    Letters,
    /// The channel input `x` only.
    ChannelInputs,
}

fn checked(joint: &TrajectoryDistribution) -> Result<()> {
    let m = joint.total_mass();
    if (m - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(m));
    }
    Ok(())
}

/// Marginal over the first `len` steps, keyed by the interleaved prefix code.
fn prefix_marginal(joint: &TrajectoryDistribution, len: usize) -> Vec<f64> {
    let ix = joint.indexer();
    let radix = ix.letters() * ix.outputs();
    let block = radix.pow((ix.block_length() - len) as u32);
    let mut acc = vec![CompensatedSum::new(); radix.pow(len as u32)];
    for (code, &p) in joint.probs().iter().enumerate() {
        if p > 0.0 {
            acc[code / block].add(p);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// Re-keys a prefix marginal by projecting each step's `(u, y)` digit pair.
/// `keep_last_output = false` drops the output of the final step.
fn project(
    ix: &HistoryIndexer,
    prefix: &[f64],
    len: usize,
    view: Option<InputView>,
    keep_last_output: bool,
) -> Vec<f64> {
    let nv = match view {
        None => 1,
        Some(InputView::Letters) => ix.letters(),
        Some(InputView::ChannelInputs) => ix.inputs(),
    };
    let ny = ix.outputs();
    let size = (nv * ny).pow(len as u32);
    let mut acc = vec![CompensatedSum::new(); size];
    for (code, &p) in prefix.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut key = 0;
        for (step, (u, y)) in ix.decode_trajectory(len, code).into_iter().enumerate() {
            let v = match view {
                None => 0,
                Some(InputView::Letters) => u,
                Some(InputView::ChannelInputs) => ix.split_letter(u).0,
            };
            let y = if !keep_last_output && step + 1 == len { 0 } else { y };
            key = (key * nv + v) * ny + y;
        }
        acc[key].add(p);
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// `I(V^N → Y^N)` in bits.
pub fn directed_information_view(joint: &TrajectoryDistribution, view: InputView) -> Result<f64> {
    checked(joint)?;
    let ix = *joint.indexer();
    let n = ix.block_length();
    let mut total = CompensatedSum::new();
    let full = prefix_marginal(joint, n);
    total.add(entropy(&project(&ix, &full, n, None, true)));
    for i in 1..=n {
        let prefix = if i == n { full.clone() } else { prefix_marginal(joint, i) };
        total.add(-entropy(&project(&ix, &prefix, i, Some(view), true)));
        total.add(entropy(&project(&ix, &prefix, i, Some(view), false)));
    }
    Ok(total.value().max(0.0))
}

/// `Σ_i I(X^i, A^i; Y_i | Y^{i-1})`, or `Σ_i I(X^i; Y_i | Y^{i-1})` when the
/// action alphabet is a singleton (the two coincide in that case).
pub fn directed_information(joint: &TrajectoryDistribution) -> Result<f64> {
    directed_information_view(joint, InputView::Letters)
}

/// `I(V^N; Y^N)` in bits.
pub fn mutual_information_view(joint: &TrajectoryDistribution, view: InputView) -> Result<f64> {
    checked(joint)?;
    let ix = *joint.indexer();
    let n = ix.block_length();
    let full = prefix_marginal(joint, n);
    let nv = match view {
        InputView::Letters => ix.letters(),
        InputView::ChannelInputs => ix.inputs(),
    };
    let ny = ix.outputs();
    let mut v_marg = vec![CompensatedSum::new(); nv.pow(n as u32)];
    let mut y_marg = vec![CompensatedSum::new(); ny.pow(n as u32)];
    let mut vy = vec![CompensatedSum::new(); (nv * ny).pow(n as u32)];
    for (code, &p) in full.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (mut kv, mut ky, mut kvy) = (0, 0, 0);
        for (u, y) in ix.decode_trajectory(n, code) {
            let v = match view {
                InputView::Letters => u,
                InputView::ChannelInputs => ix.split_letter(u).0,
            };
            kv = kv * nv + v;
            ky = ky * ny + y;
            kvy = (kvy * nv + v) * ny + y;
        }
        v_marg[kv].add(p);
        y_marg[ky].add(p);
        vy[kvy].add(p);
    }
    let h = |acc: &[CompensatedSum]| entropy(&acc.iter().map(CompensatedSum::value).collect::<Vec<_>>());
    Ok((h(&v_marg) + h(&y_marg) - h(&vy)).max(0.0))
}

/// `I(X^N, A^N; Y^N)` in bits.
pub fn mutual_information(joint: &TrajectoryDistribution) -> Result<f64> {
    mutual_information_view(joint, InputView::Letters)
}

/// `H(Y^N)` in bits.
pub fn output_entropy(joint: &TrajectoryDistribution) -> Result<f64> {
    checked(joint)?;
    let ix = *joint.indexer();
    let n = ix.block_length();
    Ok(entropy(&project(&ix, joint.probs(), n, None, true)))
}

/// `H(X^N, A^N, Y^N)` in bits.
pub fn joint_entropy(joint: &TrajectoryDistribution) -> Result<f64> {
    checked(joint)?;
    Ok(entropy(joint.probs()))
}

/// Directed information conditioned on the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDirectedInfo {
    /// `I(X^N → Y^N | S_0 = s)` for each supplied state.
    pub per_state: Vec<f64>,
    /// `Σ_s P(s) I(X^N → Y^N | S_0 = s)`.
    pub weighted: f64,
}

/// Evaluates `I(X^N → Y^N | S_0)` from per-state joints and their weights.
pub fn conditional_directed_information(
    parts: &[(f64, &TrajectoryDistribution)],
) -> Result<ConditionalDirectedInfo> {
    let per_state = parts
        .iter()
        .map(|(_, j)| directed_information(j))
        .collect::<Result<Vec<_>>>()?;
    let weighted = parts
        .iter()
        .zip(&per_state)
        .map(|((w, _), v)| w * v)
        .collect::<CompensatedSum>()
        .value();
    Ok(ConditionalDirectedInfo {
        per_state,
        weighted,
    })
}
