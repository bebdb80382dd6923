//! Single-letter lower bounds `max I(X;Y|S)` for state-observing receivers,
//! zero/unit-cost capacities and the time-sharing line.
//!
//! The input at each state is a mixture `P(x|s) = Σ_c P(c|s) Q(x|c)` over
//! "contexts" `c` the encoder can condition on. The action distribution fixes
//! `P(c|s)`; the input family `Q(x|c)` is optimized by exponentiated-gradient
//! ascent (the objective is concave in `Q`), the action distribution by an
//! exhaustive simplex grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::ActionSystem;
use crate::error::{Error, Result};
use crate::kernel::FscKernel;
use crate::numeric::{checked_pow, CompensatedSum};

/// Who chooses the action and what the encoder learns from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// `P_A(a)`, encoder sees `(a, f(a, s))`.
    Encoder,
    /// `P_{A|S}(a|s)`, encoder sees `(a, f(a, s))`.
    Decoder,
    /// `P_{A|S}(a|s)`, encoder sees `a` only.
    BackwardLink,
}

/// Largest action grid evaluated without complaint.
pub const MAX_GRID_POINTS: u128 = 2_000_000;

/// Input-optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop when the Frank–Wolfe duality gap falls below this (bits).
    pub tolerance: f64,
    pub max_iters: usize,
    /// Random simplex restarts in addition to the uniform start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iters: 20_000,
            restarts: 5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleLetterProblem {
    /// Stationary state distribution.
    pub pi: Vec<f64>,
    /// `channel[s][x][y] = P(y | x, s)`.
    pub channel: Vec<Vec<Vec<f64>>>,
    /// `feedback[a][s] = f(a, s)`.
    pub feedback: Vec<Vec<usize>>,
    pub feedback_size: usize,
    /// `Λ(a)`.
    pub cost: Vec<f64>,
    pub mode: ActionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLetterSolution {
    pub value: f64,
    /// Expected action cost of the maximizer.
    pub cost: f64,
    /// `P_A(a)` (encoder mode) or `P_{A|S}` flattened `[s][a]`.
    pub actions: Vec<f64>,
    /// `Q(x | c)` flattened `[c][x]`.
    pub input: Vec<f64>,
}

impl SingleLetterProblem {
    /// Problem for a no-ISI indecomposable kernel whose state is visible to the
    /// receiver.
    pub fn new(
        kernel: &FscKernel,
        feedback: Vec<Vec<usize>>,
        feedback_size: usize,
        cost: Vec<f64>,
        mode: ActionMode,
    ) -> Result<Self> {
        kernel.ensure_valid()?;
        let info = kernel.indecomposability()?;
        let pi = info.stationary_dist.ok_or_else(|| {
            Error::Precondition("single-letter bounds need an indecomposable state chain".into())
        })?;
        let ns = kernel.states().size();
        if feedback.is_empty() || feedback.len() != cost.len() {
            return Err(Error::Dimension {
                axis: "action".into(),
                expected: feedback.len(),
                found: cost.len(),
            });
        }
        for row in &feedback {
            if row.len() != ns {
                return Err(Error::Dimension {
                    axis: "feedback state".into(),
                    expected: ns,
                    found: row.len(),
                });
            }
            if let Some(&z) = row.iter().find(|&&z| z >= feedback_size) {
                return Err(Error::IndexOutOfRange {
                    axis: "feedback",
                    index: z,
                    size: feedback_size,
                });
            }
        }
        if cost.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument("action costs must be finite and ≥ 0".into()));
        }
        Ok(Self {
            pi,
            channel: kernel.per_state_channel(),
            feedback,
            feedback_size,
            cost,
            mode,
        })
    }

    /// Reads `f(a, s)` off an action system defined over the product output
    /// `(y, s')` with index `y·|S| + s'`; the sampled value must not depend on `y`.
    pub fn from_state_sampling(kernel: &FscKernel, sys: &ActionSystem, mode: ActionMode) -> Result<Self> {
        sys.require_encoder_actions()?;
        let (ns, ny) = (kernel.states().size(), kernel.outputs().size());
        if sys.outputs() != ns * ny {
            return Err(Error::Dimension {
                axis: "sampling output (expected y × state)".into(),
                expected: ns * ny,
                found: sys.outputs(),
            });
        }
        let na = sys.encoder().size();
        let mut feedback = vec![vec![0; ns]; na];
        for (a, row) in feedback.iter_mut().enumerate() {
            for (s, slot) in row.iter_mut().enumerate() {
                let z = sys.z(a, 0, s);
                if (0..ny).any(|y| sys.z(a, 0, y * ns + s) != z) {
                    return Err(Error::Precondition(format!(
                        "feedback for action {a} depends on the channel output, not only on the state"
                    )));
                }
                *slot = z;
            }
        }
        let cost = (0..na).map(|a| sys.cost(a, 0)).collect();
        let mut prob = Self::new(kernel, feedback, sys.feedback().size(), cost, mode)?;
        if mode == ActionMode::BackwardLink {
            prob.feedback = (0..na).map(|a| vec![a; ns]).collect();
            prob.feedback_size = na;
        }
        Ok(prob)
    }

    pub fn states(&self) -> usize {
        self.pi.len()
    }
    pub fn inputs(&self) -> usize {
        self.channel[0].len()
    }
    pub fn actions(&self) -> usize {
        self.cost.len()
    }

    fn contexts(&self) -> usize {
        match self.mode {
            ActionMode::BackwardLink => self.actions(),
            _ => self.actions() * self.feedback_size,
        }
    }

    /// `P(c | s)` flattened `[s][c]` for an action distribution.
    fn context_law(&self, actions: &[f64]) -> Vec<f64> {
        let (ns, na, nc) = (self.states(), self.actions(), self.contexts());
        let mut law = vec![0.0; ns * nc];
        for s in 0..ns {
            for a in 0..na {
                let pa = match self.mode {
                    ActionMode::Encoder => actions[a],
                    _ => actions[s * na + a],
                };
                let c = match self.mode {
                    ActionMode::BackwardLink => a,
                    _ => a * self.feedback_size + self.feedback[a][s],
                };
                law[s * nc + c] += pa;
            }
        }
        law
    }

    fn action_cost(&self, actions: &[f64]) -> f64 {
        let na = self.actions();
        match self.mode {
            ActionMode::Encoder => actions.iter().zip(&self.cost).map(|(p, c)| p * c).sum(),
            _ => (0..self.states())
                .map(|s| {
                    self.pi[s]
                        * (0..na)
                            .map(|a| actions[s * na + a] * self.cost[a])
                            .sum::<f64>()
                })
                .sum(),
        }
    }

    /// Every action distribution on the grid with `resolution` steps per
    /// simplex edge.
    fn action_grid(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        let na = self.actions();
        let blocks = match self.mode {
            ActionMode::Encoder => 1,
            _ => self.states(),
        };
        let per_block = compositions(resolution, na);
        let size = checked_pow(per_block.len(), blocks);
        if size > MAX_GRID_POINTS {
            return Err(Error::SizeCap {
                what: "action grid",
                size,
                cap: MAX_GRID_POINTS as usize,
            });
        }
        let mut grid = vec![Vec::new()];
        for _ in 0..blocks {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    per_block.iter().map(move |c| {
                        let mut v = prefix.clone();
                        v.extend(c.iter().map(|&k| k as f64 / resolution as f64));
                        v
                    })
                })
                .collect();
        }
        Ok(grid)
    }

    /// `max_Q I(X;Y|S)` for a fixed action distribution.
    pub fn value_for_actions(&self, actions: &[f64], opts: &InnerOptions) -> (f64, Vec<f64>) {
        maximize_mixture(&self.pi, &self.channel, &self.context_law(actions), self.contexts(), opts)
    }

    /// Evaluates every grid point once; returns `(cost, value, actions, input)`.
    fn grid_values(&self, resolution: usize, opts: &InnerOptions) -> Result<Vec<(f64, f64, Vec<f64>, Vec<f64>)>> {
        if resolution < 10 {
            return Err(Error::InvalidArgument("resolution must be at least 10".into()));
        }
        let grid = self.action_grid(resolution)?;
        Ok(grid
            .into_par_iter()
            .map(|actions| {
                let (value, input) = self.value_for_actions(&actions, opts);
                (self.action_cost(&actions), value, actions, input)
            })
            .collect())
    }

    pub fn min_cost(&self) -> f64 {
        self.cost.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluated action grid, reusable across budgets.
#[derive(Debug, Clone)]
pub struct LowerBoundTable {
    entries: Vec<(f64, f64, Vec<f64>, Vec<f64>)>,
    min_cost: f64,
}

impl LowerBoundTable {
    pub fn new(prob: &SingleLetterProblem, resolution: usize, opts: &InnerOptions) -> Result<Self> {
        Ok(Self {
            entries: prob.grid_values(resolution, opts)?,
            min_cost: prob.min_cost(),
        })
    }

    /// Best grid point with cost at most `budget` (lowest index on ties).
    pub fn at(&self, budget: f64) -> Result<SingleLetterSolution> {
        if budget < self.min_cost {
            return Err(Error::Infeasible {
                budget,
                min_cost: self.min_cost,
            });
        }
        let mut best: Option<&(f64, f64, Vec<f64>, Vec<f64>)> = None;
        for e in &self.entries {
            if e.0 <= budget + 1e-12 && best.map_or(true, |b| e.1 > b.1) {
                best = Some(e);
            }
        }
        let b = best.ok_or(Error::Infeasible {
            budget,
            min_cost: self.min_cost,
        })?;
        Ok(SingleLetterSolution {
            value: b.1,
            cost: b.0,
            actions: b.2.clone(),
            input: b.3.clone(),
        })
    }
}

/// Single-letter lower bound at one budget.
pub fn single_letter_lower(
    prob: &SingleLetterProblem,
    budget: f64,
    resolution: usize,
    opts: &InnerOptions,
) -> Result<SingleLetterSolution> {
    if budget < prob.min_cost() {
        return Err(Error::Infeasible {
            budget,
            min_cost: prob.min_cost(),
        });
    }
    LowerBoundTable::new(prob, resolution, opts)?.at(budget)
}

/// `(C(0), C(1))`: common-input and per-state-input maxima of `I(X;Y|S)`.
pub fn zero_unit_cost_capacity(prob: &SingleLetterProblem, opts: &InnerOptions) -> (f64, f64) {
    let ns = prob.states();
    let common = vec![1.0; ns];
    let per_state: Vec<f64> = (0..ns * ns)
        .map(|k| if k / ns == k % ns { 1.0 } else { 0.0 })
        .collect();
    let c0 = maximize_mixture(&prob.pi, &prob.channel, &common, 1, opts).0;
    let c1 = maximize_mixture(&prob.pi, &prob.channel, &per_state, ns, opts).0;
    (c0, c1)
}

/// `(1 − Γ) C0 + Γ C1`.
pub fn time_sharing(c0: f64, c1: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * c0 + gamma * c1
}

/// Capacity of the uncosted backward link with at least as many actions as
/// states: the per-state maximum.
pub fn backward_link_capacity_nocost(prob: &SingleLetterProblem, opts: &InnerOptions) -> Result<f64> {
    if prob.actions() < prob.states() {
        return Err(Error::Precondition(format!(
            "backward link needs |A| ≥ |S| (got {} < {})",
            prob.actions(),
            prob.states()
        )));
    }
    Ok(zero_unit_cost_capacity(prob, opts).1)
}

/// All `k`-part compositions of `total`, lexicographic.
fn compositions(total: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// `I(X;Y)` in bits for input `p` and channel rows `w[x][y]`.
pub fn mutual_information(p: &[f64], w: &[Vec<f64>]) -> f64 {
    let ny = w[0].len();
    let out: Vec<f64> = (0..ny)
        .map(|y| p.iter().zip(w).map(|(px, row)| px * row[y]).sum())
        .collect();
    let mut acc = CompensatedSum::new();
    for (px, row) in p.iter().zip(w) {
        if *px == 0.0 {
            continue;
        }
        for (y, &wy) in row.iter().enumerate() {
            if wy > 0.0 {
                acc.add(px * wy * (wy / out[y]).log2());
            }
        }
    }
    acc.value().max(0.0)
}

/// `Σ_s π(s) I(P_s; W_s)` with `P_s(x) = Σ_c law[s][c] Q(x|c)`, plus the
/// gradient with respect to `Q`.
fn objective(pi: &[f64], channel: &[Vec<Vec<f64>>], law: &[f64], nc: usize, q: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let nx = channel[0].len();
    let mut total = CompensatedSum::new();
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for (s, w) in channel.iter().enumerate() {
        if pi[s] == 0.0 {
            continue;
        }
        let px: Vec<f64> = (0..nx)
            .map(|x| (0..nc).map(|c| law[s * nc + c] * q[c * nx + x]).sum())
            .collect();
        total.add(pi[s] * mutual_information(&px, w));
        if let Some(g) = g.as_deref_mut() {
            let ny = w[0].len();
            let out: Vec<f64> = (0..ny)
                .map(|y| px.iter().zip(w).map(|(p, row)| p * row[y]).sum())
                .collect();
            for x in 0..nx {
                let d: f64 = w[x]
                    .iter()
                    .zip(&out)
                    .filter(|(wy, _)| **wy > 0.0)
                    .map(|(wy, o)| wy * (wy / o).log2())
                    .sum();
                for c in 0..nc {
                    g[c * nx + x] += pi[s] * law[s * nc + c] * d;
                }
            }
        }
    }
    total.value()
}

/// Maximizes the mixture objective over `Q(x|c)`; best of a uniform start and
/// `opts.restarts` random starts.
fn maximize_mixture(pi: &[f64], channel: &[Vec<Vec<f64>>], law: &[f64], nc: usize, opts: &InnerOptions) -> (f64, Vec<f64>) {
    let nx = channel[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = ascend(pi, channel, law, nc, vec![1.0 / nx as f64; nc * nx], opts);
    for _ in 0..opts.restarts {
        let mut start = Vec::with_capacity(nc * nx);
        for _ in 0..nc {
            let raw: Vec<f64> = (0..nx).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let t: f64 = raw.iter().sum();
            start.extend(raw.iter().map(|v| v / t));
        }
        let cand = ascend(pi, channel, law, nc, start, opts);
        if cand.0 > best.0 {
            best = cand;
        }
    }
    best
}

fn ascend(pi: &[f64], channel: &[Vec<Vec<f64>>], law: &[f64], nc: usize, mut q: Vec<f64>, opts: &InnerOptions) -> (f64, Vec<f64>) {
    let nx = channel[0].len();
    let mut grad = vec![0.0; q.len()];
    let mut value = objective(pi, channel, law, nc, &q, Some(&mut grad));
    let mut step = 4.0;
    let mut trial = vec![0.0; q.len()];
    for _ in 0..opts.max_iters {
        // Frank–Wolfe gap bounds the suboptimality of a concave objective
        let gap: f64 = (0..nc)
            .map(|c| {
                let g = &grad[c * nx..(c + 1) * nx];
                let qc = &q[c * nx..(c + 1) * nx];
                let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top - g.iter().zip(qc).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum();
        if gap <= opts.tolerance {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            for c in 0..nc {
                let g = &grad[c * nx..(c + 1) * nx];
                let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in 0..nx {
                    let v = q[c * nx + x] * (step * (g[x] - top)).exp2();
                    trial[c * nx + x] = v;
                    total += v;
                }
                for x in 0..nx {
                    trial[c * nx + x] /= total;
                }
            }
            let v = objective(pi, channel, law, nc, &trial, None);
            if v >= value {
                accepted = v > value;
                std::mem::swap(&mut q, &mut trial);
                value = objective(pi, channel, law, nc, &q, Some(&mut grad));
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (value, q)
}
