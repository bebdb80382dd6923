//! Finite-state channel kernels.
//!
//! A kernel stores `P(y, s' | x, s)` densely, indexed `[s][x][y][s']`, together
//! with the initial state distribution `P(s0)`. The causal channel law
//! `P(y^N || x^N, s0) = Σ_{s^N} Π_i P(y_i, s_i | x_i, s_{i-1})` is evaluated by a
//! forward recursion over an (unnormalized) state belief.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::ROW_SUM_TOL;

/// A finite alphabet with optional display labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Alphabet("alphabet size must be at least 1".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut alpha = Self::new(labels.len())?;
        let mut sorted = labels.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Alphabet(format!("duplicate labels in {labels:?}")));
        }
        alpha.labels = Some(labels);
        Ok(alpha)
    }

    /// Singleton alphabet, used for an absent action side.
    pub fn singleton() -> Self {
        Self {
            size: 1,
            labels: None,
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(l) => l[index].clone(),
            None => index.to_string(),
        }
    }
}

/// One defect found by [`FscKernel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `Σ_{y,s'} P(y, s' | x, s)` differs from one.
    RowSum { state: usize, input: usize, sum: f64 },
    /// A negative (or non-finite) kernel entry.
    Negative {
        state: usize,
        input: usize,
        output: usize,
        next_state: usize,
        value: f64,
    },
    /// The initial distribution does not sum to one.
    InitialSum { sum: f64 },
    /// A negative (or non-finite) initial probability.
    InitialNegative { state: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, input, sum } => {
                write!(f, "row (s={state}, x={input}) sums to {sum}")
            }
            Violation::Negative {
                state,
                input,
                output,
                next_state,
                value,
            } => write!(
                f,
                "entry (s={state}, x={input}, y={output}, s'={next_state}) is {value}"
            ),
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::InitialNegative { state, value } => {
                write!(f, "initial probability of state {state} is {value}")
            }
        }
    }
}

/// Outcome of the indecomposability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Indecomposability {
    Indecomposable,
    Decomposable,
    /// No positive column was found before the absolute cap on the power.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryInfo {
    pub is_no_isi: bool,
    pub indecomposability: Indecomposability,
    /// Present only when the chain is indecomposable.
    pub stationary_dist: Option<Vec<f64>>,
    /// Smallest `n` for which `T^n` has a strictly positive column.
    pub mixing_index: Option<usize>,
}

impl StationaryInfo {
    pub fn is_indecomposable(&self) -> bool {
        self.indecomposability == Indecomposability::Indecomposable
    }
}

/// Absolute cap on the matrix power searched by the indecomposability test.
pub const MIXING_POWER_CAP: usize = 64;
const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// A finite-state channel `P(y, s' | x, s)` with initial distribution `P(s0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FscKernel {
    states: Alphabet,
    inputs: Alphabet,
    outputs: Alphabet,
    /// Flat `[s][x][y][s']`.
    kernel: Vec<f64>,
    initial: Vec<f64>,
}

impl FscKernel {
    /// Builds a kernel from a flat `[s][x][y][s']` tensor. Only dimensions are
    /// checked here; stochasticity is reported by [`FscKernel::validate`].
    pub fn new(
        states: Alphabet,
        inputs: Alphabet,
        outputs: Alphabet,
        kernel: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let expected = states.size() * inputs.size() * outputs.size() * states.size();
        if kernel.len() != expected {
            return Err(Error::Dimension {
                axis: "kernel".into(),
                expected,
                found: kernel.len(),
            });
        }
        if initial.len() != states.size() {
            return Err(Error::Dimension {
                axis: "initial".into(),
                expected: states.size(),
                found: initial.len(),
            });
        }
        Ok(Self {
            states,
            inputs,
            outputs,
            kernel,
            initial,
        })
    }

    /// Builds a kernel from nested arrays indexed `[s][x][y][s']`; the sizes are
    /// inferred from the first element along each axis.
    pub fn from_nested(nested: &[Vec<Vec<Vec<f64>>>], initial: Vec<f64>) -> Result<Self> {
        let ns = nested.len();
        let nx = nested.first().map_or(0, Vec::len);
        let ny = nested
            .first()
            .and_then(|a| a.first())
            .map_or(0, Vec::len);
        if ns == 0 || nx == 0 || ny == 0 {
            return Err(Error::Alphabet("kernel has an empty axis".into()));
        }
        let mut flat = Vec::with_capacity(ns * nx * ny * ns);
        for (s, by_x) in nested.iter().enumerate() {
            if by_x.len() != nx {
                return Err(Error::Dimension {
                    axis: format!("kernel[{s}] (input)"),
                    expected: nx,
                    found: by_x.len(),
                });
            }
            for (x, by_y) in by_x.iter().enumerate() {
                if by_y.len() != ny {
                    return Err(Error::Dimension {
                        axis: format!("kernel[{s}][{x}] (output)"),
                        expected: ny,
                        found: by_y.len(),
                    });
                }
                for (y, by_next) in by_y.iter().enumerate() {
                    if by_next.len() != ns {
                        return Err(Error::Dimension {
                            axis: format!("kernel[{s}][{x}][{y}] (next state)"),
                            expected: ns,
                            found: by_next.len(),
                        });
                    }
                    flat.extend_from_slice(by_next);
                }
            }
        }
        Self::new(
            Alphabet::new(ns)?,
            Alphabet::new(nx)?,
            Alphabet::new(ny)?,
            flat,
            initial,
        )
    }

    /// A single-state kernel from a memoryless channel matrix `W[x][y]`.
    pub fn memoryless(matrix: &[Vec<f64>]) -> Result<Self> {
        let nested: Vec<Vec<Vec<Vec<f64>>>> = vec![matrix
            .iter()
            .map(|row| row.iter().map(|&p| vec![p]).collect())
            .collect()];
        Self::from_nested(&nested, vec![1.0])
    }

    /// No-ISI kernel `P(y | x, s) P(s' | s)`.
    ///
    /// `channels[s][x][y]` is the per-state output law, `transition[s][s']` the
    /// state chain.
    pub fn markov_modulated(
        channels: &[Vec<Vec<f64>>],
        transition: &[Vec<f64>],
        initial: Vec<f64>,
    ) -> Result<Self> {
        let nested: Vec<Vec<Vec<Vec<f64>>>> = channels
            .iter()
            .zip(transition)
            .map(|(w, t)| {
                w.iter()
                    .map(|row| {
                        row.iter()
                            .map(|&py| t.iter().map(|&pt| py * pt).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        if channels.len() != transition.len() {
            return Err(Error::Dimension {
                axis: "transition".into(),
                expected: channels.len(),
                found: transition.len(),
            });
        }
        Self::from_nested(&nested, initial)
    }

    pub fn states(&self) -> &Alphabet {
        &self.states
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.kernel
    }

    #[inline]
    fn offset(&self, s: usize, x: usize, y: usize, next: usize) -> usize {
        let (nx, ny, ns) = (self.inputs.size, self.outputs.size, self.states.size);
        ((s * nx + x) * ny + y) * ns + next
    }

    /// `P(y, s' | x, s)`; indices are not range-checked beyond slice bounds.
    #[inline]
    pub fn prob(&self, s: usize, x: usize, y: usize, next: usize) -> f64 {
        self.kernel[self.offset(s, x, y, next)]
    }

    /// The `(y, s')` row for a given `(s, x)`, flat `[y][s']`.
    #[inline]
    pub fn row(&self, s: usize, x: usize) -> &[f64] {
        let start = self.offset(s, x, 0, 0);
        &self.kernel[start..start + self.outputs.size * self.states.size]
    }

    /// Every row-sum defect and every negative entry.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.states.size {
            for x in 0..self.inputs.size {
                let row = self.row(s, x);
                for (k, &v) in row.iter().enumerate() {
                    if !(v >= 0.0) || !v.is_finite() {
                        out.push(Violation::Negative {
                            state: s,
                            input: x,
                            output: k / self.states.size,
                            next_state: k % self.states.size,
                            value: v,
                        });
                    }
                }
                let sum = crate::numeric::sum(row);
                if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                    out.push(Violation::RowSum {
                        state: s,
                        input: x,
                        sum,
                    });
                }
            }
        }
        for (s, &v) in self.initial.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                out.push(Violation::InitialNegative { state: s, value: v });
            }
        }
        let sum = crate::numeric::sum(&self.initial);
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            out.push(Violation::InitialSum { sum });
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidKernel(v))
        }
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.states.size {
            return Err(Error::IndexOutOfRange {
                axis: "state",
                index: s,
                size: self.states.size,
            });
        }
        Ok(())
    }

    /// `P(s' | s, x) = Σ_y P(y, s' | x, s)`.
    fn next_state_prob(&self, s: usize, x: usize, next: usize) -> f64 {
        (0..self.outputs.size)
            .map(|y| self.prob(s, x, y, next))
            .collect::<CompensatedSum>()
            .value()
    }

    /// True iff the state evolution does not depend on the input.
    pub fn is_no_isi(&self) -> bool {
        for s in 0..self.states.size {
            for next in 0..self.states.size {
                let reference = self.next_state_prob(s, 0, next);
                for x in 1..self.inputs.size {
                    if (self.next_state_prob(s, x, next) - reference).abs() > ROW_SUM_TOL {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// State transition matrix `T[s][s'] = P(s' | s)` of a no-ISI kernel.
    pub fn state_transition(&self) -> Result<Vec<Vec<f64>>> {
        if !self.is_no_isi() {
            return Err(Error::Precondition(
                "state transition matrix requires a channel without ISI".into(),
            ));
        }
        Ok((0..self.states.size)
            .map(|s| {
                (0..self.states.size)
                    .map(|next| self.next_state_prob(s, 0, next))
                    .collect()
            })
            .collect())
    }

    /// Per-state output law `P(y | x, s) = Σ_{s'} P(y, s' | x, s)`, indexed `[s][x][y]`.
    pub fn per_state_channel(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.states.size)
            .map(|s| {
                (0..self.inputs.size)
                    .map(|x| {
                        (0..self.outputs.size)
                            .map(|y| {
                                (0..self.states.size)
                                    .map(|n| self.prob(s, x, y, n))
                                    .collect::<CompensatedSum>()
                                    .value()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Indecomposability of a no-ISI kernel, decided by searching for a strictly
    /// positive column of `T^n` with `n ≤ min(2^{|S|²}, 64)`.
    pub fn indecomposability(&self) -> Result<StationaryInfo> {
        let t = self.state_transition()?;
        Ok(stationary_info(&t))
    }

    /// `P(y^N || x^N, s0)` by forward recursion over the state belief.
    pub fn causal_prob(&self, xs: &[usize], ys: &[usize], s0: usize) -> Result<f64> {
        self.check_state(s0)?;
        let mut belief = vec![0.0; self.states.size];
        belief[s0] = 1.0;
        self.forward(xs, ys, belief)
    }

    /// `P(y^N || x^N) = Σ_{s0} P(s0) P(y^N || x^N, s0)`.
    pub fn causal_prob_averaged(&self, xs: &[usize], ys: &[usize]) -> Result<f64> {
        self.forward(xs, ys, self.initial.clone())
    }

    fn forward(&self, xs: &[usize], ys: &[usize], mut belief: Vec<f64>) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::Dimension {
                axis: "output sequence".into(),
                expected: xs.len(),
                found: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::InvalidArgument("sequences must be non-empty".into()));
        }
        for &x in xs {
            if x >= self.inputs.size {
                return Err(Error::IndexOutOfRange {
                    axis: "input",
                    index: x,
                    size: self.inputs.size,
                });
            }
        }
        for &y in ys {
            if y >= self.outputs.size {
                return Err(Error::IndexOutOfRange {
                    axis: "output",
                    index: y,
                    size: self.outputs.size,
                });
            }
        }
        let mut next = vec![0.0; self.states.size];
        for (&x, &y) in xs.iter().zip(ys) {
            self.step_belief(&belief, x, y, &mut next);
            std::mem::swap(&mut belief, &mut next);
        }
        Ok(belief.iter().copied().collect::<CompensatedSum>().value())
    }

    /// `out[s'] = Σ_s belief[s] P(y, s' | x, s)`.
    #[inline]
    pub fn step_belief(&self, belief: &[f64], x: usize, y: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &b) in belief.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let base = self.offset(s, x, y, 0);
            for (n, o) in out.iter_mut().enumerate() {
                *o += b * self.kernel[base + n];
            }
        }
    }

    /// A kernel whose output is the pair `(y, s')`, i.e. the receiver also
    /// observes the new channel state. Output index is `y * |S| + s'`.
    pub fn with_observed_state(&self) -> Self {
        let (ns, nx, ny) = (self.states.size, self.inputs.size, self.outputs.size);
        let nout = ny * ns;
        let mut flat = vec![0.0; ns * nx * nout * ns];
        for s in 0..ns {
            for x in 0..nx {
                for y in 0..ny {
                    for n in 0..ns {
                        let out = y * ns + n;
                        flat[((s * nx + x) * nout + out) * ns + n] = self.prob(s, x, y, n);
                    }
                }
            }
        }
        let labels: Vec<String> = (0..ny)
            .flat_map(|y| {
                let ylab = self.outputs.label(y);
                (0..ns).map(move |n| (ylab.clone(), n))
            })
            .map(|(y, n)| format!("({y},{})", self.states.label(n)))
            .collect();
        Self {
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            outputs: Alphabet::with_labels(labels).unwrap_or(Alphabet {
                size: nout,
                labels: None,
            }),
            kernel: flat,
            initial: self.initial.clone(),
        }
    }

    /// Replaces the initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
            self.kernel.clone(),
            initial,
        )
    }

    /// Table of `P(y^i || x^i, ·)` for every prefix length `i ≤ n`.
    pub fn causal_law(&self, n: usize, s0: Option<usize>) -> Result<CausalLaw> {
        CausalLaw::new(self, n, s0)
    }
}

fn stationary_info(t: &[Vec<f64>]) -> StationaryInfo {
    let ns = t.len();
    let exact_cap = if ns * ns >= 7 { usize::MAX } else { 1usize << (ns * ns) };
    let cap = exact_cap.min(MIXING_POWER_CAP);

    let pattern: Vec<Vec<bool>> = t
        .iter()
        .map(|row| row.iter().map(|&p| p > 0.0).collect())
        .collect();
    let mut power = pattern.clone();
    let mut witness = None;
    for n in 1..=cap {
        if (0..ns).any(|col| (0..ns).all(|row| power[row][col])) {
            witness = Some(n);
            break;
        }
        power = bool_matmul(&power, &pattern);
    }

    match witness {
        Some(n) => StationaryInfo {
            is_no_isi: true,
            indecomposability: Indecomposability::Indecomposable,
            stationary_dist: Some(power_iterate(t)),
            mixing_index: Some(n),
        },
        None => StationaryInfo {
            is_no_isi: true,
            indecomposability: if cap == exact_cap {
                Indecomposability::Decomposable
            } else {
                Indecomposability::Undetermined
            },
            stationary_dist: None,
            mixing_index: None,
        },
    }
}

fn bool_matmul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).any(|k| a[i][k] && b[k][j]))
                .collect()
        })
        .collect()
}

fn power_iterate(t: &[Vec<f64>]) -> Vec<f64> {
    let ns = t.len();
    let mut pi = vec![1.0 / ns as f64; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..STATIONARY_MAX_ITERS {
        for (j, v) in next.iter_mut().enumerate() {
            *v = (0..ns)
                .map(|i| pi[i] * t[i][j])
                .collect::<CompensatedSum>()
                .value();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta <= STATIONARY_TOL {
            break;
        }
    }
    pi
}

/// `P(y^i || x^i)` for every prefix length, with a fixed or averaged initial state.
///
/// Level `i` (1-based) is indexed by the interleaved code
/// `((x_1 Y + y_1) XY + x_2 Y + y_2) ...`.
#[derive(Debug, Clone)]
pub struct CausalLaw {
    n: usize,
    nx: usize,
    ny: usize,
    levels: Vec<Vec<f64>>,
}

impl CausalLaw {
    fn new(kernel: &FscKernel, n: usize, s0: Option<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be at least 1".into()));
        }
        let belief = match s0 {
            Some(s) => {
                kernel.check_state(s)?;
                let mut b = vec![0.0; kernel.states.size];
                b[s] = 1.0;
                b
            }
            None => kernel.initial.clone(),
        };
        let (nx, ny, ns) = (kernel.inputs.size, kernel.outputs.size, kernel.states.size);
        let radix = nx * ny;
        let size = crate::numeric::checked_pow(radix, n);
        if size > 1 << 26 {
            return Err(Error::SizeCap {
                what: "causal channel law",
                size,
                cap: 1 << 26,
            });
        }
        let mut levels = Vec::with_capacity(n);
        let mut beliefs = vec![belief];
        for _ in 0..n {
            let mut level = Vec::with_capacity(beliefs.len() * radix);
            let mut next_beliefs = Vec::with_capacity(beliefs.len() * radix);
            for b in &beliefs {
                for x in 0..nx {
                    for y in 0..ny {
                        let mut nb = vec![0.0; ns];
                        kernel.step_belief(b, x, y, &mut nb);
                        level.push(nb.iter().copied().collect::<CompensatedSum>().value());
                        next_beliefs.push(nb);
                    }
                }
            }
            levels.push(level);
            beliefs = next_beliefs;
        }
        Ok(Self { n, nx, ny, levels })
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn input_size(&self) -> usize {
        self.nx
    }

    pub fn output_size(&self) -> usize {
        self.ny
    }

    /// `P(y^i || x^i)` for interleaved prefix code at level `i` (1-based).
    #[inline]
    pub fn prefix(&self, i: usize, code: usize) -> f64 {
        self.levels[i - 1][code]
    }

    /// Full-block law `P(y^N || x^N)`.
    pub fn full(&self) -> &[f64] {
        &self.levels[self.n - 1]
    }

    /// One-step conditional `p(y_i | x^i, y^{i-1})`; zero when the prefix is impossible.
    #[inline]
    pub fn step(&self, i: usize, code: usize) -> f64 {
        let num = self.prefix(i, code);
        if i == 1 {
            return num;
        }
        let den = self.prefix(i - 1, code / (self.nx * self.ny));
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn bsc_is_valid() {
        let k = instances::bsc(0.25);
        assert!(k.validate().is_empty());
    }

    #[test]
    fn row_defect_reported_once() {
        let k = FscKernel::memoryless(&[vec![0.6, 0.3], vec![0.25, 0.75]]).unwrap();
        let v = k.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RowSum { state: 0, input: 0, .. }));
    }

    #[test]
    fn negative_entry_reported() {
        let k = FscKernel::memoryless(&[vec![1.1, -0.1], vec![0.25, 0.75]]).unwrap();
        let v = k.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Negative { output: 1, .. }));
    }

    #[test]
    fn dimension_mismatch_names_axis() {
        let nested = vec![vec![vec![vec![1.0]], vec![vec![0.5], vec![0.5]]]];
        let err = FscKernel::from_nested(&nested, vec![1.0]).unwrap_err();
        match err {
            Error::Dimension { axis, .. } => assert!(axis.contains("output")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_isi_predicates() {
        assert!(instances::to_feed_or_not(0.5, 0.5, 0.5, 0.5).is_no_isi());
        assert!(!instances::trapdoor_like().is_no_isi());
        assert!(instances::bsc(0.1).is_no_isi());
    }

    #[test]
    fn indecomposability_examples() {
        let info = stationary_info(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(info.is_indecomposable());
        let pi = info.stationary_dist.unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);

        let info = stationary_info(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(info.indecomposability, Indecomposability::Decomposable);
        assert!(info.stationary_dist.is_none());
    }

    #[test]
    fn stationary_distribution_matches_power_iteration_oracle() {
        // Oracle: repeated squaring of T until rows agree.
        let t: Vec<Vec<f64>> = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let mut m = t.clone();
        for _ in 0..60 {
            m = (0..2)
                .map(|i| {
                    (0..2)
                        .map(|j| (0..2).map(|k| m[i][k] * m[k][j]).sum::<f64>())
                        .collect()
                })
                .collect();
            for row in m.iter_mut() {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        assert!((m[0][0] - 2.0 / 3.0).abs() < 1e-12);
        let info = stationary_info(&t);
        let pi = info.stationary_dist.unwrap();
        assert!((pi[0] - m[0][0]).abs() < 1e-10);
        assert!((pi[1] - m[0][1]).abs() < 1e-10);
        assert_eq!(info.mixing_index, Some(1));
        // π T = π
        for j in 0..2 {
            let v: f64 = (0..2).map(|i| pi[i] * t[i][j]).sum();
            assert!((v - pi[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_chain_is_decomposable_pattern() {
        let info = stationary_info(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(info.indecomposability, Indecomposability::Decomposable);
    }

    #[test]
    fn isi_kernel_rejected_by_indecomposability() {
        assert!(matches!(
            instances::trapdoor_like().indecomposability(),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn causal_prob_bsc_product() {
        let k = instances::bsc(0.25);
        let p = k.causal_prob(&[0, 0], &[0, 1], 0).unwrap();
        assert!((p - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn causal_prob_single_step_is_row_marginal() {
        let k = instances::to_feed_or_not(0.3, 0.6, 0.2, 0.4);
        for s0 in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    let expect: f64 = (0..2).map(|n| k.prob(s0, x, y, n)).sum();
                    let got = k.causal_prob(&[x], &[y], s0).unwrap();
                    assert!((got - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn causal_prob_rejects_bad_indices() {
        let k = instances::bsc(0.25);
        assert!(k.causal_prob(&[2], &[0], 0).is_err());
        assert!(k.causal_prob(&[0], &[0], 1).is_err());
        assert!(k.causal_prob(&[0, 1], &[0], 0).is_err());
    }

    #[test]
    fn observed_state_kernel_is_valid_and_consistent() {
        let k = instances::to_feed_or_not(0.3, 0.6, 0.2, 0.4);
        let obs = k.with_observed_state();
        assert!(obs.validate().is_empty());
        assert_eq!(obs.outputs().size(), 4);
        // marginalizing the observed state recovers the original law
        let p = k.causal_prob(&[1, 0], &[1, 0], 0).unwrap();
        let mut q = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                q += obs.causal_prob(&[1, 0], &[2 + a, b], 0).unwrap();
            }
        }
        assert!((p - q).abs() < 1e-15);
    }

    #[test]
    fn causal_law_table_matches_forward_recursion() {
        let k = instances::to_feed_or_not(0.3, 0.6, 0.2, 0.4);
        let law = k.causal_law(2, Some(1)).unwrap();
        for code in 0..16 {
            let (x1, y1, x2, y2) = (code / 8, (code / 4) % 2, (code / 2) % 2, code % 2);
            let p = k.causal_prob(&[x1, x2], &[y1, y2], 1).unwrap();
            assert!((law.full()[code] - p).abs() < 1e-15);
        }
    }
}
