//! Brute-force reference computations for tiny instances.
//!
//! Nothing here reuses the optimized machinery: channel laws are summed over
//! explicit state paths, marginals are built in hash maps, the `r` update is
//! evaluated as a literal product of powers, and capacities come from an
//! exhaustive simplex grid. Only the kernel and action-system tables are read.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::action::ActionSystem;
use crate::error::{Error, Result};
use crate::kernel::FscKernel;
use crate::policy::CausalPolicy;

/// Largest joint the literal evaluators will enumerate.
pub const MAX_LITERAL_ENTRIES: usize = 10_000_000;
/// Largest number of free grid dimensions.
pub const MAX_GRID_DIMENSIONS: usize = 8;
/// Largest number of grid points evaluated.
pub const MAX_GRID_POINTS: u128 = 400_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    LiteralSum,
    GridSearch,
    DeterministicEnumeration,
}

/// One oracle/main comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle_value: f64,
    pub main_value: f64,
    pub search_space_size: u128,
    pub method: OracleMethod,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn absolute_gap(&self) -> f64 {
        (self.oracle_value - self.main_value).abs()
    }

    pub fn passed(&self) -> bool {
        self.absolute_gap() <= self.tolerance
    }
}

impl Serialize for OracleReport {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("OracleReport", 8)?;
        st.serialize_field("quantity", &self.quantity)?;
        st.serialize_field("oracle_value", &self.oracle_value)?;
        st.serialize_field("main_value", &self.main_value)?;
        st.serialize_field("absolute_gap", &self.absolute_gap())?;
        st.serialize_field("tolerance", &self.tolerance)?;
        st.serialize_field("passed", &self.passed())?;
        st.serialize_field("search_space_size", &(self.search_space_size as f64))?;
        st.serialize_field("method", &self.method)?;
        st.end()
    }
}

/// `P(y^N || x^N, s0)` by summing over every state path; `s0 = None` averages
/// over the kernel's initial distribution.
pub fn literal_channel_law(kernel: &FscKernel, xs: &[usize], ys: &[usize], s0: Option<usize>) -> f64 {
    let ns = kernel.states().size();
    let n = xs.len();
    let starts: Vec<(usize, f64)> = match s0 {
        Some(s) => vec![(s, 1.0)],
        None => kernel.initial().iter().copied().enumerate().collect(),
    };
    let paths = ns.pow(n as u32);
    let mut total = 0.0;
    for (start, w) in starts {
        if w == 0.0 {
            continue;
        }
        for path in 0..paths {
            let mut prev = start;
            let mut prod = w;
            let mut rest = path;
            for i in 0..n {
                let next = rest % ns;
                rest /= ns;
                prod *= kernel.prob(prev, xs[i], ys[i], next);
                prev = next;
            }
            total += prod;
        }
    }
    total
}

fn digits(mut code: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = code % radix;
        code /= radix;
    }
    out
}

/// A dense joint over `(u_1, y_1, …, u_N, y_N)` with `u = x·|A| + a`, the
/// interleaved code taken in radix `|U|·|Y|`.
#[derive(Debug, Clone, Copy)]
pub struct JointLayout {
    pub block_length: usize,
    pub inputs: usize,
    pub actions: usize,
    pub outputs: usize,
}

impl JointLayout {
    fn letters(&self) -> usize {
        self.inputs * self.actions
    }

    fn size(&self) -> usize {
        (self.letters() * self.outputs).pow(self.block_length as u32)
    }

    /// `(x_i, a_i, y_i)` per step.
    fn decode(&self, code: usize) -> Vec<(usize, usize, usize)> {
        digits(code, self.letters() * self.outputs, self.block_length)
            .into_iter()
            .map(|d| {
                let (u, y) = (d / self.outputs, d % self.outputs);
                (u / self.actions, u % self.actions, y)
            })
            .collect()
    }
}

/// `E[log2 P(Y^N || X^N) / P(Y^N)]` with the causal conditioning rebuilt from
/// joint marginals `P(x^i, y^i) / P(x^i, y^{i-1})`.
pub fn literal_directed_info(layout: JointLayout, probs: &[f64]) -> Result<f64> {
    if probs.len() != layout.size() {
        return Err(Error::Dimension {
            axis: "oracle joint".into(),
            expected: layout.size(),
            found: probs.len(),
        });
    }
    if probs.len() > MAX_LITERAL_ENTRIES {
        return Err(Error::SizeCap {
            what: "literal directed information",
            size: probs.len() as u128,
            cap: MAX_LITERAL_ENTRIES,
        });
    }
    let n = layout.block_length;
    // keys: (x^i, y^i) and (x^i, y^{i-1}) stored as vectors with a length tag
    let mut full: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut partial: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut outputs: HashMap<Vec<usize>, f64> = HashMap::new();
    let decoded: Vec<Vec<(usize, usize, usize)>> = (0..probs.len()).map(|c| layout.decode(c)).collect();
    for (steps, &p) in decoded.iter().zip(probs) {
        if p == 0.0 {
            continue;
        }
        let mut key = Vec::with_capacity(2 * n);
        for &(x, _, y) in steps {
            key.push(x);
            *partial.entry(key.clone()).or_insert(0.0) += p;
            key.push(y);
            *full.entry(key.clone()).or_insert(0.0) += p;
        }
        *outputs.entry(steps.iter().map(|s| s.2).collect()).or_insert(0.0) += p;
    }
    let mut total = 0.0;
    for (steps, &p) in decoded.iter().zip(probs) {
        if p == 0.0 {
            continue;
        }
        let mut causal = 1.0;
        let mut key = Vec::with_capacity(2 * n);
        for &(x, _, y) in steps {
            key.push(x);
            let den = partial[&key];
            key.push(y);
            causal *= full[&key] / den;
        }
        let py = outputs[&steps.iter().map(|s| s.2).collect::<Vec<_>>()];
        total += p * (causal / py).log2();
    }
    Ok(total)
}

/// Policy tables keyed by `(step, [(u_j, z_j)])`.
pub type OraclePolicy = BTreeMap<(usize, Vec<(usize, usize)>), Vec<f64>>;

/// Copies a causal policy into oracle form.
pub fn policy_tables(policy: &CausalPolicy) -> OraclePolicy {
    let ix = policy.indexer();
    let mut out = BTreeMap::new();
    for i in 1..=policy.block_length() {
        for h in 0..ix.histories(i) {
            out.insert((i, ix.decode_history(i, h)), policy.slice(i, h).to_vec());
        }
    }
    out
}

/// Largest entrywise difference between oracle tables and a policy.
pub fn max_policy_gap(tables: &OraclePolicy, policy: &CausalPolicy) -> f64 {
    policy_tables(policy)
        .iter()
        .map(|(k, v)| {
            tables[k]
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Positive real `m · 2^e` with a wide exponent, so long products of powers
/// neither underflow nor overflow.
#[derive(Debug, Clone, Copy)]
struct Wide {
    m: f64,
    e: f64,
}

impl Wide {
    const ZERO: Wide = Wide { m: 0.0, e: 0.0 };
    const ONE: Wide = Wide { m: 1.0, e: 0.0 };

    fn new(v: f64) -> Self {
        Wide { m: v, e: 0.0 }.renorm()
    }

    fn renorm(mut self) -> Self {
        if self.m == 0.0 {
            return Wide::ZERO;
        }
        while self.m >= 2.0 {
            self.m *= 0.5;
            self.e += 1.0;
        }
        while self.m < 1.0 {
            self.m *= 2.0;
            self.e -= 1.0;
        }
        self
    }

    fn mul(self, o: Wide) -> Wide {
        Wide {
            m: self.m * o.m,
            e: self.e + o.e,
        }
        .renorm()
    }

    fn div(self, o: Wide) -> Wide {
        Wide {
            m: self.m / o.m,
            e: self.e - o.e,
        }
        .renorm()
    }

    /// `2^k` for real `k`.
    fn pow2(k: f64) -> Wide {
        let whole = k.floor();
        Wide {
            m: (k - whole).exp2(),
            e: whole,
        }
        .renorm()
    }

    /// `self^w` with `0^0 = 1`.
    fn powf(self, w: f64) -> Wide {
        if w == 0.0 {
            return Wide::ONE;
        }
        if self.m == 0.0 {
            return Wide::ZERO;
        }
        let ew = self.e * w;
        let whole = ew.floor();
        Wide {
            m: self.m.powf(w) * (ew - whole).exp2(),
            e: whole,
        }
        .renorm()
    }
}

/// Normalizes wide-range weights into probabilities; uniform when all vanish.
fn normalize_wide(values: &[Wide]) -> Vec<f64> {
    let top = values
        .iter()
        .filter(|v| v.m > 0.0)
        .map(|v| v.e)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return vec![1.0 / values.len() as f64; values.len()];
    }
    let scaled: Vec<f64> = values
        .iter()
        .map(|v| if v.m == 0.0 { 0.0 } else { v.m * (v.e - top).exp2() })
        .collect();
    let total: f64 = scaled.iter().sum();
    scaled.iter().map(|v| v / total).collect()
}

/// Everything the literal update needs about one instance.
pub struct LiteralInstance<'a> {
    pub kernel: &'a FscKernel,
    pub sys: &'a ActionSystem,
    pub block_length: usize,
    pub initial_state: Option<usize>,
}

impl LiteralInstance<'_> {
    fn layout(&self) -> JointLayout {
        JointLayout {
            block_length: self.block_length,
            inputs: self.kernel.inputs().size(),
            actions: self.sys.encoder().size(),
            outputs: self.kernel.outputs().size(),
        }
    }

    fn z(&self, a: usize, y: usize) -> usize {
        self.sys.z(a, 0, y)
    }
}

/// One backward pass of the `r` update evaluated as the displayed product of
/// powers: for `i = N, …, 1`,
/// `r'(u_i | h_i) ∝ ∏ [q · 2^{−λ ΣΛ} / ∏_{j>i} r_j]^{p · ∏_{j>i} r_j / Σ_{A_{i,z}} ∏_{j<i} p_j}`
/// with the product over later letters, outputs `y_i^N` and compatible past
/// outputs. `q(u^N, y^N)` is supplied by the caller.
pub fn literal_r_update(
    inst: &LiteralInstance,
    lambda: f64,
    r: &OraclePolicy,
    q: &dyn Fn(&[usize], &[usize]) -> f64,
) -> Result<OraclePolicy> {
    let layout = inst.layout();
    let n = inst.block_length;
    if layout.size() > 1 << 16 {
        return Err(Error::SizeCap {
            what: "literal r update",
            size: layout.size() as u128,
            cap: 1 << 16,
        });
    }
    let (nu, ny, na) = (layout.letters(), layout.outputs, layout.actions);
    let mut out = r.clone();
    let law = |us: &[usize], ys: &[usize]| -> f64 {
        let xs: Vec<usize> = us.iter().map(|u| u / na).collect();
        literal_channel_law(inst.kernel, &xs, ys, inst.initial_state)
    };
    let step_prob = |us: &[usize], ys: &[usize], j: usize| -> f64 {
        // p(y_j | x^j, y^{j-1}), 1-based j
        let num = law(&us[..j], &ys[..j]);
        if j == 1 {
            return num;
        }
        let den = law(&us[..j - 1], &ys[..j - 1]);
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let history = |us: &[usize], ys: &[usize], j: usize| -> Vec<(usize, usize)> {
        (0..j - 1).map(|k| (us[k], inst.z(us[k] % na, ys[k]))).collect()
    };
    for i in (1..=n).rev() {
        let keys: Vec<Vec<(usize, usize)>> = out.keys().filter(|k| k.0 == i).map(|k| k.1.clone()).collect();
        for hist in keys {
            let past_u: Vec<usize> = hist.iter().map(|p| p.0).collect();
            // compatible past outputs
            let compatible: Vec<Vec<usize>> = (0..ny.pow((i - 1) as u32))
                .map(|c| digits(c, ny, i - 1))
                .filter(|ys| (0..i - 1).all(|k| inst.z(past_u[k] % na, ys[k]) == hist[k].1))
                .collect();
            let den: f64 = compatible
                .iter()
                .map(|ys| (1..i).map(|j| step_prob(&past_u, ys, j)).product::<f64>())
                .sum();
            if den == 0.0 {
                out.insert((i, hist), vec![1.0 / nu as f64; nu]);
                continue;
            }
            let mut weights = vec![Wide::ONE; nu];
            for (ui, slot) in weights.iter_mut().enumerate() {
                for future in 0..nu.pow((n - i) as u32) {
                    let mut us = past_u.clone();
                    us.push(ui);
                    us.extend(digits(future, nu, n - i));
                    for ys_past in &compatible {
                        for tail in 0..ny.pow((n - i + 1) as u32) {
                            let mut ys = ys_past.clone();
                            ys.extend(digits(tail, ny, n - i + 1));
                            let later: f64 = (i + 1..=n)
                                .map(|j| out[&(j, history(&us, &ys, j))][us[j - 1]])
                                .product();
                            let w = law(&us, &ys) * later / den;
                            let cost: f64 = us.iter().map(|u| inst.sys.cost(u % na, 0)).sum();
                            let base = Wide::new(q(&us, &ys))
                                .mul(Wide::pow2(-lambda * cost))
                                .div(Wide::new(later).max_one_if_zero());
                            *slot = slot.mul(base.powf(w));
                        }
                    }
                }
            }
            out.insert((i, hist), normalize_wide(&weights));
        }
    }
    Ok(out)
}

impl Wide {
    /// Division guard: a zero later-policy factor only appears with zero
    /// exponent, where the base is irrelevant.
    fn max_one_if_zero(self) -> Wide {
        if self.m == 0.0 {
            Wide::ONE
        } else {
            self
        }
    }
}

/// Which initial-state treatment the grid objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridObjective {
    /// Condition on one initial state.
    InitialState(usize),
    /// Worst case over initial states.
    WorstCase,
    /// Average over the kernel's initial distribution.
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Best `(1/N) I(X^N → Y^N)` over feasible grid points.
    pub value: f64,
    pub dimensions: usize,
    pub points: u128,
    pub feasible_points: u128,
}

fn simplex_grid(parts: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(left - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(steps, parts, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|v| v.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

/// Exhaustive grid search of `max (1/N) I(X^N → Y^N)` subject to the average
/// cost budget, for `N ≤ 2`.
///
/// Step-`i` conditionals depend on the feedback history `z^{i-1}` only, and
/// the last action is pinned to the cheapest one (it influences nothing but
/// the cost). With those reductions the grid covers the step-1 letter simplex
/// (the input simplex when `N = 1`) and one input simplex per reachable
/// feedback value.
pub fn grid_capacity(
    kernel: &FscKernel,
    sys: &ActionSystem,
    n: usize,
    step: f64,
    budget: f64,
    objective: GridObjective,
) -> Result<GridResult> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument("grid oracle supports N ∈ {1, 2}".into()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 1]".into()));
    }
    let steps = (1.0 / step).round() as usize;
    let (nx, na, ny, ns) = (
        kernel.inputs().size(),
        sys.encoder().size(),
        kernel.outputs().size(),
        kernel.states().size(),
    );
    let cheapest = (0..na)
        .min_by(|&a, &b| sys.cost(a, 0).total_cmp(&sys.cost(b, 0)))
        .unwrap_or(0);
    // reachable first-step feedback values
    let mut feedback: Vec<usize> = (0..na)
        .flat_map(|a| (0..ny).map(move |y| (a, y)))
        .map(|(a, y)| sys.z(a, 0, y))
        .collect();
    feedback.sort_unstable();
    feedback.dedup();

    let first_letters = if n == 1 { nx } else { nx * na };
    let dims = (first_letters - 1) + if n == 2 { feedback.len() * (nx - 1) } else { 0 };
    if dims > MAX_GRID_DIMENSIONS {
        return Err(Error::SizeCap {
            what: "oracle grid dimensions",
            size: dims as u128,
            cap: MAX_GRID_DIMENSIONS,
        });
    }
    let first = simplex_grid(first_letters, steps);
    let second = simplex_grid(nx, steps);
    let later_count = if n == 2 { feedback.len() } else { 0 };
    let points = (first.len() as u128) * (second.len() as u128).pow(later_count as u32);
    if points > MAX_GRID_POINTS {
        return Err(Error::SizeCap {
            what: "oracle grid points",
            size: points,
            cap: MAX_GRID_POINTS as usize,
        });
    }

    let states: Vec<(Option<usize>, f64)> = match objective {
        GridObjective::InitialState(s) => vec![(Some(s), 1.0)],
        GridObjective::Averaged => vec![(None, 1.0)],
        GridObjective::WorstCase => (0..ns).map(|s| (Some(s), 1.0)).collect(),
    };
    // law[k][(x^N, y^N)]
    let laws: Vec<Vec<f64>> = states
        .iter()
        .map(|(s0, _)| {
            (0..nx.pow(n as u32) * ny.pow(n as u32))
                .map(|c| {
                    let xs = digits(c / ny.pow(n as u32), nx, n);
                    let ys = digits(c % ny.pow(n as u32), ny, n);
                    literal_channel_law(kernel, &xs, &ys, *s0)
                })
                .collect()
        })
        .collect();

    let eval = |p1: &[f64], rest: &[&Vec<f64>]| -> f64 {
        let mut worst = f64::INFINITY;
        for law in &laws {
            let v = grid_directed_info(n, nx, na, ny, &feedback, sys, law, p1, rest);
            worst = worst.min(v);
        }
        worst
    };
    let first_cost = |p1: &[f64]| -> f64 {
        if n == 1 {
            sys.cost(cheapest, 0)
        } else {
            let c1: f64 = (0..nx * na).map(|u| p1[u] * sys.cost(u % na, 0)).sum();
            (c1 + sys.cost(cheapest, 0)) / 2.0
        }
    };

    let results: Vec<(f64, u128)> = first
        .par_iter()
        .map(|p1| {
            if first_cost(p1) > budget + 1e-12 {
                return (f64::NEG_INFINITY, 0);
            }
            if later_count == 0 {
                return (eval(p1, &[]), 1);
            }
            let mut best = f64::NEG_INFINITY;
            let mut count = 0u128;
            let total = second.len().pow(later_count as u32);
            for combo in 0..total {
                let rest: Vec<&Vec<f64>> = digits(combo, second.len(), later_count)
                    .into_iter()
                    .map(|d| &second[d])
                    .collect();
                best = best.max(eval(p1, &rest));
                count += 1;
            }
            (best, count)
        })
        .collect();
    let feasible: u128 = results.iter().map(|r| r.1).sum();
    if feasible == 0 {
        return Err(Error::Infeasible {
            budget,
            min_cost: sys.min_cost(),
        });
    }
    let value = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(GridResult {
        value,
        dimensions: dims,
        points,
        feasible_points: feasible,
    })
}

#[allow(clippy::too_many_arguments)]
fn grid_directed_info(
    n: usize,
    nx: usize,
    na: usize,
    ny: usize,
    feedback: &[usize],
    sys: &ActionSystem,
    law: &[f64],
    p1: &[f64],
    rest: &[&Vec<f64>],
) -> f64 {
    let yn = ny.pow(n as u32);
    let mut joint: Vec<(usize, usize, f64)> = Vec::new(); // (x code, y code, prob)
    let mut py = vec![0.0; yn];
    if n == 1 {
        for x in 0..nx {
            for y in 0..ny {
                let p = p1[x] * law[x * yn + y];
                if p > 0.0 {
                    joint.push((x, y, p));
                    py[y] += p;
                }
            }
        }
    } else {
        for u1 in 0..nx * na {
            let (x1, a1) = (u1 / na, u1 % na);
            for y1 in 0..ny {
                let z = sys.z(a1, 0, y1);
                let slot = feedback.iter().position(|&f| f == z).expect("reachable");
                for x2 in 0..nx {
                    let r = p1[u1] * rest[slot][x2];
                    if r == 0.0 {
                        continue;
                    }
                    for y2 in 0..ny {
                        let xc = x1 * nx + x2;
                        let yc = y1 * ny + y2;
                        let p = r * law[xc * yn + yc];
                        if p > 0.0 {
                            joint.push((xc, yc, p));
                            py[yc] += p;
                        }
                    }
                }
            }
        }
    }
    // actions of distinct letters with the same inputs share the channel law,
    // so the causal conditioning is the channel law itself
    let total: f64 = joint
        .iter()
        .map(|&(xc, yc, p)| p * (law[xc * yn + yc] / py[yc]).log2())
        .sum();
    total / n as f64
}
