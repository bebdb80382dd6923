//! Causal policies `Q(x_i, a_i | x^{i-1}, a^{i-1}, z^{i-1})` and the joint
//! distribution they induce over `(x^N, a^N, y^N)`.
//!
//! The pair `(x, a)` is flattened into one "input letter" `u = x·|A| + a`.
//! Histories at step `i` are the mixed-radix codes of `(u_1, z_1, …, u_{i-1},
//! z_{i-1})`; trajectories are the codes of `(u_1, y_1, …, u_N, y_N)`.

use rand::Rng;

use crate::action::ActionSystem;
use crate::error::{Error, Result};
use crate::kernel::FscKernel;
use crate::numeric::{checked_pow, CompensatedSum};
use crate::ROW_SUM_TOL;

/// Largest dense trajectory table we are willing to allocate.
pub const MAX_TRAJECTORIES: usize = 1 << 24;

/// Bijection between histories/trajectories and flat indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryIndexer {
    n: usize,
    nx: usize,
    na: usize,
    ny: usize,
    nz: usize,
}

impl HistoryIndexer {
    pub fn new(n: usize, nx: usize, na: usize, ny: usize, nz: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be at least 1".into()));
        }
        if [nx, na, ny, nz].contains(&0) {
            return Err(Error::Alphabet("empty alphabet in history indexer".into()));
        }
        let traj = checked_pow(nx * na * ny, n);
        if traj > MAX_TRAJECTORIES as u128 {
            return Err(Error::SizeCap {
                what: "trajectory table",
                size: traj,
                cap: MAX_TRAJECTORIES,
            });
        }
        Ok(Self { n, nx, na, ny, nz })
    }

    /// Indexer matching a kernel and an encoder-action system.
    pub fn for_system(kernel: &FscKernel, sys: &ActionSystem, n: usize) -> Result<Self> {
        sys.require_encoder_actions()?;
        if sys.outputs() != kernel.outputs().size() {
            return Err(Error::Dimension {
                axis: "sampling output".into(),
                expected: kernel.outputs().size(),
                found: sys.outputs(),
            });
        }
        Self::new(
            n,
            kernel.inputs().size(),
            sys.encoder().size(),
            kernel.outputs().size(),
            sys.feedback().size(),
        )
    }

    #[inline]
    pub fn block_length(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn inputs(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn actions(&self) -> usize {
        self.na
    }
    #[inline]
    pub fn outputs(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn feedback(&self) -> usize {
        self.nz
    }
    /// Number of `(x, a)` letters.
    #[inline]
    pub fn letters(&self) -> usize {
        self.nx * self.na
    }
    #[inline]
    pub fn letter(&self, x: usize, a: usize) -> usize {
        x * self.na + a
    }
    #[inline]
    pub fn split_letter(&self, u: usize) -> (usize, usize) {
        (u / self.na, u % self.na)
    }

    /// Number of histories at step `i` (1-based): `(|U||Z|)^{i-1}`.
    pub fn histories(&self, i: usize) -> usize {
        (self.letters() * self.nz).pow((i - 1) as u32)
    }

    #[inline]
    pub fn push_history(&self, code: usize, u: usize, z: usize) -> usize {
        (code * self.letters() + u) * self.nz + z
    }

    /// Decodes a step-`i` history into `(u_j, z_j)` pairs.
    pub fn decode_history(&self, i: usize, mut code: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); i - 1];
        for slot in out.iter_mut().rev() {
            let z = code % self.nz;
            code /= self.nz;
            let u = code % self.letters();
            code /= self.letters();
            *slot = (u, z);
        }
        out
    }

    /// Number of full trajectories `(|U||Y|)^N`.
    pub fn trajectories(&self) -> usize {
        (self.letters() * self.ny).pow(self.n as u32)
    }

    #[inline]
    pub fn push_trajectory(&self, code: usize, u: usize, y: usize) -> usize {
        (code * self.letters() + u) * self.ny + y
    }

    /// Decodes a trajectory prefix of length `len` into `(u_j, y_j)` pairs.
    pub fn decode_trajectory(&self, len: usize, mut code: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); len];
        for slot in out.iter_mut().rev() {
            let y = code % self.ny;
            code /= self.ny;
            let u = code % self.letters();
            code /= self.letters();
            *slot = (u, y);
        }
        out
    }
}

/// A history-indexed causal policy over `(x, a)` letters.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalPolicy {
    indexer: HistoryIndexer,
    /// `tables[i-1]` is flat `[history][u]` for step `i`.
    tables: Vec<Vec<f64>>,
}

impl CausalPolicy {
    pub fn uniform(indexer: HistoryIndexer) -> Self {
        let nu = indexer.letters();
        let tables = (1..=indexer.n)
            .map(|i| vec![1.0 / nu as f64; indexer.histories(i) * nu])
            .collect();
        Self { indexer, tables }
    }

    /// Same letter distribution at every step, ignoring the history.
    pub fn iid(indexer: HistoryIndexer, dist: &[f64]) -> Result<Self> {
        Self::from_fn(indexer, |_, _, u| dist[u])
    }

    /// Builds a policy from `f(i, history, u)`; every slice is validated.
    pub fn from_fn(
        indexer: HistoryIndexer,
        mut f: impl FnMut(usize, &[(usize, usize)], usize) -> f64,
    ) -> Result<Self> {
        let nu = indexer.letters();
        let tables = (1..=indexer.n)
            .map(|i| {
                let mut t = Vec::with_capacity(indexer.histories(i) * nu);
                for h in 0..indexer.histories(i) {
                    let hist = indexer.decode_history(i, h);
                    t.extend((0..nu).map(|u| f(i, &hist, u)));
                }
                t
            })
            .collect();
        Self::from_tables(indexer, tables)
    }

    pub fn from_tables(indexer: HistoryIndexer, tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.len() != indexer.n {
            return Err(Error::Dimension {
                axis: "policy steps".into(),
                expected: indexer.n,
                found: tables.len(),
            });
        }
        for (k, t) in tables.iter().enumerate() {
            let expected = indexer.histories(k + 1) * indexer.letters();
            if t.len() != expected {
                return Err(Error::Dimension {
                    axis: format!("policy step {}", k + 1),
                    expected,
                    found: t.len(),
                });
            }
        }
        let policy = Self { indexer, tables };
        policy.validate()?;
        Ok(policy)
    }

    /// Random policy with every slice drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(indexer: HistoryIndexer, rng: &mut R) -> Self {
        let nu = indexer.letters();
        let tables = (1..=indexer.n)
            .map(|i| {
                let mut t = Vec::with_capacity(indexer.histories(i) * nu);
                for _ in 0..indexer.histories(i) {
                    let raw: Vec<f64> = (0..nu).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                    let total: f64 = raw.iter().sum();
                    t.extend(raw.iter().map(|v| v / total));
                }
                t
            })
            .collect();
        Self { indexer, tables }
    }

    pub fn indexer(&self) -> &HistoryIndexer {
        &self.indexer
    }

    pub fn block_length(&self) -> usize {
        self.indexer.n
    }

    /// `Q(u | history)` at step `i` (1-based).
    #[inline]
    pub fn prob(&self, i: usize, history: usize, u: usize) -> f64 {
        self.tables[i - 1][history * self.indexer.letters() + u]
    }

    pub fn slice(&self, i: usize, history: usize) -> &[f64] {
        let nu = self.indexer.letters();
        &self.tables[i - 1][history * nu..(history + 1) * nu]
    }

    pub(crate) fn slice_mut(&mut self, i: usize, history: usize) -> &mut [f64] {
        let nu = self.indexer.letters();
        &mut self.tables[i - 1][history * nu..(history + 1) * nu]
    }

    pub fn table(&self, i: usize) -> &[f64] {
        &self.tables[i - 1]
    }

    /// Checks every slice (reachable or not) is a probability vector.
    pub fn validate(&self) -> Result<()> {
        let nu = self.indexer.letters();
        for (k, t) in self.tables.iter().enumerate() {
            for (h, slice) in t.chunks(nu).enumerate() {
                if slice.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidArgument(format!(
                        "policy step {} history {h} has an entry outside [0, 1]",
                        k + 1
                    )));
                }
                let s = crate::numeric::sum(slice);
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::NotNormalized(s));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute entrywise difference to another policy of the same shape.
    pub fn max_abs_diff(&self, other: &CausalPolicy) -> f64 {
        self.tables
            .iter()
            .flatten()
            .zip(other.tables.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense joint probability over `(u^N, y^N)` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDistribution {
    indexer: HistoryIndexer,
    probs: Vec<f64>,
    /// `[a][y] -> z` (decoder action fixed at 0).
    sampling: Vec<usize>,
    s0: Option<usize>,
}

impl TrajectoryDistribution {
    /// Wraps a dense table; `sampling` is `[a][y] -> z`.
    pub fn from_dense(
        indexer: HistoryIndexer,
        probs: Vec<f64>,
        sampling: Vec<usize>,
        s0: Option<usize>,
    ) -> Result<Self> {
        if probs.len() != indexer.trajectories() {
            return Err(Error::Dimension {
                axis: "joint".into(),
                expected: indexer.trajectories(),
                found: probs.len(),
            });
        }
        if sampling.len() != indexer.na * indexer.ny {
            return Err(Error::Dimension {
                axis: "sampling".into(),
                expected: indexer.na * indexer.ny,
                found: sampling.len(),
            });
        }
        Ok(Self {
            indexer,
            probs,
            sampling,
            s0,
        })
    }

    pub fn indexer(&self) -> &HistoryIndexer {
        &self.indexer
    }

    pub fn block_length(&self) -> usize {
        self.indexer.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn initial_state(&self) -> Option<usize> {
        self.s0
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::sum(&self.probs)
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let m = self.total_mass();
        if (m - 1.0).abs() > tol {
            Err(Error::NotNormalized(m))
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn z(&self, a: usize, y: usize) -> usize {
        self.sampling[a * self.indexer.ny + y]
    }

    /// `(x_i, a_i, y_i, z_i)` for every step of a trajectory code.
    pub fn decode(&self, code: usize) -> Vec<(usize, usize, usize, usize)> {
        self.indexer
            .decode_trajectory(self.indexer.n, code)
            .into_iter()
            .map(|(u, y)| {
                let (x, a) = self.indexer.split_letter(u);
                (x, a, y, self.z(a, y))
            })
            .collect()
    }

    /// Marginal of the action at step `i` (1-based).
    pub fn action_marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![CompensatedSum::new(); self.indexer.na];
        let ix = &self.indexer;
        let stride_after = (ix.letters() * ix.ny).pow((ix.n - i) as u32);
        for (code, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let u = (code / stride_after / ix.ny) % ix.letters();
            out[u % ix.na].add(p);
        }
        out.iter().map(CompensatedSum::value).collect()
    }

    /// `Σ_k w_k · joint_k` over joints of identical shape.
    pub fn mixture(parts: &[(f64, &TrajectoryDistribution)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1;
        let mut probs = vec![0.0; first.probs.len()];
        for (w, j) in parts {
            if j.indexer != first.indexer {
                return Err(Error::InvalidArgument("mixture of differently shaped joints".into()));
            }
            for (acc, p) in probs.iter_mut().zip(&j.probs) {
                *acc += w * p;
            }
        }
        Ok(Self {
            indexer: first.indexer,
            probs,
            sampling: first.sampling.clone(),
            s0: None,
        })
    }
}

/// Sampling table `[a][y] -> z` with the decoder action fixed at 0.
pub(crate) fn encoder_sampling(sys: &ActionSystem) -> Vec<usize> {
    (0..sys.encoder().size())
        .flat_map(|a| (0..sys.outputs()).map(move |y| sys.z(a, 0, y)))
        .collect()
}

/// Assembles `P(s0) Q(x^N, a^N || z^{N-1}) P(y^N || x^N, s0)` by sequential
/// extension. With `s0 = None` the initial state is averaged with the
/// kernel's initial distribution.
pub fn build_joint(
    policy: &CausalPolicy,
    kernel: &FscKernel,
    sys: &ActionSystem,
    s0: Option<usize>,
) -> Result<TrajectoryDistribution> {
    let ix = HistoryIndexer::for_system(kernel, sys, policy.block_length())?;
    if ix != policy.indexer {
        return Err(Error::InvalidArgument(
            "policy alphabets do not match the kernel and action system".into(),
        ));
    }
    let ns = kernel.states().size();
    let belief = match s0 {
        Some(s) => {
            if s >= ns {
                return Err(Error::IndexOutOfRange {
                    axis: "state",
                    index: s,
                    size: ns,
                });
            }
            let mut b = vec![0.0; ns];
            b[s] = 1.0;
            b
        }
        None => kernel.initial().to_vec(),
    };
    let mut probs = vec![0.0; ix.trajectories()];
    let mut ctx = Extension {
        ix,
        policy,
        kernel,
        sys,
        probs: &mut probs,
    };
    ctx.extend(1, 0, 0, 1.0, &belief);
    TrajectoryDistribution::from_dense(ix, probs, encoder_sampling(sys), s0)
}

struct Extension<'a> {
    ix: HistoryIndexer,
    policy: &'a CausalPolicy,
    kernel: &'a FscKernel,
    sys: &'a ActionSystem,
    probs: &'a mut [f64],
}

impl Extension<'_> {
    fn extend(&mut self, i: usize, traj: usize, hist: usize, policy_mass: f64, belief: &[f64]) {
        let ns = belief.len();
        let mut next = vec![0.0; ns];
        for u in 0..self.ix.letters() {
            let r = self.policy.prob(i, hist, u);
            let (x, a) = self.ix.split_letter(u);
            for y in 0..self.ix.ny {
                let code = self.ix.push_trajectory(traj, u, y);
                if r == 0.0 || policy_mass == 0.0 {
                    if i == self.ix.n {
                        self.probs[code] = 0.0;
                    } else {
                        self.fill_zero(i + 1, code);
                    }
                    continue;
                }
                self.kernel.step_belief(belief, x, y, &mut next);
                if i == self.ix.n {
                    let channel: f64 = next.iter().copied().collect::<CompensatedSum>().value();
                    self.probs[code] = policy_mass * r * channel;
                } else {
                    let z = self.sys.z(a, 0, y);
                    let h = self.ix.push_history(hist, u, z);
                    let nb = next.clone();
                    self.extend(i + 1, code, h, policy_mass * r, &nb);
                }
            }
        }
    }

    fn fill_zero(&mut self, i: usize, traj: usize) {
        let span = (self.ix.letters() * self.ix.ny).pow((self.ix.n - i + 1) as u32);
        let start = traj * span;
        self.probs[start..start + span].iter_mut().for_each(|p| *p = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn history_codes_round_trip() {
        let ix = HistoryIndexer::new(3, 2, 2, 4, 3).unwrap();
        let hist = [(3, 2), (1, 0)];
        let code = hist
            .iter()
            .fold(0, |c, &(u, z)| ix.push_history(c, u, z));
        assert_eq!(ix.decode_history(3, code), hist.to_vec());
        assert_eq!(ix.histories(3), 144);
    }

    #[test]
    fn uniform_bsc_single_step() {
        let k = instances::bsc(0.25);
        let sys = instances::no_feedback(2);
        let ix = HistoryIndexer::for_system(&k, &sys, 1).unwrap();
        let joint = build_joint(&CausalPolicy::uniform(ix), &k, &sys, None).unwrap();
        let expect = [0.375, 0.125, 0.125, 0.375];
        for (p, e) in joint.probs().iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_channel_support_is_diagonal() {
        let k = instances::noiseless(2);
        let sys = instances::full_feedback(2);
        let ix = HistoryIndexer::for_system(&k, &sys, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let joint = build_joint(&CausalPolicy::random(ix, &mut rng), &k, &sys, None).unwrap();
        for (code, &p) in joint.probs().iter().enumerate() {
            let steps = joint.decode(code);
            if steps.iter().any(|&(x, _, y, _)| x != y) {
                assert_eq!(p, 0.0);
            }
        }
        assert!((joint.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn policy_validation_rejects_unnormalized_slices() {
        let ix = HistoryIndexer::new(1, 2, 1, 2, 1).unwrap();
        assert!(CausalPolicy::from_tables(ix, vec![vec![0.5, 0.6]]).is_err());
        assert!(CausalPolicy::from_tables(ix, vec![vec![1.5, -0.5]]).is_err());
        assert!(CausalPolicy::from_tables(ix, vec![vec![0.5, 0.5]]).is_ok());
    }

    #[test]
    fn mismatched_alphabets_are_structural_errors() {
        let k = instances::bsc(0.25);
        let sys = instances::state_feedback_actions(4, 2, 1.0);
        assert!(HistoryIndexer::for_system(&k, &sys, 1).is_err());
    }

    #[test]
    fn action_marginal_of_iid_policy() {
        let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
        let ix = HistoryIndexer::for_system(&k, &sys, 3).unwrap();
        // P(a=1) = 0.3, x uniform
        let dist = [0.35, 0.15, 0.35, 0.15];
        let joint = build_joint(&CausalPolicy::iid(ix, &dist).unwrap(), &k, &sys, Some(0)).unwrap();
        for i in 1..=3 {
            let m = joint.action_marginal(i);
            assert!((m[1] - 0.3).abs() < 1e-12);
        }
        assert!((sys.expected_cost(&joint) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn constant_action_costs() {
        let (k, sys) = instances::to_feed_or_not_system(0.5, 0.5, 0.5, 0.5, 1.0);
        let ix = HistoryIndexer::for_system(&k, &sys, 2).unwrap();
        let always = CausalPolicy::iid(ix, &[0.0, 0.5, 0.0, 0.5]).unwrap();
        let never = CausalPolicy::iid(ix, &[0.5, 0.0, 0.5, 0.0]).unwrap();
        let j1 = build_joint(&always, &k, &sys, Some(0)).unwrap();
        let j0 = build_joint(&never, &k, &sys, Some(0)).unwrap();
        assert!((sys.expected_cost(&j1) - 1.0).abs() < 1e-12);
        assert_eq!(sys.expected_cost(&j0), 0.0);
    }
}
