//! Actions, feedback sampling and the Shannon-strategy expansion of
//! output-causal decoder actions.
//!
//! The sampled feedback is `z = f(a_e, a_d, y)`. Settings where only one side
//! acts give the other side a singleton alphabet with zero cost. An erasure
//! symbol is an ordinary feedback letter (conventionally the last one).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Alphabet;
use crate::policy::TrajectoryDistribution;

/// Default cap on `|A_d|^{|Y|}` for [`ActionSystem::expand_decoder_strategies`].
pub const DEFAULT_EXPANSION_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSystem {
    encoder: Alphabet,
    decoder: Alphabet,
    feedback: Alphabet,
    outputs: usize,
    /// Flat `[a_e][a_d][y] -> z`.
    sampling: Vec<usize>,
    /// Flat `[a_e][a_d] -> Λ`.
    cost: Vec<f64>,
    budget: f64,
}

impl ActionSystem {
    /// `sampling` is flat `[a_e][a_d][y]`; the output size is inferred from its length.
    pub fn new(
        encoder: Alphabet,
        decoder: Alphabet,
        feedback: Alphabet,
        sampling: Vec<usize>,
        cost: Vec<f64>,
        budget: f64,
    ) -> Result<Self> {
        let pairs = encoder.size() * decoder.size();
        if sampling.is_empty() || sampling.len() % pairs != 0 {
            return Err(Error::Dimension {
                axis: "sampling".into(),
                expected: pairs,
                found: sampling.len(),
            });
        }
        let outputs = sampling.len() / pairs;
        if cost.len() != pairs {
            return Err(Error::Dimension {
                axis: "cost".into(),
                expected: pairs,
                found: cost.len(),
            });
        }
        if let Some(&z) = sampling.iter().find(|&&z| z >= feedback.size()) {
            return Err(Error::IndexOutOfRange {
                axis: "feedback",
                index: z,
                size: feedback.size(),
            });
        }
        if let Some(&c) = cost.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "costs must be finite and nonnegative, found {c}"
            )));
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "budget must be finite and nonnegative, found {budget}"
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            feedback,
            outputs,
            sampling,
            cost,
            budget,
        })
    }

    /// From nested tables `sampling[a_e][a_d][y]` and `cost[a_e][a_d]`.
    pub fn from_nested(
        sampling: &[Vec<Vec<usize>>],
        cost: &[Vec<f64>],
        feedback_size: usize,
        budget: f64,
    ) -> Result<Self> {
        let ne = sampling.len();
        let nd = sampling.first().map_or(0, Vec::len);
        let ny = sampling.first().and_then(|v| v.first()).map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(ne * nd * ny);
        for (e, by_d) in sampling.iter().enumerate() {
            if by_d.len() != nd {
                return Err(Error::Dimension {
                    axis: format!("sampling[{e}] (decoder action)"),
                    expected: nd,
                    found: by_d.len(),
                });
            }
            for (d, by_y) in by_d.iter().enumerate() {
                if by_y.len() != ny {
                    return Err(Error::Dimension {
                        axis: format!("sampling[{e}][{d}] (output)"),
                        expected: ny,
                        found: by_y.len(),
                    });
                }
                flat.extend_from_slice(by_y);
            }
        }
        if cost.len() != ne {
            return Err(Error::Dimension {
                axis: "cost (encoder action)".into(),
                expected: ne,
                found: cost.len(),
            });
        }
        let mut flat_cost = Vec::with_capacity(ne * nd);
        for (e, row) in cost.iter().enumerate() {
            if row.len() != nd {
                return Err(Error::Dimension {
                    axis: format!("cost[{e}] (decoder action)"),
                    expected: nd,
                    found: row.len(),
                });
            }
            flat_cost.extend_from_slice(row);
        }
        Self::new(
            Alphabet::new(ne)?,
            Alphabet::new(nd)?,
            Alphabet::new(feedback_size)?,
            flat,
            flat_cost,
            budget,
        )
    }

    /// Singleton actions at zero cost; feedback is either the full output
    /// (`z = y`) or a constant.
    pub fn no_actions(outputs: usize, full_feedback: bool) -> Self {
        let (feedback, sampling) = if full_feedback {
            (outputs, (0..outputs).collect())
        } else {
            (1, vec![0; outputs])
        };
        Self {
            encoder: Alphabet::singleton(),
            decoder: Alphabet::singleton(),
            feedback: Alphabet::new(feedback).expect("outputs >= 1"),
            outputs,
            sampling,
            cost: vec![0.0],
            budget: 0.0,
        }
    }

    pub fn encoder(&self) -> &Alphabet {
        &self.encoder
    }

    pub fn decoder(&self) -> &Alphabet {
        &self.decoder
    }

    pub fn feedback(&self) -> &Alphabet {
        &self.feedback
    }

    /// Size of the output axis of the sampling table.
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(
            self.encoder.clone(),
            self.decoder.clone(),
            self.feedback.clone(),
            self.sampling.clone(),
            self.cost.clone(),
            budget,
        )
    }

    /// `z = f(a_e, a_d, y)` with range checks.
    pub fn sample_feedback(&self, ae: usize, ad: usize, y: usize) -> Result<usize> {
        for (axis, index, size) in [
            ("encoder action", ae, self.encoder.size()),
            ("decoder action", ad, self.decoder.size()),
            ("output", y, self.outputs),
        ] {
            if index >= size {
                return Err(Error::IndexOutOfRange { axis, index, size });
            }
        }
        Ok(self.z(ae, ad, y))
    }

    /// Unchecked `f(a_e, a_d, y)`.
    #[inline]
    pub fn z(&self, ae: usize, ad: usize, y: usize) -> usize {
        self.sampling[(ae * self.decoder.size() + ad) * self.outputs + y]
    }

    /// `Λ(a_e, a_d)`.
    #[inline]
    pub fn cost(&self, ae: usize, ad: usize) -> f64 {
        self.cost[ae * self.decoder.size() + ad]
    }

    pub fn max_cost(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_cost(&self) -> f64 {
        self.cost.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fails unless the decoder side is a singleton: the policy-based modules
    /// model encoder-chosen actions only.
    pub fn require_encoder_actions(&self) -> Result<()> {
        if self.decoder.size() != 1 {
            return Err(Error::Precondition(format!(
                "policies act on encoder actions only; decoder alphabet has {} letters",
                self.decoder.size()
            )));
        }
        Ok(())
    }

    /// `E[(1/N) Σ_i Λ(A_{e,i})]` under a joint (decoder action fixed to 0).
    pub fn expected_cost(&self, joint: &TrajectoryDistribution) -> f64 {
        let n = joint.block_length();
        let per_step: f64 = (1..=n)
            .map(|i| {
                joint
                    .action_marginal(i)
                    .iter()
                    .enumerate()
                    .map(|(a, &p)| p * self.cost(a, 0))
                    .sum::<f64>()
            })
            .sum();
        per_step / n as f64
    }

    /// Enumerates every decoder strategy `φ: Y → A_d` (lexicographic, `φ[0]`
    /// most significant) and the induced sampling and cost tables
    /// `g(a_e, φ, y) = f(a_e, φ[y], y)` and `Λ(a_e, φ[y])`.
    pub fn expand_decoder_strategies(
        &self,
        outputs: &Alphabet,
        cap: usize,
    ) -> Result<StrategyExpansion> {
        if outputs.size() != self.outputs {
            return Err(Error::Dimension {
                axis: "output alphabet".into(),
                expected: self.outputs,
                found: outputs.size(),
            });
        }
        let nd = self.decoder.size();
        let ny = outputs.size();
        let blowup = crate::numeric::checked_pow(nd, ny);
        if blowup > cap as u128 {
            return Err(Error::ExpansionTooLarge { blowup, cap });
        }
        let count = blowup as usize;
        let strategies: Vec<Vec<usize>> = (0..count)
            .map(|mut code| {
                let mut phi = vec![0; ny];
                for slot in phi.iter_mut().rev() {
                    *slot = code % nd;
                    code /= nd;
                }
                phi
            })
            .collect();
        let ne = self.encoder.size();
        let mut sampling = Vec::with_capacity(ne * count * ny);
        let mut cost = Vec::with_capacity(ne * count * ny);
        for ae in 0..ne {
            for phi in &strategies {
                for (y, &ad) in phi.iter().enumerate() {
                    sampling.push(self.z(ae, ad, y));
                    cost.push(self.cost(ae, ad));
                }
            }
        }
        Ok(StrategyExpansion {
            expanded: Alphabet::new(count)?,
            encoder_size: ne,
            outputs: ny,
            strategies,
            sampling,
            cost,
        })
    }
}

/// Decoder strategies `φ: Y → A_d` with their induced sampling and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyExpansion {
    expanded: Alphabet,
    encoder_size: usize,
    outputs: usize,
    strategies: Vec<Vec<usize>>,
    sampling: Vec<usize>,
    cost: Vec<f64>,
}

impl StrategyExpansion {
    pub fn expanded_alphabet(&self) -> &Alphabet {
        &self.expanded
    }

    /// The strategy vector `φ[y]`.
    pub fn strategy(&self, phi: usize) -> &[usize] {
        &self.strategies[phi]
    }

    #[inline]
    fn offset(&self, ae: usize, phi: usize, y: usize) -> usize {
        debug_assert!(ae < self.encoder_size);
        (ae * self.expanded.size() + phi) * self.outputs + y
    }

    pub fn induced_sampling(&self, ae: usize, phi: usize, y: usize) -> usize {
        self.sampling[self.offset(ae, phi, y)]
    }

    pub fn induced_cost(&self, ae: usize, phi: usize, y: usize) -> f64 {
        self.cost[self.offset(ae, phi, y)]
    }
}
