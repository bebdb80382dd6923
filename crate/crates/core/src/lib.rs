//! Capacity bounds for finite-state channels (FSCs) whose feedback link is
//! sampled through cost-constrained encoder/decoder actions.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | FSC kernels `P(y, s' \| x, s)`, validation, no-ISI / indecomposability predicates, causal channel law |
//! | [`action`] | action alphabets, feedback sampling `z = f(a_e, a_d, y)`, cost function, Shannon-strategy expansion |
//! | [`policy`] | history-indexed causal policies and the dense joint over `(x^N, a^N, y^N)` |
//! | [`info`] | directed information, mutual information and entropies of a joint |
//! | [`baa`] | alternating maximization of directed information minus a Lagrangian cost |
//! | [`tradeoff`] | λ-sweeps, the `Γ ↦ C_N(Γ)` envelope and the finite-N sandwich bounds |
//! | [`bounds`] | single-letter lower bounds, zero/unit cost capacities, time sharing |
//! | [`exponent`] | the random-coding exponent `E_{o,N}` |
//! | [`oracle`] | brute-force reference computations used to cross-check everything above |
//!
//! All information quantities are in bits.

pub mod action;
pub mod baa;
pub mod bounds;
mod error;
pub mod exponent;
pub mod info;
pub mod instances;
pub mod kernel;
pub mod numeric;
pub mod oracle;
pub mod policy;
pub mod tradeoff;

pub use action::{ActionSystem, StrategyExpansion, DEFAULT_EXPANSION_CAP};
pub use baa::{BaaOptions, BaaProblem, BaaRun, BaaState, IterationTrace, TradeoffPoint};
pub use bounds::{ActionMode, SingleLetterProblem, SingleLetterSolution};
pub use error::{Error, Result};
pub use kernel::{Alphabet, FscKernel, Indecomposability, StationaryInfo, Violation};
pub use policy::{CausalPolicy, HistoryIndexer, TrajectoryDistribution};
pub use tradeoff::{SandwichBounds, TradeoffCurve};

/// Tolerance for row sums of stochastic tables.
pub const ROW_SUM_TOL: f64 = 1e-12;
