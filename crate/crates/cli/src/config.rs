//! Experiment configuration: a single JSON document.
//!
//! ```json
//! {
//!   "name": "to-feed-or-not",
//!   "channel": {
//!     "kernel": [[[[0.5, 0.5], [0.0, 0.0]], ...]],   // [s][x][y][s']
//!     "initial": [0.5, 0.5],
//!     "output_factors": [2, 2]                         // optional
//!   },
//!   "actions": {
//!     "sampling": [[[3, 3, 3, 3]], [[0, 1, 0, 1]]],   // [a_e][a_d][y] -> z
//!     "cost": [[0.0], [1.0]],                          // [a_e][a_d]
//!     "feedback": ["s0", "s1", "*"],
//!     "budget": 1.0
//!   },
//!   "block_lengths": [2, 3],
//!   "initial_state": 0
//! }
//! ```
//!
//! Everything else has a default; see [`ExperimentConfig`].

use std::fmt;
use std::path::Path;

use fscap_core::tradeoff::default_lambda_grid;
use fscap_core::{ActionSystem, Alphabet, BaaOptions, FscKernel, ROW_SUM_TOL};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// `P(y, s' | x, s)` as `[s][x][y][s']`.
    pub kernel: Vec<Vec<Vec<Vec<f64>>>>,
    pub initial: Vec<f64>,
    /// Sizes of the factors of a product output, most significant first.
    #[serde(default)]
    pub output_factors: Option<Vec<usize>>,
}

/// Feedback alphabet given either by its size or by its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeedbackSpec {
    Size(usize),
    Labels(Vec<String>),
}

impl FeedbackSpec {
    fn size(&self) -> usize {
        match self {
            FeedbackSpec::Size(n) => *n,
            FeedbackSpec::Labels(l) => l.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    /// `[a_e][a_d][y] -> z`.
    pub sampling: Vec<Vec<Vec<usize>>>,
    /// `[a_e][a_d] -> Λ`.
    pub cost: Vec<Vec<f64>>,
    pub feedback: FeedbackSpec,
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_budget() -> f64 {
    1.0
}

/// Settings of the `bounds` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSpec {
    /// Cost grid size on `[0, Λ_max]`.
    pub points: usize,
    /// Action-grid resolution of the encoder-mode bound.
    pub resolution: usize,
    /// Action-grid resolution of the decoder-mode bound (its grid has one
    /// simplex per state, so it grows much faster).
    pub decoder_resolution: usize,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            points: 101,
            resolution: 100,
            decoder_resolution: 25,
        }
    }
}

/// Settings of the `oracle-check` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    /// Grid step of the exhaustive search at `N = 1`.
    pub grid_step_n1: f64,
    /// Grid step of the exhaustive search at `N = 2`.
    pub grid_step_n2: f64,
    /// Costs at which the grid search is compared with the envelope.
    pub grid_costs: Vec<f64>,
    pub random_joints: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            grid_step_n1: 0.01,
            grid_step_n2: 0.05,
            grid_costs: vec![0.0, 1.0],
            random_joints: 100,
        }
    }
}

/// Settings of the `exponent` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentSpec {
    pub rho_points: usize,
    /// λ of the policy whose exponent is evaluated.
    pub lambda: f64,
}

impl Default for ExponentSpec {
    fn default() -> Self {
        Self {
            rho_points: 21,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub channel: ChannelSpec,
    pub actions: ActionSpec,
    pub block_lengths: Vec<usize>,
    /// Defaults to `0` followed by 25 geometric points on `[1e-3, 10]`.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// `None` averages over `channel.initial`.
    #[serde(default)]
    pub initial_state: Option<usize>,
    #[serde(default = "default_envelope_points")]
    pub envelope_points: usize,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub exponent: ExponentSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    10_000
}

fn default_envelope_points() -> usize {
    101
}

/// A semantic defect with the JSON pointer of the offending value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

fn issue(pointer: impl Into<String>, message: impl Into<String>) -> Issue {
    Issue {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Reads and parses a config; JSON errors carry line and column.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl ExperimentConfig {
    pub fn states(&self) -> usize {
        self.channel.kernel.len()
    }

    pub fn inputs(&self) -> usize {
        self.channel.kernel.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.channel
            .kernel
            .first()
            .and_then(|v| v.first())
            .map_or(0, Vec::len)
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(default_lambda_grid)
    }

    pub fn baa_options(&self) -> BaaOptions {
        BaaOptions {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            initial_state: self.initial_state,
            record_trace: false,
        }
    }

    /// Every semantic defect, in document order.
    pub fn validate(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        self.check_channel(&mut out);
        self.check_actions(&mut out);
        if self.block_lengths.is_empty() {
            out.push(issue("/block_lengths", "at least one block length is required"));
        }
        for (k, &n) in self.block_lengths.iter().enumerate() {
            if n == 0 {
                out.push(issue(format!("/block_lengths/{k}"), "block length must be at least 1"));
            }
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                out.push(issue("/lambda_grid", "λ grid is empty"));
            }
            for (k, l) in grid.iter().enumerate() {
                if !(l.is_finite() && *l >= 0.0) {
                    out.push(issue(format!("/lambda_grid/{k}"), format!("λ must be finite and ≥ 0, found {l}")));
                }
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            out.push(issue("/epsilon", format!("must be positive, found {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            out.push(issue("/max_iters", "must be at least 1"));
        }
        if let Some(s) = self.initial_state {
            if s >= self.states() {
                out.push(issue(
                    "/initial_state",
                    format!("state {s} out of range for {} states", self.states()),
                ));
            }
        }
        if self.envelope_points < 2 {
            out.push(issue("/envelope_points", "need at least 2 points"));
        }
        if self.bounds.points < 2 {
            out.push(issue("/bounds/points", "need at least 2 points"));
        }
        if self.bounds.resolution == 0 {
            out.push(issue("/bounds/resolution", "must be at least 1"));
        }
        if self.bounds.decoder_resolution == 0 {
            out.push(issue("/bounds/decoder_resolution", "must be at least 1"));
        }
        for (key, step) in [("grid_step_n1", self.oracle.grid_step_n1), ("grid_step_n2", self.oracle.grid_step_n2)] {
            if !(step > 0.0 && step <= 1.0) {
                out.push(issue(format!("/oracle/{key}"), format!("must lie in (0, 1], found {step}")));
            }
        }
        if self.exponent.rho_points < 2 {
            out.push(issue("/exponent/rho_points", "need at least 2 points"));
        }
        if !(self.exponent.lambda.is_finite() && self.exponent.lambda >= 0.0) {
            out.push(issue("/exponent/lambda", "must be finite and ≥ 0"));
        }
        out
    }

    fn check_channel(&self, out: &mut Vec<Issue>) {
        let (ns, nx, ny) = (self.states(), self.inputs(), self.outputs());
        if ns == 0 || nx == 0 || ny == 0 {
            out.push(issue("/channel/kernel", "kernel must have at least one state, input and output"));
            return;
        }
        for (s, by_x) in self.channel.kernel.iter().enumerate() {
            if by_x.len() != nx {
                out.push(issue(
                    format!("/channel/kernel/{s}"),
                    format!("expected {nx} inputs, found {}", by_x.len()),
                ));
                continue;
            }
            for (x, by_y) in by_x.iter().enumerate() {
                let ptr = format!("/channel/kernel/{s}/{x}");
                if by_y.len() != ny {
                    out.push(issue(ptr, format!("expected {ny} outputs, found {}", by_y.len())));
                    continue;
                }
                let mut sum = 0.0;
                let mut shaped = true;
                for (y, row) in by_y.iter().enumerate() {
                    if row.len() != ns {
                        out.push(issue(
                            format!("{ptr}/{y}"),
                            format!("expected {ns} next states, found {}", row.len()),
                        ));
                        shaped = false;
                        continue;
                    }
                    for (t, &v) in row.iter().enumerate() {
                        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                            out.push(issue(format!("{ptr}/{y}/{t}"), format!("probability {v} outside [0, 1]")));
                        }
                        sum += v;
                    }
                }
                if shaped && (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(issue(ptr, format!("row sums to {sum}, expected 1")));
                }
            }
        }
        if self.channel.initial.len() != ns {
            out.push(issue(
                "/channel/initial",
                format!("expected {ns} entries, found {}", self.channel.initial.len()),
            ));
        } else {
            for (s, &v) in self.channel.initial.iter().enumerate() {
                if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                    out.push(issue(format!("/channel/initial/{s}"), format!("probability {v} outside [0, 1]")));
                }
            }
            let sum: f64 = self.channel.initial.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(issue("/channel/initial", format!("sums to {sum}, expected 1")));
            }
        }
        if let Some(factors) = &self.channel.output_factors {
            if factors.iter().any(|&f| f == 0) {
                out.push(issue("/channel/output_factors", "factor sizes must be positive"));
            } else if factors.iter().product::<usize>() != ny {
                out.push(issue(
                    "/channel/output_factors",
                    format!("factors multiply to {}, but the kernel has {ny} outputs", factors.iter().product::<usize>()),
                ));
            }
        }
    }

    fn check_actions(&self, out: &mut Vec<Issue>) {
        let a = &self.actions;
        let ne = a.sampling.len();
        let nd = a.sampling.first().map_or(0, Vec::len);
        let nz = a.feedback.size();
        if ne == 0 || nd == 0 {
            out.push(issue("/actions/sampling", "need at least one encoder and one decoder action"));
            return;
        }
        if nd != 1 {
            out.push(issue(
                "/actions/sampling/0",
                format!("only encoder actions are supported; found {nd} decoder actions"),
            ));
        }
        if nz == 0 {
            out.push(issue("/actions/feedback", "feedback alphabet is empty"));
        }
        if let FeedbackSpec::Labels(labels) = &a.feedback {
            if let Err(e) = Alphabet::with_labels(labels.iter().cloned()) {
                out.push(issue("/actions/feedback", e.to_string()));
            }
        }
        let ny = self.outputs();
        for (e, by_d) in a.sampling.iter().enumerate() {
            if by_d.len() != nd {
                out.push(issue(
                    format!("/actions/sampling/{e}"),
                    format!("expected {nd} decoder actions, found {}", by_d.len()),
                ));
                continue;
            }
            for (d, by_y) in by_d.iter().enumerate() {
                let ptr = format!("/actions/sampling/{e}/{d}");
                if by_y.len() != ny {
                    out.push(issue(ptr, format!("expected one entry per channel output ({ny}), found {}", by_y.len())));
                    continue;
                }
                for (y, &z) in by_y.iter().enumerate() {
                    if z >= nz {
                        out.push(issue(format!("{ptr}/{y}"), format!("feedback symbol {z} outside alphabet of size {nz}")));
                    }
                }
            }
        }
        if a.cost.len() != ne {
            out.push(issue("/actions/cost", format!("expected {ne} encoder actions, found {}", a.cost.len())));
        }
        for (e, row) in a.cost.iter().enumerate() {
            if row.len() != nd {
                out.push(issue(format!("/actions/cost/{e}"), format!("expected {nd} decoder actions, found {}", row.len())));
            }
            for (d, &c) in row.iter().enumerate() {
                if !(c.is_finite() && c >= 0.0) {
                    out.push(issue(format!("/actions/cost/{e}/{d}"), format!("cost must be finite and ≥ 0, found {c}")));
                }
            }
        }
        if !(a.budget.is_finite() && a.budget >= 0.0) {
            out.push(issue("/actions/budget", format!("must be finite and ≥ 0, found {}", a.budget)));
        }
    }

    /// Validated kernel and action system.
    pub fn build(&self) -> Result<(FscKernel, ActionSystem), CliError> {
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(CliError::Invalid(issues));
        }
        let kernel = FscKernel::from_nested(&self.channel.kernel, self.channel.initial.clone())?;
        let sys = ActionSystem::from_nested(
            &self.actions.sampling,
            &self.actions.cost,
            self.actions.feedback.size(),
            self.actions.budget,
        )?;
        Ok((kernel, sys))
    }

    /// The kernel with the receiver's view of the next state removed, when
    /// the last output factor is that state (`y = y'·|S| + s'` with all mass
    /// on matching `s'`). Needed by the single-letter bounds.
    pub fn base_kernel(&self, kernel: &FscKernel) -> Result<FscKernel, CliError> {
        let ns = kernel.states().size();
        let factors = self.channel.output_factors.as_deref().unwrap_or(&[]);
        if factors.len() < 2 || *factors.last().expect("nonempty") != ns {
            return Err(CliError::Invalid(vec![issue(
                "/channel/output_factors",
                format!("single-letter bounds need the next state ({ns} values) as the last output factor"),
            )]));
        }
        let ny = kernel.outputs().size() / ns;
        let nx = kernel.inputs().size();
        let mut nested = vec![vec![vec![vec![0.0; ns]; ny]; nx]; ns];
        for s in 0..ns {
            for x in 0..nx {
                for y in 0..kernel.outputs().size() {
                    for t in 0..ns {
                        let p = kernel.prob(s, x, y, t);
                        if p == 0.0 {
                            continue;
                        }
                        if y % ns != t {
                            return Err(CliError::Invalid(vec![issue(
                                format!("/channel/kernel/{s}/{x}/{y}/{t}"),
                                "mass on an output whose state factor differs from the next state",
                            )]));
                        }
                        nested[s][x][y / ns][t] += p;
                    }
                }
            }
        }
        Ok(FscKernel::from_nested(&nested, kernel.initial().to_vec())?)
    }
}
