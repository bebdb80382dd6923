//! λ-sweeps and the cost–capacity envelope `Γ ↦ C_N(Γ)`.
//!
//! Every sweep point contributes the supporting line `I_U(λ) + λ Γ`, which by
//! weak duality upper-bounds `C_N(Γ)` everywhere. The envelope is the lower
//! hull of those lines, hence concave and nondecreasing by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::ActionSystem;
use crate::baa::{run_baa_on, BaaOptions, BaaProblem, TradeoffPoint};
use crate::error::{Error, Result};
use crate::kernel::FscKernel;

/// Geometric grid of 25 points on `[1e-3, 10]` preceded by `λ = 0`.
pub fn default_lambda_grid() -> Vec<f64> {
    let (lo, hi, k) = (1e-3f64, 10.0f64, 25);
    let mut grid = vec![0.0];
    grid.extend((0..k).map(|j| lo * (hi / lo).powf(j as f64 / (k - 1) as f64)));
    grid
}

/// Evenly spaced cost grid with `points` entries on `[0, max_cost]`.
pub fn cost_grid(max_cost: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| max_cost * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Sweep results at one block length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub block_length: usize,
    pub max_cost: f64,
    /// Sorted by λ ascending.
    pub points: Vec<TradeoffPoint>,
}

/// One row of the tabulated envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub gamma: f64,
    pub value: f64,
    /// λ of the line attaining the minimum.
    pub lambda: f64,
}

/// Upper bound `C_N(Γ)` and the shifted lower bound `C_N(Γ − Λ_max/N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichBounds {
    pub gamma: f64,
    pub upper: f64,
    /// Absent below the shift.
    pub lower: Option<f64>,
}

impl TradeoffCurve {
    pub fn new(block_length: usize, max_cost: f64, mut points: Vec<TradeoffPoint>) -> Self {
        points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        Self {
            block_length,
            max_cost,
            points,
        }
    }

    /// `min_k [I_U(λ_k) + λ_k Γ]` and the minimizing λ (lowest on ties).
    pub fn envelope_with_lambda(&self, gamma: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        for p in &self.points {
            let v = p.line(gamma);
            if v < best.0 {
                best = (v, p.lambda);
            }
        }
        best
    }

    pub fn envelope(&self, gamma: f64) -> f64 {
        self.envelope_with_lambda(gamma).0
    }

    /// Envelope tabulated on `points` evenly spaced costs.
    pub fn envelope_table(&self, points: usize) -> Vec<EnvelopeRow> {
        cost_grid(self.max_cost, points)
            .into_iter()
            .map(|gamma| {
                let (value, lambda) = self.envelope_with_lambda(gamma);
                EnvelopeRow {
                    gamma,
                    value,
                    lambda,
                }
            })
            .collect()
    }

    /// Sandwich pair on `points` evenly spaced costs.
    pub fn sandwich(&self, points: usize) -> Vec<SandwichBounds> {
        let shift = self.max_cost / self.block_length as f64;
        cost_grid(self.max_cost, points)
            .into_iter()
            .map(|gamma| SandwichBounds {
                gamma,
                upper: self.envelope(gamma),
                lower: (gamma >= shift - 1e-12).then(|| self.envelope((gamma - shift).max(0.0))),
            })
            .collect()
    }

    /// Smallest tabulated cost whose envelope is within `tol` of the envelope
    /// at full cost.
    pub fn saturation(&self, points: usize, tol: f64) -> Option<f64> {
        let top = self.envelope(self.max_cost);
        cost_grid(self.max_cost, points)
            .into_iter()
            .find(|&g| self.envelope(g) >= top - tol)
    }

    /// Pairs of consecutive points (by λ) whose costs increase by more than `slack`.
    pub fn cost_monotonicity_violations(&self, slack: f64) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .filter(|w| w[1].gamma > w[0].gamma + slack)
            .map(|w| (w[0].lambda, w[1].lambda))
            .collect()
    }

    pub fn nonconverged(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

/// Runs every λ of `grid` (in parallel) on one problem.
pub fn sweep_problem(problem: &BaaProblem, grid: &[f64], opts: &BaaOptions) -> Result<TradeoffCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("λ grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!("λ grid entry {bad} is not a finite nonnegative number")));
    }
    let points = grid
        .par_iter()
        .map(|&l| run_baa_on(problem, l, opts).map(|run| run.point))
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffCurve::new(problem.block_length(), problem.max_cost(), points))
}

/// Builds the problem at block length `n` and sweeps `grid`.
pub fn sweep_lambda(
    kernel: &FscKernel,
    sys: &ActionSystem,
    n: usize,
    grid: &[f64],
    opts: &BaaOptions,
) -> Result<TradeoffCurve> {
    let problem = BaaProblem::new(kernel, sys, n, opts.initial_state)?;
    sweep_problem(&problem, grid, opts)
}

/// Bisection on λ for each requested cost; new points are merged into the curve.
/// Targets are met within `tol` in cost where the map `λ ↦ Γ^(λ)` allows it.
pub fn refine_for_costs(
    problem: &BaaProblem,
    curve: &mut TradeoffCurve,
    targets: &[f64],
    tol: f64,
    opts: &BaaOptions,
) -> Result<()> {
    let found = targets
        .par_iter()
        .map(|&target| bisect_cost(problem, curve, target, tol, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut points = std::mem::take(&mut curve.points);
    points.extend(found.into_iter().flatten());
    *curve = TradeoffCurve::new(curve.block_length, curve.max_cost, points);
    Ok(())
}

const BISECTION_STEPS: usize = 60;

fn bisect_cost(
    problem: &BaaProblem,
    curve: &TradeoffCurve,
    target: f64,
    tol: f64,
    opts: &BaaOptions,
) -> Result<Vec<TradeoffPoint>> {
    // bracket: lo has cost >= target, hi has cost <= target
    let lo = curve
        .points
        .iter()
        .filter(|p| p.gamma >= target)
        .map(|p| p.lambda)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    let mut hi = curve
        .points
        .iter()
        .filter(|p| p.gamma <= target)
        .map(|p| p.lambda)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))));
    if curve.points.iter().any(|p| (p.gamma - target).abs() <= tol) {
        return Ok(Vec::new());
    }
    let mut added = Vec::new();
    if hi.is_none() {
        let mut l = curve.points.iter().map(|p| p.lambda).fold(1.0f64, f64::max);
        for _ in 0..20 {
            l *= 4.0;
            let p = run_baa_on(problem, l, opts)?.point;
            added.push(p);
            if p.gamma <= target {
                hi = Some(l);
                break;
            }
        }
    }
    // no point reaches the target cost: the curve is already saturated there
    let (Some(mut a), Some(mut b)) = (lo, hi) else {
        return Ok(added);
    };
    if a > b {
        return Ok(added);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        let p = run_baa_on(problem, mid, opts)?.point;
        added.push(p);
        if (p.gamma - target).abs() <= tol {
            break;
        }
        if p.gamma > target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(added)
}
