//! The five subcommands. Each writes its files under `out` and returns what
//! should be printed.

use std::path::Path;
use std::time::Instant;

use fscap_core::baa::{run_baa_on, BaaProblem, BaaState};
use fscap_core::bounds::{
    backward_link_capacity_nocost, time_sharing, zero_unit_cost_capacity, InnerOptions,
    LowerBoundTable,
};
use fscap_core::exponent::{curvature_near_zero, exponent_on, slope_at_zero};
use fscap_core::info::{directed_information_view, InputView};
use fscap_core::oracle::{
    grid_capacity, literal_channel_law, literal_directed_info, literal_r_update, policy_tables,
    GridObjective, JointLayout, LiteralInstance, OracleMethod, OraclePolicy, OracleReport,
    MAX_LITERAL_ENTRIES,
};
use fscap_core::policy::build_joint;
use fscap_core::tradeoff::{cost_grid, sweep_problem, TradeoffCurve};
use fscap_core::{ActionMode, CausalPolicy, Error, FscKernel, SingleLetterProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, join, num, opt_num, write_json, Csv};

/// Lines for stdout and stderr, and an error to exit with after printing.
#[derive(Debug, Default)]
pub struct Outcome {
    pub messages: Vec<String>,
    pub warnings: Vec<String>,
    pub failure: Option<CliError>,
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (kernel, sys) = cfg.build()?;
    let mut out = Outcome::default();
    out.messages.push(format!(
        "ok: {} states, {} inputs, {} outputs, {} encoder actions, {} feedback symbols",
        kernel.states().size(),
        kernel.inputs().size(),
        kernel.outputs().size(),
        sys.encoder().size(),
        sys.feedback().size()
    ));
    if kernel.is_no_isi() {
        let info = kernel.indecomposability()?;
        out.messages.push(format!("no ISI; state chain {:?}", info.indecomposability));
    } else {
        out.messages.push("state evolution depends on the input (ISI)".into());
    }
    Ok(out)
}

fn version_info() -> Value {
    json!({
        "fscap": env!("CARGO_PKG_VERSION"),
    })
}

fn sweep_csv(curve: &TradeoffCurve) -> Csv {
    let mut csv = Csv::new(&["lambda", "gamma", "c_lambda", "i_lower", "i_upper", "iterations", "converged"]);
    for p in &curve.points {
        csv.row(&[
            num(p.lambda),
            num(p.gamma),
            num(p.c_lambda),
            num(p.i_lower),
            num(p.i_upper),
            p.iterations.to_string(),
            p.converged.to_string(),
        ]);
    }
    csv
}

fn envelope_csv(curve: &TradeoffCurve, points: usize) -> Csv {
    let mut csv = Csv::new(&["gamma", "c_upper", "c_lower_shifted"]);
    for row in curve.sandwich(points) {
        csv.row(&[num(row.gamma), num(row.upper), opt_num(row.lower)]);
    }
    csv
}

/// Sweeps every block length; also used by the acceptance suite.
pub fn sweep_curves(cfg: &ExperimentConfig) -> Result<Vec<(TradeoffCurve, f64)>, CliError> {
    let (kernel, sys) = cfg.build()?;
    let grid = cfg.lambda_grid();
    let opts = cfg.baa_options();
    cfg.block_lengths
        .iter()
        .map(|&n| {
            let start = Instant::now();
            let problem = BaaProblem::new(&kernel, &sys, n, cfg.initial_state)?;
            let curve = sweep_problem(&problem, &grid, &opts)?;
            Ok((curve, start.elapsed().as_secs_f64()))
        })
        .collect()
}

pub fn capacity_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let curves = sweep_curves(cfg)?;
    ensure_dir(out_dir)?;
    let mut out = Outcome::default();
    let mut per_n = Vec::new();
    for (curve, secs) in &curves {
        let n = curve.block_length;
        let sweep_path = join(out_dir, &format!("sweep_{n}.csv"));
        sweep_csv(curve).write(&sweep_path)?;
        let env_path = join(out_dir, &format!("envelope_{n}.csv"));
        envelope_csv(curve, cfg.envelope_points).write(&env_path)?;
        out.messages.push(format!("wrote {}", sweep_path.display()));
        out.messages.push(format!("wrote {}", env_path.display()));
        let nonconverged = curve.nonconverged();
        if nonconverged > 0 {
            out.warnings.push(format!("N={n}: {nonconverged} λ values did not converge"));
        }
        let cost_violations = curve.cost_monotonicity_violations(1e-9);
        if !cost_violations.is_empty() {
            out.warnings.push(format!(
                "N={n}: cost increases with λ between {} consecutive points",
                cost_violations.len()
            ));
        }
        per_n.push(json!({
            "block_length": n,
            "runtime_s": secs,
            "points": curve.points.len(),
            "nonconverged": nonconverged,
            "max_iterations": curve.points.iter().map(|p| p.iterations).max(),
            "max_final_gap": curve.points.iter().map(|p| p.final_gap).fold(0.0, f64::max),
            "unconstrained_value": curve.envelope(curve.max_cost),
            "zero_cost_value": curve.envelope(0.0),
        }));
    }
    // pointwise comparison of consecutive block lengths on the envelope grid
    let mut sorted: Vec<&TradeoffCurve> = curves.iter().map(|(c, _)| c).collect();
    sorted.sort_by_key(|c| c.block_length);
    let comparisons: Vec<Value> = sorted
        .windows(2)
        .map(|w| {
            let excess = cost_grid(w[0].max_cost, cfg.envelope_points)
                .into_iter()
                .map(|g| w[1].envelope(g) - w[0].envelope(g))
                .fold(f64::NEG_INFINITY, f64::max);
            json!({
                "shorter": w[0].block_length,
                "longer": w[1].block_length,
                "max_excess_of_longer": excess,
            })
        })
        .collect();
    let report = json!({
        "command": "capacity-sweep",
        "name": cfg.name,
        "versions": version_info(),
        "epsilon": cfg.epsilon,
        "max_iters": cfg.max_iters,
        "initial_state": cfg.initial_state,
        "lambda_grid": cfg.lambda_grid(),
        "block_lengths": per_n,
        "envelope_comparisons": comparisons,
        "warnings": out.warnings,
        "runtime_s": start.elapsed().as_secs_f64(),
    });
    let path = join(out_dir, "report.json");
    write_json(&path, &report)?;
    out.messages.push(format!("wrote {}", path.display()));
    Ok(out)
}

fn inner_options(cfg: &ExperimentConfig) -> InnerOptions {
    InnerOptions {
        seed: cfg.seed,
        ..InnerOptions::default()
    }
}

fn table_value(table: &LowerBoundTable, gamma: f64) -> Result<Option<f64>, CliError> {
    match table.at(gamma) {
        Ok(s) => Ok(Some(s.value)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn bounds(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (kernel, sys) = cfg.build()?;
    let base = cfg.base_kernel(&kernel)?;
    let inner = inner_options(cfg);
    let enc = SingleLetterProblem::from_state_sampling(&base, &sys, ActionMode::Encoder)?;
    let dec = SingleLetterProblem::from_state_sampling(&base, &sys, ActionMode::Decoder)?;
    let (c0, c1) = zero_unit_cost_capacity(&enc, &inner);
    let enc_table = LowerBoundTable::new(&enc, cfg.bounds.resolution, &inner)?;
    let dec_table = LowerBoundTable::new(&dec, cfg.bounds.decoder_resolution, &inner)?;
    let max_cost = sys.max_cost();
    let mut csv = Csv::new(&["gamma", "c_enc_lower", "c_dec_lower", "time_sharing", "c0", "c1"]);
    let mut infeasible = 0;
    for gamma in cost_grid(max_cost, cfg.bounds.points) {
        let e = table_value(&enc_table, gamma)?;
        let d = table_value(&dec_table, gamma)?;
        if e.is_none() || d.is_none() {
            infeasible += 1;
        }
        let fraction = if max_cost > 0.0 { gamma / max_cost } else { 1.0 };
        csv.row(&[
            num(gamma),
            opt_num(e),
            opt_num(d),
            num(time_sharing(c0, c1, fraction)),
            num(c0),
            num(c1),
        ]);
    }
    ensure_dir(out_dir)?;
    let path = join(out_dir, "bounds.csv");
    csv.write(&path)?;
    let mut out = Outcome::default();
    out.messages.push(format!("wrote {}", path.display()));
    if infeasible > 0 {
        out.warnings.push(format!("{infeasible} costs below the cheapest action left empty"));
    }
    let backward = SingleLetterProblem::from_state_sampling(&base, &sys, ActionMode::BackwardLink)
        .and_then(|p| backward_link_capacity_nocost(&p, &inner));
    let report = json!({
        "command": "bounds",
        "name": cfg.name,
        "versions": version_info(),
        "c0": c0,
        "c1": c1,
        "stationary_distribution": enc.pi,
        "resolution": cfg.bounds.resolution,
        "decoder_resolution": cfg.bounds.decoder_resolution,
        "backward_link_nocost": backward.as_ref().ok(),
        "backward_link_note": backward.as_ref().err().map(ToString::to_string),
        "warnings": out.warnings,
        "runtime_s": start.elapsed().as_secs_f64(),
    });
    let rpath = join(out_dir, "bounds_report.json");
    write_json(&rpath, &report)?;
    out.messages.push(format!("wrote {}", rpath.display()));
    Ok(out)
}

pub fn exponent(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let (kernel, sys) = cfg.build()?;
    let ns = kernel.states().size();
    let opts = cfg.baa_options();
    ensure_dir(out_dir)?;
    let mut out = Outcome::default();
    let mut per_n = Vec::new();
    for &n in &cfg.block_lengths {
        let problem = BaaProblem::new(&kernel, &sys, n, cfg.initial_state)?;
        let run = run_baa_on(&problem, cfg.exponent.lambda, &opts)?;
        let per_state = (0..ns)
            .map(|s| BaaProblem::new(&kernel, &sys, n, Some(s)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut header: Vec<String> = vec!["rho".into()];
        header.extend((0..ns).map(|s| format!("e_s{s}")));
        header.push("worst_case".into());
        header.push("worst_case_shifted".into());
        let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for rho in cost_grid(1.0, cfg.exponent.rho_points) {
            let values = per_state
                .iter()
                .map(|p| exponent_on(p, &run.policy, rho))
                .collect::<Result<Vec<_>, _>>()?;
            let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
            let mut row: Vec<String> = vec![num(rho)];
            row.extend(values.iter().map(|v| num(*v)));
            row.push(num(worst));
            row.push(num(worst - rho * (ns as f64).log2() / n as f64));
            csv.row(&row);
        }
        let path = join(out_dir, &format!("exponent_{n}.csv"));
        csv.write(&path)?;
        out.messages.push(format!("wrote {}", path.display()));
        let mut slopes = Vec::new();
        for (s, p) in per_state.iter().enumerate() {
            let rate = directed_information_view(&build_joint(&run.policy, &kernel, &sys, Some(s))?, InputView::ChannelInputs)?
                / n as f64;
            slopes.push(json!({
                "initial_state": s,
                "rate": rate,
                "slope_at_zero": slope_at_zero(p, &run.policy, 1e-3)?,
                "curvature_near_zero": curvature_near_zero(p, &run.policy, 1e-2)?,
            }));
        }
        per_n.push(json!({ "block_length": n, "policy_point": run.point, "per_state": slopes }));
    }
    let report = json!({
        "command": "exponent",
        "name": cfg.name,
        "versions": version_info(),
        "lambda": cfg.exponent.lambda,
        "block_lengths": per_n,
    });
    let path = join(out_dir, "exponent_report.json");
    write_json(&path, &report)?;
    out.messages.push(format!("wrote {}", path.display()));
    Ok(out)
}

/// Largest entrywise disagreement as `(literal, main)`.
fn worst_entry(literal: &OraclePolicy, main: &OraclePolicy) -> (f64, f64) {
    let mut worst = (f64::NAN, f64::NAN);
    let mut gap = f64::NEG_INFINITY;
    for (key, lit) in literal {
        let Some(m) = main.get(key) else {
            return (f64::NAN, f64::NAN);
        };
        for (a, b) in lit.iter().zip(m) {
            if (a - b).abs() > gap {
                gap = (a - b).abs();
                worst = (*a, *b);
            }
        }
    }
    worst
}

pub struct OracleRun {
    pub reports: Vec<OracleReport>,
    pub skipped: Vec<String>,
}

/// Every applicable oracle comparison. `inject_fault` perturbs the main
/// r-update before it is compared (negative control).
pub fn oracle_reports(cfg: &ExperimentConfig, inject_fault: bool) -> Result<OracleRun, CliError> {
    let (kernel, sys) = cfg.build()?;
    let opts = cfg.baa_options();
    let s0 = cfg.initial_state;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = cfg.lambda_grid();
    let max_lambda = grid.iter().copied().fold(0.0, f64::max);
    for &n in &cfg.block_lengths {
        if n > 2 {
            skipped.push(format!("N={n}: oracles are limited to N ≤ 2"));
            continue;
        }
        let problem = BaaProblem::new(&kernel, &sys, n, s0)?;
        let ix = *problem.indexer();
        if ix.trajectories() > MAX_LITERAL_ENTRIES {
            skipped.push(format!("N={n}: {} trajectories exceed the literal cap", ix.trajectories()));
            continue;
        }
        reports.push(channel_law_report(&kernel, &problem, s0));

        for lambda in [0.0, max_lambda.min(1.0), max_lambda] {
            match r_update_report(&kernel, &sys, &problem, lambda, inject_fault) {
                Ok(r) => reports.push(r),
                Err(Error::SizeCap { .. }) => {
                    skipped.push(format!("N={n} λ={lambda}: literal r-update above its size cap"));
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }

        let layout = JointLayout {
            block_length: n,
            inputs: kernel.inputs().size(),
            actions: sys.encoder().size(),
            outputs: kernel.outputs().size(),
        };
        let mut worst: Option<OracleReport> = None;
        for _ in 0..cfg.oracle.random_joints {
            let policy = CausalPolicy::random(ix, &mut rng);
            let joint = build_joint(&policy, &kernel, &sys, s0)?;
            let chain = directed_information_view(&joint, InputView::ChannelInputs)?;
            let literal = literal_directed_info(layout, joint.probs())?;
            let r = OracleReport {
                quantity: format!("I(X^{n} -> Y^{n}) on random policies, worst of {}", cfg.oracle.random_joints),
                oracle_value: literal,
                main_value: chain,
                search_space_size: ix.trajectories() as u128,
                method: OracleMethod::LiteralSum,
                tolerance: 1e-9,
            };
            if worst.as_ref().map_or(true, |w| r.absolute_gap() > w.absolute_gap()) {
                worst = Some(r);
            }
        }
        reports.extend(worst);

        let step = if n == 1 { cfg.oracle.grid_step_n1 } else { cfg.oracle.grid_step_n2 };
        let objective = s0.map_or(GridObjective::Averaged, GridObjective::InitialState);
        let curve = sweep_problem(&problem, &grid, &opts)?;
        for &gamma in &cfg.oracle.grid_costs {
            let gamma = gamma.min(sys.max_cost());
            match grid_capacity(&kernel, &sys, n, step, gamma, objective) {
                Ok(g) => reports.push(OracleReport {
                    quantity: format!("C_{n}({gamma}) grid (step {step}) vs λ-envelope"),
                    oracle_value: g.value,
                    main_value: curve.envelope(gamma),
                    search_space_size: g.points,
                    method: OracleMethod::GridSearch,
                    tolerance: 5e-3,
                }),
                Err(Error::SizeCap { .. }) => {
                    skipped.push(format!("N={n} Γ={gamma}: grid search above its caps"));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(OracleRun { reports, skipped })
}

fn channel_law_report(kernel: &FscKernel, problem: &BaaProblem, s0: Option<usize>) -> OracleReport {
    let ix = problem.indexer();
    let n = problem.block_length();
    let mut worst = (f64::NAN, f64::NAN);
    let mut gap = f64::NEG_INFINITY;
    for (t, &p) in problem.channel_law().iter().enumerate() {
        let traj = ix.decode_trajectory(n, t);
        let xs: Vec<usize> = traj.iter().map(|&(u, _)| ix.split_letter(u).0).collect();
        let ys: Vec<usize> = traj.iter().map(|&(_, y)| y).collect();
        let lit = literal_channel_law(kernel, &xs, &ys, s0);
        if (lit - p).abs() > gap {
            gap = (lit - p).abs();
            worst = (lit, p);
        }
    }
    OracleReport {
        quantity: format!("P(y^{n} || x^{n}) worst trajectory"),
        oracle_value: worst.0,
        main_value: worst.1,
        search_space_size: problem.channel_law().len() as u128,
        method: OracleMethod::LiteralSum,
        tolerance: 1e-12,
    }
}

fn r_update_report(
    kernel: &FscKernel,
    sys: &fscap_core::ActionSystem,
    problem: &BaaProblem,
    lambda: f64,
    inject_fault: bool,
) -> Result<OracleReport, Error> {
    let n = problem.block_length();
    let mut state = BaaState::new(problem, lambda)?;
    for _ in 0..3 {
        state.step();
    }
    let before = policy_tables(state.policy());
    let q = state.reverse();
    let ix = *problem.indexer();
    let lookup = |us: &[usize], ys: &[usize]| {
        let code = us.iter().zip(ys).fold(0, |c, (&u, &y)| ix.push_trajectory(c, u, y));
        q[code]
    };
    let inst = LiteralInstance {
        kernel,
        sys,
        block_length: n,
        initial_state: problem.initial_state(),
    };
    let literal = literal_r_update(&inst, lambda, &before, &lookup)?;
    state.update_r();
    let mut main = policy_tables(state.policy());
    if inject_fault {
        // pull toward the first letter; a uniform mix would leave uniform rows unchanged
        for row in main.values_mut() {
            row.iter_mut().for_each(|p| *p *= 1.0 - 1e-6);
            row[0] += 1e-6;
        }
    }
    let (oracle_value, main_value) = worst_entry(&literal, &main);
    Ok(OracleReport {
        quantity: format!("r-update entry, N={n} λ={lambda}, worst of {}", literal.len() * ix.letters()),
        oracle_value,
        main_value,
        search_space_size: ix.trajectories() as u128,
        method: OracleMethod::DeterministicEnumeration,
        tolerance: 1e-10,
    })
}

pub fn oracle_check(cfg: &ExperimentConfig, out_dir: &Path, inject_fault: bool) -> Result<Outcome, CliError> {
    let run = oracle_reports(cfg, inject_fault)?;
    ensure_dir(out_dir)?;
    let failed = run.reports.iter().filter(|r| !r.passed()).count();
    let report = json!({
        "command": "oracle-check",
        "name": cfg.name,
        "versions": version_info(),
        "reports": run.reports,
        "skipped": run.skipped,
        "all_passed": failed == 0,
    });
    let path = join(out_dir, "oracle_report.json");
    write_json(&path, &report)?;
    let mut out = Outcome::default();
    for r in &run.reports {
        out.messages.push(format!(
            "{} {}: gap {} (tolerance {})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.quantity,
            num(r.absolute_gap()),
            num(r.tolerance)
        ));
    }
    out.warnings.extend(run.skipped.iter().map(|s| format!("skipped: {s}")));
    out.messages.push(format!("wrote {}", path.display()));
    if failed > 0 {
        out.failure = Some(CliError::OracleMismatch(failed));
    }
    Ok(out)
}
