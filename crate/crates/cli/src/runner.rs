//! Scenario execution: assemble, solve, check, report.

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Table};
use crate::seeds::instance_seed;
use fraclap_core::barriers::{barrier_wr, bisect_radius, boundary_decay_estimate, lower_growth_fit, verify_barrier_1d, verify_barrier_inequality, EnvelopeFit, ShellRange};
use fraclap_core::chain::{build_chain, chain_margin, verify_chain_harnack};
use fraclap_core::checks::{
    ball_bifurcation_sweep, check_1d_symmetry, check_directional_monotonicity, check_uniform_convergence,
    check_uniqueness_from, check_upper_bound, eigen_seed, generate_witness, lambda_sweep, max_principle_witness,
    moving_planes_scan, s_normal_spread, sliding_check, torsion_maximum, ConvergenceConfig, SlidingProblem, Status,
    BOUND_MARGIN_CELLS, SYMMETRY_MARGIN_CELLS,
};
use fraclap_core::cone::{fit_homogeneity_exponent, harmonic_profile, normalize_profile, ConeProfile, OuterData};
use fraclap_core::fit::ShellTable;
use fraclap_core::grid::Truncation;
use fraclap_core::solvers::{solve_semilinear, with_exterior};
use fraclap_core::{DiscreteOperator, DomainKind, DomainSpec, Error, ExteriorRule, GridFunction, NonlinearitySpec, UniformGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("configuration: {0}")]
    Config(String),
}

type Result<T> = std::result::Result<T, RunError>;

/// Runs the scenario described by `cfg`. Errors are recorded in the report,
/// which keeps every block produced before the failure.
pub fn run_scenario(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut rep = ExperimentReport::new(cfg.name());
    let start = Instant::now();
    let outcome = match cfg.kind() {
        "semilinear" => run_semilinear(cfg, &mut rep),
        "cone-exponent" => run_cone_sweep(cfg, &mut rep),
        "barrier" => run_barrier(cfg, &mut rep),
        "chain" => run_chain(cfg, &mut rep),
        "maxprin" => run_maxprin(cfg, &mut rep),
        "sliding" => run_sliding(cfg, &mut rep),
        other => Err(RunError::Config(format!("unknown scenario kind {other}"))),
    };
    if let Err(e) = outcome {
        rep.error = Some(e.to_string());
    }
    rep.wall_times.push(("total".into(), start.elapsed().as_secs_f64()));
    rep
}

fn lap(rep: &mut ExperimentReport, name: &str, clock: Instant) {
    rep.wall_times.push((name.to_string(), clock.elapsed().as_secs_f64()));
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("metrics serialize")
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<UniformGrid> {
    let (lo, hi) = cfg.grid_bounds().map_err(RunError::Config)?;
    Ok(UniformGrid::from_box(&lo, &hi, cfg.float("grid", "h"))?)
}

pub fn nonlinearity(cfg: &ExperimentConfig) -> NonlinearitySpec {
    match cfg.text("nonlinearity", "kind") {
        "logistic" => NonlinearitySpec::logistic(cfg.float("nonlinearity", "t1")),
        "zero" => NonlinearitySpec::zero(),
        _ => NonlinearitySpec::allen_cahn(),
    }
}

fn solution_table(u: &GridFunction, file: &str) -> Table {
    let n = u.grid.dim();
    let mut cols: Vec<String> = (1..=n).map(|a| format!("x{a}")).collect();
    cols.push("u".into());
    let refs: Vec<&str> = cols.iter().map(|c| c.as_str()).collect();
    let mut t = Table::new(file, &refs);
    for i in 0..u.grid.len() {
        let mut row = u.grid.point(i);
        row.push(u.values[i]);
        t.push(row);
    }
    t
}

fn shell_table(table: &ShellTable, file: &str) -> Table {
    let mut t = Table::new(file, &["lower", "upper", "inf", "sup", "arg_inf", "arg_sup", "count"]);
    for r in &table.rows {
        t.push(vec![r.lower, r.upper, r.inf, r.sup, r.arg_inf, r.arg_sup, r.count as f64]);
    }
    t
}

/// Envelope metrics without the shell table, which goes to CSV.
fn fit_json(fit: &EnvelopeFit) -> Value {
    json!({
        "exponent": fit.exponent,
        "constant": fit.constant,
        "r_squared": fit.r_squared,
        "shells": fit.shells,
        "span": fit.span,
    })
}

fn run_semilinear(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let clock = Instant::now();
    let grid = build_grid(cfg)?;
    let domain = cfg.domain().map_err(RunError::Config)?;
    let s = cfg.s();
    let window = cfg.int("grid", "window") as usize;
    let op = DiscreteOperator::assemble(&grid, &domain, s, window)?;
    lap(rep, "assemble", clock);

    let f = nonlinearity(cfg);
    let opts = cfg.solve_options();
    let validation = f.validate(2000);
    let f_ok = validation.is_ok();
    let kind = domain.kind().clone();
    let half_space = matches!(kind, DomainKind::HalfSpace { .. });
    let lipschitz = matches!(kind, DomainKind::HalfSpace { .. } | DomainKind::LipschitzEpigraph(_));
    let coercive = matches!(kind, DomainKind::CoerciveEpigraph(_));
    let epigraph = lipschitz || coercive;

    let ext = ExteriorRule::Truncated(Truncation { domain: domain.clone(), far_value: f.mu, lateral_clamp: true });
    let clock = Instant::now();
    let (u, solve) = solve_semilinear(&op, &f, &ext, &opts)?;
    lap(rep, "solve", clock);
    rep.notes.insert("solve".into(), to_json(&solve));
    rep.tables.push(solution_table(&u, "solution.csv"));

    let h = grid.h();
    let (lo, hi) = (grid.lower(), grid.upper());
    let n = grid.dim();
    let fit_margin = cfg.float("checks", "fit_margin");
    let keep = |x: &[f64]| {
        (0..n - 1).all(|a| x[a] - lo[a] >= fit_margin && hi[a] - x[a] >= fit_margin) && hi[n - 1] - x[n - 1] >= fit_margin
    };
    let range = ShellRange { d_min: cfg.float("checks", "fit_min"), d_max: cfg.float("checks", "fit_max") };
    let r2_min = cfg.float("checks", "r_squared");
    let mut decay: Option<EnvelopeFit> = None;
    let decay_fit = |decay: &mut Option<EnvelopeFit>| -> Result<EnvelopeFit> {
        if decay.is_none() {
            *decay = Some(boundary_decay_estimate(&u, &domain, range, keep)?);
        }
        Ok(decay.clone().expect("just set"))
    };

    for name in cfg.checks() {
        let clock = Instant::now();
        match name.as_str() {
            "hypotheses" => {
                let (violations, estimate) = match &validation {
                    Ok(v) => (Vec::new(), Some(v.lipschitz_estimate)),
                    Err(Error::Hypothesis(bad)) => {
                        (bad.iter().map(|v| format!("{} at t = {}", v.assumption, v.t)).collect(), None)
                    }
                    Err(e) => (vec![e.to_string()], None),
                };
                let metrics = json!({
                    "nonlinearity": f.name, "mu": f.mu, "t0": f.t0, "delta0": f.delta0, "t1": f.t1,
                    "lipschitz": f.lipschitz, "lipschitz_estimate": estimate, "violations": violations,
                    "domain": domain_label(&kind), "domain_lipschitz": domain.lipschitz(),
                });
                let status = if f_ok && epigraph { Status::Pass } else { Status::ReportOnly };
                rep.add("hypotheses", status, metrics);
            }
            "upper-bound" => {
                let r = check_upper_bound(&u, &op, f.mu, BOUND_MARGIN_CELLS);
                let required = cfg.float("checks", "upper_margin");
                let passed = r.passed && r.margin >= required;
                let metrics = json!({
                    "max_u": r.max_u, "margin": r.margin, "required_margin": required,
                    "argmax": r.argmax.map(|i| grid.point(i)), "violations": r.violations.len(),
                    "margin_cells": BOUND_MARGIN_CELLS,
                });
                rep.add("upper-bound", Status::gate(passed, f_ok && epigraph), metrics);
            }
            "uniform-convergence" => {
                let cc = ConvergenceConfig { eps1: cfg.float("checks", "eps1"), ..ConvergenceConfig::default() };
                let r = check_uniform_convergence(&u, &op, &f, torsion_maximum(n, s), &cc)?;
                let deepest = cfg.float("checks", "deepest_inf");
                let passed = r.passed && r.deepest_inf >= deepest;
                rep.tables.push(shell_table(&r.table, "shells.csv"));
                let mut metrics = to_json(&r);
                metrics.as_object_mut().expect("object").remove("table");
                metrics["required_deepest_inf"] = json!(deepest);
                rep.add("uniform-convergence", Status::gate(passed, f_ok && lipschitz), metrics);
            }
            "monotonicity" => {
                let a = match cfg.floats("checks", "direction") {
                    [] => vec![0.0; n - 1],
                    d => d.to_vec(),
                };
                let threshold = cfg.float("checks", "monotone_threshold");
                let k = if a.iter().all(|v| *v == 0.0) { 0.0 } else { domain.lipschitz().unwrap_or(0.0) };
                let r = check_directional_monotonicity(&u, &op, &a, k, -threshold, BOUND_MARGIN_CELLS)?;
                let passed = r.min_difference >= threshold;
                let mut metrics = to_json(&r);
                metrics["threshold"] = json!(threshold);
                metrics["argmin"] = json!(r.argmin.map(|i| grid.point(i)));
                rep.add("monotonicity", Status::gate(passed, f_ok && epigraph), metrics);
            }
            "symmetry" => {
                let thr = cfg.float("checks", "symmetry_threshold");
                let r = check_1d_symmetry(&u, &op, SYMMETRY_MARGIN_CELLS, thr)?;
                rep.add("symmetry", Status::gate(r.passed, f_ok && half_space && n > 1), to_json(&r));
            }
            "uniqueness" => {
                let radius = cfg.float("checks", "seed_radius");
                let mut center: Vec<f64> = (0..n).map(|a| 0.5 * (lo[a] + hi[a])).collect();
                center[n - 1] = domain.graph_height(&center).unwrap_or(lo[n - 1]) + radius + 2.0 * h;
                let amplitude = cfg.float("checks", "seed_amplitude");
                let (lambda1, seed) = eigen_seed(&op, center.clone(), radius, amplitude, &opts)?;
                let thr = cfg.float("checks", "uniqueness_threshold");
                let seeds = [("eigen-seed".to_string(), seed)];
                let r = check_uniqueness_from(&op, &f, &ext, (&u, solve.iterations), &seeds, &opts, thr)?;
                let mut metrics = to_json(&r);
                metrics["threshold"] = json!(thr);
                metrics["seed"] = json!({"center": center, "radius": radius, "amplitude": amplitude, "lambda1": lambda1});
                rep.add("uniqueness", Status::gate(r.passed, f_ok && lipschitz), metrics);
            }
            "ball-bifurcation" => {
                let radii = cfg.floats("checks", "ball_radii").to_vec();
                let center: Vec<f64> = (0..n).map(|a| 0.5 * (lo[a] + hi[a])).collect();
                let op_for = |r: f64| DiscreteOperator::assemble(&grid, &DomainSpec::ball(center.clone(), r)?, s, window);
                let rows = ball_bifurcation_sweep(op_for, &f, &radii, &opts)?;
                let mut t = Table::new("ball_bifurcation.csv", &["radius", "lambda1", "max_u", "discrepancy"]);
                for r in &rows {
                    t.push(vec![r.radius, r.lambda1, r.max_u, r.discrepancy]);
                }
                rep.tables.push(t);
                let slope = (f.eval(1e-6) - f.eval(0.0)) / 1e-6;
                rep.add("ball-bifurcation", Status::ReportOnly, json!({"f_prime_zero": slope, "rows": rows}));
            }
            "moving-planes" => {
                let lambda0 = domain.graph_height(&vec![0.0; n]).unwrap_or(lo[n - 1]);
                let top = lambda0 + 0.75 * (hi[n - 1] - lambda0);
                let sweep = lambda_sweep(lambda0, top, cfg.int("checks", "planes_levels") as usize);
                let r = moving_planes_scan(&u, &op, &sweep, cfg.float("checks", "planes_tol"))?;
                let mut t = Table::new("planes.csv", &["lambda", "min_w", "nodes"]);
                for l in &r.levels {
                    t.push(vec![l.lambda, l.min_w, l.nodes as f64]);
                }
                rep.tables.push(t);
                let metrics = json!({
                    "lambda0": r.lambda0, "levels": r.levels.len(), "min_overall": r.min_overall,
                    "first_violation": r.first_violation, "nested": r.nested, "tol": cfg.float("checks", "planes_tol"),
                });
                rep.add("moving-planes", Status::gate(r.passed && r.nested, f_ok && coercive), metrics);
            }
            "boundary-decay" => {
                let fit = decay_fit(&mut decay)?;
                rep.tables.push(shell_table(&fit.table, "decay_shells.csv"));
                let mut metrics = fit_json(&fit);
                metrics["required_r_squared"] = json!(r2_min);
                rep.add("boundary-decay", Status::gate(fit.r_squared >= r2_min, f_ok && epigraph), metrics);
            }
            "lower-growth" => {
                let growth = lower_growth_fit(&u, &domain, range, keep)?;
                let alpha = decay_fit(&mut decay)?.exponent;
                rep.tables.push(shell_table(&growth.table, "growth_shells.csv"));
                let passed = growth.r_squared >= r2_min && growth.exponent >= alpha - 0.05;
                let mut metrics = fit_json(&growth);
                metrics["decay_exponent"] = json!(alpha);
                metrics["required_r_squared"] = json!(r2_min);
                rep.add("lower-growth", Status::gate(passed, f_ok && epigraph), metrics);
            }
            "s-normal" => {
                let pts: Vec<Vec<f64>> = if n == 1 {
                    vec![vec![]]
                } else {
                    cfg.floats("checks", "normal_points").chunks(n - 1).map(|c| c.to_vec()).collect()
                };
                let r = s_normal_spread(&u, &domain, &pts, s)?;
                let thr = cfg.float("checks", "normal_spread");
                let mut t = Table::new("s_normal.csv", &["x_boundary_last", "value", "slope", "r_squared", "samples"]);
                for v in &r.values {
                    t.push(vec![v.point[n - 1], v.value, v.slope, v.r_squared, v.samples as f64]);
                }
                rep.tables.push(t);
                let mut metrics = to_json(&r);
                metrics["threshold"] = json!(thr);
                metrics["non_constant_witness"] = json!(r.relative_spread > 0.1);
                rep.add("s-normal", Status::gate(r.relative_spread < thr, f_ok && half_space), metrics);
            }
            other => return Err(RunError::Config(format!("check {other} does not apply to semilinear scenarios"))),
        }
        lap(rep, name, clock);
    }
    Ok(())
}

fn domain_label(kind: &DomainKind) -> &'static str {
    match kind {
        DomainKind::HalfSpace { .. } => "half-space",
        DomainKind::LipschitzEpigraph(_) => "lipschitz-epigraph",
        DomainKind::CoerciveEpigraph(_) => "coercive-epigraph",
        DomainKind::Cone { .. } => "cone",
        DomainKind::Ball { .. } => "ball",
        DomainKind::Box { .. } => "box",
    }
}

fn axis(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[n - 1] = 1.0;
    e
}

/// Profile of the cone of half-opening `theta2` with unit outer data and its
/// fitted exponent along the axis.
pub fn cone_profile(cfg: &ExperimentConfig, grid: &UniformGrid, theta2: f64, s: f64) -> Result<ConeProfile> {
    let mut p = harmonic_profile(theta2, s, grid, OuterData::One, &cfg.solve_options())?;
    fit_homogeneity_exponent(&mut p, &axis(grid.dim()), cfg.float("checks", "fit_min"), cfg.float("checks", "fit_max"))?;
    Ok(p)
}

fn run_cone_sweep(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let grid = build_grid(cfg)?;
    let s = cfg.s();
    let calibration = cfg.float("params", "calibration");
    let mut thetas = cfg.floats("params", "thetas").to_vec();
    thetas.sort_by(f64::total_cmp);
    let mut t = Table::new("alpha.csv", &["theta2_over_pi", "alpha", "r_squared", "alpha_half"]);
    let mut fits = Vec::new();
    for &theta in std::iter::once(&calibration).chain(&thetas) {
        let clock = Instant::now();
        let p = cone_profile(cfg, &grid, theta, s)?;
        let fit = p.fit.clone().expect("fitted");
        lap(rep, &format!("theta={:.4}", theta / std::f64::consts::PI), clock);
        t.push(vec![theta / std::f64::consts::PI, fit.alpha, fit.r_squared, fit.alpha_half]);
        fits.push((theta, fit));
    }
    rep.tables.push(t);
    let (cal, sweep) = fits.split_first().expect("calibration first");
    let cal_alpha = cal.1.alpha;
    rep.add(
        "calibration",
        Status::gate((cal_alpha - s).abs() <= 0.05, true),
        json!({"theta2": cal.0, "alpha": cal_alpha, "s": s, "tolerance": 0.05, "r_squared": cal.1.r_squared}),
    );
    let alphas: Vec<f64> = sweep.iter().map(|f| f.1.alpha).collect();
    let worst_increase = alphas.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.add(
        "exponent-monotonicity",
        Status::gate(alphas.len() < 2 || worst_increase <= 0.03, true),
        json!({"thetas": sweep.iter().map(|f| f.0).collect::<Vec<_>>(), "alphas": alphas, "worst_increase": worst_increase, "noise": 0.03}),
    );
    let strict_from = cfg.float("params", "strict_from");
    let above: Vec<(f64, f64)> = sweep.iter().filter(|f| f.0 > strict_from + 1e-12).map(|f| (f.0, f.1.alpha)).collect();
    let max_above = above.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    rep.add(
        "below-s",
        Status::gate(above.iter().all(|p| p.1 < s), true),
        json!({"strict_from": strict_from, "max_alpha": max_above, "s": s, "angles": above.len()}),
    );
    let r2_min = cfg.float("checks", "r_squared");
    let worst_r2 = fits.iter().map(|f| f.1.r_squared).fold(f64::INFINITY, f64::min);
    rep.add("fit-quality", Status::ReportOnly, json!({"min_r_squared": worst_r2, "reference": r2_min}));
    Ok(())
}

/// Single-cone run: profile along the axis, normalized with `θ₁ = θ₂/2`.
pub fn run_cone_single(cfg: &ExperimentConfig, theta2: f64, s: f64, rep: &mut ExperimentReport) -> Result<()> {
    let grid = build_grid(cfg)?;
    let mut p = cone_profile(cfg, &grid, theta2, s)?;
    let fit = p.fit.clone().expect("fitted");
    let c0 = normalize_profile(&mut p, 0.5 * theta2)?;
    let n = grid.dim();
    let mut t = Table::new("profile.csv", &["t", "v"]);
    let h = grid.h();
    let top = grid.upper()[n - 1];
    let mut k = 1;
    while k as f64 * h <= top {
        let x: Vec<f64> = axis(n).iter().map(|e| e * k as f64 * h).collect();
        t.push(vec![k as f64 * h, p.values.interpolate(&x)]);
        k += 1;
    }
    rep.tables.push(t);
    rep.add(
        "cone-exponent",
        Status::ReportOnly,
        json!({"theta2": theta2, "s": s, "alpha": fit.alpha, "r2": fit.r_squared, "C0": c0, "alpha_half": fit.alpha_half}),
    );
    Ok(())
}

/// Half-line calibration profile `x_+^s` at spacing `h`, fitted and normalized.
fn half_line_profile(cfg: &ExperimentConfig, h: f64, s: f64) -> Result<ConeProfile> {
    let (lo, hi) = cfg.grid_bounds().map_err(RunError::Config)?;
    let grid = UniformGrid::from_box(&lo[..1], &hi[..1], h)?;
    let opts = cfg.solve_options();
    let mut p = harmonic_profile(FRAC_PI_2, s, &grid, OuterData::Power(s), &opts)?;
    fit_homogeneity_exponent(&mut p, &[1.0], cfg.float("checks", "fit_min"), cfg.float("checks", "fit_max"))?;
    normalize_profile(&mut p, cfg.float("params", "theta1"))?;
    Ok(p)
}

fn barrier_min(p: &ConeProfile, op: &DiscreteOperator, theta1: f64, r: f64) -> fraclap_core::Result<f64> {
    let w = barrier_wr(p, r)?;
    let alpha = p.alpha().expect("fitted");
    Ok(verify_barrier_inequality(&w, op, theta1, r, alpha)?.min_normalized)
}

fn run_barrier(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let s = cfg.s();
    let theta1 = cfg.float("params", "theta1");
    let radius = cfg.float("params", "radius");
    let (r_lo, r_hi) = (cfg.float("params", "r_lo"), cfg.float("params", "r_hi"));
    let steps = cfg.int("params", "steps") as usize;
    let resolutions = cfg.floats("params", "resolutions").to_vec();
    if resolutions.is_empty() {
        return Err(RunError::Config("params.resolutions is empty".into()));
    }
    let oracle = verify_barrier_1d(radius, s, cfg.int("params", "samples") as usize)?;
    rep.add("quadrature-oracle", Status::gate(oracle.min_normalized > 0.0, true), to_json(&oracle));

    let mut at_radius = Vec::new();
    let mut bisections = Vec::new();
    let mut trace = Table::new("bisection.csv", &["h", "radius", "min_normalized"]);
    for &h in &resolutions {
        let clock = Instant::now();
        let p = half_line_profile(cfg, h, s)?;
        let d = DomainSpec::vertical_cone(1, FRAC_PI_2)?;
        let op = DiscreteOperator::assemble(p.grid(), &d, s, p.grid().counts()[0] - 1)?;
        let m = barrier_min(&p, &op, theta1, radius)?;
        at_radius.push(json!({"h": h, "alpha": p.alpha(), "c0": p.c0, "min_normalized": m}));
        let b = bisect_radius(|r| barrier_min(&p, &op, theta1, r), r_lo, r_hi, steps)?;
        for (r, v) in &b.trace {
            trace.push(vec![h, *r, *v]);
        }
        bisections.push((h, b));
        lap(rep, &format!("h={h}"), clock);
    }
    rep.tables.push(trace);
    let positive = at_radius.iter().all(|v| v["min_normalized"].as_f64().is_some_and(|m| m > 0.0));
    rep.add("barrier-inequality", Status::gate(positive, true), json!({"radius": radius, "runs": at_radius}));

    let step = (r_hi / r_lo).ln() / 2f64.powi(steps as i32);
    let logs: Vec<f64> = bisections.iter().map(|(_, b)| b.r_bar.ln()).collect();
    let spread = logs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - logs.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let rows: Vec<Value> = bisections
        .iter()
        .map(|(h, b)| json!({"h": h, "r_bar": b.r_bar, "r_fail": b.r_fail, "steps": b.steps}))
        .collect();
    rep.add(
        "radius-stability",
        Status::gate(spread <= step * (1.0 + 1e-9), true),
        json!({"runs": rows, "log_step": step, "log_spread": spread}),
    );
    Ok(())
}

/// Random parameters satisfying the chain solvability condition.
fn random_chain_parameters(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let beta = rng.random_range(0.05..FRAC_PI_4 - 0.05);
    let q = 1.0 + beta.tan();
    let h1 = rng.random_range(0.5..2.0);
    let m = rng.random_range(2.5..8.0);
    let h2 = h1 * (1.0 + beta.sin()) * q.powf(m);
    let x0n = h1 * rng.random_range(0.01..0.9);
    (x0n, beta, h1, h2)
}

fn run_chain(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let n = cfg.dim().max(2);
    let beta = cfg.float("params", "beta");
    let (h1, h2) = (cfg.float("params", "h1"), cfg.float("params", "h2"));
    let s = cfg.s();

    let mut worst = 0.0f64;
    let mut inclusion = f64::NEG_INFINITY;
    let mut chains = Vec::new();
    let mut t = Table::new("chain.csv", &["x0n", "k", "radius", "height"]);
    for &x0n in cfg.floats("params", "x0n") {
        let c = build_chain(n, x0n, beta, h1, h2)?;
        let (radii, heights) = c.iterative();
        for k in 0..c.len() {
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            worst = worst.max(rel(radii[k], c.radii[k])).max(rel(heights[k], c.heights[k]));
            t.push(vec![x0n, k as f64, c.radii[k], c.heights[k]]);
        }
        inclusion = inclusion.max(c.max_inclusion_excess());
        chains.push(c);
    }
    rep.tables.push(t);
    rep.add(
        "closed-forms",
        Status::gate(worst <= 1e-12 && inclusion <= 1e-12, true),
        json!({"max_relative_difference": worst, "max_inclusion_excess": inclusion, "chains": chains.len()}),
    );

    let master = cfg.seed();
    let instances = cfg.int("params", "instances");
    let mut outside = Vec::new();
    let mut rows = Table::new("k0_brackets.csv", &["instance", "x0n", "beta", "h1", "h2", "k0", "lower", "upper"]);
    for k in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(master, k));
        let (x0n, b, a1, a2) = random_chain_parameters(&mut rng);
        debug_assert!(chain_margin(b, a1, a2) > 0.0);
        let c = build_chain(n, x0n, b, a1, a2)?;
        let (lower, upper) = c.bracket();
        let k0 = c.k0 as f64;
        if !(k0 >= lower - 1e-9 && k0 <= upper + 1e-9) {
            outside.push(k);
        }
        rows.push(vec![k as f64, x0n, b, a1, a2, k0, lower, upper]);
    }
    rep.tables.push(rows);
    rep.add(
        "k0-brackets",
        Status::gate(outside.is_empty(), true),
        json!({"instances": instances, "master_seed": master, "outside": outside}),
    );

    let expected = (1.0 + beta.tan()).powf(s);
    let mut worst_ratio = 0.0f64;
    for c in chains.iter_mut() {
        let r = verify_chain_harnack(|x| x[x.len() - 1].max(0.0).powf(s), c)?;
        for q in &r.ratios {
            worst_ratio = worst_ratio.max((q - expected).abs());
        }
    }
    rep.add(
        "half-space-ratio",
        Status::gate(worst_ratio <= 1e-6, true),
        json!({"expected": expected, "max_deviation": worst_ratio, "s": s, "beta": beta}),
    );
    Ok(())
}

fn run_maxprin(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let grid = build_grid(cfg)?;
    let domain = cfg.domain().map_err(RunError::Config)?;
    let op = DiscreteOperator::assemble(&grid, &domain, cfg.s(), cfg.int("grid", "window") as usize)?;
    let opts = cfg.solve_options();
    let tol = cfg.float("params", "tol");
    let n = op.interior().len();
    let master = cfg.seed();
    let instances = cfg.int("params", "instances");
    let mut t = Table::new("witnesses.csv", &["instance", "max_z", "inequality_max"]);
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(master, k));
        let c: Vec<f64> = (0..n).map(|_| -rng.random_range(0.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let level = -rng.random_range(0.0..1.0);
        let z = generate_witness(&op, &c, &g, level, &opts)?;
        let r = max_principle_witness(&op, &c, &z, tol)?;
        worst = worst.max(r.max_z);
        if !r.passed {
            violations.push(k);
        }
        t.push(vec![k as f64, r.max_z, r.inequality_max]);
    }
    rep.tables.push(t);
    rep.add(
        "witness-sign",
        Status::gate(violations.is_empty(), true),
        json!({"instances": instances, "master_seed": master, "max_z": worst, "tol": tol, "violations": violations}),
    );

    let bump = with_exterior(&op, &vec![1.0; n], &ExteriorRule::Zero);
    let outcome = |r: fraclap_core::Result<_>| match r {
        Err(Error::InvalidWitness { .. }) => "invalid-witness",
        Err(Error::Precondition(_)) => "precondition",
        Err(_) => "other-error",
        Ok(_) => "accepted",
    };
    let invalid = outcome(max_principle_witness(&op, &vec![0.0; n], &bump, tol));
    let positive_c = outcome(max_principle_witness(&op, &vec![0.5; n], &bump, tol));
    let rejected = invalid == "invalid-witness" && positive_c == "precondition";
    rep.add(
        "invalid-witness-rejected",
        Status::gate(rejected, true),
        json!({"positive_supersolution": invalid, "positive_coefficient": positive_c}),
    );
    Ok(())
}

fn run_sliding(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let grid = build_grid(cfg)?;
    let domain = cfg.domain().map_err(RunError::Config)?;
    let DomainKind::Box { lo, hi } = domain.kind().clone() else {
        return Err(RunError::Config("sliding scenarios need a box domain".into()));
    };
    let n = grid.dim();
    let (a, b) = (lo[n - 1], hi[n - 1]);
    let problem = SlidingProblem {
        grid,
        domain,
        s: cfg.s(),
        window: cfg.int("grid", "window") as usize,
        exterior: Arc::new(move |x: &[f64]| ((x[x.len() - 1] - a) / (b - a)).clamp(0.0, 1.0)),
        rhs: Arc::new(|_| 0.0),
    };
    let tol = -cfg.float("checks", "monotone_threshold");
    let (w, r) = sliding_check(&problem, cfg.int("params", "pad") as usize, &cfg.solve_options(), tol)?;
    rep.tables.push(solution_table(&w, "solution.csv"));
    rep.add("sliding", Status::gate(r.passed, true), to_json(&r));
    Ok(())
}
