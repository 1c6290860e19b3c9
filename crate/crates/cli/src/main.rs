use clap::{Args, Parser, Subcommand};
use fraclap_cli::config::ExperimentConfig;
use fraclap_cli::report::{write_atomic, ExperimentReport, Table};
use fraclap_cli::runner::{build_grid, run_cone_single, run_scenario};
use fraclap_cli::scenarios::{list_scenarios, scenario_config};
use fraclap_core::operator::DiscreteOperator;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Fractional Laplacian experiments on truncated unbounded domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file; defaults to the built-in file of the scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for inner loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed for randomized runs.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a catalog scenario or a config file.
    Run {
        scenario: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the scenario catalog.
    List,
    /// Fit the homogeneity exponent of a single cone.
    ConeExponent {
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta2: f64,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the barrier-verify scenario.
    BarrierVerify {
        #[command(flatten)]
        common: Common,
    },
    /// Run the chain-verify scenario.
    ChainVerify {
        #[command(flatten)]
        common: Common,
    },
    /// Assemble the operator of a config and report its constants.
    OperatorCheck {
        scenario: Option<String>,
        /// Also write the unit stencil as CSV.
        #[arg(long)]
        dump_stencil: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Refresh the regression baselines from fresh runs.
    Bless {
        /// Baseline file to write.
        #[arg(long, default_value = "baselines.json")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load(scenario: Option<&str>, common: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match (&common.config, scenario) {
        (Some(path), _) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        (None, Some(name)) => scenario_config(name)
            .ok_or_else(|| format!("unknown scenario '{name}'; see `fraclap list`"))?
            .map_err(|e| e.to_string())?,
        (None, None) => return Err("give a scenario name or --config".into()),
    };
    if let Some(t) = common.threads {
        cfg.set("run", "threads", &t.to_string())?;
    }
    if let Some(s) = common.seed {
        cfg.set("run", "seed", &s.to_string())?;
    }
    if let Some(o) = &common.out {
        cfg.set("run", "out", &o.to_string_lossy())?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    match cfg.text("run", "out") {
        "" => Path::new("out").join(cfg.name()),
        dir => PathBuf::from(dir),
    }
}

fn init_threads(cfg: &ExperimentConfig) {
    // A second initialization only happens in-process and is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads()).build_global();
}

fn finish(cfg: &ExperimentConfig, rep: &ExperimentReport) -> ExitCode {
    let dir = out_dir(cfg);
    if let Err(e) = rep.write(&dir, &cfg.to_ini(), cfg.seed(), cfg.threads()) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    for b in &rep.blocks {
        println!("{:<26} {}", b.name, serde_json::to_string(&b.status).unwrap_or_default().trim_matches('"'));
    }
    if let Some(e) = &rep.error {
        eprintln!("error: {e}");
    }
    let failed = rep.failed();
    if !failed.is_empty() {
        eprintln!("failed checks: {}", failed.join(", "));
    }
    println!("outputs in {}", dir.display());
    ExitCode::from(rep.exit_code() as u8)
}

fn run_named(scenario: Option<&str>, common: &Common) -> ExitCode {
    match load(scenario, common) {
        Ok(cfg) => {
            init_threads(&cfg);
            let rep = run_scenario(&cfg);
            finish(&cfg, &rep)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn operator_check(scenario: Option<&str>, dump: bool, common: &Common) -> Result<ExitCode, String> {
    let cfg = load(scenario, common)?;
    init_threads(&cfg);
    let grid = build_grid(&cfg).map_err(|e| e.to_string())?;
    let domain = cfg.domain()?;
    let op = DiscreteOperator::assemble(&grid, &domain, cfg.s(), cfg.int("grid", "window") as usize)
        .map_err(|e| e.to_string())?;
    let mut rep = ExperimentReport::new(cfg.name());
    let metrics = json!({
        "dim": grid.dim(), "s": op.s(), "h": grid.h(), "window": op.window(), "reach": op.reach(),
        "constant": op.constant(), "tail": op.tail(), "diagonal": op.diagonal(),
        "weight_sum": op.weight_sum(), "interior_nodes": op.interior().len(),
    });
    rep.add("operator", fraclap_core::checks::Status::ReportOnly, metrics);
    if dump {
        let n = grid.dim();
        let mut cols: Vec<String> = (1..=n).map(|a| format!("k{a}")).collect();
        cols.push("weight".into());
        let refs: Vec<&str> = cols.iter().map(|c| c.as_str()).collect();
        let mut t = Table::new("stencil.csv", &refs);
        for (k, w) in op.stencil_rows() {
            let mut row: Vec<f64> = k[..n].iter().map(|&v| v as f64).collect();
            row.push(w);
            t.push(row);
        }
        rep.tables.push(t);
    }
    Ok(finish(&cfg, &rep))
}

/// Scalar metrics tracked across releases: (scenario, check, metric pointer, tolerance).
const BASELINES: &[(&str, &str, &str, f64)] = &[
    ("cone-exponent-sweep", "calibration", "/alpha", 0.01),
    ("cone-exponent-sweep", "exponent-monotonicity", "/alphas", 0.01),
    ("corner-epigraph-2d", "boundary-decay", "/exponent", 0.02),
    ("corner-epigraph-2d", "lower-growth", "/exponent", 0.02),
    ("halfspace-bistable-1d", "uniqueness", "/seed/lambda1", 1e-3),
    ("barrier-verify", "radius-stability", "/runs", 1e-9),
];

fn bless(file: &Path, common: &Common) -> Result<ExitCode, String> {
    let mut entries = Vec::new();
    let mut scenarios: Vec<&str> = BASELINES.iter().map(|b| b.0).collect();
    scenarios.dedup();
    for name in scenarios {
        let cfg = load(Some(name), &Common { config: None, ..common.clone() })?;
        init_threads(&cfg);
        let rep = run_scenario(&cfg);
        if let Some(e) = &rep.error {
            return Err(format!("{name}: {e}"));
        }
        for (_, check, pointer, tol) in BASELINES.iter().filter(|b| b.0 == name) {
            let value = rep
                .block(check)
                .and_then(|b| b.metrics.pointer(pointer).cloned())
                .ok_or_else(|| format!("{name}: no metric {check}{pointer}"))?;
            entries.push(json!({"scenario": name, "check": check, "metric": pointer, "value": value, "tolerance": tol}));
        }
    }
    let text = serde_json::to_string_pretty(&Value::from(entries)).map_err(|e| e.to_string())? + "\n";
    write_atomic(file, text.as_bytes()).map_err(|e| e.to_string())?;
    println!("baselines written to {}", file.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::List => {
            for name in list_scenarios() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario, common } => Ok(run_named(scenario.as_deref(), &common)),
        Command::BarrierVerify { common } => Ok(run_named(Some("barrier-verify"), &common)),
        Command::ChainVerify { common } => Ok(run_named(Some("chain-verify"), &common)),
        Command::ConeExponent { theta2, s, common } => load(Some("cone-exponent-sweep"), &common).and_then(|mut cfg| {
            cfg.set("operator", "s", &s.to_string())?;
            cfg.set("scenario", "name", "cone-exponent")?;
            init_threads(&cfg);
            let mut rep = ExperimentReport::new("cone-exponent");
            if let Err(e) = run_cone_single(&cfg, theta2, s, &mut rep) {
                rep.error = Some(e.to_string());
            }
            Ok(finish(&cfg, &rep))
        }),
        Command::OperatorCheck { scenario, dump_stencil, common } => {
            operator_check(scenario.as_deref().or(Some("halfspace-bistable-1d")), dump_stencil, &common)
        }
        Command::Bless { file, common } => bless(&file, &common),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
