use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fixsub_core::checks::{functions_suite, geometry_suite, CheckReport};
use fixsub_core::metrics::{check_rate_bounds, RateContext};
use fixsub_core::{Method, ProblemInstance, RateBound, StepSchedule, TieRule, Verdict};
use fixsub_harness::output::{read_aggregate, read_trace, write_verdicts, plot_script};
use fixsub_harness::{
    reference_solve, run_batch, run_experiment, ExperimentConfig, HarnessError, InstanceFile, OracleOptions, Result,
};

#[derive(Parser)]
#[command(name = "fixsub", version, about = "Subgradient methods over fixed point sets: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run(RunArgs),
    /// Run the randomized property suites and the lemma monitors on fresh runs.
    Verify(VerifyArgs),
    /// Check a rate bound along a stored trace.
    RateCheck(RateArgs),
    /// Write a gnuplot script comparing experiment directories.
    Plot(PlotArgs),
    /// Compute a reference solution for an instance file.
    Oracle(OracleArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    /// Number of users `I`.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    n_iters: Option<usize>,
    #[arg(long)]
    n_initial_points: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    tie_rule: Option<TieRuleArg>,
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieRuleArg {
    Zero,
    Positive,
    SeededUniform,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Module {
    Geometry,
    Functions,
    Monitors,
    All,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    module: Module,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(clap::Args)]
struct RateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// cor1, cor2, cor3 or cor4.
    #[arg(long)]
    which: RateBound,
    /// Reference optimal value; defaults to the one stored with the instance.
    #[arg(long)]
    f_star: Option<f64>,
    /// Instance file; defaults to the nearest instance.json above the trace.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PlotArgs {
    /// Experiment directories containing aggregate.csv.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long, default_value = "plot.gp")]
    output: PathBuf,
    #[arg(long, default_value = "plot.png")]
    image: String,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 2001)]
    grid: usize,
    #[arg(long, default_value_t = 1_000_000)]
    long_run_iters: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.into(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.into(),
        source: e,
    })
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.users {
        cfg.users = v;
    }
    if let Some(v) = args.n_iters {
        cfg.n_iters = v;
    }
    if let Some(v) = args.n_initial_points {
        cfg.n_initial_points = v;
    }
    if let Some(v) = args.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = args.tie_rule {
        cfg.tie_rule = match v {
            TieRuleArg::Zero => TieRule::Zero,
            TieRuleArg::Positive => TieRule::Positive,
            TieRuleArg::SeededUniform => TieRule::SeededUniform,
        };
    }
    cfg.timing |= args.timing;
    cfg.validate()?;
    let (batch, dir) = run_experiment(&cfg)?;
    let last = batch.common_len.saturating_sub(1);
    println!("wrote {}", dir.display());
    println!(
        "{} I={} runs={} n={last}: D={:.6e} F={:.6e}",
        cfg.method.name(),
        cfg.users,
        batch.traces.len(),
        batch.d.get(last).copied().unwrap_or(f64::NAN),
        batch.f.get(last).copied().unwrap_or(f64::NAN),
    );
    if batch.partial() {
        println!("warning: some runs stopped early, see manifest.json");
    }
    Ok(!batch.partial())
}

fn print_reports(module: &str, reports: &[CheckReport]) -> bool {
    for r in reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {module}/{} trials={} failures={} worst={:e}",
            r.name, r.trials, r.failures, r.worst
        );
    }
    reports.iter().all(CheckReport::passed)
}

fn verify_monitors(seed: u64) -> Result<bool> {
    let mut ok = true;
    for users in [2, 8] {
        for method in [Method::Parallel, Method::Incremental] {
            let mut cfg = ExperimentConfig::new(users, seed, method, StepSchedule::constant(1e-3)?, 500);
            cfg.n_initial_points = 20;
            let batch = run_batch(&cfg)?;
            let rows: usize = batch.traces.iter().map(|t| t.rows.len()).sum();
            let failures = batch.lemma_failures();
            let status = if failures == 0 { "PASS" } else { "FAIL" };
            println!("{status} monitors/lemma {} I={users} rows={rows} failures={failures}", method.name());
            ok &= failures == 0;
        }
    }
    Ok(ok)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let mut ok = true;
    let all = args.module == Module::All;
    if all || args.module == Module::Geometry {
        ok &= print_reports("geometry", &geometry_suite(args.samples, args.seed)?);
    }
    if all || args.module == Module::Functions {
        ok &= print_reports("functions", &functions_suite(args.samples, args.seed)?);
    }
    if all || args.module == Module::Monitors {
        ok &= verify_monitors(args.seed)?;
    }
    Ok(ok)
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = read(path)?;
    if let Ok(file) = serde_json::from_str::<InstanceFile>(&text) {
        return Ok(file.instance);
    }
    let inst: ProblemInstance = serde_json::from_str(&text)?;
    inst.validate()?;
    Ok(inst)
}

fn find_upwards(start: &Path, name: &str) -> Option<PathBuf> {
    let start = std::path::absolute(start).ok()?;
    start.ancestors().skip(1).map(|d| d.join(name)).find(|p| p.is_file())
}

fn cmd_rate_check(args: RateArgs) -> Result<bool> {
    let rows = read_trace(&args.trace)?;
    let instance_path = match args.instance {
        Some(p) => p,
        None => find_upwards(&args.trace, "instance.json")
            .ok_or_else(|| HarnessError::Config("no instance.json found above the trace; pass --instance".into()))?,
    };
    let inst = load_instance(&instance_path)?;
    let schedule = find_upwards(&args.trace, "config.toml")
        .map(|p| read(&p).and_then(|t| ExperimentConfig::from_toml(&t)))
        .transpose()?
        .map(|c| c.schedule);
    let ctx = RateContext {
        alphas: inst.users.iter().map(|u| u.alpha()).collect(),
        f_star: args.f_star.or(inst.reference.as_ref().map(|r| r.f_star)),
        sum_sq_inf: schedule.and_then(|s| s.sum_sq_infinite()),
        identity_mappings: Some(inst.all_identity()),
    };
    let report = check_rate_bounds(&rows, &ctx, args.which)?;
    let output = args.output.unwrap_or_else(|| {
        args.trace
            .with_file_name(format!("rate_{}.csv", args.which.name()))
    });
    write_verdicts(&output, &report.rows)?;
    println!("wrote {}", output.display());
    let mut ok = true;
    for kind in report.kinds() {
        let checked = report
            .rows
            .iter()
            .any(|r| r.which == kind && r.verdict != Verdict::PreconditionUnmet);
        let first = report.first_satisfied(&kind);
        let status = match (checked, first) {
            (false, _) => "UNCHECKED",
            (true, Some(_)) => "PASS",
            (true, None) => "FAIL",
        };
        ok &= !(checked && first.is_none());
        println!(
            "{status} {kind}: first satisfied at n={} preconditions held on {:.1}% of iterations",
            first.map_or("-".into(), |k| k.to_string()),
            100.0 * report.precondition_rate(&kind)
        );
    }
    Ok(ok)
}

fn cmd_plot(args: PlotArgs) -> Result<bool> {
    let mut series = Vec::new();
    for dir in &args.dirs {
        let file = dir.join("aggregate.csv");
        read_aggregate(&file)?;
        let label = match read(&dir.join("config.toml")).and_then(|t| ExperimentConfig::from_toml(&t)) {
            Ok(c) => format!("{} I={}", c.method.name(), c.users),
            Err(_) => dir.display().to_string(),
        };
        series.push((label, file.display().to_string()));
    }
    write(&args.output, &plot_script(&series, &args.image))?;
    println!("wrote {}", args.output.display());
    Ok(true)
}

fn cmd_oracle(args: OracleArgs) -> Result<bool> {
    let inst = load_instance(&args.instance)?;
    let opts = OracleOptions {
        grid: args.grid,
        long_run_iters: args.long_run_iters,
        ..OracleOptions::default()
    };
    let r = reference_solve(&inst, &opts)?;
    let text = serde_json::to_string_pretty(&r)?;
    match args.output {
        Some(p) => write(&p, &text)?,
        None => println!("{text}"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::RateCheck(a) => cmd_rate_check(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
