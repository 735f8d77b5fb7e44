use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use robust_mckp::driver::{default_gamma_grid, prefix_csv, FrontierStress};
use robust_mckp::generators::{gen_retail, gen_synthetic, RetailConfig, SyntheticConfig};
use robust_mckp::oracle::{cross_check, CrossCheckConfig};
use robust_mckp::stress::{stress, Protocol, StressConfig};
use robust_mckp::{
    frontier, nested_prefix_run, solve, validate, DiscreteSolution, Error, Execution, GammaRule,
    PricingInstance, SolveOptions,
};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "robust-mckp",
    version,
    about = "Robust discrete portfolio pricing via multiple-choice knapsack"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ROBUST_MCKP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic or retail instance.
    Generate(GenerateArgs),
    /// Solve one instance at a fixed budget.
    Solve(SolveArgs),
    /// Sweep the budget and tabulate revenue, gaps and stress results.
    Frontier(FrontierArgs),
    /// Solve nested prefixes of a master instance.
    Prefixes(PrefixArgs),
    /// Monte Carlo stress test of a solution.
    Stress(StressArgs),
    /// Validate an instance file.
    Validate(ValidateArgs),
    /// Cross-check the fast solvers against brute-force oracles.
    OracleCheck(OracleCheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Synthetic,
    Retail,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProtocolArg {
    Adversarial,
    Iid,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Adversarial => Protocol::Adversarial,
            ProtocolArg::Iid => Protocol::Iid,
        }
    }
}

#[derive(Args, Debug)]
struct OutArg {
    /// Write machine output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExecArgs {
    /// Evaluate work units on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    kind: Kind,
    /// Item count (synthetic).
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Menu size.
    #[arg(long)]
    m: Option<usize>,
    /// Relative demand uncertainty (synthetic).
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// Fairness tolerance.
    #[arg(long, default_value_t = 0.10)]
    sigma: f64,
    /// Relative slack of the calibrated margin target.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Retail segment sizes, comma separated in segment order.
    #[arg(long, value_delimiter = ',')]
    segment_sizes: Option<Vec<usize>>,
    /// Retail per-segment uncertainty, comma separated in segment order.
    #[arg(long, value_delimiter = ',')]
    segment_alphas: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    gamma: usize,
    /// Skip the round-up and repair candidate.
    #[arg(long)]
    no_repair: bool,
    /// Skip greedy completion of residual capacity.
    #[arg(long)]
    no_complete: bool,
    /// Include the per-θ trace in the report.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct FrontierArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Budgets to solve, comma separated (default: standard grid).
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<usize>>,
    /// Monte Carlo scenarios per stress column; 0 disables stress columns.
    #[arg(long, default_value_t = 10_000)]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct PrefixArgs {
    /// Master instance; prefixes take its first items.
    #[arg(long)]
    instance: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "30,50,75,100,150,200,300,500"
    )]
    sizes: Vec<usize>,
    /// zero | sqrt | tenth | full | <integer>
    #[arg(long, default_value = "sqrt")]
    gamma_rule: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct StressArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solution JSON, either a bare solution or a `solve` report.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, value_enum, default_value = "adversarial")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 0)]
    gamma_attack: usize,
    #[arg(long, default_value_t = 10_000)]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args, Debug)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    max_n: usize,
    #[arg(long, default_value_t = 4)]
    max_m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Residual threshold for a passing check.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    out: OutArg,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::SearchSpaceTooLarge { .. }) => EXIT_GUARD,
            Some(Error::Infeasible) => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type CliResult = Result<u8, Failure>;

fn emit(out: &OutArg, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<PricingInstance, Failure> {
    let text = read(path)?;
    PricingInstance::from_json(&text).map_err(|e| {
        let err = anyhow::Error::new(e).context(format!("parsing {}", path.display()));
        Failure::from(err)
    })
}

fn load_solution(path: &Path) -> anyhow::Result<DiscreteSolution> {
    let text = read(path)?;
    if let Ok(sol) = DiscreteSolution::from_json(&text) {
        return Ok(sol);
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match value.get("solution") {
        Some(serde_json::Value::Null) => bail!("{} holds an infeasible report", path.display()),
        Some(sol) => serde_json::from_value(sol.clone())
            .with_context(|| format!("parsing solution in {}", path.display())),
        None => bail!(
            "{} is neither a solution nor a solve report",
            path.display()
        ),
    }
}

fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let inst = match args.kind {
        Kind::Synthetic => {
            if args.segment_sizes.is_some() || args.segment_alphas.is_some() {
                return Err(anyhow!("segment overrides apply to --kind retail only").into());
            }
            gen_synthetic(&SyntheticConfig {
                n: args.n,
                m: args.m.unwrap_or(50),
                alpha: args.alpha,
                sigma: args.sigma,
                seed: args.seed,
                eps: args.eps,
            })?
        }
        Kind::Retail => {
            let mut cfg = RetailConfig {
                seed: args.seed,
                sigma: args.sigma,
                eps: args.eps,
                ..RetailConfig::default()
            };
            if let Some(m) = args.m {
                cfg.m = m;
            }
            if let Some(sizes) = &args.segment_sizes {
                if sizes.len() != cfg.segments.len() {
                    return Err(
                        anyhow!("--segment-sizes needs {} values", cfg.segments.len()).into(),
                    );
                }
                cfg.segments
                    .iter_mut()
                    .zip(sizes)
                    .for_each(|(s, &k)| s.size = k);
            }
            if let Some(alphas) = &args.segment_alphas {
                if alphas.len() != cfg.segments.len() {
                    return Err(
                        anyhow!("--segment-alphas needs {} values", cfg.segments.len()).into(),
                    );
                }
                cfg.segments
                    .iter_mut()
                    .zip(alphas)
                    .for_each(|(s, &a)| s.alpha = a);
            }
            gen_retail(&cfg)?
        }
    };
    emit(&args.out, &inst.to_json())?;
    eprintln!(
        "generated {} items, margin target {:.6}",
        inst.len(),
        inst.margin_target
    );
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let opts = SolveOptions {
        repair: !args.no_repair,
        complete: !args.no_complete,
        execution: args.exec.execution(),
    };
    let report = solve(&inst, args.gamma, opts)?;
    emit(&args.out, &report.to_json(args.trace))?;
    let c = report.counters;
    match (report.best.as_ref(), report.best_trace()) {
        (Some(sol), Some(t)) => {
            eprintln!(
                "objective {:.6}  theta {:.6}  certificate {:.6e}  gap_lp {:.3e}  ({} candidates, {} skipped, {} rejected)",
                sol.objective,
                t.theta,
                sol.certificate,
                t.gap_lp().unwrap_or(0.0),
                c.candidates,
                c.skipped,
                c.certificate_rejected
            );
            Ok(0)
        }
        _ => {
            eprintln!(
                "infeasible: no budget multiplier yields a certified choice ({} candidates)",
                c.candidates
            );
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn cmd_frontier(args: &FrontierArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let gammas = args
        .gammas
        .clone()
        .unwrap_or_else(|| default_gamma_grid(inst.len()));
    let stress_cfg = (args.scenarios > 0).then_some(FrontierStress {
        scenarios: args.scenarios,
        seed: args.seed,
    });
    let opts = SolveOptions {
        execution: args.exec.execution(),
        ..SolveOptions::default()
    };
    let table = frontier(&inst, &gammas, stress_cfg, opts)?;
    let text = match args.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    emit(&args.out, &text)?;
    let infeasible = table.rows.iter().filter(|r| !r.feasible).count();
    eprintln!(
        "{} budgets solved, {} infeasible",
        table.rows.len(),
        infeasible
    );
    Ok(0)
}

fn cmd_prefixes(args: &PrefixArgs) -> CliResult {
    let master = load_instance(&args.instance)?;
    let rule: GammaRule = args.gamma_rule.parse()?;
    let opts = SolveOptions {
        execution: args.exec.execution(),
        ..SolveOptions::default()
    };
    let rows = nested_prefix_run(&master, &args.sizes, rule, opts)?;
    let text = match args.format {
        Format::Csv => prefix_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).context("serializing prefix rows")?,
    };
    emit(&args.out, &text)?;
    Ok(0)
}

fn cmd_stress(args: &StressArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let sol = load_solution(&args.solution)?;
    let cfg = StressConfig {
        scenarios: args.scenarios,
        protocol: args.protocol.into(),
        gamma_attack: args.gamma_attack,
        seed: args.seed,
    };
    let report = stress(&inst, &sol.choice, &cfg, args.exec.execution())?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    emit(&args.out, &text)?;
    eprintln!(
        "violation probability {} over {} scenarios",
        report.violation_prob, report.scenarios
    );
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let report = validate(&inst);
    let doc = serde_json::json!({
        "valid": report.is_valid(),
        "items": inst.len(),
        "violations": report.violations,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).context("serializing report")?
    );
    if report.is_valid() {
        Ok(0)
    } else {
        Err(Error::Invalid(report).into())
    }
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> CliResult {
    let cfg = CrossCheckConfig {
        trials: args.trials,
        max_n: args.max_n,
        max_m: args.max_m,
        seed: args.seed,
    };
    let rep = cross_check(&cfg)?;
    emit(
        &args.out,
        &serde_json::to_string_pretty(&rep).context("serializing report")?,
    )?;
    eprintln!(
        "max LP residual {:.3e} over {} subproblems; max dual residual {:.3e} over {}; exhaustive agreement {}/{}",
        rep.max_lp_residual,
        rep.lp_checks,
        rep.max_dual_residual,
        rep.dual_checks,
        rep.exhaustive_equal,
        rep.exhaustive_checks
    );
    if rep.passed(args.tol) {
        Ok(0)
    } else {
        eprintln!("cross-check FAILED");
        Ok(EXIT_INFEASIBLE)
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Prefixes(a) => cmd_prefixes(a),
        Command::Stress(a) => cmd_stress(a),
        Command::Validate(a) => cmd_validate(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
