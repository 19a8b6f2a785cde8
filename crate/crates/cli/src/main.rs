//! Command-line harness around the `primperc` library.
//!
//! Exit codes: 0 on success, 1 when a checked property fails (verification
//! counterexample, duality mismatch, rejected distribution check, exceeded
//! tolerance), 2 for unusable arguments, configuration, or I/O.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use primperc::graph::{GraphSpec, VertexId};
use primperc::harness::{
    enforce_tolerance, rows_to_csv, run_conditional_binomial_check, run_dual_sweep,
    run_experiment, ExperimentConfig, ExperimentOutput, KappaRule, OutputFormat, OutputSpec,
    Regime, SizeSpec, VerifyOptions,
};
use primperc::limits::{linear_limit_curve, ThetaParams};
use primperc::percolation::realized_edges;
use primperc::prim::{run_prim, StartPolicy};
use primperc::{exploration, Error};

#[derive(Parser)]
#[command(
    name = "primperc",
    version,
    about = "Minimum-weight traversal of random complete bipartite graphs: \
             Monte Carlo experiments, limit solvers, and exact verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and summarize it against theory.
    Simulate(SimulateArgs),
    /// Tabulate the limiting (depth fraction, colour ratio) curve.
    Curve(CurveArgs),
    /// Run exact structural checks over a sweep of instances.
    Verify(VerifyArgs),
    /// Estimate the branching-process extinction frequency.
    Bp(BpArgs),
    /// Compare traversals of colour-swapped instances.
    Dual(DualArgs),
    /// Test the first-step discovery count against its binomial law.
    Binomial(BinomialArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeName {
    Sublinear,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatName {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment description; other selection flags are rejected.
    #[arg(long, conflicts_with_all = ["regime", "n", "theta", "nb", "nw", "kappa", "s", "trials", "seed", "policy", "tol"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    regime: Option<RegimeName>,
    /// Total sizes (comma separated); resolved with --theta.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    /// Black fraction used to split --n sizes.
    #[arg(long)]
    theta: Option<f64>,
    /// Explicit black part sizes (comma separated, zipped with --nw).
    #[arg(long, value_delimiter = ',')]
    nb: Vec<u32>,
    /// Explicit white part sizes (comma separated, zipped with --nb).
    #[arg(long, value_delimiter = ',')]
    nw: Vec<u32>,
    /// Depth rule for the sublinear regime: sqrt | pow:<a> | log:<c> | <k>.
    #[arg(long)]
    kappa: Option<String>,
    /// Depth fractions in (0,1) for the linear regime (comma separated).
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform-all | uniform-black | uniform-white | black:<i> | white:<i>
    #[arg(long, default_value = "uniform-all")]
    policy: String,
    /// Fail (exit 1) when any |mean - theory| exceeds this.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatName::Csv)]
    format: FormatName,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    theta: f64,
    /// Interior grid points of the tabulated curve.
    #[arg(long, default_value_t = 512)]
    points: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Exhaustive sweep covers all part sizes up to this bound.
    #[arg(long, default_value_t = 8)]
    max_n: u32,
    /// Instances per part-size pair.
    #[arg(long, default_value_t = 200)]
    seeds: u64,
    /// Edge-retention thresholds (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.7, 0.9])]
    p: Vec<f64>,
    /// Total sizes for the at-scale bookkeeping checks (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![200, 2000])]
    identity_n: Vec<u32>,
    /// Black fraction for the at-scale checks.
    #[arg(long, default_value_t = 0.5)]
    identity_theta: f64,
    #[arg(long, default_value_t = 50)]
    identity_seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupt one trace on purpose; the sweep must catch it (exit 1).
    #[arg(long)]
    inject_corruption: bool,
    /// Write one per-step bookkeeping trace (CSV) for the first at-scale
    /// target before sweeping.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BpArgs {
    #[arg(long)]
    theta: f64,
    /// Offspring intensity (> 0; extinction is certain at or below 1).
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Generations simulated before a line counts as surviving.
    #[arg(long, default_value_t = 200)]
    max_generations: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail (exit 1) when |frequency - theory| exceeds this.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DualArgs {
    #[arg(long)]
    nb: u32,
    #[arg(long)]
    nw: u32,
    /// Instances compared (seeds derived from --seed).
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BinomialArgs {
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Total vertex count of each sampled instance.
    #[arg(long, default_value_t = 200)]
    n: u32,
    /// Edge-retention threshold the discovery law is tested at.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.001)]
    significance: f64,
}

fn parse_policy(s: &str) -> anyhow::Result<StartPolicy> {
    let fixed = |colour: &str, idx: &str| -> anyhow::Result<VertexId> {
        let index: u32 = idx.parse().with_context(|| format!("bad vertex index '{idx}'"))?;
        Ok(match colour {
            "black" => VertexId::black(index),
            _ => VertexId::white(index),
        })
    };
    Ok(match s {
        "uniform-all" => StartPolicy::UniformAll,
        "uniform-black" => StartPolicy::UniformBlack,
        "uniform-white" => StartPolicy::UniformWhite,
        _ => {
            if let Some(idx) = s.strip_prefix("black:") {
                StartPolicy::Fixed(fixed("black", idx)?)
            } else if let Some(idx) = s.strip_prefix("white:") {
                StartPolicy::Fixed(fixed("white", idx)?)
            } else {
                anyhow::bail!(
                    "policy '{s}' not recognized (want uniform-all | uniform-black | \
                     uniform-white | black:<i> | white:<i>)"
                );
            }
        }
    })
}

fn targets_from_flags(args: &SimulateArgs) -> anyhow::Result<Vec<SizeSpec>> {
    let by_ratio = !args.n.is_empty();
    let by_counts = !args.nb.is_empty() || !args.nw.is_empty();
    if by_ratio && by_counts {
        anyhow::bail!("use either --n/--theta or --nb/--nw, not both");
    }
    if by_ratio {
        let theta = args
            .theta
            .ok_or_else(|| anyhow::anyhow!("--n needs --theta to split the parts"))?;
        return Ok(args.n.iter().map(|&n| SizeSpec::Ratio { n, theta }).collect());
    }
    if by_counts {
        if args.nb.len() != args.nw.len() {
            anyhow::bail!("--nb and --nw must list the same number of sizes");
        }
        return Ok(args
            .nb
            .iter()
            .zip(&args.nw)
            .map(|(&n_b, &n_w)| SizeSpec::Counts { n_b, n_w })
            .collect());
    }
    anyhow::bail!("no graph sizes given (use --n/--theta or --nb/--nw)");
}

fn emit(out: &OutArgs, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn rows_text(rows: &[primperc::harness::SummaryRow], format: FormatName) -> anyhow::Result<String> {
    Ok(match format {
        FormatName::Csv => rows_to_csv(rows),
        FormatName::Json => format!("{}\n", serde_json::to_string_pretty(rows)?),
    })
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let regime = match args.regime {
                Some(RegimeName::Sublinear) => {
                    if !args.s.is_empty() {
                        anyhow::bail!("--s applies to the linear regime only");
                    }
                    let kappa = match &args.kappa {
                        Some(text) => text.parse::<KappaRule>()?,
                        None => KappaRule::default(),
                    };
                    Regime::Sublinear { kappa }
                }
                Some(RegimeName::Linear) => {
                    if args.kappa.is_some() {
                        anyhow::bail!("--kappa applies to the sublinear regime only");
                    }
                    if args.s.is_empty() {
                        anyhow::bail!("the linear regime needs --s");
                    }
                    Regime::Linear { s: args.s.clone() }
                }
                None => anyhow::bail!("no regime given (use --regime or --config)"),
            };
            ExperimentConfig {
                targets: targets_from_flags(&args)?,
                regime,
                trials: args.trials,
                seed: args.seed,
                policy: parse_policy(&args.policy)?,
                output: OutputSpec::default(),
                tol: args.tol,
            }
        }
    };
    let rows = match run_experiment(&config)? {
        ExperimentOutput::Rows(rows) => rows,
        _ => anyhow::bail!("config regime does not produce summary rows"),
    };
    // CLI flags override the config's own output settings.
    let format = match (&args.out.out, args.config.is_some()) {
        (None, true) => match config.output.format {
            OutputFormat::Csv => FormatName::Csv,
            OutputFormat::Json => FormatName::Json,
        },
        _ => args.out.format,
    };
    let out = OutArgs {
        out: args.out.out.clone().or_else(|| config.output.path.clone()),
        format,
    };
    emit(&out, &rows_text(&rows, format)?)?;
    if let Some(tol) = config.tol {
        enforce_tolerance(&rows, tol)?;
    }
    Ok(())
}

fn run_curve(args: CurveArgs) -> anyhow::Result<()> {
    let params = ThetaParams::new(args.theta)?;
    let table = linear_limit_curve(&params, args.points)?;
    let text = match args.out.format {
        FormatName::Csv => table.to_csv(),
        FormatName::Json => format!("{}\n", serde_json::to_string_pretty(&table)?),
    };
    emit(&args.out, &text)
}

fn dump_exploration_trace(args: &VerifyArgs, path: &PathBuf) -> anyhow::Result<()> {
    let n = *args.identity_n.first().ok_or_else(|| {
        Error::invalid_input("--dump-trace needs at least one --identity-n size".to_string())
    })?;
    let (n_b, n_w) = SizeSpec::Ratio { n, theta: args.identity_theta }.resolve()?;
    let spec = GraphSpec::new(n_b, n_w, args.seed)?;
    let oracle = primperc::graph::WeightOracle::implicit(&spec);
    let trace = run_prim(&spec, &oracle, StartPolicy::UniformAll, None)?;
    let p = 1.0 / (n_b as f64 * n_w as f64).sqrt();
    let ex = exploration::two_neighbourhood_exploration(&spec, &oracle, &trace, p)?;
    let mut buf = Vec::new();
    ex.write_csv(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    // Also sanity-check the dumped instance end to end.
    let edges = realized_edges(&spec, &oracle, p)?;
    let g = exploration::Adjacency::bipartite(&spec, &edges)?;
    let order = exploration::prim_order(&trace);
    if !exploration::is_geo(&g, &order)? {
        return Err(Error::violation("dumped instance fails the ordering check".to_string()).into());
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.dump_trace {
        dump_exploration_trace(&args, path)?;
    }
    let opts = VerifyOptions {
        max_n: args.max_n,
        seeds: args.seeds,
        p_values: args.p.clone(),
        identity_targets: args
            .identity_n
            .iter()
            .map(|&n| SizeSpec::Ratio { n, theta: args.identity_theta })
            .collect(),
        identity_seeds: args.identity_seeds,
        base_seed: args.seed,
        cross_check_max_n: 6,
        inject_corruption: args.inject_corruption,
    };
    let report = primperc::harness::run_verify_sweep(&opts)?;
    match args.out.format {
        FormatName::Json => emit(&args.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?,
        FormatName::Csv => {
            let mut text = format!("verified {} cases\n", report.cases);
            for f in &report.failures {
                text.push_str(&format!(
                    "FAIL {} on {}x{} seed {}{}: {}\n",
                    f.check,
                    f.n_b,
                    f.n_w,
                    f.seed,
                    f.p.map(|p| format!(" p {p}")).unwrap_or_default(),
                    f.detail
                ));
            }
            emit(&args.out, &text)?;
        }
    }
    if report.ok() {
        Ok(())
    } else {
        Err(Error::violation(format!("{} check(s) failed", report.failures.len())).into())
    }
}

fn run_bp(args: BpArgs) -> anyhow::Result<()> {
    let config = ExperimentConfig {
        targets: vec![],
        regime: Regime::Bp {
            theta: args.theta,
            lambda: args.lambda,
            max_generations: args.max_generations,
        },
        trials: args.trials,
        seed: args.seed,
        policy: StartPolicy::UniformAll,
        output: OutputSpec::default(),
        tol: args.tol,
    };
    let rows = match run_experiment(&config)? {
        ExperimentOutput::Rows(rows) => rows,
        _ => unreachable!("bp regime produces rows"),
    };
    emit(&args.out, &rows_text(&rows, args.out.format)?)?;
    if let Some(tol) = args.tol {
        enforce_tolerance(&rows, tol)?;
    }
    Ok(())
}

fn run_dual(args: DualArgs) -> anyhow::Result<()> {
    let reports = run_dual_sweep(args.nb, args.nw, args.seeds, args.seed, StartPolicy::UniformAll)?;
    let bad: Vec<_> = reports.iter().filter(|r| !r.ok).collect();
    println!(
        "compared {} colour-swapped instance pairs on {}x{}: {} mismatch(es)",
        reports.len(),
        args.nb,
        args.nw,
        bad.len()
    );
    for r in &bad {
        println!("FAIL seed {}: {}", r.seed, r.detail.as_deref().unwrap_or("?"));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::violation(format!("{} instance(s) diverged", bad.len())).into())
    }
}

fn run_binomial(args: BinomialArgs) -> anyhow::Result<()> {
    let report =
        run_conditional_binomial_check(args.theta, args.n, args.p, args.trials, args.seed)?;
    println!("pool,trials,statistic,df,p_value");
    for s in &report.strata {
        println!("{},{},{},{},{}", s.pool, s.trials, s.statistic, s.df, s.p_value);
    }
    if report.strata.is_empty() {
        return Err(Error::invalid_input(format!(
            "no stratum reached a testable size ({} skipped)",
            report.skipped
        ))
        .into());
    }
    if report.pass(args.significance) {
        Ok(())
    } else {
        Err(Error::violation(format!(
            "discovery counts inconsistent with the binomial law at significance {}",
            args.significance
        ))
        .into())
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Curve(args) => run_curve(args),
        Command::Verify(args) => run_verify(args),
        Command::Bp(args) => run_bp(args),
        Command::Dual(args) => run_dual(args),
        Command::Binomial(args) => run_binomial(args),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PRIMPERC_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                    eprintln!("error: setting up {t} worker thread(s): {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: PRIMPERC_THREADS must be a positive integer, got '{threads}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Violation(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
