//! Command-line front end: path sampling, surrogate comparison, weak-error
//! experiments, rate fitting, and call pricing. Exit codes: 0 success,
//! 1 argument/configuration problems, 2 runtime failures.

use clap::{Args, Parser, Subcommand};
use roughvol::{
    apply_key, black_scholes_call, build_joint_covariance, build_theta_grid, dump_batch,
    emit_report, fit_rate, l2_error, load_config_file, parse_report_file, psd_factor,
    render_report, romano_touzi_price, sample_joint_paths, tail_variance_bound, weak_error_curve,
    HurstParams, PsiSpec, Result, RoughVolError, RunConfig, ThetaRule, TimeGrid,
    DEFAULT_CLIP_TOL, DEFAULT_STREAM_LAYOUT,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "roughvol",
    version,
    about = "Rough-volatility drivers: exact simulation, Markovian surrogates, \
             weak-error measurement, and conditional Monte Carlo pricing",
    propagate_version = true
)]
struct Cli {
    /// Cap the worker-thread count (results are identical at any width)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample coupled (W^H, W) paths and dump them to a binary file
    SamplePaths(SamplePathsArgs),
    /// Print the OU-surrogate tail bound and coupled L2 error side by side
    MarkovCompare(MarkovCompareArgs),
    /// Run the coupled weak-error experiment and write a CSV report
    WeakError(WeakErrorArgs),
    /// Fit log-log convergence rates from a weak-error CSV
    FitRate(FitRateArgs),
    /// Price a European call under rough Bergomi by conditional Monte Carlo
    PriceBergomi(PriceBergomiArgs),
}

#[derive(Args)]
struct SamplePathsArgs {
    /// Hurst parameter in (0, 1/2]
    #[arg(long = "H")]
    h: f64,
    /// Time horizon
    #[arg(long = "T", default_value_t = 1.0)]
    t: f64,
    /// Number of grid steps
    #[arg(long)]
    n: usize,
    /// Number of paths
    #[arg(long = "M")]
    m: usize,
    /// RNG seed (the only entropy source)
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file for the binary path dump
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MarkovCompareArgs {
    /// Hurst parameter in (0, 1/2)
    #[arg(long = "H")]
    h: f64,
    /// Time horizon
    #[arg(long = "T", default_value_t = 1.0)]
    t: f64,
    /// theta-domain cap L (tail bound needs L >= 1; the grid needs L > 1)
    #[arg(long = "L")]
    l: f64,
    /// Number of theta-grid nodes
    #[arg(long = "N_L", default_value_t = 100)]
    n_l: usize,
    /// Number of time-grid steps
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Number of Monte Carlo paths for the L2 error
    #[arg(long = "M", default_value_t = 10_000)]
    m: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Node placement: uniform (left-endpoint) or geometric
    #[arg(long, default_value = "uniform")]
    rule: String,
    /// Additive allowance for theta-quadrature bias when comparing the
    /// L2 error against 2x the tail bound
    #[arg(long, default_value_t = 0.1)]
    quad_margin: f64,
}

#[derive(Args)]
struct WeakErrorArgs {
    /// Key-value config file; the flags below override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hurst parameters, comma-separated (config key: H)
    #[arg(long = "H", value_name = "LIST")]
    h: Option<String>,
    /// Time horizon (config key: T)
    #[arg(long = "T")]
    t: Option<String>,
    /// log2 of the reference grid size (config key: log2_n_ref)
    #[arg(long = "log2_n_ref")]
    log2_n_ref: Option<String>,
    /// Coarse levels, e.g. `1,2,3` or `1..6` (config key: log2_n_list)
    #[arg(long = "log2_n_list")]
    log2_n_list: Option<String>,
    /// Number of Monte Carlo paths (config key: M)
    #[arg(long = "M")]
    m: Option<String>,
    /// RNG seed (config key: seed)
    #[arg(long)]
    seed: Option<String>,
    /// Integrand: `linear` or `rbergomi:<xi>,<eta>` (config key: psi)
    #[arg(long)]
    psi: Option<String>,
    /// Payoff list, `;`-separated, e.g. `cube; shifted_cube:1.5`
    /// (config key: payoffs)
    #[arg(long)]
    payoffs: Option<String>,
    /// Output CSV path, `-` for stdout (config key: out)
    #[arg(long)]
    out: Option<String>,
    /// Memory budget in MB (config key: mem_budget_mb)
    #[arg(long = "mem_budget_mb")]
    mem_budget_mb: Option<String>,
}

#[derive(Args)]
struct FitRateArgs {
    /// Weak-error CSV produced by `weak-error`
    csv: PathBuf,
}

#[derive(Args)]
struct PriceBergomiArgs {
    /// Hurst parameter in (0, 1/2]
    #[arg(long = "H")]
    h: f64,
    /// Maturity
    #[arg(long = "T", default_value_t = 1.0)]
    t: f64,
    /// Number of grid steps
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Number of Monte Carlo paths
    #[arg(long = "M", default_value_t = 10_000)]
    m: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Flat forward variance xi
    #[arg(long, default_value_t = 0.04)]
    xi: f64,
    /// Vol-of-vol eta
    #[arg(long, default_value_t = 1.9)]
    eta: f64,
    /// Spot-vol correlation in [-1, 1]
    #[arg(long, default_value_t = -0.7, allow_hyphen_values = true)]
    rho: f64,
    /// Spot
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    /// Strike
    #[arg(long, default_value_t = 100.0)]
    strike: f64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::SamplePaths(args) => sample_paths(args),
        Command::MarkovCompare(args) => markov_compare(args),
        Command::WeakError(args) => weak_error(args),
        Command::FitRate(args) => fit_rate_cmd(args),
        Command::PriceBergomi(args) => price_bergomi(args),
    }
}

fn sample_paths(args: SamplePathsArgs) -> Result<()> {
    let hp = HurstParams::new(args.h)?;
    let grid = TimeGrid::new(args.t, args.n)?;
    let sigma = build_joint_covariance(&grid, &hp)?.assemble();
    let factor = psd_factor(&sigma, DEFAULT_CLIP_TOL)?;
    let batch = sample_joint_paths(&factor, &grid, &hp, args.m, args.seed, DEFAULT_STREAM_LAYOUT);
    dump_batch(&batch, &args.out)?;
    println!("# H = {}", args.h);
    println!("# T = {}", args.t);
    println!("# n = {}", args.n);
    println!("# M = {}", args.m);
    println!("# seed = {}", args.seed);
    println!(
        "wrote {} paths x {} steps to {} ({} eigenvalues clipped)",
        args.m,
        args.n,
        args.out.display(),
        factor.clipped
    );
    Ok(())
}

fn markov_compare(args: MarkovCompareArgs) -> Result<()> {
    let hp = HurstParams::new(args.h)?;
    let bound = tail_variance_bound(args.l, &hp)?;
    println!("# H = {}", args.h);
    println!("# T = {}", args.t);
    println!("# L = {}", args.l);
    println!("# N_L = {}", args.n_l);
    println!("# n = {}", args.n);
    println!("# M = {}", args.m);
    println!("# seed = {}", args.seed);
    println!("# rule = {}", args.rule);
    println!("# quad_margin = {}", args.quad_margin);
    println!("tail_variance_bound = {bound}");
    if args.l > 1.0 {
        let rule = match args.rule.as_str() {
            "uniform" => ThetaRule::Uniform,
            "geometric" => ThetaRule::Geometric,
            other => {
                return Err(RoughVolError::InvalidConfig(format!(
                    "unknown theta rule `{other}` (expected `uniform` or `geometric`)"
                )));
            }
        };
        let grid = build_theta_grid(args.l, args.n_l, rule, &hp)?;
        let err = l2_error(&grid, args.t, args.n, args.m, args.seed)?;
        let cap = 2.0 * bound + args.quad_margin;
        println!("l2_error = {err}");
        println!("2*tail_variance_bound + quad_margin = {cap}");
        println!(
            "l2_error <= 2*tail_variance_bound + quad_margin: {}",
            if err <= cap { "yes" } else { "no" }
        );
    } else {
        println!("l2_error = skipped (theta grid needs L > 1)");
    }
    Ok(())
}

fn weak_error(args: WeakErrorArgs) -> Result<()> {
    let mut config: RunConfig<f64> = match &args.config {
        Some(path) => load_config_file(path, RunConfig::default())?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("H", &args.h),
        ("T", &args.t),
        ("log2_n_ref", &args.log2_n_ref),
        ("log2_n_list", &args.log2_n_list),
        ("M", &args.m),
        ("seed", &args.seed),
        ("psi", &args.psi),
        ("payoffs", &args.payoffs),
        ("out", &args.out),
        ("mem_budget_mb", &args.mem_budget_mb),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            apply_key(&mut config, key, value)?;
        }
    }
    let report = weak_error_curve(&config)?;
    let fits = match fit_rate(&report) {
        Ok(fits) => fits,
        Err(e) => {
            eprintln!("warning: no rate fit appended: {e}");
            Vec::new()
        }
    };
    match &config.out {
        Some(path) => {
            emit_report(&report, &fits, path)?;
            println!("wrote {} rows to {}", report.rows.len(), path.display());
            for f in &fits {
                println!(
                    "H={} psi={} payoff={}: slope {:.6} [{:.6}, {:.6}] r2 {:.4}",
                    f.h, f.psi, f.payoff, f.slope, f.slope_lo, f.slope_hi, f.r2
                );
            }
        }
        None => print!("{}", render_report(&report, &fits)),
    }
    Ok(())
}

fn fit_rate_cmd(args: FitRateArgs) -> Result<()> {
    let report = parse_report_file::<f64>(&args.csv)?;
    let fits = fit_rate(&report)?;
    for f in &fits {
        println!(
            "H={} psi={} payoff={}: slope {:.6} [lo {:.6}, hi {:.6}] \
             intercept {:.6} r2 {:.4} (used {}, dropped {})",
            f.h, f.psi, f.payoff, f.slope, f.slope_lo, f.slope_hi, f.intercept, f.r2, f.used,
            f.dropped
        );
    }
    Ok(())
}

fn price_bergomi(args: PriceBergomiArgs) -> Result<()> {
    if args.xi < 0.0 {
        return Err(RoughVolError::InvalidConfig(format!(
            "xi must be non-negative, got {}",
            args.xi
        )));
    }
    let hp = HurstParams::new(args.h)?;
    let grid = TimeGrid::new(args.t, args.n)?;
    let psi = PsiSpec::RBergomi {
        xi: args.xi,
        eta: args.eta,
    };
    let sigma = build_joint_covariance(&grid, &hp)?.assemble();
    let factor = psd_factor(&sigma, DEFAULT_CLIP_TOL)?;
    let batch = sample_joint_paths(&factor, &grid, &hp, args.m, args.seed, DEFAULT_STREAM_LAYOUT);
    let (price, se) = romano_touzi_price(&batch, &psi, args.rho, args.s0, args.strike)?;
    println!("# H = {}", args.h);
    println!("# T = {}", args.t);
    println!("# n = {}", args.n);
    println!("# M = {}", args.m);
    println!("# seed = {}", args.seed);
    println!("# xi = {}", args.xi);
    println!("# eta = {}", args.eta);
    println!("# rho = {}", args.rho);
    println!("# s0 = {}", args.s0);
    println!("# strike = {}", args.strike);
    println!("price = {price:.6}");
    println!("se = {se:.6}");
    println!(
        "black_scholes_flat_vol = {:.6}",
        black_scholes_call(args.s0, args.xi * args.t, args.strike)
    );
    Ok(())
}
