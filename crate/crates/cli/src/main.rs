use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latentcdf::Exec;
use latentcdf_cli::commands::{self, DmOutcome};
use latentcdf_cli::{CliError, Context, RunConfig};

const DEFAULTS: &str = "\
Configuration is a single TOML or JSON file (chosen by extension). Keys and defaults:
  measure            {type = \"laplace\", location = 0, scale = 1}
                     or {type = \"lebesgue\", lower, upper}
  p                  5       lag window
  dim_rule           {type = \"threshold\", c = 1, exponent = 0.4} or {type = \"fixed\", d}
  demean_per_cycle   true    quantiles are then on the demeaned scale
  arma_orders        [[0,0],[1,0],[0,1],[1,1],[1,2],[2,1],[2,2]]
  quantiles          [0.01, 0.05, 0.5, 0.95, 0.99]
  n0                 350     first backtest origin (at least max(30, p + 10))
  out_dir            \"out\"
  seed               20240601
  [sim]              alpha = 0.5, n = 200, q = 200, burn_in = 1000, start = \"burn_in\" | \"truncated_ma\"
  [montecarlo]       reps = 100, lag = 1, grid = 2048, dim_rule as above

Input CSV: header `cycle,value`, one observation per row. Cycles keep their
order of first appearance unless every label is a YYYY-MM-DD date.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error,
1 output write failure.";

#[derive(Parser)]
#[command(name = "latentcdf", version, about = "Spectral forecasting of latent distribution processes", after_long_help = DEFAULTS)]
struct Cli {
    /// Worker threads for the parallel loops (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the spectral model; writes model.json, eigenvalues.csv, scores.csv, eigenfunctions.csv.
    Estimate {
        #[arg(long, short)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// One-step-ahead distribution forecast; writes forecast.json and forecast_cdf.csv.
    Forecast {
        #[arg(long, short)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rolling-origin comparison of the two variance forecasts; writes
    /// backtest_report.json and backtest_steps.csv.
    Backtest {
        #[arg(long, short)]
        data: PathBuf,
        /// First forecast origin (overrides `n0`).
        #[arg(long)]
        n0: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a panel from the AR(1)-driven model; writes panel.csv and truth.csv.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo study of the estimator; writes montecarlo.csv and montecarlo_summary.json.
    Montecarlo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn context(common: &Common, exec: Exec, tweak: impl FnOnce(&mut RunConfig)) -> Result<Context, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    tweak(&mut cfg);
    cfg.validate()?;
    let mut ctx = Context::new(cfg);
    ctx.exec = exec;
    Ok(ctx)
}

fn run(cli: Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cli.threads;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };

    match cli.command {
        Command::Estimate { data, common } => {
            let ctx = context(&common, exec, |_| {})?;
            let s = commands::estimate(&ctx, &data)?;
            let lead: Vec<String> = s.theta.iter().take(3).map(|t| format!("{t:.4e}")).collect();
            println!("estimated {} cycles: d_hat = {}, leading eigenvalues [{}]", s.n, s.d_hat, lead.join(", "));
        }
        Command::Forecast { data, common } => {
            let ctx = context(&common, exec, |_| {})?;
            let s = commands::forecast(&ctx, &data)?;
            let s2 = s.strategy2.map_or("unavailable".to_string(), |v| format!("{v:.6e}"));
            println!("forecast variance: spectral {:.6e}, HAR {s2}", s.strategy1);
        }
        Command::Backtest { data, n0, common } => {
            let ctx = context(&common, exec, |c| {
                if let Some(n0) = n0 {
                    c.n0 = n0;
                }
            })?;
            if let Some(c) = commands::backtest(&ctx, &data)? {
                let dm = match c.diebold_mariano {
                    DmOutcome::Computed(t) => format!("DM p = {:.5} (one-sided {:.5})", t.p_two_sided, t.p_one_sided),
                    DmOutcome::NotComputable { not_computable } => format!("DM not computable: {not_computable}"),
                };
                println!("relative MSE {:.4}; {dm}", c.relative_mse);
            }
        }
        Command::Simulate { seed, common } => {
            let ctx = context(&common, exec, |c| {
                if let Some(s) = seed {
                    c.seed = s;
                }
            })?;
            let n = commands::simulate(&ctx)?;
            println!("simulated {n} cycles into {}", ctx.out_dir.display());
        }
        Command::Montecarlo { seed, reps, common } => {
            let ctx = context(&common, exec, |c| {
                if let Some(s) = seed {
                    c.seed = s;
                }
                if let Some(r) = reps {
                    c.montecarlo.reps = r;
                }
            })?;
            let s = commands::montecarlo(&ctx)?;
            println!(
                "{} replications ({} failed); median theta_1 {:.4e} (target {:.4e})",
                s.reps, s.failures, s.metrics["theta_1"].median, s.target_theta
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
