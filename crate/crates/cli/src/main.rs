use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thrustlayout_cli::{cmd_optimize, cmd_simulate, cmd_sweep, parse_theta_list, CliError, RunOptions, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "thrustlayout", version, about = "Thrust-module layout optimization and closed-loop simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true, env = "OUTPUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads for restarts and scenario runs.
    #[arg(long, global = true, env = "JOBS")]
    jobs: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the layout; writes layout.json, gains.csv and history.csv.
    Optimize {
        /// Config file, or a bundled config name.
        config: String,
    },
    /// Simulate the config's scenarios; writes per-run CSVs and summary.csv/json.
    Simulate {
        config: String,
        /// Layout angles in degrees, comma separated. Give twice to compare
        /// against a baseline. Without it the layout is optimized first.
        #[arg(long, allow_hyphen_values = true)]
        theta: Vec<String>,
        /// Write every n-th sample to the per-run CSVs.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Optimize every case of the config's sweep list.
    Sweep { config: String },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut opts = RunOptions { seed: cli.seed, out: cli.out, stride: None };
    match cli.command {
        Command::Optimize { config } => {
            let layout = cmd_optimize(&config, &opts)?;
            println!("theta_deg = {:?}  d_min = {}", layout.theta_deg, layout.d_min);
            Ok(0)
        }
        Command::Simulate { config, theta, stride } => {
            opts.stride = stride;
            let thetas = theta.iter().map(|t| parse_theta_list(t)).collect::<Result<Vec<_>, _>>()?;
            let summary = cmd_simulate(&config, &thetas, &opts)?;
            println!("{} runs written", summary.runs.len());
            Ok(0)
        }
        Command::Sweep { config } => {
            let (index, code) = cmd_sweep(&config, &opts)?;
            let failed = index.iter().filter(|e| e.status != "ok").count();
            println!("{} cases, {failed} failed", index.len());
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
