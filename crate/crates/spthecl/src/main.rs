use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spthecl::cli::{self, CliError};
use spthecl::example::Variant;
use spthecl::gain::GainLaw;

#[derive(Parser)]
#[command(
    name = "spthecl",
    version,
    about = "Switched prescribed-time and hyperexponential concurrent learning: \
             dynamic-gain parameter estimation over switching, partially corrupted datasets"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in benchmark experiment and write its artifacts
    Example {
        /// standard | he | pt
        #[arg(long, default_value = "pt")]
        variant: String,
        /// Output directory for trace, reports, chart
        #[arg(long)]
        out: PathBuf,
        /// Seed for random switching policies
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop fraction before the blow-up time
        #[arg(long)]
        eps_stop: Option<f64>,
    },
    /// Run an experiment described by a config document
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the certificate constants and the bound envelope on a grid
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated times, e.g. "0,1,2,4,7.9"
        #[arg(long)]
        t_grid: Option<String>,
        /// Comma-separated jump counts, e.g. "0,2,4"
        #[arg(long)]
        j_grid: Option<String>,
    },
    /// Check a trace CSV against the switching constraints
    VerifySwitching {
        /// Trace file with `t` and `q` columns
        trace: PathBuf,
        /// Gain exponent: "frozen", "inf", or a number >= 1
        #[arg(long, default_value = "inf")]
        law: String,
        #[arg(long, default_value_t = 8.0)]
        upsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        mu0: f64,
        #[arg(long, default_value_t = 2.0)]
        tau_d: f64,
        #[arg(long, default_value_t = 25.0)]
        tau_a: f64,
        #[arg(long, default_value_t = 2.0)]
        n0: f64,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Comma-separated modes that drain the activation budget
        #[arg(long, default_value = "")]
        drain_modes: String,
    },
    /// Classify the datasets in a registry document
    ClassifyDataset { file: PathBuf },
}

fn parse_law(spec: &str, upsilon: f64) -> Result<GainLaw, CliError> {
    match spec {
        "frozen" => Ok(GainLaw::frozen()),
        "inf" | "infinity" => {
            GainLaw::prescribed_time(upsilon).map_err(|e| CliError::Validation(e.to_string()))
        }
        number => number
            .parse::<f64>()
            .map_err(|_| {
                CliError::Validation(format!(
                    "--law must be \"frozen\", \"inf\", or a number >= 1; got \"{number}\""
                ))
            })
            .and_then(|l| {
                GainLaw::new(l, upsilon).map_err(|e| CliError::Validation(e.to_string()))
            }),
    }
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CliError::Validation(format!("unparseable {what} entry '{s}'")))
        })
        .collect()
}

fn dispatch(args: Args) -> Result<String, CliError> {
    match args.command {
        Command::Example {
            variant,
            out,
            seed,
            eps_stop,
        } => {
            let variant: Variant = variant.parse().map_err(CliError::Validation)?;
            cli::cmd_example(variant, &out, seed, eps_stop)
        }
        Command::Simulate { config, out } => cli::cmd_simulate(&config, &out),
        Command::Bounds {
            config,
            t_grid,
            j_grid,
        } => {
            let ts = t_grid
                .as_deref()
                .map(|s| parse_list::<f64>(s, "t-grid"))
                .transpose()?;
            let js = j_grid
                .as_deref()
                .map(|s| parse_list::<usize>(s, "j-grid"))
                .transpose()?;
            cli::cmd_bounds(&config, ts, js)
        }
        Command::VerifySwitching {
            trace,
            law,
            upsilon,
            mu0,
            tau_d,
            tau_a,
            n0,
            t0,
            drain_modes,
        } => {
            let law = parse_law(&law, upsilon)?;
            let drains = parse_list::<usize>(&drain_modes, "drain-modes")?;
            cli::cmd_verify_switching(&trace, &law, mu0, tau_d, tau_a, n0, t0, &drains)
        }
        Command::ClassifyDataset { file } => cli::cmd_classify_dataset(&file),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
