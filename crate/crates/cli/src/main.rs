use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use kgflrw::commands::{self, SweepOptions, EXIT_CONFIG_ERROR};
use kgflrw::config::{self, Scenario, SweepAxis};
use kgflrw::hypotheses::HypothesisReport;
use kgflrw::Result;

/// Finite-time blow-up laboratory for Klein-Gordon equations on FLRW backgrounds.
#[derive(Debug, Parser)]
#[command(name = "kgflrw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Kv,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide which blow-up theorem applies and print its report.
    Check {
        /// Config path or bundled scenario name.
        config: String,
        /// Override a key, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value = "kv")]
        format: Format,
    },
    /// Integrate the PDE and emit the trace, summary and report.
    Simulate {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory receiving trace.csv, summary.txt and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the concavity ODE problems of a scenario and print the oracle CSV.
    OracleOde {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one or two keys and tabulate the blow-up frontier.
    Sweep {
        config: String,
        /// `key=lo:hi:steps`; give once or twice.
        #[arg(long, required = true, num_args = 1)]
        axis: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory receiving frontier.csv and one subdirectory per point.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate hypotheses only, without integrating the PDE.
        #[arg(long)]
        check_only: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the bundled scenarios, or print one.
    Scenarios {
        #[arg(long)]
        show: Option<String>,
    },
}

fn load(path: &str, overrides: &[String]) -> Result<Scenario> {
    let mut s = config::load(path)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| kgflrw::Error::Parse { line: None, msg: format!("override must be key=value, got `{o}`") })?;
        s = s.with_override(k.trim(), v.trim())?;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check { config, overrides, format } => {
            let scenario = load(&config, &overrides)?;
            let (report, code) = commands::cmd_check(&scenario)?;
            match format {
                Format::Kv => print!("{}", report.to_kv()),
                Format::Csv => println!("{}\n{}", HypothesisReport::csv_header(), report.to_csv_row()),
            }
            Ok(code)
        }
        Command::Simulate { config, overrides, out } => {
            let scenario = load(&config, &overrides)?;
            let (trace, code) = commands::cmd_simulate(&scenario, out.as_deref())?;
            print!("{}", trace.summary());
            Ok(code)
        }
        Command::OracleOde { config, overrides, out } => {
            let scenario = load(&config, &overrides)?;
            let (_, csv) = commands::cmd_oracle(&scenario)?;
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Sweep { config, axis, jobs, out, check_only, overrides } => {
            let scenario = load(&config, &overrides)?;
            let axes = axis.iter().map(|a| SweepAxis::parse(a)).collect::<Result<Vec<_>>>()?;
            let res = commands::cmd_sweep(&scenario, &axes, SweepOptions { jobs, check_only }, out.as_deref())?;
            print!("{}", res.frontier_csv);
            Ok(0)
        }
        Command::Scenarios { show } => {
            match show {
                Some(name) => match config::bundled_source(&name) {
                    Some(src) => print!("{src}"),
                    None => {
                        return Err(kgflrw::Error::Parse {
                            line: None,
                            msg: format!("no bundled scenario named `{name}`"),
                        })
                    }
                },
                None => {
                    for name in config::bundled_names() {
                        println!("{name}");
                    }
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGFLRW_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG_ERROR as u8)
        }
    }
}
