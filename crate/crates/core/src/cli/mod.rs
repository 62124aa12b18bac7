//! Command-line front end: `run`, `validate` and `selftest`.

mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub use config::{
    load_scenario, load_scenario_with, parse_scenario, AccParams, BarrierConfig,
    Deterministic1dParams, HorizonSetting, LinearParams, ModelConfig, Overrides, ScenarioConfig,
    DEFAULT_MC_HORIZON,
};
pub use run::{
    run_scenario, selftest, trajectory_header, write_trajectory_csv, RunReport, RunSummary,
    SelftestReport, ECHO_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};

#[derive(Debug, Parser)]
#[command(
    name = "safe-exit",
    version,
    about = "Online-LP exit controllers, exit-probability bounds and Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory.csv, mc_summary.json and config_echo.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        dt: Option<f64>,
        /// A number or "inf".
        #[arg(long, allow_hyphen_values = true)]
        horizon: Option<HorizonSetting>,
        #[arg(short = 'w', allow_hyphen_values = true)]
        w: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Barrier derivative checks and LP oracle comparison.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            paths,
            seed,
            dt,
            horizon,
            w,
            delta,
        } => {
            let overrides = Overrides {
                n_paths: paths,
                master_seed: seed,
                dt,
                horizon,
                w,
                delta,
            };
            let result =
                load_scenario_with(&config, &overrides).and_then(|cfg| run_scenario(&cfg, &out));
            match result {
                Ok(report) => {
                    if let Some(s) = &report.summary {
                        out!(
                            "estimate {:.6} [{:.6}, {:.6}] over {} paths; bound at t=0: finite {}, infinite {}",
                            s.mc.estimate,
                            s.mc.ci_lo,
                            s.mc.ci_hi,
                            s.mc.n_paths,
                            fmt_bound(s.bound_finite_t0),
                            fmt_bound(s.bound_infinite_t0),
                        );
                    }
                    for f in &report.files {
                        out!("wrote {}", f.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Validate { config } => match load_scenario(&config) {
            Ok(_) => {
                out!("{}: ok", config.display());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Selftest { seed } => {
            let report = selftest(seed, 100, 200);
            for line in &report.lines {
                out!("{line}");
            }
            if report.passed {
                0
            } else {
                1
            }
        }
    }
}

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"))
}
