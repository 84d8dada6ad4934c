use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use savopt::harness::config::TraceFormat;
use savopt::harness::{
    read_csv, render_plot, run_compare, run_experiment, verify_suite, write_trace,
    ExperimentConfig, Scope, Status,
};
use savopt::Error;

/// SAV-family optimizers and benchmark harness.
#[derive(Debug, Parser)]
#[command(name = "savopt", version, about)]
struct Cli {
    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Operators,
    Sav,
    Problems,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a single experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace output path (overrides the config).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// SVG loss plot path (overrides the config).
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run an optimizer x step-size grid and print the summary table.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Directory for per-cell traces (overrides the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the numerical self-checks.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        scope: ScopeArg,
    },
    /// Overlay CSV traces in one log-scale SVG.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run {
            config,
            trace,
            format,
            plot,
        } => {
            let mut cfg = load(&config, cli.seed)?;
            if trace.is_some() {
                cfg.output.trace = trace;
            }
            if let Some(f) = format {
                cfg.output.format = match f {
                    FormatArg::Csv => TraceFormat::Csv,
                    FormatArg::Json => TraceFormat::Json,
                };
            }
            if plot.is_some() {
                cfg.output.plot = plot;
            }
            let out = run_experiment(&cfg)?;
            if let Some(path) = &cfg.output.trace {
                write_trace(&out.records, path, cfg.output.format)?;
            }
            if let Some(path) = &cfg.output.plot {
                render_plot(
                    &[(out.summary.optimizer.clone(), out.records.clone())],
                    path,
                )?;
            }
            let json = serde_json::to_string_pretty(&out.summary)
                .map_err(|e| Error::Config(e.to_string()))?;
            println!("{json}");
            Ok(match out.summary.status {
                Status::Ok => 0,
                Status::Diverge => 1,
                Status::Error => 2,
            })
        }
        Command::Compare { config, out_dir } => {
            let mut cfg = load(&config, cli.seed)?;
            if let (Some(dir), Some(cmp)) = (out_dir, cfg.compare.as_mut()) {
                cmp.out_dir = Some(dir);
            }
            let out = run_compare(&cfg)?;
            print!("{}", out.table);
            for cell in &out.cells {
                if let Err(e) = &cell.outcome {
                    eprintln!(
                        "{} dt={}: {e}",
                        cell.optimizer.name.as_str(),
                        cell.optimizer.lr
                    );
                }
            }
            if let Some(path) = &cfg.output.plot {
                let series: Vec<_> = out
                    .cells
                    .iter()
                    .filter_map(|c| {
                        let o = c.outcome.as_ref().ok()?;
                        Some((
                            format!("{} dt={}", c.optimizer.name.as_str(), c.optimizer.lr),
                            o.records.clone(),
                        ))
                    })
                    .collect();
                render_plot(&series, path)?;
            }
            Ok(out.exit_code() as u8)
        }
        Command::Verify { scope } => {
            let scope = match scope {
                ScopeArg::Operators => Scope::Operators,
                ScopeArg::Sav => Scope::Sav,
                ScopeArg::Problems => Scope::Problems,
                ScopeArg::All => Scope::All,
            };
            let report = verify_suite(scope);
            println!("{report}");
            Ok(if report.passed() { 0 } else { 2 })
        }
        Command::Plot { out, traces } => {
            let mut series = Vec::with_capacity(traces.len());
            for path in &traces {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                series.push((label, read_csv(path)?));
            }
            render_plot(&series, &out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
