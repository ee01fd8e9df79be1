use std::path::PathBuf;
use std::process::ExitCode;

use cepsim_core::pipeline::{run, Command, OutputFormat, RunConfig, DEFAULT_END_YEAR};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Panel regressions, forecast models and seeded Monte Carlo compliance
/// analysis for 2020/2030 energy targets.
#[derive(Debug, Parser)]
#[command(name = "cepsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate a long-format panel against its schema and write it back
    /// with derived variables.
    Ingest(Opts),
    /// Fit a panel regression and emit the coefficient table.
    Estimate(Opts),
    /// Slope-equality, VIF, Hausman and Durbin-Watson diagnostics only.
    Diagnose(Opts),
    /// Select trend/AR(2)/Tobit models per country and fit the pooled growth model.
    Models(Opts),
    /// Simulate GHG, renewables and consumption and compare against targets.
    Forecast(Opts),
    /// Simulate GHG under growth scenarios.
    Scenario(Opts),
    /// Run a full plan and emit every table.
    Report(Opts),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Both,
}

#[derive(Debug, Args)]
struct Opts {
    /// Panel CSV with columns country,period,variable,value.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Variable schema file.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Model specification (estimate, diagnose) or run plan (report).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// models.json from a previous `models` run.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Targets configuration; the bundled one by default.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Scenario definition file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario A, B or C.
    #[arg(long)]
    name: Option<String>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed; required by stochastic commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation start year (the last observed year by default).
    #[arg(long)]
    start_year: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_END_YEAR)]
    end_year: i32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Marker appended to flagged cells.
    #[arg(long, default_value = "*")]
    marker: String,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn config(command: Command, o: Opts) -> RunConfig {
    let mut cfg = RunConfig::new(command, o.out);
    cfg.input = o.input;
    cfg.schema = o.schema;
    cfg.spec = o.spec;
    cfg.models = o.models;
    cfg.targets = o.targets;
    cfg.scenario_file = o.scenario;
    cfg.scenario_name = o.name;
    cfg.n_paths = o.paths;
    cfg.master_seed = o.seed;
    cfg.start_year = o.start_year;
    cfg.end_year = o.end_year;
    cfg.format = match o.format {
        Format::Table => OutputFormat::Table,
        Format::Csv => OutputFormat::Csv,
        Format::Both => OutputFormat::Both,
    };
    cfg.marker = o.marker;
    cfg.workers = o.workers;
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Ingest(o) => config(Command::Ingest, o),
        Cmd::Estimate(o) => config(Command::Estimate, o),
        Cmd::Diagnose(o) => config(Command::Diagnose, o),
        Cmd::Models(o) => config(Command::Models, o),
        Cmd::Forecast(o) => config(Command::Forecast, o),
        Cmd::Scenario(o) => config(Command::Scenario, o),
        Cmd::Report(o) => config(Command::Report, o),
    };
    match run(&cfg) {
        Ok(summary) => {
            for path in &summary.written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.class().name());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
