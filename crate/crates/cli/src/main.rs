use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use euler_lattice::config::{parse_config, preset, ConfigError, Precision, ScenarioConfig, PRESETS};
use euler_lattice::export::{self, write_file};
use euler_lattice::scenario::{export_modes, run_scenario, run_stage, Artifacts, ScenarioError, Stage};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "euler-lattice", version, about = "Exact lattice Fourier solutions of the Euler equations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (file for `export` and `bump`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Accepted for interface stability; every computation is deterministic
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Exact,
    Double,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the solution and write its modes
    Build,
    /// Residuals, structure checks and any configured endpoint or window checks
    Verify,
    /// Rényi entropies, D_q fits and Sobolev partial sums
    Analyze,
    /// Galerkin integration of the truncated system against the constructed branch
    Oracle,
    /// Table of switch-on profile derivatives
    Bump {
        /// Sample times (comma separated)
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        times: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        order: usize,
    },
    /// Full pipeline for a preset name or a scenario file
    Run {
        /// One of the presets or a path to a TOML file
        target: String,
    },
    /// Write the modes of the configured solution
    Export {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_file(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn apply_overrides(mut config: ScenarioConfig, common: &Common) -> ScenarioConfig {
    match common.precision {
        Some(PrecisionArg::Exact) => config.precision = Precision::Exact,
        Some(PrecisionArg::Double) => config.precision = Precision::Double,
        None => {}
    }
    config
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let config = match &common.config {
        Some(path) => load_file(path)?,
        None => ScenarioConfig::default(),
    };
    Ok(apply_overrides(config, common))
}

fn resolve_target(target: &str, common: &Common) -> Result<ScenarioConfig, Failure> {
    let config = match preset(target) {
        Some(c) => c,
        None if Path::new(target).exists() => load_file(Path::new(target))?,
        None => {
            return Err(Failure::Config(format!(
                "{target:?} is neither a preset ({}) nor an existing file",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(apply_overrides(config, common))
}

fn output_dir(common: &Common, config: &ScenarioConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name))
}

fn report(artifacts: &Artifacts, dir: &Path) -> Result<bool, Failure> {
    let paths = artifacts.write(dir)?;
    for check in &artifacts.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        let detail = if check.detail.is_empty() { String::new() } else { format!(" ({})", check.detail) };
        println!(
            "{status} {} value={} threshold={}{detail}",
            check.name,
            export::fmt_f64(check.value),
            export::fmt_f64(check.threshold)
        );
    }
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(artifacts.passed())
}

fn write_or_print(out: Option<&PathBuf>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_file(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let common = &cli.common;
    let stage = |stage: Stage| -> Result<bool, Failure> {
        let config = load(common)?;
        let artifacts = run_stage(&config, stage)?;
        report(&artifacts, &output_dir(common, &config))
    };
    match &cli.command {
        Command::Build => stage(Stage::Build),
        Command::Verify => stage(Stage::Verify),
        Command::Analyze => stage(Stage::Analyze),
        Command::Oracle => stage(Stage::Oracle),
        Command::Bump { times, order } => {
            let config = load(common)?;
            let table = export::bump_table(&config.bump_spec(), times, *order)
                .map_err(|e| Failure::Config(format!("bump: {e}")))?;
            write_or_print(common.out.as_ref(), &table.to_csv())?;
            Ok(true)
        }
        Command::Run { target } => {
            let config = resolve_target(target, common)?;
            let artifacts = run_scenario(&config)?;
            report(&artifacts, &output_dir(common, &config))
        }
        Command::Export { format } => {
            let config = load(common)?;
            let text = export_modes(&config, matches!(format, Format::Json))?;
            write_or_print(common.out.as_ref(), &text)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
