use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qbm_cli::config::{load_config, to_toml, validate_config, ConfigError, ScenarioConfig};
use qbm_cli::presets::{list_presets, preset, presets};
use qbm_cli::run::{gnuplot_script, run_scenario};
use qbm_core::Engine;

#[derive(Parser)]
#[command(name = "qbm", version, about = "Exact Gaussian packet dynamics in a finite oscillator bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one CSV per engine.
    Run(RunArgs),
    /// Check a scenario file and list every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List built-in presets, or export them as scenario files.
    Presets {
        /// Write `<name>.toml` for every preset into this directory.
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides the scenario's `output`).
    #[arg(long, env = "QBM_OUT_DIR")]
    out: Option<PathBuf>,
    /// Comma-separated engine list replacing the scenario's.
    #[arg(long, value_delimiter = ',')]
    engines: Option<Vec<Engine>>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script next to the CSV files.
    #[arg(long)]
    gnuplot: bool,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(config),
        Command::Presets { export } => presets_cmd(export),
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}

fn run(args: RunArgs) -> ExitCode {
    let cfg: ScenarioConfig = match (&args.config, &args.preset) {
        (Some(path), _) => match load_config(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        (None, Some(name)) => match preset(name) {
            Some(c) => c,
            None => return fail(format!("unknown preset `{name}` (see `qbm presets`)")),
        },
        (None, None) => unreachable!("clap requires one of --config/--preset"),
    };
    let scenario = match cfg.resolve() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let engines = args.engines.unwrap_or_else(|| scenario.engines.clone());
    if engines.contains(&Engine::Ohmic) && scenario.ohmic.is_none() {
        return fail("the ohmic engine requires an [environment.ohmic] section");
    }
    let out = args
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcomes = match run_scenario(&scenario, &engines, &out, threads) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let mut ok = true;
    for o in &outcomes {
        match &o.result {
            Ok(path) => println!("{}: wrote {}", o.engine, path.display()),
            Err(e) => {
                ok = false;
                eprintln!("error: {e}");
            }
        }
    }
    if args.gnuplot {
        let done: Vec<Engine> = outcomes.iter().filter(|o| o.result.is_ok()).map(|o| o.engine).collect();
        let path = out.join(format!("{}.gp", scenario.name));
        if let Err(e) = std::fs::write(&path, gnuplot_script(&scenario.name, &done)) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
        println!("gnuplot: wrote {}", path.display());
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn validate(path: PathBuf) -> ExitCode {
    match validate_config(&path) {
        Ok(diags) if diags.is_empty() => {
            println!("{}: ok", path.display());
            ExitCode::SUCCESS
        }
        Ok(diags) => {
            for d in diags {
                eprintln!("{}: {d}", path.display());
            }
            ExitCode::FAILURE
        }
        Err(e @ ConfigError::Parse { .. }) => fail(format!("{}: {e}", path.display())),
        Err(e) => fail(e),
    }
}

fn presets_cmd(export: Option<PathBuf>) -> ExitCode {
    let Some(dir) = export else {
        for (name, description) in list_presets() {
            println!("{name:<12} {description}");
        }
        return ExitCode::SUCCESS;
    };
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(format!("cannot create {}: {e}", dir.display()));
    }
    for p in presets() {
        let path = dir.join(format!("{}.toml", p.name));
        let text = match to_toml(&p) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        if let Err(e) = std::fs::write(&path, text) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
        println!("wrote {}", path.display());
    }
    ExitCode::SUCCESS
}
