//! `henon-mme`: batch front end for the analysis library.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when an analysis
//! runs but cannot reach a verdict (or the orbit escapes).

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::commands::{map, orbits, shift, stats, words};
use crate::error::CliError;
use crate::output::{Envelope, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "henon-mme", version, about = "Maximal-entropy analyses for Henon-like maps")]
struct Cli {
    /// JSON object of parameters; its values override the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// write the result here (atomically) instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// worker threads; defaults to the available cores
    #[arg(long, global = true, env = "HENON_MME_THREADS")]
    threads: Option<usize>,
    /// omit the timestamp so identical runs give identical bytes
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// countable Markov shifts and their maximal-entropy chains
    #[command(subcommand)]
    Shift(shift::Cmd),
    /// symbolic word counts, covering sums and dimension bounds
    #[command(subcommand)]
    Words(words::Cmd),
    /// geometric checks on a Henon-like map
    #[command(subcommand)]
    Map(map::Cmd),
    /// periodic-orbit censuses
    #[command(subcommand)]
    Orbits(orbits::Cmd),
    /// statistical properties of the maximal-entropy measure
    #[command(subcommand)]
    Stats(stats::Cmd),
}

pub struct Ctx {
    pub format: Format,
}

/// Overlays the config object on the flag values and reads the result back.
fn resolve<A: Serialize + DeserializeOwned>(args: A, config: Option<&Value>) -> Result<(A, Value), CliError> {
    let mut value = serde_json::to_value(&args).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(cfg) = config {
        let Value::Object(entries) = cfg else {
            return Err(CliError::Usage("config must be a JSON object".into()));
        };
        let Value::Object(target) = &mut value else {
            return Err(CliError::Usage("command takes no parameters".into()));
        };
        for (k, v) in entries {
            if !target.contains_key(k) {
                return Err(CliError::Usage(format!("unknown config key {k:?}")));
            }
            target.insert(k.clone(), v.clone());
        }
    }
    let resolved: A =
        serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok((resolved, value))
}

fn exec<A: Serialize + DeserializeOwned>(
    name: &str,
    args: A,
    cli: &Cli,
    config: Option<&Value>,
    run: fn(&A, &Ctx) -> Result<Outcome, CliError>,
) -> Result<Option<String>, CliError> {
    let (args, resolved) = resolve(args, config)?;
    let ctx = Ctx { format: cli.format };
    let outcome = run(&args, &ctx)?;
    let envelope = Envelope::new(name, resolved, cli.format, !cli.no_timestamp, outcome.inputs, outcome.result);
    let body = match cli.format {
        Format::Json => output::to_json(&envelope)?,
        Format::Csv => outcome
            .csv
            .ok_or_else(|| CliError::Usage(format!("{name} has no CSV output")))?,
    };
    output::write(cli.output.as_deref(), &body)?;
    Ok(outcome.failure)
}

fn dispatch(cli: &Cli, config: Option<&Value>) -> Result<Option<String>, CliError> {
    use Command::*;
    match &cli.command {
        Shift(c) => match c.clone() {
            shift::Cmd::Entropy(a) => exec("shift entropy", a, cli, config, shift::entropy),
            shift::Cmd::Mme(a) => exec("shift mme", a, cli, config, shift::mme),
            shift::Cmd::Spr(a) => exec("shift spr", a, cli, config, shift::spr),
            shift::Cmd::FixCount(a) => exec("shift fix-count", a, cli, config, shift::fix_count),
            shift::Cmd::Equidist(a) => exec("shift equidist", a, cli, config, shift::equidist),
            shift::Cmd::Census(a) => exec("shift census", a, cli, config, shift::census),
        },
        Words(c) => match c.clone() {
            words::Cmd::Count(a) => exec("words count", a, cli, config, words::count),
            words::Cmd::Covering(a) => exec("words covering", a, cli, config, words::covering),
            words::Cmd::Dimension(a) => exec("words dimension", a, cli, config, words::dimension),
        },
        Map(c) => match c.clone() {
            map::Cmd::G6(a) => exec("map g6", a, cli, config, map::g6),
            map::Cmd::Expansion(a) => exec("map expansion", a, cli, config, map::expansion),
            map::Cmd::Lyapunov(a) => exec("map lyapunov", a, cli, config, map::lyapunov),
        },
        Orbits(c) => match c.clone() {
            orbits::Cmd::Census(a) => exec("orbits census", a, cli, config, orbits::census),
            orbits::Cmd::Entropy(a) => exec("orbits entropy", a, cli, config, orbits::entropy),
            orbits::Cmd::Equidist(a) => exec("orbits equidist", a, cli, config, orbits::equidist),
        },
        Stats(c) => match c.clone() {
            stats::Cmd::Mixing(a) => exec("stats mixing", a, cli, config, stats::mixing),
            stats::Cmd::Clt(a) => exec("stats clt", a, cli, config, stats::clt),
            stats::Cmd::Boxdim(a) => exec("stats boxdim", a, cli, config, stats::boxdim),
            stats::Cmd::ReturnDecay(a) => exec("stats return-decay", a, cli, config, stats::return_decay),
            stats::Cmd::Young(a) => exec("stats young", a, cli, config, stats::young),
        },
    }
}

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let config: Option<Value> = cli.config.as_deref().map(commands::read_json).transpose()?;
    dispatch(cli, config.as_ref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("henon-mme: {failure}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("henon-mme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
