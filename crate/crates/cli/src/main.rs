use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spencerkit::scenario::{self, RunOptions, Scenario};
use spencerkit::{par, Tolerances};

const EXIT_INVALID: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spencerkit",
    about = "Checks almost complex structures on coordinate boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every task of a scenario file (`-` reads stdin).
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Points per axis for every task.
        #[arg(long)]
        grid: Option<usize>,
        /// Ansatz degree for solver tasks.
        #[arg(long)]
        degree: Option<u32>,
        /// Tolerance override, NAME=VALUE; repeatable.
        #[arg(long = "tol", value_parser = parse_tol)]
        tol: Vec<(String, f64)>,
        /// Run only tasks with this label or kind.
        #[arg(long)]
        task: Option<String>,
    },
    /// Print a builtin scenario in canonical form.
    Builtin { name: String },
    /// Print the tool version.
    Version,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if !Tolerances::NAMES.contains(&name) {
        return Err(format!(
            "unknown tolerance `{name}`; known: {}",
            Tolerances::NAMES.join(", ")
        ));
    }
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value for {name}: {e}"))?;
    Ok((name.to_string(), value))
}

fn read_input(file: &PathBuf) -> std::io::Result<String> {
    if file.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(file)
    }
}

fn invalid(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INVALID)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Ok(v) = std::env::var("SPENCERKIT_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(t) => {
                if let Err(e) = par::configure_threads(t) {
                    return invalid(e);
                }
            }
            Err(_) => {
                return invalid(format!(
                    "SPENCERKIT_THREADS must be a positive integer, got `{v}`"
                ))
            }
        }
    }
    match cli.command {
        Command::Version => {
            println!("spencerkit {}", spencerkit::VERSION);
            ExitCode::SUCCESS
        }
        Command::Builtin { name } => match scenario::builtin(&name) {
            Some(text) => match Scenario::parse(text) {
                Ok(s) => {
                    println!("{}", s.to_canonical_json());
                    ExitCode::SUCCESS
                }
                Err(e) => invalid(e),
            },
            None => invalid(format!(
                "no builtin `{name}`; available: {}",
                scenario::builtin_names().collect::<Vec<_>>().join(", ")
            )),
        },
        Command::Run {
            file,
            format,
            grid,
            degree,
            tol,
            task,
        } => {
            let text = match read_input(&file) {
                Ok(t) => t,
                Err(e) => return invalid(format!("{}: {e}", file.display())),
            };
            let sc = match Scenario::parse(&text) {
                Ok(s) => s,
                Err(e) => return invalid(e),
            };
            if let Some(name) = &task {
                if !sc
                    .doc
                    .tasks
                    .iter()
                    .any(|t| t.label() == name || t.kind.name() == name)
                {
                    return invalid(format!("no task labelled `{name}`"));
                }
            }
            if grid == Some(0) {
                return invalid("--grid must be positive");
            }
            let opts = RunOptions {
                grid,
                degree,
                tolerances: tol.into_iter().collect::<BTreeMap<_, _>>(),
                task,
            };
            let result = match scenario::run(&sc, &opts) {
                Ok(r) => r,
                Err(e) => return invalid(e),
            };
            match format {
                Format::Json => print!("{}", scenario::emit_json(&result)),
                Format::Text => print!("{}", scenario::emit_text(&result)),
            }
            ExitCode::from(result.exit_code() as u8)
        }
    }
}
