//! `reservoir-hydro`: experiments on particle systems with a slow reservoir.
//!
//! Exit codes: 0 success, 1 failed verification verdict, 2 input error
//! (nothing written), 3 numeric, resource or I/O failure. Errors are also
//! printed to stderr as a one-line JSON record.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use commands::Output;
use config::{about, keys, parse_config, Resolved, COMMANDS};
use error::CliError;

pub const THREADS_VAR: &str = "RESERVOIR_HYDRO_THREADS";

fn cli() -> Command {
    let mut cmd = Command::new("reservoir-hydro")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Particle systems with a slow finite reservoir: simulation, oracles, PDE solvers and checks")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for name in COMMANDS {
        let mut sub = Command::new(name).about(about(name)).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat key = value config file; flags win"),
        );
        for k in keys(name) {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .help(help)
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn configure_threads() -> Result<usize, CliError> {
    let n = match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
            if n == 0 {
                return Err(CliError::input(format!("{THREADS_VAR} must be a positive integer, got '{v}'")));
            }
            n
        }
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    // a pool that already exists (repeated calls in one process) is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}

fn resolve(name: &str, m: &ArgMatches) -> Result<Resolved, CliError> {
    let flags: Vec<(String, String)> = keys(name)
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let file = match m.get_one::<String>("config") {
        Some(path) => {
            let path = PathBuf::from(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
            Some((path.clone(), parse_config(&text, &path)?))
        }
        None => None,
    };
    Resolved::merge(name, &flags, file.as_ref().map(|(p, e)| (p.as_path(), e.clone())))
}

fn metadata(r: &Resolved, out: &Output, started: f64, elapsed: f64, threads: usize) -> String {
    let mut files: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    files.extend(["config.txt", "metadata.json"]);
    let mut v = json!({
        "tool": "reservoir-hydro",
        "version": env!("CARGO_PKG_VERSION"),
        "command": r.command,
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "threads": threads,
        "verdict": out.verdict.map(|p| if p { "pass" } else { "fail" }),
        "files": files,
        "warnings": out.warnings,
    });
    for (k, x) in &out.extra {
        v[k] = x.clone();
    }
    serde_json::to_string_pretty(&v).expect("metadata serializes") + "\n"
}

fn write_all(dir: &Path, r: &Resolved, out: &Output, started: f64, elapsed: f64, threads: usize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in &out.files {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(dir.join("config.txt"), r.echo())?;
    std::fs::write(dir.join("metadata.json"), metadata(r, out, started, elapsed, threads))?;
    for (sub, child, o) in &out.children {
        write_all(&dir.join(sub), child, o, started, elapsed, threads)?;
    }
    Ok(())
}

fn execute(argv: Vec<String>) -> Result<i32, CliError> {
    let matches = match cli().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return Ok(0);
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::input(first.to_string()));
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let threads = configure_threads()?;
    let resolved = resolve(name, sub)?;
    let dir = PathBuf::from(resolved.str("out")?);
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let out = commands::run(&resolved)?;
    write_all(&dir, &resolved, &out, started, clock.elapsed().as_secs_f64(), threads)?;
    for line in &out.summary {
        println!("{line}");
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", dir.display());
    Ok(match out.verdict {
        Some(false) => 1,
        _ => 0,
    })
}

fn main() {
    let code = match execute(std::env::args().collect()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
