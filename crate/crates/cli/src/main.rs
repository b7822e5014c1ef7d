//! `lcbirk`: analyze, reduce, simulate and verify LC netlists.

mod args;
mod report;
mod simulate;
mod verify;

use std::process::ExitCode;

use clap::Parser;
use lc_birkhoff::netlist::{parse_netlist, Circuit};

use args::{Cli, Command, Common};

/// Exit 1: the circuit could not be analyzed. Exit 2: the invocation itself is wrong.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Analysis(String),
    /// Output produced before the failure, then the diagnostic.
    Partial(String, String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Analysis(_) | CliError::Partial(..) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Analysis(m) | CliError::Partial(_, m) => f.write_str(m),
        }
    }
}

pub fn analysis<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

/// Reads the netlist and applies `--coords`.
pub fn load(common: &Common) -> Result<Circuit, CliError> {
    let path = &common.netlist;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e)))?;
    let mut c = parse_netlist(&text)
        .map_err(|e| CliError::Analysis(format!("{}:{}", path.display(), e)))?;
    if let Some(names) = &common.coords {
        let mut idx = Vec::new();
        for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let i = c
                .branch_index(name)
                .ok_or_else(|| CliError::Usage(format!("--coords: unknown branch {}", name)))?;
            idx.push(i);
        }
        c.coords = Some(idx);
        c.validate()
            .map_err(|e| CliError::Usage(format!("--coords: {}", e.message)))?;
    }
    log::info!(
        "{}: {} branches, {} nodes",
        path.display(),
        c.b(),
        c.nodes.len()
    );
    Ok(c)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Analyze(a) => report::analyze(&a),
        Command::Reduce(a) => report::reduce(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Verify(a) => verify::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIRKHOFF_LC_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Partial(out, _) = &e {
                print!("{}", out);
            }
            eprintln!("error: {}", e);
            ExitCode::from(e.code())
        }
    }
}
