use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "lcbirk",
    version,
    about = "Birkhoffian analysis and simulation of LC circuits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Incidence and loop matrices, configuration space, Q, regularity and conservativeness.
    Analyze(AnalyzeArgs),
    /// Elimination ledger and the reduced system.
    Reduce(ReduceArgs),
    /// Integrate the reduced system and write the trajectory.
    Simulate(SimulateArgs),
    /// Run the invariant suite and print pass/fail per property.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Netlist file.
    pub netlist: PathBuf,
    /// Free coordinates, comma separated branch names; overrides the netlist.
    #[arg(long)]
    pub coords: Option<String>,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Diagnostic assembly with raw A^T instead of the loop transform.
    #[arg(long)]
    pub raw_at: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Also integrate linear inductor-only loops.
    #[arg(long)]
    pub reduce_inductor_loops: bool,
    /// Time at which initial values fix integration constants.
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SimOptions {
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// End time; defaults to ten of the shortest linearized periods.
    #[arg(long)]
    pub t1: Option<f64>,
    /// Step (RK4) or initial step (RK45); defaults to 1/1000 of the shortest period.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value = "rk4")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Keep every n-th sample.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Integrate linear inductor-only loops instead of monitoring them.
    #[arg(long)]
    pub reduce_inductor_loops: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub sim: SimOptions,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[command(flatten)]
    pub sim: SimOptions,
}
