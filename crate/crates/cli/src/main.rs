use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use udual_cli::{run, Command, Format, RunOptions};

#[derive(Parser)]
#[command(name = "udual", version, about = "Primal and dual utility maximization on finite event trees")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the scenario invariants and list violations.
    Validate(Common),
    /// Print the martingale-measure vertices and the cones K and L.
    Cones(Common),
    /// Solve u(x, q).
    SolvePrimal(Common),
    /// Solve v(y, r).
    SolveDual(Common),
    /// Evaluate w on a grid of x.
    W(Common),
    /// Evaluate w̃ on a grid of y.
    Wtilde(Common),
    /// Run the full verification suite.
    Verify(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// Claim holdings, comma separated; empty for no claims.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    q: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    r: Option<List>,
    /// Grid for w / wtilde, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    grid: Option<List>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Probe seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_feasibility: Option<f64>,
    #[arg(long)]
    tol_stationarity: Option<f64>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    vertex_cap: Option<usize>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Clone)]
struct List(Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Ok(List(Vec::new()));
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>().map(List)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Cones(a) => (Command::Cones, a),
        Cmd::SolvePrimal(a) => (Command::SolvePrimal, a),
        Cmd::SolveDual(a) => (Command::SolveDual, a),
        Cmd::W(a) => (Command::W, a),
        Cmd::Wtilde(a) => (Command::Wtilde, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let options = RunOptions {
        x: args.x,
        q: args.q.map(|l| l.0),
        y: args.y,
        r: args.r.map(|l| l.0),
        grid: args.grid.map(|l| l.0),
        seed: args.seed,
        tol_feasibility: args.tol_feasibility,
        tol_stationarity: args.tol_stationarity,
        tol_gap: args.tol_gap,
        max_iterations: args.max_iterations,
        vertex_cap: args.vertex_cap,
        timings: args.timings,
    };
    let format = match args.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    let report = run(command, &args.scenario, &options);
    print!("{}", report.render(format));
    ExitCode::from(report.exit_code())
}
