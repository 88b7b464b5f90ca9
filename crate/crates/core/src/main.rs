use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use foliage::report::{self, Command, Options, RunError};
use foliage::scalar::{parse_rational, Rational};
use foliage::scenario::parse_scenario;

/// Measured foliations of closed 1-forms on flat 2-orbifolds.
#[derive(Parser, Debug)]
#[command(name = "foliage", version)]
struct Cli {
    /// periods | classify | decompose | graph | transitivity | harmonic | trace | surgery | examples
    command: String,
    /// Scenario file, or `builtin:<name>` for a shipped scenario.
    scenario: Option<String>,
    /// Write the foliation graph in DOT format here.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write the traced leaf as SVG here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Tracer seed as `θ,φ` with exact rationals.
    #[arg(long)]
    seed: Option<String>,
    /// Tracer step budget.
    #[arg(long)]
    steps: Option<usize>,
    /// Decimal-digit ceiling for sign decisions.
    #[arg(long)]
    precision: Option<u32>,
}

fn parse_seed(s: &str) -> Result<(Rational, Rational), RunError> {
    let bad = || RunError::Usage(format!("seed `{s}` is not `θ,φ`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        parse_rational(a.trim()).map_err(|_| bad())?,
        parse_rational(b.trim()).map_err(|_| bad())?,
    ))
}

fn write(path: &PathBuf, content: &str) -> Result<(), RunError> {
    std::fs::write(path, content).map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    let cmd = Command::parse(&cli.command).ok_or_else(|| RunError::Usage(format!("unknown command `{}`", cli.command)))?;
    let opts = Options {
        seed: cli.seed.as_deref().map(parse_seed).transpose()?,
        steps: cli.steps,
        precision: cli.precision,
    };
    let scenario = match &cli.scenario {
        Some(src) => Some(parse_scenario(&report::load(src)?)?),
        None => None,
    };
    let out = report::run(cmd, scenario.as_ref(), &opts)?;
    print!("{}", out.text);
    let dot_path = cli
        .dot
        .clone()
        .or_else(|| scenario.as_ref().and_then(|s| s.output.dot.clone()).map(PathBuf::from));
    let svg_path = cli
        .svg
        .clone()
        .or_else(|| scenario.as_ref().and_then(|s| s.output.svg.clone()).map(PathBuf::from));
    if let Some(dot) = &out.dot {
        match &dot_path {
            Some(p) => write(p, dot)?,
            None if cmd == Command::Graph => print!("{dot}"),
            None => {}
        }
    }
    if let (Some(svg), Some(p)) = (&out.svg, &svg_path) {
        write(p, svg)?;
    }
    Ok(out.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
