use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fractal_hit_lab::output::{manifest_digest, write};
use fractal_hit_lab::{prepare, run_manifest, CliError, ExperimentKind, Manifest, Overrides, RunOptions};
use fractal_hit_lab_core::grid::{make_cube, min_distance, Closure};
use fractal_hit_lab_core::LevelCap;

#[derive(Parser)]
#[command(name = "fractal-hit-lab", version, about = "Hitting-probability experiments for limsup random fractals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-window hitting probability: exact oracle and Monte Carlo.
    Hitprob(RunArgs),
    /// Moments of S_n and the Paley-Zygmund bound.
    Sn(RunArgs),
    /// Expected H_n over a ball cover against its exponential bound.
    Hn(RunArgs),
    /// Box-counting slopes of covering and expected chosen-cube counts.
    Boxdim(RunArgs),
    /// Coverage of [0,1] by enlarged chosen cubes.
    Lemma23(RunArgs),
    /// The #F_k and #G'_k counting recursions.
    #[command(name = "prop14-count")]
    Prop14Count(RunArgs),
    /// Pair-count function f(n, epsilon) and the tail estimate of delta.
    Corr(RunArgs),
    /// Inspect one dyadic cube.
    Grid(GridArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClosureArg {
    Closed,
    HalfOpen,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    level: u32,
    /// Comma-separated cube coordinates, one per axis.
    #[arg(long, value_delimiter = ',', required = true)]
    coords: Vec<u64>,
    #[arg(long, value_enum, default_value = "closed")]
    closure: ClosureArg,
    /// Coordinates of a second cube to measure the distance to.
    #[arg(long, value_delimiter = ',')]
    other: Option<Vec<u64>>,
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<bool, CliError> {
    let cap = LevelCap::from_env()?;
    let overrides = Overrides { seed: args.seed, trials: args.trials, out: args.out };
    let (manifest, dir, stem) = prepare(Manifest::load(&args.config)?, kind, &overrides)?;
    if args.workers == Some(0) {
        return Err(CliError::Config { path: "--workers".into(), message: "must be at least 1".into() });
    }
    let digest = manifest_digest(&manifest);
    let start = Instant::now();
    let outcome = run_manifest(&manifest, RunOptions { workers: args.workers, cap })?;
    let written = write(&dir, &stem, &outcome, kind.name(), &digest)?;
    let failures = outcome.failures();
    println!(
        "{}: {} rows, {} failed assertions, {:.2} s; wrote {} and {}",
        kind.name(),
        outcome.rows.len(),
        failures,
        start.elapsed().as_secs_f64(),
        written.jsonl.display(),
        written.csv.display()
    );
    Ok(failures == 0)
}

fn grid(args: GridArgs) -> Result<bool, CliError> {
    let closure = match args.closure {
        ClosureArg::Closed => Closure::Closed,
        ClosureArg::HalfOpen => Closure::HalfOpen,
    };
    LevelCap::from_env()?.check(args.level)?;
    let cube = make_cube(args.level, &args.coords, closure)?;
    let extents: Vec<String> = (0..cube.dim())
        .map(|axis| {
            let (lo, hi) = cube.extent(axis);
            format!("{lo}..{hi}")
        })
        .collect();
    println!("cube: {cube}");
    println!("extent: {}", extents.join(" x "));
    println!("volume: {}", cube.volume());
    match cube.parent() {
        Ok(parent) => println!("parent: {parent}"),
        Err(_) => println!("parent: none"),
    }
    let children = cube.children()?;
    println!("children: {}", children.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "));
    if let Some(other) = args.other {
        let other = make_cube(args.level, &other, closure)?;
        println!("distance to {other}: {}", min_distance(&cube, &other)?);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Hitprob(a) => run_experiment(ExperimentKind::Hitprob, a),
        Command::Sn(a) => run_experiment(ExperimentKind::Sn, a),
        Command::Hn(a) => run_experiment(ExperimentKind::Hn, a),
        Command::Boxdim(a) => run_experiment(ExperimentKind::Boxdim, a),
        Command::Lemma23(a) => run_experiment(ExperimentKind::Lemma23, a),
        Command::Prop14Count(a) => run_experiment(ExperimentKind::Prop14Count, a),
        Command::Corr(a) => run_experiment(ExperimentKind::Corr, a),
        Command::Grid(a) => grid(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
