use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dichotomy::checks::check_theorem1_static;
use dichotomy::graph::{in_s_eps, is_primitive};
use dichotomy::matrix::MatrixLiteral;
use dichotomy::projection::{ConvexSet, SetSpec};
use dichotomy::scenario::{load_scenario, run_scenario, sweep};
use dichotomy::{fmt17, StochasticMatrix};

#[derive(Parser)]
#[command(name = "dichotomy", version, about = "Run consensus scenarios and dichotomy checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every scenario in a directory and write summary.csv.
    Sweep {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Classify a stochastic matrix given as JSON rows.
    CheckMatrix {
        matrix: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Project a comma-separated point onto a set.
    Project {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        point: String,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_matrix(path: &Path) -> Result<StochasticMatrix> {
    let text = read(path)?;
    let lit = match serde_json::from_str::<MatrixLiteral>(&text) {
        Ok(lit) => lit,
        Err(_) => MatrixLiteral::new(serde_json::from_str(&text).context("expected {\"rows\": [[...]]} or [[...]]")?),
    };
    Ok(StochasticMatrix::from_literal(&lit)?)
}

fn check_matrix(path: &Path, eps: Option<f64>) -> Result<bool> {
    let w = load_matrix(path)?;
    let t = check_theorem1_static(&w);
    let p = is_primitive(&w);
    println!("dichotomic: {}", t.dichotomic);
    println!("consensus_dichotomic: {}", t.consensus_dichotomic);
    println!("primitive: {}", p.primitive);
    match p.witness {
        Some(d) => println!("primitivity_witness: {d}"),
        None => println!("primitivity_witness: none"),
    }
    if let Some(eps) = eps {
        if !(eps > 0.0) {
            bail!("--eps must be > 0");
        }
        println!("eps: {}", fmt17(eps));
        println!("in_s_eps: {}", in_s_eps(&w, eps));
    }
    Ok(true)
}

fn project(set: &Path, point: &str) -> Result<bool> {
    let spec: SetSpec = serde_json::from_str(&read(set)?).context("parsing set")?;
    let s = ConvexSet::from_spec(spec)?;
    let x: Vec<f64> = point
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coordinate `{v}`")))
        .collect::<Result<_>>()?;
    let p = s.project(&x)?;
    println!("{}", p.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","));
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, out } => {
            let s = load_scenario(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            let r = run_scenario(&s, &out)?;
            println!("{}: {}", r.name, r.classification);
            for v in &r.verdicts {
                println!("  {}: {}", v.check, if v.holds { "holds" } else { "fails" });
            }
            if !r.success {
                eprintln!("{}: expectation not met", r.name);
            }
            Ok(r.success)
        }
        Command::Sweep { dir, out, jobs } => {
            let rows = sweep(&dir, &out, jobs)?;
            for r in &rows {
                let status = if !r.error.is_empty() {
                    format!("error: {}", r.error)
                } else if r.success {
                    "ok".to_string()
                } else {
                    "expectation not met".to_string()
                };
                println!("{}: {} ({status})", r.name, r.classification);
            }
            println!("summary: {}", out.join("summary.csv").display());
            Ok(rows.iter().all(|r| r.success))
        }
        Command::CheckMatrix { matrix, eps } => check_matrix(&matrix, eps),
        Command::Project { set, point } => project(&set, &point),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DICHOTOMY_LOG", "error")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
