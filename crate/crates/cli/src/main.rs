use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use slowtail::engine::enumerate_finite;
use slowtail_cli::output::{self, Metadata};
use slowtail_cli::{exit, run_scenario, scenarios, theory_only, Mode, Overrides, Scenario};

#[derive(Parser)]
#[command(
    name = "slowtail",
    version,
    about = "Tail experiments for iterated random Lipschitz maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Override `n_samples`.
    #[arg(long)]
    samples: Option<u64>,
    /// Output directory (default `out/<scenario name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write plot.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        scenario: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List built-in scenarios.
    List,
    /// Print the TOML source of a built-in scenario.
    Show { name: String },
    /// Evaluate the predictions on the scenario grid without sampling.
    Theory {
        scenario: String,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distribution-class checks on the scenario's law.
    Diagnose {
        scenario: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Exact law of R_n for a finitely supported scenario law.
    Enumerate {
        scenario: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0.0)]
        r0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::from(exit::PASS),
        Ok(false) => ExitCode::from(exit::VERDICT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { scenario, flags } => execute(scenarios::resolve(&scenario)?, flags),
        Command::Diagnose { scenario, flags } => {
            let mut sc = scenarios::resolve(&scenario)?;
            if !matches!(sc.mode, Mode::Diagnostics { .. }) {
                sc.mode = Mode::Diagnostics {
                    doublings: 20,
                    nodes_per_doubling: 1024,
                    subexp_band: None,
                    extra_laws: Vec::new(),
                };
                sc.name = format!("{}-diagnostics", sc.name);
            }
            execute(sc, flags)
        }
        Command::List => {
            for sc in scenarios::catalog() {
                let crit: Vec<String> = sc.criteria.iter().map(|c| c.to_string()).collect();
                println!("{:<22} [{}] {}", sc.name, sc.mode.name(), sc.description);
                println!(
                    "{:<22} result: {}; acceptance criteria: {}",
                    "",
                    sc.theorem,
                    crit.join(", ")
                );
            }
            Ok(true)
        }
        Command::Show { name } => {
            let src = scenarios::builtin_source(&name)
                .with_context(|| format!("no built-in scenario named {name:?}"))?;
            print!("{src}");
            Ok(true)
        }
        Command::Theory { scenario, out } => {
            let sc = scenarios::resolve(&scenario)?;
            let c = theory_only(&sc).context("stage theory")?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["u", "theory", "theory_lo", "theory_hi", "input_tail"])?;
            for i in 0..c.grid.len() {
                let row = [
                    c.grid[i],
                    c.theory[i],
                    c.theory_lo[i],
                    c.theory_hi[i],
                    c.input_tail[i],
                ];
                w.write_record(row.iter().map(|x| x.to_string()))?;
            }
            emit(out.as_deref(), &w.into_inner().map_err(|e| e.into_error())?)?;
            Ok(true)
        }
        Command::Enumerate {
            scenario,
            steps,
            r0,
            out,
        } => {
            let sc = scenarios::resolve(&scenario)?;
            let atoms = enumerate_finite(&sc.system()?, r0, steps).context("stage enumerate")?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["value", "prob"])?;
            for (v, p) in atoms {
                w.write_record([v.to_string(), p.to_string()])?;
            }
            emit(out.as_deref(), &w.into_inner().map_err(|e| e.into_error())?)?;
            Ok(true)
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            let dir = p
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let name = p
                .file_name()
                .and_then(|n| n.to_str())
                .context("output path has no file name")?;
            output::write_atomic(dir, name, bytes)
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn execute(mut sc: Scenario, flags: RunFlags) -> Result<bool> {
    Overrides {
        seed: flags.seed,
        workers: flags.workers,
        samples: flags.samples,
    }
    .apply(&mut sc);
    if sc.n_samples == 0 && !matches!(sc.mode, Mode::Diagnostics { .. }) {
        bail!("n_samples must be positive");
    }
    let dir = flags
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    let start = Instant::now();
    let outcome = run_scenario(&sc).with_context(|| format!("scenario {}", sc.name))?;
    let meta = Metadata {
        timestamp: chrono::Utc::now().to_rfc3339(),
        version: env!("CARGO_PKG_VERSION"),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        args: std::env::args().collect(),
    };
    output::write_all(&dir, &outcome, flags.svg, &meta).context("stage output")?;
    for c in &outcome.summary.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!(
        "{}: {} -> {}",
        sc.name,
        if outcome.passed() { "pass" } else { "fail" },
        dir.display()
    );
    Ok(outcome.passed())
}
