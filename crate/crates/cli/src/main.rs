/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! `sadmm`: run, compare and verify consensus ADMM experiments.
//!
//! Exit codes: 0 success (a run that hit `max_iter` still counts), 1 usage,
//! 2 data or configuration, 3 solver or failed check, 4 transport.

mod checks;
mod error;
mod exec;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use sadmm_core::consensus::{Mode, StepKind};
use sadmm_core::data::synthetic::Generator;
use sadmm_core::transport::cluster::bind;
use sadmm_core::transport::{serve_worker, Cluster, TcpLink};

use error::{CliError, USAGE_EXIT};
use exec::{write_outputs, Experiment, Overrides};

#[derive(Parser)]
#[command(name = "sadmm", version, about = "Sensitivity-assisted consensus ADMM for distributed learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment on in-process workers.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several modes from the same data and starting point.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "admm,sadmm,ssadmm,ladmm")]
        modes: Vec<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Verification suites.
    Check {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Listen for TCP workers, then run the experiment on them.
    ServeMaster {
        #[arg(long)]
        config: PathBuf,
        /// Listen address (default: the config's transport.bind).
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Connect to a master and serve rounds until it shuts down.
    ServeWorker {
        #[arg(long, env = "SADMM_MASTER")]
        master: String,
        #[arg(long = "worker-id")]
        worker_id: u32,
        /// Seconds to keep retrying the connection.
        #[arg(long, default_value_t = 30)]
        patience: u64,
    },
    /// Run the configured mode next to plain ADMM and report solve counts
    /// and per-iteration worker times.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a synthetic dataset as CSV.
    GenData {
        #[arg(long, value_enum)]
        generator: GeneratorName,
        /// Feature count for the ridge generator.
        #[arg(long, default_value_t = 10)]
        input_dim: usize,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Suite {
    /// Finite-difference gradient checks for every model.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Update examples, dual identity, single-worker fixed point, framing.
    Invariants,
    /// Convergence-theory bounds on a configured run.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorName {
    Ccpp,
    Robot,
    Ridge,
}

fn run_one(exp: &Experiment) -> Result<(), CliError> {
    let outcome = exp.run_loopback()?;
    let summary = write_outputs(exp, &outcome)?;
    println!("{}", summary.line());
    Ok(())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn bench(exp: &Experiment) -> Result<(), CliError> {
    let baseline = exp.with_mode(Mode::Admm);
    let base = baseline.run_loopback()?;
    write_outputs(&baseline, &base)?;
    let out = exp.run_loopback()?;
    let summary = write_outputs(&exp.with_mode(exp.cfg.solver.mode), &out)?;
    println!("{}", summary.line());

    let times = |kind: fn(StepKind) -> bool| {
        median(
            out.trace
                .records
                .iter()
                .flat_map(|r| &r.workers)
                .filter(|w| kind(w.kind) && !w.fallback)
                .map(|w| w.wall_time_s)
                .collect(),
        )
    };
    let exact = times(|k| k == StepKind::Exact);
    let sens = times(StepKind::is_sensitivity);
    let count = |t: &sadmm_core::consensus::Trace| t.records.iter().map(|r| r.nlp_solves).sum::<usize>();
    let (n_mode, n_admm) = (count(&out.trace), count(&base.trace));
    println!(
        "exact solves: {} {n_mode}, admm {n_admm} ({:.1}%)",
        exp.cfg.solver.mode,
        100.0 * n_mode as f64 / n_admm.max(1) as f64
    );
    match (exact, sens) {
        (Some(e), Some(s)) => println!("median worker time: exact {e:.3e}s, sensitivity {s:.3e}s (ratio {:.3})", s / e),
        _ => println!("median worker time: exact {exact:?}, sensitivity {sens:?}"),
    }
    Ok(())
}

fn serve_master(exp: &Experiment, addr: &str) -> Result<(), CliError> {
    let (listener, local) = bind(addr)?;
    println!("listening on {local}");
    std::io::stdout().flush().ok();
    let mut cluster = Cluster::accept_tcp(&listener, exp.cfg.solver.n_workers)?;
    let outcome = exp.run_on(&mut cluster)?;
    cluster.shutdown();
    let summary = write_outputs(exp, &outcome)?;
    println!("{}", summary.line());
    Ok(())
}

fn gen_data(generator: GeneratorName, input_dim: usize, rows: Option<usize>, seed: u64, out: &Path) -> Result<(), CliError> {
    let g = match generator {
        GeneratorName::Ccpp => Generator::Ccpp,
        GeneratorName::Robot => Generator::Robot,
        GeneratorName::Ridge => Generator::Ridge { input_dim },
    };
    let ds = g.generate(rows.unwrap_or_else(|| g.default_rows()), seed);
    ds.write_csv(out)?;
    println!("wrote {} rows to {}", ds.rows(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, overrides } => run_one(&Experiment::load(&config, &overrides, out.as_deref())?),
        Command::Compare { config, modes, out, overrides } => {
            let exp = Experiment::load(&config, &overrides, out.as_deref())?;
            for mode in modes {
                run_one(&exp.with_mode(mode))?;
            }
            Ok(())
        }
        Command::Check { suite } => match suite {
            Suite::Gradcheck { seeds } => checks::gradcheck(seeds),
            Suite::Invariants => checks::invariants(),
            Suite::Theory { config, overrides } => checks::theory(&Experiment::load(&config, &overrides, None)?),
        },
        Command::ServeMaster { config, bind, out, overrides } => {
            let exp = Experiment::load(&config, &overrides, out.as_deref())?;
            let addr = bind.unwrap_or_else(|| exp.cfg.transport.bind.clone());
            serve_master(&exp, &addr)
        }
        Command::ServeWorker { master, worker_id, patience } => {
            let mut link = TcpLink::connect(master.as_str(), Duration::from_secs(patience))?;
            serve_worker(&mut link, worker_id)?;
            Ok(())
        }
        Command::Bench { config, out, overrides } => bench(&Experiment::load(&config, &overrides, out.as_deref())?),
        Command::GenData { generator, input_dim, rows, seed, out } => gen_data(generator, input_dim, rows, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE_EXIT } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sadmm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
