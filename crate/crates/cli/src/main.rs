use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cmrl::orchestrator::{read_csv, write_csv, PhaseReport, Run, RunConfig};

#[derive(Parser)]
#[command(name = "cmrl", about = "Train world models and controllers in alternating phases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint directory, written after every phase.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a checkpointed run.
    Resume {
        #[arg(long)]
        from: PathBuf,
    },
    /// Play fresh trials with a checkpoint's controller.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Print a checkpoint's metrics.
    ExportMetrics {
        #[arg(long)]
        from: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn print_report(r: &PhaseReport) {
    println!(
        "phase {:>3}  metric {:>8.4}  code_length {:>12.2}  h {:>2}  intrinsic {:>9.4}  {}{}  {:.1}s",
        r.phase,
        r.metric,
        r.code_length.total,
        r.h,
        r.intrinsic_total,
        r.mutation.map_or("-".to_string(), |m| format!("{m:?}")),
        if r.accepted { "+" } else { "" },
        r.duration_secs
    );
}

fn drive(mut run: Run) -> Result<()> {
    let optimum = if run.cfg.stop_on_optimal { run.optimum() } else { None };
    while !run.is_finished() {
        let report = run.run_phase(optimum);
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                if let Some(dir) = &run.cfg.out {
                    std::fs::create_dir_all(dir).ok();
                    run.history.save(&dir.join("history.partial.txt")).ok();
                }
                return Err(e.into());
            }
        };
        print_report(&report);
        if let Some(dir) = run.cfg.out.clone() {
            run.checkpoint(&dir)
                .with_context(|| format!("writing checkpoint to {}", dir.display()))?;
        }
    }
    if run.stopped {
        println!("stopped: metric within 5% of the optimal return");
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            drive(Run::new(cfg)?)
        }
        Command::Resume { from } => {
            let mut run = Run::restore(&from).with_context(|| format!("restoring {}", from.display()))?;
            run.cfg.out = Some(from);
            if run.is_finished() {
                println!("run already finished after {} phases", run.next_phase);
                return Ok(());
            }
            drive(run)
        }
        Command::Eval { checkpoint, trials } => {
            if trials == 0 {
                bail!("--trials must be positive");
            }
            let run = Run::restore(&checkpoint).with_context(|| format!("restoring {}", checkpoint.display()))?;
            let returns = run.evaluate(trials)?;
            let mean = returns.iter().sum::<f64>() / trials as f64;
            println!("trials {trials}  mean_return {mean:.6}");
            if let Some(opt) = run.optimum() {
                println!("optimal_return {opt:.6}");
            }
            Ok(())
        }
        Command::ExportMetrics { from, format: Format::Csv } => {
            let path = from.join("metrics.csv");
            let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let rows = read_csv(std::io::BufReader::new(file))?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match write_csv(&mut lock, &rows).and_then(|()| Ok(lock.flush()?)) {
                // A closed pipe (e.g. `| head`) is not a failure.
                Err(cmrl::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cmrl: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
