use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ictm_core::io::{execute_run, parse_config, RunManifest, RunSummary};
use ictm_core::{Termination, Variant};

#[derive(Parser)]
#[command(
    name = "ictm",
    version,
    about = "Convolution-thresholding topology optimization for heat conduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run the classical and prediction-correction variants from the same start.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every combination of the `sweep.*` lists.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "ICTM_JOBS", default_value_t = 1)]
        jobs: usize,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<RunManifest> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut m = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(dir) = out {
        m.output.dir = dir;
    }
    Ok(m)
}

fn report(label: &str, s: &RunSummary) {
    println!(
        "{label}: {} after {} iterations, J = {}, J_tau = {}, perimeter = {} -> {}",
        s.termination,
        s.iterations,
        s.j,
        s.j_tau,
        s.perimeter,
        s.dir.display()
    );
}

fn exit_code(summaries: &[RunSummary]) -> ExitCode {
    if summaries
        .iter()
        .any(|s| s.termination == Termination::MaxIters)
    {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn single(m: &RunManifest) -> Result<ictm_core::io::RunSpec> {
    let runs = m.expand()?;
    if runs.len() != 1 {
        bail!(
            "config defines a sweep of {} runs; use `ictm sweep`",
            runs.len()
        );
    }
    Ok(runs.into_iter().next().expect("one run"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            variant,
            seed,
            snapshot_every,
        } => {
            let mut m = load(&config, out)?;
            if let Some(v) = variant {
                m.ictm.variant = v.parse::<Variant>()?;
            }
            if let Some(s) = seed {
                m.ictm.seed = s;
            }
            if let Some(n) = snapshot_every {
                m.output.snapshot_every = n;
            }
            let spec = single(&m)?;
            let (summary, _) = execute_run(&spec, &m.output, &m.output.dir)?;
            report(&spec.ictm.variant.to_string(), &summary);
            Ok(exit_code(&[summary]))
        }
        Command::Compare { config, out } => {
            let m = load(&config, out)?;
            let base = single(&m)?;
            let mut summaries = Vec::new();
            for variant in [Variant::Classical, Variant::PredictionCorrection] {
                let mut spec = base.clone();
                spec.ictm.variant = variant;
                let dir = m.output.dir.join(variant.to_string());
                let (summary, _) = execute_run(&spec, &m.output, &dir)?;
                report(&variant.to_string(), &summary);
                summaries.push(summary);
            }
            Ok(exit_code(&summaries))
        }
        Command::Sweep { config, out, jobs } => {
            let m = load(&config, out)?;
            let runs = m.expand()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()?;
            let results: Vec<Result<RunSummary>> = pool.install(|| {
                runs.par_iter()
                    .map(|spec| {
                        let dir = m.output.dir.join(spec.hash());
                        let (summary, _) = execute_run(spec, &m.output, &dir)?;
                        Ok(summary)
                    })
                    .collect()
            });
            let mut summaries = Vec::new();
            for (spec, r) in runs.iter().zip(results) {
                let label: Vec<String> =
                    spec.swept.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let s = r.with_context(|| format!("run {}", label.join(" ")))?;
                report(&label.join(" "), &s);
                summaries.push(s);
            }
            Ok(exit_code(&summaries))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
