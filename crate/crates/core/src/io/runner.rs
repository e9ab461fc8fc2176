use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cases::initial_guess;
use crate::error::Result;
use crate::grid::IndicatorField;
use crate::io::snapshot::{format_shortest, write_field_snapshot};
use crate::io::{LogWriter, OutputSpec, RunSpec, SnapshotFormat};
use crate::optimizer::{Optimizer, RunResult, Termination};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub termination: Termination,
    pub iterations: usize,
    pub j: f64,
    pub j_tau: f64,
    pub perimeter: f64,
    pub volume_fraction: f64,
}

fn snapshot(
    dir: &Path,
    name: &str,
    chi: &IndicatorField,
    formats: &[SnapshotFormat],
) -> Result<()> {
    let field = chi.to_scalar();
    for &f in formats {
        write_field_snapshot(&field, &dir.join(format!("{name}.{f}")), f)?;
    }
    Ok(())
}

/// Runs one resolved configuration, writing `config.txt`, `log.csv`,
/// `snapshots/` and `summary.txt` into `dir`.
pub fn execute_run(
    run: &RunSpec,
    output: &OutputSpec,
    dir: &Path,
) -> Result<(RunSummary, RunResult)> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    fs::write(dir.join("config.txt"), run.to_config())?;

    let case = run.case.build()?;
    let chi0 = initial_guess(run.init, &case.grid, case.target_ones(), run.ictm.seed)?;
    let opt = Optimizer::new(case, run.ictm)?;
    let mut log = LogWriter::new(BufWriter::new(File::create(dir.join("log.csv"))?));
    let result = opt.run_with_observer(chi0, |ev| {
        log.write(ev.record)?;
        let k = ev.record.k;
        if output.snapshot_every > 0 && k % output.snapshot_every == 0 {
            snapshot(&snap_dir, &format!("chi_{k:05}"), ev.chi, &output.formats)?;
        }
        Ok(())
    })?;
    drop(log);
    snapshot(&snap_dir, "chi_final", &result.chi, &output.formats)?;

    let last = result
        .records
        .last()
        .expect("runs always record the initial state");
    let summary = RunSummary {
        dir: dir.to_path_buf(),
        termination: result.termination,
        iterations: last.k,
        j: last.j,
        j_tau: last.j_tau,
        perimeter: opt.model().convolver().perimeter(&result.chi)?,
        volume_fraction: last.volume_fraction,
    };
    let mut s = BufWriter::new(File::create(dir.join("summary.txt"))?);
    writeln!(s, "termination = {}", summary.termination)?;
    writeln!(s, "iterations = {}", summary.iterations)?;
    writeln!(s, "J = {}", format_shortest(summary.j))?;
    writeln!(s, "J_tau = {}", format_shortest(summary.j_tau))?;
    writeln!(s, "perimeter = {}", format_shortest(summary.perimeter))?;
    writeln!(
        s,
        "volume_fraction = {}",
        format_shortest(summary.volume_fraction)
    )?;
    for (k, v) in &run.swept {
        writeln!(s, "sweep.{k} = {v}")?;
    }
    s.flush()?;
    Ok((summary, result))
}
