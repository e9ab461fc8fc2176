//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! case.name = area_to_point
//! case.cells = 200
//! ictm.gamma = 30
//! sweep.kappa1 = 5, 10, 20
//! ```
//!
//! Every key is optional; unknown or repeated keys are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::cases::{CaseKind, InitKind, Materials, ProblemCase};
use crate::error::{invalid, IctmError, Result};
use crate::grid::GridSpec;
use crate::io::snapshot::format_shortest;
use crate::optimizer::IctmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Vtk,
    Raw,
}

impl std::fmt::Display for SnapshotFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Vtk => "vtk",
            Self::Raw => "raw",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub kind: CaseKind,
    /// One entry per axis, or a single entry applied to every axis.
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    pub beta: f64,
    pub materials: Materials,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self {
            kind: CaseKind::AreaToPoint,
            cells: vec![200],
            lengths: vec![1.0],
            beta: 0.2,
            materials: Materials::default(),
        }
    }
}

impl CaseSpec {
    fn per_axis<T: Copy>(values: &[T], dim: usize, key: &'static str) -> Result<Vec<T>> {
        match values.len() {
            1 => Ok(vec![values[0]; dim]),
            n if n == dim => Ok(values.to_vec()),
            n => Err(invalid(
                key,
                format!("expected 1 or {dim} entries, got {n}"),
            )),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let dim = self.kind.dim();
        GridSpec::new(
            dim,
            &Self::per_axis(&self.cells, dim, "case.cells")?,
            &Self::per_axis(&self.lengths, dim, "case.lengths")?,
        )
    }

    pub fn build(&self) -> Result<ProblemCase> {
        ProblemCase::new(self.kind, self.grid()?, self.materials, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Snapshot every this many iterations (0: final only).
    pub snapshot_every: usize,
    pub formats: Vec<SnapshotFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 10,
            formats: vec![SnapshotFormat::Vtk],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepAxes {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub case: CaseSpec,
    pub ictm: IctmConfig,
    pub init: InitKind,
    pub output: OutputSpec,
    pub sweep: SweepAxes,
    pub max_runs: usize,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            case: CaseSpec::default(),
            ictm: IctmConfig::default(),
            init: InitKind::default(),
            output: OutputSpec::default(),
            sweep: SweepAxes::default(),
            max_runs: 256,
        }
    }
}

/// One fully resolved run of a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub case: CaseSpec,
    pub ictm: IctmConfig,
    pub init: InitKind,
    /// Swept parameters and their values for this run, in axis order.
    pub swept: Vec<(&'static str, String)>,
}

impl RunSpec {
    /// The run as a config file without sweep or output sections; parsing it
    /// reproduces this run.
    pub fn to_config(&self) -> String {
        let m = RunManifest {
            case: self.case.clone(),
            ictm: self.ictm,
            init: self.init,
            ..RunManifest::default()
        };
        m.to_config()
    }

    /// First 12 hex digits of the SHA-256 of [`RunSpec::to_config`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_config().as_bytes());
        digest.iter().take(6).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn list<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn float_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| format_shortest(v))
        .collect::<Vec<_>>()
        .join(",")
}

impl RunManifest {
    /// Serializes the run parameters (not output or sweep settings).
    pub fn to_config(&self) -> String {
        let c = &self.case;
        let i = &self.ictm;
        let f = |x: f64| format_shortest(x);
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("case.name", c.kind.to_string());
        line("case.cells", list(&c.cells));
        line("case.lengths", float_list(&c.lengths));
        line("case.beta", f(c.beta));
        line("materials.kappa1", f(c.materials.kappa1));
        line("materials.kappa2", f(c.materials.kappa2));
        line("materials.q1", f(c.materials.q1));
        line("materials.q2", f(c.materials.q2));
        line("ictm.tau", f(i.tau));
        line("ictm.gamma", f(i.gamma));
        line("ictm.xi", f(i.xi));
        line("ictm.theta", f(i.theta));
        line("ictm.tol", f(i.tol));
        line("ictm.max_iters", i.max_outer_iters.to_string());
        line("ictm.variant", i.variant.to_string());
        line("ictm.seed", i.seed.to_string());
        line("ictm.extension", i.extension.to_string());
        line("solver.rel_tol", f(i.solver.rel_tol));
        if let Some(n) = i.solver.max_cg_iters {
            line("solver.max_cg_iters", n.to_string());
        }
        line("solver.preconditioner", i.solver.preconditioner.to_string());
        line("init.kind", self.init.to_string());
        if let InitKind::Stripes { count } = self.init {
            line("init.stripes", count.to_string());
        }
        s
    }

    /// Cross product of the sweep axes over the base parameters.
    pub fn expand(&self) -> Result<Vec<RunSpec>> {
        let s = &self.sweep;
        let axes: Vec<(&'static str, Vec<String>)> = [
            (
                "kappa1",
                s.kappa1
                    .iter()
                    .map(|&v| format_shortest(v))
                    .collect::<Vec<_>>(),
            ),
            (
                "kappa2",
                s.kappa2.iter().map(|&v| format_shortest(v)).collect(),
            ),
            ("q1", s.q1.iter().map(|&v| format_shortest(v)).collect()),
            ("q2", s.q2.iter().map(|&v| format_shortest(v)).collect()),
            ("beta", s.beta.iter().map(|&v| format_shortest(v)).collect()),
            (
                "gamma",
                s.gamma.iter().map(|&v| format_shortest(v)).collect(),
            ),
            ("tau", s.tau.iter().map(|&v| format_shortest(v)).collect()),
            ("seed", s.seed.iter().map(u64::to_string).collect()),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .collect();
        let total: usize = axes.iter().map(|(_, v)| v.len()).product();
        if total > self.max_runs {
            return Err(invalid(
                "sweep.max_runs",
                format!(
                    "sweep expands to {total} runs, above the cap of {}",
                    self.max_runs
                ),
            ));
        }
        let mut runs = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut run = RunSpec {
                case: self.case.clone(),
                ictm: self.ictm,
                init: self.init,
                swept: Vec::new(),
            };
            // Last axis varies fastest.
            let mut picks = vec![0; axes.len()];
            for (a, (_, values)) in axes.iter().enumerate().rev() {
                picks[a] = idx % values.len();
                idx /= values.len();
            }
            for ((name, values), &p) in axes.iter().zip(&picks) {
                let v = &values[p];
                let x = || v.parse::<f64>().expect("formatted from f64");
                match *name {
                    "kappa1" => run.case.materials.kappa1 = x(),
                    "kappa2" => run.case.materials.kappa2 = x(),
                    "q1" => run.case.materials.q1 = x(),
                    "q2" => run.case.materials.q2 = x(),
                    "beta" => run.case.beta = x(),
                    "gamma" => run.ictm.gamma = x(),
                    "tau" => run.ictm.tau = x(),
                    _ => run.ictm.seed = v.parse().expect("formatted from u64"),
                }
                run.swept.push((name, v.clone()));
            }
            run.ictm.validate()?;
            run.case.build()?;
            runs.push(run);
        }
        Ok(runs)
    }
}

struct Parser {
    line: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> IctmError {
        IctmError::Config {
            line: self.line,
            message: message.into(),
        }
    }

    fn value<T: std::str::FromStr>(&self, key: &str, v: &str) -> Result<T> {
        v.parse::<T>()
            .map_err(|_| self.err(format!("{key}: cannot parse {v:?}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str, v: &str) -> Result<Vec<T>> {
        let items: Vec<T> = v
            .split(',')
            .map(str::trim)
            .map(|t| self.value(key, t))
            .collect::<Result<_>>()?;
        if items.is_empty() {
            return Err(self.err(format!("{key}: empty list")));
        }
        Ok(items)
    }
}

/// Parses and validates a configuration, applying defaults for missing keys.
pub fn parse_config(text: &str) -> Result<RunManifest> {
    let mut m = RunManifest::default();
    let mut seen = HashSet::new();
    let mut stripes: Option<usize> = None;
    let mut init_kind: Option<String> = None;
    let mut cells_set = false;
    for (n, raw) in text.lines().enumerate() {
        let p = Parser { line: n + 1 };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| p.err(format!("expected `section.key = value`, got {content:?}")))?;
        let (key, v) = (key.trim(), value.trim());
        if !seen.insert(key.to_owned()) {
            return Err(p.err(format!("duplicate key {key}")));
        }
        if v.is_empty() {
            return Err(p.err(format!("{key}: missing value")));
        }
        let i = &mut m.ictm;
        let mat = &mut m.case.materials;
        match key {
            "case.name" => m.case.kind = v.parse().map_err(|e: IctmError| p.err(e.to_string()))?,
            "case.cells" => {
                m.case.cells = p.list(key, v)?;
                cells_set = true;
            }
            "case.lengths" => m.case.lengths = p.list(key, v)?,
            "case.beta" => m.case.beta = p.value(key, v)?,
            "materials.kappa1" => mat.kappa1 = p.value(key, v)?,
            "materials.kappa2" => mat.kappa2 = p.value(key, v)?,
            "materials.q1" => mat.q1 = p.value(key, v)?,
            "materials.q2" => mat.q2 = p.value(key, v)?,
            "ictm.tau" => i.tau = p.value(key, v)?,
            "ictm.gamma" => i.gamma = p.value(key, v)?,
            "ictm.xi" => i.xi = p.value(key, v)?,
            "ictm.theta" => i.theta = p.value(key, v)?,
            "ictm.tol" => i.tol = p.value(key, v)?,
            "ictm.max_iters" => i.max_outer_iters = p.value(key, v)?,
            "ictm.variant" => i.variant = v.parse().map_err(|e: IctmError| p.err(e.to_string()))?,
            "ictm.seed" => i.seed = p.value(key, v)?,
            "ictm.extension" => {
                i.extension = v.parse().map_err(|e: IctmError| p.err(e.to_string()))?
            }
            "solver.rel_tol" => i.solver.rel_tol = p.value(key, v)?,
            "solver.max_cg_iters" => i.solver.max_cg_iters = Some(p.value(key, v)?),
            "solver.preconditioner" => {
                i.solver.preconditioner = v.parse().map_err(|e: IctmError| p.err(e.to_string()))?
            }
            "init.kind" => init_kind = Some(v.to_owned()),
            "init.stripes" => stripes = Some(p.value(key, v)?),
            "output.dir" => m.output.dir = PathBuf::from(v),
            "output.snapshot_every" => m.output.snapshot_every = p.value(key, v)?,
            "output.format" => {
                m.output.formats = match v {
                    "vtk" => vec![SnapshotFormat::Vtk],
                    "raw" => vec![SnapshotFormat::Raw],
                    "both" => vec![SnapshotFormat::Vtk, SnapshotFormat::Raw],
                    other => {
                        return Err(p.err(format!(
                            "output.format: expected vtk, raw or both, got {other:?}"
                        )))
                    }
                }
            }
            "sweep.kappa1" => m.sweep.kappa1 = p.list(key, v)?,
            "sweep.kappa2" => m.sweep.kappa2 = p.list(key, v)?,
            "sweep.q1" => m.sweep.q1 = p.list(key, v)?,
            "sweep.q2" => m.sweep.q2 = p.list(key, v)?,
            "sweep.beta" => m.sweep.beta = p.list(key, v)?,
            "sweep.gamma" => m.sweep.gamma = p.list(key, v)?,
            "sweep.tau" => m.sweep.tau = p.list(key, v)?,
            "sweep.seed" => m.sweep.seed = p.list(key, v)?,
            "sweep.max_runs" => m.max_runs = p.value(key, v)?,
            other => return Err(p.err(format!("unknown key {other}"))),
        }
    }
    if !cells_set && m.case.kind == CaseKind::VolumeToSurface {
        m.case.cells = vec![48];
    }
    m.init = match (init_kind.as_deref(), stripes) {
        (None | Some("stripes"), count) => {
            let count = count.unwrap_or(5);
            if count == 0 {
                return Err(invalid("init.stripes", "need at least one stripe"));
            }
            InitKind::Stripes { count }
        }
        (Some("random"), None) => InitKind::Random,
        (Some("block"), None) => InitKind::Block,
        (Some("random" | "block"), Some(_)) => {
            return Err(invalid(
                "init.stripes",
                "only valid with init.kind = stripes",
            ));
        }
        (Some(other), _) => {
            return Err(invalid(
                "init.kind",
                format!("expected stripes, random or block, got {other:?}"),
            ));
        }
    };
    m.ictm.validate()?;
    m.case.build()?;
    m.expand()?;
    Ok(m)
}
