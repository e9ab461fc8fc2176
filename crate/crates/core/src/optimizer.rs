//! Outer iteration: classical thresholding and the prediction-correction scheme.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cases::ProblemCase;
use crate::energy::{EnergyBreakdown, EnergyParams, Model, StateEval};
use crate::error::{invalid, IctmError, Result};
use crate::fem::SolverSettings;
use crate::grid::{field_diff_norm, IndicatorField, ScalarField};
use crate::spectral::{Extension, KernelParams};
use crate::threshold::{prediction_sets, volume_threshold, PredictionSets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    Classical,
    #[default]
    PredictionCorrection,
}

impl std::str::FromStr for Variant {
    type Err = IctmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Self::Classical),
            "pc" | "prediction_correction" => Ok(Self::PredictionCorrection),
            other => Err(invalid(
                "variant",
                format!("expected classical or pc, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Classical => "classical",
            Self::PredictionCorrection => "pc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IctmConfig {
    pub tau: f64,
    pub gamma: f64,
    pub xi: f64,
    pub theta: f64,
    /// Stop once `||chi^{k+1} - chi^k||_2 <= tol`.
    pub tol: f64,
    pub max_outer_iters: usize,
    pub variant: Variant,
    pub seed: u64,
    pub solver: SolverSettings,
    pub extension: Extension,
}

impl Default for IctmConfig {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            gamma: 30.0,
            xi: 1e-5,
            theta: 0.5,
            tol: 1e-6,
            max_outer_iters: 500,
            variant: Variant::PredictionCorrection,
            seed: 0,
            solver: SolverSettings::default(),
            extension: Extension::Mirror,
        }
    }
}

impl IctmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(
                "ictm.tau",
                format!("tau must be > 0, got {}", self.tau),
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid(
                "ictm.gamma",
                format!("gamma must be >= 0, got {}", self.gamma),
            ));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(invalid(
                "ictm.xi",
                format!("xi must be >= 0, got {}", self.xi),
            ));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid(
                "ictm.theta",
                format!("theta must lie in (0, 1), got {}", self.theta),
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(
                "ictm.tol",
                format!("tol must be > 0, got {}", self.tol),
            ));
        }
        self.solver.validate()
    }

    pub fn energy_params(&self) -> Result<EnergyParams> {
        Ok(EnergyParams {
            gamma: self.gamma,
            xi: self.xi,
            kernel: KernelParams::new(self.tau, self.extension)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_tau")]
    pub j_tau: f64,
    pub volume_fraction: f64,
    pub flipped_nodes: usize,
    pub correction_depth: usize,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TolReached,
    CorrectionExhausted,
    MaxIters,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TolReached => "tol_reached",
            Self::CorrectionExhausted => "correction_exhausted",
            Self::MaxIters => "max_iters",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub chi: IndicatorField,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_energy: EnergyBreakdown,
}

/// Passed to the observer after every recorded iteration, including the
/// initial evaluation.
pub struct IterationEvent<'a> {
    pub record: &'a IterationRecord,
    pub chi: &'a IndicatorField,
    pub state: &'a StateEval,
}

/// Flip counts tried by the correction step: `n`, then `floor(n theta^s)`
/// for `s = 1, 2, ...` while positive, with repeats dropped. Pairs are
/// `(s, count)`.
pub fn trial_sizes(n: usize, theta: f64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    loop {
        let m = if s == 0 {
            n
        } else {
            (n as f64 * theta.powi(s as i32)).floor() as usize
        };
        if m == 0 {
            return out;
        }
        if out.last().map_or(true, |&(_, prev)| prev != m) {
            out.push((s, m));
        }
        s += 1;
    }
}

#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    pub chi: IndicatorField,
    /// State of the accepted design; `None` when nothing was accepted.
    pub state: Option<StateEval>,
    pub depth: usize,
    pub improved: bool,
    pub trials: usize,
}

/// Tries the flip counts of [`trial_sizes`] in order and accepts the first
/// candidate whose `J_tau` is strictly below `current.energy.j_tau`. Each
/// candidate flips the first `m` nodes of `A` on and of `B` off.
pub fn correction_step(
    model: &Model,
    chi: &IndicatorField,
    current: &StateEval,
    sets: &PredictionSets,
    theta: f64,
) -> Result<CorrectionOutcome> {
    let mut trials = 0;
    for (s, m) in trial_sizes(sets.n(), theta) {
        let candidate = chi.with_flips(&sets.a[..m], &sets.b[..m]);
        let eval = model.evaluate(&candidate, Some(&current.temperature))?;
        trials += 1;
        if eval.energy.j_tau < current.energy.j_tau {
            return Ok(CorrectionOutcome {
                chi: candidate,
                state: Some(eval),
                depth: s,
                improved: true,
                trials,
            });
        }
    }
    Ok(CorrectionOutcome {
        chi: chi.clone(),
        state: None,
        depth: 0,
        improved: false,
        trials,
    })
}

/// A configured problem ready to iterate.
#[derive(Debug, Clone)]
pub struct Optimizer {
    model: Model,
    cfg: IctmConfig,
}

impl Optimizer {
    pub fn new(case: ProblemCase, cfg: IctmConfig) -> Result<Self> {
        cfg.validate()?;
        let model = Model::new(case, cfg.energy_params()?, cfg.solver)?;
        Ok(Self { model, cfg })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &IctmConfig {
        &self.cfg
    }

    pub fn run(&self, chi0: IndicatorField) -> Result<RunResult> {
        self.run_with_observer(chi0, |_| Ok(()))
    }

    pub fn run_with_observer(
        &self,
        chi0: IndicatorField,
        mut observer: impl FnMut(&IterationEvent<'_>) -> Result<()>,
    ) -> Result<RunResult> {
        let target = self.model.case().target_ones();
        if chi0.grid() != self.model.grid() {
            return Err(IctmError::GridMismatch);
        }
        if chi0.count_ones() != target {
            return Err(IctmError::InfeasibleVolume {
                target,
                actual: chi0.count_ones(),
            });
        }
        let n_nodes = self.model.grid().n_nodes() as f64;
        let record = |k: usize,
                      e: &EnergyBreakdown,
                      chi: &IndicatorField,
                      flipped,
                      depth,
                      start: Instant| IterationRecord {
            k,
            j: e.j,
            j_tau: e.j_tau,
            volume_fraction: chi.count_ones() as f64 / n_nodes,
            flipped_nodes: flipped,
            correction_depth: depth,
            wall_time_ms: start.elapsed().as_millis() as u64,
        };

        let start = Instant::now();
        let mut chi = chi0;
        let mut state = self.model.evaluate(&chi, None)?;
        let first = record(0, &state.energy, &chi, 0, 0, start);
        observer(&IterationEvent {
            record: &first,
            chi: &chi,
            state: &state,
        })?;
        let mut records = vec![first];
        let mut termination = Termination::MaxIters;

        for k in 1..=self.cfg.max_outer_iters {
            let start = Instant::now();
            // Both solves share one matrix, so the scaled state is a near-exact first guess.
            let scale = -(1.0 + self.cfg.xi);
            let guess = ScalarField::new(
                self.model.grid().clone(),
                state
                    .temperature
                    .values()
                    .iter()
                    .map(|t| scale * t)
                    .collect(),
            )?;
            let tstar = self.model.adjoint(&state, Some(&guess))?;
            let phi = self.model.phi(&chi, &state.temperature, &tstar)?;

            let (next, next_state, depth) = match self.cfg.variant {
                Variant::Classical => {
                    let next = volume_threshold(&phi, target)?.chi;
                    if next == chi {
                        termination = Termination::TolReached;
                        break;
                    }
                    let s = self.model.evaluate(&next, Some(&state.temperature))?;
                    (next, s, 0)
                }
                Variant::PredictionCorrection => {
                    let sets = prediction_sets(&phi, &chi, target)?;
                    if sets.n() == 0 {
                        termination = Termination::TolReached;
                        break;
                    }
                    let out = correction_step(&self.model, &chi, &state, &sets, self.cfg.theta)?;
                    match out.state {
                        Some(s) if out.improved => (out.chi, s, out.depth),
                        _ => {
                            termination = Termination::CorrectionExhausted;
                            break;
                        }
                    }
                }
            };
            let change = field_diff_norm(&next, &chi)?;
            let flipped = next.count_differences(&chi);
            chi = next;
            state = next_state;
            let rec = record(k, &state.energy, &chi, flipped, depth, start);
            observer(&IterationEvent {
                record: &rec,
                chi: &chi,
                state: &state,
            })?;
            records.push(rec);
            if change <= self.cfg.tol {
                termination = Termination::TolReached;
                break;
            }
        }
        Ok(RunResult {
            chi,
            records,
            termination,
            final_energy: state.energy,
        })
    }
}

pub fn run_classical(
    case: ProblemCase,
    cfg: IctmConfig,
    chi0: IndicatorField,
) -> Result<RunResult> {
    Optimizer::new(
        case,
        IctmConfig {
            variant: Variant::Classical,
            ..cfg
        },
    )?
    .run(chi0)
}

pub fn run_prediction_correction(
    case: ProblemCase,
    cfg: IctmConfig,
    chi0: IndicatorField,
) -> Result<RunResult> {
    Optimizer::new(
        case,
        IctmConfig {
            variant: Variant::PredictionCorrection,
            ..cfg
        },
    )?
    .run(chi0)
}
