//! Objective evaluation and the sensitivity field `Phi`.
//!
//! For a design `chi` with state `T` the reported energies are
//!
//! ```text
//! J     = sum_i q_i T_i m_i + gamma * P_tau(chi)
//! J_tau = J + (xi/2) sum_e k_e |grad T|_e^2 vol_e
//! ```
//!
//! with `m_i` the lumped P1 mass. `Phi * cell_volume` is the exact gradient of
//! the frozen-state Lagrangian (see [`Model::surrogate`]) with respect to the
//! nodal values of `chi`.

use serde::{Deserialize, Serialize};

use crate::cases::ProblemCase;
use crate::error::{IctmError, Result};
use crate::fem::{HeatSolver, HeatSystem, SolverSettings};
use crate::grid::{GridSpec, IndicatorField, ScalarField};
use crate::spectral::{
    blend_smoothed, perimeter_from_smoothed_complement, Convolver, KernelParams,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub gamma: f64,
    pub xi: f64,
    pub kernel: KernelParams,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(crate::error::invalid(
                "gamma",
                format!("must be >= 0, got {}", self.gamma),
            ));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(crate::error::invalid(
                "xi",
                format!("must be >= 0, got {}", self.xi),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compliance: f64,
    pub dirichlet_energy: f64,
    pub perimeter_term: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_tau")]
    pub j_tau: f64,
}

impl EnergyBreakdown {
    fn new(compliance: f64, dirichlet_energy: f64, perimeter_term: f64) -> Self {
        let j = compliance + perimeter_term;
        Self {
            compliance,
            dirichlet_energy,
            perimeter_term,
            j,
            j_tau: j + dirichlet_energy,
        }
    }
}

/// Everything computed for one design: blended materials, the assembled
/// system, the state and its energies.
#[derive(Debug, Clone)]
pub struct StateEval {
    pub kappa: ScalarField,
    pub q: ScalarField,
    pub temperature: ScalarField,
    pub energy: EnergyBreakdown,
    system: HeatSystem,
}

impl StateEval {
    pub fn system(&self) -> &HeatSystem {
        &self.system
    }
}

/// A problem instance with its kernel, mesh and solver caches.
#[derive(Debug, Clone)]
pub struct Model {
    case: ProblemCase,
    params: EnergyParams,
    settings: SolverSettings,
    conv: std::sync::Arc<Convolver>,
    solver: HeatSolver,
}

impl Model {
    pub fn new(case: ProblemCase, params: EnergyParams, settings: SolverSettings) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        case.materials.validate()?;
        let conv = std::sync::Arc::new(Convolver::new(&case.grid, params.kernel));
        let solver = HeatSolver::new(&case.grid, case.bc.clone())?;
        Ok(Self {
            case,
            params,
            settings,
            conv,
            solver,
        })
    }

    pub fn case(&self) -> &ProblemCase {
        &self.case
    }

    pub fn grid(&self) -> &GridSpec {
        &self.case.grid
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn convolver(&self) -> &Convolver {
        &self.conv
    }

    pub fn solver(&self) -> &HeatSolver {
        &self.solver
    }

    fn check(&self, chi: &IndicatorField) -> Result<()> {
        if chi.grid() != self.grid() {
            Err(IctmError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Blends materials for `chi`, solves the state and evaluates the energies.
    pub fn evaluate(&self, chi: &IndicatorField, warm: Option<&ScalarField>) -> Result<StateEval> {
        self.check(chi)?;
        let smoothed = self.conv.apply(&chi.to_f64());
        let (kappa, q) = blend_smoothed(self.grid(), &smoothed, &self.case.materials);
        let system = self.solver.system(&kappa, &self.settings)?;
        let temperature = self.solver.solve_state_in(&system, &q, warm)?;
        let energy = self.energy_from(chi, &smoothed, &kappa, &q, &temperature)?;
        Ok(StateEval {
            kappa,
            q,
            temperature,
            energy,
            system,
        })
    }

    /// Energies of `chi` for a given temperature field (normally its state).
    pub fn energy(
        &self,
        chi: &IndicatorField,
        temperature: &ScalarField,
    ) -> Result<EnergyBreakdown> {
        self.check(chi)?;
        if temperature.grid() != self.grid() {
            return Err(IctmError::GridMismatch);
        }
        let smoothed = self.conv.apply(&chi.to_f64());
        let (kappa, q) = blend_smoothed(self.grid(), &smoothed, &self.case.materials);
        self.energy_from(chi, &smoothed, &kappa, &q, temperature)
    }

    fn energy_from(
        &self,
        chi: &IndicatorField,
        smoothed: &[f64],
        kappa: &ScalarField,
        q: &ScalarField,
        temperature: &ScalarField,
    ) -> Result<EnergyBreakdown> {
        let compliance: f64 = q
            .values()
            .iter()
            .zip(temperature.values())
            .zip(self.solver.lumped_mass())
            .map(|((q, t), m)| q * t * m)
            .sum();
        let element_kappa = self.solver.element_conductivity(kappa)?;
        let dirichlet = 0.5
            * self.params.xi
            * self
                .solver
                .conduction_energy_with(&element_kappa, temperature.values());
        // G * (1 - chi) = 1 - G * chi since the kernel preserves constants.
        let complement: Vec<f64> = smoothed.iter().map(|s| 1.0 - s).collect();
        let perimeter = perimeter_from_smoothed_complement(chi, &complement, self.params.kernel);
        Ok(EnergyBreakdown::new(
            compliance,
            dirichlet,
            self.params.gamma * perimeter,
        ))
    }

    pub fn adjoint(&self, eval: &StateEval, warm: Option<&ScalarField>) -> Result<ScalarField> {
        self.solver.solve_adjoint_in(
            &eval.system,
            &eval.q,
            &eval.temperature,
            self.params.xi,
            warm,
        )
    }

    /// ```text
    /// Phi = G * [w (dq (T - T*) + dk g)] + gamma sqrt(pi/tau) G * (1 - 2 chi)
    /// ```
    /// where `g` is the nodal gradient product and `w` rescales each term by
    /// its node weight over `cell_volume` (lumped mass for the load term, hat
    /// function integral for the stiffness term).
    /// The three convolutions of the linearization are fused into one by linearity.
    pub fn phi(
        &self,
        chi: &IndicatorField,
        temperature: &ScalarField,
        adjoint: &ScalarField,
    ) -> Result<ScalarField> {
        self.check(chi)?;
        let m = &self.case.materials;
        let g = self
            .solver
            .gradient_product_field(temperature, adjoint, self.params.xi)?;
        let cv = self.grid().cell_volume();
        let scale = self.params.gamma * self.params.kernel.perimeter_scale();
        let source: Vec<f64> = (0..self.grid().n_nodes())
            .map(|i| {
                let wq = self.solver.lumped_mass()[i] / cv;
                let wk = self.solver.element_share()[i] / cv;
                wq * (m.q1 - m.q2) * (temperature.values()[i] - adjoint.values()[i])
                    + wk * (m.kappa1 - m.kappa2) * g.values()[i]
                    + scale * (1.0 - 2.0 * chi.values()[i] as f64)
            })
            .collect();
        ScalarField::new(self.grid().clone(), self.conv.apply(&source))
    }

    /// The Lagrangian with `T`, `T*` frozen, as a function of the design:
    ///
    /// ```text
    /// L(chi) = (q(chi), T - T*)_m + (xi/2) a_chi(T, T) + a_chi(T*, T) + gamma P_tau(chi)
    /// ```
    ///
    /// Linear in `chi` apart from the concave perimeter term; equals `J_tau`
    /// when `T` is the state of `chi`.
    pub fn surrogate(
        &self,
        chi: &IndicatorField,
        temperature: &ScalarField,
        adjoint: &ScalarField,
    ) -> Result<f64> {
        self.check(chi)?;
        let smoothed = self.conv.apply(&chi.to_f64());
        let (kappa, q) = blend_smoothed(self.grid(), &smoothed, &self.case.materials);
        let load: f64 = (0..self.grid().n_nodes())
            .map(|i| {
                q.values()[i]
                    * (temperature.values()[i] - adjoint.values()[i])
                    * self.solver.lumped_mass()[i]
            })
            .sum();
        let element_kappa = self.solver.element_conductivity(&kappa)?;
        let tri = self.solver.triangulation();
        let mut stiff = 0.0;
        for (e, k) in element_kappa.iter().enumerate() {
            let gt = tri.gradient(e, temperature.values());
            let ga = tri.gradient(e, adjoint.values());
            let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            stiff +=
                k * (0.5 * self.params.xi * dot(&gt, &gt) + dot(&ga, &gt)) * tri.element_volume(e);
        }
        let complement: Vec<f64> = smoothed.iter().map(|s| 1.0 - s).collect();
        let perimeter = perimeter_from_smoothed_complement(chi, &complement, self.params.kernel);
        Ok(load + stiff + self.params.gamma * perimeter)
    }
}

/// Solves nothing: evaluates the energies of `chi` with the given temperature.
pub fn evaluate_energy(
    model: &Model,
    chi: &IndicatorField,
    temperature: &ScalarField,
) -> Result<EnergyBreakdown> {
    model.energy(chi, temperature)
}

pub fn compute_phi(
    model: &Model,
    chi: &IndicatorField,
    temperature: &ScalarField,
    adjoint: &ScalarField,
) -> Result<ScalarField> {
    model.phi(chi, temperature, adjoint)
}
