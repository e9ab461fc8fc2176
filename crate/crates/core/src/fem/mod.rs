//! P1 finite elements for the state and adjoint heat equations.
//!
//! Weak forms on `V_h^0` (zero on the Dirichlet nodes):
//!
//! ```text
//! state:    (k grad T, grad v)  = (q, v)
//! adjoint: -(k grad T*, grad v) = (q, v) + xi (k grad T, grad v)
//! ```
//!
//! Element conductivity is the mean of the element's nodal `k` values and the
//! load uses lumped (row-sum) mass quadrature.

mod cg;
mod mesh;
mod multigrid;
mod sparse;

pub use cg::{Preconditioner, PreparedPreconditioner, SolveStats, SolverSettings};
pub use mesh::{ReferenceSimplex, Triangulation};
pub use multigrid::MultigridHierarchy;
pub use sparse::{CsrMatrix, StiffnessPattern};

use crate::error::{IctmError, Result};
use crate::grid::{GridSpec, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    dirichlet: Vec<usize>,
    mask: Vec<bool>,
}

impl BoundarySpec {
    pub fn new(grid: &GridSpec, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut dirichlet: Vec<usize> = nodes.into_iter().collect();
        dirichlet.sort_unstable();
        dirichlet.dedup();
        if dirichlet.is_empty() {
            return Err(IctmError::InvalidBoundary(
                "no Dirichlet nodes; the problem is singular".into(),
            ));
        }
        let mut mask = vec![false; grid.n_nodes()];
        for &i in &dirichlet {
            if i >= grid.n_nodes() {
                return Err(IctmError::InvalidBoundary(format!("node {i} out of range")));
            }
            if !grid.is_boundary(i) {
                return Err(IctmError::InvalidBoundary(format!(
                    "node {i} is not on the domain boundary"
                )));
            }
            mask[i] = true;
        }
        Ok(Self { dirichlet, mask })
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// A stiffness matrix for one conductivity field, ready to be solved against.
#[derive(Debug, Clone)]
pub struct HeatSystem {
    matrix: CsrMatrix,
    precond: PreparedPreconditioner,
    max_iters: usize,
    rel_tol: f64,
}

impl HeatSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64], initial: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
        cg::solve(
            &self.matrix,
            &self.precond,
            rhs,
            initial,
            self.rel_tol,
            self.max_iters,
        )
    }
}

/// Mesh, boundary data and the reusable stiffness pattern for one problem.
#[derive(Debug, Clone)]
pub struct HeatSolver {
    tri: Triangulation,
    bc: BoundarySpec,
    pattern: StiffnessPattern,
    lumped: Vec<f64>,
    share: Vec<f64>,
    hierarchy: std::sync::OnceLock<Option<MultigridHierarchy>>,
}

impl HeatSolver {
    pub fn new(grid: &GridSpec, bc: BoundarySpec) -> Result<Self> {
        if bc.mask.len() != grid.n_nodes() {
            return Err(IctmError::GridMismatch);
        }
        let tri = Triangulation::new(grid);
        let pattern = StiffnessPattern::new(&tri);
        let lumped = (0..grid.n_nodes()).map(|i| grid.lumped_mass(i)).collect();
        let mut share = vec![0.0; grid.n_nodes()];
        for e in 0..tri.n_elements() {
            let part = tri.element_volume(e) / tri.arity() as f64;
            for &v in tri.element(e) {
                share[v as usize] += part;
            }
        }
        Ok(Self {
            tri,
            bc,
            pattern,
            lumped,
            share,
            hierarchy: std::sync::OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.tri.grid()
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.bc
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// `sum_{e ni i} vol_e / (d + 1)`: the integral of the hat function of
    /// node `i`. Differs from the lumped mass only at domain corners.
    pub fn element_share(&self) -> &[f64] {
        &self.share
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid() != self.grid() {
            Err(IctmError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Multigrid transfers for this mesh, built on first use.
    pub fn multigrid(&self) -> &Option<MultigridHierarchy> {
        self.hierarchy.get_or_init(|| {
            MultigridHierarchy::new(
                &self.grid().nodes_per_axis(),
                &self.bc.mask,
                self.pattern.row_ptr(),
                self.pattern.col_idx(),
            )
        })
    }

    pub fn element_conductivity(&self, kappa: &ScalarField) -> Result<Vec<f64>> {
        self.check(kappa)?;
        if let Some(i) = kappa.values().iter().position(|&k| !(k > 0.0)) {
            return Err(crate::error::invalid(
                "kappa",
                format!(
                    "conductivity must be positive, got {} at node {i}",
                    kappa.values()[i]
                ),
            ));
        }
        Ok((0..self.tri.n_elements())
            .map(|e| self.tri.element_mean(e, kappa.values()))
            .collect())
    }

    /// Stiffness matrix with Dirichlet rows and columns eliminated.
    pub fn assemble_stiffness(&self, kappa: &ScalarField) -> Result<CsrMatrix> {
        let coeff = self.element_conductivity(kappa)?;
        Ok(self.pattern.assemble(&self.tri, &coeff, &self.bc.mask))
    }

    pub fn system(&self, kappa: &ScalarField, settings: &SolverSettings) -> Result<HeatSystem> {
        settings.validate()?;
        let matrix = self.assemble_stiffness(kappa)?;
        let hierarchy = match settings.preconditioner {
            Preconditioner::Multigrid => self.multigrid().as_ref(),
            _ => None,
        };
        let precond =
            PreparedPreconditioner::with_hierarchy(&matrix, settings.preconditioner, hierarchy);
        let g = self.grid();
        Ok(HeatSystem {
            matrix,
            precond,
            max_iters: settings.iteration_cap(g.n_nodes(), g.dim()),
            rel_tol: settings.rel_tol,
        })
    }

    /// Lumped load `q_i m_i`, zero on Dirichlet nodes.
    pub fn load_vector(&self, q: &ScalarField) -> Result<Vec<f64>> {
        self.check(q)?;
        Ok(q.values()
            .iter()
            .zip(&self.lumped)
            .zip(&self.bc.mask)
            .map(|((qi, mi), &d)| if d { 0.0 } else { qi * mi })
            .collect())
    }

    pub fn solve_state_in(
        &self,
        system: &HeatSystem,
        q: &ScalarField,
        initial: Option<&ScalarField>,
    ) -> Result<ScalarField> {
        let rhs = self.load_vector(q)?;
        let (mut t, _) = system.solve(&rhs, initial.map(ScalarField::values))?;
        for &i in &self.bc.dirichlet {
            t[i] = 0.0;
        }
        Ok(ScalarField::from_raw(self.grid(), t))
    }

    pub fn solve_adjoint_in(
        &self,
        system: &HeatSystem,
        q: &ScalarField,
        temperature: &ScalarField,
        xi: f64,
        initial: Option<&ScalarField>,
    ) -> Result<ScalarField> {
        self.check(temperature)?;
        let load = self.load_vector(q)?;
        let kt = system.matrix.mul_vec(temperature.values());
        let rhs: Vec<f64> = load
            .iter()
            .zip(&kt)
            .zip(&self.bc.mask)
            .map(|((l, k), &d)| if d { 0.0 } else { -(l + xi * k) })
            .collect();
        let (mut t, _) = system.solve(&rhs, initial.map(ScalarField::values))?;
        for &i in &self.bc.dirichlet {
            t[i] = 0.0;
        }
        Ok(ScalarField::from_raw(self.grid(), t))
    }

    pub fn solve_state(
        &self,
        kappa: &ScalarField,
        q: &ScalarField,
        settings: &SolverSettings,
    ) -> Result<ScalarField> {
        let system = self.system(kappa, settings)?;
        self.solve_state_in(&system, q, None)
    }

    pub fn solve_adjoint(
        &self,
        kappa: &ScalarField,
        q: &ScalarField,
        temperature: &ScalarField,
        xi: f64,
        settings: &SolverSettings,
    ) -> Result<ScalarField> {
        let system = self.system(kappa, settings)?;
        self.solve_adjoint_in(&system, q, temperature, xi, None)
    }

    /// Nodal field of `(xi/2)|grad T|^2 + grad T . grad T*`, averaged from
    /// elements to nodes with element-volume weights.
    pub fn gradient_product_field(
        &self,
        temperature: &ScalarField,
        adjoint: &ScalarField,
        xi: f64,
    ) -> Result<ScalarField> {
        self.check(temperature)?;
        self.check(adjoint)?;
        let n = self.grid().n_nodes();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for e in 0..self.tri.n_elements() {
            let gt = self.tri.gradient(e, temperature.values());
            let ga = self.tri.gradient(e, adjoint.values());
            let g = 0.5 * xi * dot3(&gt, &gt) + dot3(&gt, &ga);
            let vol = self.tri.element_volume(e);
            for &v in self.tri.element(e) {
                num[v as usize] += g * vol;
                den[v as usize] += vol;
            }
        }
        Ok(ScalarField::from_raw(
            self.grid(),
            num.iter().zip(&den).map(|(a, b)| a / b).collect(),
        ))
    }

    /// `sum_e k_e |grad T|_e^2 vol_e`.
    pub fn conduction_energy(&self, kappa: &ScalarField, temperature: &ScalarField) -> Result<f64> {
        let coeff = self.element_conductivity(kappa)?;
        self.check(temperature)?;
        Ok(self.conduction_energy_with(&coeff, temperature.values()))
    }

    pub(crate) fn conduction_energy_with(&self, element_kappa: &[f64], t: &[f64]) -> f64 {
        element_kappa
            .iter()
            .enumerate()
            .map(|(e, k)| {
                let g = self.tri.gradient(e, t);
                k * dot3(&g, &g) * self.tri.element_volume(e)
            })
            .sum()
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests;
