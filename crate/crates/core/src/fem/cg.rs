use super::multigrid::{MultigridCycle, MultigridHierarchy};
use super::sparse::CsrMatrix;
use crate::error::{invalid, IctmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    Jacobi,
    /// Zero-fill incomplete Cholesky on the stiffness pattern.
    IncompleteCholesky,
    /// Geometric multigrid V-cycle; needs grids that halve at least once.
    Multigrid,
}

impl std::str::FromStr for Preconditioner {
    type Err = IctmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "ichol" | "ichol-like" | "ic0" => Ok(Self::IncompleteCholesky),
            "multigrid" | "mg" => Ok(Self::Multigrid),
            other => Err(invalid(
                "preconditioner",
                format!("expected jacobi, ichol or multigrid, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Jacobi => "jacobi",
            Self::IncompleteCholesky => "ichol",
            Self::Multigrid => "multigrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rel_tol: f64,
    /// `None` means `20 * n_nodes^(1/dim)`.
    pub max_cg_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_cg_iters: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-4) {
            return Err(invalid(
                "solver.rel_tol",
                format!("must lie in (0, 1e-4], got {}", self.rel_tol),
            ));
        }
        if self.max_cg_iters == Some(0) {
            return Err(invalid("solver.max_cg_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n_nodes: usize, dim: usize) -> usize {
        self.max_cg_iters
            .unwrap_or_else(|| (20.0 * (n_nodes as f64).powf(1.0 / dim as f64)).ceil() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
enum Factor {
    Jacobi(Vec<f64>),
    // Lower-triangular rows (diagonal last in each row) sharing the matrix pattern.
    Cholesky {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
    },
    Multigrid(Box<MultigridCycle>),
}

#[derive(Debug, Clone)]
pub struct PreparedPreconditioner(Factor);

impl PreparedPreconditioner {
    /// Without grid information `Multigrid` falls back to incomplete Cholesky.
    pub fn new(matrix: &CsrMatrix, kind: Preconditioner) -> Self {
        Self::with_hierarchy(matrix, kind, None)
    }

    pub fn with_hierarchy(
        matrix: &CsrMatrix,
        kind: Preconditioner,
        hierarchy: Option<&MultigridHierarchy>,
    ) -> Self {
        match (kind, hierarchy) {
            (Preconditioner::Jacobi, _) => Self(Factor::Jacobi(
                matrix.diagonal().iter().map(|d| 1.0 / d).collect(),
            )),
            (Preconditioner::Multigrid, Some(h)) => {
                Self(Factor::Multigrid(Box::new(h.setup(matrix))))
            }
            (Preconditioner::IncompleteCholesky | Preconditioner::Multigrid, _) => {
                Self(incomplete_cholesky(matrix))
            }
        }
    }

    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64]) {
        match &self.0 {
            Factor::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Factor::Multigrid(cycle) => cycle.apply(r, z),
            Factor::Cholesky {
                row_ptr,
                cols,
                vals,
            } => {
                let n = r.len();
                // L y = r
                for i in 0..n {
                    let (s, e) = (row_ptr[i], row_ptr[i + 1]);
                    let mut acc = r[i];
                    for p in s..e - 1 {
                        acc -= vals[p] * z[cols[p] as usize];
                    }
                    z[i] = acc / vals[e - 1];
                }
                // L^T x = y, column sweep over the rows of L.
                for i in (0..n).rev() {
                    let (s, e) = (row_ptr[i], row_ptr[i + 1]);
                    z[i] /= vals[e - 1];
                    let zi = z[i];
                    for p in s..e - 1 {
                        z[cols[p] as usize] -= vals[p] * zi;
                    }
                }
            }
        }
    }
}

fn incomplete_cholesky(a: &CsrMatrix) -> Factor {
    let n = a.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let (ac, av) = a.row(i);
        let start = cols.len();
        for (&j, &aij) in ac.iter().zip(av) {
            if j as usize > i {
                break;
            }
            let j = j as usize;
            // Sparse dot of the already-built parts of rows i and j (columns < j).
            let mut dot = 0.0;
            let pe = cols.len();
            if j == i {
                dot = vals[start..pe].iter().map(|v| v * v).sum();
            }
            let (js, je) = if j == i {
                (0, 0)
            } else {
                (row_ptr[j], row_ptr[j + 1] - 1)
            };
            let (mut p, mut q) = (start, js);
            while p < pe && q < je {
                match cols[p].cmp(&cols[q]) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        dot += vals[p] * vals[q];
                        p += 1;
                        q += 1;
                    }
                }
            }
            if j < i {
                let ljj = vals[row_ptr[j + 1] - 1];
                cols.push(j as u32);
                vals.push((aij - dot) / ljj);
            } else {
                let pivot = aij - dot;
                cols.push(i as u32);
                // Breakdown cannot occur for M-matrices; fall back to the raw diagonal otherwise.
                vals.push(if pivot > 0.0 {
                    pivot.sqrt()
                } else {
                    aij.abs().sqrt()
                });
            }
        }
        row_ptr.push(cols.len());
    }
    Factor::Cholesky {
        row_ptr,
        cols,
        vals,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradient for an SPD system.
///
/// Stops when `||b - A x|| <= rel_tol * ||b||`, confirmed on the true residual.
pub fn solve(
    matrix: &CsrMatrix,
    precond: &PreparedPreconditioner,
    rhs: &[f64],
    initial: Option<&[f64]>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = matrix.n();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = rel_tol * b_norm;
    let mut x = initial.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    loop {
        matrix.mul_vec_into(&x, &mut ap);
        for i in 0..n {
            r[i] = rhs[i] - ap[i];
        }
        let res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok((
                x,
                SolveStats {
                    iterations,
                    relative_residual: res / b_norm,
                },
            ));
        }
        if iterations >= max_iters {
            return Err(IctmError::NotConverged {
                iterations,
                residual: res / b_norm,
            });
        }

        precond.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iters {
            matrix.mul_vec_into(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            // Recursive residual is only a hint; the outer loop re-checks the true one.
            if dot(&r, &r).sqrt() <= 0.5 * target {
                break;
            }
            precond.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}
