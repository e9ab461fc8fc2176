//! Geometric multigrid V-cycle used as a CG preconditioner.
//!
//! Halving every axis keeps the Kuhn triangulation nested: a fine node
//! `2c + p` with `p` in `{0,1}^d` is either a coarse node (`p = 0`) or the
//! midpoint of the coarse edge `(c, c + p)`. Prolongation is therefore exact
//! P1 interpolation, and coarse operators are Galerkin products `P^T A P`.
//! Fine Dirichlet nodes get empty prolongation rows. Smoothing is one forward
//! Gauss-Seidel sweep before and one backward sweep after the coarse
//! correction, which keeps the cycle symmetric.

use super::sparse::CsrMatrix;

/// Coarsening stops once a level has at most this many nodes.
const COARSE_NODES: usize = 2000;
/// Largest coarse system factored densely.
const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone)]
struct Transfer {
    coarse_n: usize,
    // Up to two (coarse node, weight) pairs per fine node; weight 0 marks an unused slot.
    rows: Vec<[(u32, f64); 2]>,
}

/// Mesh-only part of the hierarchy: transfers and coarse sparsity patterns.
#[derive(Debug, Clone)]
pub struct MultigridHierarchy {
    transfers: Vec<Transfer>,
    // CSR pattern (row_ptr, cols) of every coarse level.
    patterns: Vec<(Vec<usize>, Vec<u32>)>,
}

fn transfer(nodes: &[usize], dirichlet: Option<&[bool]>) -> (Transfer, Vec<usize>) {
    let d = nodes.len();
    let coarse: Vec<usize> = nodes.iter().map(|n| (n - 1) / 2 + 1).collect();
    let index = |c: &[usize], dims: &[usize]| -> u32 {
        let mut idx = 0;
        for a in (0..d).rev() {
            idx = idx * dims[a] + c[a];
        }
        idx as u32
    };
    let n: usize = nodes.iter().product();
    let mut rows = Vec::with_capacity(n);
    let mut f = vec![0usize; d];
    for i in 0..n {
        let mut rest = i;
        for a in 0..d {
            f[a] = rest % nodes[a];
            rest /= nodes[a];
        }
        if dirichlet.is_some_and(|m| m[i]) {
            rows.push([(0, 0.0), (0, 0.0)]);
            continue;
        }
        let c: Vec<usize> = f.iter().map(|x| x / 2).collect();
        if f.iter().all(|x| x % 2 == 0) {
            rows.push([(index(&c, &coarse), 1.0), (0, 0.0)]);
        } else {
            let c2: Vec<usize> = f.iter().zip(&c).map(|(x, c)| c + x % 2).collect();
            rows.push([(index(&c, &coarse), 0.5), (index(&c2, &coarse), 0.5)]);
        }
    }
    (
        Transfer {
            coarse_n: coarse.iter().product(),
            rows,
        },
        coarse,
    )
}

impl Transfer {
    fn entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows[i]
            .iter()
            .filter(|e| e.1 != 0.0)
            .map(|&(c, w)| (c as usize, w))
    }

    fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        coarse.iter_mut().for_each(|c| *c = 0.0);
        for (i, &v) in fine.iter().enumerate() {
            for (c, w) in self.entries(i) {
                coarse[c] += w * v;
            }
        }
    }

    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        for (i, f) in fine.iter_mut().enumerate() {
            for (c, w) in self.entries(i) {
                *f += w * coarse[c];
            }
        }
    }
}

fn galerkin_pattern(t: &Transfer, row_ptr: &[usize], cols: &[u32]) -> (Vec<usize>, Vec<u32>) {
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); t.coarse_n];
    for i in 0..t.rows.len() {
        for (ci, _) in t.entries(i) {
            for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
                for (cj, _) in t.entries(j as usize) {
                    rows[ci].push(cj as u32);
                }
            }
        }
    }
    let mut ptr = vec![0];
    let mut out = Vec::new();
    for (c, row) in rows.iter_mut().enumerate() {
        row.push(c as u32);
        row.sort_unstable();
        row.dedup();
        out.extend_from_slice(row);
        ptr.push(out.len());
    }
    (ptr, out)
}

impl MultigridHierarchy {
    /// Builds the hierarchy for a grid with `nodes` per axis and the given
    /// fine-level stiffness pattern. Returns `None` when the grid cannot be
    /// halved at all.
    pub fn new(
        nodes: &[usize],
        dirichlet: &[bool],
        row_ptr: &[usize],
        cols: &[u32],
    ) -> Option<Self> {
        let mut transfers = Vec::new();
        let mut patterns: Vec<(Vec<usize>, Vec<u32>)> = Vec::new();
        let mut dims = nodes.to_vec();
        while dims.iter().product::<usize>() > COARSE_NODES
            && dims.iter().all(|n| (n - 1) % 2 == 0 && *n > 4)
        {
            let mask = if transfers.is_empty() {
                Some(dirichlet)
            } else {
                None
            };
            let (t, coarse) = transfer(&dims, mask);
            let pattern = match patterns.last() {
                None => galerkin_pattern(&t, row_ptr, cols),
                Some((p, c)) => galerkin_pattern(&t, p, c),
            };
            transfers.push(t);
            patterns.push(pattern);
            dims = coarse;
        }
        if transfers.is_empty() {
            None
        } else {
            Some(Self {
                transfers,
                patterns,
            })
        }
    }

    pub fn levels(&self) -> usize {
        self.transfers.len() + 1
    }

    /// Galerkin coarse matrices for a fine matrix on the hierarchy's pattern.
    pub(crate) fn setup(&self, fine: &CsrMatrix) -> MultigridCycle {
        let mut matrices = vec![fine.clone()];
        for (t, (ptr, cols)) in self.transfers.iter().zip(&self.patterns) {
            let a = matrices.last().expect("fine level present");
            let mut values = vec![0.0; cols.len()];
            for i in 0..a.n() {
                let (acols, avals) = a.row(i);
                for (ci, wi) in t.entries(i) {
                    let row = &cols[ptr[ci]..ptr[ci + 1]];
                    for (&j, &aij) in acols.iter().zip(avals) {
                        if aij == 0.0 {
                            continue;
                        }
                        for (cj, wj) in t.entries(j as usize) {
                            let p = row
                                .binary_search(&(cj as u32))
                                .expect("pattern covers product");
                            values[ptr[ci] + p] += wi * aij * wj;
                        }
                    }
                }
            }
            // Coarse nodes that only see Dirichlet fine nodes are decoupled.
            for c in 0..t.coarse_n {
                let p = ptr[c]
                    + cols[ptr[c]..ptr[c + 1]]
                        .binary_search(&(c as u32))
                        .expect("diagonal present");
                if values[p] == 0.0 {
                    values[p] = 1.0;
                }
            }
            matrices.push(CsrMatrix::from_parts(
                t.coarse_n,
                ptr.clone(),
                cols.clone(),
                values,
            ));
        }
        let coarsest = matrices.last().expect("at least one level");
        let coarse_solver = if coarsest.n() <= DENSE_LIMIT {
            CoarseSolver::Dense(DenseCholesky::new(coarsest))
        } else {
            CoarseSolver::Smooth
        };
        MultigridCycle {
            transfers: self.transfers.clone(),
            matrices,
            coarse_solver,
        }
    }
}

#[derive(Debug, Clone)]
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.n();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                l[i * n + j as usize] = v;
            }
        }
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            let d = d.max(f64::MIN_POSITIVE).sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Self { n, l }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Dense(DenseCholesky),
    // Coarsest level too large to factor: a symmetric Gauss-Seidel pair.
    Smooth,
}

#[derive(Debug, Clone)]
pub(crate) struct MultigridCycle {
    transfers: Vec<Transfer>,
    matrices: Vec<CsrMatrix>,
    coarse_solver: CoarseSolver,
}

fn gauss_seidel(a: &CsrMatrix, b: &[f64], x: &mut [f64], forward: bool) {
    let n = a.n();
    let mut step = |i: usize| {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j as usize == i {
                diag = v;
            } else {
                s -= v * x[j as usize];
            }
        }
        x[i] = s / diag;
    };
    if forward {
        (0..n).for_each(&mut step);
    } else {
        (0..n).rev().for_each(&mut step);
    }
}

impl MultigridCycle {
    /// One V-cycle from a zero initial guess: `z ~ A^{-1} r`.
    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let a = &self.matrices[level];
        x.iter_mut().for_each(|v| *v = 0.0);
        if level + 1 == self.matrices.len() {
            match &self.coarse_solver {
                CoarseSolver::Dense(c) => c.solve(b, x),
                CoarseSolver::Smooth => {
                    gauss_seidel(a, b, x, true);
                    gauss_seidel(a, b, x, false);
                }
            }
            return;
        }
        gauss_seidel(a, b, x, true);
        let r: Vec<f64> = {
            let ax = a.mul_vec(x);
            b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
        };
        let t = &self.transfers[level];
        let mut rc = vec![0.0; t.coarse_n];
        t.restrict(&r, &mut rc);
        let mut ec = vec![0.0; t.coarse_n];
        self.cycle(level + 1, &rc, &mut ec);
        t.prolong_add(&ec, x);
        gauss_seidel(a, b, x, false);
    }
}
