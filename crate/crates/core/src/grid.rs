//! Uniform Cartesian grids and the nodal fields that live on them.
//!
//! Nodes are numbered row-major with x fastest: node `(i, j, k)` has index
//! `i + nx * (j + ny * k)` where `nx = m_x + 1` etc.

use crate::error::{invalid, IctmError, Result};

/// Two grids are equal when they have the same cell counts and spacings.
#[derive(Debug, Clone)]
pub struct GridSpec {
    dim: usize,
    cells: Vec<usize>,
    lengths: Vec<f64>,
    h: Vec<f64>,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.cells == other.cells && self.h == other.h
    }
}

impl GridSpec {
    pub fn new(dim: usize, cells: &[usize], lengths: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(IctmError::InvalidGrid(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if cells.len() != dim || lengths.len() != dim {
            return Err(IctmError::InvalidGrid(format!(
                "expected {dim} cell counts and lengths, got {} and {}",
                cells.len(),
                lengths.len()
            )));
        }
        if let Some(m) = cells.iter().find(|&&m| m < 4) {
            return Err(IctmError::InvalidGrid(format!(
                "need at least 4 cells per axis, got {m}"
            )));
        }
        if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(IctmError::InvalidGrid(format!(
                "axis length must be positive, got {l}"
            )));
        }
        let h = cells
            .iter()
            .zip(lengths)
            .map(|(&m, &l)| l / m as f64)
            .collect();
        Ok(Self {
            dim,
            cells: cells.to_vec(),
            lengths: lengths.to_vec(),
            h,
        })
    }

    /// Grid with the given spacing; lengths are `h * cells`.
    pub fn from_spacing(dim: usize, cells: &[usize], h: &[f64]) -> Result<Self> {
        if h.len() != dim {
            return Err(IctmError::InvalidGrid(format!(
                "expected {dim} spacings, got {}",
                h.len()
            )));
        }
        let lengths: Vec<f64> = cells.iter().zip(h).map(|(&m, &h)| h * m as f64).collect();
        let mut grid = Self::new(dim, cells, &lengths)?;
        grid.h = h.to_vec();
        Ok(grid)
    }

    /// Unit square or cube with `cells` cells along every axis.
    pub fn unit(dim: usize, cells: usize) -> Result<Self> {
        Self::new(dim, &vec![cells; dim], &vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn nodes_per_axis(&self) -> Vec<usize> {
        self.cells.iter().map(|m| m + 1).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.iter().map(|m| m + 1).product()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        let mut idx = 0;
        for axis in (0..self.dim).rev() {
            idx = idx * (self.cells[axis] + 1) + coords[axis];
        }
        idx
    }

    pub fn coords(&self, mut index: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for (axis, slot) in c.iter_mut().enumerate().take(self.dim) {
            let n = self.cells[axis] + 1;
            *slot = index % n;
            index /= n;
        }
        c
    }

    pub fn position(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = c[axis] as f64 * self.h[axis];
        }
        x
    }

    /// Number of axes along which the node sits on the domain boundary.
    pub fn boundary_axes(&self, index: usize) -> usize {
        let c = self.coords(index);
        (0..self.dim)
            .filter(|&a| c[a] == 0 || c[a] == self.cells[a])
            .count()
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        self.boundary_axes(index) > 0
    }

    /// Trapezoidal nodal weight: `cell_volume` in the interior, halved once for
    /// every axis on which the node touches the boundary.
    pub fn lumped_mass(&self, index: usize) -> f64 {
        self.cell_volume() / (1usize << self.boundary_axes(index)) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(IctmError::FieldLength {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IctmError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self {
            values: vec![c; grid.n_nodes()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Skips the finiteness scan; used for solver outputs that are finite by construction.
    pub(crate) fn from_raw(grid: &GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    grid: GridSpec,
    values: Vec<u8>,
}

impl IndicatorField {
    pub fn new(grid: GridSpec, values: Vec<u8>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(IctmError::FieldLength {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|&v| v > 1) {
            return Err(IctmError::NotBinary {
                node,
                value: values[node] as f64,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0; grid.n_nodes()],
        }
    }

    pub fn ones(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![1; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 3]) -> bool) -> Self {
        let values = (0..grid.n_nodes())
            .map(|i| u8::from(f(grid.position(i))))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_ones(grid: &GridSpec, ones: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut values = vec![0u8; grid.n_nodes()];
        for i in ones {
            if i >= values.len() {
                return Err(invalid("node index", format!("{i} out of range")));
            }
            values[i] = 1;
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Accepts a real-valued vector whose entries are exactly 0.0 or 1.0.
    pub fn from_f64(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (node, &value) in values.iter().enumerate() {
            match value {
                v if v == 0.0 => out.push(0),
                v if v == 1.0 => out.push(1),
                _ => return Err(IctmError::NotBinary { node, value }),
            }
        }
        Self::new(grid.clone(), out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, i: usize) -> bool {
        self.values[i] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn to_scalar(&self) -> ScalarField {
        ScalarField::from_raw(&self.grid, self.to_f64())
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Returns a copy with the listed nodes switched on and off.
    pub fn with_flips(&self, on: &[usize], off: &[usize]) -> Self {
        let mut values = self.values.clone();
        for &i in on {
            values[i] = 1;
        }
        for &i in off {
            values[i] = 0;
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn count_differences(&self, other: &Self) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Discrete L2 distance: `sqrt(sum (a - b)^2 * cell_volume)`.
pub fn field_diff_norm(a: &IndicatorField, b: &IndicatorField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(IctmError::GridMismatch);
    }
    let diff = a.count_differences(b);
    Ok((diff as f64 * a.grid.cell_volume()).sqrt())
}

pub fn discrete_volume(chi: &IndicatorField) -> f64 {
    chi.count_ones() as f64 * chi.grid.cell_volume()
}

/// Lumped-mass integral of a nodal field, `sum u_i m_i`.
pub fn integrate(field: &ScalarField) -> f64 {
    let grid = field.grid();
    field
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * grid.lumped_mass(i))
        .sum()
}
