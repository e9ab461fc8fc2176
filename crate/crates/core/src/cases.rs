//! Benchmark problems and initial designs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, IctmError, Result};
use crate::fem::BoundarySpec;
use crate::grid::{GridSpec, IndicatorField};

/// Conductivities and heat generation rates of the two phases
/// (`1`: conductive material where `chi = 1`, `2`: heat-generating background).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Materials {
    pub kappa1: f64,
    pub kappa2: f64,
    pub q1: f64,
    pub q2: f64,
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            kappa1: 10.0,
            kappa2: 1.0,
            q1: 1.0,
            q2: 100.0,
        }
    }
}

impl Materials {
    pub fn new(kappa1: f64, kappa2: f64, q1: f64, q2: f64) -> Result<Self> {
        let m = Self {
            kappa1,
            kappa2,
            q1,
            q2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kappa1", self.kappa1), ("kappa2", self.kappa2)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(invalid(
                    name,
                    format!("conductivity must be positive, got {k}"),
                ));
            }
        }
        for (name, q) in [("q1", self.q1), ("q2", self.q2)] {
            if !q.is_finite() {
                return Err(invalid(name, "heat generation rate must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    AreaToPoint,
    AreaToSides,
    VolumeToSurface,
}

impl CaseKind {
    pub fn dim(self) -> usize {
        match self {
            Self::VolumeToSurface => 3,
            _ => 2,
        }
    }
}

impl std::str::FromStr for CaseKind {
    type Err = IctmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area_to_point" => Ok(Self::AreaToPoint),
            "area_to_sides" => Ok(Self::AreaToSides),
            "volume_to_surface" => Ok(Self::VolumeToSurface),
            other => Err(invalid(
                "case.name",
                format!(
                    "expected area_to_point, area_to_sides or volume_to_surface, got {other:?}"
                ),
            )),
        }
    }
}

impl std::fmt::Display for CaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AreaToPoint => "area_to_point",
            Self::AreaToSides => "area_to_sides",
            Self::VolumeToSurface => "volume_to_surface",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCase {
    pub kind: CaseKind,
    pub grid: GridSpec,
    pub bc: BoundarySpec,
    pub materials: Materials,
    pub beta: f64,
}

impl ProblemCase {
    pub fn new(kind: CaseKind, grid: GridSpec, materials: Materials, beta: f64) -> Result<Self> {
        match kind {
            CaseKind::AreaToPoint => make_area_to_point(grid, materials, beta),
            CaseKind::AreaToSides => make_area_to_sides(grid, materials, beta),
            CaseKind::VolumeToSurface => make_volume_to_surface(grid, materials, beta),
        }
    }

    /// Number of ones every admissible design carries: `round(beta * n_nodes)`.
    pub fn target_ones(&self) -> usize {
        target_ones(&self.grid, self.beta)
    }
}

pub fn target_ones(grid: &GridSpec, beta: f64) -> usize {
    (beta * grid.n_nodes() as f64).round() as usize
}

fn check_common(grid: &GridSpec, materials: &Materials, beta: f64, dim: usize) -> Result<()> {
    materials.validate()?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(
            "beta",
            format!("volume fraction must lie in (0, 1), got {beta}"),
        ));
    }
    if grid.dim() != dim {
        return Err(IctmError::InvalidGrid(format!(
            "case needs a {dim}D grid, got {}D",
            grid.dim()
        )));
    }
    Ok(())
}

/// Inclusive node range covering `[lo, hi]` (fractions of the axis), endpoints
/// snapped to the nearest nodes.
fn patch_range(cells: usize, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
    let m = cells as f64;
    ((lo * m).round() as usize)..=((hi * m).round() as usize)
}

pub fn make_area_to_point(grid: GridSpec, materials: Materials, beta: f64) -> Result<ProblemCase> {
    check_common(&grid, &materials, beta, 2)?;
    let nodes: Vec<usize> = patch_range(grid.cells()[1], 0.45, 0.55)
        .map(|j| grid.index(&[0, j]))
        .collect();
    if nodes.len() < 3 {
        return Err(IctmError::InvalidGrid(format!(
            "heat sink patch resolves to {} nodes; refine the grid",
            nodes.len()
        )));
    }
    let bc = BoundarySpec::new(&grid, nodes)?;
    Ok(ProblemCase {
        kind: CaseKind::AreaToPoint,
        grid,
        bc,
        materials,
        beta,
    })
}

pub fn make_area_to_sides(grid: GridSpec, materials: Materials, beta: f64) -> Result<ProblemCase> {
    check_common(&grid, &materials, beta, 2)?;
    let nodes: Vec<usize> = (0..grid.n_nodes())
        .filter(|&i| grid.is_boundary(i))
        .collect();
    let bc = BoundarySpec::new(&grid, nodes)?;
    Ok(ProblemCase {
        kind: CaseKind::AreaToSides,
        grid,
        bc,
        materials,
        beta,
    })
}

pub fn make_volume_to_surface(
    grid: GridSpec,
    materials: Materials,
    beta: f64,
) -> Result<ProblemCase> {
    check_common(&grid, &materials, beta, 3)?;
    let xs = patch_range(grid.cells()[0], 0.45, 0.55);
    let ys = patch_range(grid.cells()[1], 0.45, 0.55);
    if xs.clone().count() < 3 || ys.clone().count() < 3 {
        return Err(IctmError::InvalidGrid(
            "heat sink patch needs at least 3x3 nodes".into(),
        ));
    }
    let nodes: Vec<usize> = ys
        .flat_map(|j| xs.clone().map(move |i| (i, j)))
        .map(|(i, j)| grid.index(&[i, j, 0]))
        .collect();
    let bc = BoundarySpec::new(&grid, nodes)?;
    Ok(ProblemCase {
        kind: CaseKind::VolumeToSurface,
        grid,
        bc,
        materials,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Equally spaced bars spanning the domain along every axis but x.
    Stripes {
        count: usize,
    },
    Random,
    Block,
}

impl Default for InitKind {
    fn default() -> Self {
        Self::Stripes { count: 5 }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Stripes { .. } => f.write_str("stripes"),
            Self::Random => f.write_str("random"),
            Self::Block => f.write_str("block"),
        }
    }
}

pub fn initial_guess(
    kind: InitKind,
    grid: &GridSpec,
    target: usize,
    seed: u64,
) -> Result<IndicatorField> {
    let n = grid.n_nodes();
    if target > n {
        return Err(IctmError::VolumeTarget { target, n_nodes: n });
    }
    match kind {
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            IndicatorField::from_ones(grid, rand::seq::index::sample(&mut rng, n, target))
        }
        InitKind::Stripes { count } => stripes(grid, target, count.max(1)),
        InitKind::Block => block(grid, target),
    }
}

fn stripes(grid: &GridSpec, target: usize, count: usize) -> Result<IndicatorField> {
    let nx = grid.cells()[0] + 1;
    let column = grid.n_nodes() / nx;
    let full_columns = target / column;
    let remainder = target % column;
    let columns_needed = full_columns + usize::from(remainder > 0);
    if columns_needed > nx {
        return Err(IctmError::VolumeTarget {
            target,
            n_nodes: grid.n_nodes(),
        });
    }
    let count = count.min(columns_needed.max(1));
    // Split the columns between bars as evenly as possible and spread the
    // free columns evenly over the count + 1 gaps around them.
    let free = nx - columns_needed;
    let mut chosen: Vec<usize> = Vec::with_capacity(columns_needed);
    let mut x = 0;
    for b in 0..count {
        x += free * (b + 1) / (count + 1) - free * b / (count + 1);
        let width = columns_needed / count + usize::from(b < columns_needed % count);
        chosen.extend(x..x + width);
        x += width;
    }
    let mut values = vec![0u8; grid.n_nodes()];
    let mut placed = 0;
    for (c, &x) in chosen.iter().enumerate() {
        let take = if c + 1 == chosen.len() && remainder > 0 {
            remainder
        } else {
            column
        };
        for r in 0..take {
            values[x + nx * r] = 1;
        }
        placed += take;
    }
    debug_assert_eq!(placed, target);
    IndicatorField::new(grid.clone(), values)
}

fn block(grid: &GridSpec, target: usize) -> Result<IndicatorField> {
    let d = grid.dim();
    let nodes = grid.nodes_per_axis();
    // Grow a cube-like box until it can hold the target, then fill it in node order.
    let mut side = vec![0usize; d];
    let mut side_len = (target as f64).powf(1.0 / d as f64).ceil() as usize;
    loop {
        for a in 0..d {
            side[a] = side_len.min(nodes[a]);
        }
        if side.iter().product::<usize>() >= target || side.iter().zip(&nodes).all(|(s, n)| s == n)
        {
            break;
        }
        side_len += 1;
    }
    let lo: Vec<usize> = (0..d).map(|a| (nodes[a] - side[a]) / 2).collect();
    let mut values = vec![0u8; grid.n_nodes()];
    let mut placed = 0;
    for i in 0..grid.n_nodes() {
        if placed == target {
            break;
        }
        let c = grid.coords(i);
        if (0..d).all(|a| c[a] >= lo[a] && c[a] < lo[a] + side[a]) {
            values[i] = 1;
            placed += 1;
        }
    }
    IndicatorField::new(grid.clone(), values)
}
