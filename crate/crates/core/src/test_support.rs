//! Reference implementations shared by unit tests.

use std::f64::consts::PI;

use crate::grid::GridSpec;
use crate::spectral::Extension;

// Direct spatial summation of h^d G_tau over every periodic image of the
// extended array; independent of the transform path.
pub(crate) fn direct_convolution(grid: &GridSpec, u: &[f64], tau: f64, ext: Extension) -> Vec<f64> {
    let d = grid.dim();
    let h = grid.h();
    let n = grid.nodes_per_axis();
    let norm = (4.0 * PI * tau).powf(-(d as f64) / 2.0) * grid.cell_volume();
    let images = 8i64;
    // Extended source positions along each axis, as (node, coordinate in units of h).
    let axis_sources = |a: usize| -> Vec<(usize, f64)> {
        let n = n[a] as i64;
        let (period, copies): (i64, Vec<(i64, i64)>) = match ext {
            Extension::Periodic => (n, (0..n).map(|i| (i, i)).collect()),
            Extension::Mirror => (
                2 * n,
                (0..n).flat_map(|i| [(i, i), (i, 2 * n - 1 - i)]).collect(),
            ),
        };
        let mut out = Vec::new();
        for r in -images..=images {
            for &(node, pos) in &copies {
                out.push((node as usize, (pos + r * period) as f64));
            }
        }
        out
    };
    let sources: Vec<Vec<(usize, f64)>> = (0..d).map(axis_sources).collect();
    let mut out = vec![0.0; grid.n_nodes()];
    for (p, slot) in out.iter_mut().enumerate() {
        let c = grid.coords(p);
        // Separable kernel: accumulate 1D weights per axis.
        let weights: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let mut w = vec![0.0; n[a]];
                for &(node, pos) in &sources[a] {
                    let dx = (c[a] as f64 - pos) * h[a];
                    w[node] += (-dx * dx / (4.0 * tau)).exp();
                }
                w
            })
            .collect();
        let mut acc = 0.0;
        for (q, &uq) in u.iter().enumerate() {
            if uq == 0.0 {
                continue;
            }
            let cq = grid.coords(q);
            let mut w = 1.0;
            for a in 0..d {
                w *= weights[a][cq[a]];
            }
            acc += w * uq;
        }
        *slot = norm * acc;
    }
    out
}
