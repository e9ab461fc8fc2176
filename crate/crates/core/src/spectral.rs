//! Heat-kernel convolution on nodal grids.
//!
//! The Gaussian `G_tau(x) = (4 pi tau)^(-d/2) exp(-|x|^2 / (4 tau))` is applied
//! through its exact Fourier symbol `exp(-tau |w|^2)`. Node values are first
//! extended to a periodic array: either plain wrap-around of the `m + 1` nodes
//! per axis, or an even reflection that repeats the edge node
//! (`u_0 .. u_m, u_m .. u_0`). Both treat every node as a cell of width `h`,
//! which matches the uniform nodal measure used for volumes and perimeters and
//! makes the discrete operator symmetric, mass preserving and a semigroup in
//! `tau`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::cases::Materials;
use crate::error::{invalid, IctmError, Result};
use crate::grid::{GridSpec, IndicatorField, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    #[default]
    Mirror,
    Periodic,
}

impl std::str::FromStr for Extension {
    type Err = IctmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mirror" => Ok(Self::Mirror),
            "periodic" => Ok(Self::Periodic),
            other => Err(invalid(
                "extension",
                format!("expected mirror or periodic, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for Extension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mirror => "mirror",
            Self::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    tau: f64,
    extension: Extension,
}

impl KernelParams {
    pub fn new(tau: f64, extension: Extension) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive, got {tau}")));
        }
        Ok(Self { tau, extension })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// `sqrt(pi / tau)`, the scale that turns the convolution energy into a length.
    pub fn perimeter_scale(&self) -> f64 {
        (PI / self.tau).sqrt()
    }
}

/// Precomputed transform plans and symbol for one grid and kernel.
pub struct Convolver {
    grid: GridSpec,
    params: KernelParams,
    nodes: [usize; 3],
    ext: [usize; 3],
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    // Per-axis symbol factors; the product over axes is exp(-tau |w|^2).
    symbol: [Vec<f64>; 3],
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("ext", &self.ext)
            .finish()
    }
}

impl Convolver {
    pub fn new(grid: &GridSpec, params: KernelParams) -> Self {
        let mut planner = FftPlanner::new();
        let mut nodes = [1; 3];
        let mut ext = [1; 3];
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut symbol: [Vec<f64>; 3] = [vec![1.0], vec![1.0], vec![1.0]];
        for axis in 0..grid.dim() {
            let n = grid.cells()[axis] + 1;
            let len = match params.extension {
                Extension::Mirror => 2 * n,
                Extension::Periodic => n,
            };
            nodes[axis] = n;
            ext[axis] = len;
            forward.push(planner.plan_fft_forward(len));
            inverse.push(planner.plan_fft_inverse(len));
            let period = len as f64 * grid.h()[axis];
            symbol[axis] = (0..len)
                .map(|k| {
                    let signed = if k <= len / 2 {
                        k as f64
                    } else {
                        k as f64 - len as f64
                    };
                    let w = 2.0 * PI * signed / period;
                    (-params.tau * w * w).exp()
                })
                .collect();
        }
        Self {
            grid: grid.clone(),
            params,
            nodes,
            ext,
            forward,
            inverse,
            symbol,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Convolves raw nodal values; `values.len()` must equal the node count.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.n_nodes());
        let [ex, ey, ez] = self.ext;
        let [nx, ny, nz] = self.nodes;
        let total = ex * ey * ez;
        let src = |e: usize, n: usize| if e < n { e } else { 2 * n - 1 - e };

        let mut buf = vec![Complex::new(0.0, 0.0); total];
        let mut p = 0;
        for k in 0..ez {
            let sk = src(k, nz);
            for j in 0..ey {
                let row = nx * (src(j, ny) + ny * sk);
                for i in 0..ex {
                    buf[p] = Complex::new(values[row + src(i, nx)], 0.0);
                    p += 1;
                }
            }
        }

        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / total as f64;
        let mut p = 0;
        for k in 0..ez {
            for j in 0..ey {
                let s = self.symbol[2][k] * self.symbol[1][j] * scale;
                for i in 0..ex {
                    buf[p] *= s * self.symbol[0][i];
                    p += 1;
                }
            }
        }
        self.transform(&mut buf, &self.inverse);

        let mut out = Vec::with_capacity(self.grid.n_nodes());
        for k in 0..nz {
            for j in 0..ny {
                let base = ex * (j + ey * k);
                out.extend(buf[base..base + nx].iter().map(|c| c.re));
            }
        }
        out
    }

    fn transform(&self, buf: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>]) {
        let mut stride = 1;
        let mut scratch = Vec::new();
        let mut lines = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let len = self.ext[axis];
            scratch.resize(plan.get_inplace_scratch_len(), Complex::new(0.0, 0.0));
            if axis == 0 {
                plan.process_with_scratch(buf, &mut scratch);
            } else {
                // Gather every line of this axis within one slab into contiguous
                // rows, transform them together and scatter back.
                let slab = stride * len;
                lines.resize(slab, Complex::new(0.0, 0.0));
                for block in buf.chunks_exact_mut(slab) {
                    for s in 0..stride {
                        for t in 0..len {
                            lines[s * len + t] = block[s + t * stride];
                        }
                    }
                    plan.process_with_scratch(&mut lines, &mut scratch);
                    for s in 0..stride {
                        for t in 0..len {
                            block[s + t * stride] = lines[s * len + t];
                        }
                    }
                }
            }
            stride *= len;
        }
    }

    pub fn convolve(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.grid() != &self.grid {
            return Err(IctmError::GridMismatch);
        }
        if let Some(i) = u.values().iter().position(|v| !v.is_finite()) {
            return Err(IctmError::NonFinite(i));
        }
        Ok(ScalarField::from_raw(&self.grid, self.apply(u.values())))
    }

    /// `sqrt(pi/tau) * sum chi (G * (1 - chi)) * cell_volume`.
    pub fn perimeter(&self, chi: &IndicatorField) -> Result<f64> {
        if chi.grid() != &self.grid {
            return Err(IctmError::GridMismatch);
        }
        let complement: Vec<f64> = chi.values().iter().map(|&v| 1.0 - v as f64).collect();
        let smoothed = self.apply(&complement);
        Ok(perimeter_from_smoothed_complement(
            chi,
            &smoothed,
            self.params,
        ))
    }

    /// Returns `(kappa(chi), q(chi))` with `kappa = kappa2 + (kappa1 - kappa2) G * chi`.
    pub fn blend(
        &self,
        chi: &IndicatorField,
        materials: &Materials,
    ) -> Result<(ScalarField, ScalarField)> {
        if chi.grid() != &self.grid {
            return Err(IctmError::GridMismatch);
        }
        materials.validate()?;
        let smoothed = self.apply(&chi.to_f64());
        Ok(blend_smoothed(&self.grid, &smoothed, materials))
    }
}

pub(crate) fn perimeter_from_smoothed_complement(
    chi: &IndicatorField,
    smoothed_complement: &[f64],
    params: KernelParams,
) -> f64 {
    let sum: f64 = chi
        .values()
        .iter()
        .zip(smoothed_complement)
        .filter(|(&c, _)| c == 1)
        .map(|(_, &g)| g)
        .sum();
    (params.perimeter_scale() * sum * chi.grid().cell_volume()).max(0.0)
}

pub(crate) fn blend_smoothed(
    grid: &GridSpec,
    smoothed_chi: &[f64],
    m: &Materials,
) -> (ScalarField, ScalarField) {
    // Kernels narrower than the grid ring, so G * chi can leave [0, 1];
    // clamping keeps both blends between the two phases.
    let kappa = smoothed_chi
        .iter()
        .map(|&s| m.kappa2 + (m.kappa1 - m.kappa2) * s.clamp(0.0, 1.0))
        .collect();
    let q = smoothed_chi
        .iter()
        .map(|&s| m.q2 + (m.q1 - m.q2) * s.clamp(0.0, 1.0))
        .collect();
    (
        ScalarField::from_raw(grid, kappa),
        ScalarField::from_raw(grid, q),
    )
}

pub fn convolve(u: &ScalarField, params: KernelParams) -> Result<ScalarField> {
    Convolver::new(u.grid(), params).convolve(u)
}

pub fn perimeter_estimate(chi: &IndicatorField, params: KernelParams) -> Result<f64> {
    Convolver::new(chi.grid(), params).perimeter(chi)
}

pub fn blend_materials(
    chi: &IndicatorField,
    materials: &Materials,
    params: KernelParams,
) -> Result<(ScalarField, ScalarField)> {
    Convolver::new(chi.grid(), params).blend(chi, materials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::direct_convolution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mirror(tau: f64) -> KernelParams {
        KernelParams::new(tau, Extension::Mirror).unwrap()
    }

    fn random_field(grid: &GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.n_nodes())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        ScalarField::new(grid.clone(), v).unwrap()
    }

    fn random_indicator(grid: &GridSpec, rng: &mut ChaCha8Rng) -> IndicatorField {
        IndicatorField::new(
            grid.clone(),
            (0..grid.n_nodes()).map(|_| rng.gen_range(0..2)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_is_preserved() {
        let g = GridSpec::unit(2, 20).unwrap();
        for ext in [Extension::Mirror, Extension::Periodic] {
            let out = convolve(
                &ScalarField::constant(&g, 3.5),
                KernelParams::new(0.01, ext).unwrap(),
            )
            .unwrap();
            assert!(out.values().iter().all(|v| (v - 3.5).abs() < 1e-13));
        }
    }

    #[test]
    fn impulse_matches_direct_summation() {
        let g = GridSpec::unit(2, 64).unwrap();
        let tau = 1e-3;
        let mut u = vec![0.0; g.n_nodes()];
        u[g.index(&[32, 32])] = 1.0;
        for ext in [Extension::Mirror, Extension::Periodic] {
            let fast = Convolver::new(&g, KernelParams::new(tau, ext).unwrap()).apply(&u);
            let slow = direct_convolution(&g, &u, tau, ext);
            let peak = slow.iter().cloned().fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-8 * peak, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn corner_impulse_reflects_under_mirror() {
        let g = GridSpec::unit(2, 16).unwrap();
        let tau = 0.012;
        let mut u = vec![0.0; g.n_nodes()];
        u[g.index(&[1, 0])] = 1.0;
        u[g.index(&[15, 14])] = -0.5;
        let fast = Convolver::new(&g, mirror(tau)).apply(&u);
        let slow = direct_convolution(&g, &u, tau, Extension::Mirror);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn three_dimensional_matches_direct_summation() {
        let g = GridSpec::new(3, &[6, 5, 4], &[1.0, 1.0, 0.8]).unwrap();
        let u = random_field(&g, 3);
        // Coarse grid: tau must be large enough that the sampled Gaussian is
        // band limited, otherwise the two paths legitimately differ by aliasing.
        let tau = 0.15;
        for ext in [Extension::Mirror, Extension::Periodic] {
            let fast = Convolver::new(&g, KernelParams::new(tau, ext).unwrap()).apply(u.values());
            let slow = direct_convolution(&g, u.values(), tau, ext);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn semigroup_holds() {
        for (g, seed) in [
            (GridSpec::unit(2, 32).unwrap(), 1),
            (GridSpec::unit(3, 8).unwrap(), 2),
        ] {
            let u = random_field(&g, seed);
            for ext in [Extension::Mirror, Extension::Periodic] {
                let full = Convolver::new(&g, KernelParams::new(2e-3, ext).unwrap());
                let half = Convolver::new(&g, KernelParams::new(1e-3, ext).unwrap());
                let a = full.apply(u.values());
                let b = half.apply(&half.apply(u.values()));
                let err = a
                    .iter()
                    .zip(&b)
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(err <= 1e-10, "{err}");
            }
        }
    }

    #[test]
    fn mass_and_max_principle() {
        let g = GridSpec::unit(2, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chi = random_indicator(&g, &mut rng);
        for ext in [Extension::Mirror, Extension::Periodic] {
            let out =
                Convolver::new(&g, KernelParams::new(5e-4, ext).unwrap()).apply(&chi.to_f64());
            let mean_in = chi.count_ones() as f64 / g.n_nodes() as f64;
            let mean_out = out.iter().sum::<f64>() / g.n_nodes() as f64;
            assert!((mean_in - mean_out).abs() < 1e-13);
            assert!(out.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let g = GridSpec::new(2, &[6, 5], &[1.0, 1.0]).unwrap();
        let c = Convolver::new(&g, mirror(2e-2));
        let n = g.n_nodes();
        let column = |j: usize| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            c.apply(&e)
        };
        let cols: Vec<Vec<f64>> = (0..n).map(column).collect();
        for i in 0..n {
            for j in 0..n {
                assert!((cols[j][i] - cols[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn positive_definite_on_mean_zero() {
        let g = GridSpec::unit(2, 16).unwrap();
        let half = Convolver::new(&g, mirror(5e-4));
        for seed in 0..10 {
            let u = random_field(&g, seed);
            let mean = u.values().iter().sum::<f64>() / g.n_nodes() as f64;
            let v: Vec<f64> = u.values().iter().map(|x| x - mean).collect();
            let s: f64 = half.apply(&v).iter().map(|x| x * x).sum();
            assert!(s > 0.0);
        }
        let zero = half.apply(&vec![0.0; g.n_nodes()]);
        assert_eq!(zero.iter().map(|x| x * x).sum::<f64>(), 0.0);
    }

    #[test]
    fn perimeter_trivial_fields() {
        let g = GridSpec::unit(2, 16).unwrap();
        assert_eq!(
            perimeter_estimate(&IndicatorField::zeros(&g), mirror(1e-3)).unwrap(),
            0.0
        );
        assert!(
            perimeter_estimate(&IndicatorField::ones(&g), mirror(1e-3))
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn perimeter_of_complement_is_equal() {
        let g = GridSpec::unit(2, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ext in [Extension::Mirror, Extension::Periodic] {
            let p = KernelParams::new(1e-3, ext).unwrap();
            let chi = random_indicator(&g, &mut rng);
            let a = perimeter_estimate(&chi, p).unwrap();
            let b = perimeter_estimate(&chi.complement(), p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn perimeter_of_straight_interface() {
        let g = GridSpec::unit(2, 256).unwrap();
        let chi = IndicatorField::from_fn(&g, |x| x[0] < 0.5);
        let p = perimeter_estimate(&chi, mirror(1e-4)).unwrap();
        assert!((p - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn perimeter_of_disk() {
        let g = GridSpec::unit(2, 256).unwrap();
        let chi = IndicatorField::from_fn(&g, |x| {
            (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) <= 0.0625
        });
        let p = perimeter_estimate(&chi, mirror(1e-4)).unwrap();
        let exact = 2.0 * PI * 0.25;
        assert!((p - exact).abs() < 0.05 * exact, "{p}");
    }

    #[test]
    fn blend_examples() {
        let g = GridSpec::unit(2, 12).unwrap();
        let m = Materials::new(10.0, 1.0, 1.0, 100.0).unwrap();
        let p = mirror(0.02);
        let (k, q) = blend_materials(&IndicatorField::ones(&g), &m, p).unwrap();
        assert!(k.values().iter().all(|v| (v - 10.0).abs() < 1e-12));
        assert!(q.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let (k, q) = blend_materials(&IndicatorField::zeros(&g), &m, p).unwrap();
        assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(q.values().iter().all(|v| (v - 100.0).abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chi = random_indicator(&g, &mut rng);
        let (k, _) = blend_materials(&chi, &m, p).unwrap();
        let s = convolve(&chi.to_scalar(), p).unwrap();
        for (kv, sv) in k.values().iter().zip(s.values()) {
            assert!((kv - 1.0 - 9.0 * sv).abs() <= 1e-14 * 10.0);
            assert!((1.0 - 1e-12..=10.0 + 1e-12).contains(kv));
        }
    }

    #[test]
    fn narrow_kernel_blend_stays_between_phases() {
        let g = GridSpec::unit(2, 32).unwrap();
        let m = Materials::new(20.0, 1.0, 1.0, 100.0).unwrap();
        let p = mirror(1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chi = random_indicator(&g, &mut rng);
        let s = convolve(&chi.to_scalar(), p).unwrap();
        // The unclamped convolution does overshoot here.
        assert!(s.values().iter().any(|&v| !(0.0..=1.0).contains(&v)));
        let (k, q) = blend_materials(&chi, &m, p).unwrap();
        for ((kv, qv), sv) in k.values().iter().zip(q.values()).zip(s.values()) {
            assert!((1.0..=20.0).contains(kv));
            assert!((1.0..=100.0).contains(qv));
            assert_eq!(*kv, 1.0 + 19.0 * sv.clamp(0.0, 1.0));
        }
    }

    #[test]
    fn blend_rejects_bad_conductivity() {
        let g = GridSpec::unit(2, 8).unwrap();
        let chi = IndicatorField::zeros(&g);
        assert!(Materials::new(0.0, 1.0, 1.0, 1.0).is_err());
        let bad = Materials {
            kappa1: -1.0,
            kappa2: 1.0,
            q1: 1.0,
            q2: 1.0,
        };
        assert!(blend_materials(&chi, &bad, mirror(1e-3)).is_err());
    }

    #[test]
    fn rejects_nan_and_bad_tau() {
        let g = GridSpec::unit(2, 8).unwrap();
        let mut v = vec![0.0; g.n_nodes()];
        v[4] = f64::NAN;
        let u = ScalarField::from_raw(&g, v);
        assert!(convolve(&u, mirror(1e-3)).is_err());
        assert!(KernelParams::new(0.0, Extension::Mirror).is_err());
        assert!(KernelParams::new(-1.0, Extension::Mirror).is_err());
    }

    #[test]
    fn perimeter_functional_is_concave() {
        let g = GridSpec::unit(2, 16).unwrap();
        let c = Convolver::new(&g, mirror(1e-3));
        let cv = g.cell_volume();
        let f = |x: &[f64]| {
            let comp: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
            let s = c.apply(&comp);
            x.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() * cv
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_indicator(&g, &mut rng).to_f64();
            let b = random_indicator(&g, &mut rng).to_f64();
            let (l1, l2): (f64, f64) = (rng.gen(), rng.gen());
            let mix = |l: f64| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| l * x + (1.0 - l) * y)
                    .collect::<Vec<_>>()
            };
            let mid = f(&mix(0.5 * (l1 + l2)));
            assert!(mid >= 0.5 * (f(&mix(l1)) + f(&mix(l2))) - 1e-12);
        }
    }
}
