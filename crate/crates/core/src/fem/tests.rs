use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn left_edge(grid: &GridSpec) -> BoundarySpec {
    let nodes = (0..grid.n_nodes()).filter(|&i| grid.coords(i)[0] == 0);
    BoundarySpec::new(grid, nodes).unwrap()
}

fn tight() -> SolverSettings {
    SolverSettings {
        rel_tol: 1e-12,
        ..SolverSettings::default()
    }
}

fn random_positive(grid: &GridSpec, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::new(
        grid.clone(),
        (0..grid.n_nodes()).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

// Triangles of the cell split along the (0,0)-(1,1) diagonal, listed by
// geometry rather than through the mesh module.
fn oracle_triangles(grid: &GridSpec) -> Vec<[usize; 3]> {
    let m = grid.cells();
    let mut out = Vec::new();
    for j in 0..m[1] {
        for i in 0..m[0] {
            let n00 = grid.index(&[i, j]);
            let n10 = grid.index(&[i + 1, j]);
            let n01 = grid.index(&[i, j + 1]);
            let n11 = grid.index(&[i + 1, j + 1]);
            out.push([n00, n10, n11]);
            out.push([n00, n11, n01]);
        }
    }
    out
}

// Classical P1 formulas: grad phi_i = (y_j - y_k, x_k - x_j) / (2A).
fn oracle_gradients(grid: &GridSpec, tri: &[usize; 3]) -> ([[f64; 2]; 3], f64) {
    let p: Vec<[f64; 3]> = tri.iter().map(|&v| grid.position(v)).collect();
    let area2 =
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / area2, (p[k][0] - p[j][0]) / area2];
    }
    (g, area2.abs() / 2.0)
}

#[test]
fn quadratic_solution_on_left_edge_problem() {
    let g = GridSpec::unit(2, 16).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let t = solver.solve_state(&one, &one, &tight()).unwrap();
    let h = g.h()[0];
    let mut max_err: f64 = 0.0;
    for i in 0..g.n_nodes() {
        let x = g.position(i)[0];
        max_err = max_err.max((t.values()[i] - (x - 0.5 * x * x)).abs());
    }
    assert!(max_err <= h * h, "{max_err}");
    let at_one = t.values()[g.index(&[16, 8])];
    assert!((at_one - 0.5).abs() <= 2.0 * h * h);
}

#[test]
fn zero_source_gives_zero_temperature() {
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let kappa = random_positive(&g, 1, 1.0, 10.0);
    let zero = ScalarField::constant(&g, 0.0);
    let t = solver
        .solve_state(&kappa, &zero, &SolverSettings::default())
        .unwrap();
    assert!(t.values().iter().all(|&v| v == 0.0));
    let ts = solver
        .solve_adjoint(&kappa, &zero, &t, 1e-5, &SolverSettings::default())
        .unwrap();
    assert!(ts.values().iter().all(|&v| v == 0.0));
}

#[test]
fn state_is_linear_in_source() {
    let g = GridSpec::unit(2, 12).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let kappa = random_positive(&g, 2, 1.0, 10.0);
    let q = random_positive(&g, 3, 0.0, 100.0);
    let s = SolverSettings::default();
    let t1 = solver.solve_state(&kappa, &q, &s).unwrap();
    let t2 = solver.solve_state(&kappa, &q.map(|v| 2.0 * v), &s).unwrap();
    let scale = t1.max_abs();
    for (a, b) in t1.values().iter().zip(t2.values()) {
        assert!((2.0 * a - b).abs() <= 1e-8 * scale);
    }
    assert!(t1.values().iter().all(|&v| v >= -1e-10 * scale));
}

#[test]
fn adjoint_is_scaled_state() {
    for g in [
        GridSpec::unit(2, 12).unwrap(),
        GridSpec::unit(3, 6).unwrap(),
    ] {
        let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
        let kappa = random_positive(&g, 4, 1.0, 10.0);
        let q = random_positive(&g, 5, 1.0, 100.0);
        let s = SolverSettings::default();
        for xi in [0.0, 1e-5, 0.3] {
            let t = solver.solve_state(&kappa, &q, &s).unwrap();
            let ts = solver.solve_adjoint(&kappa, &q, &t, xi, &s).unwrap();
            let err = t
                .values()
                .iter()
                .zip(ts.values())
                .fold(0.0f64, |m, (a, b)| m.max((b + (1.0 + xi) * a).abs()));
            assert!(err <= 1e-8 * t.max_abs(), "xi={xi} err={err}");
        }
    }
}

#[test]
fn dirichlet_values_are_exactly_zero() {
    let g = GridSpec::unit(2, 10).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let t = solver
        .solve_state(&one, &one, &SolverSettings::default())
        .unwrap();
    for &i in solver.boundary().dirichlet_nodes() {
        assert_eq!(t.values()[i], 0.0);
    }
}

#[test]
fn boundary_spec_validation() {
    let g = GridSpec::unit(2, 8).unwrap();
    assert!(BoundarySpec::new(&g, []).is_err());
    assert!(BoundarySpec::new(&g, [g.index(&[3, 3])]).is_err());
    assert!(BoundarySpec::new(&g, [g.n_nodes()]).is_err());
    assert!(BoundarySpec::new(&g, [0, 1, 1]).unwrap().dirichlet_nodes() == [0, 1]);
}

#[test]
fn non_positive_conductivity_is_rejected() {
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let mut k = vec![1.0; g.n_nodes()];
    k[10] = 0.0;
    let kappa = ScalarField::new(g.clone(), k).unwrap();
    assert!(solver.assemble_stiffness(&kappa).is_err());
}

#[test]
fn cg_reports_non_convergence() {
    let g = GridSpec::unit(2, 16).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let s = SolverSettings {
        max_cg_iters: Some(2),
        ..SolverSettings::default()
    };
    assert!(matches!(
        solver.solve_state(&one, &one, &s),
        Err(IctmError::NotConverged { iterations: 2, .. })
    ));
}

#[test]
fn assembly_matches_dense_oracle() {
    let g = GridSpec::unit(2, 4).unwrap();
    let bc = left_edge(&g);
    let solver = HeatSolver::new(&g, bc.clone()).unwrap();
    let kappa = random_positive(&g, 6, 1.0, 10.0);
    let assembled = solver.assemble_stiffness(&kappa).unwrap().to_dense();

    let n = g.n_nodes();
    let mut dense = vec![vec![0.0; n]; n];
    for tri in oracle_triangles(&g) {
        let (grads, area) = oracle_gradients(&g, &tri);
        let k = tri.iter().map(|&v| kappa.values()[v]).sum::<f64>() / 3.0;
        for a in 0..3 {
            for b in 0..3 {
                dense[tri[a]][tri[b]] +=
                    k * area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if bc.is_dirichlet(i) || bc.is_dirichlet(j) {
                dense[i][j] = if i == j { 1.0 } else { 0.0 };
            }
            assert!(
                (dense[i][j] - assembled[i][j]).abs() <= 1e-14 * 10.0,
                "({i},{j})"
            );
            assert_eq!(assembled[i][j], assembled[j][i]);
        }
    }
}

#[test]
fn constants_are_in_the_interior_kernel() {
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let kappa = random_positive(&g, 7, 1.0, 5.0);
    let a = solver.assemble_stiffness(&kappa).unwrap();
    let y = a.mul_vec(&vec![1.0; g.n_nodes()]);
    for i in 0..g.n_nodes() {
        let c = g.coords(i);
        // Rows whose stencil avoids Dirichlet columns.
        if c[0] >= 2 {
            assert!(y[i].abs() < 1e-12);
        }
    }
}

#[test]
fn gradient_product_examples() {
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let zero = ScalarField::constant(&g, 0.0);
    let f = solver.gradient_product_field(&zero, &zero, 1e-5).unwrap();
    assert!(f.values().iter().all(|&v| v == 0.0));

    let xi = 1e-5;
    let t = ScalarField::from_fn(&g, |x| x[0]);
    let ts = t.map(|v| -(1.0 + xi) * v);
    let f = solver.gradient_product_field(&t, &ts, xi).unwrap();
    for v in f.values() {
        assert!((v + (1.0 + xi / 2.0)).abs() < 1e-12);
    }
}

#[test]
fn gradient_product_matches_oracle() {
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let t = random_positive(&g, 8, -1.0, 1.0);
    let ts = random_positive(&g, 9, -1.0, 1.0);
    let xi = 0.25;
    let fast = solver.gradient_product_field(&t, &ts, xi).unwrap();

    let mut num = vec![0.0; g.n_nodes()];
    let mut den = vec![0.0; g.n_nodes()];
    for tri in oracle_triangles(&g) {
        let (grads, area) = oracle_gradients(&g, &tri);
        let grad = |u: &ScalarField| {
            let mut s = [0.0; 2];
            for a in 0..3 {
                for c in 0..2 {
                    s[c] += u.values()[tri[a]] * grads[a][c];
                }
            }
            s
        };
        let (gt, gs) = (grad(&t), grad(&ts));
        let val = 0.5 * xi * (gt[0] * gt[0] + gt[1] * gt[1]) + gt[0] * gs[0] + gt[1] * gs[1];
        for &v in &tri {
            num[v] += val * area;
            den[v] += area;
        }
    }
    for i in 0..g.n_nodes() {
        let expect = num[i] / den[i];
        assert!(
            (fast.values()[i] - expect).abs() <= 1e-13 * expect.abs().max(1.0),
            "{i}"
        );
    }
}

#[test]
fn energy_identity_holds() {
    for g in [
        GridSpec::unit(2, 20).unwrap(),
        GridSpec::unit(3, 6).unwrap(),
    ] {
        let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
        let kappa = random_positive(&g, 10, 1.0, 10.0);
        let q = random_positive(&g, 11, 1.0, 100.0);
        let s = SolverSettings::default();
        let t = solver.solve_state(&kappa, &q, &s).unwrap();
        let load: f64 = q
            .values()
            .iter()
            .zip(t.values())
            .zip(solver.lumped_mass())
            .map(|((a, b), m)| a * b * m)
            .sum();
        let energy = solver.conduction_energy(&kappa, &t).unwrap();
        assert!(
            (load - energy).abs() <= 10.0 * s.rel_tol * load,
            "{load} {energy}"
        );
    }
}

fn manufactured_error(cells: usize) -> f64 {
    // T = sin(pi x / 2) cos(pi y): zero on x = 0, zero flux elsewhere.
    let g = GridSpec::unit(2, cells).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let exact = |x: [f64; 3]| (0.5 * PI * x[0]).sin() * (PI * x[1]).cos();
    let q = ScalarField::from_fn(&g, |x| 1.25 * PI * PI * exact(x));
    let t = solver
        .solve_state(&ScalarField::constant(&g, 1.0), &q, &tight())
        .unwrap();
    (0..g.n_nodes())
        .map(|i| (t.values()[i] - exact(g.position(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn second_order_convergence() {
    let e32 = manufactured_error(32);
    let e64 = manufactured_error(64);
    let rate = (e32 / e64).log2();
    assert!(rate >= 1.8, "rate {rate} ({e32:.3e} -> {e64:.3e})");
}

#[test]
fn solves_are_deterministic() {
    let g = GridSpec::unit(2, 12).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let kappa = random_positive(&g, 12, 1.0, 10.0);
    let q = random_positive(&g, 13, 1.0, 100.0);
    for p in [Preconditioner::Jacobi, Preconditioner::IncompleteCholesky] {
        let s = SolverSettings {
            preconditioner: p,
            ..SolverSettings::default()
        };
        let a = solver.solve_state(&kappa, &q, &s).unwrap();
        let b = solver.solve_state(&kappa, &q, &s).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn preconditioners_agree() {
    let g = GridSpec::unit(3, 6).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let kappa = random_positive(&g, 14, 1.0, 10.0);
    let q = random_positive(&g, 15, 1.0, 100.0);
    let jac = solver
        .solve_state(&kappa, &q, &SolverSettings::default())
        .unwrap();
    let ic = solver
        .solve_state(
            &kappa,
            &q,
            &SolverSettings {
                preconditioner: Preconditioner::IncompleteCholesky,
                ..SolverSettings::default()
            },
        )
        .unwrap();
    for (a, b) in jac.values().iter().zip(ic.values()) {
        assert!((a - b).abs() <= 1e-8 * jac.max_abs());
    }
}

fn multigrid() -> SolverSettings {
    SolverSettings {
        preconditioner: Preconditioner::Multigrid,
        rel_tol: 1e-10,
        ..SolverSettings::default()
    }
}

// Two-phase conductivity with contrast 10 on a checkerboard of blocks.
fn blocky(grid: &GridSpec) -> ScalarField {
    let vals = (0..grid.n_nodes())
        .map(|i| {
            let odd = grid.coords(i).iter().map(|c| c / 5).sum::<usize>() % 2;
            if odd == 1 {
                10.0
            } else {
                1.0
            }
        })
        .collect();
    ScalarField::new(grid.clone(), vals).unwrap()
}

#[test]
fn multigrid_hierarchy_levels() {
    let g = GridSpec::unit(2, 64).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    // 65^2 -> 33^2 -> stop below 2000 nodes.
    assert_eq!(solver.multigrid().as_ref().unwrap().levels(), 2);
    let g = GridSpec::unit(2, 200).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    assert_eq!(solver.multigrid().as_ref().unwrap().levels(), 4);
    let g = GridSpec::unit(2, 8).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    assert!(solver.multigrid().is_none());
}

#[test]
fn multigrid_matches_ichol_and_converges_fast() {
    for (dim, cells) in [(2, 96), (3, 24)] {
        let g = GridSpec::unit(dim, cells).unwrap();
        let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
        let kappa = blocky(&g);
        let q = random_positive(&g, 21, 1.0, 100.0);
        let rhs = solver.load_vector(&q).unwrap();
        let (mg, stats) = solver
            .system(&kappa, &multigrid())
            .unwrap()
            .solve(&rhs, None)
            .unwrap();
        assert!(
            stats.iterations <= 30,
            "{dim}D multigrid took {} iterations",
            stats.iterations
        );
        let reference = SolverSettings {
            preconditioner: Preconditioner::IncompleteCholesky,
            rel_tol: 1e-11,
            max_cg_iters: Some(20_000),
        };
        let (jac, _) = solver
            .system(&kappa, &reference)
            .unwrap()
            .solve(&rhs, None)
            .unwrap();
        let scale = jac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in mg.iter().zip(&jac) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn multigrid_preconditioner_is_symmetric() {
    let g = GridSpec::unit(2, 80).unwrap();
    let solver = HeatSolver::new(&g, left_edge(&g)).unwrap();
    let matrix = solver.assemble_stiffness(&blocky(&g)).unwrap();
    let p = PreparedPreconditioner::with_hierarchy(
        &matrix,
        Preconditioner::Multigrid,
        solver.multigrid().as_ref(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x: Vec<f64> = (0..g.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y: Vec<f64> = (0..g.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for &i in solver.boundary().dirichlet_nodes() {
        x[i] = 0.0;
        y[i] = 0.0;
    }
    let mut mx = vec![0.0; x.len()];
    let mut my = vec![0.0; y.len()];
    p.apply(&x, &mut mx);
    p.apply(&y, &mut my);
    let a: f64 = y.iter().zip(&mx).map(|(u, v)| u * v).sum();
    let b: f64 = x.iter().zip(&my).map(|(u, v)| u * v).sum();
    assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
    let xmx: f64 = x.iter().zip(&mx).map(|(u, v)| u * v).sum();
    assert!(xmx > 0.0);
}
