use crate::grid::GridSpec;

/// A simplex shape shared by every element of one orientation class.
///
/// On a uniform grid each cell is split the same way, so gradients, volume
/// and the unit-coefficient local stiffness only depend on which of the
/// `d!` Kuhn simplices an element is.
#[derive(Debug, Clone)]
pub struct ReferenceSimplex {
    pub gradients: Vec<[f64; 3]>,
    pub volume: f64,
    /// Row-major `(d+1) x (d+1)` matrix `volume * grad_a . grad_b`.
    pub stiffness: Vec<f64>,
}

/// Kuhn triangulation of a uniform grid: 2 triangles per square in 2D and
/// 6 tetrahedra per cube in 3D, all sharing the main cell diagonal.
#[derive(Debug, Clone)]
pub struct Triangulation {
    grid: GridSpec,
    vertices: Vec<u32>,
    kinds: Vec<u8>,
    reference: Vec<ReferenceSimplex>,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
    }
}

// Inverse of a small dense matrix by Gauss-Jordan with partial pivoting.
fn invert(d: usize, m: &[[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let mut a = *m;
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate().take(d) {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for k in 0..d {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                for k in 0..d {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    (inv, det)
}

impl ReferenceSimplex {
    fn from_offsets(d: usize, offsets: &[[f64; 3]]) -> Self {
        // Jacobian columns are the edge vectors from vertex 0.
        let mut jac = [[0.0; 3]; 3];
        for r in 1..=d {
            for row in 0..d {
                jac[row][r - 1] = offsets[r][row] - offsets[0][row];
            }
        }
        let (inv, det) = invert(d, &jac);
        let factorial = if d == 2 { 2.0 } else { 6.0 };
        let volume = det.abs() / factorial;
        // Barycentric lambda_r (r >= 1) has gradient equal to row r-1 of J^{-1}.
        let mut gradients = vec![[0.0; 3]; d + 1];
        for r in 1..=d {
            for c in 0..d {
                gradients[r][c] = inv[r - 1][c];
                gradients[0][c] -= inv[r - 1][c];
            }
        }
        let n = d + 1;
        let mut stiffness = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..d).map(|c| gradients[a][c] * gradients[b][c]).sum();
                stiffness[a * n + b] = volume * dot;
            }
        }
        Self {
            gradients,
            volume,
            stiffness,
        }
    }
}

impl Triangulation {
    pub fn new(grid: &GridSpec) -> Self {
        let d = grid.dim();
        let perms = permutations(d);
        let h = grid.h();
        let reference = perms
            .iter()
            .map(|perm| {
                let mut offsets = vec![[0.0; 3]; d + 1];
                for r in 1..=d {
                    offsets[r] = offsets[r - 1];
                    offsets[r][perm[r - 1]] += h[perm[r - 1]];
                }
                ReferenceSimplex::from_offsets(d, &offsets)
            })
            .collect();

        let cells = grid.cells();
        let (mx, my, mz) = (cells[0], cells[1], if d == 3 { cells[2] } else { 1 });
        let n_elem = grid.n_cells() * perms.len();
        let mut vertices = Vec::with_capacity(n_elem * (d + 1));
        let mut kinds = Vec::with_capacity(n_elem);
        for k in 0..mz {
            for j in 0..my {
                for i in 0..mx {
                    for (t, perm) in perms.iter().enumerate() {
                        let mut c = [i, j, k];
                        vertices.push(grid.index(&c[..d]) as u32);
                        for &axis in perm {
                            c[axis] += 1;
                            vertices.push(grid.index(&c[..d]) as u32);
                        }
                        kinds.push(t as u8);
                    }
                }
            }
        }
        Self {
            grid: grid.clone(),
            vertices,
            kinds,
            reference,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_elements(&self) -> usize {
        self.kinds.len()
    }

    /// Vertices per element (`d + 1`).
    pub fn arity(&self) -> usize {
        self.grid.dim() + 1
    }

    pub fn element(&self, e: usize) -> &[u32] {
        let n = self.arity();
        &self.vertices[e * n..(e + 1) * n]
    }

    pub fn reference(&self, e: usize) -> &ReferenceSimplex {
        &self.reference[self.kinds[e] as usize]
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.reference(e).volume
    }

    /// Constant gradient of a P1 field on element `e`.
    pub fn gradient(&self, e: usize, values: &[f64]) -> [f64; 3] {
        let r = self.reference(e);
        let mut g = [0.0; 3];
        for (a, &v) in self.element(e).iter().enumerate() {
            let u = values[v as usize];
            for c in 0..self.grid.dim() {
                g[c] += u * r.gradients[a][c];
            }
        }
        g
    }

    /// Arithmetic mean of nodal values over the element's vertices.
    pub fn element_mean(&self, e: usize, values: &[f64]) -> f64 {
        let verts = self.element(e);
        verts.iter().map(|&v| values[v as usize]).sum::<f64>() / verts.len() as f64
    }
}
