use super::mesh::Triangulation;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub(crate) fn from_parts(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Self {
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.col_idx[p] as usize];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c as usize] = v;
            }
        }
        d
    }
}

/// Sparsity of the P1 stiffness matrix plus, for every element, the CSR slot
/// of each local entry so repeated assemblies skip the search.
#[derive(Debug, Clone)]
pub struct StiffnessPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    slots: Vec<u32>,
}

impl StiffnessPattern {
    pub(crate) fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub(crate) fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn new(tri: &Triangulation) -> Self {
        let n = tri.grid().n_nodes();
        let arity = tri.arity();
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for e in 0..tri.n_elements() {
            let verts = tri.element(e);
            for &a in verts {
                rows[a as usize].extend_from_slice(verts);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        drop(rows);

        let mut slots = Vec::with_capacity(tri.n_elements() * arity * arity);
        for e in 0..tri.n_elements() {
            let verts = tri.element(e);
            for &a in verts {
                let r = row_ptr[a as usize]..row_ptr[a as usize + 1];
                for &b in verts {
                    let p = col_idx[r.clone()]
                        .binary_search(&b)
                        .expect("pattern holds every element pair");
                    slots.push((r.start + p) as u32);
                }
            }
        }
        Self {
            n,
            row_ptr,
            col_idx,
            slots,
        }
    }

    /// Assembles `sum_e coeff_e * K_e`, then eliminates the masked rows and
    /// columns symmetrically, leaving a unit diagonal on them.
    pub fn assemble(
        &self,
        tri: &Triangulation,
        element_coeff: &[f64],
        dirichlet: &[bool],
    ) -> CsrMatrix {
        let arity = tri.arity();
        let block = arity * arity;
        let mut values = vec![0.0; self.col_idx.len()];
        for (e, &coeff) in element_coeff.iter().enumerate() {
            let local = &tri.reference(e).stiffness;
            let slots = &self.slots[e * block..(e + 1) * block];
            for (&s, &k) in slots.iter().zip(local) {
                values[s as usize] += coeff * k;
            }
        }
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p] as usize;
                if dirichlet[i] || dirichlet[j] {
                    values[p] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }
}
