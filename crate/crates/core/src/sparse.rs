//! Compressed-row storage for the symmetric matrices produced by assembly.
//! Both triangles are stored.

use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                row[j] = a;
            }
        }
        d
    }
}

/// Sparsity of a nodal field with `block` components per node, plus the
/// scatter map from element matrices into the value array.
#[derive(Debug, Clone)]
pub struct Pattern {
    block: usize,
    template: SparseMatrix,
    /// `scatter[e][a * ndof_e + b]` is the value index of local entry `(a, b)`.
    scatter: Vec<Vec<usize>>,
}

impl Pattern {
    pub fn new(mesh: &Mesh, block: usize) -> Pattern {
        let n = mesh.num_nodes() * block;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for conn in mesh.elements() {
            for &a in conn {
                for &b in conn {
                    for ca in 0..block {
                        for cb in 0..block {
                            adj[a * block + ca].push(b * block + cb);
                        }
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in &mut adj {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        let template = SparseMatrix { n, row_ptr, col_idx, values };
        let ndof = 4 * block;
        let scatter = mesh
            .elements()
            .iter()
            .map(|conn| {
                let dofs: Vec<usize> = conn
                    .iter()
                    .flat_map(|&node| (0..block).map(move |c| node * block + c))
                    .collect();
                let mut map = Vec::with_capacity(ndof * ndof);
                for &i in &dofs {
                    let (cols, _) = template.row(i);
                    let base = template.row_ptr[i];
                    for &j in &dofs {
                        map.push(base + cols.binary_search(&j).expect("pattern covers element"));
                    }
                }
                map
            })
            .collect();
        Pattern { block, template, scatter }
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn zeros(&self) -> SparseMatrix {
        self.template.clone()
    }

    /// Adds a dense element matrix (row-major, `4·block` square).
    pub fn add_element(&self, m: &mut SparseMatrix, e: usize, ke: &[f64]) {
        for (k, &idx) in self.scatter[e].iter().enumerate() {
            m.values[idx] += ke[k];
        }
    }
}
