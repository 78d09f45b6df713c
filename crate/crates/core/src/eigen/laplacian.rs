use crate::domain::Lattice;

/// Compressed sparse row matrix of the (2N+1)-point Dirichlet Laplacian on a
/// lattice. Neighbor slots that are not interior nodes drop out of the
/// stencil, which imposes the homogeneous Dirichlet condition.
#[derive(Debug, Clone)]
pub struct DirichletLaplacian {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl DirichletLaplacian {
    pub fn assemble(lattice: &Lattice) -> Self {
        let slots = lattice.slot_map();
        let n = lattice.indices.len();
        let diag: f64 = lattice.spacing.iter().map(|h| 2.0 / (h * h)).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut neighbor = Vec::with_capacity(lattice.extent.len());
        for idx in &lattice.indices {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * idx.len() + 1);
            row.push((slots[lattice.flat(idx)].unwrap(), diag));
            for (axis, &h) in lattice.spacing.iter().enumerate() {
                let off = -1.0 / (h * h);
                for step in [-1isize, 1] {
                    let Some(i) = idx[axis].checked_add_signed(step) else {
                        continue;
                    };
                    if i >= lattice.extent[axis] {
                        continue;
                    }
                    neighbor.clear();
                    neighbor.extend_from_slice(idx);
                    neighbor[axis] = i;
                    if let Some(q) = slots[lattice.flat(&neighbor)] {
                        row.push((q, off));
                    }
                }
            }
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// y = L x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            *out = self.cols[span.clone()]
                .iter()
                .zip(&self.vals[span])
                .map(|(&c, v)| v * x[c])
                .sum();
        }
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn upper_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| {
                self.vals[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// ‖L x − λ x‖₂.
    pub fn residual(&self, x: &[f64], lambda: f64) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y.iter()
            .zip(x)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
