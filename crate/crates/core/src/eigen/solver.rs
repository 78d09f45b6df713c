//! Smallest eigenpairs of a large sparse symmetric operator by
//! Chebyshev-filtered subspace iteration with Rayleigh–Ritz projection.
//!
//! Each outer iteration applies a degree-`d` Chebyshev polynomial in the
//! operator that damps the interval `[a, b]` (from the largest current Ritz
//! value to a Gershgorin bound) and amplifies everything below it, then
//! re-orthonormalizes the block and rotates it onto Ritz vectors. Working on
//! a block of `J + guard` vectors resolves repeated eigenvalues, which a
//! single-vector Krylov method cannot.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Problems at or below this size are solved densely.
const DENSE_LIMIT: usize = 300;

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Any upper bound on the largest eigenvalue.
    fn upper_bound(&self) -> f64;
}

impl SymmetricOperator for super::DirichletLaplacian {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply(x, y)
    }

    fn upper_bound(&self) -> f64 {
        self.upper_bound()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Accept a pair once ‖A x − θ x‖₂ ≤ tol · ‖x‖₂.
    pub tol: f64,
    pub degree: usize,
    /// Outer-iteration cap; `None` uses 10 · J · √n.
    pub max_iterations: Option<usize>,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            degree: 20,
            max_iterations: None,
            seed: 0x5e_ed0f_e16e,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    /// Unit-length (Euclidean) eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals ‖A x − θ x‖₂ / ‖x‖₂.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

pub fn smallest_eigenpairs<A: SymmetricOperator>(
    op: &A,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    let n = op.dim();
    if count == 0 {
        return Err(Error::InvalidArgument("number of eigenpairs must be positive".into()));
    }
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenpairs but the operator has dimension {n}"
        )));
    }
    let guard = (count / 2).max(6);
    let block = count + guard;
    if n <= DENSE_LIMIT || block >= n {
        return dense(op, count);
    }
    let cap = opts
        .max_iterations
        .unwrap_or_else(|| ((10 * count) as f64 * (n as f64).sqrt()).ceil() as usize)
        .max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = DMatrix::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    let mut x = orthonormalize(start);
    let (mut theta, _) = rayleigh_ritz(op, &mut x);
    let upper = op.upper_bound();

    let mut worst = f64::INFINITY;
    for iteration in 1..=cap {
        let cut = theta[block - 1];
        let lowest = theta[0];
        let y = chebyshev_filter(op, &x, opts.degree, cut, upper, lowest);
        x = orthonormalize(y);
        let (ritz, ax) = rayleigh_ritz(op, &mut x);
        theta = ritz;
        let residuals = column_residuals(&x, &ax, &theta, count);
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok(collect(&x, &theta, residuals, count, iteration));
        }
    }
    Err(Error::EigenNonConvergence {
        iterations: cap,
        residual: worst,
    })
}

fn dense<A: SymmetricOperator>(op: &A, count: usize) -> Result<EigenSolution> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let order = ascending(eig.eigenvalues.as_slice());
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lambda = eig.eigenvalues[k];
        op.apply(&v, &mut col);
        let r = col
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        values.push(lambda);
        vectors.push(v);
        residuals.push(r);
    }
    Ok(EigenSolution {
        values,
        vectors,
        residuals,
        iterations: 1,
    })
}

fn block_apply<A: SymmetricOperator>(op: &A, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, x.ncols());
    for (src, dst) in x
        .as_slice()
        .chunks_exact(n)
        .zip(out.as_mut_slice().chunks_exact_mut(n))
    {
        op.apply(src, dst);
    }
    out
}

/// Scaled three-term Chebyshev recurrence damping `[cut, upper]`,
/// normalized so that the value at `lowest` stays near one.
fn chebyshev_filter<A: SymmetricOperator>(
    op: &A,
    x: &DMatrix<f64>,
    degree: usize,
    cut: f64,
    upper: f64,
    lowest: f64,
) -> DMatrix<f64> {
    let half_width = 0.5 * (upper - cut);
    let center = 0.5 * (upper + cut);
    if half_width <= 0.0 || lowest >= cut {
        return x.clone();
    }
    let mut sigma = half_width / (lowest - center);
    let tau = 2.0 / sigma;
    let mut prev = x.clone();
    let mut cur = (block_apply(op, x) - x * center) * (sigma / half_width);
    for _ in 1..degree {
        let next_sigma = 1.0 / (tau - sigma);
        let next = (block_apply(op, &cur) - &cur * center) * (2.0 * next_sigma / half_width)
            - &prev * (sigma * next_sigma);
        prev = cur;
        cur = next;
        sigma = next_sigma;
    }
    cur
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    // Two Householder passes keep the block orthonormal to working precision.
    let q = m.qr().q();
    q.qr().q()
}

/// Rotates `x` onto the Ritz vectors of its span; returns sorted Ritz values
/// and the operator applied to the rotated block.
fn rayleigh_ritz<A: SymmetricOperator>(op: &A, x: &mut DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let ax = block_apply(op, x);
    let h = x.transpose() * &ax;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let order = ascending(eig.eigenvalues.as_slice());
    let p = order.len();
    let mut rot = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        rot.set_column(dst, &eig.eigenvectors.column(src));
    }
    let theta = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    *x = &*x * &rot;
    (theta, ax * rot)
}

fn column_residuals(x: &DMatrix<f64>, ax: &DMatrix<f64>, theta: &[f64], count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let r = ax.column(j) - x.column(j) * theta[j];
            r.norm() / x.column(j).norm()
        })
        .collect()
}

fn collect(
    x: &DMatrix<f64>,
    theta: &[f64],
    residuals: Vec<f64>,
    count: usize,
    iterations: usize,
) -> EigenSolution {
    EigenSolution {
        values: theta[..count].to_vec(),
        vectors: (0..count)
            .map(|j| {
                let c = x.column(j);
                let norm = c.norm();
                c.iter().map(|v| v / norm).collect()
            })
            .collect(),
        residuals,
        iterations,
    }
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Diagonal operator with a prescribed spectrum, including repeats.
    struct Diagonal(Vec<f64>);

    impl SymmetricOperator for Diagonal {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for ((o, d), v) in y.iter_mut().zip(&self.0).zip(x) {
                *o = d * v;
            }
        }
        fn upper_bound(&self) -> f64 {
            self.0.iter().cloned().fold(0.0, f64::max)
        }
    }

    #[test]
    fn recovers_repeated_eigenvalues() {
        let mut diag: Vec<f64> = (0..1000).map(|i| 10.0 + i as f64).collect();
        diag[500] = 1.0;
        diag[700] = 1.0;
        diag[900] = 1.0;
        diag[10] = 2.0;
        let op = Diagonal(diag);
        let sol = smallest_eigenpairs(&op, 5, &SolverOptions::default()).unwrap();
        let expected = [1.0, 1.0, 1.0, 2.0, 10.0];
        for (got, want) in sol.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(sol.residuals.iter().all(|r| *r <= 1e-8));
    }

    #[test]
    fn rejects_too_many_pairs() {
        let op = Diagonal(vec![1.0, 2.0]);
        assert!(smallest_eigenpairs(&op, 3, &SolverOptions::default()).is_err());
        assert!(smallest_eigenpairs(&op, 0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let diag: Vec<f64> = (1..=2000).map(|i| i as f64).collect();
        let opts = SolverOptions {
            max_iterations: Some(1),
            degree: 2,
            ..SolverOptions::default()
        };
        match smallest_eigenpairs(&Diagonal(diag), 4, &opts) {
            Err(Error::EigenNonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-8);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
