//! Ordered Dirichlet-Laplacian eigenpairs `(λ_j, e_j)`.
//!
//! Because the Dirichlet Laplacian on a bounded set has pure point spectrum,
//! its spectral measure is fully described by the eigendecomposition; every
//! operator in [`crate::calculus`] is built from the pairs produced here.
//!
//! Boxes have closed-form pairs ([`analytic_box_basis`]). General polygons
//! (and boxes, for cross-validation) use the 5-point finite-difference
//! Laplacian ([`discrete_basis`]). On convex polygons the weak (form-defined)
//! operator coincides with the classical one, which is what justifies the
//! finite-difference approximation; on non-convex polygons the basis is
//! still produced but carries a warning.

mod laplacian;
mod solver;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use log::warn;
use serde::Serialize;

pub use laplacian::DirichletLaplacian;
pub use solver::{smallest_eigenpairs, EigenSolution, SolverOptions, SymmetricOperator};

use crate::domain::{Domain, Shape};
use crate::error::{Error, Result};

/// Eigenvalues closer than this (relative) are treated as one multiplicity
/// cluster when ordering analytic modes.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSource {
    Analytic,
    Discrete,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Eigenfunction samples at the basis domain's quadrature nodes.
    pub values: Vec<f64>,
    /// Mode numbers `(k_1, …, k_N)`, analytic box pairs only.
    pub mode_index: Option<Vec<usize>>,
    /// Relative eigen-residual of the discrete solve (zero for analytic pairs).
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: Domain,
    pairs: Vec<EigenPair>,
    eigenvalues: Vec<f64>,
    source: BasisSource,
    warnings: Vec<String>,
}

impl SpectralBasis {
    /// Builds a basis from arbitrary pairs, checking positivity, ordering and
    /// sample lengths. Orthonormality is not checked; see [`Self::gram_deviation`].
    pub fn from_pairs(domain: Domain, pairs: Vec<EigenPair>) -> Result<Self> {
        Self::new(domain, pairs, BasisSource::Custom, Vec::new())
    }

    fn new(
        domain: Domain,
        pairs: Vec<EigenPair>,
        source: BasisSource,
        warnings: Vec<String>,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidBasis("basis has no eigenpairs".into()));
        }
        for (j, p) in pairs.iter().enumerate() {
            if !(p.lambda > 0.0 && p.lambda.is_finite()) {
                return Err(Error::InvalidBasis(format!(
                    "eigenvalue {} at position {} is not positive",
                    p.lambda,
                    j + 1
                )));
            }
            if p.values.len() != domain.node_count() {
                return Err(Error::LengthMismatch {
                    expected: domain.node_count(),
                    actual: p.values.len(),
                });
            }
        }
        if let Some(j) = pairs.windows(2).position(|w| w[1].lambda < w[0].lambda) {
            return Err(Error::InvalidBasis(format!(
                "eigenvalues are not nondecreasing at position {}",
                j + 2
            )));
        }
        let eigenvalues = pairs.iter().map(|p| p.lambda).collect();
        Ok(Self {
            domain,
            pairs,
            eigenvalues,
            source,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The domain whose nodes the eigenfunctions are sampled on. For a
    /// discrete basis on a box this is the vertex lattice, not the input box.
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn source(&self) -> BasisSource {
        self.source
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// G[i][j] = ∫ e_i e_j under the domain quadrature.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let w = self.domain.weights();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(w).map(|((x, y), q)| x * y * q).sum()
        };
        self.pairs
            .iter()
            .map(|a| self.pairs.iter().map(|b| dot(&a.values, &b.values)).collect())
            .collect()
    }

    /// max |G − I|.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.gram_matrix().iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    lambda: f64,
    index: Vec<usize>,
}

impl Eq for Mode {}

impl Ord for Mode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so that BinaryHeap pops the smallest eigenvalue first.
        other
            .lambda
            .total_cmp(&self.lambda)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Mode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `count` smallest box eigenpairs λ = Σ (k_i π / L_i)²,
/// e = ∏ √(2/L_i) sin(k_i π x_i / L_i), sampled on the box's midpoint nodes.
///
/// Equal eigenvalues are ordered by lexicographic mode tuple.
pub fn analytic_box_basis(domain: &Domain, count: usize) -> Result<SpectralBasis> {
    let Shape::Box { lengths } = domain.shape() else {
        return Err(Error::InvalidArgument(
            "analytic eigenpairs are only available on boxes".into(),
        ));
    };
    if count == 0 {
        return Err(Error::InvalidArgument("basis size J must be at least 1".into()));
    }
    let wave: Vec<f64> = lengths.iter().map(|l| std::f64::consts::PI / l).collect();
    let eigenvalue = |index: &[usize]| -> f64 {
        index
            .iter()
            .zip(&wave)
            .map(|(&k, c)| (k as f64 * c).powi(2))
            .sum()
    };

    let start = vec![1; lengths.len()];
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(Mode {
        lambda: eigenvalue(&start),
        index: start.clone(),
    });
    seen.insert(start);
    let mut modes: Vec<Mode> = Vec::with_capacity(count);
    while let Some(mode) = heap.pop() {
        if modes.len() >= count {
            let last = modes[count - 1].lambda;
            if mode.lambda > last * (1.0 + TIE_TOLERANCE) {
                break;
            }
        }
        for axis in 0..mode.index.len() {
            let mut next = mode.index.clone();
            next[axis] += 1;
            if seen.insert(next.clone()) {
                heap.push(Mode {
                    lambda: eigenvalue(&next),
                    index: next,
                });
            }
        }
        modes.push(mode);
    }
    sort_with_ties(&mut modes);
    modes.truncate(count);

    let mut warnings = Vec::new();
    if let Some(n) = domain.nodes_per_axis() {
        if modes.iter().flat_map(|m| &m.index).any(|&k| k >= n) {
            let msg = format!(
                "mode numbers reach the quadrature resolution ({n} nodes per axis); sampled eigenfunctions alias"
            );
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let amplitude: f64 = lengths.iter().map(|l| (2.0 / l).sqrt()).product();
    let pairs = modes
        .into_iter()
        .map(|m| {
            let values = domain.sample(|x| {
                amplitude
                    * x.iter()
                        .zip(&m.index)
                        .zip(&wave)
                        .map(|((xi, &k), c)| (k as f64 * c * xi).sin())
                        .product::<f64>()
            });
            EigenPair {
                lambda: m.lambda,
                values,
                mode_index: Some(m.index),
                residual: 0.0,
            }
        })
        .collect();
    SpectralBasis::new(domain.clone(), pairs, BasisSource::Analytic, warnings)
}

fn sort_with_ties(modes: &mut [Mode]) {
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len()
            && modes[end].lambda <= modes[start].lambda * (1.0 + TIE_TOLERANCE)
        {
            end += 1;
        }
        // Mathematically equal eigenvalues can differ in the last bit; the
        // cluster shares its smallest representative.
        let shared = modes[start].lambda;
        modes[start..end].sort_by(|a, b| a.index.cmp(&b.index));
        for m in &mut modes[start..end] {
            m.lambda = shared;
        }
        start = end;
    }
}

pub fn discrete_basis(domain: &Domain, count: usize) -> Result<SpectralBasis> {
    discrete_basis_with(domain, count, &SolverOptions::default())
}

/// The `count` smallest eigenpairs of the finite-difference Dirichlet
/// Laplacian on the domain's lattice, normalized so Σ w_q e(x_q)² = 1 and
/// signed to be nonnegative at the node nearest the centroid.
pub fn discrete_basis_with(
    domain: &Domain,
    count: usize,
    opts: &SolverOptions,
) -> Result<SpectralBasis> {
    if count == 0 {
        return Err(Error::InvalidArgument("basis size J must be at least 1".into()));
    }
    let grid = domain.to_lattice()?;
    let lattice = grid.lattice().expect("to_lattice always attaches a lattice");
    let laplacian = DirichletLaplacian::assemble(lattice);
    if count > laplacian.dim() {
        return Err(Error::InvalidArgument(format!(
            "J = {count} exceeds the {} interior grid nodes",
            laplacian.dim()
        )));
    }

    let mut warnings = Vec::new();
    if !grid.is_convex() {
        let msg = "domain is not convex: the weak Dirichlet Laplacian need not coincide with the classical one, so the finite-difference spectrum is only heuristic".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }

    let solution = smallest_eigenpairs(&laplacian, count, opts)?;
    // Lattice weights are uniform.
    let scale = 1.0 / grid.weights()[0].sqrt();
    let anchor = grid.nearest_node(&grid.centroid());
    let pairs = solution
        .values
        .iter()
        .zip(solution.vectors)
        .zip(&solution.residuals)
        .map(|((&lambda, v), &residual)| {
            let sign = orientation(&v, anchor);
            EigenPair {
                lambda,
                values: v.iter().map(|x| sign * scale * x).collect(),
                mode_index: None,
                residual,
            }
        })
        .collect();
    SpectralBasis::new(grid, pairs, BasisSource::Discrete, warnings)
}

/// +1 or −1 so that the anchor sample (or, if it vanishes, the first
/// significant sample) becomes positive.
fn orientation(v: &[f64], anchor: usize) -> f64 {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let significant = |x: f64| x.abs() > 1e-8 * peak;
    let pivot = if significant(v[anchor]) {
        v[anchor]
    } else {
        v.iter().copied().find(|&x| significant(x)).unwrap_or(1.0)
    };
    if pivot < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub j: usize,
    pub lambda: f64,
    /// Richardson-extrapolated limit for this eigenvalue index.
    pub limit: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Observed order per eigenvalue index from the three finest spacings;
    /// `None` when the differences are not monotone.
    pub orders: Vec<Option<f64>>,
    pub limits: Vec<f64>,
}

/// Runs [`discrete_basis`] across grid spacings and Richardson-extrapolates
/// each of the first `count` eigenvalues.
///
/// A box is refined by setting `nodes_per_axis = L_1 / h`, which must be an
/// integer; other axes scale proportionally.
pub fn eigen_convergence_report(
    domain: &Domain,
    count: usize,
    spacings: &[f64],
) -> Result<ConvergenceReport> {
    if spacings.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "convergence study needs at least 3 grid spacings, got {}",
            spacings.len()
        )));
    }
    let mut hs = spacings.to_vec();
    if hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("grid spacings must be positive".into()));
    }
    hs.sort_by(|a, b| b.total_cmp(a));
    if hs.windows(2).any(|w| w[0] <= w[1] * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(
            "grid spacings must be distinct (order is undefined for repeated spacings)".into(),
        ));
    }

    let mut spectra = Vec::with_capacity(hs.len());
    for &h in &hs {
        let refined = refine(domain, h)?;
        let basis = discrete_basis(&refined, count)?;
        spectra.push(basis.eigenvalues().to_vec());
    }

    let k = hs.len();
    let (h1, h2, h3) = (hs[k - 3], hs[k - 2], hs[k - 1]);
    let mut orders = Vec::with_capacity(count);
    let mut limits = Vec::with_capacity(count);
    for j in 0..count {
        let (l1, l2, l3) = (spectra[k - 3][j], spectra[k - 2][j], spectra[k - 1][j]);
        let order = richardson_order(h1, h2, h3, l1, l2, l3);
        let limit = match order {
            Some(p) => l3 - (l2 - l3) * h3.powf(p) / (h2.powf(p) - h3.powf(p)),
            None => l3,
        };
        orders.push(order);
        limits.push(limit);
    }

    let mut rows = Vec::with_capacity(count * k);
    for (i, &h) in hs.iter().enumerate() {
        for j in 0..count {
            let lambda = spectra[i][j];
            rows.push(ConvergenceRow {
                h,
                j: j + 1,
                lambda,
                limit: limits[j],
                error: (lambda - limits[j]).abs(),
            });
        }
    }
    Ok(ConvergenceReport {
        rows,
        orders,
        limits,
    })
}

fn refine(domain: &Domain, h: f64) -> Result<Domain> {
    match domain.shape() {
        Shape::Polygon2d { vertices } => Domain::make_polygon2d(vertices, h),
        Shape::Box { lengths } => {
            let n = (lengths[0] / h).round();
            if n < 2.0 || (n * h - lengths[0]).abs() > 1e-9 * lengths[0] {
                return Err(Error::InvalidArgument(format!(
                    "spacing {h} does not divide the box side {}",
                    lengths[0]
                )));
            }
            Domain::make_box_with_resolution(lengths, n as usize)
        }
    }
}

/// Solves (l1 − l2)/(l2 − l3) = (h1^p − h2^p)/(h2^p − h3^p) for p.
fn richardson_order(h1: f64, h2: f64, h3: f64, l1: f64, l2: f64, l3: f64) -> Option<f64> {
    let (d12, d23) = (l1 - l2, l2 - l3);
    if d23 == 0.0 || d12 / d23 <= 1.0 {
        return None;
    }
    let target = d12 / d23;
    let (r12, r23) = (h1 / h2, h2 / h3);
    if (r12 - r23).abs() <= 1e-9 * r23 {
        return Some(target.ln() / r23.ln());
    }
    let ratio = |p: f64| (h1.powf(p) - h2.powf(p)) / (h2.powf(p) - h3.powf(p));
    let (mut lo, mut hi) = (1e-3, 20.0);
    if !(ratio(lo) - target).is_sign_negative() || (ratio(hi) - target).is_sign_negative() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_pi_square_spectrum() {
        let d = Domain::make_box(&[PI, PI]).unwrap();
        let b = analytic_box_basis(&d, 1).unwrap();
        assert_eq!(b.eigenvalues(), &[2.0]);
        assert_eq!(b.pairs()[0].mode_index.as_deref(), Some(&[1, 1][..]));

        let b = analytic_box_basis(&d, 3).unwrap();
        assert_eq!(b.eigenvalues(), &[2.0, 5.0, 5.0]);
        let modes: Vec<_> = b.pairs().iter().map(|p| p.mode_index.clone().unwrap()).collect();
        assert_eq!(modes, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn interval_spectrum_and_functions() {
        let d = Domain::make_box(&[PI]).unwrap();
        let b = analytic_box_basis(&d, 3).unwrap();
        assert_eq!(b.eigenvalues(), &[1.0, 4.0, 9.0]);
        for (j, pair) in b.pairs().iter().enumerate() {
            let k = (j + 1) as f64;
            for (x, v) in d.nodes().zip(&pair.values) {
                let expected = (2.0 / PI).sqrt() * (k * x[0]).sin();
                assert!((v - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn analytic_basis_is_orthonormal() {
        let d = Domain::make_box_with_resolution(&[1.0, 2.0], 32).unwrap();
        let b = analytic_box_basis(&d, 20).unwrap();
        assert!(b.gram_deviation() < 1e-6, "{}", b.gram_deviation());
        assert!(b.warnings().is_empty());
    }

    #[test]
    fn analytic_basis_matches_brute_force_enumeration() {
        let d = Domain::make_box_with_resolution(&[1.0, 1.5, 2.0], 8).unwrap();
        let b = analytic_box_basis(&d, 30).unwrap();
        let mut all = Vec::new();
        for i in 1..12 {
            for j in 1..12 {
                for k in 1..12 {
                    let lam = (i as f64 * PI).powi(2)
                        + (j as f64 * PI / 1.5).powi(2)
                        + (k as f64 * PI / 2.0).powi(2);
                    all.push(lam);
                }
            }
        }
        all.sort_by(f64::total_cmp);
        for (got, want) in b.eigenvalues().iter().zip(&all) {
            assert!((got - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn aliasing_is_flagged() {
        let d = Domain::make_box_with_resolution(&[PI], 4).unwrap();
        let b = analytic_box_basis(&d, 6).unwrap();
        assert!(!b.warnings().is_empty());
    }

    #[test]
    fn analytic_requires_box() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let d = Domain::make_polygon2d(&sq, 0.1).unwrap();
        assert!(analytic_box_basis(&d, 1).is_err());
    }

    #[test]
    fn discrete_box_matches_exact_stencil_spectrum() {
        // The 5-point eigenvalues on a box lattice are known in closed form:
        // Σ (4/h²) sin²(k h / 2) for L = π.
        let d = Domain::make_box_with_resolution(&[PI, PI], 32).unwrap();
        let b = discrete_basis(&d, 6).unwrap();
        let h = PI / 32.0;
        let s = |k: f64| 4.0 / (h * h) * (k * h / 2.0).sin().powi(2);
        let expected = [
            2.0 * s(1.0),
            s(1.0) + s(2.0),
            s(1.0) + s(2.0),
            2.0 * s(2.0),
            s(1.0) + s(3.0),
            s(1.0) + s(3.0),
        ];
        for (got, want) in b.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        }
        assert!(b.gram_deviation() < 1e-8);
        assert_eq!(b.source(), BasisSource::Discrete);
    }

    #[test]
    fn discrete_eigenvectors_have_small_residuals() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let d = Domain::make_polygon2d(&sq, 1.0 / 32.0).unwrap();
        let b = discrete_basis(&d, 4).unwrap();
        let lap = DirichletLaplacian::assemble(b.domain().lattice().unwrap());
        for p in b.pairs() {
            let norm = p.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(lap.residual(&p.values, p.lambda) <= 1e-8 * norm);
        }
        // Ground state is positive at the centroid.
        let anchor = b.domain().nearest_node(&[0.5, 0.5]);
        assert!(b.pairs()[0].values[anchor] > 0.0);
    }

    #[test]
    fn l_shape_still_produces_a_basis() {
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let d = Domain::make_polygon2d(&l, 0.1).unwrap();
        let b = discrete_basis(&d, 3).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.warnings().iter().any(|w| w.contains("not convex")));
    }

    #[test]
    fn discrete_rejects_oversized_request() {
        let d = Domain::make_box_with_resolution(&[1.0], 4).unwrap();
        assert!(discrete_basis(&d, 4).is_err());
        assert!(discrete_basis(&d, 3).is_ok());
    }

    #[test]
    fn from_pairs_validates() {
        let d = Domain::make_box_with_resolution(&[1.0], 2).unwrap();
        let pair = |lambda: f64| EigenPair {
            lambda,
            values: vec![1.0, 1.0],
            mode_index: None,
            residual: 0.0,
        };
        assert!(SpectralBasis::from_pairs(d.clone(), vec![pair(2.0), pair(1.0)]).is_err());
        assert!(SpectralBasis::from_pairs(d.clone(), vec![pair(0.0)]).is_err());
        assert!(SpectralBasis::from_pairs(d, vec![pair(0.5), pair(2.0)]).is_ok());
    }

    #[test]
    fn convergence_needs_three_distinct_spacings() {
        let d = Domain::make_box(&[PI]).unwrap();
        assert!(eigen_convergence_report(&d, 1, &[0.1, 0.05]).is_err());
        let h = PI / 16.0;
        assert!(eigen_convergence_report(&d, 1, &[h, h, h]).is_err());
        assert!(eigen_convergence_report(&d, 1, &[0.3, 0.2, 0.1]).is_err());
    }

    #[test]
    fn interval_second_eigenvalue_and_order() {
        let d = Domain::make_box(&[PI]).unwrap();
        let report =
            eigen_convergence_report(&d, 2, &[PI / 32.0, PI / 64.0, PI / 128.0]).unwrap();
        let finest = report.rows.iter().find(|r| r.j == 2 && r.h == PI / 128.0).unwrap();
        assert!((finest.lambda - 4.0).abs() / 4.0 < 0.005);
        let p = report.orders[1].unwrap();
        assert!((1.8..=2.2).contains(&p), "order {p}");
        assert!((report.limits[1] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn richardson_recovers_known_order() {
        let f = |h: f64| 3.0 + 0.7 * h.powf(2.0);
        let p = richardson_order(0.4, 0.25, 0.1, f(0.4), f(0.25), f(0.1)).unwrap();
        assert!((p - 2.0).abs() < 1e-8);
        assert!(richardson_order(0.4, 0.2, 0.1, 1.0, 1.0, 1.0).is_none());
    }
}
