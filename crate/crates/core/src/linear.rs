//! The linear problem w²(A) u = g.
//!
//! The basis diagonalizes w²(A), so the solve is a coefficientwise division.
//! What this module adds is certification: the strong residual is measured
//! on the grid, the weak (bilinear-form) residual in coefficient space, and
//! the two must classify every candidate the same way.

use serde::Serialize;

use crate::calculus::{apply_inverse_sq, apply_poly, m_beta, FractionalPolynomial, SpectralFunction};
use crate::error::{Error, Result};

/// Classification tolerance 1e-8 · max(1, ‖g‖_{L²}).
pub fn default_tolerance(g: &SpectralFunction) -> f64 {
    1e-8 * g.l2_norm().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseBound {
    pub solution_norm: f64,
    /// (√M_{2β_k} / α_k²) · ‖g‖_{L²}.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct LinearSolveReport {
    pub solution: SpectralFunction,
    pub strong_residual: f64,
    pub weak_residual_max: f64,
    pub inverse_bound: InverseBound,
    pub equivalent: bool,
}

pub fn solve_linear(g: &SpectralFunction, w: &FractionalPolynomial) -> Result<LinearSolveReport> {
    let solution = apply_inverse_sq(g, w)?;
    let strong_residual = strong_residual(&solution, g, w)?;
    let weak_residual_max = weak_residual(&solution, g, w, g.coeffs().len())?;
    let inverse_bound = inverse_bound(&solution, g, w);
    let equivalent = equivalence_check(&solution, g, w)?;
    Ok(LinearSolveReport {
        solution,
        strong_residual,
        weak_residual_max,
        inverse_bound,
        equivalent,
    })
}

/// ‖w²(A)u − g‖_{L²}, measured by quadrature on the synthesized grid samples.
pub fn strong_residual(u: &SpectralFunction, g: &SpectralFunction, w: &FractionalPolynomial) -> Result<f64> {
    let lhs = apply_poly(&apply_poly(u, w), w);
    let diff = lhs.sub(g)?.synthesize();
    let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
    Ok(u.basis().domain().integrate(&sq)?.max(0.0).sqrt())
}

/// Weak-form defect against each test function, r_m = ∫ w(A)u w(A)e_m − ∫ g e_m.
fn weak_defects(u: &SpectralFunction, g: &SpectralFunction, w: &FractionalPolynomial) -> Result<Vec<f64>> {
    if !u.same_basis(g) {
        return Err(Error::BasisMismatch);
    }
    Ok(u.coeffs()
        .iter()
        .zip(g.coeffs())
        .zip(u.basis().eigenvalues())
        .map(|((&a, &b), &l)| w.eval_sq(l) * a - b)
        .collect())
}

/// max over v ∈ {e_1, …, e_m} of |∫ w(A)u w(A)v − ∫ g v|.
pub fn weak_residual(
    u: &SpectralFunction,
    g: &SpectralFunction,
    w: &FractionalPolynomial,
    test_count: usize,
) -> Result<f64> {
    if test_count > u.coeffs().len() {
        return Err(Error::InvalidArgument(format!(
            "test_count {test_count} exceeds basis size {}",
            u.coeffs().len()
        )));
    }
    Ok(weak_defects(u, g, w)?[..test_count]
        .iter()
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// sup over unit-norm test functions v in the truncated space of the weak
/// defect; by Riesz this is the ℓ² norm of the per-mode defects.
pub fn weak_residual_dual(u: &SpectralFunction, g: &SpectralFunction, w: &FractionalPolynomial) -> Result<f64> {
    Ok(weak_defects(u, g, w)?
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt())
}

/// Strong and weak solutions coincide: both residuals must fall on the same
/// side of the tolerance.
pub fn equivalence_check(u: &SpectralFunction, g: &SpectralFunction, w: &FractionalPolynomial) -> Result<bool> {
    let tol = default_tolerance(g);
    let strong = strong_residual(u, g, w)? <= tol;
    let weak = weak_residual_dual(u, g, w)? <= tol;
    Ok(strong == weak)
}

pub fn inverse_bound(u: &SpectralFunction, g: &SpectralFunction, w: &FractionalPolynomial) -> InverseBound {
    let lead = w.leading();
    let m = m_beta(u.basis().eigenvalues(), 2.0 * lead.beta);
    let bound = m.sqrt() / (lead.alpha * lead.alpha) * g.l2_norm();
    let solution_norm = u.l2_norm();
    InverseBound {
        solution_norm,
        bound,
        holds: solution_norm <= bound + 1e-10,
    }
}

/// Singular values μ_j = 1 / w²(λ_j) of the inverse map, in basis order.
pub fn inverse_spectrum(eigenvalues: &[f64], w: &FractionalPolynomial) -> Vec<f64> {
    eigenvalues.iter().map(|&l| 1.0 / w.eval_sq(l)).collect()
}
