//! Functional calculus of the Dirichlet Laplacian in coefficient space.
//!
//! A function `u = Σ a_j e_j` is stored as its coefficient vector. Any Borel
//! function `b` of the operator acts diagonally, `b(A) u = Σ b(λ_j) a_j e_j`,
//! so fractional powers, fractional polynomials and their inverses are all
//! elementwise multiplications. Grid samples only appear when a function is
//! synthesized or projected at the boundary of this module.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigen::SpectralBasis;
use crate::error::{Error, Result};

pub const DEFAULT_DECAY_THRESHOLD: f64 = 0.01;

/// λ^β as exp(β ln λ) for λ > 0; 0^β follows `powf` (0^0 = 1).
#[inline]
pub fn power(lambda: f64, beta: f64) -> f64 {
    if lambda > 0.0 {
        (beta * lambda.ln()).exp()
    } else {
        lambda.powf(beta)
    }
}

/// A truncated expansion `u = Σ_j a_j e_j` over a shared basis.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

impl SpectralFunction {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::LengthMismatch {
                expected: basis.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zero(basis: Arc<SpectralBasis>) -> Self {
        let coeffs = vec![0.0; basis.len()];
        Self { basis, coeffs }
    }

    /// The j-th basis function (zero-based).
    pub fn basis_function(basis: Arc<SpectralBasis>, j: usize) -> Self {
        let mut u = Self::zero(basis);
        u.coeffs[j] = 1.0;
        u
    }

    /// L² projection of grid samples: a_j = ∫ s e_j.
    pub fn project(basis: Arc<SpectralBasis>, samples: &[f64]) -> Result<Self> {
        let domain = basis.domain();
        let weighted: Vec<f64> = {
            if samples.len() != domain.node_count() {
                return Err(Error::LengthMismatch {
                    expected: domain.node_count(),
                    actual: samples.len(),
                });
            }
            samples.iter().zip(domain.weights()).map(|(s, w)| s * w).collect()
        };
        let coeffs = basis
            .pairs()
            .iter()
            .map(|p| p.values.iter().zip(&weighted).map(|(e, s)| e * s).sum())
            .collect();
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Samples Σ a_j e_j(x_q) at every node of the basis domain.
    pub fn synthesize(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.domain().node_count()];
        for (a, pair) in self.coeffs.iter().zip(self.basis.pairs()) {
            if *a == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(&pair.values) {
                *o += a * e;
            }
        }
        out
    }

    /// ‖u‖_{L²} by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn same_basis(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        if self.same_basis(other) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// a_j ↦ b(λ_j) a_j.
    pub fn map_spectrum(&self, mut b: impl FnMut(f64) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, &l)| b(l) * a)
            .collect();
        Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|a| s * a).collect(),
        }
    }

    /// Σ a_j b_j, the L² inner product at truncation.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_basis(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// `(alpha, beta)` term of a fractional polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub alpha: f64,
    pub beta: f64,
}

/// w(λ) = Σ α_i λ^{β_i} with α_i > 0 and 0 ≤ β_0 < … < β_k.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPolynomial {
    terms: Vec<Term>,
}

impl FractionalPolynomial {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("polynomial needs at least one term".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if !(t.alpha > 0.0 && t.alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "term {i}: coefficient alpha must be positive, got {}",
                    t.alpha
                )));
            }
            if !(t.beta >= 0.0 && t.beta.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "term {i}: exponent beta must be nonnegative, got {}",
                    t.beta
                )));
            }
        }
        if let Some(i) = terms.windows(2).position(|w| w[1].beta <= w[0].beta) {
            return Err(Error::InvalidArgument(format!(
                "exponents must be strictly increasing (0 <= beta_0 < beta_1 < ... < beta_k); violated at term {}",
                i + 1
            )));
        }
        Ok(Self { terms })
    }

    /// Single-term polynomial α λ^β.
    pub fn monomial(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![Term { alpha, beta }])
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(alpha, beta)| Term { alpha, beta })
                .collect(),
        )
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// The highest-order term (α_k, β_k).
    pub fn leading(&self) -> Term {
        *self.terms.last().expect("polynomial has at least one term")
    }

    /// Sum of two polynomials, merging terms with equal exponents.
    pub fn merged(&self, other: &Self) -> Self {
        let mut terms: Vec<Term> = self.terms.iter().chain(&other.terms).copied().collect();
        terms.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.beta == t.beta => last.alpha += t.alpha,
                _ => out.push(t),
            }
        }
        Self { terms: out }
    }

    /// w(λ); zero for λ < 0.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|t| t.alpha * power(lambda, t.beta)).sum()
    }

    pub fn eval_sq(&self, lambda: f64) -> f64 {
        let w = self.eval(lambda);
        w * w
    }
}

pub fn eval_poly(w: &FractionalPolynomial, lambda: f64) -> f64 {
    w.eval(lambda)
}

/// A^β u: a_j ↦ λ_j^β a_j.
pub fn apply_power(u: &SpectralFunction, beta: f64) -> Result<SpectralFunction> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "power must be nonnegative, got {beta} (use apply_inverse_sq for inverses)"
        )));
    }
    if beta == 0.0 {
        return Ok(u.clone());
    }
    Ok(u.map_spectrum(|l| power(l, beta)))
}

/// w(A) u: a_j ↦ w(λ_j) a_j.
pub fn apply_poly(u: &SpectralFunction, w: &FractionalPolynomial) -> SpectralFunction {
    u.map_spectrum(|l| w.eval(l))
}

/// (w²(A))⁻¹ g: a_j ↦ a_j / w²(λ_j).
pub fn apply_inverse_sq(g: &SpectralFunction, w: &FractionalPolynomial) -> Result<SpectralFunction> {
    if let Some(l) = g.basis().eigenvalues().iter().find(|l| **l <= 0.0) {
        return Err(Error::InvalidBasis(format!(
            "eigenvalue {l} is not positive; w² is not invertible"
        )));
    }
    Ok(g.map_spectrum(|l| 1.0 / w.eval_sq(l)))
}

/// M_β = max{ λ_j^{-2β} : λ_j < 1 }, or 1 if no eigenvalue is below one.
pub fn m_beta(eigenvalues: &[f64], beta: f64) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l < 1.0)
        .map(|&l| 1.0 / power(l, beta).powi(2))
        .fold(1.0, f64::max)
}

/// ‖u‖_{~β} = ‖A^β u‖_{L²}.
pub fn norm_tilde(u: &SpectralFunction, beta: f64) -> f64 {
    u.coeffs()
        .iter()
        .zip(u.basis().eigenvalues())
        .map(|(a, &l)| (power(l, beta) * a).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// ‖u‖_β = (‖u‖²_{L²} + ‖A^β u‖²_{L²})^{1/2}.
pub fn norm_beta(u: &SpectralFunction, beta: f64) -> f64 {
    let t = norm_tilde(u, beta);
    (u.l2_norm().powi(2) + t * t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayReport {
    /// Share of Σ (λ_j^β a_j)² carried by the top quarter of indices.
    pub tail_fraction: f64,
    pub in_domain_at_truncation: bool,
}

/// Truncation-level proxy for membership in D(A^β): the series
/// Σ (λ_j^β a_j)² should not be dominated by its tail. Heuristic only; at any
/// finite J every coefficient vector is formally in every domain.
pub fn domain_decay_diagnostic(
    u: &SpectralFunction,
    beta: f64,
    threshold: f64,
) -> Result<DecayReport> {
    let len = u.coeffs().len();
    if len < 8 {
        return Err(Error::InvalidArgument(format!(
            "decay diagnostic needs at least 8 coefficients, got {len}"
        )));
    }
    let terms: Vec<f64> = u
        .coeffs()
        .iter()
        .zip(u.basis().eigenvalues())
        .map(|(a, &l)| (power(l, beta) * a).powi(2))
        .collect();
    let total: f64 = terms.iter().sum();
    let tail_start = len - len / 4;
    let tail: f64 = terms[tail_start..].iter().sum();
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    Ok(DecayReport {
        tail_fraction,
        in_domain_at_truncation: tail_fraction <= threshold,
    })
}
