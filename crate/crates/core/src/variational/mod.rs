//! Variational solution of w²(A) u = D_uF(x, u).
//!
//! Critical points of the energy
//!
//! ```text
//! f(u) = ∫ ½ |w(A)u|² − F(x, u(x)) dx
//! ```
//!
//! are weak solutions, and weak solutions are strong ones. The quadratic
//! part is evaluated exactly in coefficient space (Parseval); the potential
//! part by quadrature on the basis domain. The Gateaux derivative in
//! direction e_j gives the gradient component
//! `w(λ_j)² u_j − ∫ D_uF(x, u) e_j`, which is also the weak-form defect.

mod nonlinearity;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use nonlinearity::{
    builtin_example_nonlinearity, check_derivative, check_growth, ExampleNonlinearity, Field,
    FnNonlinearity, GrowthConstants, GrowthReport, GrowthViolation, Nonlinearity,
    PolynomialNonlinearity,
};

use crate::calculus::{m_beta, FractionalPolynomial, SpectralFunction};
use crate::eigen::SpectralBasis;
use crate::error::{Error, Result};

/// Samples of u, F(x,u) and D_uF(x,u) at every node.
struct PointwiseEval {
    potential: f64,
    potential_abs: f64,
    derivative: Vec<f64>,
}

fn pointwise(u: &SpectralFunction, nl: &dyn Nonlinearity, with_derivative: bool) -> Result<PointwiseEval> {
    let domain = u.basis().domain();
    let samples = u.synthesize();
    let mut potential = 0.0;
    let mut potential_abs = 0.0;
    let mut derivative = Vec::with_capacity(if with_derivative { samples.len() } else { 0 });
    for (q, ((x, &uq), &wq)) in domain.nodes().zip(&samples).zip(domain.weights()).enumerate() {
        let f = nl.value(q, x, uq);
        if !f.is_finite() {
            return Err(Error::NonFinite {
                node: q,
                coords: x.to_vec(),
                value: uq,
            });
        }
        potential += wq * f;
        potential_abs += wq * f.abs();
        if with_derivative {
            let df = nl.derivative(q, x, uq);
            if !df.is_finite() {
                return Err(Error::NonFinite {
                    node: q,
                    coords: x.to_vec(),
                    value: uq,
                });
            }
            derivative.push(df);
        }
    }
    Ok(PointwiseEval {
        potential,
        potential_abs,
        derivative,
    })
}

fn quadratic_part(u: &SpectralFunction, w: &FractionalPolynomial) -> f64 {
    0.5 * u
        .coeffs()
        .iter()
        .zip(u.basis().eigenvalues())
        .map(|(a, &l)| w.eval_sq(l) * a * a)
        .sum::<f64>()
}

/// f(u) = ½ Σ_j (w(λ_j) u_j)² − ∫ F(x, u(x)) dx.
pub fn energy(u: &SpectralFunction, nl: &dyn Nonlinearity, w: &FractionalPolynomial) -> Result<f64> {
    Ok(quadratic_part(u, w) - pointwise(u, nl, false)?.potential)
}

/// ⟨D_uF(·, u), e_j⟩ for every basis function.
pub fn project_derivative(u: &SpectralFunction, nl: &dyn Nonlinearity) -> Result<SpectralFunction> {
    let eval = pointwise(u, nl, true)?;
    SpectralFunction::project(Arc::clone(u.basis()), &eval.derivative)
}

/// Gateaux gradient: w(λ_j)² u_j − ∫ D_uF(x, u) e_j.
pub fn gradient(u: &SpectralFunction, nl: &dyn Nonlinearity, w: &FractionalPolynomial) -> Result<Vec<f64>> {
    Ok(energy_and_gradient(u, nl, w)?.1)
}

fn energy_and_gradient(
    u: &SpectralFunction,
    nl: &dyn Nonlinearity,
    w: &FractionalPolynomial,
) -> Result<(f64, Vec<f64>, f64)> {
    let eval = pointwise(u, nl, true)?;
    let forcing = SpectralFunction::project(Arc::clone(u.basis()), &eval.derivative)?;
    let grad = u
        .coeffs()
        .iter()
        .zip(u.basis().eigenvalues())
        .zip(forcing.coeffs())
        .map(|((a, &l), f)| w.eval_sq(l) * a - f)
        .collect();
    let quad = quadratic_part(u, w);
    Ok((quad - eval.potential, grad, quad.abs() + eval.potential_abs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityCheck {
    pub ok: bool,
    /// α_k² / M_{β_k} − A.
    pub margin: f64,
    pub threshold: f64,
}

/// The energy is coercive when A < α_k² / M_{β_k}.
pub fn check_coercivity(
    nl: &dyn Nonlinearity,
    w: &FractionalPolynomial,
    basis: &SpectralBasis,
) -> CoercivityCheck {
    let lead = w.leading();
    let threshold = lead.alpha * lead.alpha / m_beta(basis.eigenvalues(), lead.beta);
    let margin = threshold - nl.growth().upper_a;
    CoercivityCheck {
        ok: margin > 0.0,
        margin,
        threshold,
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Stop once ‖∇f‖₂ ≤ gtol; `None` uses 1e-8 · (1 + |f(u)|).
    pub gtol: Option<f64>,
    pub max_iters: usize,
    /// Starting coefficients; zero when absent.
    pub u0: Option<Vec<f64>>,
    /// Proceed (with a warning) when the coercivity condition fails.
    pub allow_noncoercive: bool,
    pub armijo_c1: f64,
    pub backtrack: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            gtol: None,
            max_iters: 10_000,
            u0: None,
            allow_noncoercive: false,
            armijo_c1: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub solution: SpectralFunction,
    pub energy: f64,
    pub gradient_norm: f64,
    /// max_m |w(λ_m)² u_m − ⟨D_uF(·, u), e_m⟩|.
    pub euler_lagrange_residual: f64,
    pub iterations: usize,
    pub coercivity_margin: f64,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

/// Smallest trial step before the line search gives up.
const MIN_STEP: f64 = 1e-20;

/// Preconditioned gradient descent with Armijo backtracking.
///
/// The search direction is −P∇f with P_j = 1 / (w(λ_j)² + 1), which
/// equalizes the stiffness of the quadratic part, so the trial step starts
/// at 1 on every iteration.
pub fn minimize(
    nl: &dyn Nonlinearity,
    w: &FractionalPolynomial,
    basis: &Arc<SpectralBasis>,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    let coercivity = check_coercivity(nl, w, basis);
    if !coercivity.ok {
        if opts.allow_noncoercive {
            log::warn!(
                "coercivity condition fails (margin {}); minimizer may diverge",
                coercivity.margin
            );
        } else {
            return Err(Error::NotCoercive {
                margin: coercivity.margin,
            });
        }
    }

    let precond: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| 1.0 / (w.eval_sq(l) + 1.0))
        .collect();
    let mut u = match &opts.u0 {
        Some(c) => SpectralFunction::new(Arc::clone(basis), c.clone())?,
        None => SpectralFunction::zero(Arc::clone(basis)),
    };
    let (mut f, mut grad, mut scale) = energy_and_gradient(&u, nl, w)?;
    let mut history = vec![IterationRecord {
        iteration: 0,
        energy: f,
        gradient_norm: norm(&grad),
        step: 0.0,
    }];

    let mut iterations = 0;
    let mut converged = false;
    let mut failed = false;
    loop {
        let gnorm = norm(&grad);
        let gtol = opts.gtol.unwrap_or(1e-8 * (1.0 + f.abs()));
        if gnorm <= gtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        let direction: Vec<f64> = grad.iter().zip(&precond).map(|(g, p)| -g * p).collect();
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();

        let mut step = 1.0;
        let accepted = loop {
            let trial = SpectralFunction::new(
                Arc::clone(basis),
                u.coeffs()
                    .iter()
                    .zip(&direction)
                    .map(|(a, d)| a + step * d)
                    .collect(),
            )?;
            let (f_new, g_new, scale_new) = energy_and_gradient(&trial, nl, w)?;
            // Energy differences below the rounding level of its evaluation
            // carry no information; accept them rather than underflow.
            let noise = 16.0 * f64::EPSILON * scale.max(scale_new);
            if f_new <= f + opts.armijo_c1 * step * slope + noise {
                break Some((trial, f_new, g_new, scale_new));
            }
            step *= opts.backtrack;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((trial, f_new, g_new, scale_new)) = accepted else {
            failed = true;
            break;
        };
        u = trial;
        f = f_new;
        grad = g_new;
        scale = scale_new;
        iterations += 1;
        history.push(IterationRecord {
            iteration: iterations,
            energy: f,
            gradient_norm: norm(&grad),
            step,
        });
    }

    let report = MinimizeReport {
        energy: f,
        gradient_norm: norm(&grad),
        euler_lagrange_residual: grad.iter().fold(0.0, |m, g| m.max(g.abs())),
        iterations,
        coercivity_margin: coercivity.margin,
        converged,
        history,
        solution: u,
    };
    if failed {
        Err(Error::LineSearchFailure {
            report: Box::new(report),
        })
    } else if !converged {
        Err(Error::NotConverged {
            report: Box::new(report),
        })
    } else {
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub energy: f64,
    pub euler_lagrange_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MultiStartReport {
    /// Run from the configured starting point (zero by default).
    pub primary: MinimizeReport,
    /// Runs from seeded random starting points.
    pub starts: Vec<StartSummary>,
    /// Largest energy difference among all converged runs.
    pub energy_spread: f64,
}

/// Minimizes from `opts.u0` and from `starts` random initial coefficient
/// vectors drawn uniformly from [−1, 1] with the given seed. All distinct
/// critical points are reported; no run is preferred over another beyond
/// the primary one.
pub fn minimize_multistart(
    nl: &dyn Nonlinearity,
    w: &FractionalPolynomial,
    basis: &Arc<SpectralBasis>,
    opts: &MinimizeOptions,
    starts: usize,
    seed: u64,
) -> Result<MultiStartReport> {
    let primary = minimize(nl, w, basis, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summaries = Vec::with_capacity(starts);
    let (mut lo, mut hi) = (primary.energy, primary.energy);
    for start in 0..starts {
        let u0: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run_opts = MinimizeOptions {
            u0: Some(u0),
            ..opts.clone()
        };
        let report = match minimize(nl, w, basis, &run_opts) {
            Ok(r) => r,
            Err(Error::NotConverged { report }) | Err(Error::LineSearchFailure { report }) => *report,
            Err(e) => return Err(e),
        };
        if report.converged {
            lo = lo.min(report.energy);
            hi = hi.max(report.energy);
        }
        summaries.push(StartSummary {
            start,
            energy: report.energy,
            euler_lagrange_residual: report.euler_lagrange_residual,
            iterations: report.iterations,
            converged: report.converged,
        });
    }
    Ok(MultiStartReport {
        primary,
        starts: summaries,
        energy_spread: hi - lo,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
