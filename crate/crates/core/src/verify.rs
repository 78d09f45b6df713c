//! Seeded invariant suite run by the `verify` subcommand.
//!
//! Every check draws its random inputs from one ChaCha8 stream, so a given
//! (basis, w, seed) always yields the same table.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{
    apply_inverse_sq, apply_poly, apply_power, domain_decay_diagnostic, norm_beta, norm_tilde,
    FractionalPolynomial, SpectralFunction, Term, DEFAULT_DECAY_THRESHOLD,
};
use crate::eigen::SpectralBasis;
use crate::error::Result;
use crate::linear::{equivalence_check, inverse_bound, inverse_spectrum, solve_linear};
use crate::variational::{
    check_derivative, check_growth, energy, gradient, ExampleNonlinearity, Field,
};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value (error, or number of violations).
    pub value: f64,
    pub threshold: f64,
    pub cases: usize,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64, cases: usize) -> Self {
        Self {
            name,
            passed: value <= threshold,
            value,
            threshold,
            cases,
        }
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A random w with 1 to 3 terms, α in [0.1, 2] and increasing β in [0, 2].
pub fn random_polynomial(rng: &mut ChaCha8Rng) -> FractionalPolynomial {
    let k = rng.random_range(1..=3);
    let mut betas: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let terms = betas
        .into_iter()
        .map(|beta| Term {
            alpha: rng.random_range(0.1..2.0),
            beta,
        })
        .collect();
    FractionalPolynomial::new(terms).expect("valid random polynomial")
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .filter(|e| e.is_finite())
        .fold(0.0, f64::max)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn run_suite(
    basis: &Arc<SpectralBasis>,
    w: &FractionalPolynomial,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = basis.len();
    let domain = basis.domain();
    let mut out = Vec::new();

    out.push(Check::at_most("orthonormality", basis.gram_deviation(), 1e-8, 1));

    let worst_pair = basis.pairs().iter().fold(0.0, |m: f64, p| m.max(p.residual));
    out.push(Check::at_most("eigen_residual", worst_pair, 1e-8, j));

    let mut parseval: f64 = 0.0;
    for _ in 0..20 {
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let s = u.synthesize();
        let sq: Vec<f64> = s.iter().map(|v| v * v).collect();
        let grid = domain.integrate(&sq)?;
        let coeff = u.l2_norm().powi(2);
        parseval = parseval.max((grid - coeff).abs() / coeff.max(1.0));
    }
    out.push(Check::at_most("parseval", parseval, 1e-8, 20));

    let mut semigroup: f64 = 0.0;
    let mut integer: f64 = 0.0;
    let mut additivity: f64 = 0.0;
    let mut adjoint: f64 = 0.0;
    for _ in 0..100 {
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let v = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let b1 = rng.random_range(0.0..1.5);
        let b2 = rng.random_range(0.0..1.5);
        let lhs = apply_power(&apply_power(&u, b1)?, b2)?;
        let rhs = apply_power(&u, b1 + b2)?;
        semigroup = semigroup.max(rel_err(lhs.coeffs(), rhs.coeffs()));

        let n = rng.random_range(1..=4);
        let mut repeated = u.clone();
        for _ in 0..n {
            repeated = apply_power(&repeated, 1.0)?;
        }
        let direct = apply_power(&u, n as f64)?;
        integer = integer.max(rel_err(repeated.coeffs(), direct.coeffs()));

        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let beta = rng.random_range(0.0..2.0);
        let combo = u.scale(s).add(&v.scale(t))?;
        let lhs = apply_power(&combo, beta)?;
        let rhs = apply_power(&u, beta)?.scale(s).add(&apply_power(&v, beta)?.scale(t))?;
        let scale = rhs.coeffs().iter().fold(1.0, |m: f64, x| m.max(x.abs()));
        additivity = additivity.max(max_abs_diff(lhs.coeffs(), rhs.coeffs()) / scale);

        let au = apply_power(&u, beta)?.synthesize();
        let av = apply_power(&v, beta)?.synthesize();
        let (us, vs) = (u.synthesize(), v.synthesize());
        let left: Vec<f64> = au.iter().zip(&vs).map(|(a, b)| a * b).collect();
        let right: Vec<f64> = us.iter().zip(&av).map(|(a, b)| a * b).collect();
        let (l, r) = (domain.integrate(&left)?, domain.integrate(&right)?);
        adjoint = adjoint.max((l - r).abs() / l.abs().max(r.abs()).max(1.0));
    }
    out.push(Check::at_most("semigroup", semigroup, 1e-12, 100));
    out.push(Check::at_most("integer_powers", integer, 1e-12, 100));
    out.push(Check::at_most("additivity", additivity, 1e-12, 100));
    out.push(Check::at_most("self_adjointness", adjoint, 1e-6, 100));

    let mut sandwich = 0usize;
    for _ in 0..1000 {
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let beta = rng.random_range(1e-3..=3.0);
        let t = norm_tilde(&u, beta);
        let full = norm_beta(&u, beta);
        let m = crate::calculus::m_beta(basis.eigenvalues(), beta);
        let upper = (1.0 + m).sqrt() * t;
        if !(t <= full * (1.0 + 1e-12) && full <= upper * (1.0 + 1e-12)) {
            sandwich += 1;
        }
    }
    out.push(Check::at_most("norm_sandwich", sandwich as f64, 0.0, 1000));

    if j >= 8 {
        let mut bad = 0usize;
        for _ in 0..20 {
            let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
            let b1 = rng.random_range(0.0..1.0);
            let b2 = b1 + rng.random_range(0.0..1.0);
            let lo = domain_decay_diagnostic(&u, b1, DEFAULT_DECAY_THRESHOLD)?;
            let hi = domain_decay_diagnostic(&u, b2, DEFAULT_DECAY_THRESHOLD)?;
            if hi.in_domain_at_truncation && !lo.in_domain_at_truncation {
                bad += 1;
            }
        }
        out.push(Check::at_most("domain_nesting", bad as f64, 0.0, 20));
    }

    let mut round_trip: f64 = 0.0;
    let mut bound_violations = 0usize;
    let mut disagreements = 0usize;
    for case in 0..100 {
        let wr = if case == 0 { w.clone() } else { random_polynomial(&mut rng) };
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let g = apply_poly(&apply_poly(&u, &wr), &wr);
        let back = apply_inverse_sq(&g, &wr)?;
        round_trip = round_trip.max(rel_err(back.coeffs(), u.coeffs()));
        let report = solve_linear(&g, &wr)?;
        if !report.inverse_bound.holds {
            bound_violations += 1;
        }
        if !report.equivalent {
            disagreements += 1;
        }
        let wrong = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        if !equivalence_check(&wrong, &g, &wr)? {
            disagreements += 1;
        }
        if !inverse_bound(&back, &g, &wr).holds {
            bound_violations += 1;
        }
    }
    out.push(Check::at_most("inverse_round_trip", round_trip, 1e-10, 100));
    out.push(Check::at_most("bounded_inverse", bound_violations as f64, 0.0, 200));
    out.push(Check::at_most("weak_strong_equivalence", disagreements as f64, 0.0, 200));

    let mu = inverse_spectrum(basis.eigenvalues(), w);
    let increases = mu.windows(2).filter(|p| p[1] > p[0]).count();
    out.push(Check::at_most("inverse_spectrum_monotone", increases as f64, 0.0, mu.len()));

    let nl = ExampleNonlinearity::new(0.5, Field::Constant(0.1));
    let mut grad_err: f64 = 0.0;
    for _ in 0..10 {
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, j))?;
        let g = gradient(&u, &nl, w)?;
        let dir = random_coeffs(&mut rng, j);
        let h = 1e-6;
        let plus = SpectralFunction::new(
            basis.clone(),
            u.coeffs().iter().zip(&dir).map(|(a, d)| a + h * d).collect(),
        )?;
        let minus = SpectralFunction::new(
            basis.clone(),
            u.coeffs().iter().zip(&dir).map(|(a, d)| a - h * d).collect(),
        )?;
        let fd = (energy(&plus, &nl, w)? - energy(&minus, &nl, w)?) / (2.0 * h);
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        grad_err = grad_err.max((fd - an).abs() / an.abs().max(1.0));
    }
    out.push(Check::at_most("gradient_fd", grad_err, 1e-5, 10));

    let deriv = check_derivative(&nl, domain, &[-2.0, -0.5, 0.0, 0.7, 3.0]);
    out.push(Check::at_most("nonlinearity_derivative", deriv, 1e-6, domain.node_count() * 5));

    let growth = check_growth(&nl, domain, 10.0, 21);
    let growth_count = growth.value_bound.count + growth.derivative_bound.count + growth.upper_bound.count;
    out.push(Check::at_most("growth_bounds", growth_count as f64, 0.0, domain.node_count() * 21));

    Ok(out)
}
