use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Declared growth constants:
///
/// ```text
/// |F(x,u)|    ≤ a|u|² + b(x)
/// |D_uF(x,u)| ≤ c|u| + d(x)
/// F(x,u)      ≤ (A/2)|u|² + B|u| + C
/// ```
///
/// `b` and `d` are represented by their sup-norm bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(rename = "A")]
    pub upper_a: f64,
    #[serde(rename = "B")]
    pub upper_b: f64,
    #[serde(rename = "C")]
    pub upper_c: f64,
}

/// The right-hand side F(x, u) and its u-derivative. `node` is the
/// quadrature-node index of `x`, for nonlinearities defined by samples.
pub trait Nonlinearity: Send + Sync {
    fn value(&self, node: usize, x: &[f64], u: f64) -> f64;
    fn derivative(&self, node: usize, x: &[f64], u: f64) -> f64;
    fn growth(&self) -> GrowthConstants;
}

/// A coefficient field given either as a constant or as one sample per node.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Field {
    #[inline]
    pub fn at(&self, node: usize) -> f64 {
        match self {
            Field::Constant(v) => *v,
            Field::Samples(s) => s[node],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Field::Constant(v) => v.abs(),
            Field::Samples(s) => s.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    fn max(&self) -> f64 {
        match self {
            Field::Constant(v) => *v,
            Field::Samples(s) => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn check_len(&self, nodes: usize) -> Result<()> {
        match self {
            Field::Samples(s) if s.len() != nodes => Err(Error::LengthMismatch {
                expected: nodes,
                actual: s.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// F(x,u) = (A/2) cos(x_1 + … + x_N) u² + b(x) sin u.
#[derive(Debug, Clone)]
pub struct ExampleNonlinearity {
    a: f64,
    b: Field,
}

impl ExampleNonlinearity {
    pub fn new(a: f64, b: Field) -> Self {
        Self { a, b }
    }

    pub fn for_domain(a: f64, b: Field, domain: &Domain) -> Result<Self> {
        b.check_len(domain.node_count())?;
        Ok(Self::new(a, b))
    }
}

pub fn builtin_example_nonlinearity(a: f64, b: Field) -> ExampleNonlinearity {
    ExampleNonlinearity::new(a, b)
}

impl Nonlinearity for ExampleNonlinearity {
    fn value(&self, node: usize, x: &[f64], u: f64) -> f64 {
        let phase: f64 = x.iter().sum();
        0.5 * self.a * phase.cos() * u * u + self.b.at(node) * u.sin()
    }

    fn derivative(&self, node: usize, x: &[f64], u: f64) -> f64 {
        let phase: f64 = x.iter().sum();
        self.a * phase.cos() * u + self.b.at(node) * u.cos()
    }

    fn growth(&self) -> GrowthConstants {
        let a = self.a.abs();
        let b = self.b.sup_norm();
        GrowthConstants {
            a: 0.5 * a,
            b,
            c: a,
            d: b,
            upper_a: a,
            upper_b: b,
            upper_c: 0.0,
        }
    }
}

/// F(x,u) = Σ_p c_p(x) u^p.
#[derive(Debug, Clone)]
pub struct PolynomialNonlinearity {
    coeffs: Vec<Field>,
    growth: GrowthConstants,
}

impl PolynomialNonlinearity {
    /// Growth constants are derived for degree ≤ 2 and are infinite beyond.
    pub fn new(coeffs: Vec<Field>) -> Self {
        let growth = derive_growth(&coeffs);
        Self { coeffs, growth }
    }

    pub fn for_domain(coeffs: Vec<Field>, domain: &Domain) -> Result<Self> {
        for c in &coeffs {
            c.check_len(domain.node_count())?;
        }
        Ok(Self::new(coeffs))
    }

    /// F(x,u) = g(x) u, whose critical point solves the linear problem.
    pub fn linear(g: Field) -> Self {
        Self::new(vec![Field::Constant(0.0), g])
    }

    pub fn with_growth(mut self, growth: GrowthConstants) -> Self {
        self.growth = growth;
        self
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

fn derive_growth(coeffs: &[Field]) -> GrowthConstants {
    let sup = |p: usize| coeffs.get(p).map_or(0.0, Field::sup_norm);
    if coeffs.len() > 3 && (3..coeffs.len()).any(|p| sup(p) > 0.0) {
        let inf = f64::INFINITY;
        return GrowthConstants {
            a: inf,
            b: inf,
            c: inf,
            d: inf,
            upper_a: inf,
            upper_b: inf,
            upper_c: inf,
        };
    }
    let (c0, c1, c2) = (sup(0), sup(1), sup(2));
    // |c1 u| ≤ (c1/2)(u² + 1).
    GrowthConstants {
        a: c2 + 0.5 * c1,
        b: 0.5 * c1 + c0,
        c: 2.0 * c2,
        d: c1,
        upper_a: 2.0 * coeffs.get(2).map_or(0.0, Field::max).max(0.0),
        upper_b: c1,
        upper_c: coeffs.first().map_or(0.0, Field::max).max(0.0),
    }
}

impl Nonlinearity for PolynomialNonlinearity {
    fn value(&self, node: usize, _x: &[f64], u: f64) -> f64 {
        // Horner from the highest power.
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c.at(node))
    }

    fn derivative(&self, node: usize, _x: &[f64], u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (p, c)| acc * u + p as f64 * c.at(node))
    }

    fn growth(&self) -> GrowthConstants {
        self.growth
    }
}

/// Adapts closures into a [`Nonlinearity`].
pub struct FnNonlinearity<F, D> {
    pub f: F,
    pub df: D,
    pub growth: GrowthConstants,
}

impl<F, D> Nonlinearity for FnNonlinearity<F, D>
where
    F: Fn(usize, &[f64], f64) -> f64 + Send + Sync,
    D: Fn(usize, &[f64], f64) -> f64 + Send + Sync,
{
    fn value(&self, node: usize, x: &[f64], u: f64) -> f64 {
        (self.f)(node, x, u)
    }

    fn derivative(&self, node: usize, x: &[f64], u: f64) -> f64 {
        (self.df)(node, x, u)
    }

    fn growth(&self) -> GrowthConstants {
        self.growth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthViolation {
    /// Worst excess of the left side over the declared bound.
    pub worst_excess: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub value_bound: GrowthViolation,
    pub derivative_bound: GrowthViolation,
    pub upper_bound: GrowthViolation,
    pub warnings: Vec<String>,
}

impl GrowthReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Samples the three growth conditions on every node for u in [−U, U].
/// Violations are reported, not treated as errors: the conditions are
/// hypotheses of the existence theory, not preconditions of the solver.
pub fn check_growth(nl: &dyn Nonlinearity, domain: &Domain, u_max: f64, samples: usize) -> GrowthReport {
    let g = nl.growth();
    let mut value = GrowthViolation { worst_excess: 0.0, count: 0 };
    let mut deriv = value;
    let mut upper = value;
    let steps = samples.max(2);
    let slack = |bound: f64| 1e-12 * (1.0 + bound.abs());
    for (q, x) in domain.nodes().enumerate() {
        for k in 0..steps {
            let u = -u_max + 2.0 * u_max * k as f64 / (steps - 1) as f64;
            let f = nl.value(q, x, u);
            let df = nl.derivative(q, x, u);
            let checks = [
                (&mut value, f.abs(), g.a * u * u + g.b),
                (&mut deriv, df.abs(), g.c * u.abs() + g.d),
                (
                    &mut upper,
                    f,
                    0.5 * g.upper_a * u * u + g.upper_b * u.abs() + g.upper_c,
                ),
            ];
            for (slot, lhs, bound) in checks {
                let excess = lhs - bound;
                if excess > slack(bound) || lhs.is_nan() {
                    slot.count += 1;
                    slot.worst_excess = slot.worst_excess.max(excess);
                }
            }
        }
    }
    let mut warnings = Vec::new();
    for (name, v) in [
        ("|F| <= a|u|^2 + b", &value),
        ("|D_uF| <= c|u| + d", &deriv),
        ("F <= (A/2)|u|^2 + B|u| + C", &upper),
    ] {
        if v.count > 0 {
            warnings.push(format!(
                "growth condition {name} violated at {} samples (worst excess {:e})",
                v.count, v.worst_excess
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    GrowthReport {
        value_bound: value,
        derivative_bound: deriv,
        upper_bound: upper,
        warnings,
    }
}

/// Largest |(F(u+h) − F(u−h))/(2h) − D_uF(u)| over nodes and sampled u.
pub fn check_derivative(nl: &dyn Nonlinearity, domain: &Domain, u_values: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    for (q, x) in domain.nodes().enumerate() {
        for &u in u_values {
            let fd = (nl.value(q, x, u + H) - nl.value(q, x, u - H)) / (2.0 * H);
            worst = worst.max((fd - nl.derivative(q, x, u)).abs());
        }
    }
    worst
}
