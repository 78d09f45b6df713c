//! Run configuration: JSON schema, defaults and validation.
//!
//! Unknown keys are rejected everywhere. Errors carry a JSON pointer to the
//! offending value.

use serde::{Deserialize, Serialize};

use crate::calculus::FractionalPolynomial;
use crate::domain::{Domain, DEFAULT_NODES_PER_AXIS};
use crate::eigen::{analytic_box_basis, discrete_basis_with, SolverOptions, SpectralBasis};
use crate::error::{Error, Result};
use crate::variational::GrowthConstants;

pub const DEFAULT_J: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub basis: BasisSpec,
    /// Terms `[alpha, beta]` of w(λ) = Σ α λ^β.
    #[serde(default = "default_w")]
    pub w: Vec<[f64; 2]>,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_w() -> Vec<[f64; 2]> {
    vec![[1.0, 0.5]]
}

fn default_output() -> String {
    "out".into()
}

fn default_nodes_per_axis() -> usize {
    DEFAULT_NODES_PER_AXIS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Box(BoxDomain),
    Polygon2d(PolygonDomain),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lengths: Vec<f64>,
    #[serde(default = "default_nodes_per_axis")]
    pub nodes_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonDomain {
    pub vertices: Vec<[f64; 2]>,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSourceSpec {
    Analytic,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    /// Defaults to analytic on boxes and discrete on polygons.
    #[serde(default)]
    pub source: Option<BasisSourceSpec>,
    #[serde(rename = "J", default = "default_j")]
    pub j: usize,
}

fn default_j() -> usize {
    DEFAULT_J
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            source: None,
            j: DEFAULT_J,
        }
    }
}

/// A scalar field: a constant, or one value per quadrature node read from a
/// CSV file with columns `x1,…,xN,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Samples { samples_csv: String },
}

/// Right-hand side of the linear problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    /// Expansion coefficients g_1..g_J.
    Coefficients(Vec<f64>),
    /// Grid samples, projected onto the basis.
    SamplesCsv(String),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    BuiltinExample(BuiltinExampleSpec),
    Polynomial(PolynomialSpec),
}

/// F(x,u) = (A/2) cos(x_1 + … + x_N) u² + b(x) sin u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinExampleSpec {
    #[serde(rename = "A")]
    pub a: f64,
    pub b: FieldSpec,
}

/// F(x,u) = Σ_p c_p(x) u^p, with constant coefficients or per-node samples
/// from a CSV with columns `x1,…,xN,c0,…,cP`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConstants>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default)]
    pub gtol: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Additional seeded random starts.
    #[serde(default)]
    pub multi_start: usize,
    #[serde(default)]
    pub allow_noncoercive: bool,
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    /// Half-width U of the u-range sampled by the growth check.
    #[serde(default = "default_growth_range")]
    pub growth_range: f64,
}

fn default_max_iters() -> usize {
    10_000
}

fn default_growth_range() -> f64 {
    10.0
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            gtol: None,
            max_iters: default_max_iters(),
            multi_start: 0,
            allow_noncoercive: false,
            u0: None,
            growth_range: default_growth_range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Eig(NoFields),
    Linear(LinearProblem),
    Nonlinear(NonlinearProblem),
    Verify(NoFields),
    Convergence(ConvergenceProblem),
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Eig(NoFields {})
    }
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Eig(_) => "eig",
            ProblemSpec::Linear(_) => "linear",
            ProblemSpec::Nonlinear(_) => "nonlinear",
            ProblemSpec::Verify(_) => "verify",
            ProblemSpec::Convergence(_) => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoFields {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblem {
    pub g: ForcingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearProblem {
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceProblem {
    pub spacings: Vec<f64>,
}

/// Parses and validates a config; the returned value has every default
/// filled in, including the basis source.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?;
    let mut config: RunConfig = serde_path_to_error::deserialize(&root).map_err(|e| {
        let pointer = json_pointer(e.path());
        let (pointer, message) = refine(&root, pointer, e.into_inner().to_string());
        Error::config(pointer, message)
    })?;
    config.validate()?;
    Ok(config)
}

/// Tagged sections are buffered by serde, which loses the path below them.
/// Re-deserialize the payload of the selected variant to recover it.
fn refine(root: &serde_json::Value, pointer: String, message: String) -> (String, String) {
    use serde::de::DeserializeOwned;
    fn probe<T: DeserializeOwned>(v: serde_json::Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(v)
            .err()
            .map(|e| (json_pointer(e.path()), e.into_inner().to_string()))
    }
    let Some(node) = root.pointer(&pointer) else {
        return (pointer, message);
    };
    let kind = node.get("kind").and_then(|k| k.as_str()).unwrap_or_default().to_string();
    let mut payload = node.clone();
    if let Some(map) = payload.as_object_mut() {
        map.remove("kind");
    }
    let found = match (pointer.as_str(), kind.as_str()) {
        ("/domain", "box") => probe::<BoxDomain>(payload),
        ("/domain", "polygon2d") => probe::<PolygonDomain>(payload),
        ("/problem", "eig" | "verify") => probe::<NoFields>(payload),
        ("/problem", "linear") => probe::<LinearProblem>(payload),
        ("/problem", "nonlinear") => probe::<NonlinearProblem>(payload),
        ("/problem", "convergence") => probe::<ConvergenceProblem>(payload),
        ("/problem/nonlinearity", "builtin_example") => probe::<BuiltinExampleSpec>(payload),
        ("/problem/nonlinearity", "polynomial") => probe::<PolynomialSpec>(payload),
        _ => None,
    };
    match found {
        Some((sub, msg)) if sub.is_empty() => (pointer, msg),
        Some((sub, msg)) => refine(root, format!("{pointer}{sub}"), msg),
        None => (pointer, message),
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

impl RunConfig {
    pub fn validate(&mut self) -> Result<()> {
        let is_box = matches!(self.domain, DomainSpec::Box(_));
        match &self.domain {
            DomainSpec::Box(BoxDomain { lengths, nodes_per_axis }) => {
                if lengths.is_empty() {
                    return Err(Error::config("/domain/lengths", "box needs at least one axis"));
                }
                if let Some(i) = lengths.iter().position(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::config(
                        format!("/domain/lengths/{i}"),
                        "box lengths must be positive",
                    ));
                }
                if *nodes_per_axis < 2 {
                    return Err(Error::config("/domain/nodes_per_axis", "need at least 2 nodes per axis"));
                }
            }
            DomainSpec::Polygon2d(PolygonDomain { h, .. }) => {
                if !(*h > 0.0 && h.is_finite()) {
                    return Err(Error::config("/domain/h", "grid spacing must be positive"));
                }
            }
        }
        if self.basis.j == 0 {
            return Err(Error::config("/basis/J", "J must be at least 1"));
        }
        let source = self.basis.source.get_or_insert(if is_box {
            BasisSourceSpec::Analytic
        } else {
            BasisSourceSpec::Discrete
        });
        if *source == BasisSourceSpec::Analytic && !is_box {
            return Err(Error::config(
                "/basis/source",
                "analytic eigenpairs are only available on boxes",
            ));
        }
        if self.w.is_empty() {
            return Err(Error::config("/w", "w needs at least one [alpha, beta] term"));
        }
        for (i, [alpha, beta]) in self.w.iter().enumerate() {
            if !(*alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::config(format!("/w/{i}/0"), "alpha must be positive"));
            }
            if !(*beta >= 0.0 && beta.is_finite()) {
                return Err(Error::config(format!("/w/{i}/1"), "beta must be nonnegative"));
            }
            if i > 0 && *beta <= self.w[i - 1][1] {
                return Err(Error::config(
                    format!("/w/{i}/1"),
                    "beta must be strictly increasing (0 <= beta_0 < beta_1 < ... < beta_k)",
                ));
            }
        }
        match &self.problem {
            ProblemSpec::Linear(LinearProblem {
                g: ForcingSpec::Coefficients(c),
            }) if c.len() != self.basis.j => {
                return Err(Error::config(
                    "/problem/g/coefficients",
                    format!("expected J = {} coefficients, got {}", self.basis.j, c.len()),
                ));
            }
            ProblemSpec::Nonlinear(NonlinearProblem {
                nonlinearity,
                optimizer,
            }) => {
                if let NonlinearitySpec::Polynomial(PolynomialSpec {
                    coefficients,
                    coefficients_csv,
                    ..
                }) = nonlinearity
                {
                    if coefficients.is_some() == coefficients_csv.is_some() {
                        return Err(Error::config(
                            "/problem/nonlinearity",
                            "give exactly one of coefficients or coefficients_csv",
                        ));
                    }
                }
                if let Some(u0) = &optimizer.u0 {
                    if u0.len() != self.basis.j {
                        return Err(Error::config(
                            "/problem/optimizer/u0",
                            format!("expected J = {} coefficients, got {}", self.basis.j, u0.len()),
                        ));
                    }
                }
                if optimizer.gtol.is_some_and(|g| !(g > 0.0)) {
                    return Err(Error::config("/problem/optimizer/gtol", "gtol must be positive"));
                }
            }
            ProblemSpec::Convergence(ConvergenceProblem { spacings }) if spacings.len() < 3 => {
                return Err(Error::config(
                    "/problem/spacings",
                    "convergence study needs at least 3 grid spacings",
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Domain> {
        let domain = match &self.domain {
            DomainSpec::Box(b) => Domain::make_box_with_resolution(&b.lengths, b.nodes_per_axis),
            DomainSpec::Polygon2d(p) => Domain::make_polygon2d(&p.vertices, p.h),
        };
        domain.map_err(|e| Error::config("/domain", e.to_string()))
    }

    pub fn build_polynomial(&self) -> Result<FractionalPolynomial> {
        let pairs: Vec<(f64, f64)> = self.w.iter().map(|[a, b]| (*a, *b)).collect();
        FractionalPolynomial::from_pairs(&pairs).map_err(|e| Error::config("/w", e.to_string()))
    }

    pub fn basis_source(&self) -> BasisSourceSpec {
        self.basis.source.unwrap_or(match self.domain {
            DomainSpec::Box(_) => BasisSourceSpec::Analytic,
            DomainSpec::Polygon2d(_) => BasisSourceSpec::Discrete,
        })
    }

    pub fn build_basis(&self, domain: &Domain) -> Result<SpectralBasis> {
        match self.basis_source() {
            BasisSourceSpec::Analytic => analytic_box_basis(domain, self.basis.j),
            BasisSourceSpec::Discrete => {
                discrete_basis_with(domain, self.basis.j, &SolverOptions::default())
            }
        }
    }

    /// Canonical JSON used for the manifest hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
