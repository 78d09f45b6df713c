//! Subcommand execution: config → computation → result bundle.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use crate::calculus::SpectralFunction;
use crate::config::{
    ConvergenceProblem, FieldSpec, ForcingSpec, LinearProblem, NonlinearProblem, NonlinearitySpec,
    PolynomialSpec, ProblemSpec, RunConfig,
};
use crate::domain::Domain;
use crate::eigen::{eigen_convergence_report, SpectralBasis};
use crate::error::{Error, Result};
use crate::linear::{default_tolerance, solve_linear};
use crate::output::{fmt_f64, json_bytes, Bundle, Csv};
use crate::variational::{
    check_coercivity, check_growth, minimize_multistart, ExampleNonlinearity, Field,
    MinimizeOptions, MinimizeReport, Nonlinearity, PolynomialNonlinearity,
};
use crate::verify::run_suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    SolveLinear,
    SolveNonlinear,
    Verify,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::SolveLinear => "solve-linear",
            Command::SolveNonlinear => "solve-nonlinear",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub bundle: Bundle,
    pub out_dir: PathBuf,
    /// Human-readable summary for stdout.
    pub summary: String,
    /// False when a verification check failed.
    pub ok: bool,
}

/// Number of u values sampled per node by the growth check.
const GROWTH_SAMPLES: usize = 21;

/// Runs `command` and writes the bundle into `out_dir`. Relative paths in
/// the config resolve against `base_dir`.
pub fn execute(command: Command, config: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<Outcome> {
    let w = config.build_polynomial()?;
    let domain = config.build_domain()?;
    let mut bundle = Bundle::default();
    let mut summary = String::new();
    let mut ok = true;
    let mut deferred: Option<Error> = None;

    if command == Command::Convergence {
        let ProblemSpec::Convergence(ConvergenceProblem { spacings }) = &config.problem else {
            return Err(kind_mismatch(command, "convergence", &config.problem));
        };
        let report = eigen_convergence_report(&domain, config.basis.j, spacings)?;
        let mut csv = Csv::new(&["h", "j", "lambda", "limit", "error"]);
        for r in &report.rows {
            csv.row([fmt_f64(r.h), r.j.to_string(), fmt_f64(r.lambda), fmt_f64(r.limit), fmt_f64(r.error)]);
        }
        bundle.add("convergence.csv", csv.into_bytes());
        bundle.add(
            "report.json",
            json_bytes(&json!({
                "command": command.name(),
                "orders": report.orders,
                "limits": report.limits,
            })),
        );
        for (j, order) in report.orders.iter().enumerate() {
            let o = order.map_or("n/a".to_string(), |o| format!("{o:.4}"));
            summary.push_str(&format!("j={} limit={} order={o}\n", j + 1, fmt_f64(report.limits[j])));
        }
        write(&bundle, command, config, out_dir)?;
        return Ok(Outcome {
            bundle,
            out_dir: out_dir.to_path_buf(),
            summary,
            ok,
        });
    }

    let basis = Arc::new(config.build_basis(&domain)?);
    bundle.add("eigen.csv", eigen_csv(&basis));
    let basis_json = json!({
        "source": basis.source(),
        "J": basis.len(),
        "nodes": basis.domain().node_count(),
        "gram_deviation": basis.gram_deviation(),
        "warnings": basis.warnings(),
    });

    match command {
        Command::Eig => {
            bundle.add(
                "report.json",
                json_bytes(&json!({
                    "command": command.name(),
                    "basis": basis_json,
                    "eigenvalues": basis.eigenvalues(),
                    "max_residual": basis.pairs().iter().fold(0.0, |m: f64, p| m.max(p.residual)),
                })),
            );
            for (j, l) in basis.eigenvalues().iter().enumerate() {
                summary.push_str(&format!("{} {}\n", j + 1, fmt_f64(*l)));
            }
        }
        Command::SolveLinear => {
            let ProblemSpec::Linear(LinearProblem { g }) = &config.problem else {
                return Err(kind_mismatch(command, "linear", &config.problem));
            };
            let g = forcing(g, &basis, base_dir)?;
            let report = solve_linear(&g, &w)?;
            bundle.add("solution.csv", solution_csv(&report.solution));
            bundle.add(
                "report.json",
                json_bytes(&json!({
                    "command": command.name(),
                    "basis": basis_json,
                    "w": w.terms(),
                    "strong_residual": report.strong_residual,
                    "weak_residual_max": report.weak_residual_max,
                    "tolerance": default_tolerance(&g),
                    "equivalent": report.equivalent,
                    "inverse_bound": report.inverse_bound,
                    "forcing_coefficients": g.coeffs(),
                    "solution_coefficients": report.solution.coeffs(),
                })),
            );
            summary.push_str(&format!(
                "strong residual {}\nweak residual {}\n",
                fmt_f64(report.strong_residual),
                fmt_f64(report.weak_residual_max)
            ));
        }
        Command::SolveNonlinear => {
            let ProblemSpec::Nonlinear(NonlinearProblem {
                nonlinearity,
                optimizer,
            }) = &config.problem
            else {
                return Err(kind_mismatch(command, "nonlinear", &config.problem));
            };
            let nl = build_nonlinearity(nonlinearity, basis.domain(), base_dir)?;
            let growth = check_growth(nl.as_ref(), basis.domain(), optimizer.growth_range, GROWTH_SAMPLES);
            let coercivity = check_coercivity(nl.as_ref(), &w, &basis);
            let opts = MinimizeOptions {
                gtol: optimizer.gtol,
                max_iters: optimizer.max_iters,
                u0: optimizer.u0.clone(),
                allow_noncoercive: optimizer.allow_noncoercive,
                ..MinimizeOptions::default()
            };
            let (primary, starts, spread) =
                match minimize_multistart(nl.as_ref(), &w, &basis, &opts, optimizer.multi_start, config.seed) {
                    Ok(r) => (r.primary, r.starts, Some(r.energy_spread)),
                    Err(Error::NotConverged { report }) => {
                        let r = (*report).clone();
                        deferred = Some(Error::NotConverged { report });
                        (r, Vec::new(), None)
                    }
                    Err(Error::LineSearchFailure { report }) => {
                        let r = (*report).clone();
                        deferred = Some(Error::LineSearchFailure { report });
                        (r, Vec::new(), None)
                    }
                    Err(e) => return Err(e),
                };
            bundle.add("solution.csv", solution_csv(&primary.solution));
            bundle.add("energy_log.csv", energy_log(&primary));
            bundle.add(
                "report.json",
                json_bytes(&json!({
                    "command": command.name(),
                    "basis": basis_json,
                    "w": w.terms(),
                    "coercivity": coercivity,
                    "growth": growth,
                    "converged": primary.converged,
                    "energy": primary.energy,
                    "gradient_norm": primary.gradient_norm,
                    "euler_lagrange_residual": primary.euler_lagrange_residual,
                    "iterations": primary.iterations,
                    "multi_start": {"starts": starts, "energy_spread": spread},
                    "solution_coefficients": primary.solution.coeffs(),
                })),
            );
            summary.push_str(&format!(
                "energy {}\neuler-lagrange residual {}\niterations {}\n",
                fmt_f64(primary.energy),
                fmt_f64(primary.euler_lagrange_residual),
                primary.iterations
            ));
            if let Some(s) = spread {
                if optimizer.multi_start > 0 {
                    summary.push_str(&format!("multi-start energy spread {}\n", fmt_f64(s)));
                }
            }
        }
        Command::Verify => {
            let checks = run_suite(&basis, &w, config.seed)?;
            ok = checks.iter().all(|c| c.passed);
            let mut csv = Csv::new(&["check", "passed", "value", "threshold", "cases"]);
            for c in &checks {
                csv.row([
                    c.name.to_string(),
                    c.passed.to_string(),
                    fmt_f64(c.value),
                    fmt_f64(c.threshold),
                    c.cases.to_string(),
                ]);
                summary.push_str(&format!(
                    "{:<28} {:<4} {:>12.3e} <= {:.1e}\n",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.value,
                    c.threshold
                ));
            }
            bundle.add("verify.csv", csv.into_bytes());
            bundle.add(
                "report.json",
                json_bytes(&json!({
                    "command": command.name(),
                    "basis": basis_json,
                    "all_passed": ok,
                    "checks": checks,
                })),
            );
        }
        Command::Convergence => unreachable!(),
    }

    write(&bundle, command, config, out_dir)?;
    if let Some(e) = deferred {
        return Err(e);
    }
    Ok(Outcome {
        bundle,
        out_dir: out_dir.to_path_buf(),
        summary,
        ok,
    })
}

fn kind_mismatch(command: Command, expected: &str, got: &ProblemSpec) -> Error {
    Error::config(
        "/problem/kind",
        format!(
            "{} needs a problem of kind \"{expected}\", config has \"{}\"",
            command.name(),
            got.name()
        ),
    )
}

/// Canonical config JSON without the output location, so the same problem
/// written to two directories yields identical manifests.
pub fn config_fingerprint(config: &RunConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("output");
    }
    v.to_string()
}

fn write(bundle: &Bundle, command: Command, config: &RunConfig, out_dir: &Path) -> Result<()> {
    let m = bundle.write(out_dir, command.name(), &config_fingerprint(config), config.seed)?;
    log::info!("wrote {} files to {}", m.files.len() + 1, out_dir.display());
    Ok(())
}

fn eigen_csv(basis: &SpectralBasis) -> Vec<u8> {
    let mut csv = Csv::new(&["j", "lambda", "mode_index", "residual"]);
    for (j, p) in basis.pairs().iter().enumerate() {
        let mode = p.mode_index.as_ref().map_or(String::new(), |m| {
            m.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ")
        });
        csv.row([(j + 1).to_string(), fmt_f64(p.lambda), mode, fmt_f64(p.residual)]);
    }
    csv.into_bytes()
}

fn coordinate_header(dim: usize, tail: &str) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).chain([tail.to_string()]).collect()
}

fn solution_csv(u: &SpectralFunction) -> Vec<u8> {
    let domain = u.basis().domain();
    let header = coordinate_header(domain.dim(), "u");
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for (x, v) in domain.nodes().zip(u.synthesize()) {
        csv.row(x.iter().map(|c| fmt_f64(*c)).chain([fmt_f64(v)]));
    }
    csv.into_bytes()
}

fn energy_log(report: &MinimizeReport) -> Vec<u8> {
    let mut csv = Csv::new(&["iteration", "energy", "gradient_norm", "step"]);
    for r in &report.history {
        csv.row([r.iteration.to_string(), fmt_f64(r.energy), fmt_f64(r.gradient_norm), fmt_f64(r.step)]);
    }
    csv.into_bytes()
}

/// Reads a node table: `dim` coordinate columns followed by at least
/// `min_values` value columns, one row per quadrature node in node order.
pub fn read_node_table(path: &Path, domain: &Domain, min_values: usize) -> Result<Vec<Vec<f64>>> {
    let shown = path.display().to_string();
    let bad = |msg: String| Error::InvalidArgument(format!("{shown}: {msg}"));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: shown.clone(),
                source,
            },
            other => bad(format!("{other:?}")),
        })?;
    let dim = domain.dim();
    let tol = 1e-9 * domain.grid_spacing().unwrap_or(1.0).max(1e-300);
    let mut rows = Vec::with_capacity(domain.node_count());
    for (q, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", q + 1)))?;
        if values.len() < dim + min_values {
            return Err(bad(format!(
                "row {} has {} columns, expected at least {}",
                q + 1,
                values.len(),
                dim + min_values
            )));
        }
        if q < domain.node_count() {
            let node = domain.node(q);
            if node.iter().zip(&values).any(|(a, b)| (a - b).abs() > tol.max(1e-12 * a.abs())) {
                return Err(bad(format!(
                    "row {} coordinates {:?} do not match node {:?}",
                    q + 1,
                    &values[..dim],
                    node
                )));
            }
        }
        rows.push(values[dim..].to_vec());
    }
    if rows.len() != domain.node_count() {
        return Err(Error::LengthMismatch {
            expected: domain.node_count(),
            actual: rows.len(),
        });
    }
    Ok(rows)
}

fn field(spec: &FieldSpec, domain: &Domain, base_dir: &Path) -> Result<Field> {
    Ok(match spec {
        FieldSpec::Constant(v) => Field::Constant(*v),
        FieldSpec::Samples { samples_csv } => Field::Samples(
            read_node_table(&base_dir.join(samples_csv), domain, 1)?
                .into_iter()
                .map(|r| r[0])
                .collect(),
        ),
    })
}

fn forcing(spec: &ForcingSpec, basis: &Arc<SpectralBasis>, base_dir: &Path) -> Result<SpectralFunction> {
    let domain = basis.domain();
    match spec {
        ForcingSpec::Coefficients(c) => SpectralFunction::new(basis.clone(), c.clone()),
        ForcingSpec::Constant(v) => SpectralFunction::project(basis.clone(), &vec![*v; domain.node_count()]),
        ForcingSpec::SamplesCsv(path) => {
            let samples: Vec<f64> = read_node_table(&base_dir.join(path), domain, 1)?
                .into_iter()
                .map(|r| r[0])
                .collect();
            SpectralFunction::project(basis.clone(), &samples)
        }
    }
}

fn build_nonlinearity(spec: &NonlinearitySpec, domain: &Domain, base_dir: &Path) -> Result<Box<dyn Nonlinearity>> {
    Ok(match spec {
        NonlinearitySpec::BuiltinExample(e) => {
            Box::new(ExampleNonlinearity::for_domain(e.a, field(&e.b, domain, base_dir)?, domain)?)
        }
        NonlinearitySpec::Polynomial(PolynomialSpec {
            coefficients,
            coefficients_csv,
            growth,
        }) => {
            let fields = if let Some(c) = coefficients {
                c.iter().map(|v| Field::Constant(*v)).collect()
            } else {
                let path = coefficients_csv.as_ref().expect("validated");
                let rows = read_node_table(&base_dir.join(path), domain, 1)?;
                let width = rows[0].len();
                if rows.iter().any(|r| r.len() != width) {
                    return Err(Error::InvalidArgument(format!("{path}: ragged coefficient rows")));
                }
                (0..width)
                    .map(|p| Field::Samples(rows.iter().map(|r| r[p]).collect()))
                    .collect()
            };
            let mut nl = PolynomialNonlinearity::for_domain(fields, domain)?;
            if let Some(g) = growth {
                nl = nl.with_growth(*g);
            }
            Box::new(nl)
        }
    })
}
