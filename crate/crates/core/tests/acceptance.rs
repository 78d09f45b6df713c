//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use fraclap::calculus::{apply_power, m_beta, norm_beta, norm_tilde};
use fraclap::eigen::{discrete_basis, eigen_convergence_report};
use fraclap::linear::{default_tolerance, solve_linear, strong_residual, weak_residual_dual};
use fraclap::variational::{
    check_coercivity, energy, gradient, minimize, minimize_multistart, ExampleNonlinearity, Field,
    FnNonlinearity, GrowthConstants, MinimizeOptions, Nonlinearity, PolynomialNonlinearity,
};
use fraclap::{analytic_box_basis, Domain, FractionalPolynomial, SpectralBasis, SpectralFunction, Term};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn square_basis(j: usize) -> Arc<SpectralBasis> {
    let d = Domain::make_box(&[PI, PI]).unwrap();
    Arc::new(analytic_box_basis(&d, j).unwrap())
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_w(rng: &mut ChaCha8Rng) -> FractionalPolynomial {
    let k = rng.random_range(1..=3);
    let mut betas: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    FractionalPolynomial::new(
        betas
            .into_iter()
            .map(|beta| Term {
                alpha: rng.random_range(0.1..2.0),
                beta,
            })
            .collect(),
    )
    .unwrap()
}

/// Eigenvalues k1² + k2² of the unit-π square, by brute-force enumeration.
fn enumerated_square_spectrum(count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (1..40)
        .flat_map(|a| (1..40).map(move |b| (a * a + b * b) as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

fn spectrum() -> Verdict {
    let basis = square_basis(5);
    let got = basis.eigenvalues();
    let want = enumerated_square_spectrum(5);
    verdict(
        got == want.as_slice() && got[0] == 2.0,
        format!("lambda = {got:?}, expected {want:?}"),
    )
}

fn discrete_agreement() -> Verdict {
    let exact = enumerated_square_spectrum(10);
    let mut errors: Vec<Vec<f64>> = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for m in [16usize, 32, 64] {
        let d = Domain::make_box_with_resolution(&[PI, PI], m).unwrap();
        let b = discrete_basis(&d, 10).unwrap();
        let e: Vec<f64> = b
            .eigenvalues()
            .iter()
            .zip(&exact)
            .map(|(l, x)| (l - x).abs())
            .collect();
        if m == 64 {
            worst_rel = b
                .eigenvalues()
                .iter()
                .zip(&exact)
                .map(|(l, x)| (l - x).abs() / x)
                .fold(0.0, f64::max);
        }
        errors.push(e);
    }
    // Observed order against the exact limit, for both refinement steps.
    let mut orders = Vec::new();
    for step in 0..2 {
        for j in 0..10 {
            orders.push((errors[step][j] / errors[step + 1][j]).log2());
        }
    }
    let (omin, omax) = orders
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    // The extrapolated order from the library's refinement study, same spacings.
    let d = Domain::make_box_with_resolution(&[PI, PI], 16).unwrap();
    let report = eigen_convergence_report(&d, 10, &[PI / 16.0, PI / 32.0, PI / 64.0]).unwrap();
    let richardson_ok = report
        .orders
        .iter()
        .all(|o| o.is_some_and(|o| (1.8..=2.2).contains(&o)));
    verdict(
        worst_rel <= 0.01 && omin >= 1.8 && omax <= 2.2 && richardson_ok,
        format!(
            "max rel error at h=pi/64 {worst_rel:.2e}; order vs exact in [{omin:.4}, {omax:.4}]; \
             extrapolated orders {:?}",
            report.orders.iter().map(|o| o.map(|v| (v * 1e4).round() / 1e4)).collect::<Vec<_>>()
        ),
    )
}

fn calculus_identities() -> Verdict {
    let basis = square_basis(25);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, 25)).unwrap();
        let (b1, b2) = (rng.random_range(0.0..1.5), rng.random_range(0.0..1.5));
        let lhs = apply_power(&apply_power(&u, b1).unwrap(), b2).unwrap();
        let rhs = apply_power(&u, b1 + b2).unwrap();
        for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            if *b != 0.0 {
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
    }
    // M_beta = 1 on this square since λ_1 = 2 > 1.
    let m = 1.0;
    let mut violations = 0;
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let c: Vec<f64> = random_coeffs(&mut rng, 25).iter().map(|v| v * scale).collect();
        let u = SpectralFunction::new(basis.clone(), c).unwrap();
        let beta = 3.0 - rng.random_range(0.0..3.0);
        let t = norm_tilde(&u, beta);
        let full = norm_beta(&u, beta);
        let slack = 1.0 + 1e-12;
        if !(t <= full * slack && full <= (m + 1.0f64).sqrt() * t * slack) {
            violations += 1;
        }
    }
    verdict(
        worst <= 1e-12 && violations == 0 && m_beta(basis.eigenvalues(), 1.0) == m,
        format!("semigroup max rel error {worst:.2e}; sandwich violations {violations}/1000"),
    )
}

fn linear_round_trip() -> Verdict {
    let basis = square_basis(64);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    let mut oracle_err: f64 = 0.0;
    for _ in 0..100 {
        let w = random_w(&mut rng);
        let truth = random_coeffs(&mut rng, 64);
        // g_j = w(λ_j)² u*_j, written out directly.
        let g_coeffs: Vec<f64> = truth
            .iter()
            .zip(basis.eigenvalues())
            .map(|(u, &l)| {
                let wl: f64 = w.terms().iter().map(|t| t.alpha * l.powf(t.beta)).sum();
                wl * wl * u
            })
            .collect();
        let g = SpectralFunction::new(basis.clone(), g_coeffs).unwrap();
        let report = solve_linear(&g, &w).unwrap();
        for (a, b) in report.solution.coeffs().iter().zip(&truth) {
            worst = worst.max((a - b).abs());
        }
        let tol = default_tolerance(&g);
        let classify = |u: &SpectralFunction| {
            let s = strong_residual(u, &g, &w).unwrap() <= tol;
            let wk = weak_residual_dual(u, &g, &w).unwrap() <= tol;
            (s, wk)
        };
        let (s, wk) = classify(&report.solution);
        if !(s && wk) {
            disagreements += 1;
        }
        // Perturb one mode: the residual is exactly w(λ_m)² δ.
        let mode = rng.random_range(0..64);
        let delta = 10f64.powf(rng.random_range(-6.0..0.0));
        let mut c = report.solution.coeffs().to_vec();
        c[mode] += delta;
        let cand = SpectralFunction::new(basis.clone(), c).unwrap();
        let (s, wk) = classify(&cand);
        if s != wk {
            disagreements += 1;
        }
        let expected = w.eval_sq(basis.eigenvalues()[mode]) * delta;
        let measured = strong_residual(&cand, &g, &w).unwrap();
        oracle_err = oracle_err.max((measured - expected).abs() / expected);
    }
    verdict(
        worst <= 1e-10 && disagreements == 0 && oracle_err <= 1e-6,
        format!(
            "max coefficient error {worst:.2e}; classification disagreements {disagreements}/200; \
             perturbation residual vs exact {oracle_err:.2e}"
        ),
    )
}

fn bounded_inverse() -> Verdict {
    let basis = square_basis(25);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for _ in 0..1000 {
        let w = random_w(&mut rng);
        let g = SpectralFunction::new(basis.clone(), random_coeffs(&mut rng, 25)).unwrap();
        let u = solve_linear(&g, &w).unwrap().solution;
        let lead = w.leading();
        // M_{2β_k} = 1 because every eigenvalue exceeds 1.
        let bound = g.l2_norm() / (lead.alpha * lead.alpha);
        let ratio = u.l2_norm() / bound;
        tightest = tightest.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!("violations {violations}/1000; largest ||u||/bound {tightest:.4}"),
    )
}

fn random_nonlinearity(rng: &mut ChaCha8Rng, case: usize) -> Box<dyn Nonlinearity> {
    let inf = f64::INFINITY;
    let growth = GrowthConstants {
        a: inf,
        b: inf,
        c: inf,
        d: inf,
        upper_a: inf,
        upper_b: inf,
        upper_c: inf,
    };
    match case % 3 {
        0 => Box::new(ExampleNonlinearity::new(
            rng.random_range(-1.0..1.0),
            Field::Constant(rng.random_range(-1.0..1.0)),
        )),
        1 => Box::new(PolynomialNonlinearity::new(
            (0..4).map(|_| Field::Constant(rng.random_range(-1.0..1.0))).collect(),
        )),
        _ => {
            let c = rng.random_range(0.1..2.0);
            Box::new(FnNonlinearity {
                f: move |_, x: &[f64], u: f64| c * x[0].sin() * (1.0 + u * u).ln(),
                df: move |_, x: &[f64], u: f64| c * x[0].sin() * 2.0 * u / (1.0 + u * u),
                growth,
            })
        }
    }
}

fn gradient_fd() -> Verdict {
    let basis = square_basis(16);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let (nl, w): (Box<dyn Nonlinearity>, FractionalPolynomial) = if case == 0 {
            (
                Box::new(ExampleNonlinearity::new(0.5, Field::Constant(0.1))),
                FractionalPolynomial::monomial(1.0, 0.5).unwrap(),
            )
        } else {
            (random_nonlinearity(&mut rng, case), random_w(&mut rng))
        };
        let c = random_coeffs(&mut rng, 16);
        let d = random_coeffs(&mut rng, 16);
        let u = SpectralFunction::new(basis.clone(), c.clone()).unwrap();
        let g = gradient(&u, nl.as_ref(), &w).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| {
            let v: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            energy(&SpectralFunction::new(basis.clone(), v).unwrap(), nl.as_ref(), &w).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((fd - an).abs() / an.abs().max(gnorm * dnorm));
    }
    verdict(worst <= 1e-5, format!("max relative mismatch {worst:.2e} over 50 cases"))
}

fn nonlinear_instance() -> Verdict {
    let basis = square_basis(25);
    let w = FractionalPolynomial::monomial(1.0, 0.5).unwrap();
    let nl = ExampleNonlinearity::new(0.5, Field::Constant(0.1));
    let coercive = check_coercivity(&nl, &w, &basis);
    let report = minimize_multistart(&nl, &w, &basis, &MinimizeOptions::default(), 5, 11);
    let Ok(report) = report else {
        return verdict(false, format!("minimizer failed: {:?}", report.err()));
    };
    let energies: Vec<f64> = report.starts.iter().map(|s| s.energy).collect();
    let (lo, hi) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let all_converged = report.primary.converged && report.starts.iter().all(|s| s.converged);
    let res = report.primary.euler_lagrange_residual;
    verdict(
        (coercive.threshold - 1.0).abs() < 1e-15
            && all_converged
            && res <= 1e-6
            && energies.len() == 5
            && hi - lo <= 1e-8,
        format!(
            "EL residual {res:.2e} after {} iterations; energy {:.12}; 5-start spread {:.2e}; \
             coercivity threshold {}",
            report.primary.iterations,
            report.primary.energy,
            hi - lo,
            coercive.threshold
        ),
    )
}

fn linear_limit() -> Verdict {
    let basis = square_basis(25);
    let domain = basis.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = random_w(&mut rng);
        let (a, b, c) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.5..3.0),
        );
        let samples = domain.sample(|x| a + b * (c * x[0]).cos() * x[1].sin() + x[0] * x[1]);
        let g = SpectralFunction::project(basis.clone(), &samples).unwrap();
        let expected = solve_linear(&g, &w).unwrap().solution;
        let nl = PolynomialNonlinearity::linear(Field::Samples(samples));
        // The energy is strongly convex with modulus min_j w(λ_j)², so
        // ‖u − u*‖ ≤ ‖∇f‖ / min_j w(λ_j)²; stop when that bound is 1e-8.
        let modulus = basis.eigenvalues().iter().map(|&l| w.eval_sq(l)).fold(f64::INFINITY, f64::min);
        let opts = MinimizeOptions {
            gtol: Some(1e-8 * modulus),
            ..MinimizeOptions::default()
        };
        let got = match minimize(&nl, &w, &basis, &opts) {
            Ok(r) => r.solution,
            Err(e) => return verdict(false, format!("minimizer failed: {e}")),
        };
        for (x, y) in got.coeffs().iter().zip(expected.coeffs()) {
            worst = worst.max((x - y).abs());
        }
    }
    verdict(worst <= 1e-6, format!("max coefficient difference {worst:.2e} over 20 forcings"))
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let bytes = std::fs::read(entry.path()).unwrap();
        out.insert(
            entry.file_name().into_string().unwrap(),
            hex::encode(Sha256::digest(&bytes)),
        );
    }
    out
}

fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_fraclap");
    let tmp = tempfile::tempdir().unwrap();
    let sq = r#""domain":{"kind":"box","lengths":[3.141592653589793,3.141592653589793]}"#;
    let runs = [
        ("eig", format!(r#"{{{sq},"basis":{{"J":5}}}}"#)),
        (
            "convergence",
            format!(
                r#"{{{sq},"basis":{{"source":"discrete","J":10}},"problem":{{"kind":"convergence",
                "spacings":[0.19634954084936207,0.09817477042468103,0.04908738521234052]}}}}"#
            ),
        ),
        ("verify", format!(r#"{{{sq},"basis":{{"J":25}},"seed":9}}"#)),
        (
            "solve-linear",
            format!(
                r#"{{{sq},"basis":{{"J":64}},"w":[[0.5,0.25],[1.5,1.0]],
                "problem":{{"kind":"linear","g":{{"constant":1.0}}}}}}"#
            ),
        ),
        (
            "solve-nonlinear",
            format!(
                r#"{{{sq},"basis":{{"J":25}},"w":[[1,0.5]],
                "problem":{{"kind":"nonlinear","nonlinearity":{{"kind":"builtin_example","A":0.5,"b":0.1}},
                "optimizer":{{"multi_start":5}}}},"seed":7}}"#
            ),
        ),
        (
            "solve-nonlinear",
            format!(
                r#"{{{sq},"basis":{{"J":25}},"w":[[1,0.5]],
                "problem":{{"kind":"nonlinear","nonlinearity":{{"kind":"polynomial","coefficients":[0,1]}}}}}}"#
            ),
        ),
    ];
    let mut files = 0;
    for (i, (cmd, cfg)) in runs.iter().enumerate() {
        let cfg_path = tmp.path().join(format!("c{i}.json"));
        std::fs::write(&cfg_path, cfg).unwrap();
        let mut hashes = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("out{i}_{rep}"));
            let status = Command::new(exe)
                .args([*cmd, "--quiet", "--config"])
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            if !status.success() {
                return verdict(false, format!("{cmd} run {i} exited with {status}"));
            }
            hashes.push(hash_dir(&out));
        }
        if hashes[0] != hashes[1] {
            return verdict(false, format!("{cmd} run {i} differs between repetitions"));
        }
        files += hashes[0].len();
    }
    verdict(true, format!("{} configs, {files} files byte-identical across two runs", runs.len()))
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict, Duration);
    let criteria: [Criterion; 9] = [
        ("spectrum", spectrum, Duration::from_secs(1)),
        ("discrete-analytic agreement", discrete_agreement, Duration::from_secs(60)),
        ("operator-calculus identities", calculus_identities, Duration::from_secs(5)),
        ("linear solve round trip", linear_round_trip, Duration::from_secs(5)),
        ("bounded inverse", bounded_inverse, Duration::from_secs(5)),
        ("gradient correctness", gradient_fd, Duration::from_secs(30)),
        ("nonlinear existence instance", nonlinear_instance, Duration::from_secs(120)),
        ("linear-limit oracle", linear_limit, Duration::from_secs(30)),
        ("determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed < *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.2}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
