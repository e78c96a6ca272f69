//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and runtime budgets are the contract's own.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use noisebound::catalog::{
    bench_system, random_elliptic_population, random_langevin_plant, random_spd, random_system, scalar_catalog,
};
use noisebound::cgf_bounds::{
    asymptotic_coefficient, kl_upper_bound, nu, phi_of_eps, solve_theta_k, CgfModel, DomainEdge,
};
use noisebound::lingauss::{
    dirichlet_bound_sides, dirichlet_identity_residual, ellipticity_constants, k_lower_bound, saturating_drift,
    GaussianAnalysis, GaussianCgf, LinearGaussianSystem,
};
use noisebound::numkit::{gaussian_stream, Matrix};
use noisebound::scalar_fpk::{saturation_round_trip, Polynomial, ScalarDiffusionModel, GridSpec};
use noisebound::sde_sim::{ergodic_moments, SimConfig, SimModel};
use noisebound_cli::commands::{benchmark_config, paper_example, simulate, SimOverrides};
use serde_json::Value;

/// Failure messages collected by one criterion.
type Failures = Vec<String>;

fn check(failures: &mut Failures, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

fn run(id: u32, title: &str, budget: Option<Duration>, body: impl FnOnce(&mut Failures)) -> bool {
    let start = Instant::now();
    let mut failures = Failures::new();
    body(&mut failures);
    let elapsed = start.elapsed();
    if let Some(budget) = budget.filter(|b| elapsed > *b) {
        failures.push(format!("runtime {:.2}s exceeds {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()));
    }
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("{verdict} criterion {id}: {title} ({:.2}s)", elapsed.as_secs_f64());
    if !failures.is_empty() {
        line.push_str(": ");
        line.push_str(&failures.join("; "));
    }
    println!("{line}");
    failures.is_empty()
}

fn golden(f: &mut Failures) {
    let report = paper_example(None);
    let expected_tol = [
        ("lambda_min_R", 1e-3),
        ("K", 1e-2),
        ("theta_star", 1e-3),
        ("nf_hinf", 1e-3),
        ("P_max_entry_deviation", 1e-3),
        ("kl_exact", 1e-3),
        ("kl_bound", 1e-3),
    ];
    for (name, tol) in expected_tol {
        let c = report.checks.iter().find(|c| c.name == name).expect("check present");
        check(f, c.tol == tol, || format!("{name} checked at {} instead of {tol}", c.tol));
        check(f, c.deviation <= tol, || {
            format!("{name} = {} vs {} (deviation {:.2e} > {tol:e})", c.value, c.expected, c.deviation)
        });
    }
}

fn population(seed: u64, count: usize) -> Vec<LinearGaussianSystem> {
    (0..count)
        .map(|i| {
            let mut rng = gaussian_stream(seed, i as u64);
            let n = 1 + (rng.next_u64() % 6) as usize;
            let m = 1 + (rng.next_u64() % 6) as usize;
            random_system(&mut rng, n, m)
        })
        .collect()
}

fn identity_property(f: &mut Failures) {
    for (i, sys) in population(901, 200).iter().enumerate() {
        let p_star = sys.nominal_covariance().unwrap();
        let p = sys.perturbed_covariance().unwrap();
        let scale = 1.0 + sys.n().frobenius_norm() * p.frobenius_norm();
        let res = dirichlet_identity_residual(sys, &p_star, &p).unwrap();
        check(f, res.abs() <= 1e-8 * scale, || format!("system {i}: identity residual {res:e}"));
        let (lhs, rhs) = dirichlet_bound_sides(sys, &p_star, &p).unwrap();
        check(f, lhs <= rhs + 1e-8, || format!("system {i}: bound {lhs} > {rhs}"));
    }
}

fn reversible(f: &mut Failures) {
    for i in 0..50 {
        let mut rng = gaussian_stream(902, i);
        let n = 1 + (rng.next_u64() % 5) as usize;
        let (a, b) = random_langevin_plant(&mut rng, n);
        let target = random_spd(&mut rng, n, 0.2);
        let n_sat = saturating_drift(&a, &b, &target).unwrap();
        let sys = LinearGaussianSystem::new(a, b, n_sat).unwrap();
        let p = sys.perturbed_covariance().unwrap();
        let err = p.sub(&target).unwrap().max_abs() / target.max_abs().max(1.0);
        check(f, err <= 1e-8, || format!("system {i}: covariance error {err:e}"));
        let p_star = sys.nominal_covariance().unwrap();
        let (lhs, rhs) = dirichlet_bound_sides(&sys, &p_star, &p).unwrap();
        let gap = (rhs - lhs).abs() / rhs.max(f64::MIN_POSITIVE);
        check(f, gap <= 1e-8, || format!("system {i}: bound gap {gap:e}"));
    }
}

fn random_cgf(seed: u64, n: usize, m: usize) -> GaussianCgf {
    let mut rng = gaussian_stream(seed, 0);
    let p_star = random_spd(&mut rng, n, 0.1);
    let nmat = Matrix::from_fn(m, n, |_, _| rng.next_normal());
    GaussianCgf::new(&nmat, &p_star).unwrap()
}

/// `sup{ε ≥ 0 : ε ≤ 2KΦ(ε)}` by scanning `phi_of_eps` and bisecting the last
/// sign change.
fn fixed_point_scan(model: &GaussianCgf, k: f64, top: f64) -> f64 {
    let g = |eps: f64| eps - 2.0 * k * phi_of_eps(model, eps).unwrap();
    let steps = 2000;
    let mut last_ok = 0.0;
    for i in 1..=steps {
        let eps = top * i as f64 / steps as f64;
        if g(eps) <= 0.0 {
            last_ok = eps;
        }
    }
    let (mut lo, mut hi) = (last_ok, last_ok + top / steps as f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `ln E exp(θ|Nx|²)`, `x ~ N(0, P*)`, by stretched tensor Gauss–Hermite.
fn log_xi_quadrature(n: &Matrix, p_star: &Matrix, theta: f64, theta_star: f64, nodes: usize) -> f64 {
    let dim = p_star.rows();
    let l = common::cholesky(&common::to_na(p_star));
    let nn = common::to_na(n);
    let m = l.transpose() * nn.transpose() * &nn * &l;
    let beta2 = 1.0 / (1.0 - theta / theta_star);
    let beta = beta2.sqrt();
    let val = common::gh_expect(dim, nodes, |u| {
        let z = DMatrix::from_column_slice(dim, 1, u).scale(beta);
        let q = (z.transpose() * &m * &z)[(0, 0)];
        let uu: f64 = u.iter().map(|v| v * v).sum();
        (theta * q - 0.5 * (beta2 - 1.0) * uu).exp()
    });
    val.ln() + 0.5 * dim as f64 * beta2.ln()
}

fn cgf_machinery(f: &mut Failures) {
    for seed in 0..20u64 {
        let model = random_cgf(903 + seed, 1 + seed as usize % 4, 1 + seed as usize % 3);
        let ts = model.theta_star.finite().expect("nonzero drift");
        let top = ts * (1.0 - 1e-3);
        let mut prev = nu(&model, 0.0).unwrap();
        for i in 1..200 {
            let v = nu(&model, top * i as f64 / 199.0).unwrap();
            check(f, v > prev, || format!("model {seed}: nu not increasing at step {i}"));
            prev = v;
        }
        for frac in [0.01, 0.1, 0.25, 0.4, 0.49] {
            let k = frac * ts;
            let theta = solve_theta_k(&model, k).unwrap();
            check(f, theta > 2.0 * k && theta < ts, || format!("model {seed}: theta_K {theta} outside (2K, theta*)"));
            let lhs = model.nu(theta);
            let rhs = 2.0 * k * model.psi_prime(theta);
            check(f, (lhs - rhs).abs() <= 1e-8 * rhs.abs(), || {
                format!("model {seed}: nu(theta_K) {lhs} vs 2K psi'(theta_K) {rhs}")
            });
        }
        if seed < 8 {
            let k = 0.3 * ts * (seed as f64 + 1.0) / 9.0;
            let bound = kl_upper_bound(&model, k).unwrap().kl_bound;
            let scanned = fixed_point_scan(&model, k, 3.0 * bound);
            check(f, (scanned - bound).abs() <= 1e-6, || format!("model {seed}: fixed point {scanned} vs {bound}"));
        }
    }
    let mut checked = 0;
    for i in 0..12 {
        let mut rng = gaussian_stream(904, i);
        let n = 1 + (i as usize % 3);
        let m = 1 + (rng.next_u64() % 3) as usize;
        let sys = random_system(&mut rng, n, m);
        let p_star = sys.nominal_covariance().unwrap();
        let cgf = GaussianCgf::new(sys.n(), &p_star).unwrap();
        let DomainEdge::Finite(ts) = cgf.theta_star else { continue };
        for frac in [0.1, 0.5, 0.9] {
            let oracle = log_xi_quadrature(sys.n(), &p_star, frac * ts, ts, 90);
            let psi = cgf.psi(frac * ts);
            check(f, (psi - oracle).abs() <= 1e-5, || format!("system {i} at {frac} theta*: {psi} vs {oracle}"));
        }
        checked += 1;
    }
    check(f, checked >= 10, || format!("only {checked} quadrature systems had finite theta*"));
}

fn asymptotics(f: &mut Failures) {
    let ga = GaussianAnalysis::compute(&bench_system()).unwrap();
    let model = ga.cgf;
    let target = asymptotic_coefficient(&model);
    let lead = 2.0 * model.psi_prime(0.0);
    let mut deviations = Vec::new();
    for k in [1e-3, 1e-4, 1e-5] {
        let bound = kl_upper_bound(&model, k).unwrap().kl_bound;
        deviations.push((((bound - lead * k) / f64::powf(k, 1.5)) - target).abs() / target);
    }
    check(f, deviations.windows(2).all(|w| w[1] < w[0]), || format!("deviations not decreasing: {deviations:?}"));
    check(f, deviations[2] <= 0.05, || format!("final deviation {:.3e} > 5%", deviations[2]));
}

fn fpk_chain(f: &mut Failures) {
    let catalog = scalar_catalog();
    check(f, catalog.len() == 10, || format!("catalog has {} models", catalog.len()));
    let rel = |b: f64| 1e-5 * (1.0 + b.abs());
    for (name, model) in &catalog {
        let c = model.analyze().unwrap().chain;
        check(f, c.identity_residual.abs() <= 1e-5 * (1.0 + c.e_h2), || {
            format!("{name}: identity residual {:e}", c.identity_residual)
        });
        check(f, c.bound_ok, || format!("{name}: E|psi|^2 {} > 4E|h|^2 {}", c.e_psi2, 4.0 * c.e_h2));
        if c.mu > 0.0 {
            let k = 1.0 / (c.lambda * c.mu);
            let ls = c.fisher / (2.0 * c.mu);
            let gain = 2.0 * k * c.e_h2;
            check(f, c.kl <= ls + rel(ls), || format!("{name}: kl {} > fisher/(2mu) {ls}", c.kl));
            check(f, ls <= gain + rel(gain), || format!("{name}: fisher/(2mu) {ls} > 2K E|h|^2 {gain}"));
        }
        let target = Polynomial::new(vec![0.0, 0.1, -0.05]);
        let sat = saturation_round_trip(model, |x| target.eval(x)).unwrap();
        let ratio = sat.analysis.chain.saturation_ratio();
        check(f, (ratio - 1.0).abs() <= 1e-6, || format!("{name}: saturation ratio {ratio}"));
    }
}

fn mc_section(report: &Value) -> &Value {
    &report["extra"]["monte_carlo"]
}

fn monte_carlo(f: &mut Failures) {
    let (report, code) = simulate(&benchmark_config(), &SimOverrides::default()).unwrap();
    check(f, code == 0, || format!("benchmark simulate exit {code}"));
    let json = report.to_json();
    let v: Value = serde_json::from_str(&json).unwrap();
    let mc = mc_section(&v);
    check(f, mc["config"]["seed"] == 1, || "benchmark seed is not the default 1".into());
    check(f, mc["covariance_z_max"].as_f64().unwrap() <= 3.0, || {
        format!("benchmark covariance off by {} sigma", mc["covariance_z_max"])
    });
    check(f, mc["identity_covers_zero"] == true, || format!("benchmark identity CI {}", mc["moments"]["identity"]));
    check(f, mc["bound_holds"] == true, || format!("benchmark bound gap {}", mc["moments"]["bound_gap"]));
    let (again, _) = simulate(&benchmark_config(), &SimOverrides::default()).unwrap();
    check(f, again.to_json() == json, || "benchmark rerun is not bit-identical".into());

    let s2 = std::f64::consts::SQRT_2;
    let ou = ScalarDiffusionModel::new(
        Polynomial::new(vec![0.0, -1.0]),
        Polynomial::constant(s2),
        Polynomial::new(vec![0.0, 0.25]),
        GridSpec::default(),
    )
    .unwrap();
    let model = SimModel::scalar(&ou.analyze().unwrap(), &ou.f, &ou.g, &ou.h);
    let cfg = SimConfig {
        seed: 8,
        ..SimConfig::default()
    };
    let m = ergodic_moments(&model, &cfg).unwrap();
    let var = 1.0 / (1.0 - s2 * 0.25);
    let p = Matrix::from_diag(&[var]);
    check(f, m.covariance_z_max(&p) <= 3.0, || format!("OU variance {:?} vs {var}", m.second_moments[0][0]));
    check(f, m.identity_covers_zero(3.0), || format!("OU identity CI {:?}", m.identity));
    check(f, m.bound_holds(3.0), || format!("OU bound gap {:?}", m.bound_gap));
    let m2 = ergodic_moments(&model, &cfg).unwrap();
    check(f, m == m2, || "OU rerun is not bit-identical".into());
}

fn k_lower(f: &mut Failures) {
    for (i, sys) in random_elliptic_population(905, 200, 6).iter().enumerate() {
        let e = ellipticity_constants(sys.d(), &sys.nominal_covariance().unwrap()).unwrap();
        let lower = k_lower_bound(sys.a());
        // equality holds exactly in one dimension, so allow rounding
        check(f, e.k >= lower * (1.0 - 8.0 * f64::EPSILON), || format!("system {i}: K {} < {lower}", e.k));
    }
    for (a, sigma) in [(0.5, 0.3), (1.0, 1.0), (3.0, 2.0)] {
        let n = 3;
        let sys = LinearGaussianSystem::new(
            Matrix::identity(n).scale(-a),
            Matrix::identity(n).scale(sigma),
            Matrix::zeros(n, n),
        )
        .unwrap();
        let e = ellipticity_constants(sys.d(), &sys.nominal_covariance().unwrap()).unwrap();
        let lower = k_lower_bound(sys.a());
        check(f, (e.k - lower).abs() <= 1e-2 * lower, || format!("A = -{a}I: K {} vs {lower}", e.k));
    }
}

fn main() {
    let s = |secs| Some(Duration::from_secs(secs));
    let results = [
        run(1, "benchmark golden reproduction", s(1), golden),
        run(2, "Dirichlet identity and bound on 200 random systems", s(5), identity_property),
        run(3, "reversible achievability on 50 Langevin systems", s(5), reversible),
        run(4, "CGF bound machinery and quadrature oracle", s(10), cgf_machinery),
        run(5, "small-gain asymptotics on the benchmark", None, asymptotics),
        run(6, "1-D Fokker-Planck chain over the model catalog", s(30), fpk_chain),
        run(7, "Monte Carlo cross-validation", s(90), monte_carlo),
        run(8, "gain lower bound", s(1), k_lower),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
