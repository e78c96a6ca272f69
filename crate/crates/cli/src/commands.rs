//! Subcommand orchestration. Every builder here is pure; `main` owns I/O.

use noisebound::catalog::{bench_p, bench_system, BENCH_REFERENCE, BENCH_TAU};
use noisebound::cgf_bounds::{
    asymptotic_bound, default_theta_grid, kl_upper_bound, small_gain_curve, solve_theta_k, CgfModel, DomainEdge,
};
use noisebound::lingauss::{ellipticity_constants, GaussianAnalysis, GaussianCgf, LinearGaussianSystem};
use noisebound::numkit::{is_controllable, spectral_abscissa, Matrix};
use noisebound::scalar_fpk::{
    saturation_round_trip, FpkError, ScalarAnalysis, ScalarDiffusionModel, BOUND_ABS_TOL, CHAIN_REL_TOL,
    IDENTITY_REL_TOL,
};
use noisebound::sde_sim::{ergodic_moments, SimConfig, SimError, SimModel, STABILITY_PROXY_MAX};
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, ModelConfig, SimSettings, SystemConfig, Tolerances};
use crate::report::{fmt17, fmt6, AnalysisReport, Check, GateStatus, Inequality, Provenance};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_UNSTABLE: u8 = 2;

/// Slack allowed on the linear Dirichlet bound.
pub const LINEAR_BOUND_TOL: f64 = 1e-8;

/// `|E|ψ|²/(4E|h|²) − 1|` at or below which the saturating drift counts as
/// attaining equality.
pub const SATURATION_EQUALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("simulation diverged: {0}")]
    Unstable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Unstable(_) => EXIT_UNSTABLE,
            _ => EXIT_INVALID,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

/// A validated model together with its exact analysis.
pub enum Prepared {
    Linear {
        sys: LinearGaussianSystem,
        analysis: Box<GaussianAnalysis>,
    },
    Scalar {
        model: ScalarDiffusionModel,
        analysis: Box<ScalarAnalysis>,
    },
}

/// Runs every gate and, if the hard ones pass, the exact analysis.
///
/// Shape errors are input errors rather than gate failures.
pub fn prepare(cfg: &SystemConfig, tol: &Tolerances, command: &'static str) -> Result<(AnalysisReport, Option<Prepared>), CliError> {
    let seed = cfg.sim.and_then(|s| s.seed);
    let mut report = AnalysisReport::new(command, Some(cfg.clone()), Provenance::new(seed, *tol));
    let prepared = match &cfg.model {
        ModelConfig::Linear { a, b, n } => prepare_linear(&mut report, tol, a, b, n)?,
        ModelConfig::Scalar { f, g, h, grid, .. } => {
            let model = ScalarDiffusionModel {
                f: f.clone(),
                g: g.clone(),
                h: h.clone(),
                grid: *grid,
            };
            prepare_scalar(&mut report, model)?
        }
    };
    Ok((report, prepared))
}

fn check_shapes(a: &Matrix, b: &Matrix, n: &Matrix) -> Result<(), CliError> {
    if !a.is_square() {
        return Err(invalid(format!("`A` must be square, got {}x{}", a.rows(), a.cols())));
    }
    if b.rows() != a.rows() {
        return Err(invalid(format!("`B` must have {} rows, got {}", a.rows(), b.rows())));
    }
    if n.shape() != (b.cols(), a.rows()) {
        return Err(invalid(format!(
            "`N` must be {}x{}, got {}x{}",
            b.cols(),
            a.rows(),
            n.rows(),
            n.cols()
        )));
    }
    Ok(())
}

fn prepare_linear(
    report: &mut AnalysisReport,
    tol: &Tolerances,
    a: &Matrix,
    b: &Matrix,
    n: &Matrix,
) -> Result<Option<Prepared>, CliError> {
    check_shapes(a, b, n)?;
    for gate in ["confining_nominal", "confining_perturbed"] {
        report.set_gate(gate, GateStatus::Skipped, Some("scalar models only".into()));
    }
    let nominal = spectral_abscissa(a).map_err(invalid)?;
    let closed = a.add(&(b * n)).map_err(invalid)?;
    let perturbed = spectral_abscissa(&closed).map_err(invalid)?;
    let controllable = is_controllable(a, b).map_err(invalid)?;
    report.pass_if("hurwitz_nominal", nominal < 0.0, Some(format!("spectral abscissa of A: {}", fmt6(nominal))));
    report.pass_if(
        "hurwitz_perturbed",
        perturbed < 0.0,
        Some(format!("spectral abscissa of A+BN: {}", fmt6(perturbed))),
    );
    report.pass_if("controllable", controllable, None);
    report.pass_if(
        "normalizable",
        nominal < 0.0 && perturbed < 0.0,
        Some("Gaussian invariant laws exist iff both drifts are Hurwitz".into()),
    );
    if report.hard_failure() {
        for gate in ["elliptic", "nf_hinf_lt_1", "k_below_half_theta_star"] {
            report.set_gate(gate, GateStatus::Skipped, Some("system is not valid".into()));
        }
        return Ok(None);
    }

    let sys = LinearGaussianSystem::new(a.clone(), b.clone(), n.clone()).map_err(invalid)?;
    let ga = GaussianAnalysis::compute(&sys).map_err(invalid)?;
    let lambda_d = match &ga.ellipticity {
        Some(e) => format!("lambda_min(D) = {}", fmt6(e.lambda)),
        None => "D = BB^T is singular".into(),
    };
    report.pass_if("elliptic", ga.ellipticity.is_some(), Some(lambda_d));
    report.pass_if("nf_hinf_lt_1", ga.nf_hinf < 1.0, Some(format!("||NF||_inf = {}", fmt6(ga.nf_hinf))));

    report.inequalities.push(Inequality::new(
        "identity_residual",
        ga.identity_residual.abs(),
        tol.identity * ga.identity_scale,
        0.0,
    ));
    report
        .inequalities
        .push(Inequality::new("dirichlet_bound", ga.bound_lhs, ga.bound_rhs, LINEAR_BOUND_TOL));

    match ga.ellipticity {
        None => report.set_gate(
            "k_below_half_theta_star",
            GateStatus::Skipped,
            Some("gain K needs an elliptic diffusion".into()),
        ),
        Some(e) => {
            report.inequalities.push(Inequality::new("k_lower", ga.k_lower, e.k, 0.0));
            let available = match ga.cgf.theta_star {
                DomainEdge::Finite(ts) => {
                    report.pass_if(
                        "k_below_half_theta_star",
                        e.k < 0.5 * ts,
                        Some(format!("K = {}, theta*/2 = {}", fmt6(e.k), fmt6(0.5 * ts))),
                    );
                    e.k < 0.5 * ts
                }
                DomainEdge::Unbounded => {
                    report.pass_if("k_below_half_theta_star", true, Some("theta* is unbounded".into()));
                    true
                }
            };
            if available {
                let bound = kl_upper_bound(&ga.cgf, e.k).map_err(invalid)?.with_stealth(0.5 * ga.e_h2);
                report.inequalities.push(Inequality::new("kl_bound", ga.kl_exact, bound.kl_bound, 0.0));
                if let Some(s) = bound.stealthy_bound {
                    report.inequalities.push(Inequality::new("kl_stealthy", ga.kl_exact, s, 0.0));
                }
                report.bound = Some(bound);
            }
        }
    }
    report.linear = Some(ga.clone());
    Ok(Some(Prepared::Linear {
        sys,
        analysis: Box::new(ga),
    }))
}

fn prepare_scalar(report: &mut AnalysisReport, model: ScalarDiffusionModel) -> Result<Option<Prepared>, CliError> {
    model.grid.validate().map_err(|e| invalid(format!("`grid`: {e}")))?;
    for gate in ["hurwitz_nominal", "hurwitz_perturbed", "controllable", "nf_hinf_lt_1"] {
        report.set_gate(gate, GateStatus::Skipped, Some("linear models only".into()));
    }
    report.set_gate("k_below_half_theta_star", GateStatus::Skipped, Some("linear models only".into()));
    report.pass_if(
        "confining_nominal",
        model.f.is_confining(),
        Some("requires odd degree and negative leading coefficient of f".into()),
    );
    report.pass_if(
        "confining_perturbed",
        model.perturbed_drift().is_confining(),
        Some("requires odd degree and negative leading coefficient of f + gh".into()),
    );
    if model.g.is_zero() {
        report.pass_if("elliptic", false, Some("g is identically zero".into()));
    }
    if report.hard_failure() {
        for gate in ["elliptic", "normalizable"] {
            if report.gate(gate).map(|g| g.status) == Some(GateStatus::Skipped) {
                report.set_gate(gate, GateStatus::Skipped, Some("model is not valid".into()));
            }
        }
        return Ok(None);
    }
    let analysis = match model.analyze() {
        Ok(a) => a,
        Err(FpkError::NotElliptic(d)) => {
            report.pass_if("elliptic", false, Some(format!("min D = {} on the grid", fmt6(d))));
            report.set_gate("normalizable", GateStatus::Skipped, Some("model is not elliptic".into()));
            return Ok(None);
        }
        Err(e @ FpkError::InvalidGrid(_)) => return Err(invalid(e)),
        Err(e) => {
            report.pass_if("elliptic", true, None);
            report.pass_if("normalizable", false, Some(e.to_string()));
            return Ok(None);
        }
    };
    let c = &analysis.chain;
    report.pass_if("elliptic", true, Some(format!("min D = {} on the grid", fmt6(c.lambda))));
    report.pass_if("normalizable", true, None);
    let chain_tol = |b: f64| CHAIN_REL_TOL * (1.0 + b.abs());
    report.inequalities.push(Inequality::new(
        "identity_residual",
        c.identity_residual.abs(),
        IDENTITY_REL_TOL * (1.0 + c.e_h2),
        0.0,
    ));
    report
        .inequalities
        .push(Inequality::new("dirichlet_bound", c.e_psi2, 4.0 * c.e_h2, BOUND_ABS_TOL));
    let fisher_rhs = c.e_psi2 / c.lambda;
    report
        .inequalities
        .push(Inequality::new("fisher", c.fisher, fisher_rhs, chain_tol(fisher_rhs)));
    if c.log_concave {
        let ls = c.fisher / (2.0 * c.mu);
        report.inequalities.push(Inequality::new("log_sobolev", c.kl, ls, chain_tol(ls)));
    }
    if let Some(k) = c.k {
        let gain = 2.0 * k * c.e_h2;
        report.inequalities.push(Inequality::new("gain", c.kl, gain, chain_tol(gain)));
    }
    report.scalar = Some(c.clone());
    report.extra = Some(json!({
        "grid": analysis.densities.grid,
        "saturation_ratio": c.saturation_ratio(),
    }));
    Ok(Some(Prepared::Scalar {
        model,
        analysis: Box::new(analysis),
    }))
}

/// Full analysis report; exit status 1 iff a hard gate fails.
pub fn analyze(cfg: &SystemConfig, tol_override: Option<f64>) -> Result<(AnalysisReport, u8), CliError> {
    let mut tol = cfg.tolerances();
    if let Some(t) = tol_override {
        tol.identity = t;
    }
    let (report, _) = prepare(cfg, &tol, "analyze")?;
    let code = if report.hard_failure() { EXIT_INVALID } else { EXIT_OK };
    Ok((report, code))
}

/// Configuration of the built-in four-state benchmark.
pub fn benchmark_config() -> SystemConfig {
    let sys = bench_system();
    SystemConfig {
        model: ModelConfig::Linear {
            a: sys.a().clone(),
            b: sys.b().clone(),
            n: sys.n().clone(),
        },
        sim: None,
        tolerances: None,
    }
}

/// Benchmark analysis with pass/fail checks against the published values.
///
/// `tol` replaces every check tolerance.
pub fn paper_example(tol: Option<f64>) -> AnalysisReport {
    let mut tolerances = Tolerances::default();
    if let Some(t) = tol {
        tolerances.golden = t;
        tolerances.gain = t;
    }
    let cfg = SystemConfig {
        tolerances: Some(tolerances),
        ..benchmark_config()
    };
    let (mut report, _) = prepare(&cfg, &tolerances, "paper-example").expect("benchmark is valid");
    report.input = Some(cfg);
    let ga = report.linear.as_ref().expect("benchmark analysis");
    let e = ga.ellipticity.expect("benchmark is elliptic");
    let r = BENCH_REFERENCE;
    let g = tolerances.golden;
    let p_dev = ga.p.sub(&bench_p()).expect("same shape").max_abs();
    let theta_star = ga.cgf.theta_star.finite().unwrap_or(f64::INFINITY);
    let kl_bound = report.bound.as_ref().map_or(f64::NAN, |b| b.kl_bound);
    report.checks = vec![
        Check::new("lambda_min_R", e.mu * BENCH_TAU, r.lambda_min_r, g),
        Check::new("K", e.k, r.k, tolerances.gain),
        Check::new("theta_star", theta_star, r.theta_star, g),
        Check::new("nf_hinf", ga.nf_hinf, r.nf_hinf, g),
        Check::new("P_max_entry_deviation", p_dev, 0.0, g),
        Check::new("kl_exact", ga.kl_exact, r.kl_exact, g),
        Check::new("kl_bound", kl_bound, r.kl_bound, g),
    ];
    report
}

/// One CSV row of the small-gain curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub theta: f64,
    pub k: f64,
    pub eps: f64,
    pub eps_asymptotic: f64,
    /// `""`, `"marker"` at `θ_K`, or `"degenerate"`.
    pub flag: &'static str,
}

pub const CURVE_HEADER: [&str; 5] = ["theta", "K", "eps", "eps_asymptotic", "flag"];

/// `(ν(θ)/(2Ψ'(θ)), ν(θ))` over a cosine-spaced grid on `[0, θ*)`, with
/// `θ_K` inserted when the bound is available.
pub fn curve(cfg: &SystemConfig, points: usize) -> Result<Vec<CurveRow>, CliError> {
    let ModelConfig::Linear { a, b, n } = &cfg.model else {
        return Err(invalid("curve needs a linear config"));
    };
    if points < 2 {
        return Err(invalid("--points must be at least 2"));
    }
    check_shapes(a, b, n)?;
    let sys = LinearGaussianSystem::new(a.clone(), b.clone(), n.clone()).map_err(invalid)?;
    let p_star = sys.nominal_covariance().map_err(invalid)?;
    let cgf = GaussianCgf::new(sys.n(), &p_star).map_err(invalid)?;
    if cgf.is_degenerate() {
        return Ok(vec![CurveRow {
            theta: 0.0,
            k: 0.0,
            eps: 0.0,
            eps_asymptotic: 0.0,
            flag: "degenerate",
        }]);
    }
    let mut thetas = default_theta_grid(&cgf, points);
    let marker = ellipticity_constants(sys.d(), &p_star)
        .ok()
        .and_then(|e| solve_theta_k(&cgf, e.k).ok());
    if let Some(t) = marker {
        let at = thetas.partition_point(|&v| v < t);
        thetas.insert(at, t);
    }
    small_gain_curve(&cgf, &thetas)
        .map_err(invalid)?
        .into_iter()
        .map(|p| {
            Ok(CurveRow {
                theta: p.theta,
                k: p.k_coord,
                eps: p.eps_coord,
                eps_asymptotic: asymptotic_bound(&cgf, p.k_coord).map_err(invalid)?,
                flag: if Some(p.theta) == marker { "marker" } else { "" },
            })
        })
        .collect()
}

/// Overrides from the command line; each wins over the `sim` record.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub steps: Option<usize>,
    /// Interval width in standard errors.
    pub z: Option<f64>,
}

/// Resolves the simulation settings. Without an explicit `dt` the step is
/// the default or the largest one the stability heuristic admits, whichever
/// is smaller, at the default sampling horizon.
pub fn resolve_sim(settings: SimSettings, ov: &SimOverrides, stiffness: f64) -> SimConfig {
    let mut s = settings;
    s.seed = ov.seed.or(s.seed);
    s.n_trajectories = ov.trajectories.or(s.n_trajectories);
    s.sample_steps = ov.steps.or(s.sample_steps);
    if s.dt.is_none() {
        let default_dt = SimConfig::default().dt;
        let stable = 0.99 * STABILITY_PROXY_MAX / stiffness;
        s.dt = Some(if stable.is_finite() { default_dt.min(stable) } else { default_dt });
    }
    s.resolve()
}

/// Analysis plus Euler–Maruyama cross-checks. Exit 2 when a trajectory
/// diverges, with the report still returned.
pub fn simulate(cfg: &SystemConfig, ov: &SimOverrides) -> Result<(AnalysisReport, u8), CliError> {
    let mut tol = cfg.tolerances();
    if let Some(z) = ov.z {
        tol.z = z;
    }
    let (mut report, prepared) = prepare(cfg, &tol, "simulate")?;
    let Some(prepared) = prepared else {
        return Ok((report, EXIT_INVALID));
    };
    let (model, second_moments, e_h2) = match &prepared {
        Prepared::Linear { sys, analysis } => {
            (SimModel::linear(sys).map_err(invalid)?, analysis.p.clone(), analysis.e_h2)
        }
        Prepared::Scalar { model, analysis } => {
            let p = &analysis.densities.p;
            let x2: Vec<f64> = p.x.iter().map(|v| v * v).collect();
            (
                SimModel::scalar(analysis, &model.f, &model.g, &model.h),
                Matrix::from_diag(&[p.expect(&x2)]),
                analysis.chain.e_h2,
            )
        }
    };
    let sim_cfg = resolve_sim(cfg.sim.unwrap_or_default(), ov, model.stiffness());
    report.provenance.seed = Some(sim_cfg.seed);
    let moments = match ergodic_moments(&model, &sim_cfg) {
        Ok(m) => m,
        Err(e @ SimError::Unstable { .. }) => {
            report.extra = Some(json!({ "monte_carlo": { "config": sim_cfg, "error": e.to_string() } }));
            return Ok((report, EXIT_UNSTABLE));
        }
        Err(e) => return Err(invalid(e)),
    };
    let z = tol.z;
    let cov_z = moments.covariance_z_max(&second_moments);
    let ratio = if moments.e_h2.value > 0.0 {
        Some(moments.e_psi2.value / (4.0 * moments.e_h2.value))
    } else {
        None
    };
    report.inequalities.push(Inequality::new(
        "mc_dirichlet_bound",
        moments.bound_gap.value,
        0.0,
        z * moments.bound_gap.std_error,
    ));
    let mc = json!({
        "config": sim_cfg,
        "moments": moments,
        "analytic_second_moments": second_moments,
        "covariance_z_max": cov_z,
        "covariance_within_z": cov_z <= z,
        "identity_covers_zero": moments.identity_covers_zero(z),
        "bound_holds": moments.bound_holds(z),
        "rate_covers_analytic": moments.rate.covers(0.5 * e_h2, z),
        "analytic_rate": 0.5 * e_h2,
        "saturation_ratio": ratio,
        "z": z,
    });
    let mut extra = report.extra.take().unwrap_or_else(|| json!({}));
    extra["monte_carlo"] = mc;
    report.extra = Some(extra);
    Ok((report, EXIT_OK))
}

/// Densities on the fitted grid and the entropy chain of a scalar model.
pub struct Fpk1d {
    /// `x, p*, p, r, ψ` per node.
    pub rows: Vec<[f64; 5]>,
    pub report: AnalysisReport,
    pub exit: u8,
}

pub const FPK1D_HEADER: [&str; 5] = ["x", "p_star", "p", "r", "psi"];

pub fn fpk1d(cfg: &SystemConfig) -> Result<Fpk1d, CliError> {
    let ModelConfig::Scalar { target_log_r, .. } = &cfg.model else {
        return Err(invalid("fpk1d needs a scalar config"));
    };
    let tol = cfg.tolerances();
    let (mut report, prepared) = prepare(cfg, &tol, "fpk1d")?;
    let Some(Prepared::Scalar { model, analysis }) = prepared else {
        return Ok(Fpk1d {
            rows: Vec::new(),
            report,
            exit: EXIT_INVALID,
        });
    };
    let d = &analysis.densities;
    let rows = (0..d.p.x.len())
        .map(|i| [d.p.x[i], d.p_star.values[i], d.p.values[i], analysis.r[i], analysis.psi[i]])
        .collect();
    if let Some(poly) = target_log_r {
        let sat = saturation_round_trip(&model, |x| poly.eval(x)).map_err(invalid)?;
        let c = &sat.analysis.chain;
        let ratio = c.saturation_ratio();
        report.inequalities.push(Inequality::new(
            "saturation_equality",
            (ratio - 1.0).abs(),
            0.0,
            SATURATION_EQUALITY_TOL,
        ));
        let mut extra = report.extra.take().unwrap_or_else(|| json!({}));
        extra["saturation"] = json!({
            "grid": sat.grid,
            "max_rel_density_error": sat.max_rel_density_error,
            "e_psi2": c.e_psi2,
            "e_h2": c.e_h2,
            "saturation_ratio": ratio,
            "equality": (ratio - 1.0).abs() <= SATURATION_EQUALITY_TOL,
        });
        report.extra = Some(extra);
    }
    Ok(Fpk1d {
        rows,
        report,
        exit: EXIT_OK,
    })
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Header row plus one line per curve point, floats at seventeen digits.
pub fn write_curve_csv<W: std::io::Write>(rows: &[CurveRow], w: W) -> Result<(), CliError> {
    let mut out = csv_writer(w);
    out.write_record(CURVE_HEADER)?;
    for r in rows {
        out.write_record([
            fmt17(r.theta),
            fmt17(r.k),
            fmt17(r.eps),
            fmt17(r.eps_asymptotic),
            r.flag.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_fpk1d_csv<W: std::io::Write>(rows: &[[f64; 5]], w: W) -> Result<(), CliError> {
    let mut out = csv_writer(w);
    out.write_record(FPK1D_HEADER)?;
    for r in rows {
        out.write_record(r.map(fmt17))?;
    }
    out.flush()?;
    Ok(())
}
