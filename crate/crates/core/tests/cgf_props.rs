use noisebound::catalog::{bench_system, random_spd};
use noisebound::cgf_bounds::*;
use noisebound::lingauss::{GaussianAnalysis, GaussianCgf};
use noisebound::numkit::{gaussian_stream, Matrix};
use proptest::prelude::*;

fn random_cgf(seed: u64, n: usize, m: usize) -> GaussianCgf {
    let mut rng = gaussian_stream(seed, 0);
    let p_star = random_spd(&mut rng, n, 0.1);
    let nmat = Matrix::from_fn(m, n, |_, _| rng.next_normal());
    GaussianCgf::new(&nmat, &p_star).unwrap()
}

fn edge(model: &GaussianCgf) -> f64 {
    model.theta_star.finite().expect("nonzero drift")
}

fn bench_cgf() -> (GaussianCgf, f64) {
    let ga = GaussianAnalysis::compute(&bench_system()).unwrap();
    (ga.cgf, ga.ellipticity.unwrap().k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nu_is_strictly_increasing(seed in any::<u64>(), n in 1usize..5, m in 1usize..4) {
        let model = random_cgf(seed, n, m);
        let top = edge(&model) * (1.0 - 1e-3);
        let mut prev = nu(&model, 0.0).unwrap();
        prop_assert_eq!(prev, 0.0);
        for i in 1..200 {
            let v = nu(&model, top * i as f64 / 199.0).unwrap();
            prop_assert!(v > prev, "step {}: {} <= {}", i, v, prev);
            prev = v;
        }
    }

    #[test]
    fn theta_k_is_bracketed_and_consistent(seed in any::<u64>(), n in 1usize..5, frac in 0.001f64..0.45) {
        let model = random_cgf(seed, n, n);
        let ts = edge(&model);
        let k = frac * ts;
        prop_assert!(nu_k(&model, k, 2.0 * k).unwrap() < 0.0);
        prop_assert!(nu_k(&model, k, ts * (1.0 - 1e-9)).unwrap() > 0.0);
        let theta = solve_theta_k(&model, k).unwrap();
        prop_assert!(theta > 2.0 * k && theta < ts);
        let residual = nu_k(&model, k, theta).unwrap();
        prop_assert!(residual.abs() <= 1e-10 * (1.0 + model.psi_prime(theta)));
        let report = kl_upper_bound(&model, k).unwrap();
        prop_assert!(report.consistency_gap <= 1e-8 * (1.0 + report.kl_bound));
    }

    #[test]
    fn bound_is_monotone_in_gain(seed in any::<u64>(), a in 0.001f64..0.45, b in 0.001f64..0.45) {
        let model = random_cgf(seed, 2, 2);
        let ts = edge(&model);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let lo_bound = kl_upper_bound(&model, lo * ts).unwrap().kl_bound;
        let hi_bound = kl_upper_bound(&model, hi * ts).unwrap().kl_bound;
        prop_assert!(lo_bound <= hi_bound * (1.0 + 1e-12));
    }

    #[test]
    fn phi_is_nondecreasing(seed in any::<u64>()) {
        let model = random_cgf(seed, 3, 2);
        prop_assert_eq!(phi_of_eps(&model, 0.0).unwrap(), model.psi_prime(0.0));
        let mut prev = 0.0;
        for i in 0..100 {
            let phi = phi_of_eps(&model, 0.05 * i as f64).unwrap();
            prop_assert!(phi >= prev);
            prev = phi;
        }
    }
}

/// `sup{ε ≥ 0 : ε ≤ 2KΦ(ε)}` by a grid scan of `phi_of_eps` followed by
/// bisection on the last sign change.
fn fixed_point_by_scan(model: &GaussianCgf, k: f64, top: f64) -> f64 {
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
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    lo
}

#[test]
fn bound_is_the_largest_fixed_point() {
    let (bench, k) = bench_cgf();
    let mut cases = vec![(bench, k)];
    for seed in 0..10 {
        let model = random_cgf(1000 + seed, 1 + seed as usize % 4, 2);
        let k = 0.3 * edge(&model) * (seed as f64 + 1.0) / 11.0;
        cases.push((model, k));
    }
    for (i, (model, k)) in cases.iter().enumerate() {
        let bound = kl_upper_bound(model, *k).unwrap().kl_bound;
        let scanned = fixed_point_by_scan(model, *k, 3.0 * bound);
        assert!((scanned - bound).abs() <= 1e-6, "case {i}: {scanned} vs {bound}");
    }
}

#[test]
fn benchmark_bound_and_curve_point() {
    let (model, k) = bench_cgf();
    let report = kl_upper_bound(&model, k).unwrap();
    let theta_k = report.theta_k.unwrap();
    assert!(theta_k > 2.0 * k && theta_k < edge(&model));
    let point = small_gain_curve(&model, &[theta_k]).unwrap()[0];
    assert!((point.k_coord - k).abs() <= 1e-8 * k);
    assert!((point.eps_coord - report.kl_bound).abs() <= 1e-12);
    // γ = ½E|h|² under the perturbed law turns 4Kγ into 2K·E|h|²
    let ga = GaussianAnalysis::compute(&bench_system()).unwrap();
    let stealthy = report.clone().with_stealth(0.5 * ga.e_h2).stealthy_bound.unwrap();
    assert!((stealthy - 2.0 * k * ga.e_h2).abs() < 1e-12);
    assert!(ga.kl_exact <= stealthy);
    assert!(report.l1_bound.trivial);
}

#[test]
fn small_gain_asymptotics_on_benchmark() {
    let (model, _) = bench_cgf();
    let target = asymptotic_coefficient(&model);
    let lead = 2.0 * model.psi_prime(0.0);
    let deviations: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&k: &f64| {
            let bound = kl_upper_bound(&model, k).unwrap().kl_bound;
            let estimate = (bound - lead * k) / k.powf(1.5);
            (estimate - target).abs() / target
        })
        .collect();
    assert!(deviations.windows(2).all(|w| w[1] < w[0]), "{deviations:?}");
    assert!(deviations[2] <= 0.05, "{deviations:?}");
}

#[test]
fn curve_is_monotone() {
    let one = GaussianCgf::new(&Matrix::from_diag(&[0.5f64.sqrt()]), &Matrix::identity(1)).unwrap();
    let grid: Vec<f64> = (0..100).map(|i| 0.999 * i as f64 / 99.0).collect();
    let (bench, _) = bench_cgf();
    let bench_grid = default_theta_grid(&bench, DEFAULT_CURVE_POINTS);
    assert_eq!(bench_grid.len(), DEFAULT_CURVE_POINTS);
    for (model, grid) in [(&one, grid), (&bench, bench_grid)] {
        let curve = small_gain_curve(model, &grid).unwrap();
        assert_eq!((curve[0].k_coord, curve[0].eps_coord), (0.0, 0.0));
        for w in curve.windows(2) {
            assert!(w[1].k_coord >= w[0].k_coord && w[1].eps_coord >= w[0].eps_coord);
        }
    }
}

#[test]
fn scalar_examples() {
    let one = GaussianCgf::new(&Matrix::from_diag(&[0.5f64.sqrt()]), &Matrix::identity(1)).unwrap();
    let v = nu(&one, 0.5).unwrap();
    assert!((v - (0.5 + 0.5 * 0.5f64.ln())).abs() < 1e-15);
    assert!((v - 0.1534).abs() < 1e-4);
    assert!((nu_k(&one, 0.1, 0.5).unwrap() - (-0.0466)).abs() < 1e-4);
    assert!((phi_of_eps(&one, v).unwrap() - 1.0).abs() < 1e-9);
    assert!((asymptotic_bound(&one, 0.01).unwrap() - (0.01 + 2.0 * 0.001)).abs() < 1e-15);
    let theta = solve_theta_k(&one, 0.1).unwrap();
    assert!(nu_k(&one, 0.1, theta - 1e-6).unwrap() < 0.0);
    assert!(nu_k(&one, 0.1, theta + 1e-6).unwrap() > 0.0);
    assert!(solve_theta_k(&one, 1e-6).unwrap() < 1e-2);
    assert!(matches!(solve_theta_k(&one, 0.5), Err(BoundError::KTooLarge { .. })));
    assert!(matches!(nu(&one, 1.0), Err(BoundError::OutOfDomain { .. })));
}

#[test]
fn degenerate_drift_short_circuits() {
    let zero = GaussianCgf::new(&Matrix::zeros(2, 2), &Matrix::identity(2)).unwrap();
    assert_eq!(zero.theta_star, DomainEdge::Unbounded);
    let report = kl_upper_bound(&zero, 3.0).unwrap();
    assert!(report.degenerate && report.kl_bound == 0.0 && report.theta_k.is_none());
    assert!(matches!(solve_theta_k(&zero, 3.0), Err(BoundError::Degenerate)));
}

#[test]
fn pinsker_and_stealth_arithmetic() {
    assert_eq!(pinsker_l1(0.0).unwrap().value, 0.0);
    let a = pinsker_l1(0.4544).unwrap();
    assert!((a.value - 0.9533).abs() < 1e-4 && !a.trivial);
    let b = pinsker_l1(2.4894).unwrap();
    assert!((b.value - 2.2313).abs() < 1e-4 && b.trivial);
    assert!(pinsker_l1(-1.0).is_err());
    assert_eq!(stealthy_bound(1.0, 0.25), 1.0);
    assert_eq!(stealthy_bound(2.0, 0.0), 0.0);
}
