use barrier_core::cost::{CostSpec, ProblemSpec};
use barrier_core::estimators::{estimate_rho, Estimator, RhoMethod};
use barrier_core::levy::{JumpLaw, JumpSpec, LevyTriplet};
use barrier_core::oracle::SpectrallyNegativeOracle;
use barrier_core::path::{sample_sup_at_exp_time, simulate_batch, Monitoring, SimConfig};
use barrier_core::solver::solve_barrier;
use barrier_core::stats::EstimateWithError;
use num_complex::Complex;
use proptest::prelude::*;

fn model(law: JumpLaw<f64>, sigma: f64, gamma: f64) -> LevyTriplet<f64> {
    LevyTriplet::new(gamma, sigma, JumpSpec::new(1.5, law).unwrap(), 1.0).unwrap()
}

/// `|mean e^{iλ X_1} - e^{-Ψ(λ)}|` stays within `4/√N` for several laws.
#[test]
fn empirical_characteristic_function_matches_exponent() {
    let models = [
        model(JumpLaw::Kou { p_up: 0.4, eta_up: 3.0, eta_down: 2.0 }, 0.5, 0.2),
        model(JumpLaw::Gaussian { mean: -0.3, std: 0.7 }, 0.0, 0.1),
        model(JumpLaw::Uniform { lo: -2.0, hi: 1.0 }, 0.3, 0.0),
        model(JumpLaw::Discrete { atoms: vec![(-1.0, 0.25), (0.5, 0.75)] }, 0.2, -0.4),
    ];
    let n = 20_000;
    let cfg = SimConfig::new(0.05, 1.0, n, 17).unwrap();
    for m in &models {
        let batch = simulate_batch(m, 0.0, &cfg).unwrap();
        let end = cfg.n_steps();
        for lambda in [0.3, 1.0, 2.5] {
            let emp: Complex<f64> =
                batch.values.iter().map(|p| Complex::new(0.0, lambda * p[end]).exp()).sum::<Complex<f64>>() / n as f64;
            let exact = (-m.characteristic_exponent(lambda)).exp();
            assert!((emp - exact).norm() <= 4.0 / (n as f64).sqrt(), "{m:?} λ={lambda}: {emp} vs {exact}");
        }
    }
}

/// Supremum at an exponential time of a spectrally negative model is
/// exponential with rate `Φ(q)`.
#[test]
fn exponential_supremum_law() {
    let m = model(JumpLaw::Kou { p_up: 0.0, eta_up: 1.0, eta_down: 2.0 }, 0.8, 0.3);
    let q = 0.5;
    let cfg = SimConfig::new(2e-3, 30.0, 20_000, 5).unwrap().with_monitoring(Monitoring::Bridge);
    let sup = sample_sup_at_exp_time(&m, &cfg, q).unwrap();
    let e = EstimateWithError::from_samples(&sup.samples, false, String::new());
    let exact = SpectrallyNegativeOracle::new(&m).unwrap().expected_sup_at_exp_time(q).unwrap();
    assert!((e.mean - exact).abs() <= 3.0 * e.stderr, "{} vs {exact} (se {})", e.mean, e.stderr);
    assert!(sup.rejection_rate() < 1e-4);
}

/// The solver lands on the closed-form barrier of a spectrally negative
/// jump-diffusion with quadratic cost.
#[test]
fn solver_matches_spectrally_negative_oracle() {
    let m = model(JumpLaw::Kou { p_up: 0.0, eta_up: 1.0, eta_down: 3.0 }, 0.7, 0.5);
    let problem = ProblemSpec::new(CostSpec::quadratic(), 0.5, 0.5).unwrap();
    let cfg = SimConfig::new(2e-3, 20.0, 4000, 23).unwrap().with_monitoring(Monitoring::Bridge);
    let r = solve_barrier(&m, &problem, &cfg, None).unwrap();
    let exact = SpectrallyNegativeOracle::new(&m).unwrap().quadratic_bstar_closed_form(&problem).unwrap();
    assert!((r.b_star - exact).abs() <= r.bisect_tol + 3.0 * r.ci_halfwidth, "{} vs {exact}: {r:?}", r.b_star);
}

/// Both `ρ` estimators target the same quantity.
#[test]
fn rho_estimators_agree() {
    let m = model(JumpLaw::Kou { p_up: 0.5, eta_up: 3.0, eta_down: 3.0 }, 0.5, 0.0);
    let problem = ProblemSpec::new(CostSpec::quadratic(), 0.5, 0.5).unwrap();
    let cfg = SimConfig::new(2e-3, 20.0, 4000, 29).unwrap().with_monitoring(Monitoring::Bridge);
    let a = estimate_rho(&m, &problem, -0.5, &cfg, RhoMethod::TimeIntegral).unwrap();
    let b = estimate_rho(&m, &problem, -0.5, &cfg, RhoMethod::ExpClock).unwrap();
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} vs {b:?}");
}

fn arb_model() -> impl Strategy<Value = LevyTriplet<f64>> {
    (-1.0..1.0f64, 0.0..1.0f64, 0.1..2.0f64, 0.0..1.0f64, 1.0..4.0f64, 1.0..4.0f64).prop_filter_map(
        "nondegenerate",
        |(gamma, sigma, rate, p_up, up, down)| {
            let law = JumpLaw::Kou { p_up, eta_up: up, eta_down: down };
            LevyTriplet::new(gamma, sigma, JumpSpec::new(rate, law).ok()?, 0.5).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Below the barrier the strategy pays `C (b - x)` at once and continues
    /// from `b`, path by path.
    #[test]
    fn value_below_barrier_is_linear(m in arb_model(), b in -2.0..2.0f64, gap in 0.01..3.0f64, c in 0.0..2.0f64) {
        let problem = ProblemSpec::new(CostSpec::quadratic(), c, 0.5).unwrap();
        let cfg = SimConfig::new(5e-2, 20.0, 16, 1).unwrap();
        let est = Estimator::new(&m, &problem, &cfg).unwrap();
        let pairs = est.map_paths(barrier_core::rng::StreamDomain::Paths, barrier_core::path::Extreme::Min, |buf| {
            (est.value_parts(buf, b - gap, b), est.value_parts(buf, b, b))
        });
        for ((a1, a2), (b1, b2)) in pairs {
            let below = a1 + c * a2;
            let at = b1 + c * b2;
            prop_assert!((below - c * gap - at).abs() <= 1e-9 * (1.0 + at.abs()));
        }
    }

    /// Starting higher never requires more discounted control, path by path.
    #[test]
    fn control_decreases_with_start(m in arb_model(), b in -1.0..1.0f64, x in -2.0..2.0f64, dx in 0.01..1.0f64) {
        let problem = ProblemSpec::new(CostSpec::quadratic(), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(5e-2, 20.0, 16, 2).unwrap();
        let est = Estimator::new(&m, &problem, &cfg).unwrap();
        let pairs = est.map_paths(barrier_core::rng::StreamDomain::Paths, barrier_core::path::Extreme::Min, |buf| {
            (est.value_parts(buf, x, b).1, est.value_parts(buf, x + dx, b).1)
        });
        for (lo, hi) in pairs {
            prop_assert!(hi <= lo + 1e-12);
        }
    }
}
