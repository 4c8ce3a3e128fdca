//! Monte Carlo estimators of `ρ(b)` and of barrier-strategy values.
//!
//! Every path is drawn started at 0; a start `x` is obtained by translation, so
//! all estimates for different starts and barriers share common random numbers.

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::levy::LevyTriplet;
use crate::path::{Extreme, PathBatch, PathBuf, PathGenerator, SimConfig};
use crate::rng::StreamDomain;
use crate::scalar::Real;
use crate::stats::{fingerprint, EstimateWithError};

/// How `ρ(b)` is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    /// Discounted integral of `f'_+(U^0_t + b)` along paths reflected at 0.
    #[default]
    TimeIntegral,
    /// `q^{-1} f'_+(sup_{s <= e_q} X_s + b)` with an independent exponential clock.
    ExpClock,
}

/// Value estimate and its two components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueEstimate<T> {
    /// Discounted running cost.
    pub v1: EstimateWithError<T>,
    /// Discounted control.
    pub v2: EstimateWithError<T>,
    /// `v1 + C v2`, with the error of the pathwise sum.
    pub v: EstimateWithError<T>,
}

/// Shared context for path functionals of one model, problem and configuration.
pub struct Estimator<'a, T> {
    pub triplet: &'a LevyTriplet<T>,
    pub problem: &'a ProblemSpec<T>,
    pub cfg: &'a SimConfig<T>,
    disc: Vec<T>,
}

impl<'a, T: Real> Estimator<'a, T> {
    pub fn new(triplet: &'a LevyTriplet<T>, problem: &'a ProblemSpec<T>, cfg: &'a SimConfig<T>) -> Result<Self> {
        cfg.validate_for(problem.q)?;
        Ok(Self { triplet, problem, cfg, disc: cfg.discount_factors(problem.q) })
    }

    /// `e^{-q t_i}` on the grid.
    pub fn discount(&self) -> &[T] {
        &self.disc
    }

    pub fn fingerprint(&self, kind: &str) -> String {
        fingerprint(&[self.triplet, self.problem, self.cfg, &kind])
    }

    /// Applies `f` to every path of `domain` (started at 0) in path order.
    /// Deterministic models are simulated once and the result replicated.
    pub fn map_paths<R, F>(&self, domain: StreamDomain, extreme: Extreme, f: F) -> Vec<R>
    where
        R: Clone + Send,
        F: Fn(&PathBuf<T>) -> R + Sync,
    {
        let generator = PathGenerator::new(self.triplet, self.cfg);
        if self.triplet.is_deterministic() {
            let mut buf = PathBuf::default();
            generator.path(T::zero(), domain, 0, extreme, &mut buf);
            return vec![f(&buf); self.cfg.n_paths];
        }
        (0..self.cfg.n_paths)
            .into_par_iter()
            .map_init(PathBuf::default, |buf, i| {
                generator.path(T::zero(), domain, i, extreme, buf);
                f(buf)
            })
            .collect()
    }

    /// Summary of per-path samples, honoring antithetic pairing.
    pub fn summarize(&self, samples: &[T], kind: &str) -> Result<EstimateWithError<T>> {
        if let Some(bad) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(format!("{kind}: path {bad} produced a non-finite value")));
        }
        Ok(EstimateWithError::from_samples(samples, self.cfg.antithetic, self.fingerprint(kind)))
    }

    /// `Σ_{i<n} e^{-q t_i} f'_+(U^0_{t_i} + b) dt` for every `b` in `bs`, from a
    /// path started at 0. Results are pathwise nondecreasing in `b`.
    pub fn rho_integrals(&self, buf: &PathBuf<T>, bs: &[T]) -> Vec<T> {
        let cost = &self.problem.cost;
        let mut acc = vec![T::zero(); bs.len()];
        let mut running = T::zero();
        let n = buf.values.len() - 1;
        for i in 0..n {
            running = running.min(buf.cell_extreme(i));
            let u = buf.values[i] - running;
            let w = self.disc[i];
            for (a, &b) in acc.iter_mut().zip(bs) {
                *a = *a + w * cost.d_plus(u + b);
            }
        }
        acc.iter().map(|&a| a * self.cfg.dt).collect()
    }

    /// `(v1, v2)` for the path started at `x` and reflected at `b`.
    pub fn value_parts(&self, buf: &PathBuf<T>, x: T, b: T) -> (T, T) {
        let cost = &self.problem.cost;
        let n = buf.values.len() - 1;
        let mut running = T::infinity();
        let mut prev_r = T::zero();
        let (mut v1, mut v2) = (T::zero(), T::zero());
        for i in 0..=n {
            running = running.min(x + buf.cell_extreme(i));
            let r = (b - running).max(T::zero());
            let w = self.disc[i];
            if i < n {
                v1 = v1 + w * cost.value(x + buf.values[i] + r);
            }
            v2 = v2 + w * (r - prev_r);
            prev_r = r;
        }
        (v1 * self.cfg.dt, v2)
    }

    /// `value_parts` at every start in `xs` for one barrier. After the first
    /// down-crossing the reflected path no longer depends on the start, so
    /// those sums are shared and each start only pays for its pre-crossing part.
    pub fn value_profile(&self, buf: &PathBuf<T>, xs: &[T], b: T) -> Vec<(T, T)> {
        let cost = &self.problem.cost;
        let n = buf.values.len() - 1;
        let mut minima = Vec::with_capacity(n + 1);
        let mut running = T::infinity();
        for i in 0..=n {
            running = running.min(buf.cell_extreme(i));
            minima.push(running);
        }
        // suffix sums of the reflected running cost and of the control increments
        let mut cost_tail = vec![T::zero(); n + 2];
        let mut control_tail = vec![T::zero(); n + 2];
        for i in (0..=n).rev() {
            let u = b + buf.values[i] - minima[i];
            cost_tail[i] = cost_tail[i + 1] + if i < n { self.disc[i] * cost.value(u) } else { T::zero() };
            let step = if i > 0 { minima[i - 1] - minima[i] } else { T::zero() };
            control_tail[i] = control_tail[i + 1] + self.disc[i] * step;
        }
        xs.iter()
            .map(|&x| {
                let tau = minima.partition_point(|&m| x + m >= b);
                let end = tau.min(n);
                let pre = (0..end).fold(T::zero(), |acc, i| acc + self.disc[i] * cost.value(x + buf.values[i]));
                if tau > n {
                    return (pre * self.cfg.dt, T::zero());
                }
                let v1 = (pre + cost_tail[tau]) * self.cfg.dt;
                let v2 = self.disc[tau] * (b - x - minima[tau]) + control_tail[tau + 1];
                (v1, v2)
            })
            .collect()
    }

    /// `Σ_{i<n} e^{-q t_i} f'_+(U^b_{t_i}) dt` for the path started at `x`.
    pub fn reflected_slope_integral(&self, buf: &PathBuf<T>, x: T, b: T) -> T {
        let cost = &self.problem.cost;
        let n = buf.values.len() - 1;
        let mut running = T::infinity();
        let mut acc = T::zero();
        for i in 0..n {
            running = running.min(x + buf.cell_extreme(i));
            let r = (b - running).max(T::zero());
            acc = acc + self.disc[i] * cost.d_plus(x + buf.values[i] + r);
        }
        acc * self.cfg.dt
    }

    /// First grid index at which the path from `x` is strictly below `b`.
    pub fn tau_index(&self, buf: &PathBuf<T>, x: T, b: T) -> Option<usize> {
        (0..buf.values.len()).find(|&i| x + buf.cell_extreme(i) < b)
    }

    /// `e^{-q τ}` with `τ` the discretized down-crossing time (0 if never crossed).
    pub fn tau_discount(&self, buf: &PathBuf<T>, x: T, b: T) -> T {
        self.tau_index(buf, x, b).map_or(T::zero(), |i| self.disc[i])
    }

    /// `Σ_{t_i < τ} e^{-q t_i} f'_+(X_{t_i}) dt` for the path from `x`.
    pub fn pre_tau_slope_integral(&self, buf: &PathBuf<T>, x: T, b: T) -> T {
        let cost = &self.problem.cost;
        let end = self.tau_index(buf, x, b).unwrap_or(buf.values.len() - 1);
        (0..end).map(|i| self.disc[i] * cost.d_plus(x + buf.values[i])).sum::<T>() * self.cfg.dt
    }

    /// `Σ_{t_i < τ} e^{-q t_i} f(X_{t_i}) dt` for the path from `x`.
    pub fn pre_tau_cost_integral(&self, buf: &PathBuf<T>, x: T, b: T, stop: usize) -> T {
        let cost = &self.problem.cost;
        let end = self.tau_index(buf, x, b).unwrap_or(usize::MAX).min(stop).min(buf.values.len() - 1);
        (0..end).map(|i| self.disc[i] * cost.value(x + buf.values[i])).sum::<T>() * self.cfg.dt
    }

    /// Value estimates at the `(x, b)` pairs, all on the same paths.
    pub fn values(&self, points: &[(T, T)]) -> Result<Vec<ValueEstimate<T>>> {
        let samples = self.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            points.iter().map(|&(x, b)| self.value_parts(buf, x, b)).collect::<Vec<_>>()
        });
        self.value_summaries(points.len(), &samples)
    }

    fn value_summaries(&self, k: usize, samples: &[Vec<(T, T)>]) -> Result<Vec<ValueEstimate<T>>> {
        let c = self.problem.c;
        (0..k)
            .map(|j| {
                let v1: Vec<T> = samples.iter().map(|s| s[j].0).collect();
                let v2: Vec<T> = samples.iter().map(|s| s[j].1).collect();
                let v: Vec<T> = samples.iter().map(|s| s[j].0 + c * s[j].1).collect();
                Ok(ValueEstimate {
                    v1: self.summarize(&v1, "value_running_cost")?,
                    v2: self.summarize(&v2, "value_control")?,
                    v: self.summarize(&v, "value")?,
                })
            })
            .collect()
    }
}

/// Estimates `ρ(b)`.
pub fn estimate_rho<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    b: T,
    cfg: &SimConfig<T>,
    method: RhoMethod,
) -> Result<EstimateWithError<T>> {
    let est = Estimator::new(triplet, problem, cfg)?;
    match method {
        RhoMethod::TimeIntegral => {
            let samples: Vec<T> = est
                .map_paths(StreamDomain::Paths, Extreme::Min, |buf| est.rho_integrals(buf, &[b])[0]);
            est.summarize(&samples, "rho_time_integral")
        }
        RhoMethod::ExpClock => {
            let generator = PathGenerator::new(triplet, cfg);
            let q = problem.q;
            let draws: Vec<(T, usize)> = (0..cfg.n_paths)
                .into_par_iter()
                .map_init(PathBuf::default, |buf, i| {
                    let (_, rejected) =
                        generator.path_to_exp_time(T::zero(), q, StreamDomain::ExpClock, i, Extreme::Max, buf);
                    let sup = (0..buf.values.len()).fold(T::neg_infinity(), |m, j| m.max(buf.cell_extreme(j)));
                    (problem.cost.d_plus(sup + b) / q, rejected)
                })
                .collect();
            let rejected: usize = draws.iter().map(|d| d.1).sum();
            let samples: Vec<T> = draws.into_iter().map(|d| d.0).collect();
            let mut e = est.summarize(&samples, "rho_exp_clock")?;
            let rate = rejected as f64 / (rejected + samples.len()) as f64;
            log::info!("exponential clock rejection rate {rate:.3e}");
            e.rejection_rate = Some(rate);
            Ok(e)
        }
    }
}

/// `ρ̂` on a strictly increasing grid of barriers from one shared batch.
/// The returned means are exactly nondecreasing.
pub fn estimate_rho_curve<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    b_grid: &[T],
    cfg: &SimConfig<T>,
) -> Result<Vec<(T, EstimateWithError<T>)>> {
    if b_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("rho b_grid must be strictly increasing".into()));
    }
    let est = Estimator::new(triplet, problem, cfg)?;
    let samples = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| est.rho_integrals(buf, b_grid));
    (0..b_grid.len())
        .map(|j| {
            let s: Vec<T> = samples.iter().map(|v| v[j]).collect();
            Ok((b_grid[j], est.summarize(&s, "rho_time_integral")?))
        })
        .collect()
}

/// `v_b(x)` and its components. With `crn_batch`, its paths are reused after
/// translation to start at `x`.
pub fn estimate_value<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    b: T,
    x: T,
    cfg: &SimConfig<T>,
    crn_batch: Option<&PathBatch<T>>,
) -> Result<ValueEstimate<T>> {
    let est = Estimator::new(triplet, problem, cfg)?;
    let Some(batch) = crn_batch else {
        return Ok(est.values(&[(x, b)])?.remove(0));
    };
    let origin = batch.shifted(-batch.x_start);
    let samples: Vec<Vec<(T, T)>> = (0..origin.n_paths())
        .into_par_iter()
        .map(|i| vec![est.value_parts(&origin.path_buf(i), x, b)])
        .collect();
    Ok(est.value_summaries(1, &samples)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{BuiltinCost, CostSpec};
    use crate::levy::{JumpLaw, JumpSpec};
    use crate::path::{simulate_batch, Monitoring};
    use approx::assert_relative_eq;

    fn kou() -> LevyTriplet<f64> {
        let law = JumpLaw::Kou { p_up: 0.5, eta_up: 3.0, eta_down: 3.0 };
        LevyTriplet::new(0.0, 0.5, JumpSpec::new(1.0, law).unwrap(), 1.0).unwrap()
    }

    fn linear(a: f64) -> CostSpec<f64> {
        CostSpec::builtin(BuiltinCost::PiecewiseLinear { slopes: vec![a], kinks: vec![] }).unwrap()
    }

    #[test]
    fn value_profile_matches_single_start_values() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.7, 0.5).unwrap();
        for monitoring in [Monitoring::Grid, Monitoring::Bridge] {
            let cfg = SimConfig::new(1e-2, 20.0, 20, 9).unwrap().with_monitoring(monitoring);
            let est = Estimator::new(&m, &problem, &cfg).unwrap();
            let xs = [-1.0, -0.3, 0.0, 0.2, 0.9, 3.0];
            let profiles = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
                let single: Vec<(f64, f64)> = xs.iter().map(|&x| est.value_parts(buf, x, -0.3)).collect();
                (single, est.value_profile(buf, &xs, -0.3))
            });
            for (single, shared) in profiles {
                for (a, s) in single.iter().zip(&shared) {
                    assert_relative_eq!(a.0, s.0, epsilon = 1e-10, max_relative = 1e-12);
                    assert_relative_eq!(a.1, s.1, epsilon = 1e-10, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_cost_rho_is_slope_over_q() {
        let problem = ProblemSpec::new(linear(0.7), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 200, 1).unwrap();
        let m = kou();
        let e = estimate_rho(&m, &problem, 0.3, &cfg, RhoMethod::TimeIntegral).unwrap();
        // left Riemann sum of the discount: dt / (1 - e^{-q dt})
        let riemann = 0.7 * 0.01 / (1.0 - (-0.005f64).exp()) * (1.0 - (-15.0f64).exp());
        assert_relative_eq!(e.mean, riemann, epsilon = 1e-9);
        assert!((e.mean - 1.4).abs() < 0.01);
        assert!(e.stderr < 1e-12);
        let ec = estimate_rho(&m, &problem, 0.3, &cfg, RhoMethod::ExpClock).unwrap();
        assert_relative_eq!(ec.mean, 1.4, epsilon = 1e-12);
    }

    #[test]
    fn pure_drift_rho_of_quadratic() {
        let m = LevyTriplet::<f64>::pure_drift(1.0).unwrap();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 1.0, 0.1).unwrap();
        let cfg = SimConfig::new(1e-3, 120.0, 1000, 1).unwrap();
        let e = estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::TimeIntegral).unwrap();
        assert!((e.mean - 200.0).abs() < 0.05, "{}", e.mean);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n, 1000);
    }

    #[test]
    fn rho_methods_agree_on_kou() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.5, 0.5).unwrap();
        let cfg = SimConfig::new(2e-3, 20.0, 4000, 3).unwrap().with_monitoring(Monitoring::Bridge);
        let a = estimate_rho(&m, &problem, -0.5, &cfg, RhoMethod::TimeIntegral).unwrap();
        let b = estimate_rho(&m, &problem, -0.5, &cfg, RhoMethod::ExpClock).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 3.0 * se, "{} vs {} (se {se})", a.mean, b.mean);
        assert!(b.rejection_rate.unwrap() < 1e-3);
    }

    #[test]
    fn rho_curve_is_exactly_monotone_with_quadratic_spacing() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.5, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 20.0, 300, 4).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let curve = estimate_rho_curve(&m, &problem, &grid, &cfg).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1.mean >= w[0].1.mean);
        }
        // f = x²: increments are 2 Δb times the discrete discount sum, for any process.
        let disc_sum: f64 = cfg.discount_factors(0.5)[..cfg.n_steps()].iter().sum::<f64>() * cfg.dt;
        let step = curve[1].1.mean - curve[0].1.mean;
        assert_relative_eq!(step, 2.0 * 0.2 * disc_sum, epsilon = 1e-9);
    }

    #[test]
    fn rho_limits_for_bounded_slopes() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::abs(), 0.5, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 100, 4).unwrap();
        let curve = estimate_rho_curve(&m, &problem, &[-50.0, 50.0], &cfg).unwrap();
        assert!((curve[0].1.mean + 2.0).abs() < 0.02);
        assert!((curve[1].1.mean - 2.0).abs() < 0.02);
    }

    #[test]
    fn pure_drift_value_of_quadratic() {
        let m = LevyTriplet::<f64>::pure_drift(1.0).unwrap();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-3, 40.0, 10, 1).unwrap();
        let v = estimate_value(&m, &problem, 0.0, 0.0, &cfg, None).unwrap();
        assert!((v.v1.mean - 16.0).abs() < 0.16);
        assert_eq!(v.v2.mean, 0.0);
    }

    #[test]
    fn value_components_combine_linearly() {
        let m = kou();
        let cfg = SimConfig::new(1e-2, 30.0, 200, 5).unwrap();
        let full = ProblemSpec::new(CostSpec::quadratic(), 0.8, 0.5).unwrap();
        let no_control = ProblemSpec::new(CostSpec::quadratic(), 0.0, 0.5).unwrap();
        let no_running = ProblemSpec::new(linear(0.0), 0.8, 0.5).unwrap();
        let a = estimate_value(&m, &full, -0.2, 0.4, &cfg, None).unwrap();
        let b = estimate_value(&m, &no_control, -0.2, 0.4, &cfg, None).unwrap();
        let c = estimate_value(&m, &no_running, -0.2, 0.4, &cfg, None).unwrap();
        assert_eq!(b.v.mean, a.v1.mean);
        assert_relative_eq!(c.v.mean, 0.8 * a.v2.mean, epsilon = 1e-12);
        assert_relative_eq!(a.v.mean, a.v1.mean + 0.8 * a.v2.mean, epsilon = 1e-12);
    }

    #[test]
    fn value_below_barrier_is_linear() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.8, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 200, 5).unwrap();
        let est = Estimator::new(&m, &problem, &cfg).unwrap();
        let b = 0.3;
        let vals = est.values(&[(b - 1.0, b), (b, b)]).unwrap();
        assert_relative_eq!(vals[0].v.mean, 0.8 + vals[1].v.mean, epsilon = 1e-10);
    }

    #[test]
    fn crn_batch_matches_streaming() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.8, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 50, 5).unwrap().with_monitoring(Monitoring::Bridge);
        let batch = simulate_batch(&m, 2.0, &cfg).unwrap();
        let a = estimate_value(&m, &problem, 0.1, 0.5, &cfg, Some(&batch)).unwrap();
        let b = estimate_value(&m, &problem, 0.1, 0.5, &cfg, None).unwrap();
        assert_relative_eq!(a.v.mean, b.v.mean, epsilon = 1e-10);
    }

    #[test]
    fn shift_identity_for_rho() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::abs(), 0.8, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 100, 6).unwrap();
        let est = Estimator::new(&m, &problem, &cfg).unwrap();
        let b = 0.37;
        let pairs = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            (est.rho_integrals(buf, &[b])[0], est.reflected_slope_integral(buf, b, b))
        });
        for (r, s) in pairs {
            assert!((r - s).abs() < 1e-10);
        }
    }

    #[test]
    fn fingerprints_are_stable_and_kind_specific() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.8, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 20, 6).unwrap();
        let a = estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::TimeIntegral).unwrap();
        let b = estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::TimeIntegral).unwrap();
        let c = estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::ExpClock).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.fingerprint, c.fingerprint);
    }

    #[test]
    fn short_horizon_rejected() {
        let m = kou();
        let problem = ProblemSpec::new(CostSpec::quadratic(), 0.8, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 5.0, 20, 6).unwrap();
        assert!(matches!(
            estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::TimeIntegral),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_precision_estimates() {
        let m = LevyTriplet::<f32>::brownian(0.0, 1.0).unwrap();
        let problem = ProblemSpec::new(CostSpec::<f32>::quadratic(), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2f32, 20.0, 200, 6).unwrap();
        let e = estimate_rho(&m, &problem, 0.0, &cfg, RhoMethod::TimeIntegral).unwrap();
        // ρ(0) = 2 E[sup_{e_q} X] / q = 4 for standard BM with q = 1/2
        assert!((e.mean - 4.0).abs() < 4.0 * e.stderr + 0.2, "{}", e.mean);
    }
}
