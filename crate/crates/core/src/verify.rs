//! Numerical checks of the structural identities satisfied by barrier values:
//! barrier and start-point derivatives, convexity, the stopped-value martingale
//! and the variational inequalities at the optimal barrier.
//!
//! Every check evaluates all its functionals on the same paths, so reported
//! errors are those of pathwise differences.

use std::io::Write;

use serde::Serialize;

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::levy::LevyTriplet;
use crate::path::{Extreme, Monitoring, PathGenerator, PathBuf, SimConfig};
use crate::rng::StreamDomain;
use crate::scalar::Real;
use crate::solver::{solve_barrier, BarrierResult};
use crate::stats::EstimateWithError;

/// One evaluation point of a check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow<T> {
    pub x: T,
    pub residual: T,
    pub tolerance: T,
    pub passed: bool,
}

/// Outcome of one check. Single-point checks report the raw residual against
/// its tolerance; multi-point checks report the worst residual-to-tolerance
/// ratio against tolerance 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport<T> {
    pub name: String,
    pub statistic: T,
    pub tolerance: T,
    pub passed: bool,
    pub one_sided: bool,
    pub details: Vec<CheckRow<T>>,
}

impl<T: Real> CheckReport<T> {
    fn single(name: &str, x: T, residual: T, tolerance: T) -> Self {
        let passed = residual.abs() <= tolerance;
        Self {
            name: name.into(),
            statistic: residual,
            tolerance,
            passed,
            one_sided: false,
            details: vec![CheckRow { x, residual, tolerance, passed }],
        }
    }

    /// `rows` pairs each point with whether only negative residuals count
    /// against it.
    fn from_rows(name: &str, rows: Vec<(CheckRow<T>, bool)>) -> Self {
        let floor = T::lit(1e-12);
        let statistic = rows
            .iter()
            .map(|(r, lower_only)| {
                let excess = if *lower_only { (-r.residual).max(T::zero()) } else { r.residual.abs() };
                excess / r.tolerance.max(floor)
            })
            .fold(T::zero(), |m, v| m.max(v));
        let passed = rows.iter().all(|(r, _)| r.passed);
        let one_sided = !rows.is_empty() && rows.iter().all(|(_, s)| *s);
        Self {
            name: name.into(),
            statistic,
            tolerance: T::one(),
            passed,
            one_sided,
            details: rows.into_iter().map(|(r, _)| r).collect(),
        }
    }

    /// CSV table with header `x,residual,tolerance,passed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,residual,tolerance,passed")?;
        for r in &self.details {
            writeln!(w, "{},{},{},{}", r.x, r.residual, r.tolerance, r.passed)?;
        }
        Ok(())
    }
}

fn mean_se<T: Real>(samples: &[T], paired: bool) -> (T, T) {
    let e = EstimateWithError::from_samples(samples, paired, String::new());
    (e.mean, e.stderr)
}

fn column<T: Real>(rows: &[Vec<T>], j: usize) -> Vec<T> {
    rows.iter().map(|r| r[j]).collect()
}

/// Piecewise-linear value interpolant on the lattice `b + k h`, `k = 0..n`,
/// extended exactly by `C (b - y) + v(b)` below `b` and with frozen slope above.
/// Evaluations are linear forms in the node values.
#[derive(Clone, Debug)]
struct Lattice<T> {
    b: T,
    h: T,
    n: usize,
    c: T,
}

/// `Σ coef_k v_k + constant`
#[derive(Clone, Debug, Default)]
struct LinearForm<T> {
    terms: Vec<(usize, T)>,
    constant: T,
}

impl<T: Real> LinearForm<T> {
    fn add(&mut self, other: &Self, scale: T) {
        self.terms.extend(other.terms.iter().map(|&(k, a)| (k, a * scale)));
        self.constant = self.constant + other.constant * scale;
    }

    fn eval(&self, nodes: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(k, a)| acc + a * nodes[k])
    }
}

impl<T: Real> Lattice<T> {
    fn node(&self, k: usize) -> T {
        self.b + T::count(k) * self.h
    }

    fn nodes(&self) -> Vec<T> {
        (0..=self.n).map(|k| self.node(k)).collect()
    }

    fn form(&self, y: T) -> LinearForm<T> {
        if y <= self.b {
            return LinearForm { terms: vec![(0, T::one())], constant: self.c * (self.b - y) };
        }
        let s = (y - self.b) / self.h;
        let top = T::count(self.n);
        if s >= top {
            let over = s - top;
            return LinearForm { terms: vec![(self.n, T::one() + over), (self.n - 1, -over)], constant: T::zero() };
        }
        let k = s.floor().to_usize().expect("lattice index").min(self.n - 1);
        let w = s - T::count(k);
        LinearForm { terms: vec![(k, T::one() - w), (k + 1, w)], constant: T::zero() }
    }

    /// Lattice index nearest to `x` (negative below `b`).
    fn index_of(&self, x: T) -> i64 {
        ((x - self.b) / self.h).round().to_i64().expect("lattice index")
    }

    fn at(&self, i: i64) -> T {
        self.b + T::lit(i as f64) * self.h
    }
}

/// Runs the checks for one model, problem and simulation configuration.
pub struct Verifier<'a, T> {
    triplet: &'a LevyTriplet<T>,
    problem: &'a ProblemSpec<T>,
    cfg: &'a SimConfig<T>,
    b_star: T,
    barrier: Option<BarrierResult<T>>,
}

impl<'a, T: Real> Verifier<'a, T> {
    /// Solves for the optimal barrier first.
    pub fn solve(
        triplet: &'a LevyTriplet<T>,
        problem: &'a ProblemSpec<T>,
        cfg: &'a SimConfig<T>,
        bisect_tol: Option<T>,
    ) -> Result<Self> {
        let r = solve_barrier(triplet, problem, cfg, bisect_tol)?;
        Ok(Self { triplet, problem, cfg, b_star: r.b_star, barrier: Some(r) })
    }

    /// Uses a barrier computed elsewhere.
    pub fn with_barrier(triplet: &'a LevyTriplet<T>, problem: &'a ProblemSpec<T>, cfg: &'a SimConfig<T>, b_star: T) -> Self {
        Self { triplet, problem, cfg, b_star, barrier: None }
    }

    pub fn b_star(&self) -> T {
        self.b_star
    }

    pub fn barrier(&self) -> Option<&BarrierResult<T>> {
        self.barrier.as_ref()
    }

    fn estimator(&self) -> Result<Estimator<'a, T>> {
        Estimator::new(self.triplet, self.problem, self.cfg)
    }

    /// `∂_b v_b(x)` by a forward difference against `E_x[e^{-qτ_b}] (ρ(b) + C)`.
    pub fn check_barrier_derivative(&self, x: T, b: T, h: T) -> Result<CheckReport<T>> {
        if x == b {
            return Err(Error::InvalidConfig("barrier derivative check needs x != b".into()));
        }
        if !(h > T::zero()) {
            return Err(Error::InvalidConfig("verify.h must be positive".into()));
        }
        let est = self.estimator()?;
        let c = self.problem.c;
        let rows = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            let (a1, a2) = est.value_parts(buf, x, b);
            let (b1, b2) = est.value_parts(buf, x, b + h);
            let rho = est.rho_integrals(buf, &[b, b + h]);
            vec![
                (b1 + c * b2 - a1 - c * a2) / h,
                est.tau_discount(buf, x, b),
                rho[0],
                est.tau_discount(buf, x, b + h),
                rho[1],
            ]
        });
        let paired = self.cfg.antithetic;
        let fd = column(&rows, 0);
        let (tau, rho) = (column(&rows, 1), column(&rows, 2));
        let (fd_m, _) = mean_se(&fd, paired);
        let (tau_m, _) = mean_se(&tau, paired);
        let (rho_m, _) = mean_se(&rho, paired);
        let (tau_h, _) = mean_se(&column(&rows, 3), paired);
        let (rho_h, _) = mean_se(&column(&rows, 4), paired);
        // delta method: influence of mean(fd) - mean(tau) (mean(rho) + C)
        let influence: Vec<T> =
            (0..rows.len()).map(|p| fd[p] - tau_m * rho[p] - (rho_m + c) * tau[p]).collect();
        let (_, se) = mean_se(&influence, paired);
        let residual = fd_m - tau_m * (rho_m + c);
        let variation = (tau_h - tau_m).abs() * (rho_m + c).abs() + tau_m.max(tau_h) * (rho_h - rho_m).abs();
        let tail = est.discount()[self.cfg.n_steps()] * ((rho_m.abs() + c.abs()) * T::lit(2.0));
        let tol = T::lit(3.0) * se + variation + tail + T::lit(1e-9) * (T::one() + fd_m.abs());
        Ok(CheckReport::single("barrier_derivative", x, residual, tol))
    }

    /// `∂_x v_b(x)` by a forward difference against
    /// `E_x[∫_0^τ e^{-qt} f'_+(X_t) dt] - C E_x[e^{-qτ}]`.
    pub fn check_slope_identity(&self, x: T, b: T, h: T) -> Result<CheckReport<T>> {
        if !(h > T::zero()) {
            return Err(Error::InvalidConfig("verify.h must be positive".into()));
        }
        let est = self.estimator()?;
        let c = self.problem.c;
        let rows = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            let (a1, a2) = est.value_parts(buf, x, b);
            let (b1, b2) = est.value_parts(buf, x + h, b);
            let rhs = |y: T| est.pre_tau_slope_integral(buf, y, b) - c * est.tau_discount(buf, y, b);
            let (r0, r1) = (rhs(x), rhs(x + h));
            let fd = (b1 + c * b2 - a1 - c * a2) / h;
            vec![fd - r0, r0, r1]
        });
        let paired = self.cfg.antithetic;
        let (diff, se) = mean_se(&column(&rows, 0), paired);
        let (r0, _) = mean_se(&column(&rows, 1), paired);
        let (r1, _) = mean_se(&column(&rows, 2), paired);
        let tol = T::lit(3.0) * se + (r1 - r0).abs() + T::lit(1e-9) * (T::one() + r0.abs());
        Ok(CheckReport::single("slope_identity", x, diff, tol))
    }

    /// Second differences of `v̂_{b*}` on a uniform grid are nonnegative within noise.
    pub fn check_convexity(&self, x_grid: &[T]) -> Result<CheckReport<T>> {
        if !self.problem.is_admissible() {
            return Err(Error::AssumptionViolated("convexity check needs an admissible problem".into()));
        }
        if x_grid.len() < 5 {
            return Err(Error::InvalidConfig("convexity check needs at least 5 grid points".into()));
        }
        let step = x_grid[1] - x_grid[0];
        if !(step > T::zero())
            || x_grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > T::lit(1e-9) * (T::one() + step.abs()))
        {
            return Err(Error::InvalidConfig("convexity grid must be uniformly spaced and increasing".into()));
        }
        let est = self.estimator()?;
        let (b, c) = (self.b_star, self.problem.c);
        let rows = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            let v: Vec<T> = est.value_profile(buf, x_grid, b).iter().map(|&(v1, v2)| v1 + c * v2).collect();
            (1..v.len() - 1).map(|k| v[k - 1] - T::lit(2.0) * v[k] + v[k + 1]).collect::<Vec<T>>()
        });
        let details = (0..x_grid.len() - 2)
            .map(|k| {
                let (m, se) = mean_se(&column(&rows, k), self.cfg.antithetic);
                let tol = T::lit(3.0) * se + T::lit(1e-9) * (T::one() + m.abs());
                (CheckRow { x: x_grid[k + 1], residual: m, tolerance: tol, passed: m >= -tol }, true)
            })
            .collect();
        Ok(CheckReport::from_rows("convexity", details))
    }

    /// Node values of `v̂_{b*}` on `lattice`, per path.
    fn lattice_samples(&self, est: &Estimator<'_, T>, lattice: &Lattice<T>) -> Vec<Vec<T>> {
        let nodes = lattice.nodes();
        let (b, c) = (self.b_star, self.problem.c);
        est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
            est.value_profile(buf, &nodes, b).iter().map(|&(v1, v2)| v1 + c * v2).collect::<Vec<T>>()
        })
    }

    /// Spread of `X` over `[0, t]` covering all but a negligible fraction of paths.
    fn spread(&self, t: T) -> T {
        let m = self.triplet;
        let mut s = m.drift().abs() * t + T::lit(6.0) * m.sigma() * t.sqrt();
        if let Some(law) = m.jumps().law() {
            let mean_jumps = m.jumps().rate() * t;
            s = s + law.abs_quantile(T::lit(0.999)) * (mean_jumps + T::lit(4.0) * mean_jumps.sqrt() + T::one());
        }
        s
    }

    /// `m(t) = E_x[e^{-q(τ∧t)} v̂(X_{τ∧t}) + ∫_0^{τ∧t} e^{-qs} f(X_s) ds]` stays at `m(0)`.
    /// The interpolant `v̂` uses lattice spacing `h`; the stopped paths are drawn
    /// independently of the interpolant's paths.
    pub fn check_martingale(&self, x: T, t_grid: &[T], h: T) -> Result<CheckReport<T>> {
        let b = self.b_star;
        if !(x > b) {
            return Err(Error::InvalidConfig("martingale check needs x above the barrier".into()));
        }
        if !(h > T::zero()) {
            return Err(Error::InvalidConfig("verify.h must be positive".into()));
        }
        let dt = self.cfg.dt;
        let n = self.cfg.n_steps();
        let idx: Vec<usize> = t_grid
            .iter()
            .map(|&t| {
                if !(t >= T::zero()) || t > self.cfg.horizon {
                    return Err(Error::InvalidConfig("martingale times must lie in [0, horizon]".into()));
                }
                Ok((t / dt).round().to_usize().expect("grid index").min(n))
            })
            .collect::<Result<_>>()?;
        let t_max = T::count(idx.iter().copied().max().unwrap_or(0)) * dt;
        let est = self.estimator()?;
        let top = x + self.spread(t_max) + h;
        let lattice = Lattice {
            b,
            h,
            n: ((top - b) / h).ceil().to_usize().expect("lattice size").max(2),
            c: self.problem.c,
        };
        let node_rows = self.lattice_samples(&est, &lattice);
        let paired = self.cfg.antithetic;
        let node_means: Vec<T> = (0..=lattice.n).map(|k| mean_se(&column(&node_rows, k), paired).0).collect();
        let curvature = (1..lattice.n)
            .map(|k| (node_means[k - 1] - T::lit(2.0) * node_means[k] + node_means[k + 1]).abs() / (h * h))
            .fold(T::zero(), |m, v| m.max(v));
        let interp = |y: T| lattice.form(y).eval(&node_means);
        let v0 = interp(x);

        let bridge = self.cfg.monitoring == Monitoring::Bridge;
        let generator = PathGenerator::new(self.triplet, self.cfg);
        let disc = est.discount();
        let q = self.problem.q;
        // (discount at the stopping index, stopped position, running cost so far)
        let run = |buf: &PathBuf<T>| -> Vec<(T, T, T)> {
            let tau = est.tau_index(buf, x, b);
            idx.iter()
                .map(|&k| {
                    let stop = tau.map_or(k, |tt| tt.min(k));
                    let mut y = x + buf.values[stop];
                    if bridge && tau == Some(stop) && y >= b {
                        // crossing inside the cell by the continuous part lands on the barrier
                        y = b;
                    }
                    (disc[stop], y, est.pre_tau_cost_integral(buf, x, b, stop))
                })
                .collect()
        };
        let rows: Vec<Vec<(T, T, T)>> = if self.triplet.is_deterministic() {
            let mut buf = PathBuf::default();
            generator.path(T::zero(), StreamDomain::Independent, 0, Extreme::Min, &mut buf);
            vec![run(&buf); self.cfg.n_paths]
        } else {
            use rayon::prelude::*;
            (0..self.cfg.n_paths)
                .into_par_iter()
                .map_init(PathBuf::default, |buf, i| {
                    generator.path(T::zero(), StreamDomain::Independent, i, Extreme::Min, buf);
                    run(buf)
                })
                .collect()
        };
        let f_x = self.problem.cost.value(x);
        let n_paths = T::count(rows.len());
        let details = t_grid
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let samples: Vec<T> = rows.iter().map(|r| r[j].0 * interp(r[j].1) + r[j].2).collect();
                let (m, se) = mean_se(&samples, paired);
                // m - v̂(x) depends on the node means through a fixed linear
                // functional; its error comes from the interpolant's own paths.
                let mut functional = LinearForm::default();
                for r in &rows {
                    functional.add(&lattice.form(r[j].1), r[j].0 / n_paths);
                }
                functional.add(&lattice.form(x), -T::one());
                let mut coef = vec![T::zero(); lattice.n + 1];
                for &(k, a) in &functional.terms {
                    coef[k] = coef[k] + a;
                }
                let interp_samples: Vec<T> =
                    node_rows.iter().map(|s| coef.iter().zip(s).map(|(&a, &v)| a * v).sum()).collect();
                let (_, se_interp) = mean_se(&interp_samples, paired);
                let residual = m - v0;
                let tol = T::lit(3.0) * (se * se + se_interp * se_interp).sqrt()
                    + curvature * h * h / T::lit(8.0)
                    + dt * (f_x.abs() + q * v0.abs())
                    + T::lit(1e-9) * (T::one() + v0.abs());
                (CheckRow { x: t, residual, tolerance: tol, passed: residual.abs() <= tol }, false)
            })
            .collect();
        Ok(CheckReport::from_rows("martingale", details))
    }

    /// Variational inequalities of the value at `b*`: `(L - q) v + f = 0` above
    /// the barrier and `>= 0` below, `v' + C >= 0` everywhere with equality below.
    ///
    /// Points are snapped to the lattice `b* + k·fd_h`. Derivatives use central
    /// differences (forward three- and four-point stencils at `b*`), and the jump
    /// integral uses a lattice-aligned quadrature of the jump law.
    pub fn check_hjb(&self, x_grid: &[T], fd_h: T) -> Result<Vec<CheckReport<T>>> {
        if !(fd_h > T::zero()) {
            return Err(Error::InvalidConfig("verify.fd_h must be positive".into()));
        }
        if x_grid.is_empty() {
            return Err(Error::InvalidConfig("verify.x_grid must not be empty".into()));
        }
        if self.triplet.sigma() > T::zero() && !self.problem.cost.kinks().is_empty() {
            return Err(Error::AssumptionViolated(format!(
                "cost has kinks at {:?}; mollify it before the HJB check on a model with a Brownian part",
                self.problem.cost.kinks()
            )));
        }
        let b = self.b_star;
        let c = self.problem.c;
        let q = self.problem.q;
        let m = self.triplet;
        let law = m.jumps().law();
        let rate = m.jumps().rate();
        let pad = law.map_or(T::zero(), |l| l.abs_quantile(T::lit(0.999)));
        let x_max = x_grid.iter().copied().fold(b, |a, v| a.max(v));
        let probe = Lattice { b, h: fd_h, n: 2, c };
        let top_index = probe.index_of(x_max).max(0) as usize + 4 + (pad / fd_h).ceil().to_usize().expect("padding");
        let lattice = Lattice { b, h: fd_h, n: top_index, c };

        let mut points: Vec<i64> = x_grid.iter().map(|&x| lattice.index_of(x)).collect();
        points.dedup();

        let tail = T::lit(1e-9);
        let cost = &self.problem.cost;
        let d = m.drift();
        let half_var = m.sigma() * m.sigma() / T::lit(2.0);
        let h = fd_h;
        let two = T::lit(2.0);

        // (L - q) applied to the cost itself, for the discretization allowance.
        let generator_of_cost = |x: T| {
            let df = (cost.value(x + h) - cost.value(x - h)) / (two * h);
            let d2f = (cost.value(x + h) - two * cost.value(x) + cost.value(x - h)) / (h * h);
            let mut g = d * df + half_var * d2f - q * cost.value(x);
            if let Some(l) = law {
                let (rule, _) = l.quadrature(h, T::zero(), tail);
                let jump: T = rule.iter().map(|&(z, w)| w * (cost.value(x + z) - cost.value(x))).sum();
                g = g + rate * jump;
            }
            g
        };

        struct Point<T> {
            x: T,
            residual: LinearForm<T>,
            gradient: LinearForm<T>,
            tail_mass: T,
            above: bool,
        }
        let mut forms = Vec::with_capacity(points.len());
        for &i in &points {
            let x = lattice.at(i);
            let v = |k: i64| lattice.form(lattice.at(k));
            let (grad, second) = if i < 1 {
                if i < 0 {
                    // linear region: v' = -C, v'' = 0
                    (LinearForm { terms: vec![], constant: -c }, LinearForm::default())
                } else {
                    let mut g = LinearForm::default();
                    g.add(&v(0), -T::lit(3.0) / (two * h));
                    g.add(&v(1), T::lit(4.0) / (two * h));
                    g.add(&v(2), -T::one() / (two * h));
                    let mut s = LinearForm::default();
                    s.add(&v(0), two / (h * h));
                    s.add(&v(1), -T::lit(5.0) / (h * h));
                    s.add(&v(2), T::lit(4.0) / (h * h));
                    s.add(&v(3), -T::one() / (h * h));
                    (g, s)
                }
            } else {
                let mut g = LinearForm::default();
                g.add(&v(i + 1), T::one() / (two * h));
                g.add(&v(i - 1), -T::one() / (two * h));
                let mut s = LinearForm::default();
                s.add(&v(i + 1), T::one() / (h * h));
                s.add(&v(i), -two / (h * h));
                s.add(&v(i - 1), T::one() / (h * h));
                (g, s)
            };
            let vx = v(i);
            let mut res = LinearForm { terms: vec![], constant: cost.value(x) };
            res.add(&grad, d);
            res.add(&second, half_var);
            res.add(&vx, -q);
            let mut tail_mass = T::zero();
            if let Some(l) = law {
                let (rule, missing) = l.quadrature(h, b - x, tail);
                let mass: T = rule.iter().map(|p| p.1).sum();
                for &(z, w) in &rule {
                    res.add(&lattice.form(x + z), rate * w);
                }
                res.add(&vx, -rate * mass);
                tail_mass = missing;
            }
            let mut gradient = grad;
            gradient.constant = gradient.constant + c;
            forms.push(Point { x, residual: res, gradient, tail_mass, above: i >= 0 });
        }

        let est = self.estimator()?;
        let node_rows = self.lattice_samples(&est, &lattice);
        let paired = self.cfg.antithetic;
        let node_means: Vec<T> =
            (0..=lattice.n).map(|k| mean_se(&column(&node_rows, k), paired).0).collect();
        let curvature_near = |x: T| {
            let k = lattice.index_of(x).max(1) as usize;
            (k.saturating_sub(2).max(1)..(k + 3).min(lattice.n))
                .map(|j| (node_means[j - 1] - two * node_means[j] + node_means[j + 1]).abs() / (h * h))
                .fold(T::zero(), |a, v| a.max(v))
        };
        let v_top = node_means[lattice.n].abs();

        let mut gen_rows = Vec::with_capacity(forms.len());
        let mut grad_rows = Vec::with_capacity(forms.len());
        for p in &forms {
            let res_samples: Vec<T> = node_rows.iter().map(|r| p.residual.eval(r)).collect();
            let grad_samples: Vec<T> = node_rows.iter().map(|r| p.gradient.eval(r)).collect();
            let (r, r_se) = mean_se(&res_samples, paired);
            let (g, g_se) = mean_se(&grad_samples, paired);
            let kappa = curvature_near(p.x);
            let vx = lattice.form(p.x).eval(&node_means);
            let fd_allow = if p.above { kappa * h * h * (d.abs() + half_var + rate + T::one()) } else { T::zero() };
            let quad_allow = rate * p.tail_mass * (vx.abs() + v_top);
            let disc_allow = self.cfg.dt * (generator_of_cost(p.x).abs() + q * c.abs());
            let floor = T::lit(1e-9) * (T::one() + vx.abs());
            let tol = T::lit(3.0) * r_se + fd_allow + quad_allow + disc_allow + floor;
            let passed = if p.above { r.abs() <= tol } else { r >= -tol };
            gen_rows.push((CheckRow { x: p.x, residual: r, tolerance: tol, passed }, !p.above));

            let g_tol = T::lit(3.0) * g_se + if p.above { kappa * h } else { T::zero() } + floor;
            let g_pass = if p.above { g >= -g_tol } else { g.abs() <= g_tol };
            grad_rows.push((CheckRow { x: p.x, residual: g, tolerance: g_tol, passed: g_pass }, p.above));
        }
        let generator = CheckReport::from_rows("hjb_generator", gen_rows);
        let gradient = CheckReport::from_rows("hjb_gradient", grad_rows);
        Ok(vec![generator, gradient])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostSpec;

    #[test]
    fn lattice_forms() {
        let l = Lattice { b: 1.0, h: 0.5, n: 4, c: 2.0 };
        let nodes = [10.0, 11.0, 13.0, 16.0, 20.0];
        assert_eq!(l.form(0.0).eval(&nodes), 12.0);
        assert_eq!(l.form(1.25).eval(&nodes), 10.5);
        assert_eq!(l.form(3.0).eval(&nodes), 20.0);
        assert_eq!(l.form(3.5).eval(&nodes), 24.0);
        assert_eq!(l.index_of(0.0), -2);
    }

    #[test]
    fn report_statistics() {
        let rows: Vec<CheckRow<f64>> = vec![
            CheckRow { x: 0.0, residual: 0.5, tolerance: 1.0, passed: true },
            CheckRow { x: 1.0, residual: -0.2, tolerance: 0.1, passed: false },
        ];
        let r = CheckReport::from_rows("t", rows.iter().cloned().map(|r| (r, false)).collect());
        assert!(!r.passed && !r.one_sided);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        let s = CheckReport::from_rows("t", rows.iter().cloned().map(|r| (r, true)).collect());
        assert!((s.statistic - 2.0).abs() < 1e-12 && s.one_sided);
        let big = CheckRow { x: 0.0, residual: 7.0, tolerance: 1.0, passed: true };
        let t = CheckReport::from_rows("t", vec![(big, true)]);
        assert!(t.passed && t.statistic == 0.0);
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("x,residual,tolerance,passed\n0,0.5,1,true\n"));
    }

    fn drift_down() -> (LevyTriplet<f64>, ProblemSpec<f64>, SimConfig<f64>) {
        let m = LevyTriplet::pure_drift(-1.0).unwrap();
        let p = ProblemSpec::new(CostSpec::quadratic(), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-3, 30.0, 10, 0).unwrap();
        (m, p, cfg)
    }

    #[test]
    fn barrier_derivative_for_deterministic_descent() {
        let (m, p, cfg) = drift_down();
        let v = Verifier::with_barrier(&m, &p, &cfg, 0.0);
        let r = v.check_barrier_derivative(1.0, 0.0, 1e-3).unwrap();
        assert!(r.passed, "{r:?}");
        // E[e^{-qτ}] = e^{-0.5}, ρ(0) = 0 for nonincreasing paths: derivative e^{-0.5}·C
        let fd = r.statistic;
        assert!(fd.abs() <= r.tolerance);
    }

    #[test]
    fn slope_identity_below_barrier_is_structural() {
        let (m, p, cfg) = drift_down();
        let v = Verifier::with_barrier(&m, &p, &cfg, 0.0);
        let r = v.check_slope_identity(-1.0, 0.0, 0.01).unwrap();
        assert!(r.passed && r.statistic.abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn martingale_for_deterministic_descent() {
        let (m, p, cfg) = drift_down();
        let v = Verifier::with_barrier(&m, &p, &cfg, -0.25);
        let r = v.check_martingale(1.0, &[0.0, 0.5, 1.0, 2.0], 0.01).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn convexity_requires_admissible_problem() {
        let m = LevyTriplet::pure_drift(1.0).unwrap();
        let lin = CostSpec::builtin(crate::cost::BuiltinCost::PiecewiseLinear { slopes: vec![1.0], kinks: vec![] }).unwrap();
        let p = ProblemSpec::new(lin, 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 30.0, 10, 0).unwrap();
        let v = Verifier::with_barrier(&m, &p, &cfg, 0.0);
        let grid: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert!(matches!(v.check_convexity(&grid), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn hjb_rejects_kinked_cost_with_brownian_part() {
        let m = LevyTriplet::brownian(0.0, 1.0).unwrap();
        let p = ProblemSpec::new(CostSpec::abs(), 1.0, 0.5).unwrap();
        let cfg = SimConfig::new(1e-2, 20.0, 10, 0).unwrap();
        let v = Verifier::with_barrier(&m, &p, &cfg, -1.0);
        assert!(matches!(v.check_hjb(&[0.0], 0.05), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn hjb_for_pure_drift_up() {
        let m = LevyTriplet::pure_drift(1.0).unwrap();
        let p = ProblemSpec::new(CostSpec::quadratic(), 1.0, 0.1).unwrap();
        let cfg = SimConfig::new(1e-3, 120.0, 10, 0).unwrap();
        let v = Verifier::solve(&m, &p, &cfg, None).unwrap();
        let b = v.b_star();
        let grid: Vec<f64> = (-3..12).map(|k| b + 0.5 * k as f64).collect();
        let reports = v.check_hjb(&grid, 0.05).unwrap();
        for r in &reports {
            assert!(r.passed, "{r:#?}");
        }
    }
}
