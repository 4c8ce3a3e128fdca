//! Optimal barrier `b* = inf{b : ρ(b) + C >= 0}` by bracketing and bisection on
//! one fixed common-random-number batch, plus the vanishing-drift procedure for
//! driftless compound Poisson models and barrier sweeps of the value.

use serde::Serialize;

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::levy::LevyTriplet;
use crate::path::{Extreme, SimConfig};
use crate::rng::StreamDomain;
use crate::scalar::Real;
use crate::stats::{paired_difference, EstimateWithError};

/// Largest `|b|` tried while bracketing.
pub const BRACKET_LIMIT: f64 = 1e6;

/// Bisection levels evaluated per pass over the batch.
const LEVELS_PER_PASS: u32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierResult<T> {
    pub b_star: T,
    /// Final interval with `ρ̂(lo) + C < 0 <= ρ̂(hi) + C`.
    pub bracket: (T, T),
    pub rho_at_b_star: EstimateWithError<T>,
    pub iterations: usize,
    /// Standard error of `ρ̂(b*)` divided by the local slope of `ρ̂`.
    pub ci_halfwidth: T,
    /// Local slope of `ρ̂` at `b*` (secant over `b* ± 10·tol`).
    pub slope: T,
    /// The slope was below `1e-12`: `b*` may sit on a flat stretch of `f'_+`.
    pub flat: bool,
    pub bisect_tol: T,
}

/// Default bisection tolerance `1e-3 (1 + |b|)`.
pub fn default_tol<T: Real>(b: T) -> T {
    T::lit(1e-3) * (T::one() + b.abs())
}

struct RootSearch<'a, T> {
    est: Estimator<'a, T>,
    passes: usize,
}

impl<T: Real> RootSearch<'_, T> {
    /// `ρ̂` at every point of `bs`, all from the same paths.
    fn rho(&mut self, bs: &[T]) -> Result<Vec<EstimateWithError<T>>> {
        self.passes += 1;
        let est = &self.est;
        let samples = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| est.rho_integrals(buf, bs));
        (0..bs.len())
            .map(|j| {
                let s: Vec<T> = samples.iter().map(|v| v[j]).collect();
                est.summarize(&s, "rho_time_integral")
            })
            .collect()
    }
}

/// Solves `ρ̂(b) + C = 0` on one batch.
pub fn solve_barrier<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    cfg: &SimConfig<T>,
    bisect_tol: Option<T>,
) -> Result<BarrierResult<T>> {
    if !problem.is_admissible() {
        return Err(Error::AssumptionViolated(format!(
            "cost slopes {:?} do not straddle -C q = {}",
            problem.cost.slope_limits(),
            -problem.c * problem.q
        )));
    }
    if triplet.classify().driftless_compound_poisson {
        return Err(Error::AssumptionViolated(
            "driftless compound Poisson model: use the vanishing-drift solver".into(),
        ));
    }
    if let Some(tol) = bisect_tol {
        if !(tol > T::zero()) {
            return Err(Error::InvalidConfig("bisect_tol must be positive".into()));
        }
    }
    let c = problem.c;
    let mut search = RootSearch { est: Estimator::new(triplet, problem, cfg)?, passes: 0 };

    let (mut lo, mut hi) = bracket(&mut search, c)?;
    let tol_at = |lo: T, hi: T| bisect_tol.unwrap_or_else(|| default_tol((lo + hi) / T::lit(2.0)));

    let mut iterations = 0;
    while hi - lo > tol_at(lo, hi) {
        let needed = ((hi - lo) / tol_at(lo, hi)).log2().ceil().to_u32().unwrap_or(1).max(1);
        let levels = needed.min(LEVELS_PER_PASS);
        let parts = 1usize << levels;
        let width = hi - lo;
        let pts: Vec<T> = (1..parts).map(|k| lo + width * T::count(k) / T::count(parts)).collect();
        let g = search.rho(&pts)?;
        // g is exactly nondecreasing in b: the first nonnegative point closes the bracket.
        let first = g.iter().position(|e| e.mean + c >= T::zero()).unwrap_or(pts.len());
        let new_lo = if first == 0 { lo } else { pts[first - 1] };
        let new_hi = if first == pts.len() { hi } else { pts[first] };
        lo = new_lo;
        hi = new_hi;
        iterations += levels as usize;
    }

    let tol = tol_at(lo, hi);
    let b_star = (lo + hi) / T::lit(2.0);
    let delta = T::lit(10.0) * tol;
    let fin = search.rho(&[b_star - delta, b_star, b_star + delta])?;
    let slope = (fin[2].mean - fin[0].mean) / (T::lit(2.0) * delta);
    let (ci_halfwidth, flat) = confidence_halfwidth(fin[1].stderr, slope);
    if flat {
        log::warn!("rho is flat near b* = {b_star}; confidence interval reported as infinite");
    }
    Ok(BarrierResult {
        b_star,
        bracket: (lo, hi),
        rho_at_b_star: fin[1].clone(),
        iterations,
        ci_halfwidth,
        slope,
        flat,
        bisect_tol: tol,
    })
}

/// `stderr / slope`, or `+∞` (flagged) when the slope is below `1e-12`.
fn confidence_halfwidth<T: Real>(stderr: T, slope: T) -> (T, bool) {
    if slope >= T::lit(1e-12) {
        (stderr / slope, false)
    } else {
        (T::infinity(), true)
    }
}

/// Finds `lo < hi` with `g(lo) < 0 <= g(hi)` by geometric expansion from 0.
fn bracket<T: Real>(search: &mut RootSearch<'_, T>, c: T) -> Result<(T, T)> {
    let mut pts: Vec<T> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|&v| T::lit(v)).collect();
    let g = search.rho(&pts)?;
    let first = g.iter().position(|e| e.mean + c >= T::zero());
    match first {
        Some(0) => {
            // expand downwards
            pts = far_points(-T::one());
            let g = search.rho(&pts)?;
            let mut hi = T::lit(-8.0);
            for (b, e) in pts.iter().zip(&g) {
                if e.mean + c < T::zero() {
                    return Ok((*b, hi));
                }
                hi = *b;
            }
            Err(Error::NoSignChange { limit: BRACKET_LIMIT })
        }
        Some(k) => Ok((pts[k - 1], pts[k])),
        None => {
            pts = far_points(T::one());
            let g = search.rho(&pts)?;
            let mut lo = T::lit(8.0);
            for (b, e) in pts.iter().zip(&g) {
                if e.mean + c >= T::zero() {
                    return Ok((lo, *b));
                }
                lo = *b;
            }
            Err(Error::NoSignChange { limit: BRACKET_LIMIT })
        }
    }
}

/// `sign · 2^k` for `k = 4, 5, …` while within the bracketing limit.
fn far_points<T: Real>(sign: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut v = 16.0;
    while v <= BRACKET_LIMIT {
        out.push(sign * T::lit(v));
        v *= 2.0;
    }
    out
}

/// Barrier of each drift-perturbed model `X_t - ε t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedResult<T> {
    /// `(ε, result for X - ε t)` in the order of the supplied grid.
    pub levels: Vec<(T, BarrierResult<T>)>,
    /// Barrier at the smallest `ε`.
    pub b_star: T,
    /// Whether the barriers are nonincreasing along the decreasing `ε` grid
    /// within three combined confidence half-widths per adjacent pair.
    pub monotone: bool,
}

/// Default perturbation sizes.
pub fn default_eps_grid<T: Real>() -> Vec<T> {
    [0.2, 0.1, 0.05, 0.025].iter().map(|&e| T::lit(e)).collect()
}

/// Solves the barrier of `X - ε t` for each `ε` of a strictly decreasing grid.
/// All levels share the same random numbers.
pub fn solve_barrier_perturbed<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    cfg: &SimConfig<T>,
    eps_grid: &[T],
    bisect_tol: Option<T>,
) -> Result<PerturbedResult<T>> {
    if !triplet.classify().driftless_compound_poisson {
        return Err(Error::AssumptionViolated("vanishing-drift solver needs a driftless compound Poisson model".into()));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > T::zero())) || eps_grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidConfig("perturb.eps_grid must be positive and strictly decreasing".into()));
    }
    let mut levels = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let perturbed = triplet.with_added_drift(-eps)?;
        levels.push((eps, solve_barrier(&perturbed, problem, cfg, bisect_tol)?));
    }
    let monotone = levels.windows(2).all(|w| {
        let (a, b) = (&w[0].1, &w[1].1);
        let slack = T::lit(3.0) * (a.ci_halfwidth * a.ci_halfwidth + b.ci_halfwidth * b.ci_halfwidth).sqrt()
            + a.bisect_tol
            + b.bisect_tol;
        b.b_star <= a.b_star + slack
    });
    let b_star = levels.last().expect("nonempty grid").1.b_star;
    Ok(PerturbedResult { levels, b_star, monotone })
}

/// Values `v̂_b(x)` over a grid of barriers on shared paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep<T> {
    pub x: T,
    pub points: Vec<(T, EstimateWithError<T>)>,
    #[serde(skip)]
    samples: Vec<Vec<T>>,
    #[serde(skip)]
    paired: bool,
}

impl<T: Real> Sweep<T> {
    /// Mean and standard error of `v̂_{b_j}(x) - v̂_{b_k}(x)` on the shared paths.
    pub fn difference(&self, j: usize, k: usize) -> (T, T) {
        paired_difference(&self.samples[j], &self.samples[k], self.paired)
    }

    /// Index of the grid point nearest `b`.
    pub fn nearest(&self, b: T) -> usize {
        (0..self.points.len())
            .min_by(|&i, &j| {
                let (di, dj) = ((self.points[i].0 - b).abs(), (self.points[j].0 - b).abs());
                di.partial_cmp(&dj).expect("finite grid")
            })
            .expect("nonempty sweep")
    }
}

/// Evaluates `v̂_b(x)` for every `b` in a sorted grid on one batch.
pub fn barrier_sweep<T: Real>(
    triplet: &LevyTriplet<T>,
    problem: &ProblemSpec<T>,
    x: T,
    b_grid: &[T],
    cfg: &SimConfig<T>,
) -> Result<Sweep<T>> {
    if b_grid.is_empty() || b_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("sweep b_grid must be nonempty and strictly increasing".into()));
    }
    let est = Estimator::new(triplet, problem, cfg)?;
    let c = problem.c;
    let per_path = est.map_paths(StreamDomain::Paths, Extreme::Min, |buf| {
        b_grid
            .iter()
            .map(|&b| {
                let (v1, v2) = est.value_parts(buf, x, b);
                v1 + c * v2
            })
            .collect::<Vec<T>>()
    });
    let samples: Vec<Vec<T>> = (0..b_grid.len()).map(|j| per_path.iter().map(|p| p[j]).collect()).collect();
    let points = b_grid
        .iter()
        .zip(&samples)
        .map(|(&b, s)| Ok((b, est.summarize(s, "value")?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep { x, points, samples, paired: cfg.antithetic })
}
