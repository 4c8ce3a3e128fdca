//! Path simulation on a uniform grid, the reflection map and discounted
//! pathwise functionals.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::LevyTriplet;
use crate::rng::{stream_rng, StreamDomain, StreamId};
use crate::scalar::Real;

/// How running extrema between grid points are monitored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Extrema taken over grid values only.
    #[default]
    Grid,
    /// The extremum of the Gaussian part inside each cell is drawn exactly from
    /// the Brownian bridge between the cell endpoints.
    Bridge,
}

/// Simulation settings shared by every estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub n_paths: usize,
    pub master_seed: u64,
    pub antithetic: bool,
    pub monitoring: Monitoring,
    /// Largest accepted discount tail `e^{-qT}`.
    pub tail_tol: T,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, horizon: T, n_paths: usize, master_seed: u64) -> Result<Self> {
        let cfg = Self {
            dt,
            horizon,
            n_paths,
            master_seed,
            antithetic: false,
            monitoring: Monitoring::Grid,
            tail_tol: T::lit(1e-4),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_monitoring(mut self, monitoring: Monitoring) -> Self {
        self.monitoring = monitoring;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig("sim.dt must be positive".into()));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig("sim.horizon must be finite and at least dt".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("sim.n_paths must be positive".into()));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::InvalidConfig("sim.n_paths must be even with antithetic sampling".into()));
        }
        if !(self.tail_tol > T::zero()) {
            return Err(Error::InvalidConfig("sim.tail_tol must be positive".into()));
        }
        Ok(())
    }

    /// Checks `e^{-qT} <= tail_tol` for the paired discount rate.
    pub fn validate_for(&self, q: T) -> Result<()> {
        self.validate()?;
        let tail = (-q * self.horizon).exp();
        if tail > self.tail_tol {
            return Err(Error::InvalidConfig(format!(
                "sim.horizon too short: exp(-q T) = {:e} exceeds tail_tol {}",
                tail.as_f64(),
                self.tail_tol
            )));
        }
        Ok(())
    }

    /// Number of grid cells covering `[0, horizon]`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt - T::lit(1e-9)).ceil().to_usize().expect("step count")
    }

    pub fn grid(&self) -> Vec<T> {
        (0..=self.n_steps()).map(|i| T::count(i) * self.dt).collect()
    }

    /// `e^{-q t_i}` on the grid.
    pub fn discount_factors(&self, q: T) -> Vec<T> {
        (0..=self.n_steps()).map(|i| (-q * T::count(i) * self.dt).exp()).collect()
    }
}

/// Which running extremum the generator records per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Min,
    Max,
}

/// Reusable per-worker buffer for one path.
#[derive(Clone, Debug, Default)]
pub struct PathBuf<T> {
    pub values: Vec<T>,
    /// Cell extremum ending at each grid index (`extreme[0] = values[0]`);
    /// empty under grid monitoring.
    pub extreme: Vec<T>,
    pub jumps: Vec<(usize, T)>,
}

impl<T: Real> PathBuf<T> {
    /// Running extremum source for grid index `i`.
    #[inline]
    pub fn cell_extreme(&self, i: usize) -> T {
        if self.extreme.is_empty() {
            self.values[i]
        } else {
            self.extreme[i]
        }
    }
}

/// Draws individual paths from per-path streams.
pub struct PathGenerator<'a, T> {
    triplet: &'a LevyTriplet<T>,
    cfg: &'a SimConfig<T>,
    mirror_jumps: bool,
}

impl<'a, T: Real> PathGenerator<'a, T> {
    pub fn new(triplet: &'a LevyTriplet<T>, cfg: &'a SimConfig<T>) -> Self {
        let symmetric = triplet.jumps().law().is_none_or(|l| l.is_symmetric());
        if cfg.antithetic && !symmetric {
            log::warn!("antithetic sampling ignored for asymmetric jump law; only Gaussian increments are negated");
        }
        Self { triplet, cfg, mirror_jumps: cfg.antithetic && symmetric }
    }

    /// Generator and antithetic flip for path `index` of `domain`.
    pub fn stream(&self, domain: StreamDomain, index: usize) -> (ChaCha8Rng, bool) {
        if self.cfg.antithetic {
            (stream_rng(self.cfg.master_seed, StreamId { domain, index: (index / 2) as u64 }), index % 2 == 1)
        } else {
            (stream_rng(self.cfg.master_seed, StreamId { domain, index: index as u64 }), false)
        }
    }

    pub fn stream_id(&self, domain: StreamDomain, index: usize) -> StreamId {
        let index = if self.cfg.antithetic { index / 2 } else { index } as u64;
        StreamId { domain, index }
    }

    /// Fills `buf` with path `index` of `domain` on `[0, horizon]`.
    pub fn path(&self, x0: T, domain: StreamDomain, index: usize, extreme: Extreme, buf: &mut PathBuf<T>) {
        let (mut rng, flip) = self.stream(domain, index);
        let n = self.cfg.n_steps();
        self.fill(x0, &mut rng, flip, n, self.cfg.dt, extreme, buf);
    }

    /// Draws `e ~ Exp(q)` conditioned on `e <= horizon` by rejection and fills
    /// `buf` with the path on `[0, e]`. Returns `(e, rejected draws)`.
    pub fn path_to_exp_time(
        &self,
        x0: T,
        q: T,
        domain: StreamDomain,
        index: usize,
        extreme: Extreme,
        buf: &mut PathBuf<T>,
    ) -> (T, usize) {
        let (mut rng, flip) = self.stream(domain, index);
        let mut rejected = 0;
        let e = loop {
            let e = T::lit(Exp1.sample(&mut rng)) / q;
            if e <= self.cfg.horizon {
                break e;
            }
            rejected += 1;
        };
        let dt = self.cfg.dt;
        let full = (e / dt).floor();
        let rem = e - full * dt;
        let full = full.to_usize().expect("step count");
        let (cells, last) = if rem > T::lit(1e-12) * dt { (full + 1, rem) } else { (full, dt) };
        self.fill(x0, &mut rng, flip, cells, last, extreme, buf);
        (e, rejected)
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &self,
        x0: T,
        rng: &mut ChaCha8Rng,
        flip: bool,
        cells: usize,
        last: T,
        extreme: Extreme,
        buf: &mut PathBuf<T>,
    ) {
        let dt = self.cfg.dt;
        let len = T::count(cells.saturating_sub(1)) * dt + if cells > 0 { last } else { T::zero() };
        buf.values.clear();
        buf.extreme.clear();
        buf.jumps.clear();
        if let Some(law) = self.triplet.jumps().law() {
            let rate = self.triplet.jumps().rate();
            let mut t = T::zero();
            loop {
                t = t + T::lit(Exp1.sample(rng)) / rate;
                if t > len {
                    break;
                }
                let k = (t / dt).ceil().to_usize().unwrap_or(cells).clamp(1, cells);
                let z = law.sample(rng);
                buf.jumps.push((k, if flip && self.mirror_jumps { -z } else { z }));
            }
        }
        let bridge = self.cfg.monitoring == Monitoring::Bridge;
        let d = self.triplet.drift();
        let sigma = self.triplet.sigma();
        let sd_full = sigma * dt.sqrt();
        let sd_last = sigma * last.sqrt();
        let mut x = x0;
        buf.values.push(x0);
        if bridge {
            buf.extreme.push(x0);
        }
        let mut next_jump = 0;
        for k in 1..=cells {
            let (h, sd) = if k == cells { (last, sd_last) } else { (dt, sd_full) };
            let mut c = x + d * h;
            if sigma > T::zero() {
                let z: f64 = StandardNormal.sample(rng);
                c = c + sd * T::lit(if flip { -z } else { z });
            }
            let mut xn = c;
            while next_jump < buf.jumps.len() && buf.jumps[next_jump].0 == k {
                xn = xn + buf.jumps[next_jump].1;
                next_jump += 1;
            }
            if bridge {
                let cont = if sigma > T::zero() {
                    let e = T::lit(Exp1.sample(rng));
                    let gap = c - x;
                    let spread = (gap * gap + T::lit(2.0) * sd * sd * e).sqrt();
                    match extreme {
                        Extreme::Min => (x + c - spread) / T::lit(2.0),
                        Extreme::Max => (x + c + spread) / T::lit(2.0),
                    }
                } else {
                    match extreme {
                        Extreme::Min => x.min(c),
                        Extreme::Max => x.max(c),
                    }
                };
                buf.extreme.push(match extreme {
                    Extreme::Min => cont.min(xn),
                    Extreme::Max => cont.max(xn),
                });
            }
            buf.values.push(xn);
            x = xn;
        }
    }
}

/// A materialized batch of paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathBatch<T> {
    pub grid: Vec<T>,
    pub x_start: T,
    pub values: Vec<Vec<T>>,
    /// Per-path cell minima (bridge monitoring only).
    pub cell_min: Option<Vec<Vec<T>>>,
    pub jump_marks: Vec<Vec<(usize, T)>>,
    pub seeds: Vec<StreamId>,
}

impl<T: Real> PathBatch<T> {
    /// The same batch started from `x_start + delta`.
    pub fn shifted(&self, delta: T) -> Self {
        let shift = |v: &Vec<T>| v.iter().map(|&x| x + delta).collect();
        Self {
            grid: self.grid.clone(),
            x_start: self.x_start + delta,
            values: self.values.iter().map(shift).collect(),
            cell_min: self.cell_min.as_ref().map(|m| m.iter().map(shift).collect()),
            jump_marks: self.jump_marks.clone(),
            seeds: self.seeds.clone(),
        }
    }

    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    /// Path `i` as a buffer usable by the streaming estimators.
    pub fn path_buf(&self, i: usize) -> PathBuf<T> {
        PathBuf {
            values: self.values[i].clone(),
            extreme: self.cell_min.as_ref().map_or_else(Vec::new, |m| m[i].clone()),
            jumps: self.jump_marks[i].clone(),
        }
    }

    /// Reflects every path at `b`.
    pub fn reflect(&self, b: T) -> Vec<ReflectedPath<T>> {
        (0..self.n_paths())
            .map(|i| reflect(&self.values[i], self.cell_min.as_ref().map(|m| m[i].as_slice()), b))
            .collect()
    }

    /// CSV dump with header `path,t,x`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,t,x")?;
        for (p, vals) in self.values.iter().enumerate() {
            for (t, x) in self.grid.iter().zip(vals) {
                writeln!(w, "{p},{t},{x}")?;
            }
        }
        Ok(())
    }
}

/// Simulates `cfg.n_paths` paths of the main stream family started at `x_start`.
pub fn simulate_batch<T: Real>(triplet: &LevyTriplet<T>, x_start: T, cfg: &SimConfig<T>) -> Result<PathBatch<T>> {
    simulate_batch_in(triplet, x_start, cfg, StreamDomain::Paths)
}

/// As [`simulate_batch`], drawing from the given stream family.
pub fn simulate_batch_in<T: Real>(
    triplet: &LevyTriplet<T>,
    x_start: T,
    cfg: &SimConfig<T>,
    domain: StreamDomain,
) -> Result<PathBatch<T>> {
    cfg.validate()?;
    let generator = PathGenerator::new(triplet, cfg);
    let paths: Vec<PathBuf<T>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut buf = PathBuf::default();
            generator.path(x_start, domain, i, Extreme::Min, &mut buf);
            buf
        })
        .collect();
    let bridge = cfg.monitoring == Monitoring::Bridge;
    let seeds = (0..cfg.n_paths).map(|i| generator.stream_id(domain, i)).collect();
    let mut values = Vec::with_capacity(paths.len());
    let mut minima = Vec::with_capacity(if bridge { paths.len() } else { 0 });
    let mut jump_marks = Vec::with_capacity(paths.len());
    for p in paths {
        values.push(p.values);
        if bridge {
            minima.push(p.extreme);
        }
        jump_marks.push(p.jumps);
    }
    Ok(PathBatch {
        grid: cfg.grid(),
        x_start,
        values,
        cell_min: bridge.then_some(minima),
        jump_marks,
        seeds,
    })
}

/// Reflected path, its cumulative control and first down-crossing index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReflectedPath<T> {
    pub u_values: Vec<T>,
    pub r_values: Vec<T>,
    /// First grid index with `X < b` (or a cell minimum below `b`), if any.
    pub tau_minus_index: Option<usize>,
}

/// Reflection at lower barrier `b`: `R_i = max(0, b - min_{j<=i} m_j)` and
/// `U_i = X_i + R_i`, where `m_j` are the cell minima (grid values when absent).
pub fn reflect<T: Real>(values: &[T], cell_min: Option<&[T]>, b: T) -> ReflectedPath<T> {
    let mut u_values = Vec::with_capacity(values.len());
    let mut r_values = Vec::with_capacity(values.len());
    let mut tau_minus_index = None;
    let mut running = T::infinity();
    for (i, &x) in values.iter().enumerate() {
        let m = cell_min.map_or(x, |c| c[i]);
        running = running.min(m);
        if tau_minus_index.is_none() && m < b {
            tau_minus_index = Some(i);
        }
        let r = (b - running).max(T::zero());
        r_values.push(r);
        u_values.push(x + r);
    }
    ReflectedPath { u_values, r_values, tau_minus_index }
}

/// Left-endpoint rule `Σ_i e^{-q t_i} g(t_i) dt`.
pub fn discounted_integral<T: Real>(values: &[T], q: T, dt: T) -> T {
    values
        .iter()
        .take(values.len().saturating_sub(1))
        .enumerate()
        .map(|(i, &g)| (-q * T::count(i) * dt).exp() * g)
        .sum::<T>()
        * dt
}

/// `Σ_i e^{-q t_i} (R_{t_i} - R_{t_{i-1}})` with `R_{t_{-1}} = 0`.
pub fn discounted_stieltjes<T: Real>(r_values: &[T], q: T, dt: T) -> T {
    let mut prev = T::zero();
    let mut acc = T::zero();
    for (i, &r) in r_values.iter().enumerate() {
        acc = acc + (-q * T::count(i) * dt).exp() * (r - prev);
        prev = r;
    }
    acc
}

/// Samples of `sup_{s <= e_q} X_s` from paths started at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpTimeSupremum<T> {
    pub samples: Vec<T>,
    /// Exponential draws rejected for exceeding the horizon.
    pub rejected: usize,
}

impl<T: Real> ExpTimeSupremum<T> {
    pub fn rejection_rate(&self) -> f64 {
        let n = self.samples.len() as f64;
        self.rejected as f64 / (self.rejected as f64 + n)
    }
}

/// Running supremum up to an independent `Exp(q)` time, one value per path.
pub fn sample_sup_at_exp_time<T: Real>(triplet: &LevyTriplet<T>, cfg: &SimConfig<T>, q: T) -> Result<ExpTimeSupremum<T>> {
    cfg.validate()?;
    if !(q > T::zero()) {
        return Err(Error::InvalidConfig("q must be positive".into()));
    }
    let generator = PathGenerator::new(triplet, cfg);
    let draws: Vec<(T, usize)> = (0..cfg.n_paths)
        .into_par_iter()
        .map_init(PathBuf::default, |buf, i| {
            let (_, rejected) = generator.path_to_exp_time(T::zero(), q, StreamDomain::ExpClock, i, Extreme::Max, buf);
            let sup = (0..buf.values.len()).fold(T::neg_infinity(), |m, j| m.max(buf.cell_extreme(j)));
            (sup, rejected)
        })
        .collect();
    Ok(ExpTimeSupremum {
        rejected: draws.iter().map(|d| d.1).sum(),
        samples: draws.into_iter().map(|d| d.0).collect(),
    })
}
