//! Closed-form ground truths: deterministic drift and the exponential law of
//! the supremum of spectrally negative processes.

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::levy::LevyTriplet;
use crate::scalar::Real;

/// Laplace exponent `ψ(λ) = log E[e^{λ X_1}]` of a model without positive jumps.
#[derive(Clone, Debug)]
pub struct SpectrallyNegativeOracle<T> {
    triplet: LevyTriplet<T>,
}

impl<T: Real> SpectrallyNegativeOracle<T> {
    pub fn new(triplet: &LevyTriplet<T>) -> Result<Self> {
        if !triplet.classify().spectrally_negative {
            return Err(Error::NotSpectrallyNegative);
        }
        Ok(Self { triplet: triplet.clone() })
    }

    /// `ψ(λ) = dλ + σ²λ²/2 + rate (E[e^{λJ}] - 1)` for `λ >= 0`.
    pub fn laplace_exponent(&self, lambda: T) -> T {
        let m = &self.triplet;
        let mut psi = m.drift() * lambda + m.sigma() * m.sigma() * lambda * lambda / T::lit(2.0);
        if let Some(law) = m.jumps().law() {
            let mgf = law.laplace(lambda).expect("negative jumps have finite Laplace transform for λ >= 0");
            psi = psi + m.jumps().rate() * (mgf - T::one());
        }
        psi
    }

    /// Largest root `Φ(q)` of `ψ(λ) = q`; `+∞` when `ψ` stays below `q`
    /// (nonincreasing paths, whose supremum is 0).
    pub fn phi_root(&self, q: T) -> Result<T> {
        if !(q > T::zero()) {
            return Err(Error::InvalidConfig("q must be positive".into()));
        }
        let g = |l: T| self.laplace_exponent(l) - q;
        let mut lo = T::zero();
        let mut hi = T::one();
        while g(hi) <= T::zero() {
            lo = hi;
            hi = hi * T::lit(2.0);
            if hi > T::lit(1e12) {
                return Ok(T::infinity());
            }
        }
        // Safeguarded Newton on a bracket with g(lo) <= 0 < g(hi).
        let mut l = hi;
        for _ in 0..200 {
            let gl = g(l);
            if gl.abs() <= T::lit(1e-13) * (T::one() + q) {
                break;
            }
            if gl > T::zero() {
                hi = l;
            } else {
                lo = l;
            }
            let h = T::lit(1e-7) * (T::one() + l);
            let slope = (g(l + h) - gl) / h;
            let newton = l - gl / slope;
            l = if newton.is_finite() && newton > lo && newton < hi { newton } else { (lo + hi) / T::lit(2.0) };
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        Ok(l)
    }

    /// `E[sup_{s <= e_q} X_s] = 1 / Φ(q)`.
    pub fn expected_sup_at_exp_time(&self, q: T) -> Result<T> {
        Ok(T::one() / self.phi_root(q)?)
    }

    /// Optimal barrier for `f(x) = x²`: `-qC/2 - 1/Φ(q)`.
    pub fn quadratic_bstar_closed_form(&self, problem: &ProblemSpec<T>) -> Result<T> {
        if !problem.cost.is_quadratic() {
            return Err(Error::InvalidConfig("closed-form barrier needs the quadratic cost".into()));
        }
        let q = problem.q;
        Ok(-q * problem.c / T::lit(2.0) - self.expected_sup_at_exp_time(q)?)
    }
}

/// `∫_0^∞ e^{-qt} (x + dt)² dt` for a deterministic upward drift started at `x >= b`.
pub fn pure_drift_value<T: Real>(q: T, d: T, b: T, x: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::AssumptionViolated("pure-drift value oracle needs positive drift".into()));
    }
    if x < b {
        return Err(Error::AssumptionViolated("pure-drift value oracle needs x >= b".into()));
    }
    let two = T::lit(2.0);
    Ok(x * x / q + two * x * d / (q * q) + two * d * d / (q * q * q))
}
