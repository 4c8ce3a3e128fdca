//! Finite-activity Lévy models: drift, Gaussian part and a compound Poisson
//! jump component.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, composite_rule};
use crate::scalar::Real;

/// Law of a single jump size. Every law puts zero mass on `{0}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw<T> {
    /// Two-sided exponential (Kou): `+Exp(eta_up)` with probability `p_up`,
    /// otherwise `-Exp(eta_down)`.
    Kou { p_up: T, eta_up: T, eta_down: T },
    Gaussian { mean: T, std: T },
    Uniform { lo: T, hi: T },
    /// Atoms `(value, probability)`.
    Discrete { atoms: Vec<(T, T)> },
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl<T: Real> JumpLaw<T> {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                if !(*p_up >= T::zero() && *p_up <= T::one()) {
                    return bad("kou p_up must lie in [0, 1]");
                }
                if !(*eta_up > T::zero() && *eta_down > T::zero()) || !eta_up.is_finite() || !eta_down.is_finite() {
                    return bad("kou exponential rates must be positive and finite");
                }
            }
            JumpLaw::Gaussian { mean, std } => {
                if !mean.is_finite() || !(*std > T::zero()) || !std.is_finite() {
                    return bad("gaussian jumps need finite mean and positive std");
                }
            }
            JumpLaw::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                    return bad("uniform jumps need lo < hi");
                }
            }
            JumpLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return bad("discrete jump law needs at least one atom");
                }
                let mut total = T::zero();
                for &(v, p) in atoms {
                    if !v.is_finite() || v == T::zero() {
                        return bad("discrete jump atoms must be finite and nonzero");
                    }
                    if !(p > T::zero()) {
                        return bad("discrete jump probabilities must be positive");
                    }
                    total = total + p;
                }
                if (total - T::one()).abs() > T::lit(1e-6) {
                    return bad("discrete jump probabilities must sum to 1");
                }
            }
        }
        Ok(())
    }

    /// Draws one jump size; never returns exactly zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        loop {
            let z = match self {
                JumpLaw::Kou { p_up, eta_up, eta_down } => {
                    let u: f64 = rng.random();
                    let e: f64 = Exp1.sample(rng);
                    if u < p_up.as_f64() {
                        T::lit(e) / *eta_up
                    } else {
                        -T::lit(e) / *eta_down
                    }
                }
                JumpLaw::Gaussian { mean, std } => {
                    let n: f64 = StandardNormal.sample(rng);
                    *mean + *std * T::lit(n)
                }
                JumpLaw::Uniform { lo, hi } => {
                    let u: f64 = rng.random();
                    *lo + (*hi - *lo) * T::lit(u)
                }
                JumpLaw::Discrete { atoms } => {
                    let u = T::lit(rng.random::<f64>());
                    let mut acc = T::zero();
                    let mut pick = atoms[atoms.len() - 1].0;
                    for &(v, p) in atoms {
                        acc = acc + p;
                        if u < acc {
                            pick = v;
                            break;
                        }
                    }
                    pick
                }
            };
            if z != T::zero() {
                return z;
            }
        }
    }

    /// `E[exp(i λ J)]`.
    pub fn char_fn(&self, lambda: T) -> Complex<T> {
        let i = Complex::new(T::zero(), T::one());
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                let up = Complex::new(*eta_up, T::zero()) / Complex::new(*eta_up, -lambda);
                let down = Complex::new(*eta_down, T::zero()) / Complex::new(*eta_down, lambda);
                up * *p_up + down * (T::one() - *p_up)
            }
            JumpLaw::Gaussian { mean, std } => {
                let re = -(*std * *std * lambda * lambda) / T::lit(2.0);
                Complex::new(re, lambda * *mean).exp()
            }
            JumpLaw::Uniform { lo, hi } => {
                if lambda == T::zero() {
                    return Complex::new(T::one(), T::zero());
                }
                ((i * lambda * *hi).exp() - (i * lambda * *lo).exp()) / (i * lambda * (*hi - *lo))
            }
            JumpLaw::Discrete { atoms } => atoms
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, &(v, p)| acc + (i * lambda * v).exp() * p),
        }
    }

    /// `E[J 1{|J| < 1}]`, the compensator of small jumps.
    pub fn truncated_mean(&self) -> T {
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                let part = |eta: T| (T::one() - (-eta).exp() * (T::one() + eta)) / eta;
                *p_up * part(*eta_up) - (T::one() - *p_up) * part(*eta_down)
            }
            JumpLaw::Gaussian { mean, std } => {
                let (m, s) = (mean.as_f64(), std.as_f64());
                let (a, b) = ((-1.0 - m) / s, (1.0 - m) / s);
                T::lit(m * (normal_cdf(b) - normal_cdf(a)) + s * (normal_pdf(a) - normal_pdf(b)))
            }
            JumpLaw::Uniform { lo, hi } => {
                let a = lo.max(-T::one());
                let c = hi.min(T::one());
                if a < c {
                    (c * c - a * a) / (T::lit(2.0) * (*hi - *lo))
                } else {
                    T::zero()
                }
            }
            JumpLaw::Discrete { atoms } => atoms
                .iter()
                .filter(|(v, _)| v.abs() < T::one())
                .map(|&(v, p)| v * p)
                .sum(),
        }
    }

    /// `E[exp(β J)]` for real `β`, or `None` when it diverges.
    pub fn laplace(&self, beta: T) -> Option<T> {
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                let up = if *p_up > T::zero() {
                    if beta >= *eta_up {
                        return None;
                    }
                    *p_up * *eta_up / (*eta_up - beta)
                } else {
                    T::zero()
                };
                let q_down = T::one() - *p_up;
                let down = if q_down > T::zero() {
                    if -beta >= *eta_down {
                        return None;
                    }
                    q_down * *eta_down / (*eta_down + beta)
                } else {
                    T::zero()
                };
                Some(up + down)
            }
            JumpLaw::Gaussian { mean, std } => Some((beta * *mean + *std * *std * beta * beta / T::lit(2.0)).exp()),
            JumpLaw::Uniform { lo, hi } => {
                if beta == T::zero() {
                    Some(T::one())
                } else {
                    Some(((beta * *hi).exp() - (beta * *lo).exp()) / (beta * (*hi - *lo)))
                }
            }
            JumpLaw::Discrete { atoms } => Some(atoms.iter().map(|&(v, p)| p * (beta * v).exp()).sum()),
        }
    }

    /// Whether `E[exp(θ |J|)]` is finite.
    pub fn exp_moment_finite(&self, theta: T) -> bool {
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                (*p_up == T::zero() || theta < *eta_up) && (*p_up == T::one() || theta < *eta_down)
            }
            _ => true,
        }
    }

    pub fn has_positive_jumps(&self) -> bool {
        match self {
            JumpLaw::Kou { p_up, .. } => *p_up > T::zero(),
            JumpLaw::Gaussian { .. } => true,
            JumpLaw::Uniform { hi, .. } => *hi > T::zero(),
            JumpLaw::Discrete { atoms } => atoms.iter().any(|(v, _)| *v > T::zero()),
        }
    }

    pub fn has_negative_jumps(&self) -> bool {
        match self {
            JumpLaw::Kou { p_up, .. } => *p_up < T::one(),
            JumpLaw::Gaussian { .. } => true,
            JumpLaw::Uniform { lo, .. } => *lo < T::zero(),
            JumpLaw::Discrete { atoms } => atoms.iter().any(|(v, _)| *v < T::zero()),
        }
    }

    /// Law of `-J` equals law of `J`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => *p_up == T::lit(0.5) && eta_up == eta_down,
            JumpLaw::Gaussian { mean, .. } => *mean == T::zero(),
            JumpLaw::Uniform { lo, hi } => *lo == -*hi,
            JumpLaw::Discrete { atoms } => atoms
                .iter()
                .all(|&(v, p)| atoms.iter().any(|&(w, r)| w == -v && r == p)),
        }
    }

    /// `P(|J| <= z)`.
    pub fn abs_cdf(&self, z: T) -> T {
        if z < T::zero() {
            return T::zero();
        }
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                *p_up * (T::one() - (-*eta_up * z).exp()) + (T::one() - *p_up) * (T::one() - (-*eta_down * z).exp())
            }
            JumpLaw::Gaussian { mean, std } => {
                let (m, s, zz) = (mean.as_f64(), std.as_f64(), z.as_f64());
                T::lit(normal_cdf((zz - m) / s) - normal_cdf((-zz - m) / s))
            }
            JumpLaw::Uniform { lo, hi } => {
                let a = lo.max(-z);
                let c = hi.min(z);
                if a < c {
                    (c - a) / (*hi - *lo)
                } else {
                    T::zero()
                }
            }
            JumpLaw::Discrete { atoms } => atoms.iter().filter(|(v, _)| v.abs() <= z).map(|&(_, p)| p).sum(),
        }
    }

    /// Smallest `z` with `P(|J| <= z) >= p`, located by bisection.
    pub fn abs_quantile(&self, p: T) -> T {
        let mut hi = T::one();
        while self.abs_cdf(hi) < p {
            hi = hi * T::lit(2.0);
            if hi > T::lit(1e12) {
                return hi;
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.abs_cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= T::epsilon() * (T::one() + hi) {
                break;
            }
        }
        hi
    }

    /// Quadrature rule `(z, w)` with `Σ w g(z) ≈ E[g(J)]`. Panels are aligned on
    /// `align + k * panel` so piecewise-linear integrands with kinks on that lattice
    /// are integrated without panel-crossing error. Returns the rule and the jump
    /// probability mass left outside it.
    pub fn quadrature(&self, panel: T, align: T, tail: T) -> (Vec<(T, T)>, T) {
        match self {
            JumpLaw::Kou { p_up, eta_up, eta_down } => {
                let mut rule = Vec::new();
                let mut covered = T::zero();
                if *p_up > T::zero() {
                    let hi = -(tail).ln() / *eta_up;
                    let dens = |z: T| *p_up * *eta_up * (-*eta_up * z).exp();
                    rule.extend(composite_rule(T::zero(), hi, panel, align, &[], dens));
                    covered = covered + *p_up * (T::one() - (-*eta_up * hi).exp());
                }
                let q_down = T::one() - *p_up;
                if q_down > T::zero() {
                    let lo = (tail).ln() / *eta_down;
                    let dens = |z: T| q_down * *eta_down * (*eta_down * z).exp();
                    rule.extend(composite_rule(lo, T::zero(), panel, align, &[], dens));
                    covered = covered + q_down * (T::one() - (*eta_down * lo).exp());
                }
                (rule, (T::one() - covered).max(T::zero()))
            }
            JumpLaw::Gaussian { mean, std } => {
                let width = T::lit(8.0) * *std;
                let (m, s) = (*mean, *std);
                let dens = move |z: T| {
                    let u = (z - m) / s;
                    (-u * u / T::lit(2.0)).exp() / (s * (T::lit(2.0) * T::PI()).sqrt())
                };
                let rule = composite_rule(m - width, m + width, panel, align, &[], dens);
                (rule, T::lit(1.3e-15))
            }
            JumpLaw::Uniform { lo, hi } => {
                let h = T::one() / (*hi - *lo);
                (composite_rule(*lo, *hi, panel, align, &[], |_| h), T::zero())
            }
            JumpLaw::Discrete { atoms } => (atoms.clone(), T::zero()),
        }
    }
}

/// Compound Poisson jump component: `rate` jumps per unit time with sizes from `law`.
/// `rate == 0` encodes "no jumps".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpSpec<T> {
    rate: T,
    law: Option<JumpLaw<T>>,
}

impl<T: Real> JumpSpec<T> {
    pub fn none() -> Self {
        Self { rate: T::zero(), law: None }
    }

    pub fn new(rate: T, law: JumpLaw<T>) -> Result<Self> {
        if !rate.is_finite() || rate < T::zero() {
            return Err(Error::InvalidModel("jump rate must be finite and nonnegative".into()));
        }
        law.validate()?;
        if rate == T::zero() {
            return Ok(Self::none());
        }
        Ok(Self { rate, law: Some(law) })
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn law(&self) -> Option<&JumpLaw<T>> {
        self.law.as_ref()
    }

    pub fn is_active(&self) -> bool {
        self.rate > T::zero()
    }

    pub fn exp_moment_finite(&self, theta: T) -> bool {
        self.law.as_ref().is_none_or(|l| l.exp_moment_finite(theta))
    }
}

/// Path-property flags of a Lévy model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PathClass {
    pub bounded_variation: bool,
    pub spectrally_negative: bool,
    pub spectrally_positive: bool,
    pub driftless_compound_poisson: bool,
    pub negative_of_subordinator: bool,
}

/// Lévy triplet `(γ, σ, Π)` with finite-activity `Π`, plus the declared
/// exponential-moment parameter `θ̄`.
///
/// The linear drift used for simulation is resolved once at construction:
/// `d = γ - ∫_{|z|<1} z Π(dz)`, so that `X_t = d t + σ B_t + Σ jumps`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevyTriplet<T> {
    gamma: T,
    sigma: T,
    jumps: JumpSpec<T>,
    theta_bar: T,
    drift: T,
}

impl<T: Real> LevyTriplet<T> {
    pub fn new(gamma: T, sigma: T, jumps: JumpSpec<T>, theta_bar: T) -> Result<Self> {
        if !gamma.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidModel("gamma and sigma must be finite".into()));
        }
        if sigma < T::zero() {
            return Err(Error::InvalidModel("sigma must be nonnegative".into()));
        }
        if !(theta_bar > T::zero()) || !theta_bar.is_finite() {
            return Err(Error::InvalidModel("theta_bar must be positive".into()));
        }
        let compensator = jumps.law().map_or(T::zero(), |l| jumps.rate() * l.truncated_mean());
        let drift = gamma - compensator;
        if sigma == T::zero() && !jumps.is_active() && drift == T::zero() {
            return Err(Error::InvalidModel("zero process: no drift, no Gaussian part and no jumps".into()));
        }
        Ok(Self { gamma, sigma, jumps, theta_bar, drift })
    }

    /// Brownian motion with drift `gamma` and no jumps.
    pub fn brownian(gamma: T, sigma: T) -> Result<Self> {
        Self::new(gamma, sigma, JumpSpec::none(), T::one())
    }

    /// Deterministic drift `t ↦ x + d t`.
    pub fn pure_drift(d: T) -> Result<Self> {
        Self::new(d, T::zero(), JumpSpec::none(), T::one())
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn jumps(&self) -> &JumpSpec<T> {
        &self.jumps
    }

    pub fn theta_bar(&self) -> T {
        self.theta_bar
    }

    /// Effective linear drift `d`.
    pub fn drift(&self) -> T {
        self.drift
    }

    /// No randomness at all: every path is `x + d t`.
    pub fn is_deterministic(&self) -> bool {
        self.sigma == T::zero() && !self.jumps.is_active()
    }

    /// The model of `X_t + eps t`.
    pub fn with_added_drift(&self, eps: T) -> Result<Self> {
        Self::new(self.gamma + eps, self.sigma, self.jumps.clone(), self.theta_bar)
    }

    /// `Ψ(λ)` with `E[exp(iλX_t)] = exp(-tΨ(λ))`.
    pub fn characteristic_exponent(&self, lambda: T) -> Complex<T> {
        let half = T::lit(0.5);
        let mut psi = Complex::new(half * self.sigma * self.sigma * lambda * lambda, -self.gamma * lambda);
        if let Some(law) = self.jumps.law() {
            let one = Complex::new(T::one(), T::zero());
            let comp = Complex::new(T::zero(), lambda * law.truncated_mean());
            psi = psi + (one - law.char_fn(lambda) + comp) * self.jumps.rate();
        }
        psi
    }

    pub fn classify(&self) -> PathClass {
        let bv = self.sigma == T::zero();
        let (pos, neg) = self
            .jumps
            .law()
            .map_or((false, false), |l| (l.has_positive_jumps(), l.has_negative_jumps()));
        PathClass {
            bounded_variation: bv,
            spectrally_negative: !pos,
            spectrally_positive: !neg,
            driftless_compound_poisson: bv && self.drift == T::zero() && self.jumps.is_active(),
            negative_of_subordinator: bv && self.drift <= T::zero() && !pos,
        }
    }

    /// Whether the declared `θ̄` admits `∫ e^{θ̄|z|} Π(dz) < ∞`.
    pub fn exp_moment_check(&self) -> bool {
        self.jumps.exp_moment_finite(self.theta_bar)
    }

    /// Jump-integral part of Ψ by direct quadrature of
    /// `∫ (1 - e^{iλz} + iλz 1{|z|<1}) Π(dz)`; independent of the closed forms above.
    pub fn jump_exponent_by_quadrature(&self, lambda: T) -> Complex<T> {
        let Some(law) = self.jumps.law() else {
            return Complex::new(T::zero(), T::zero());
        };
        let integrand_re = |z: T| T::one() - (lambda * z).cos();
        let integrand_im = |z: T| {
            let trunc = if z.abs() < T::one() { lambda * z } else { T::zero() };
            -(lambda * z).sin() + trunc
        };
        let tol = T::lit(1e-11);
        let (re, im) = match law {
            JumpLaw::Discrete { atoms } => atoms.iter().fold((T::zero(), T::zero()), |(r, i), &(v, p)| {
                (r + p * integrand_re(v), i + p * integrand_im(v))
            }),
            _ => {
                let dens = |z: T| law_density(law, z);
                let (lo, hi) = law_support(law);
                let mut re = T::zero();
                let mut im = T::zero();
                let mut cuts = vec![lo, -T::one(), T::zero(), T::one(), hi];
                cuts.retain(|&c| c >= lo && c <= hi);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                for w in cuts.windows(2) {
                    re = re + adaptive_simpson(&|z| integrand_re(z) * dens(z), w[0], w[1], tol);
                    im = im + adaptive_simpson(&|z| integrand_im(z) * dens(z), w[0], w[1], tol);
                }
                (re, im)
            }
        };
        Complex::new(re, im) * self.jumps.rate()
    }
}

fn law_density<T: Real>(law: &JumpLaw<T>, z: T) -> T {
    match law {
        JumpLaw::Kou { p_up, eta_up, eta_down } => {
            if z >= T::zero() {
                *p_up * *eta_up * (-*eta_up * z).exp()
            } else {
                (T::one() - *p_up) * *eta_down * (*eta_down * z).exp()
            }
        }
        JumpLaw::Gaussian { mean, std } => {
            let u = (z - *mean) / *std;
            (-u * u / T::lit(2.0)).exp() / (*std * (T::lit(2.0) * T::PI()).sqrt())
        }
        JumpLaw::Uniform { lo, hi } => {
            if z >= *lo && z <= *hi {
                T::one() / (*hi - *lo)
            } else {
                T::zero()
            }
        }
        JumpLaw::Discrete { .. } => T::zero(),
    }
}

fn law_support<T: Real>(law: &JumpLaw<T>) -> (T, T) {
    match law {
        JumpLaw::Kou { eta_up, eta_down, .. } => (-T::lit(40.0) / *eta_down, T::lit(40.0) / *eta_up),
        JumpLaw::Gaussian { mean, std } => (*mean - T::lit(12.0) * *std, *mean + T::lit(12.0) * *std),
        JumpLaw::Uniform { lo, hi } => (*lo, *hi),
        JumpLaw::Discrete { .. } => (T::zero(), T::zero()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kou(p: f64, up: f64, down: f64) -> JumpLaw<f64> {
        JumpLaw::Kou { p_up: p, eta_up: up, eta_down: down }
    }

    #[test]
    fn exponent_of_pure_gaussian_and_pure_drift() {
        let bm = LevyTriplet::brownian(0.0, 1.0).unwrap();
        let psi = bm.characteristic_exponent(2.0);
        assert_eq!(psi, Complex::new(2.0, 0.0));
        let drift = LevyTriplet::pure_drift(1.0).unwrap();
        let psi = drift.characteristic_exponent(3.0);
        assert_eq!(psi, Complex::new(0.0, -3.0));
    }

    #[test]
    fn kou_exponent_matches_quadrature_oracle() {
        let m = LevyTriplet::new(0.0, 0.0, JumpSpec::new(1.0, kou(0.5, 2.0, 2.0)).unwrap(), 1.0).unwrap();
        let closed = m.characteristic_exponent(1.0);
        let quad = m.jump_exponent_by_quadrature(1.0);
        // Symmetric Kou: E[cos(λJ)] = η²/(η²+λ²) = 0.8, imaginary part cancels.
        assert_relative_eq!(closed.re, 0.2, epsilon = 1e-14);
        assert!(closed.im.abs() < 1e-14);
        assert_relative_eq!(closed.re, quad.re, epsilon = 1e-9);
        assert_relative_eq!(closed.im, quad.im, epsilon = 1e-9);
    }

    #[test]
    fn asymmetric_laws_match_quadrature() {
        let laws = vec![
            kou(0.3, 3.0, 1.5),
            JumpLaw::Gaussian { mean: -0.4, std: 0.7 },
            JumpLaw::Uniform { lo: -0.5, hi: 2.0 },
            JumpLaw::Discrete { atoms: vec![(-1.5, 0.25), (0.5, 0.75)] },
        ];
        for law in laws {
            let m = LevyTriplet::new(0.3, 0.2, JumpSpec::new(2.0, law.clone()).unwrap(), 1.0).unwrap();
            for lambda in [0.5, 1.0, 2.5] {
                let full = m.characteristic_exponent(lambda);
                let gauss = Complex::new(0.5 * 0.04 * lambda * lambda, -0.3 * lambda);
                let quad = gauss + m.jump_exponent_by_quadrature(lambda);
                assert!((full - quad).norm() < 1e-8, "{law:?} λ={lambda}: {full} vs {quad}");
            }
        }
    }

    #[test]
    fn classification_flags() {
        let law = kou(0.5, 2.0, 2.0);
        let diff = LevyTriplet::new(0.0, 1.0, JumpSpec::new(1.0, law).unwrap(), 1.0).unwrap();
        assert!(!diff.classify().bounded_variation);

        let cp = LevyTriplet::new(
            0.0,
            0.0,
            JumpSpec::new(1.0, JumpLaw::Discrete { atoms: vec![(-1.0, 0.5), (1.0, 0.5)] }).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(cp.classify().driftless_compound_poisson);
        assert!(!cp.classify().negative_of_subordinator);

        let neg = LevyTriplet::new(-1.0, 0.0, JumpSpec::new(1.0, kou(0.0, 1.0, 2.0)).unwrap(), 1.0).unwrap();
        let c = neg.classify();
        assert!(c.negative_of_subordinator && c.spectrally_negative && !c.spectrally_positive);
    }

    #[test]
    fn compensated_drift_is_resolved_once() {
        let law = JumpLaw::Uniform { lo: 0.0, hi: 2.0 };
        // E[J 1{|J|<1}] = ∫_0^1 z/2 dz = 1/4
        let m = LevyTriplet::new(1.0, 0.0, JumpSpec::new(2.0, law).unwrap(), 1.0).unwrap();
        assert_relative_eq!(m.drift(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exponential_moment_checks() {
        let gauss = JumpSpec::new(1.0, JumpLaw::Gaussian { mean: 0.0, std: 1.0 }).unwrap();
        assert!(LevyTriplet::new(0.0, 1.0, gauss, 1.0).unwrap().exp_moment_check());
        let k = JumpSpec::new(1.0, kou(0.5, 2.0, 4.0)).unwrap();
        assert!(!LevyTriplet::new(0.0, 1.0, k, 3.0).unwrap().exp_moment_check());
        let atoms = JumpSpec::new(1.0, JumpLaw::Discrete { atoms: vec![(-1.0, 0.5), (2.0, 0.5)] }).unwrap();
        assert!(LevyTriplet::new(0.0, 1.0, atoms, 10.0).unwrap().exp_moment_check());
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(LevyTriplet::<f64>::new(0.0, 0.0, JumpSpec::none(), 1.0).is_err());
        assert!(LevyTriplet::<f64>::new(0.0, -1.0, JumpSpec::none(), 1.0).is_err());
        assert!(JumpSpec::new(1.0, JumpLaw::Discrete { atoms: vec![(0.0, 1.0)] }).is_err());
        assert!(JumpSpec::new(1.0, JumpLaw::Discrete { atoms: vec![(1.0, 0.4)] }).is_err());
        assert!(JumpSpec::new(1.0, kou(1.2, 1.0, 1.0)).is_err());
        assert!(JumpSpec::new(1.0, JumpLaw::Uniform { lo: 1.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn quadrature_rules_integrate_moments() {
        for law in [kou(0.3, 3.0, 2.0), JumpLaw::Gaussian { mean: 0.2, std: 0.5 }, JumpLaw::Uniform { lo: -1.0, hi: 0.5 }] {
            let (rule, tail) = law.quadrature(0.1, 0.03, 1e-12);
            let mass: f64 = rule.iter().map(|p| p.1).sum();
            assert!((mass + tail - 1.0).abs() < 1e-9, "{law:?}");
            let m1: f64 = rule.iter().map(|&(z, w)| w * z).sum();
            let exact = (law.laplace(1e-5).unwrap() - law.laplace(-1e-5).unwrap()) / 2e-5;
            assert!((m1 - exact).abs() < 1e-5, "{law:?}: {m1} vs {exact}");
        }
    }

    #[test]
    fn abs_quantile_inverts_cdf() {
        let law = kou(0.4, 3.0, 1.0);
        let z = law.abs_quantile(0.999);
        assert!((law.abs_cdf(z) - 0.999).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn exponent_vanishes_at_zero_and_is_hermitian(
            gamma in -2.0f64..2.0, sigma in 0.0f64..2.0, rate in 0.0f64..3.0,
            p in 0.0f64..1.0, up in 0.5f64..5.0, down in 0.5f64..5.0, lambda in -5.0f64..5.0,
        ) {
            let jumps = JumpSpec::new(rate, kou(p, up, down)).unwrap();
            if let Ok(m) = LevyTriplet::new(gamma, sigma, jumps, 0.25) {
                prop_assert!(m.characteristic_exponent(0.0).norm() < 1e-15);
                let a = m.characteristic_exponent(lambda);
                let b = m.characteristic_exponent(-lambda);
                prop_assert!((a - b.conj()).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }
}
