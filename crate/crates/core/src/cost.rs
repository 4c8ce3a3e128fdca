//! Convex running costs, the control problem data `(f, C, q)` and the
//! double-averaging mollifier.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;

/// Built-in convex cost families.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinCost<T> {
    /// `f(x) = x²`
    Quadratic,
    /// `f(x) = |x|`
    Abs,
    /// Continuous piecewise-linear cost with `f(0) = 0`; `slopes.len() == kinks.len() + 1`.
    PiecewiseLinear { slopes: Vec<T>, kinks: Vec<T> },
    /// `f(x) = x⁴`
    Quartic,
}

/// Polynomial pieces (coefficients in ascending powers of `x`) separated by
/// increasing breakpoints. Piece `i` covers `[breaks[i-1], breaks[i])`.
#[derive(Clone, Debug, PartialEq)]
struct PiecewisePoly<T> {
    breaks: Vec<T>,
    pieces: Vec<Vec<T>>,
}

fn horner<T: Real>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * x + a)
}

impl<T: Real> PiecewisePoly<T> {
    fn right_piece(&self, x: T) -> &[T] {
        &self.pieces[self.breaks.partition_point(|&k| k <= x)]
    }

    fn left_piece(&self, x: T) -> &[T] {
        &self.pieces[self.breaks.partition_point(|&k| k < x)]
    }

    fn eval(&self, x: T) -> T {
        horner(self.right_piece(x), x)
    }

    fn derivative(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|c| c.iter().enumerate().skip(1).map(|(k, &a)| a * T::count(k)).collect())
            .collect();
        Self { breaks: self.breaks.clone(), pieces }
    }

    /// Continuous antiderivative; the first piece has zero constant term.
    fn antiderivative(&self) -> Self {
        let mut pieces: Vec<Vec<T>> = Vec::with_capacity(self.pieces.len());
        for (i, c) in self.pieces.iter().enumerate() {
            let mut p = vec![T::zero()];
            p.extend(c.iter().enumerate().map(|(k, &a)| a / T::count(k + 1)));
            if i > 0 {
                let k = self.breaks[i - 1];
                p[0] = horner(&pieces[i - 1], k) - horner(&p, k);
            }
            pieces.push(p);
        }
        Self { breaks: self.breaks.clone(), pieces }
    }
}

/// User-supplied cost with its one-sided derivatives.
#[derive(Clone)]
pub struct CustomCost<T> {
    pub label: String,
    pub f: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub f_prime_plus: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub f_prime_minus: Arc<dyn Fn(T) -> T + Send + Sync>,
}

#[derive(Clone)]
enum Repr<T> {
    Poly {
        label: String,
        f: PiecewisePoly<T>,
        df: PiecewisePoly<T>,
        anti: PiecewisePoly<T>,
        anti2: PiecewisePoly<T>,
    },
    Custom(CustomCost<T>),
    Mollified {
        base: Box<CostSpec<T>>,
        eps: T,
        anchor: T,
        shift: T,
    },
}

/// Polynomial growth certificate `|f(x)| <= k1 + k2 |x|^degree`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Growth<T> {
    pub k1: T,
    pub k2: T,
    pub degree: u32,
}

/// Convex running cost `f` with one-sided derivatives.
#[derive(Clone)]
pub struct CostSpec<T> {
    repr: Repr<T>,
    growth: Growth<T>,
    limits: (T, T),
}

impl<T: Real> fmt::Debug for CostSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("label", &self.label())
            .field("growth", &self.growth)
            .field("limits", &self.limits)
            .finish()
    }
}

impl<T: Real> CostSpec<T> {
    pub fn builtin(kind: BuiltinCost<T>) -> Result<Self> {
        let (label, breaks, pieces, growth, limits) = match &kind {
            BuiltinCost::Quadratic => (
                "quadratic".to_string(),
                vec![],
                vec![vec![T::zero(), T::zero(), T::one()]],
                Growth { k1: T::zero(), k2: T::one(), degree: 2 },
                (T::neg_infinity(), T::infinity()),
            ),
            BuiltinCost::Quartic => (
                "quartic".to_string(),
                vec![],
                vec![vec![T::zero(), T::zero(), T::zero(), T::zero(), T::one()]],
                Growth { k1: T::zero(), k2: T::one(), degree: 4 },
                (T::neg_infinity(), T::infinity()),
            ),
            BuiltinCost::Abs => (
                "abs".to_string(),
                vec![T::zero()],
                vec![vec![T::zero(), -T::one()], vec![T::zero(), T::one()]],
                Growth { k1: T::zero(), k2: T::one(), degree: 1 },
                (-T::one(), T::one()),
            ),
            BuiltinCost::PiecewiseLinear { slopes, kinks } => {
                if slopes.len() != kinks.len() + 1 {
                    return Err(Error::InvalidConfig("piecewise_linear needs one more slope than kinks".into()));
                }
                if slopes.iter().chain(kinks.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig("piecewise_linear parameters must be finite".into()));
                }
                if kinks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidConfig("piecewise_linear kinks must be strictly increasing".into()));
                }
                if slopes.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::NonConvexSpec("piecewise_linear slopes must be nondecreasing".into()));
                }
                // f(0) = 0: integrate the slope from 0 outwards.
                let anchor = kinks.partition_point(|&k| k <= T::zero());
                let mut intercepts = vec![T::zero(); slopes.len()];
                for i in anchor + 1..slopes.len() {
                    let k = kinks[i - 1];
                    intercepts[i] = intercepts[i - 1] + (slopes[i - 1] - slopes[i]) * k;
                }
                for i in (0..anchor).rev() {
                    let k = kinks[i];
                    intercepts[i] = intercepts[i + 1] + (slopes[i + 1] - slopes[i]) * k;
                }
                let pieces = slopes.iter().zip(&intercepts).map(|(&s, &c)| vec![c, s]).collect();
                let k2 = slopes.iter().fold(T::zero(), |m, s| m.max(s.abs()));
                (
                    format!("piecewise_linear(slopes={slopes:?}, kinks={kinks:?})"),
                    kinks.clone(),
                    pieces,
                    Growth { k1: T::zero(), k2, degree: 1 },
                    (slopes[0], slopes[slopes.len() - 1]),
                )
            }
        };
        let f = PiecewisePoly { breaks, pieces };
        let df = f.derivative();
        let anti = f.antiderivative();
        let anti2 = anti.antiderivative();
        Ok(Self { repr: Repr::Poly { label, f, df, anti, anti2 }, growth, limits })
    }

    pub fn quadratic() -> Self {
        Self::builtin(BuiltinCost::Quadratic).expect("quadratic is valid")
    }

    pub fn abs() -> Self {
        Self::builtin(BuiltinCost::Abs).expect("abs is valid")
    }

    /// Wraps a user cost. Convexity and the growth bound are spot-checked on a grid.
    pub fn custom(cost: CustomCost<T>, growth: Growth<T>, limits: (T, T)) -> Result<Self> {
        let spec = Self { repr: Repr::Custom(cost), growth, limits };
        let grid: Vec<T> = (-40..=40).map(|i| T::lit(i as f64 * 0.25)).collect();
        spec.check_invariants(&grid)?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match &self.repr {
            Repr::Poly { label, .. } => label.clone(),
            Repr::Custom(c) => c.label.clone(),
            Repr::Mollified { base, eps, anchor, .. } => format!("mollified({}, eps={eps}, anchor={anchor})", base.label()),
        }
    }

    /// Whether this is the built-in `f(x) = x²`.
    pub fn is_quadratic(&self) -> bool {
        matches!(&self.repr, Repr::Poly { label, .. } if label == "quadratic")
    }

    pub fn growth(&self) -> Growth<T> {
        self.growth
    }

    /// `(f'_+(-∞), f'_+(+∞))` as extended reals.
    pub fn slope_limits(&self) -> (T, T) {
        self.limits
    }

    pub fn value(&self, x: T) -> T {
        match &self.repr {
            Repr::Poly { f, .. } => f.eval(x),
            Repr::Custom(c) => (c.f)(x),
            Repr::Mollified { base, eps, anchor, shift } => {
                *shift + (base.second_diff_of_double_integral(x, *eps) - base.second_diff_of_double_integral(*anchor, *eps)) / (*eps * *eps)
            }
        }
    }

    pub fn d_plus(&self, x: T) -> T {
        match &self.repr {
            Repr::Poly { df, .. } => horner(df.right_piece(x), x),
            Repr::Custom(c) => (c.f_prime_plus)(x),
            Repr::Mollified { base, eps, .. } => base.mollified_slope(x, *eps),
        }
    }

    /// Breakpoints where `f'_- < f'_+`. Custom costs report none.
    pub fn kinks(&self) -> Vec<T> {
        match &self.repr {
            Repr::Poly { f, .. } => f.breaks.iter().copied().filter(|&k| self.d_minus(k) < self.d_plus(k)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn d_minus(&self, x: T) -> T {
        match &self.repr {
            Repr::Poly { df, .. } => horner(df.left_piece(x), x),
            Repr::Custom(c) => (c.f_prime_minus)(x),
            Repr::Mollified { base, eps, .. } => base.mollified_slope(x, *eps),
        }
    }

    /// `∫_{x-ε}^{x} f - ∫_{x-2ε}^{x-ε} f`
    fn slope_numerator(&self, x: T, eps: T) -> T {
        match &self.repr {
            Repr::Poly { anti, .. } => {
                anti.eval(x) - T::lit(2.0) * anti.eval(x - eps) + anti.eval(x - T::lit(2.0) * eps)
            }
            _ => {
                let tol = T::lit(1e-12) * (T::one() + self.value(x).abs()) * eps;
                adaptive_simpson(&|z: T| self.value(x + z) - self.value(x + z - eps), -eps, T::zero(), tol)
            }
        }
    }

    fn mollified_slope(&self, x: T, eps: T) -> T {
        self.slope_numerator(x, eps) / (eps * eps)
    }

    /// Second difference of a second antiderivative of `f`, so that
    /// `f^{(ε)}(x) - f^{(ε)}(a) = [D(x) - D(a)] / ε²`.
    fn second_diff_of_double_integral(&self, x: T, eps: T) -> T {
        match &self.repr {
            Repr::Poly { anti2, .. } => {
                anti2.eval(x) - T::lit(2.0) * anti2.eval(x - eps) + anti2.eval(x - T::lit(2.0) * eps)
            }
            _ => {
                let tol = T::lit(1e-10) * eps * eps;
                let lo = x.min(T::zero());
                let hi = x.max(T::zero());
                let s = adaptive_simpson(&|y: T| self.slope_numerator(y, eps), lo, hi, tol);
                if x >= T::zero() { s } else { -s }
            }
        }
    }

    /// Mollified second derivative `[f(x) - 2f(x-ε) + f(x-2ε)] / ε²`; `None` unless mollified.
    pub fn second_derivative(&self, x: T) -> Option<T> {
        match &self.repr {
            Repr::Mollified { base, eps, .. } => Some(
                (base.value(x) - T::lit(2.0) * base.value(x - *eps) + base.value(x - T::lit(2.0) * *eps)) / (*eps * *eps),
            ),
            _ => None,
        }
    }

    /// Double-averaged cost with `f^{(ε)}(anchor) = f(anchor)`.
    pub fn mollify(&self, eps: T, anchor: T) -> Result<Self> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::InvalidConfig("mollifier epsilon must be positive".into()));
        }
        if !anchor.is_finite() {
            return Err(Error::InvalidConfig("mollifier anchor must be finite".into()));
        }
        let g = self.growth;
        let two = T::lit(2.0);
        let spread = two.powi(g.degree as i32 - 1).max(T::one());
        let k2 = g.k2 * (T::one() + spread);
        let k1 = two * g.k1 + g.k2 * spread * (two * eps).powi(g.degree as i32) + self.value(anchor).abs()
            + self.value(anchor - two * eps).abs();
        Ok(Self {
            repr: Repr::Mollified { base: Box::new(self.clone()), eps, anchor, shift: self.value(anchor) },
            growth: Growth { k1, k2, degree: g.degree },
            limits: self.limits,
        })
    }

    /// Spot-checks convexity, finite-difference consistency of `f'_+` and the
    /// growth bound on `grid`.
    pub fn check_invariants(&self, grid: &[T]) -> Result<()> {
        let h = T::lit(1e-6);
        let mut prev: Option<(T, T)> = None;
        for &x in grid {
            let (dm, dp) = (self.d_minus(x), self.d_plus(x));
            if !(dm <= dp) {
                return Err(Error::NonConvexSpec(format!("f'_-({x}) = {dm} exceeds f'_+({x}) = {dp}")));
            }
            if let Some((px, pdp)) = prev {
                if pdp > dm + T::lit(1e-9) * (T::one() + dm.abs()) {
                    return Err(Error::NonConvexSpec(format!("derivative decreases between {px} and {x}")));
                }
            }
            prev = Some((x, dp));
            let fx = self.value(x);
            let fd = (self.value(x + h) - fx) / h;
            let tol = T::lit(1e-6) * (T::one() + dp.abs()) + T::lit(4.0) * T::epsilon() * (T::one() + fx.abs()) / h;
            if fd < dp - tol || fd > self.d_plus(x + h) + tol {
                return Err(Error::NonConvexSpec(format!(
                    "finite difference {fd} at {x} inconsistent with one-sided derivatives"
                )));
            }
            let g = self.growth;
            let bound = g.k1 + g.k2 * x.abs().powi(g.degree as i32);
            if fx.abs() > bound * (T::one() + T::lit(1e-9)) + T::lit(1e-12) {
                return Err(Error::InvalidConfig(format!("|f({x})| = {} exceeds growth bound {bound}", fx.abs())));
            }
        }
        Ok(())
    }
}

/// Control problem data: running cost, unit control cost `C` and discount `q`.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub cost: CostSpec<T>,
    pub c: T,
    pub q: T,
}

impl<T: Real> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec").field("cost", &self.cost).field("c", &self.c).field("q", &self.q).finish()
    }
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(cost: CostSpec<T>, c: T, q: T) -> Result<Self> {
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::InvalidConfig("discount q must be positive".into()));
        }
        if !c.is_finite() {
            return Err(Error::InvalidConfig("control cost C must be finite".into()));
        }
        Ok(Self { cost, c, q })
    }

    /// `f'_+(-∞) < -Cq < f'_+(∞)`
    pub fn is_admissible(&self) -> bool {
        let (lo, hi) = self.cost.slope_limits();
        let target = -self.c * self.q;
        lo < target && target < hi
    }

    pub fn with_cost(&self, cost: CostSpec<T>) -> Self {
        Self { cost, c: self.c, q: self.q }
    }
}
