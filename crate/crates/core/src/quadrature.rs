//! Small quadrature toolkit: composite Gauss-Legendre panels and adaptive Simpson.

use crate::scalar::Real;

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Nodes and weights of a 4-point Gauss-Legendre rule on `[lo, hi]`.
pub fn gauss_legendre_4<T: Real>(lo: T, hi: T) -> impl Iterator<Item = (T, T)> {
    let half = (hi - lo) / T::lit(2.0);
    let mid = (hi + lo) / T::lit(2.0);
    GL4_NODES
        .iter()
        .zip(GL4_WEIGHTS.iter())
        .map(move |(&z, &w)| (mid + half * T::lit(z), half * T::lit(w)))
}

/// Panel breakpoints on `[lo, hi]`: the endpoints, every `align + k * panel`
/// strictly inside, and any extra cut points inside the interval.
pub fn panel_breaks<T: Real>(lo: T, hi: T, panel: T, align: T, cuts: &[T]) -> Vec<T> {
    let mut pts = vec![lo, hi];
    let k0 = ((lo - align) / panel).floor();
    let mut k = k0;
    loop {
        let p = align + k * panel;
        if p >= hi {
            break;
        }
        if p > lo {
            pts.push(p);
        }
        k = k + T::one();
    }
    pts.extend(cuts.iter().copied().filter(|&c| c > lo && c < hi));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * (T::one() + b.abs()));
    pts
}

/// Composite 4-point Gauss-Legendre rule for `∫ g(z) density(z) dz` over `[lo, hi]`.
/// Returns `(node, weight * density(node))` pairs.
pub fn composite_rule<T: Real>(
    lo: T,
    hi: T,
    panel: T,
    align: T,
    cuts: &[T],
    density: impl Fn(T) -> T,
) -> Vec<(T, T)> {
    let breaks = panel_breaks(lo, hi, panel, align, cuts);
    let mut out = Vec::with_capacity(4 * breaks.len());
    for w in breaks.windows(2) {
        for (z, wt) in gauss_legendre_4(w[0], w[1]) {
            out.push((z, wt * density(z)));
        }
    }
    out
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: &dyn Fn(T) -> T, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / six * (fa + T::lit(4.0) * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real>(
    f: &dyn Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / six * (fa + T::lit(4.0) * flm + fm);
    let right = (b - m) / six * (fm + T::lit(4.0) * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}
