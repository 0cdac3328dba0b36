//! Small numeric helpers shared across modules.

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// `|v|^p` with fast paths for the exponents that dominate solver inner
/// loops (p = 2, 3, 1.5).
#[inline]
pub fn pow_abs(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 1.5 {
        a * a.sqrt()
    } else {
        a.powf(p)
    }
}

/// Euclidean norm of a short coordinate slice.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    match v.len() {
        1 => v[0].abs(),
        2 => (v[0] * v[0] + v[1] * v[1]).sqrt(),
        _ => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
    }
}

/// Safeguarded root finder: bisection with Newton acceleration where the
/// Newton step stays inside the current bracket. `f` must change sign on
/// `[lo, hi]`. Returns the root once `|f| <= ftol` or the bracket shrinks
/// to machine width.
pub fn bracketed_newton<F, D>(f: F, df: D, lo: f64, hi: f64, ftol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= ftol {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = if d != 0.0 { x - fx / d } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= f64::EPSILON * (1.0 + x.abs()) {
            return Some(x);
        }
    }
    Some(x)
}

/// Golden-section minimization of `f` on `[lo, hi]` with a fixed iteration
/// budget; deterministic. Returns `(argmin, min)`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fmid = f(mid);
    if fmid <= fc && fmid <= fd {
        (mid, fmid)
    } else if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Ordinary least squares for `y = slope * x + intercept`.
/// Returns `(slope, intercept, r2)`; `r2 = 1` when the residuals vanish.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}
