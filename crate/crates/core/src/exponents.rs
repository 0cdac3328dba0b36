//! The explicit constant chain behind the interior Holder estimate.
//!
//! From the declared bounds `(M, delta)` and the conjugate exponent `p`
//! the chain produces, in order: the Legendre transform weight for the
//! running cost, the energy bound `K` on `int |x'|^p` along optimal arcs,
//! the averaged-energy constants `(A, B)` with
//! `avg_h |x'|^p <= A (avg_h |x'|)^p + B`, the reverse-Holder root
//! `gamma` of `phi(s) = s^p - A(1 - p + p s)` with its integrability
//! exponent `theta = 1/(1-gamma) > p`, and finally the interior space and
//! time Holder exponents `(theta-p)/(theta-1)` and `(theta-p)/theta`.
//! [`space_bound`] and the admissibility predicates turn the chain into
//! checkable two-point bounds on solved grids.

use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::Serialize;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::coeffs::ProblemSpec;
use crate::util::bracketed_newton;

/// Clamp floor applied to the averaged-energy constant `A` so that the
/// reverse-Holder root problem is well posed (`A > 1`).
pub const A_FLOOR: f64 = 1.01;

/// Residual target for the reverse-Holder root.
pub const GAMMA_FTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ExponentError {
    Range(String),
    /// The root bracket did not change sign.
    Bracket(String),
    /// A two-point bound was requested outside its admissible range.
    Admissibility(String),
}

impl fmt::Display for ExponentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentError::Range(m) => write!(f, "range error: {m}"),
            ExponentError::Bracket(m) => write!(f, "bracket error: {m}"),
            ExponentError::Admissibility(m) => write!(f, "admissibility error: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ExponentError {}

/// Conjugate exponent `p = q/(q-1)`; requires `q > 1`.
pub fn conjugate(q: f64) -> Result<f64, ExponentError> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(ExponentError::Range(format!(
            "conjugate exponent needs q > 1, got {q}"
        )));
    }
    Ok(q / (q - 1.0))
}

/// Legendre constant `c_p = (p^(-1/(p-1)) - p^(-p/(p-1)))^(p-1)`, so that
/// the conjugate of `b |xi|^q` is `(1/b)^(p-1) c_p |v|^p`.
pub fn legendre_constant(p: f64) -> Result<f64, ExponentError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(ExponentError::Range(format!(
            "legendre constant needs p > 1, got {p}"
        )));
    }
    let e = 1.0 / (p - 1.0);
    Ok((p.powf(-e) - p.powf(-p * e)).powf(p - 1.0))
}

/// Running-cost weight `a = (1/b)^(p-1) c_p`; requires `b > 0`.
pub fn transform_a(b: f64, p: f64) -> Result<f64, ExponentError> {
    if !(b > 0.0) {
        return Err(ExponentError::Range(format!(
            "transform needs b > 0, got {b}"
        )));
    }
    Ok((1.0 / b).powf(p - 1.0) * legendre_constant(p)?)
}

/// Energy bound `K = 2^(p-1) (M^(p+1) T + 2 M) / delta + M^p T` on
/// `int |x'|^p` along optimal arcs.
pub fn const_k(m: f64, delta: f64, p: f64, t: f64) -> Result<f64, ExponentError> {
    check_positive_pair(m, delta, p)?;
    if !(t > 0.0) {
        return Err(ExponentError::Range(format!("need T > 0, got {t}")));
    }
    Ok(2.0f64.powf(p - 1.0) * (m.powf(p + 1.0) * t + 2.0 * m) / delta + m.powf(p) * t)
}

/// Averaged-energy constants: `A = max(4^(p-1) M / delta, 1.01)` and
/// `B = M^p (1 + A)`.
pub fn consts_ab(m: f64, delta: f64, p: f64) -> Result<(f64, f64), ExponentError> {
    check_positive_pair(m, delta, p)?;
    let a = (4.0f64.powf(p - 1.0) * m / delta).max(A_FLOOR);
    let b = m.powf(p) * (1.0 + a);
    Ok((a, b))
}

fn check_positive_pair(m: f64, delta: f64, p: f64) -> Result<(), ExponentError> {
    if !(m > 0.0) || !(delta > 0.0) {
        return Err(ExponentError::Range(format!(
            "need M > 0 and delta > 0, got M={m} delta={delta}"
        )));
    }
    if !(p > 1.0) {
        return Err(ExponentError::Range(format!("need p > 1, got {p}")));
    }
    Ok(())
}

/// Root of the reverse-Holder polynomial together with the derived
/// integrability exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaTheta {
    pub gamma: f64,
    pub theta: f64,
    /// `|phi(gamma)|` after refinement.
    pub residual: f64,
}

/// Smallest root of `phi(s) = s^p - A(1 - p + p s)` on the bracket
/// `(1 - 1/p, A^(1/(p-1)))`, refined until `|phi| <= 1e-12`. For `A > 1`
/// the bracket always changes sign and the contained root gives
/// `theta = 1/(1-gamma) > p`.
pub fn solve_gamma(a_const: f64, p: f64) -> Result<GammaTheta, ExponentError> {
    if !(a_const > 1.0) {
        return Err(ExponentError::Range(format!(
            "reverse-Holder constant must exceed 1, got {a_const}"
        )));
    }
    if !(p > 1.0) {
        return Err(ExponentError::Range(format!("need p > 1, got {p}")));
    }
    let phi = |s: f64| s.powf(p) - a_const * (1.0 - p + p * s);
    let dphi = |s: f64| p * s.powf(p - 1.0) - a_const * p;
    let lo = 1.0 - 1.0 / p;
    let hi = a_const.powf(1.0 / (p - 1.0));
    if !(phi(lo) > 0.0) || !(phi(hi) < 0.0) {
        return Err(ExponentError::Bracket(format!(
            "phi does not change sign on ({lo}, {hi})"
        )));
    }
    let gamma = bracketed_newton(phi, dphi, lo, hi, GAMMA_FTOL)
        .ok_or_else(|| ExponentError::Bracket("root refinement failed".into()))?;
    Ok(GammaTheta {
        gamma,
        theta: 1.0 / (1.0 - gamma),
        residual: phi(gamma).abs(),
    })
}

/// The full constant chain for one problem.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentReport {
    pub q: f64,
    pub p: f64,
    pub m_declared: f64,
    pub delta_declared: f64,
    pub t_final: f64,
    /// Sampled range of the running-cost weight `a` (equal to the declared
    /// constants when the report is built without coefficients).
    pub a_inf: f64,
    pub a_sup: f64,
    /// `max(M, sup a)`: every upper bound in the chain uses this.
    pub m_eff: f64,
    /// `min(delta, inf a)`: every lower bound in the chain uses this.
    pub delta_eff: f64,
    pub k_energy: f64,
    pub a_avg: f64,
    pub b_avg: f64,
    pub gamma: f64,
    pub theta: f64,
    pub gamma_residual: f64,
    pub ex_space: f64,
    pub ex_time: f64,
    /// Box enlargement `K^(1/p) T^(1/q)` that contains optimal arcs
    /// started in the core box.
    pub margin_required: f64,
}

impl ExponentReport {
    /// Builds the chain from bare constants (no coefficient sampling), so
    /// `M_eff = M` and `delta_eff = delta`.
    pub fn from_constants(m: f64, delta: f64, q: f64, t: f64) -> Result<Self, ExponentError> {
        let p = conjugate(q)?;
        if delta > m {
            return Err(ExponentError::Range(format!(
                "need delta <= M, got delta={delta} M={m}"
            )));
        }
        Self::assemble(q, p, m, delta, t, m, delta, f64::NAN, f64::NAN)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        q: f64,
        p: f64,
        m_declared: f64,
        delta_declared: f64,
        t: f64,
        m_eff: f64,
        delta_eff: f64,
        a_inf: f64,
        a_sup: f64,
    ) -> Result<Self, ExponentError> {
        let k_energy = const_k(m_eff, delta_eff, p, t)?;
        let (a_avg, b_avg) = consts_ab(m_eff, delta_eff, p)?;
        let gt = solve_gamma(a_avg, p)?;
        let theta = gt.theta;
        Ok(ExponentReport {
            q,
            p,
            m_declared,
            delta_declared,
            t_final: t,
            a_inf,
            a_sup,
            m_eff,
            delta_eff,
            k_energy,
            a_avg,
            b_avg,
            gamma: gt.gamma,
            theta,
            gamma_residual: gt.residual,
            ex_space: (theta - p) / (theta - 1.0),
            ex_time: (theta - p) / theta,
            margin_required: k_energy.powf(1.0 / p) * t.powf(1.0 / q),
        })
    }
}

/// Samples the running-cost weight `a = transform_a(b(x,t), p)` on the
/// core box (`samples` points per axis and in time) and returns
/// `(a_inf, a_sup)`. Errors if `b` is nonpositive or fails to evaluate
/// anywhere on the sample grid.
pub fn sample_transform(
    spec: &ProblemSpec,
    samples: usize,
) -> Result<(f64, f64), ExponentError> {
    let mut a_inf = f64::INFINITY;
    let mut a_sup = f64::NEG_INFINITY;
    let mut failure: Option<String> = None;
    crate::coeffs::for_each_sample(spec, samples, |x, t| {
        if failure.is_some() {
            return;
        }
        match spec.b_at(x, t) {
            Ok(b) if b > 0.0 => {
                // transform_a with the checks hoisted out of the loop
                let a = (1.0 / b).powf(spec.p - 1.0);
                a_inf = a_inf.min(a);
                a_sup = a_sup.max(a);
            }
            Ok(b) => failure = Some(format!("b = {b} nonpositive at x={x:?} t={t}")),
            Err(e) => failure = Some(format!("b failed at x={x:?} t={t}: {e}")),
        }
    });
    if let Some(msg) = failure {
        return Err(ExponentError::Range(msg));
    }
    let cp = legendre_constant(spec.p)?;
    Ok((a_inf * cp, a_sup * cp))
}

/// Builds the constant chain for a parsed problem: samples the transform
/// weight (64 points per axis), widens the declared bounds to
/// `M_eff = max(M, sup a)` and `delta_eff = min(delta, inf a)`, and runs
/// [`ExponentReport::from_constants`]'s chain on the effective pair.
pub fn build_report(spec: &ProblemSpec) -> Result<ExponentReport, ExponentError> {
    build_report_sampled(spec, 64)
}

/// [`build_report`] with an explicit sample density.
pub fn build_report_sampled(
    spec: &ProblemSpec,
    samples: usize,
) -> Result<ExponentReport, ExponentError> {
    let (a_inf, a_sup) = sample_transform(spec, samples)?;
    let m_eff = spec.m_bound.max(a_sup);
    let delta_eff = spec.delta.min(a_inf);
    ExponentReport::assemble(
        spec.q,
        spec.p,
        spec.m_bound,
        spec.delta,
        spec.t_final,
        m_eff,
        delta_eff,
        a_inf,
        a_sup,
    )
}

/// Largest spatial separation the two-point space bound covers at time
/// `t0`: `C (1 - p/theta)/(p - 1) (T - t0)^(1 - 1/p)`, capped at 1.
pub fn admissible_dx(
    report: &ExponentReport,
    c: f64,
    t_remaining: f64,
) -> Result<f64, ExponentError> {
    check_chain_args(c, t_remaining)?;
    let p = report.p;
    let cap = c * (1.0 - p / report.theta) / (p - 1.0) * t_remaining.powf(1.0 - 1.0 / p);
    Ok(cap.min(1.0))
}

/// Two-point bound at equal times: for admissible `dx = |x1 - x0|`
/// returns `(h, bound)` where `h` is the comparison window
/// `((1/C0) (p-1)/(1 - p/theta) dx)^(theta/(theta-1))`,
/// `C0 = C (T - t0)^(1/theta - 1/p)`, and
/// `bound = M_eff 2^(p-1) (M_eff^p h + h^(1-p) (C0 h^(1-1/theta) + dx)^p)`
/// dominates `u(x1, t0) - u(x0, t0)`. Admissibility of `dx` guarantees
/// `h <= T - t0`.
pub fn space_bound(
    report: &ExponentReport,
    c: f64,
    t_remaining: f64,
    dx: f64,
) -> Result<(f64, f64), ExponentError> {
    check_chain_args(c, t_remaining)?;
    if dx < 0.0 {
        return Err(ExponentError::Range(format!("need dx >= 0, got {dx}")));
    }
    if dx == 0.0 {
        return Ok((0.0, 0.0));
    }
    let cap = admissible_dx(report, c, t_remaining)?;
    if dx > cap {
        return Err(ExponentError::Admissibility(format!(
            "dx = {dx} exceeds the admissible cap {cap} at T - t0 = {t_remaining}"
        )));
    }
    let p = report.p;
    let theta = report.theta;
    let m = report.m_eff;
    let c0 = c * t_remaining.powf(1.0 / theta - 1.0 / p);
    let h = ((p - 1.0) / (1.0 - p / theta) * dx / c0).powf(theta / (theta - 1.0));
    let reach = c0 * h.powf(1.0 - 1.0 / theta) + dx;
    let bound = m * 2.0f64.powf(p - 1.0) * (m.powf(p) * h + h.powf(1.0 - p) * reach.powf(p));
    Ok((h, bound))
}

/// Time-step admissibility: the Morrey displacement accrued over
/// `dt = t1 - t0`, namely `C (T - t0)^(1/theta - 1/p) dt^(1 - 1/theta)`,
/// must itself be admissible for the space bound taken at time `t1`.
/// Returns `(displacement, ok)`.
pub fn admissible_dt(
    report: &ExponentReport,
    c: f64,
    t_remaining_t0: f64,
    t_remaining_t1: f64,
    dt: f64,
) -> Result<(f64, bool), ExponentError> {
    check_chain_args(c, t_remaining_t0)?;
    check_chain_args(c, t_remaining_t1)?;
    if !(dt > 0.0) {
        return Err(ExponentError::Range(format!("need dt > 0, got {dt}")));
    }
    let theta = report.theta;
    let disp = c * t_remaining_t0.powf(1.0 / theta - 1.0 / report.p)
        * dt.powf(1.0 - 1.0 / theta);
    let cap = admissible_dx(report, c, t_remaining_t1)?;
    Ok((disp, disp <= cap))
}

fn check_chain_args(c: f64, t_remaining: f64) -> Result<(), ExponentError> {
    if !(c > 0.0) {
        return Err(ExponentError::Range(format!(
            "Morrey constant must be positive, got {c}"
        )));
    }
    if !(t_remaining > 0.0) {
        return Err(ExponentError::Range(format!(
            "need remaining time > 0, got {t_remaining}"
        )));
    }
    Ok(())
}
