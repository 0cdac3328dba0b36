//! Problem definitions: expression-valued coefficients, the JSON problem
//! schema, and sampled certification of the declared bounds.
//!
//! A problem is the terminal-value equation `-u_t + b|Du|^q + f.Du = 0`,
//! `u(.,T) = g`, posed on a core box. The declared constants promise
//! `|b|, |f|, |g| <= M` and `b >= delta > 0` on the box for all times;
//! [`validate_bounds`] spot-checks those promises on a dense sample grid.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Deserialize;

use crate::expr::{EvalError, Expr};

/// Scalar or vector coefficient over `(x, t)`.
#[derive(Debug, Clone)]
pub enum CoefficientField {
    Scalar(Expr),
    Vector(Vec<Expr>),
}

impl CoefficientField {
    pub fn dim(&self) -> usize {
        match self {
            CoefficientField::Scalar(e) => e.dim(),
            CoefficientField::Vector(v) => v.len(),
        }
    }

    /// Evaluates a scalar field. Panics if called on a vector field.
    pub fn eval_scalar(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        match self {
            CoefficientField::Scalar(e) => e.eval(x, t),
            CoefficientField::Vector(_) => panic!("eval_scalar called on a vector field"),
        }
    }

    /// Evaluates a vector field into `out`. Panics if called on a scalar
    /// field or if `out` has the wrong length.
    pub fn eval_vector(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        match self {
            CoefficientField::Vector(v) => {
                assert_eq!(out.len(), v.len());
                for (o, e) in out.iter_mut().zip(v) {
                    *o = e.eval(x, t)?;
                }
                Ok(())
            }
            CoefficientField::Scalar(_) => panic!("eval_vector called on a scalar field"),
        }
    }
}

/// Errors raised while parsing or validating a problem definition.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffsError {
    /// A coefficient expression failed to parse.
    Syntax { field: String, message: String },
    /// The JSON document does not match the problem schema.
    Schema(String),
    /// A numeric field is outside its admissible range.
    Range(String),
}

impl fmt::Display for CoeffsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffsError::Syntax { field, message } => {
                write!(f, "in field '{field}': {message}")
            }
            CoeffsError::Schema(m) => write!(f, "schema error: {m}"),
            CoeffsError::Range(m) => write!(f, "range error: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoeffsError {}

/// A fully parsed problem. `p` is the conjugate exponent `q/(q-1)`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub q: f64,
    pub p: f64,
    pub t_final: f64,
    pub b: CoefficientField,
    pub f: CoefficientField,
    pub g: CoefficientField,
    pub m_bound: f64,
    pub delta: f64,
    /// Core box, one `[lo, hi]` pair per dimension.
    pub domain_box: Vec<[f64; 2]>,
    /// Optional explicit enlargement margin; when absent the solver uses
    /// the energy-derived default from the exponent report.
    pub margin: Option<f64>,
}

impl ProblemSpec {
    pub fn b_at(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        self.b.eval_scalar(x, t)
    }

    pub fn f_at(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        self.f.eval_vector(x, t, out)
    }

    pub fn g_at(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.g.eval_scalar(x, self.t_final)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dimension: usize,
    q: f64,
    #[serde(rename = "T")]
    t_final: f64,
    b: String,
    f: Vec<String>,
    g: String,
    #[serde(rename = "M")]
    m_bound: f64,
    delta: f64,
    #[serde(rename = "box")]
    domain_box: Vec<[f64; 2]>,
    #[serde(default)]
    margin: Option<f64>,
}

/// Parses a JSON problem document.
///
/// Schema: `{"dimension": int, "q": num, "T": num, "b": str,
/// "f": [str, ...], "g": str, "M": num, "delta": num,
/// "box": [[lo, hi], ...], "margin": num?}` with `q > 1`, `T > 0`,
/// `0 < delta <= M`, one `f` component and one box interval per
/// dimension, and `lo < hi` in every interval.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, CoeffsError> {
    let raw: RawProblem =
        serde_json::from_str(text).map_err(|e| CoeffsError::Schema(e.to_string()))?;

    if raw.dimension == 0 {
        return Err(CoeffsError::Range("dimension must be at least 1".into()));
    }
    if !(raw.q > 1.0) || !raw.q.is_finite() {
        return Err(CoeffsError::Range(format!(
            "q must be finite and greater than 1, got {}",
            raw.q
        )));
    }
    if !(raw.t_final > 0.0) || !raw.t_final.is_finite() {
        return Err(CoeffsError::Range(format!(
            "T must be finite and positive, got {}",
            raw.t_final
        )));
    }
    if !(raw.m_bound > 0.0) || !raw.m_bound.is_finite() {
        return Err(CoeffsError::Range(format!(
            "M must be finite and positive, got {}",
            raw.m_bound
        )));
    }
    if !(raw.delta > 0.0) || raw.delta > raw.m_bound {
        return Err(CoeffsError::Range(format!(
            "delta must satisfy 0 < delta <= M, got delta={} M={}",
            raw.delta, raw.m_bound
        )));
    }
    if raw.f.len() != raw.dimension {
        return Err(CoeffsError::Schema(format!(
            "expected {} component(s) in 'f', got {}",
            raw.dimension,
            raw.f.len()
        )));
    }
    if raw.domain_box.len() != raw.dimension {
        return Err(CoeffsError::Schema(format!(
            "expected {} interval(s) in 'box', got {}",
            raw.dimension,
            raw.domain_box.len()
        )));
    }
    for (i, iv) in raw.domain_box.iter().enumerate() {
        if !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite() {
            return Err(CoeffsError::Range(format!(
                "box interval {} must satisfy lo < hi, got [{}, {}]",
                i + 1,
                iv[0],
                iv[1]
            )));
        }
    }
    if let Some(m) = raw.margin {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(CoeffsError::Range(format!(
                "margin must be finite and nonnegative, got {m}"
            )));
        }
    }

    let parse_field = |field: &str, src: &str| {
        Expr::parse(src, raw.dimension).map_err(|e| CoeffsError::Syntax {
            field: field.to_string(),
            message: e.to_string(),
        })
    };

    let b = CoefficientField::Scalar(parse_field("b", &raw.b)?);
    let mut f_components = Vec::with_capacity(raw.dimension);
    for (i, src) in raw.f.iter().enumerate() {
        f_components.push(parse_field(&format!("f[{i}]"), src)?);
    }
    let g = CoefficientField::Scalar(parse_field("g", &raw.g)?);

    Ok(ProblemSpec {
        dimension: raw.dimension,
        q: raw.q,
        p: raw.q / (raw.q - 1.0),
        t_final: raw.t_final,
        b,
        f: CoefficientField::Vector(f_components),
        g,
        m_bound: raw.m_bound,
        delta: raw.delta,
        domain_box: raw.domain_box,
        margin: raw.margin,
    })
}

/// Outcome of sampling the declared coefficient bounds.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub samples_per_axis: usize,
    pub b_min: f64,
    pub b_max: f64,
    /// Supremum of the Euclidean norm `|f|` over the sample grid.
    pub f_sup: f64,
    pub g_sup: f64,
    /// Sampled points where evaluation failed (count only).
    pub eval_failures: usize,
    pub violations: Vec<String>,
}

impl BoundsReport {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty() && self.eval_failures == 0
    }
}

/// Iterates the sample grid: `samples` points per spatial axis (endpoints
/// included) over the core box, crossed with `samples` time points on
/// `[0, T]`, calling `visit(x, t)` on each node.
pub fn for_each_sample<F: FnMut(&[f64], f64)>(
    spec: &ProblemSpec,
    samples: usize,
    mut visit: F,
) {
    let n = samples.max(2);
    let dim = spec.dimension;
    let mut idx = alloc::vec![0usize; dim];
    let mut x = alloc::vec![0.0f64; dim];
    loop {
        for d in 0..dim {
            let [lo, hi] = spec.domain_box[d];
            x[d] = lo + (hi - lo) * idx[d] as f64 / (n - 1) as f64;
        }
        for k in 0..n {
            let t = spec.t_final * k as f64 / (n - 1) as f64;
            visit(&x, t);
        }
        // Odometer increment over the spatial multi-index.
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Checks the declared bounds on a sample grid (`samples` points per axis,
/// endpoints included; the default used by callers is 64). Violations are
/// recorded with the offending location; refinements of a nested sample
/// grid can only add violations, never remove them.
pub fn validate_bounds(spec: &ProblemSpec, samples: usize) -> BoundsReport {
    let mut report = BoundsReport {
        samples_per_axis: samples.max(2),
        b_min: f64::INFINITY,
        b_max: f64::NEG_INFINITY,
        f_sup: 0.0,
        g_sup: 0.0,
        eval_failures: 0,
        violations: Vec::new(),
    };
    let mut fbuf = alloc::vec![0.0f64; spec.dimension];
    let cap = 8; // keep at most this many violation messages
    for_each_sample(spec, samples, |x, t| {
        match spec.b_at(x, t) {
            Ok(b) => {
                report.b_min = report.b_min.min(b);
                report.b_max = report.b_max.max(b);
                if b.abs() > spec.m_bound && report.violations.len() < cap {
                    report
                        .violations
                        .push(format!("|b| = {} exceeds M = {} at x={x:?} t={t}", b.abs(), spec.m_bound));
                }
                if b < spec.delta && report.violations.len() < cap {
                    report
                        .violations
                        .push(format!("b = {b} below delta = {} at x={x:?} t={t}", spec.delta));
                }
            }
            Err(e) => {
                report.eval_failures += 1;
                if report.violations.len() < cap {
                    report.violations.push(format!("b failed at x={x:?} t={t}: {e}"));
                }
            }
        }
        match spec.f_at(x, t, &mut fbuf) {
            Ok(()) => {
                let norm = crate::util::norm(&fbuf);
                report.f_sup = report.f_sup.max(norm);
                if norm > spec.m_bound && report.violations.len() < cap {
                    report
                        .violations
                        .push(format!("|f| = {norm} exceeds M = {} at x={x:?} t={t}", spec.m_bound));
                }
            }
            Err(e) => {
                report.eval_failures += 1;
                if report.violations.len() < cap {
                    report.violations.push(format!("f failed at x={x:?} t={t}: {e}"));
                }
            }
        }
        match spec.g_at(x) {
            Ok(g) => {
                report.g_sup = report.g_sup.max(g.abs());
                if g.abs() > spec.m_bound && report.violations.len() < cap {
                    report
                        .violations
                        .push(format!("|g| = {} exceeds M = {} at x={x:?}", g.abs(), spec.m_bound));
                }
            }
            Err(e) => {
                report.eval_failures += 1;
                if report.violations.len() < cap {
                    report.violations.push(format!("g failed at x={x:?}: {e}"));
                }
            }
        }
    });
    report
}
