//! Backward semi-Lagrangian solver for the terminal-value equation, plus
//! the closed-form scan oracle for constant coefficients and trajectory
//! extraction/refinement.
//!
//! The value function is treated through its control representation: the
//! infimum of `int a|f + x'|^p + g(x(T))` over arcs. The discrete scheme
//! is that representation made literal: one backward recursion per time
//! step, minimizing a left-endpoint rectangle cost plus the interpolated
//! value at the next slice over a capped velocity ball. Because the
//! scheme and [`action`] share the same quadrature, a trajectory rolled
//! out from the grid reproduces the grid value up to interpolation
//! error, which is what the certification layer relies on.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::coeffs::ProblemSpec;
use crate::exponents::{build_report, transform_a, ExponentReport};
use crate::util::{golden_min, pow_abs};

/// Cells per half-axis of the candidate sub-grid (the velocity ball is
/// covered by `2 * CANDIDATE_CAP + 1` points per dimension at most; a
/// golden-section pass refines below the sub-grid spacing).
const CANDIDATE_CAP: usize = 8;

/// Iterations of each golden-section refinement.
const GOLDEN_ITERS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// Inconsistent grid or control parameters.
    Config(String),
    /// A coefficient failed to evaluate (or left its admissible range).
    Eval(String),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Config(m) => write!(f, "config error: {m}"),
            SolverError::Eval(m) => write!(f, "evaluation error: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SolverError {}

/// One uniform spatial axis of the solver grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub dx: f64,
    /// Node count (at least 3).
    pub n: usize,
}

impl Axis {
    pub fn hi(&self) -> f64 {
        self.lo + self.dx * (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.dx * i as f64
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi())
    }

    /// Cell index and fractional position of a clamped coordinate.
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = (self.clamp(x) - self.lo) / self.dx;
        let i = (u.floor() as usize).min(self.n - 2);
        (i, (u - i as f64).clamp(0.0, 1.0))
    }
}

/// The discrete value function on an enlarged box times a time axis.
///
/// The spatial axes extend the core box by at least the requested margin,
/// rounded up to whole cells so core nodes stay on the grid. Values are
/// stored one slice per time node; the final slice is the terminal datum
/// sampled at the nodes, exactly.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub axes: Vec<Axis>,
    /// Time nodes `k * T / nt` for `k = 0..=nt`.
    pub times: Vec<f64>,
    /// The problem's own box (the solved box is larger).
    pub core_box: Vec<[f64; 2]>,
    /// Velocity cap used by the recursion.
    pub vmax: f64,
    /// Margin the axes were enlarged by (before cell rounding).
    pub margin: f64,
    /// Core-box nodes whose chosen velocity came within 0.1% of the cap.
    pub cap_hits: usize,
    /// Core-box nodes whose chosen candidate was clamped at the enlarged
    /// boundary.
    pub clamp_hits: usize,
    values: Vec<f64>,
}

impl ValueGrid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Nodes per time slice.
    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Raw storage, time-major (`times.len()` slices of `node_count`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let nc = self.node_count();
        &self.values[k * nc..(k + 1) * nc]
    }

    pub fn value(&self, k: usize, flat: usize) -> f64 {
        self.values[k * self.node_count() + flat]
    }

    /// Writes the node position of a flat index (first axis fastest).
    pub fn node_position(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for (d, axis) in self.axes.iter().enumerate() {
            out[d] = axis.node(rest % axis.n);
            rest /= axis.n;
        }
    }

    /// Whether a point lies in the core box (closed, with roundoff slack).
    pub fn in_core(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.core_box).all(|(&xi, iv)| {
            let pad = 1e-12 * (iv[1] - iv[0]);
            xi >= iv[0] - pad && xi <= iv[1] + pad
        })
    }

    /// Multilinear interpolation on time slice `k`; coordinates are
    /// clamped to the enlarged box first.
    pub fn interp(&self, k: usize, x: &[f64]) -> f64 {
        let slice = self.slice(k);
        interp_slice(&self.axes, slice, x)
    }

    /// Wraps externally supplied values (precomputed or synthetic data)
    /// in a grid so the analysis layer can interpolate and enumerate
    /// pairs over them. `values` must hold one slice of `node_count`
    /// entries per time node, first axis fastest. The hit counters start
    /// at zero and no velocity cap is recorded.
    pub fn from_values(
        axes: Vec<Axis>,
        times: Vec<f64>,
        core_box: Vec<[f64; 2]>,
        values: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if axes.is_empty() || axes.len() > 2 || axes.len() != core_box.len() {
            return Err(SolverError::Config(format!(
                "need 1 or 2 axes with a matching core box, got {} axes and {} intervals",
                axes.len(),
                core_box.len()
            )));
        }
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolverError::Config(
                "times must be at least two strictly increasing nodes".into(),
            ));
        }
        let per_slice: usize = axes.iter().map(|a| a.n).product();
        if axes.iter().any(|a| a.n < 2 || !(a.dx > 0.0)) {
            return Err(SolverError::Config(
                "every axis needs at least 2 nodes and a positive spacing".into(),
            ));
        }
        if values.len() != per_slice * times.len() {
            return Err(SolverError::Config(format!(
                "expected {} values ({} slices of {}), got {}",
                per_slice * times.len(),
                times.len(),
                per_slice,
                values.len()
            )));
        }
        Ok(ValueGrid {
            axes,
            times,
            core_box,
            vmax: f64::INFINITY,
            margin: 0.0,
            cap_hits: 0,
            clamp_hits: 0,
            values,
        })
    }
}

fn interp_slice(axes: &[Axis], slice: &[f64], x: &[f64]) -> f64 {
    let dim = axes.len();
    let mut base = [0usize; 4];
    let mut frac = [0.0f64; 4];
    for d in 0..dim {
        let (i, f) = axes[d].locate(x[d]);
        base[d] = i;
        frac[d] = f;
    }
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut weight = 1.0;
        let mut flat = 0;
        let mut stride = 1;
        for d in 0..dim {
            let up = (corner >> d) & 1;
            weight *= if up == 1 { frac[d] } else { 1.0 - frac[d] };
            flat += (base[d] + up) * stride;
            stride *= axes[d].n;
        }
        total += weight * slice[flat];
    }
    total
}

/// A discrete arc on uniform times spanning `[t0, T]`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub t0: f64,
    pub t_final: f64,
    /// One point per time node; at least two nodes.
    pub nodes: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t0: f64, t_final: f64, nodes: Vec<Vec<f64>>) -> Result<Self, SolverError> {
        if nodes.len() < 2 {
            return Err(SolverError::Config(format!(
                "trajectory needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if !(t_final > t0) {
            return Err(SolverError::Config(format!(
                "trajectory needs t0 < T, got t0={t0} T={t_final}"
            )));
        }
        let dim = nodes[0].len();
        if dim == 0 || nodes.iter().any(|p| p.len() != dim) {
            return Err(SolverError::Config(
                "trajectory nodes must share a positive dimension".into(),
            ));
        }
        Ok(Trajectory { t0, t_final, nodes })
    }

    /// A straight line from `x0` to `y` on `steps + 1` nodes.
    pub fn line(
        t0: f64,
        t_final: f64,
        x0: &[f64],
        y: &[f64],
        steps: usize,
    ) -> Result<Self, SolverError> {
        let n = steps.max(1);
        let nodes = (0..=n)
            .map(|j| {
                let s = j as f64 / n as f64;
                x0.iter().zip(y).map(|(&a, &b)| a + s * (b - a)).collect()
            })
            .collect();
        Trajectory::new(t0, t_final, nodes)
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn dt(&self) -> f64 {
        (self.t_final - self.t0) / (self.nodes.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.nodes.len()).map(|j| self.t0 + dt * j as f64).collect()
    }

    /// Largest per-segment speed.
    pub fn max_speed(&self) -> f64 {
        let dt = self.dt();
        let mut worst = 0.0f64;
        for w in self.nodes.windows(2) {
            let s: f64 = w[0]
                .iter()
                .zip(&w[1])
                .map(|(&a, &b)| (b - a) * (b - a))
                .sum();
            worst = worst.max(s.sqrt() / dt);
        }
        worst
    }
}

fn eval_err(what: &str, e: impl fmt::Display) -> SolverError {
    SolverError::Eval(format!("{what}: {e}"))
}

/// Running cost of one left-endpoint segment: the coefficient point is
/// the segment start, the velocity the chord slope.
fn segment_cost(
    spec: &ProblemSpec,
    x0: &[f64],
    x1: &[f64],
    t: f64,
    dt: f64,
    fbuf: &mut [f64],
) -> Result<f64, SolverError> {
    let b = spec.b_at(x0, t).map_err(|e| eval_err("b", e))?;
    let a = transform_a(b, spec.p).map_err(|e| eval_err("b", e))?;
    spec.f_at(x0, t, fbuf).map_err(|e| eval_err("f", e))?;
    let mut s = 0.0;
    for d in 0..x0.len() {
        let e = fbuf[d] + (x1[d] - x0[d]) / dt;
        s += e * e;
    }
    Ok(dt * a * pow_abs(s.sqrt(), spec.p))
}

/// Discrete action of a trajectory: left-endpoint rectangle quadrature
/// of the running cost plus the terminal datum at the last node. This is
/// exactly the objective the backward recursion decomposes, so grid
/// values and rolled-out trajectories are comparable without a
/// quadrature mismatch.
pub fn action(spec: &ProblemSpec, traj: &Trajectory) -> Result<f64, SolverError> {
    if traj.dim() != spec.dimension {
        return Err(SolverError::Config(format!(
            "trajectory dimension {} does not match problem dimension {}",
            traj.dim(),
            spec.dimension
        )));
    }
    let dt = traj.dt();
    let mut fbuf = vec![0.0; spec.dimension];
    let mut total = 0.0;
    for (j, w) in traj.nodes.windows(2).enumerate() {
        let t = traj.t0 + dt * j as f64;
        total += segment_cost(spec, &w[0], &w[1], t, dt, &mut fbuf)?;
    }
    let last = traj.nodes.last().unwrap();
    total += spec.g_at(last).map_err(|e| eval_err("g", e))?;
    Ok(total)
}

/// Candidate offsets covering the velocity ball `|y - x| <= r`: per
/// dimension, `2s + 1` points spaced `r / s` (so the extremes reach the
/// cap exactly), `s` capped at [`CANDIDATE_CAP`]. Enumeration order is
/// row-major with the first axis fastest, which fixes the tie-breaking.
struct CandidateSet {
    offsets: Vec<Vec<f64>>,
    spacing: Vec<f64>,
    r: f64,
}

impl CandidateSet {
    fn build(r: f64, axes: &[Axis]) -> Result<Self, SolverError> {
        let dim = axes.len();
        let mut per_dim: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut spacing = Vec::with_capacity(dim);
        for axis in axes {
            if r < axis.dx * (1.0 - 1e-12) {
                return Err(SolverError::Config(format!(
                    "control set empty: vmax * dt = {r} is below one cell ({})",
                    axis.dx
                )));
            }
            let s = ((r / axis.dx) as usize).clamp(1, CANDIDATE_CAP);
            let h = r / s as f64;
            spacing.push(h);
            per_dim.push((-(s as i64)..=s as i64).map(|k| k as f64 * h).collect());
        }
        let counts: Vec<usize> = per_dim.iter().map(|v| v.len()).collect();
        let mut offsets = Vec::with_capacity(counts.iter().product());
        let mut idx = vec![0usize; dim];
        'walk: loop {
            offsets.push((0..dim).map(|d| per_dim[d][idx[d]]).collect());
            let mut d = 0;
            loop {
                if d == dim {
                    break 'walk;
                }
                idx[d] += 1;
                if idx[d] < counts[d] {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
        Ok(CandidateSet { offsets, spacing, r })
    }
}

/// Minimizes the one-step cost from `x` at time `t` against the next
/// slice. Returns the best value, the chosen point, and whether the
/// chosen velocity touched the cap or the box clamp.
#[allow(clippy::too_many_arguments)]
fn best_step(
    spec: &ProblemSpec,
    axes: &[Axis],
    next: &[f64],
    cands: &CandidateSet,
    x: &[f64],
    t: f64,
    dt: f64,
) -> Result<(f64, Vec<f64>, bool, bool), SolverError> {
    let dim = axes.len();
    let b = spec.b_at(x, t).map_err(|e| eval_err("b", e))?;
    let a = transform_a(b, spec.p).map_err(|e| eval_err("b", e))?;
    let mut fbuf = vec![0.0; dim];
    spec.f_at(x, t, &mut fbuf).map_err(|e| eval_err("f", e))?;

    let cost = |y: &[f64]| -> f64 {
        let mut s = 0.0;
        for d in 0..dim {
            let e = fbuf[d] + (y[d] - x[d]) / dt;
            s += e * e;
        }
        dt * a * pow_abs(s.sqrt(), spec.p) + interp_slice(axes, next, y)
    };

    let mut best_y = vec![0.0; dim];
    let mut best = f64::INFINITY;
    let mut ybuf = vec![0.0; dim];
    for off in &cands.offsets {
        for d in 0..dim {
            ybuf[d] = axes[d].clamp(x[d] + off[d]);
        }
        let c = cost(&ybuf);
        if c < best {
            best = c;
            best_y.copy_from_slice(&ybuf);
        }
    }

    // One coordinate-descent refinement below the sub-grid spacing.
    for d in 0..dim {
        let lo = axes[d].clamp((x[d] - cands.r).max(best_y[d] - cands.spacing[d]));
        let hi = axes[d].clamp((x[d] + cands.r).min(best_y[d] + cands.spacing[d]));
        if hi <= lo {
            continue;
        }
        ybuf.copy_from_slice(&best_y);
        let (yd, _) = golden_min(
            |v| {
                let mut w = [0.0f64; 4];
                w[..dim].copy_from_slice(&ybuf);
                w[d] = v;
                cost(&w[..dim])
            },
            lo,
            hi,
            GOLDEN_ITERS,
        );
        ybuf[d] = yd;
        let c = cost(&ybuf);
        if c < best {
            best = c;
            best_y.copy_from_slice(&ybuf);
        }
    }

    let mut dist2 = 0.0;
    let mut clamped = false;
    for d in 0..dim {
        let o = best_y[d] - x[d];
        dist2 += o * o;
        let eps = 1e-12 * axes[d].dx;
        if (x[d] - cands.r < axes[d].lo - eps || x[d] + cands.r > axes[d].hi() + eps)
            && ((best_y[d] - axes[d].lo).abs() <= eps
                || (axes[d].hi() - best_y[d]).abs() <= eps)
        {
            clamped = true;
        }
    }
    let capped = dist2.sqrt() >= 0.999 * cands.r;
    Ok((best, best_y, capped, clamped))
}

/// Default velocity cap: four times the energy-averaged speed plus the
/// drift bound, so optimal arcs sit strictly inside the control set.
pub fn default_vmax(report: &ExponentReport) -> f64 {
    4.0 * (report.k_energy / report.t_final).powf(1.0 / report.p) + report.m_eff
}

/// Solves the backward recursion on `nx` nodes per core-box axis and
/// `nt` time steps, with candidate velocities capped at `vmax`.
///
/// The spatial axes are enlarged beyond the core box by the problem's
/// explicit margin if one was declared, otherwise by the energy-derived
/// margin of the exponent report, rounded up to whole cells. The final
/// slice is the terminal datum at the nodes; every earlier slice is the
/// minimized one-step cost against the next. Each slice is a pure map
/// over nodes reading the previous slice, so results are identical for
/// any worker count.
pub fn solve_dp(
    spec: &ProblemSpec,
    nx: usize,
    nt: usize,
    vmax: f64,
) -> Result<ValueGrid, SolverError> {
    let dim = spec.dimension;
    if dim > 2 {
        return Err(SolverError::Config(format!(
            "grids support 1 or 2 dimensions, got {dim}"
        )));
    }
    if nx < 3 {
        return Err(SolverError::Config(format!("need nx >= 3, got {nx}")));
    }
    if nt < 1 {
        return Err(SolverError::Config(format!("need nt >= 1, got {nt}")));
    }
    if !(vmax > 0.0) {
        return Err(SolverError::Config(format!("need vmax > 0, got {vmax}")));
    }
    let margin = match spec.margin {
        Some(m) => m,
        None => build_report(spec)
            .map_err(|e| SolverError::Config(format!("margin derivation failed: {e}")))?
            .margin_required,
    };

    let mut axes = Vec::with_capacity(dim);
    for &[lo, hi] in &spec.domain_box {
        let dx = (hi - lo) / (nx - 1) as f64;
        let extra = if margin > 0.0 {
            (margin / dx - 1e-9).ceil().max(0.0) as usize
        } else {
            0
        };
        axes.push(Axis {
            lo: lo - dx * extra as f64,
            dx,
            n: nx + 2 * extra,
        });
    }
    let dt = spec.t_final / nt as f64;
    let cands = CandidateSet::build(vmax * dt, &axes)?;

    let node_count: usize = axes.iter().map(|a| a.n).product();
    let times: Vec<f64> = (0..=nt).map(|k| dt * k as f64).collect();
    let mut values = vec![0.0f64; (nt + 1) * node_count];

    let position = |flat: usize, out: &mut [f64]| {
        let mut rest = flat;
        for (d, axis) in axes.iter().enumerate() {
            out[d] = axis.node(rest % axis.n);
            rest /= axis.n;
        }
    };
    let in_core = |x: &[f64]| {
        x.iter().zip(&spec.domain_box).all(|(&xi, iv)| {
            let pad = 1e-12 * (iv[1] - iv[0]);
            xi >= iv[0] - pad && xi <= iv[1] + pad
        })
    };

    // Terminal slice: the datum exactly at the nodes.
    {
        let mut x = vec![0.0; dim];
        for flat in 0..node_count {
            position(flat, &mut x);
            values[nt * node_count + flat] =
                spec.g_at(&x).map_err(|e| eval_err("g", e))?;
        }
    }

    let mut cap_hits = 0usize;
    let mut clamp_hits = 0usize;
    for k in (0..nt).rev() {
        let t = times[k];
        let (head, rest) = values.split_at_mut((k + 1) * node_count);
        let next = &rest[..node_count];
        let out = &mut head[k * node_count..];

        let node_value = |flat: usize| -> Result<(f64, bool, bool), SolverError> {
            let mut x = vec![0.0; dim];
            position(flat, &mut x);
            let (v, _, capped, clamped) =
                best_step(spec, &axes, next, &cands, &x, t, dt)?;
            let core = in_core(&x);
            Ok((v, capped && core, clamped && core))
        };

        #[cfg(feature = "parallel")]
        let step: Vec<Result<(f64, bool, bool), SolverError>> = {
            use rayon::prelude::*;
            (0..node_count).into_par_iter().map(node_value).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let step: Vec<Result<(f64, bool, bool), SolverError>> =
            (0..node_count).map(node_value).collect();

        for (flat, res) in step.into_iter().enumerate() {
            let (v, capped, clamped) = res?;
            out[flat] = v;
            cap_hits += capped as usize;
            clamp_hits += clamped as usize;
        }
    }

    Ok(ValueGrid {
        axes,
        times,
        core_box: spec.domain_box.clone(),
        vmax,
        margin,
        cap_hits,
        clamp_hits,
        values,
    })
}

/// Closed-form one-step value for constant coefficient `a0` and zero
/// drift: the minimum over straight-line targets `y` of
/// `a0 |y - x|^p (T - t)^(1-p) + g(y)`.
///
/// The scan covers a window around `x` that doubles until the movement
/// penalty at the window edge exceeds the observed oscillation of `g`
/// plus one, so the reported minimum is global whenever the terminal
/// datum's oscillation is bounded by what the window has seen (true for
/// every datum this crate generates). One dimension scans densely at
/// `scan` resolution; higher dimensions scan a 129-point-per-axis grid
/// refined by coordinate descent.
pub fn hopf_lax(
    a0: f64,
    p: f64,
    t_minus_t: f64,
    g: &crate::coeffs::CoefficientField,
    x: &[f64],
    scan: f64,
) -> Result<f64, SolverError> {
    if !(a0 > 0.0) || !(p > 1.0) || !(scan > 0.0) {
        return Err(SolverError::Config(format!(
            "need a0 > 0, p > 1, scan > 0; got a0={a0} p={p} scan={scan}"
        )));
    }
    let dim = x.len();
    let g_at = |y: &[f64]| -> Result<f64, SolverError> {
        g.eval_scalar(y, 0.0).map_err(|e| eval_err("g", e))
    };
    if !(t_minus_t > 0.0) {
        return g_at(x);
    }
    let pen_scale = a0 * t_minus_t.powf(1.0 - p);
    let pen = |dist: f64| pen_scale * pow_abs(dist, p);

    let mut radius = f64::max(1.0, 64.0 * scan);
    for _ in 0..60 {
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        if dim == 1 {
            let k_max = (radius / scan).ceil() as i64;
            for k in -k_max..=k_max {
                let y = [x[0] + k as f64 * scan];
                let gv = g_at(&y)?;
                g_min = g_min.min(gv);
                g_max = g_max.max(gv);
                let c = pen((k as f64 * scan).abs()) + gv;
                if c < best {
                    best = c;
                }
            }
        } else {
            let h = f64::max(scan, radius / 64.0);
            let k_max = (radius / h).ceil() as i64;
            let mut y = vec![0.0; dim];
            let mut best_y = x.to_vec();
            let mut idx = vec![-k_max; dim];
            'grid: loop {
                let mut dist2 = 0.0;
                for d in 0..dim {
                    y[d] = x[d] + idx[d] as f64 * h;
                    let o = idx[d] as f64 * h;
                    dist2 += o * o;
                }
                let gv = g_at(&y)?;
                g_min = g_min.min(gv);
                g_max = g_max.max(gv);
                let c = pen(dist2.sqrt()) + gv;
                if c < best {
                    best = c;
                    best_y.copy_from_slice(&y);
                }
                let mut d = 0;
                loop {
                    if d == dim {
                        break 'grid;
                    }
                    idx[d] += 1;
                    if idx[d] <= k_max {
                        break;
                    }
                    idx[d] = -k_max;
                    d += 1;
                }
            }
            // Coordinate descent below the coarse spacing.
            let dist = |y: &[f64]| -> f64 {
                y.iter()
                    .zip(x)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            };
            for _sweep in 0..4 {
                for d in 0..dim {
                    let frozen = best_y.clone();
                    let (yd, _) = golden_min(
                        |v| {
                            let mut w = frozen.clone();
                            w[d] = v;
                            match g_at(&w) {
                                Ok(gv) => pen(dist(&w)) + gv,
                                Err(_) => f64::INFINITY,
                            }
                        },
                        frozen[d] - h,
                        frozen[d] + h,
                        2 * GOLDEN_ITERS,
                    );
                    best_y[d] = yd;
                }
            }
            let c = pen(dist(&best_y)) + g_at(&best_y)?;
            if c < best {
                best = c;
            }
        }
        if pen(radius) >= (g_max - g_min) + 1.0 {
            return Ok(best);
        }
        radius *= 2.0;
    }
    Err(SolverError::Config(
        "scan window grew unbounded; terminal datum looks unbounded".into(),
    ))
}

/// Rolls the grid policy forward from `(x0, t0)`: at each time node the
/// same one-step minimization the recursion used is replayed from the
/// current (off-grid) point, and its argmin becomes the next node. Ties
/// keep the earliest candidate in enumeration order, so rollouts are
/// deterministic. `t0` snaps to the nearest time node below the final
/// time.
pub fn extract_trajectory(
    spec: &ProblemSpec,
    grid: &ValueGrid,
    x0: &[f64],
    t0: f64,
) -> Result<Trajectory, SolverError> {
    if x0.len() != grid.dim() || spec.dimension != grid.dim() {
        return Err(SolverError::Config(
            "dimension mismatch between spec, grid and start point".into(),
        ));
    }
    if !(t0 >= 0.0) || t0 >= spec.t_final {
        return Err(SolverError::Config(format!(
            "t0 must lie in [0, T), got {t0}"
        )));
    }
    let nt = grid.times.len() - 1;
    let dt = spec.t_final / nt as f64;
    let k0 = ((t0 / dt).round() as usize).min(nt - 1);
    let cands = CandidateSet::build(grid.vmax * dt, &grid.axes)?;

    let mut x: Vec<f64> = x0
        .iter()
        .zip(&grid.axes)
        .map(|(&v, a)| a.clamp(v))
        .collect();
    let mut nodes = vec![x.clone()];
    for k in k0..nt {
        let next = grid.slice(k + 1);
        let (_, y, _, _) = best_step(spec, &grid.axes, next, &cands, &x, grid.times[k], dt)?;
        x = y;
        nodes.push(x.clone());
    }
    Trajectory::new(grid.times[k0], spec.t_final, nodes)
}

/// Local cost touched by node `j`: its incoming and outgoing segments,
/// plus the terminal datum when `j` is the last node. Moving one node
/// changes the total action by exactly the change in this quantity.
fn local_cost(
    spec: &ProblemSpec,
    nodes: &[Vec<f64>],
    j: usize,
    t0: f64,
    dt: f64,
    fbuf: &mut [f64],
) -> Result<f64, SolverError> {
    let mut total = 0.0;
    if j > 0 {
        let t = t0 + dt * (j - 1) as f64;
        total += segment_cost(spec, &nodes[j - 1], &nodes[j], t, dt, fbuf)?;
    }
    if j + 1 < nodes.len() {
        let t = t0 + dt * j as f64;
        total += segment_cost(spec, &nodes[j], &nodes[j + 1], t, dt, fbuf)?;
    } else {
        total += spec.g_at(&nodes[j]).map_err(|e| eval_err("g", e))?;
    }
    Ok(total)
}

/// Polishes a trajectory by coordinate-wise descent on every node except
/// the start (the terminal node is free): central-difference gradients
/// with step `1e-5` of the core box width, and a backtracking step
/// halved from one until the local cost strictly decreases. Only
/// improving moves are kept, so the action is non-increasing across
/// iterations.
pub fn refine_trajectory(
    spec: &ProblemSpec,
    traj: &Trajectory,
    iters: usize,
) -> Result<Trajectory, SolverError> {
    if traj.dim() != spec.dimension {
        return Err(SolverError::Config(format!(
            "trajectory dimension {} does not match problem dimension {}",
            traj.dim(),
            spec.dimension
        )));
    }
    let dim = spec.dimension;
    let dt = traj.dt();
    let n = traj.nodes.len();
    let mut nodes = traj.nodes.clone();
    let mut fbuf = vec![0.0; dim];
    let steps: Vec<f64> = spec
        .domain_box
        .iter()
        .map(|iv| 1e-5 * (iv[1] - iv[0]))
        .collect();

    for _ in 0..iters {
        for j in 1..n {
            for d in 0..dim {
                let base = local_cost(spec, &nodes, j, traj.t0, dt, &mut fbuf)?;
                let orig = nodes[j][d];
                nodes[j][d] = orig + steps[d];
                let up = local_cost(spec, &nodes, j, traj.t0, dt, &mut fbuf)?;
                nodes[j][d] = orig - steps[d];
                let down = local_cost(spec, &nodes, j, traj.t0, dt, &mut fbuf)?;
                nodes[j][d] = orig;
                let grad = (up - down) / (2.0 * steps[d]);
                if grad == 0.0 || !grad.is_finite() {
                    continue;
                }
                let mut scale = 1.0;
                for _ in 0..40 {
                    nodes[j][d] = orig - scale * grad;
                    let trial = local_cost(spec, &nodes, j, traj.t0, dt, &mut fbuf)?;
                    if trial < base {
                        break;
                    }
                    nodes[j][d] = orig;
                    scale *= 0.5;
                }
            }
        }
    }
    Trajectory::new(traj.t0, traj.t_final, nodes)
}
