//! Variational toolkit for Hamilton-Jacobi equations of the form
//! `-u_t + b|Du|^q + f.Du = 0` with terminal data `u(.,T) = g`.
//!
//! The value function is computed from its control representation: an
//! infimum of `int a|f + x'|^p + g(x(T))` over arcs, where `p` is the
//! conjugate exponent of `q` and `a` is the Legendre transform weight of
//! `b`. The crate provides:
//!
//! * [`coeffs`]: problem definitions with expression-valued coefficients
//!   and sampled bound certification;
//! * [`exponents`]: the explicit constant chain (energy bound, averaged
//!   energy inequality, reverse-Holder root, Holder exponents) plus the
//!   interior space/time modulus bounds built from it;
//! * [`solver`]: a backward semi-Lagrangian solver for the value function,
//!   a scan-based one-step oracle for constant coefficients, and
//!   trajectory extraction/refinement;
//! * [`revholder`]: exact step-function machinery for averaged reverse
//!   Holder inequalities: feasibility checks, the debiasing transform,
//!   structured and brute-force prefix-mass extremizers, and power-law
//!   diagnostics;
//! * [`probe`]: certification of the estimate chain on solved grids, and
//!   a fixed battery of seeded test problems.
//!
//! The crate is `no_std`-compatible (`alloc` required); the default `std`
//! and `parallel` features enable OS threading via rayon.

#![cfg_attr(not(feature = "std"), no_std)]
// Validation code uses `!(x > 0.0)` style guards on purpose: unlike the
// suggested rewrites, they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coeffs;
pub mod expr;
pub mod exponents;
pub mod probe;
pub mod revholder;
pub mod solver;

mod util;

pub use coeffs::{parse_problem, CoefficientField, ProblemSpec};
pub use exponents::ExponentReport;
pub use solver::{Trajectory, ValueGrid};
