//! Numerical toolkit for conformal σ-curvature functionals on the round unit
//! 3-sphere and the normalized perturbed quotient-curvature flow.
//!
//! The crate is organised bottom-up:
//!
//! * [`curvature`] — pointwise algebra of symmetric 3×3 Schouten data:
//!   elementary symmetric functions, Garding cones, the Newton transform and
//!   the quotient operator σ₂/σ₁ with its gradient and exact Hessian form.
//! * [`sphere`] — axisymmetric discretization of the round S³, assembly of
//!   the conformal Schouten data from grid samples of the conformal factor,
//!   quadrature, and an independent warped-product curvature oracle.
//! * [`functionals`] — global scalar quantities: volumes, curvature
//!   integrals, the energy ℰ and its perturbation ℰ_ε, Euler–Lagrange
//!   residuals, the almost-Schur (De Lellis–Topping) sides and the
//!   conjecture functionals.
//! * [`flow`] — method-of-lines RK4 integration of the normalized perturbed
//!   flow with conservation, monotonicity and positivity diagnostics.
//!
//! Everything is specialized to n = 3 and to metrics g = e^{−2u}g₀ conformal
//! to the round unit sphere, with u a function of the polar angle only.

pub mod curvature;
pub mod flow;
pub mod functionals;
pub mod sphere;
pub mod util;
