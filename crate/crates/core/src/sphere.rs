//! Axisymmetric discretization of the round unit S³.
//!
//! The background metric is g₀ = dψ² + sin²ψ·g_{S²} with polar angle
//! ψ ∈ (0, π). Conformal factors u = u(ψ) are sampled on the half-point grid
//! ψ_i = (i − ½)h, h = π/n, which avoids both coordinate poles, so cot ψ is
//! finite at every node. Smoothness at the poles (u′ → 0) is enforced by even
//! reflection ghost nodes.
//!
//! Two independent curvature routes are provided:
//!
//! * [`schouten_field`] assembles W = ∇²u + du⊗du − ½|∇u|²g₀ + S_{g₀} in a
//!   g₀-orthonormal frame, where S_{g₀} = ½g₀ on the unit sphere.
//! * [`warped_oracle`] differentiates the sampled metric coefficients
//!   a = e^{−u}, b = e^{−u}·sin ψ of g = a²dψ² + b²g_{S²} directly and reads
//!   the Ricci endomorphism off the standard warped-product formulas,
//!   bypassing the Schouten transformation law entirely.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::curvature::SymTriple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("grid must have at least 16 cells, got {0}")]
    GridTooCoarse(usize),
    #[error("sample count {got} does not match grid size {expected}")]
    SampleCountMismatch { got: usize, expected: usize },
    #[error("conformal factor contains a non-finite sample at node {0}")]
    NonFiniteSample(usize),
}

/// Pole-avoiding half-point grid on (0, π): ψ_i = (i + ½)h, h = π/n_cells.
#[derive(Debug, Clone)]
pub struct Grid {
    n_cells: usize,
    h: f64,
    psi: Vec<f64>,
    sin_psi: Vec<f64>,
    cot_psi: Vec<f64>,
    /// Background quadrature weights 4π·sin²ψ_i·h for ∫ f dv(g₀).
    weight: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Arc<Grid>, SphereError> {
        if n_cells < 16 {
            return Err(SphereError::GridTooCoarse(n_cells));
        }
        let h = PI / n_cells as f64;
        let psi: Vec<f64> = (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect();
        let sin_psi: Vec<f64> = psi.iter().map(|p| p.sin()).collect();
        let cot_psi: Vec<f64> = psi.iter().map(|p| p.cos() / p.sin()).collect();
        let weight: Vec<f64> = sin_psi.iter().map(|s| 4.0 * PI * s * s * h).collect();
        Ok(Arc::new(Grid { n_cells, h, psi, sin_psi, cot_psi, weight }))
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn sin_psi(&self) -> &[f64] {
        &self.sin_psi
    }

    pub fn cot_psi(&self) -> &[f64] {
        &self.cot_psi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }
}

/// Grid samples of the scalar u; the metric represented is g = e^{−2u}g₀.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    grid: Arc<Grid>,
    u: Vec<f64>,
}

impl ConformalFactor {
    /// u(ψ) = Σ_j a_j (cos ψ)^j — the smooth axisymmetric initial data class.
    pub fn from_coefficients(grid: Arc<Grid>, coeffs: &[f64]) -> ConformalFactor {
        let u = grid
            .psi()
            .iter()
            .map(|&p| {
                let c = p.cos();
                coeffs.iter().rev().fold(0.0, |acc, &a| acc * c + a)
            })
            .collect();
        ConformalFactor { grid, u }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> ConformalFactor {
        let n = grid.n_cells();
        ConformalFactor { grid, u: vec![c; n] }
    }

    pub fn from_samples(grid: Arc<Grid>, u: Vec<f64>) -> Result<ConformalFactor, SphereError> {
        if u.len() != grid.n_cells() {
            return Err(SphereError::SampleCountMismatch {
                got: u.len(),
                expected: grid.n_cells(),
            });
        }
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(SphereError::NonFiniteSample(i));
        }
        Ok(ConformalFactor { grid, u })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Shifted factor u + c (the metric scales by e^{−2c}).
    pub fn shifted(&self, c: f64) -> ConformalFactor {
        ConformalFactor {
            grid: Arc::clone(&self.grid),
            u: self.u.iter().map(|x| x + c).collect(),
        }
    }
}

/// First and second ψ-derivatives on the grid.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub uprime: Vec<f64>,
    pub usecond: Vec<f64>,
}

/// Second-order central differences with even-reflection ghosts across both
/// poles, enforcing u′(0) = u′(π) = 0.
pub fn derivatives(cf: &ConformalFactor) -> Derivatives {
    let u = cf.u();
    let n = u.len();
    let h = cf.grid().h();
    let at = |i: isize| -> f64 {
        if i < 0 {
            u[(-i - 1) as usize]
        } else if i as usize >= n {
            u[2 * n - 1 - i as usize]
        } else {
            u[i as usize]
        }
    };
    let mut uprime = Vec::with_capacity(n);
    let mut usecond = Vec::with_capacity(n);
    for i in 0..n as isize {
        uprime.push((at(i + 1) - at(i - 1)) / (2.0 * h));
        usecond.push((at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h));
    }
    Derivatives { uprime, usecond }
}

/// Per-node eigenvalues (λ_ψ, λ_τ, λ_τ) of the conformal Schouten data W in
/// the g₀-orthonormal frame, with cached conformal weights.
#[derive(Debug, Clone)]
pub struct SchoutenField {
    pub lam_psi: Vec<f64>,
    pub lam_tau: Vec<f64>,
    pub eu: Vec<f64>,
    pub emu: Vec<f64>,
    pub em3u: Vec<f64>,
}

impl SchoutenField {
    pub fn len(&self) -> usize {
        self.lam_psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lam_psi.is_empty()
    }

    pub fn sigma1_at(&self, i: usize) -> f64 {
        self.lam_psi[i] + 2.0 * self.lam_tau[i]
    }

    pub fn sigma2_at(&self, i: usize) -> f64 {
        self.lam_tau[i] * (2.0 * self.lam_psi[i] + self.lam_tau[i])
    }

    pub fn triple_at(&self, i: usize) -> SymTriple {
        SymTriple::new(self.lam_psi[i], self.lam_tau[i], self.lam_tau[i])
    }

    pub fn min_sigma1(&self) -> f64 {
        (0..self.len()).map(|i| self.sigma1_at(i)).fold(f64::INFINITY, f64::min)
    }
}

/// Conformal Schouten data from the transformation law
/// S_g = ∇²u + du⊗du − ½|∇u|²g₀ + S_{g₀}, in the g₀-orthonormal frame:
///
/// λ_ψ = u″ + ½u′² + ½,  λ_τ = cot ψ·u′ − ½u′² + ½.
pub fn schouten_field(cf: &ConformalFactor) -> SchoutenField {
    let d = derivatives(cf);
    let n = cf.u().len();
    let cot = cf.grid().cot_psi();
    let mut lam_psi = Vec::with_capacity(n);
    let mut lam_tau = Vec::with_capacity(n);
    let mut eu = Vec::with_capacity(n);
    let mut emu = Vec::with_capacity(n);
    let mut em3u = Vec::with_capacity(n);
    for i in 0..n {
        let up = d.uprime[i];
        let upp = d.usecond[i];
        lam_psi.push(upp + 0.5 * up * up + 0.5);
        lam_tau.push(cot[i] * up - 0.5 * up * up + 0.5);
        let e = cf.u()[i].exp();
        eu.push(e);
        let inv = 1.0 / e;
        emu.push(inv);
        em3u.push(inv * inv * inv);
    }
    SchoutenField { lam_psi, lam_tau, eu, emu, em3u }
}

/// Pointwise σ₁(g) = e^{2u}σ₁(W) and σ₂(g) = e^{4u}σ₂(W).
pub fn curvatures_of_g(sf: &SchoutenField, _cf: &ConformalFactor) -> (Vec<f64>, Vec<f64>) {
    let n = sf.len();
    let mut s1g = Vec::with_capacity(n);
    let mut s2g = Vec::with_capacity(n);
    for i in 0..n {
        let e2u = sf.eu[i] * sf.eu[i];
        s1g.push(e2u * sf.sigma1_at(i));
        s2g.push(e2u * e2u * sf.sigma2_at(i));
    }
    (s1g, s2g)
}

/// Measure against which a nodal function is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureWeight {
    /// dv(g₀) = 4π sin²ψ dψ.
    Background,
    /// dv(g) = e^{−3u} dv(g₀).
    ConformalVolume,
    /// e^{p·u} dv(g₀); `ConformalVolume` is `Exponential(-3.0)`.
    Exponential(f64),
}

/// Midpoint-rule quadrature; exact (to rounding) for f ≡ 1 against the
/// background weight, where it returns vol(S³) = 2π².
pub fn quadrature(cf: &ConformalFactor, f: &[f64], weight: QuadratureWeight) -> f64 {
    assert_eq!(f.len(), cf.grid().n_cells(), "nodal function size mismatch");
    let w = cf.grid().weights();
    match weight {
        QuadratureWeight::Background => f.iter().zip(w).map(|(fi, wi)| fi * wi).sum(),
        QuadratureWeight::ConformalVolume => f
            .iter()
            .zip(w)
            .zip(cf.u())
            .map(|((fi, wi), ui)| fi * wi * (-3.0 * ui).exp())
            .sum(),
        QuadratureWeight::Exponential(p) => f
            .iter()
            .zip(w)
            .zip(cf.u())
            .map(|((fi, wi), ui)| fi * wi * (p * ui).exp())
            .sum(),
    }
}

/// Reflection parity of a nodal function across the poles.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Parity {
    Even,
    Odd,
}

/// Fourth-order central first derivative with parity ghost nodes. The higher
/// order keeps the oracle's own truncation error subdominant at the
/// pole-adjacent nodes, where second-order ghosts would pollute the
/// (1 − b′²)/b² term at O(1) relative size.
fn d1_fourth(vals: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    let n = vals.len();
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let at = |i: isize| -> f64 {
        if i < 0 {
            sign * vals[(-i - 1) as usize]
        } else if i as usize >= n {
            sign * vals[2 * n - 1 - i as usize]
        } else {
            vals[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h))
        .collect()
}

/// Per-node Ricci endomorphism eigenvalues (ρ_ψ, ρ_τ, ρ_τ) of g.
#[derive(Debug, Clone)]
pub struct WarpedRicci {
    pub ric_psi: Vec<f64>,
    pub ric_tau: Vec<f64>,
}

/// Independent curvature oracle for g = a²dψ² + b²g_{S²}, a = e^{−u},
/// b = e^{−u}sin ψ. With s the g-arclength (d/ds = a⁻¹ d/dψ):
///
/// ```text
/// Ric(∂_s, ∂_s)/g = −2 b″/b,      Ric(X, X)/g = −b″/b + (1 − b′²)/b²,
/// ```
///
/// derivatives taken of the sampled coefficient arrays themselves (b odd, a
/// even across the poles), not via the chain rule through u.
pub fn warped_oracle(cf: &ConformalFactor) -> WarpedRicci {
    let grid = cf.grid();
    let n = grid.n_cells();
    let h = grid.h();
    let a: Vec<f64> = cf.u().iter().map(|u| (-u).exp()).collect();
    let b: Vec<f64> = a.iter().zip(grid.sin_psi()).map(|(ai, s)| ai * s).collect();

    let b_psi = d1_fourth(&b, h, Parity::Odd);
    let bp: Vec<f64> = b_psi.iter().zip(&a).map(|(d, ai)| d / ai).collect();
    let bp_psi = d1_fourth(&bp, h, Parity::Even);
    let bpp: Vec<f64> = bp_psi.iter().zip(&a).map(|(d, ai)| d / ai).collect();

    let mut ric_psi = Vec::with_capacity(n);
    let mut ric_tau = Vec::with_capacity(n);
    for i in 0..n {
        ric_psi.push(-2.0 * bpp[i] / b[i]);
        ric_tau.push(-bpp[i] / b[i] + (1.0 - bp[i] * bp[i]) / (b[i] * b[i]));
    }
    WarpedRicci { ric_psi, ric_tau }
}

/// σ₁(g), σ₂(g) via the warped oracle and S = Ric − (R/4)g.
pub fn warped_sigma(cf: &ConformalFactor) -> (Vec<f64>, Vec<f64>) {
    let ric = warped_oracle(cf);
    let n = ric.ric_psi.len();
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for i in 0..n {
        let r = ric.ric_psi[i] + 2.0 * ric.ric_tau[i];
        let lr = ric.ric_psi[i] - 0.25 * r;
        let lt = ric.ric_tau[i] - 0.25 * r;
        s1.push(lr + 2.0 * lt);
        s2.push(lt * (2.0 * lr + lt));
    }
    (s1, s2)
}
