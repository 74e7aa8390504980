//! Pointwise algebra of symmetric 3×3 Schouten data.
//!
//! Elementary symmetric functions of eigenvalues, Garding cone membership,
//! the first Newton transform T = σ₁I − W, and the quotient operator
//! F(W) = (σ₂(W) − ν)/σ₁(W) together with its gradient matrix and the exact
//! closed form of its second-derivative quadratic form,
//!
//! ```text
//! Σ_{ijkl} ∂²(σ₂/σ₁)/∂w_ij∂w_kl · r_ij r_kl
//!     = − Σ_ij (σ₁(W) r_ij − σ₁(R) w_ij)² / σ₁(W)³ .
//! ```
//!
//! σ_k values are computed from matrix invariants (trace, trace of the
//! square, determinant) rather than an eigensolver; the eigenvalue route is
//! kept as a test oracle only.

use thiserror::Error;

/// Error from quotient operations when the argument leaves Γ₁⁺.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ConeError {
    /// σ₁(W) ≤ 0: the quotient σ₂/σ₁ and its derivatives are undefined.
    #[error("degenerate cone: sigma_1(W) = {sigma1} is not positive")]
    DegenerateCone { sigma1: f64 },
}

/// Eigenvalues of the Schouten endomorphism at a point. All operations are
/// symmetric in the three entries; no ordering is assumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTriple {
    pub lam1: f64,
    pub lam2: f64,
    pub lam3: f64,
}

impl SymTriple {
    pub fn new(lam1: f64, lam2: f64, lam3: f64) -> Self {
        SymTriple { lam1, lam2, lam3 }
    }

    pub fn is_finite(&self) -> bool {
        self.lam1.is_finite() && self.lam2.is_finite() && self.lam3.is_finite()
    }
}

/// Which elementary symmetric function / Garding cone, k ∈ {1,2,3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeLabel {
    K1,
    K2,
    K3,
}

impl ConeLabel {
    pub fn k(self) -> u8 {
        match self {
            ConeLabel::K1 => 1,
            ConeLabel::K2 => 2,
            ConeLabel::K3 => 3,
        }
    }
}

/// Symmetric 3×3 real matrix, stored as the six independent entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix3 {
    pub w11: f64,
    pub w12: f64,
    pub w13: f64,
    pub w22: f64,
    pub w23: f64,
    pub w33: f64,
}

impl SymMatrix3 {
    pub fn new(w11: f64, w12: f64, w13: f64, w22: f64, w23: f64, w33: f64) -> Self {
        SymMatrix3 { w11, w12, w13, w22, w23, w33 }
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymMatrix3::new(a, 0.0, 0.0, b, 0.0, c)
    }

    pub fn identity() -> Self {
        SymMatrix3::diag(1.0, 1.0, 1.0)
    }

    /// Entry (i, j) with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.w11,
            (0, 1) => self.w12,
            (0, 2) => self.w13,
            (1, 1) => self.w22,
            (1, 2) => self.w23,
            (2, 2) => self.w33,
            _ => panic!("index out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.w11 + self.w22 + self.w33
    }

    /// tr(W²) = Σ_ij w_ij².
    pub fn trace_sq(&self) -> f64 {
        self.w11 * self.w11
            + self.w22 * self.w22
            + self.w33 * self.w33
            + 2.0 * (self.w12 * self.w12 + self.w13 * self.w13 + self.w23 * self.w23)
    }

    pub fn det(&self) -> f64 {
        self.w11 * (self.w22 * self.w33 - self.w23 * self.w23)
            - self.w12 * (self.w12 * self.w33 - self.w23 * self.w13)
            + self.w13 * (self.w12 * self.w23 - self.w22 * self.w13)
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix3::new(
            s * self.w11,
            s * self.w12,
            s * self.w13,
            s * self.w22,
            s * self.w23,
            s * self.w33,
        )
    }

    pub fn add(&self, o: &SymMatrix3) -> Self {
        SymMatrix3::new(
            self.w11 + o.w11,
            self.w12 + o.w12,
            self.w13 + o.w13,
            self.w22 + o.w22,
            self.w23 + o.w23,
            self.w33 + o.w33,
        )
    }

    pub fn sub(&self, o: &SymMatrix3) -> Self {
        self.add(&o.scaled(-1.0))
    }

    /// Σ_ij m_ij² over all nine entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.trace_sq()
    }

    /// Full contraction Σ_ij a_ij b_ij.
    pub fn dot(&self, o: &SymMatrix3) -> f64 {
        self.w11 * o.w11
            + self.w22 * o.w22
            + self.w33 * o.w33
            + 2.0 * (self.w12 * o.w12 + self.w13 * o.w13 + self.w23 * o.w23)
    }

    /// True if the matrix is positive definite (Sylvester minors).
    pub fn is_positive_definite(&self) -> bool {
        let m1 = self.w11;
        let m2 = self.w11 * self.w22 - self.w12 * self.w12;
        let m3 = self.det();
        m1 > 0.0 && m2 > 0.0 && m3 > 0.0
    }
}

/// k-th elementary symmetric function of the triple.
pub fn sigma_k(lams: &SymTriple, k: ConeLabel) -> f64 {
    let (a, b, c) = (lams.lam1, lams.lam2, lams.lam3);
    match k {
        ConeLabel::K1 => a + b + c,
        ConeLabel::K2 => a * b + a * c + b * c,
        ConeLabel::K3 => a * b * c,
    }
}

/// σ_k of the eigenvalues of W, computed from matrix invariants:
/// σ₁ = tr W, σ₂ = ((tr W)² − tr W²)/2, σ₃ = det W.
pub fn sigma_k_matrix(w: &SymMatrix3, k: ConeLabel) -> f64 {
    match k {
        ConeLabel::K1 => w.trace(),
        ConeLabel::K2 => {
            let t = w.trace();
            0.5 * (t * t - w.trace_sq())
        }
        ConeLabel::K3 => w.det(),
    }
}

/// Strict Garding cone membership: σ_j(W) > 0 for every j ≤ k.
///
/// No epsilon margin is applied; the cones are open and callers needing a
/// safety margin pass their own threshold on the σ_j values.
pub fn cone_membership(w: &SymMatrix3, k: ConeLabel) -> bool {
    let labels = [ConeLabel::K1, ConeLabel::K2, ConeLabel::K3];
    labels
        .iter()
        .take(k.k() as usize)
        .all(|&j| sigma_k_matrix(w, j) > 0.0)
}

/// First Newton transform T = σ₁(W)·I − W. tr T = 2σ₁(W).
pub fn newton_transform(w: &SymMatrix3) -> SymMatrix3 {
    let s1 = w.trace();
    SymMatrix3::new(
        s1 - w.w11,
        -w.w12,
        -w.w13,
        s1 - w.w22,
        -w.w23,
        s1 - w.w33,
    )
}

/// Quotient F(W) = (σ₂(W) − ν)/σ₁(W), ν ≥ 0.
pub fn quotient_f(w: &SymMatrix3, nu: f64) -> Result<f64, ConeError> {
    let s1 = w.trace();
    if s1 <= 0.0 {
        return Err(ConeError::DegenerateCone { sigma1: s1 });
    }
    Ok((sigma_k_matrix(w, ConeLabel::K2) - nu) / s1)
}

/// Gradient matrix (F^{ij}) = (σ₁T^{ij} − σ₂δ^{ij} + νδ^{ij}) / σ₁².
///
/// Positive definite on Γ₁⁺ for ν > 0, positive semidefinite for ν = 0 with
/// the null direction occurring only at rank-1 arguments.
pub fn quotient_gradient(w: &SymMatrix3, nu: f64) -> Result<SymMatrix3, ConeError> {
    let s1 = w.trace();
    if s1 <= 0.0 {
        return Err(ConeError::DegenerateCone { sigma1: s1 });
    }
    let s2 = sigma_k_matrix(w, ConeLabel::K2);
    let t = newton_transform(w);
    let inv = 1.0 / (s1 * s1);
    Ok(SymMatrix3::new(
        (s1 * t.w11 - s2 + nu) * inv,
        s1 * t.w12 * inv,
        s1 * t.w13 * inv,
        (s1 * t.w22 - s2 + nu) * inv,
        s1 * t.w23 * inv,
        (s1 * t.w33 - s2 + nu) * inv,
    ))
}

/// Closed form of the second-derivative quadratic form of σ₂/σ₁ at W in
/// direction R:  −Σ_ij (σ₁(W)r_ij − σ₁(R)w_ij)² / σ₁(W)³.
///
/// Nonpositive on Γ₁⁺, vanishing exactly when R ∝ W.
pub fn quotient_hessian_form(w: &SymMatrix3, r: &SymMatrix3) -> Result<f64, ConeError> {
    let s1w = w.trace();
    if s1w <= 0.0 {
        return Err(ConeError::DegenerateCone { sigma1: s1w });
    }
    let s1r = r.trace();
    let m = r.scaled(s1w).sub(&w.scaled(s1r));
    Ok(-m.frobenius_sq() / (s1w * s1w * s1w))
}
