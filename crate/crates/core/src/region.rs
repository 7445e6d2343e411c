//! Lines, circles and their segments in the closed complex plane, described
//! by pairs of 2×2 Hermitian forms `(Φ, Ψ)`:
//! `𝒞 = {(μ,ν) ≠ 0 : q_Φ(μ,ν) = 0, q_Ψ(μ,ν) ≤ 0}`.

use crate::numkern::{c, C64};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type M2 = Matrix2<C64>;
pub type V2 = Vector2<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("det Φ = {0:.3e} is not negative")]
    DetNotNegative(f64),
    #[error("invalid curve parameter: {0}")]
    BadParam(String),
    #[error("curve is {0:?}; it has no interior to sample")]
    NoInterior(CurveClass),
    #[error("inequality admits no strictly feasible curve point")]
    NoStrictInterior,
    #[error("homogeneous point (0,0)")]
    ZeroPoint,
}

/// Hermitian 2×2 form `Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[C64; 2]; 2]", into = "[[C64; 2]; 2]")]
pub struct HForm2(pub M2);

impl From<[[C64; 2]; 2]> for HForm2 {
    fn from(a: [[C64; 2]; 2]) -> Self {
        HForm2::hermitian(M2::new(a[0][0], a[0][1], a[1][0], a[1][1]))
    }
}

impl From<HForm2> for [[C64; 2]; 2] {
    fn from(h: HForm2) -> Self {
        [[h.0[(0, 0)], h.0[(0, 1)]], [h.0[(1, 0)], h.0[(1, 1)]]]
    }
}

impl HForm2 {
    /// Hermitian part of an arbitrary 2×2 matrix.
    pub fn hermitian(m: M2) -> Self {
        HForm2((m + m.adjoint()) * c(0.5, 0.0))
    }

    /// `[[a11, a12], [conj(a12), a22]]`.
    pub fn new(a11: f64, a12: C64, a22: f64) -> Self {
        HForm2(M2::new(c(a11, 0.0), a12, a12.conj(), c(a22, 0.0)))
    }

    pub fn zero() -> Self {
        HForm2(M2::zeros())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == c(0.0, 0.0))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `[μ ν]^H Θ [μ ν]` for an unnormalized direction.
    pub fn eval(&self, mu: C64, nu: C64) -> f64 {
        let v = V2::new(mu, nu);
        (v.adjoint() * self.0 * v)[(0, 0)].re
    }

    /// `S^H Θ S`.
    pub fn congruence(&self, s: &M2) -> HForm2 {
        HForm2::hermitian(s.adjoint() * self.0 * s)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }
}

/// Unit circle form `diag(1, −1)`.
pub fn phi_u() -> HForm2 {
    HForm2::new(1.0, c(0.0, 0.0), -1.0)
}

/// Imaginary axis form `[[0,1],[1,0]]`.
pub fn phi_i() -> HForm2 {
    HForm2::new(0.0, c(1.0, 0.0), 0.0)
}

/// Real axis form `[[0,i],[−i,0]]`.
pub fn phi_r() -> HForm2 {
    HForm2::new(0.0, c(0.0, 1.0), 0.0)
}

/// Point of the closed complex plane in normalized homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomPoint {
    pub mu: C64,
    pub nu: C64,
}

impl HomPoint {
    pub fn new(mu: C64, nu: C64) -> Result<Self, RegionError> {
        let n = (mu.norm_sqr() + nu.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(RegionError::ZeroPoint);
        }
        let lead = if mu != c(0.0, 0.0) { mu } else { nu };
        let ph = lead.conj() / lead.norm();
        Ok(HomPoint { mu: mu * ph / n, nu: nu * ph / n })
    }

    /// Finite point `(λ, 1)`.
    pub fn finite(lambda: C64) -> Self {
        Self::new(lambda, c(1.0, 0.0)).expect("nonzero")
    }

    /// Unit-circle point `(e^{iω}, 1)`.
    pub fn on_circle(omega: f64) -> Self {
        Self::finite(C64::from_polar(1.0, omega))
    }

    pub fn infinity() -> Self {
        Self::new(c(1.0, 0.0), c(0.0, 0.0)).expect("nonzero")
    }

    /// `μ/ν`, or `None` at (numerical) infinity.
    pub fn lambda(&self) -> Option<C64> {
        if self.nu.norm() <= 1e-14 {
            None
        } else {
            Some(self.mu / self.nu)
        }
    }

    /// `arg(μ/ν)` in `(−π, π]`, with infinity mapped to `π`.
    pub fn omega(&self) -> f64 {
        self.lambda().map_or(PI, |l| l.arg())
    }

    /// Chordal distance `sqrt(1 − |⟨p,q⟩|²)` between the two lines.
    pub fn dist(&self, other: &HomPoint) -> f64 {
        // Equals `√(1 − |⟨p,q⟩|²)` for unit vectors, without the cancellation.
        (self.mu * other.nu - self.nu * other.mu).norm()
    }

    pub fn vec(&self) -> V2 {
        V2::new(self.mu, self.nu)
    }
}

pub fn quad_form(theta: &HForm2, p: &HomPoint) -> f64 {
    theta.eval(p.mu, p.nu)
}

/// Curve family constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveKind {
    UnitCircle,
    UnitCircleArc { a: f64, b: f64 },
    CircleComplementArc { a: f64 },
    ImagAxis,
    ImagInterval { a: f64, b: f64 },
    ImagComplement { a: f64 },
    RealAxis,
    RealInterval { a: f64, b: f64 },
    RealComplement { a: f64, b: f64 },
    RealHalflineGeq { a: f64 },
    RealHalflineLeq { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveSpecRaw", into = "CurveSpecRaw")]
pub struct CurveSpec {
    pub phi: HForm2,
    pub psi: HForm2,
    pub inequality_active: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveSpecRaw {
    phi: HForm2,
    psi: HForm2,
}

impl TryFrom<CurveSpecRaw> for CurveSpec {
    type Error = RegionError;
    fn try_from(r: CurveSpecRaw) -> Result<Self, RegionError> {
        CurveSpec::new(r.phi, r.psi)
    }
}

impl From<CurveSpec> for CurveSpecRaw {
    fn from(cs: CurveSpec) -> Self {
        CurveSpecRaw { phi: cs.phi, psi: cs.psi }
    }
}

impl CurveSpec {
    /// A zero `Ψ` marks the inequality as redundant.
    pub fn new(phi: HForm2, psi: HForm2) -> Result<Self, RegionError> {
        let d = phi.det();
        if !(d < -1e-12) {
            return Err(RegionError::DetNotNegative(d));
        }
        if !phi.0.iter().chain(psi.0.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(RegionError::BadParam("non-finite form entries".into()));
        }
        Ok(CurveSpec { phi, psi, inequality_active: !psi.is_zero() })
    }

    pub fn full(phi: HForm2) -> Result<Self, RegionError> {
        Self::new(phi, HForm2::zero())
    }
}

fn need(cond: bool, msg: &str) -> Result<(), RegionError> {
    if cond {
        Ok(())
    } else {
        Err(RegionError::BadParam(msg.into()))
    }
}

pub fn make_curve(kind: CurveKind) -> Result<CurveSpec, RegionError> {
    use CurveKind::*;
    let z = c(0.0, 0.0);
    match kind {
        UnitCircle => CurveSpec::full(phi_u()),
        UnitCircleArc { a, b } => {
            need((0.0..=PI).contains(&b), "arc requires 0 <= b <= pi")?;
            CurveSpec::new(phi_u(), HForm2::new(0.0, -C64::from_polar(1.0, a), 2.0 * b.cos()))
        }
        CircleComplementArc { a } => {
            need((0.0..=PI).contains(&a), "complement arc requires 0 <= a <= pi")?;
            CurveSpec::new(phi_u(), HForm2::new(0.0, c(1.0, 0.0), -2.0 * a.cos()))
        }
        ImagAxis => CurveSpec::full(phi_i()),
        ImagInterval { a, b } => {
            need(a <= b, "interval requires a <= b")?;
            CurveSpec::new(phi_i(), HForm2::new(2.0, c(0.0, -(a + b)), 2.0 * a * b))
        }
        ImagComplement { a } => {
            need(a >= 0.0, "complement requires a >= 0")?;
            CurveSpec::new(phi_i(), HForm2::new(-1.0, z, a * a))
        }
        RealAxis => CurveSpec::full(phi_r()),
        RealInterval { a, b } => {
            need(a <= b, "interval requires a <= b")?;
            CurveSpec::new(phi_r(), HForm2::new(2.0, c(-(a + b), 0.0), 2.0 * a * b))
        }
        RealComplement { a, b } => {
            need(a <= b, "complement requires a <= b")?;
            CurveSpec::new(phi_r(), HForm2::new(-2.0, c(a + b, 0.0), -2.0 * a * b))
        }
        RealHalflineGeq { a } => CurveSpec::new(phi_r(), HForm2::new(0.0, c(-1.0, 0.0), 2.0 * a)),
        RealHalflineLeq { a } => CurveSpec::new(phi_r(), HForm2::new(0.0, c(1.0, 0.0), -2.0 * a)),
    }
}

/// `|q_Φ(p)| ≤ tol·max(1,‖Φ‖)` and `q_Ψ(p) ≤ tol·max(1,‖Ψ‖)`.
pub fn contains(cs: &CurveSpec, p: &HomPoint, tol: f64) -> bool {
    let ok_eq = quad_form(&cs.phi, p).abs() <= tol * cs.phi.norm().max(1.0);
    let ok_in = !cs.inequality_active || quad_form(&cs.psi, p) <= tol * cs.psi.norm().max(1.0);
    ok_eq && ok_in
}

/// `Φ = R^H Φ_i R`, `Ψ = R^H [[α,β],[β,γ]] R`, `α ≥ γ`.
#[derive(Debug, Clone, Copy)]
pub struct Canonical {
    pub r: M2,
    pub r_inv: M2,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Eigenpairs of a 2×2 Hermitian matrix, descending, with each eigenvector's
/// first nonzero component real nonnegative.
fn eig2(h: &M2) -> ([f64; 2], M2) {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let l1 = mean + rad;
    let l2 = mean - rad;
    if b.norm() <= 1e-300 {
        return if a >= d {
            ([a, d], M2::identity())
        } else {
            ([d, a], M2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)))
        };
    }
    // (A − λI)v = 0 with v = (b, λ − a) or (λ − d, conj b); pick the better conditioned.
    let vec_for = |l: f64| -> V2 {
        let v1 = V2::new(b, c(l - a, 0.0));
        let v2 = V2::new(c(l - d, 0.0), b.conj());
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        let v = v / c(v.norm(), 0.0);
        let lead = if v[0].norm() > 1e-15 { v[0] } else { v[1] };
        v * (lead.conj() / lead.norm())
    };
    let q1 = vec_for(l1);
    let q2 = vec_for(l2);
    ([l1, l2], M2::from_columns(&[q1, q2]))
}

fn inv2(m: &M2) -> M2 {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    M2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

pub fn canonicalize(cs: &CurveSpec) -> Result<Canonical, RegionError> {
    let d = cs.phi.det();
    if !(d < 0.0) {
        return Err(RegionError::DetNotNegative(d));
    }
    let (lam, u) = eig2(&cs.phi.0);
    let s = M2::new(c(lam[0].sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c((-lam[1]).sqrt(), 0.0));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = M2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0));
    let r1 = v * s * u.adjoint();
    let r1_inv = inv2(&r1);
    let psi1 = r1_inv.adjoint() * cs.psi.0 * r1_inv;
    let x = psi1[(0, 0)].re;
    let y = psi1[(1, 1)].re;
    let beta = 0.5 * (psi1[(0, 1)].re + psi1[(1, 0)].re);
    let z = 0.5 * (psi1[(0, 1)].im - psi1[(1, 0)].im);
    // K = [[x, −z], [−z, y]] carries the eigenvalues of [[x, iz], [−iz, y]].
    let mean = 0.5 * (x + y);
    let rad = (0.25 * (x - y) * (x - y) + z * z).sqrt();
    let (alpha, gamma) = (mean + rad, mean - rad);
    let q = if z.abs() <= 1e-300 {
        if x >= y {
            M2::identity()
        } else {
            // (u, v) = (0, 1).
            M2::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0))
        }
    } else {
        let w1 = (-z, alpha - x);
        let w2 = (alpha - y, -z);
        let (mut uu, mut vv) = if w1.0.hypot(w1.1) >= w2.0.hypot(w2.1) { w1 } else { w2 };
        let nrm = uu.hypot(vv);
        uu /= nrm;
        vv /= nrm;
        if uu < 0.0 {
            uu = -uu;
            vv = -vv;
        }
        M2::new(c(uu, 0.0), c(0.0, vv), c(0.0, vv), c(uu, 0.0))
    };
    let r = q.adjoint() * r1;
    Ok(Canonical { r, r_inv: inv2(&r), alpha, beta, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveClass {
    Empty,
    Singleton,
    Segment,
    FullCurve,
}

impl Canonical {
    fn zero_tol(&self) -> f64 {
        1e-12 * (self.alpha.abs() + self.gamma.abs() + 1.0)
    }

    pub fn gamma_is_zero(&self) -> bool {
        self.gamma.abs() <= self.zero_tol()
    }

    pub fn class(&self, inequality_active: bool) -> CurveClass {
        let t = self.zero_tol();
        if !inequality_active || self.alpha <= t {
            CurveClass::FullCurve
        } else if self.gamma.abs() <= t {
            CurveClass::Singleton
        } else if self.gamma > 0.0 {
            CurveClass::Empty
        } else {
            CurveClass::Segment
        }
    }

    /// Maps canonical coordinates `(μ', ν')` back to the original curve.
    pub fn to_original(&self, mu_p: C64, nu_p: C64) -> Result<HomPoint, RegionError> {
        let w = self.r_inv * V2::new(mu_p, nu_p);
        HomPoint::new(w[0], w[1])
    }
}

pub fn classify(cs: &CurveSpec) -> CurveClass {
    match canonicalize(cs) {
        Ok(k) => k.class(cs.inequality_active),
        Err(_) => CurveClass::Empty,
    }
}

/// `k` distinct points of the relative interior, deterministic in `seed`.
pub fn sample_interior(cs: &CurveSpec, k: usize, seed: u64) -> Result<Vec<HomPoint>, RegionError> {
    let can = canonicalize(cs)?;
    let class = can.class(cs.inequality_active);
    let mut canon: Vec<(C64, C64)> = Vec::with_capacity(k);
    match class {
        CurveClass::Empty | CurveClass::Singleton => return Err(RegionError::NoInterior(class)),
        CurveClass::FullCurve => {
            for j in 0..k {
                let th = -PI + 2.0 * PI * (j as f64 + 0.5) / k as f64;
                canon.push((c(0.0, (0.5 * th).sin()), c((0.5 * th).cos(), 0.0)));
            }
        }
        CurveClass::Segment => {
            let rho = (-can.gamma / can.alpha).sqrt();
            for j in 0..k {
                let s = (PI * (2.0 * j as f64 + 1.0) / (2.0 * k as f64)).cos();
                canon.push((c(0.0, rho * s), c(1.0, 0.0)));
            }
        }
    }
    let mut pts: Vec<HomPoint> = Vec::with_capacity(k);
    let mut bump = seed;
    for (mu, nu) in canon {
        let mut p = can.to_original(mu, nu)?;
        // Collisions only arise from rounding; nudge along the curve.
        while pts.iter().any(|q| q.dist(&p) < 1e-12) {
            bump = bump.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t = ((bump >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e-9;
            let rot = C64::from_polar(1.0, t);
            let mu2 = if class == CurveClass::Segment { mu * (1.0 + t) } else { mu * rot };
            p = can.to_original(mu2, nu)?;
        }
        pts.push(p);
    }
    if cs.inequality_active {
        let bound = -1e-12 * cs.psi.norm().max(1.0);
        if pts.iter().any(|p| quad_form(&cs.psi, p) >= bound) {
            return Err(RegionError::NoStrictInterior);
        }
    }
    Ok(pts)
}

/// Point of a singleton curve.
pub fn singleton_point(cs: &CurveSpec) -> Result<HomPoint, RegionError> {
    let can = canonicalize(cs)?;
    can.to_original(c(0.0, 0.0), c(1.0, 0.0))
}
