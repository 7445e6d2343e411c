//! Structured pencils `λG − F`, their atom sets over a curve, and the LMI maps
//! `Eq(X)`, `Ineq(X)`.

use crate::numkern::{self, c, cmat_serde, eye, frob, herm_eig, nullspace, svd, CMat, NumError, C64};
use crate::region::{self, sample_interior, CurveClass, CurveSpec, HForm2, HomPoint, RegionError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PencilError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("invalid family parameter: {0}")]
    BadParam(String),
    #[error("point ({mu}, {nu}) is not on the curve")]
    NotOnCurve { mu: C64, nu: C64 },
    #[error("curve is empty")]
    EmptyCurve,
    #[error("strictly feasible point failed verification: lambda_min {lambda_min:.3e}, eq residual {eq_residual:.3e}, ineq lambda_max {ineq_max:.3e}")]
    Verification { lambda_min: f64, eq_residual: f64, ineq_max: f64 },
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Block-diagonal structure `F = diag(F1,F2)`, `G = diag(G1,G2)`, `E = diag(E1,E2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub p1: usize,
    pub n1: usize,
    pub p2: usize,
    pub n2: usize,
    #[serde(with = "cmat_serde")]
    pub e1: CMat,
    #[serde(with = "cmat_serde")]
    pub e2: CMat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PencilRaw", into = "PencilRaw")]
pub struct PencilSpec {
    pub f: CMat,
    pub g: CMat,
    pub e: CMat,
    pub block: Option<Block>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PencilRaw {
    #[serde(rename = "F", with = "cmat_serde")]
    f: CMat,
    #[serde(rename = "G", with = "cmat_serde")]
    g: CMat,
    #[serde(rename = "E", with = "cmat_serde", default = "empty")]
    e: CMat,
    /// Column count; needed when `F` and `G` have no rows.
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    block: Option<Block>,
}

fn empty() -> CMat {
    CMat::zeros(0, 0)
}

impl TryFrom<PencilRaw> for PencilSpec {
    type Error = PencilError;
    fn try_from(r: PencilRaw) -> Result<Self, PencilError> {
        let n = r.n.unwrap_or(if r.f.nrows() > 0 { r.f.ncols() } else { r.e.ncols() });
        let f = if r.f.nrows() == 0 { CMat::zeros(0, n) } else { r.f };
        let g = if r.g.nrows() == 0 { CMat::zeros(0, n) } else { r.g };
        let e = if r.e.nrows() == 0 && r.e.ncols() == 0 { eye(n) } else { r.e };
        let mut p = PencilSpec::new(f, g, Some(e))?;
        if let Some(b) = r.block {
            p.block = Some(b);
            p.check_block()?;
        }
        Ok(p)
    }
}

impl From<PencilSpec> for PencilRaw {
    fn from(p: PencilSpec) -> Self {
        PencilRaw { n: Some(p.n()), f: p.f, g: p.g, e: p.e, block: p.block }
    }
}

fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut m = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

impl PencilSpec {
    /// `E` defaults to the identity.
    pub fn new(f: CMat, g: CMat, e: Option<CMat>) -> Result<Self, PencilError> {
        if f.shape() != g.shape() {
            return Err(PencilError::Dim(format!("F is {:?}, G is {:?}", f.shape(), g.shape())));
        }
        let e = e.unwrap_or_else(|| eye(f.ncols()));
        if e.ncols() != f.ncols() {
            return Err(PencilError::Dim(format!("E has {} columns, expected {}", e.ncols(), f.ncols())));
        }
        if !(numkern::all_finite(&f) && numkern::all_finite(&g) && numkern::all_finite(&e)) {
            return Err(NumError::NonFinite.into());
        }
        Ok(PencilSpec { f, g, e, block: None })
    }

    /// Block-diagonal pencil from its two diagonal blocks.
    pub fn two_block(
        (f1, g1, e1): (CMat, CMat, CMat),
        (f2, g2, e2): (CMat, CMat, CMat),
    ) -> Result<Self, PencilError> {
        let blk = Block { p1: f1.nrows(), n1: f1.ncols(), p2: f2.nrows(), n2: f2.ncols(), e1: e1.clone(), e2: e2.clone() };
        let mut p = PencilSpec::new(block_diag(&f1, &f2), block_diag(&g1, &g2), Some(block_diag(&e1, &e2)))?;
        p.block = Some(blk);
        p.check_block()?;
        Ok(p)
    }

    pub fn with_e(mut self, e: CMat) -> Result<Self, PencilError> {
        if e.ncols() != self.n() {
            return Err(PencilError::Dim("E column count".into()));
        }
        self.e = e;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    pub fn p(&self) -> usize {
        self.f.nrows()
    }

    fn check_block(&self) -> Result<(), PencilError> {
        let b = self.block.as_ref().expect("block present");
        if b.p1 + b.p2 != self.p() || b.n1 + b.n2 != self.n() {
            return Err(PencilError::Dim("block sizes do not partition F".into()));
        }
        if b.e1.ncols() != b.n1 || b.e2.ncols() != b.n2 || b.e1.nrows() + b.e2.nrows() != self.e.nrows() {
            return Err(PencilError::Dim("block sizes do not partition E".into()));
        }
        let zero = c(0.0, 0.0);
        for m in [&self.f, &self.g] {
            let off1 = m.view((0, b.n1), (b.p1, b.n2));
            let off2 = m.view((b.p1, 0), (b.p2, b.n1));
            if off1.iter().chain(off2.iter()).any(|z| *z != zero) {
                return Err(PencilError::Dim("F or G is not block diagonal".into()));
            }
        }
        let m1 = b.e1.nrows();
        let off1 = self.e.view((0, b.n1), (m1, b.n2));
        let off2 = self.e.view((m1, 0), (self.e.nrows() - m1, b.n1));
        if off1.iter().chain(off2.iter()).any(|z| *z != zero) {
            return Err(PencilError::Dim("E is not block diagonal".into()));
        }
        Ok(())
    }

    /// `μG − νF`.
    pub fn eval(&self, mu: C64, nu: C64) -> CMat {
        &self.g * mu - &self.f * nu
    }
}

/// Named pencil families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Toeplitz { n: usize },
    HankelPowers { n: usize },
    Cosine { n: usize },
    #[serde(alias = "sine")]
    CosineAlt { n: usize },
    VectorPoly { k: usize, l: usize },
    Jacobi { alphas: Vec<f64>, betas: Vec<f64> },
    Legendre { n: usize },
    Controllability {
        #[serde(with = "cmat_serde")]
        a: CMat,
        #[serde(with = "cmat_serde")]
        b: CMat,
    },
    Descriptor {
        #[serde(with = "cmat_serde")]
        ed: CMat,
        #[serde(with = "cmat_serde")]
        a: CMat,
        #[serde(with = "cmat_serde")]
        b: CMat,
    },
    HankelBlock { n1: usize, n2: usize },
}

fn shift_pair(n: usize) -> (CMat, CMat) {
    let p = n.saturating_sub(1);
    let f = CMat::from_fn(p, n, |i, j| if j == i + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let g = CMat::from_fn(p, n, |i, j| if j == i { c(1.0, 0.0) } else { c(0.0, 0.0) });
    (f, g)
}

fn cosine_f(n: usize) -> CMat {
    CMat::from_fn(n - 1, n, |i, j| {
        let hit = j == i + 1 || (i > 0 && j + 1 == i);
        if hit {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn legendre_betas(n: usize) -> Vec<f64> {
    (1..n).map(|i| {
        let i = i as f64;
        i / (4.0 * i * i - 1.0).sqrt()
    }).collect()
}

fn bad(msg: &str) -> PencilError {
    PencilError::BadParam(msg.into())
}

pub fn standard_pencil(fam: &Family) -> Result<PencilSpec, PencilError> {
    match fam {
        Family::Toeplitz { n } | Family::HankelPowers { n } => {
            if *n < 2 {
                return Err(bad("n >= 2 required"));
            }
            let (f, g) = shift_pair(*n);
            PencilSpec::new(f, g, None)
        }
        Family::Cosine { n } | Family::CosineAlt { n } => {
            if *n < 2 {
                return Err(bad("n >= 2 required"));
            }
            let alt = matches!(fam, Family::CosineAlt { .. });
            let g = CMat::from_fn(n - 1, *n, |i, j| {
                if i == j {
                    c(if i == 0 && !alt { 1.0 } else { 2.0 }, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            });
            PencilSpec::new(cosine_f(*n), g, None)
        }
        Family::VectorPoly { k, l } => {
            if *k < 2 || *l < 1 {
                return Err(bad("k >= 2 and l >= 1 required"));
            }
            let n = k * l;
            let p = (k - 1) * l;
            let f = CMat::from_fn(p, n, |i, j| if j == i + l { c(1.0, 0.0) } else { c(0.0, 0.0) });
            let g = CMat::from_fn(p, n, |i, j| if j == i { c(1.0, 0.0) } else { c(0.0, 0.0) });
            PencilSpec::new(f, g, None)
        }
        Family::Jacobi { alphas, betas } => jacobi(alphas, betas),
        Family::Legendre { n } => {
            if *n < 2 {
                return Err(bad("n >= 2 required"));
            }
            jacobi(&vec![0.0; n - 1], &legendre_betas(*n))
        }
        Family::Controllability { a, b } => descriptor(&eye(a.nrows()), a, b),
        Family::Descriptor { ed, a, b } => descriptor(ed, a, b),
        Family::HankelBlock { n1, n2 } => {
            if *n1 < 2 || *n2 < 2 {
                return Err(bad("n1, n2 >= 2 required"));
            }
            let (f1, g1) = shift_pair(*n1);
            let (g2, f2) = shift_pair(*n2);
            let e1 = eye(*n1) / c((*n1 as f64).sqrt(), 0.0);
            let e2 = eye(*n2) / c((*n2 as f64).sqrt(), 0.0);
            PencilSpec::two_block((f1, g1, e1), (f2, g2, e2))
        }
    }
}

fn jacobi(alphas: &[f64], betas: &[f64]) -> Result<PencilSpec, PencilError> {
    let p = alphas.len();
    if p == 0 || betas.len() != p {
        return Err(bad("jacobi needs n-1 alphas and n-1 betas"));
    }
    if betas.iter().any(|b| !(*b > 0.0)) {
        return Err(bad("jacobi betas must be positive"));
    }
    let n = p + 1;
    let f = CMat::from_fn(p, n, |i, j| {
        if j == i {
            c(alphas[i], 0.0)
        } else if j == i + 1 {
            c(betas[i], 0.0)
        } else if i == j + 1 {
            c(betas[j], 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let g = CMat::from_fn(p, n, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
    PencilSpec::new(f, g, None)
}

fn descriptor(ed: &CMat, a: &CMat, b: &CMat) -> Result<PencilSpec, PencilError> {
    let ns = a.nrows();
    if a.ncols() != ns || ed.shape() != (ns, ns) || b.nrows() != ns {
        return Err(PencilError::Dim("descriptor needs square E, A and B with matching rows".into()));
    }
    let m = b.ncols();
    let mut f = CMat::zeros(ns, ns + m);
    f.view_mut((0, 0), (ns, ns)).copy_from(a);
    f.view_mut((0, ns), (ns, m)).copy_from(b);
    let mut g = CMat::zeros(ns, ns + m);
    g.view_mut((0, 0), (ns, ns)).copy_from(ed);
    PencilSpec::new(f, g, None)
}

impl Family {
    /// Curve used with this family in the standard examples.
    pub fn default_curve(&self) -> CurveSpec {
        use region::CurveKind::*;
        let kind = match self {
            Family::HankelPowers { .. } | Family::Jacobi { .. } | Family::Legendre { .. } => RealAxis,
            Family::Cosine { .. } | Family::CosineAlt { .. } => RealInterval { a: -1.0, b: 1.0 },
            _ => UnitCircle,
        };
        region::make_curve(kind).expect("valid kind")
    }
}

/// Pencil together with its curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub pencil: PencilSpec,
    pub curve: CurveSpec,
}

impl AtomSet {
    pub fn new(pencil: PencilSpec, curve: CurveSpec) -> Result<Self, PencilError> {
        if region::classify(&curve) == CurveClass::Empty {
            return Err(PencilError::EmptyCurve);
        }
        Ok(AtomSet { pencil, curve })
    }

    pub fn n(&self) -> usize {
        self.pencil.n()
    }

    pub fn p(&self) -> usize {
        self.pencil.p()
    }

    /// Curve points where `μG − νF` loses row rank, among `k` samples.
    pub fn irregular_points(&self, k: usize) -> Vec<HomPoint> {
        let pts = sample_interior(&self.curve, k, 0).unwrap_or_default();
        pts.into_iter().filter(|q| !full_row_rank(&self.pencil, q)).collect()
    }
}

/// Orthonormal basis (columns) of `null(μG − νF)` at a curve point.
pub fn atom_basis(aset: &AtomSet, p: &HomPoint, tol: f64) -> Result<CMat, PencilError> {
    if !region::contains(&aset.curve, p, tol) {
        return Err(PencilError::NotOnCurve { mu: p.mu, nu: p.nu });
    }
    Ok(nullspace(&aset.pencil.eval(p.mu, p.nu), 1e-9)?)
}

/// `Θ11 FXF^H + Θ21 FXG^H + Θ12 GXF^H + Θ22 GXG^H`, Hermitian-symmetrized.
pub fn apply_form(theta: &HForm2, f: &CMat, g: &CMat, x: &CMat) -> CMat {
    let fx = f * x;
    let gx = g * x;
    let ff = &fx * f.adjoint();
    let fg = &fx * g.adjoint();
    let gg = &gx * g.adjoint();
    let m = &ff * theta.get(0, 0) + &fg * theta.get(1, 0) + fg.adjoint() * theta.get(0, 1) + &gg * theta.get(1, 1);
    numkern::herm_part(&m)
}

/// Adjoint of [`apply_form`]: `[F;G]^H (Θ ⊗ P) [F;G]`.
pub fn apply_form_adjoint(theta: &HForm2, f: &CMat, g: &CMat, p: &CMat) -> CMat {
    let pf = p * f;
    let pg = p * g;
    let fh = f.adjoint();
    let gh = g.adjoint();
    let m = (&fh * &pf) * theta.get(0, 0)
        + (&fh * &pg) * theta.get(0, 1)
        + (&gh * &pf) * theta.get(1, 0)
        + (&gh * &pg) * theta.get(1, 1);
    numkern::herm_part(&m)
}

/// `(Eq(X), Ineq(X))`; `Ineq` is zero when the inequality is redundant.
pub fn lmi_maps(pencil: &PencilSpec, curve: &CurveSpec, x: &CMat) -> Result<(CMat, CMat), PencilError> {
    let n = pencil.n();
    if x.shape() != (n, n) {
        return Err(PencilError::Dim(format!("X is {:?}, expected {n}x{n}", x.shape())));
    }
    let eq = apply_form(&curve.phi, &pencil.f, &pencil.g, x);
    let ineq = if curve.inequality_active {
        apply_form(&curve.psi, &pencil.f, &pencil.g, x)
    } else {
        CMat::zeros(pencil.p(), pencil.p())
    };
    Ok((eq, ineq))
}

fn full_row_rank(pencil: &PencilSpec, q: &HomPoint) -> bool {
    let p = pencil.p();
    if p == 0 {
        return true;
    }
    let s = svd(&pencil.eval(q.mu, q.nu)).expect("finite pencil");
    s.sigma.len() >= p && s.sigma[0] > 0.0 && s.sigma[p - 1] > 1e-8 * s.sigma[0]
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankCheck {
    Pass,
    FailAt(HomPoint),
}

/// Sampled evidence for full row rank of `μG − νF` at all nonzero `(μ,ν)`.
pub fn rank_condition(aset: &AtomSet, n_samples: usize, seed: u64) -> RankCheck {
    let mut pts = match sample_interior(&aset.curve, n_samples.max(1), seed) {
        Ok(v) => v,
        Err(_) => region::singleton_point(&aset.curve).into_iter().collect(),
    };
    pts.push(HomPoint::infinity());
    pts.push(HomPoint::finite(c(0.0, 0.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa70f);
    for _ in 0..32 {
        let v = numkern::random::gaussian(2, 1, &mut rng);
        if let Ok(q) = HomPoint::new(v[0], v[1]) {
            pts.push(q);
        }
    }
    for q in pts {
        if !full_row_rank(&aset.pencil, &q) {
            return RankCheck::FailAt(q);
        }
    }
    RankCheck::Pass
}

/// `X = Σ_j Σ_b b b^H` over nullspace bases at `n` interior points, verified
/// strictly feasible.
pub fn strictly_feasible_point(aset: &AtomSet, seed: u64) -> Result<CMat, PencilError> {
    let n = aset.n();
    let pts = sample_interior(&aset.curve, n, seed)?;
    let mut x = CMat::zeros(n, n);
    for q in &pts {
        let b = atom_basis(aset, q, 1e-8)?;
        x += &b * b.adjoint();
    }
    let x = numkern::herm_part(&x);
    let (eq, ineq) = lmi_maps(&aset.pencil, &aset.curve, &x)?;
    let lam = herm_eig(&x)?.lambda;
    let lambda_min = lam.last().copied().unwrap_or(0.0);
    let lambda_max = lam.first().copied().unwrap_or(0.0);
    let eq_residual = frob(&eq);
    let ineq_max = if aset.curve.inequality_active && aset.p() > 0 {
        herm_eig(&ineq)?.lambda[0]
    } else {
        f64::NEG_INFINITY
    };
    // Positive beyond eigenvalue rounding error.
    let ok_x = lambda_min > 64.0 * n as f64 * f64::EPSILON * lambda_max.max(1.0);
    let ok_eq = eq_residual <= 1e-8 * (1.0 + frob(&x));
    let ok_in = !aset.curve.inequality_active || aset.p() == 0 || ineq_max < 0.0;
    if ok_x && ok_eq && ok_in {
        Ok(x)
    } else {
        Err(PencilError::Verification { lambda_min, eq_residual, ineq_max })
    }
}

/// Random point on the curve drawn from a continuous distribution over the
/// canonical parameterization (used by tests and experiments).
pub fn random_curve_point<R: Rng>(curve: &CurveSpec, rng: &mut R) -> Result<HomPoint, PencilError> {
    let can = region::canonicalize(curve)?;
    match can.class(curve.inequality_active) {
        CurveClass::Empty => Err(PencilError::EmptyCurve),
        CurveClass::Singleton => Ok(region::singleton_point(curve)?),
        CurveClass::FullCurve => {
            let th: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Ok(can.to_original(c(0.0, (0.5 * th).sin()), c((0.5 * th).cos(), 0.0))?)
        }
        CurveClass::Segment => {
            let rho = (-can.gamma / can.alpha).sqrt();
            let s: f64 = rng.random_range(-1.0..1.0);
            Ok(can.to_original(c(0.0, rho * s), c(1.0, 0.0))?)
        }
    }
}
