//! Constructive decomposition of feasible PSD matrices into atoms.
//!
//! The connectors solve `U = VΛ` for unitary, unitary skew-Hermitian or
//! contractive skew-Hermitian `Λ`. [`pair_factorize`] writes a pair `(U, V)`
//! satisfying the quadratic curve conditions as `U = W diag(μ) Q^H`,
//! `V = W diag(ν) Q^H` with every `(μ_i, ν_i)` on the curve, and
//! [`decompose_psd`] applies it to `U = FY`, `V = GY` for `X = YY^H`.

use crate::numkern::{
    self, c, complete_unitary, diag_c, eye, frob, herm_eig, herm_part, orthonormalize, psd_factor, schur_normal, svd,
    CMat, NumError, C64,
};
use crate::pencil::{apply_form, apply_form_adjoint, lmi_maps, AtomSet, PencilError};
use crate::region::{self, canonicalize, CurveClass, CurveSpec, HomPoint, RegionError};
use nalgebra::DVector;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("hypothesis violated: {what} residual {residual:.3e} exceeds {bound:.3e}")]
    Hypothesis { what: &'static str, residual: f64, bound: f64 },
    #[error("matrix is not PSD: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
    #[error("LMI infeasible: eq residual {eq:.3e}, ineq max eigenvalue {ineq:.3e}")]
    LmiInfeasible { eq: f64, ineq: f64 },
    #[error("curve admits no factorization (alpha {alpha:.3e}, gamma {gamma:.3e})")]
    CaseDispatch { alpha: f64, gamma: f64 },
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Pencil(#[from] PencilError),
}

/// Default relative tolerance for hypothesis checks on noisy inputs.
pub const HYP_TOL: f64 = 1e-6;
/// Singular values below this fraction of the largest are treated as zero.
const RANK_REL: f64 = 1e-10;

fn scale(u: &CMat, v: &CMat) -> f64 {
    1.0 + frob(u).powi(2) + frob(v).powi(2)
}

fn rank_of(sigma: &[f64]) -> usize {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if s1 <= 1e-300 {
        0
    } else {
        sigma.iter().filter(|&&s| s > RANK_REL * s1).count()
    }
}

/// Shared left factor: `V = P_1 Σ_1 Qv_1^H` and the matching `Qu_1`.
struct Shared {
    sigma1: Vec<f64>,
    qv: CMat,
    qu: CMat,
}

fn shared_factor(u: &CMat, v: &CMat) -> Result<Shared, NumError> {
    let r = v.ncols();
    let s = svd(v)?;
    let q = rank_of(&s.sigma);
    let p1 = s.p.columns(0, q).into_owned();
    let sigma1: Vec<f64> = s.sigma[..q].to_vec();
    let inv = numkern::diag_real(&sigma1.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
    let qv1 = s.q.columns(0, q).into_owned();
    let qu1 = orthonormalize(&(u.adjoint() * &p1 * &inv))?;
    let qv = complete_unitary(&qv1);
    let qu = complete_unitary(&qu1);
    debug_assert_eq!(qv.ncols(), r);
    Ok(Shared { sigma1, qv, qu })
}

/// Unitary `Λ` with `U = VΛ`, given `UU^H = VV^H`.
pub fn connector_unitary(u: &CMat, v: &CMat) -> Result<CMat, DecompError> {
    connector_unitary_tol(u, v, 1e-8)
}

pub fn connector_unitary_tol(u: &CMat, v: &CMat, tol: f64) -> Result<CMat, DecompError> {
    if u.shape() != v.shape() {
        return Err(DecompError::Dim(format!("U {:?} vs V {:?}", u.shape(), v.shape())));
    }
    let res = frob(&(u * u.adjoint() - v * v.adjoint()));
    let bound = tol * (1.0 + frob(&(u * u.adjoint())));
    if res > bound {
        return Err(DecompError::Hypothesis { what: "UU^H = VV^H", residual: res, bound });
    }
    let sh = shared_factor(u, v)?;
    Ok(&sh.qv * sh.qu.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkewMode {
    /// `UU^H = VV^H`: `Λ` unitary and skew-Hermitian.
    Equal,
    /// `UU^H ⪯ VV^H`: `Λ` skew-Hermitian with `‖Λ‖₂ ≤ 1`.
    Contraction,
}

/// Skew-Hermitian `Λ` with `U = VΛ`, given `UV^H + VU^H = 0`.
pub fn connector_skew(u: &CMat, v: &CMat, mode: SkewMode) -> Result<CMat, DecompError> {
    connector_skew_tol(u, v, mode, 1e-8)
}

pub fn connector_skew_tol(u: &CMat, v: &CMat, mode: SkewMode, tol: f64) -> Result<CMat, DecompError> {
    if u.shape() != v.shape() {
        return Err(DecompError::Dim(format!("U {:?} vs V {:?}", u.shape(), v.shape())));
    }
    let sc = scale(u, v);
    let cross = u * v.adjoint();
    let res = frob(&(&cross + cross.adjoint()));
    if res > tol * sc {
        return Err(DecompError::Hypothesis { what: "UV^H + VU^H = 0", residual: res, bound: tol * sc });
    }
    let uu = u * u.adjoint();
    let vv = v * v.adjoint();
    match mode {
        SkewMode::Equal => {
            let res = frob(&(&uu - &vv));
            if res > tol * sc {
                return Err(DecompError::Hypothesis { what: "UU^H = VV^H", residual: res, bound: tol * sc });
            }
            skew_equal(u, v, tol)
        }
        SkewMode::Contraction => {
            let d = herm_part(&(&vv - &uu));
            let e = herm_eig(&d)?;
            let lmin = e.lambda.last().copied().unwrap_or(0.0);
            if lmin < -tol * sc {
                return Err(DecompError::Hypothesis { what: "UU^H <= VV^H", residual: -lmin, bound: tol * sc });
            }
            let r = u.ncols();
            if frob(u) <= 1e-14 * sc {
                return Ok(CMat::zeros(r, r));
            }
            // VV^H − UU^H = ŨŨ^H.
            let lmax = e.lambda.first().copied().unwrap_or(0.0).max(0.0);
            let keep: Vec<usize> = (0..e.lambda.len()).filter(|&k| e.lambda[k] > RANK_REL * RANK_REL * lmax.max(1e-300) && e.lambda[k] > 0.0).collect();
            let p = u.nrows();
            let s = keep.len();
            let ut = CMat::from_fn(p, s, |i, k| e.q[(i, keep[k])] * e.lambda[keep[k]].sqrt());
            let mut uh = CMat::zeros(p, r + s);
            uh.columns_mut(0, r).copy_from(u);
            uh.columns_mut(r, s).copy_from(&ut);
            let mut vh = CMat::zeros(p, r + s);
            vh.columns_mut(0, r).copy_from(v);
            let big = skew_equal(&uh, &vh, tol)?;
            let lam = big.view((0, 0), (r, r)).into_owned();
            polish_contraction(&lam)
        }
    }
}

/// Part two of the connector lemma, following its constructive proof.
fn skew_equal(u: &CMat, v: &CMat, tol: f64) -> Result<CMat, DecompError> {
    let r = u.ncols();
    let sh = shared_factor(u, v)?;
    let q = sh.sigma1.len();
    if q == 0 {
        return Ok(eye(r) * c(0.0, 1.0));
    }
    let lt = sh.qu.adjoint() * &sh.qv;
    let l11 = lt.view((0, 0), (q, q)).into_owned();
    let l11 = (&l11 - l11.adjoint()) * c(0.5, 0.0);
    let l12 = lt.view((0, q), (q, r - q)).into_owned();
    // Λ̃11 = Q Δ Q^H with Δ = iλ(−iΛ̃11).
    let h = herm_part(&(&l11 * c(0.0, -1.0)));
    let e = herm_eig(&h)?;
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| e.lambda[a].abs().total_cmp(&e.lambda[b].abs()).then(a.cmp(&b)));
    let cap = r - q;
    let d1: Vec<usize> = order.iter().copied().filter(|&k| e.lambda[k].abs() < 1.0 - 1e-10).take(cap).collect();
    let k1 = d1.len();
    let q1 = CMat::from_fn(q, k1, |i, j| e.q[(i, d1[j])]);
    let delta1: Vec<C64> = d1.iter().map(|&k| c(0.0, e.lambda[k].clamp(-1.0, 1.0))).collect();
    let cdiag: Vec<f64> = delta1.iter().map(|d| (1.0 - d.norm_sqr()).max(0.0).sqrt()).collect();
    // `cdiag` is square-root sensitive in `δ`, hence the looser inner tolerance.
    let mut vpad = CMat::zeros(q, r - q);
    vpad.columns_mut(0, k1).copy_from(&(&q1 * numkern::diag_real(&cdiag)));
    let w = if r > q { connector_unitary_tol(&l12, &vpad, tol.sqrt().max(1e-6))? } else { CMat::zeros(0, 0) };
    let mut inner: Vec<C64> = delta1.iter().map(|d| d.conj()).collect();
    inner.extend(std::iter::repeat(c(0.0, 1.0)).take(r - q - k1));
    let l22 = w.adjoint() * diag_c(&inner) * &w;
    let mut m = CMat::zeros(r, r);
    m.view_mut((0, 0), (q, q)).copy_from(&l11);
    m.view_mut((0, q), (q, r - q)).copy_from(&l12);
    m.view_mut((q, 0), (r - q, q)).copy_from(&(-l12.adjoint()));
    m.view_mut((q, q), (r - q, r - q)).copy_from(&l22);
    let lam = &sh.qv * m * sh.qv.adjoint();
    polish_unitary_skew(&lam)
}

/// Nearest unitary skew-Hermitian matrix: eigenvalues of `−iΛ` snapped to ±1.
fn polish_unitary_skew(lam: &CMat) -> Result<CMat, DecompError> {
    let h = herm_part(&(lam * c(0.0, -1.0)));
    let e = herm_eig(&h)?;
    let signs: Vec<C64> = e.lambda.iter().map(|&x| c(0.0, if x >= 0.0 { 1.0 } else { -1.0 })).collect();
    Ok(&e.q * diag_c(&signs) * e.q.adjoint())
}

/// Skew-Hermitian part with eigenvalue moduli clipped to 1.
fn polish_contraction(lam: &CMat) -> Result<CMat, DecompError> {
    let h = herm_part(&(lam * c(0.0, -1.0)));
    let e = herm_eig(&h)?;
    let d: Vec<C64> = e.lambda.iter().map(|&x| c(0.0, x.clamp(-1.0, 1.0))).collect();
    Ok(&e.q * diag_c(&d) * e.q.adjoint())
}

/// `U = W diag(μ) Q^H`, `V = W diag(ν) Q^H`.
#[derive(Debug, Clone)]
pub struct PairFactorization {
    pub w: CMat,
    pub q: CMat,
    pub mu: Vec<C64>,
    pub nu: Vec<C64>,
}

impl PairFactorization {
    pub fn points(&self) -> Result<Vec<HomPoint>, RegionError> {
        self.mu.iter().zip(&self.nu).map(|(m, n)| HomPoint::new(*m, *n)).collect()
    }

    /// `(‖U − W diag(μ)Q^H‖_F, ‖V − W diag(ν)Q^H‖_F)`.
    pub fn residuals(&self, u: &CMat, v: &CMat) -> (f64, f64) {
        let ru = frob(&(u - &self.w * diag_c(&self.mu) * self.q.adjoint()));
        let rv = frob(&(v - &self.w * diag_c(&self.nu) * self.q.adjoint()));
        (ru, rv)
    }
}

/// Factorization of a pair satisfying the curve's quadratic matrix conditions.
pub fn pair_factorize(u: &CMat, v: &CMat, curve: &CurveSpec) -> Result<PairFactorization, DecompError> {
    pair_factorize_tol(u, v, curve, 1e-7)
}

pub fn pair_factorize_tol(u: &CMat, v: &CMat, curve: &CurveSpec, tol: f64) -> Result<PairFactorization, DecompError> {
    if u.shape() != v.shape() {
        return Err(DecompError::Dim(format!("U {:?} vs V {:?}", u.shape(), v.shape())));
    }
    let (p, r) = u.shape();
    let sc = scale(u, v);
    let eq = apply_form(&curve.phi, u, v, &eye(r));
    let eq_res = frob(&eq);
    if eq_res > tol * sc {
        return Err(DecompError::Hypothesis { what: "quadratic equality", residual: eq_res, bound: tol * sc });
    }
    if curve.inequality_active && p > 0 {
        let ineq = apply_form(&curve.psi, u, v, &eye(r));
        let lmax = herm_eig(&ineq)?.lambda[0];
        if lmax > tol * sc {
            return Err(DecompError::Hypothesis { what: "quadratic inequality", residual: lmax, bound: tol * sc });
        }
    }
    let can = canonicalize(curve)?;
    let rm = &can.r;
    let s = u * rm[(0, 0)] + v * rm[(0, 1)];
    let t = u * rm[(1, 0)] + v * rm[(1, 1)];
    let finish = |w: CMat, q: CMat, st: Vec<(C64, C64)>| -> PairFactorization {
        let mut mu = Vec::with_capacity(r);
        let mut nu = Vec::with_capacity(r);
        for (si, ti) in st {
            let m = can.r_inv * region::V2::new(si, ti);
            mu.push(m[0]);
            nu.push(m[1]);
        }
        PairFactorization { w, q, mu, nu }
    };
    let ztol = 1e-14 * sc;
    if frob(&s) <= ztol && frob(&t) <= ztol {
        let pts = match can.class(curve.inequality_active) {
            CurveClass::Singleton => vec![region::singleton_point(curve)?; r],
            _ => region::sample_interior(curve, r.max(1), 0)?,
        };
        return Ok(PairFactorization {
            w: CMat::zeros(p, r),
            q: eye(r),
            mu: pts.iter().take(r).map(|x| x.mu).collect(),
            nu: pts.iter().take(r).map(|x| x.nu).collect(),
        });
    }
    let class = can.class(curve.inequality_active);
    match class {
        CurveClass::FullCurve => {
            let lam = connector_unitary_tol(&(&s + &t), &(&s - &t), 1e-6)?;
            let sch = schur_normal(&lam)?;
            let w = (&s - &t) * &sch.q;
            let st = sch
                .lambda
                .iter()
                .map(|z| {
                    let rho = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
                    ((rho + 1.0) * 0.5, (rho - 1.0) * 0.5)
                })
                .collect();
            Ok(finish(w, sch.q, st))
        }
        CurveClass::Singleton => Ok(finish(t.clone(), eye(r), vec![(c(0.0, 0.0), c(1.0, 0.0)); r])),
        CurveClass::Segment => {
            let cc = (-can.gamma / can.alpha).sqrt();
            let lam = connector_skew_tol(&(&s / c(cc, 0.0)), &t, SkewMode::Contraction, 1e-6)?;
            let sch = schur_normal(&lam)?;
            let w = &t * &sch.q;
            let st = sch.lambda.iter().map(|z| (c(0.0, cc * z.im.clamp(-1.0, 1.0)), c(1.0, 0.0))).collect();
            Ok(finish(w, sch.q, st))
        }
        CurveClass::Empty => Err(DecompError::CaseDispatch { alpha: can.alpha, gamma: can.gamma }),
    }
}

/// `X ≈ Σ a_k a_k^H` with each `a_k ∈ 𝒜`.
#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    pub atoms: Vec<DVector<C64>>,
    pub points: Vec<HomPoint>,
    pub weights: Vec<f64>,
    pub residual: f64,
    /// Set when coincident points were merged into a single atom.
    pub merged: bool,
}

impl AtomicDecomposition {
    pub fn empty(residual: f64) -> Self {
        AtomicDecomposition { atoms: vec![], points: vec![], weights: vec![], residual, merged: false }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn reconstruct(&self, n: usize) -> CMat {
        let mut x = CMat::zeros(n, n);
        for a in &self.atoms {
            x += a * a.adjoint();
        }
        x
    }

    /// `arg(μ/ν)` of each point.
    pub fn omegas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega()).collect()
    }

    /// Atoms as columns of one matrix.
    pub fn atom_matrix(&self, n: usize) -> CMat {
        if self.atoms.is_empty() {
            CMat::zeros(n, 0)
        } else {
            CMat::from_columns(&self.atoms)
        }
    }
}

impl Serialize for AtomicDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            point: &'a HomPoint,
            #[serde(skip_serializing_if = "Option::is_none")]
            omega: Option<f64>,
            weight: f64,
            atom: Vec<C64>,
        }
        let mut seq = s.serialize_seq(Some(self.atoms.len()))?;
        for k in 0..self.atoms.len() {
            let p = &self.points[k];
            let omega = p.lambda().filter(|l| (l.norm() - 1.0).abs() <= 1e-6).map(|l| l.arg());
            seq.serialize_element(&Entry { point: p, omega, weight: self.weights[k], atom: self.atoms[k].iter().copied().collect() })?;
        }
        seq.end()
    }
}

/// Orthogonal projection onto `{X : Eq(X) = 0}` by conjugate gradients on
/// `Eq(Eq*(P)) = Eq(X)`.
pub fn project_eq(aset: &AtomSet, x: &CMat) -> CMat {
    let f = &aset.pencil.f;
    let g = &aset.pencil.g;
    let phi = &aset.curve.phi;
    let b = apply_form(phi, f, g, x);
    let target = 1e-15 * (1.0 + frob(x));
    if frob(&b) <= target || aset.p() == 0 {
        return x.clone();
    }
    let op = |p: &CMat| apply_form(phi, f, g, &apply_form_adjoint(phi, f, g, p));
    let ip = |a: &CMat, b: &CMat| a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
    let mut sol = CMat::zeros(b.nrows(), b.ncols());
    let mut res = b.clone();
    let mut dir = res.clone();
    let mut rr = ip(&res, &res);
    let stop = (1e-3 * target).max(1e-12 * rr.sqrt());
    for _ in 0..(4 * b.nrows() * b.nrows()).max(50) {
        if rr.sqrt() <= stop {
            break;
        }
        let ad = op(&dir);
        let den = ip(&dir, &ad);
        if den <= 0.0 {
            break;
        }
        let a = rr / den;
        sol += &dir * c(a, 0.0);
        res -= &ad * c(a, 0.0);
        let rr2 = ip(&res, &res);
        dir = &res + &dir * c(rr2 / rr, 0.0);
        rr = rr2;
    }
    herm_part(&(x - apply_form_adjoint(phi, f, g, &sol)))
}

fn clip_psd(x: &CMat) -> Result<(CMat, f64), NumError> {
    let e = herm_eig(x)?;
    let lmin = e.lambda.last().copied().unwrap_or(0.0);
    let d: Vec<f64> = e.lambda.iter().map(|l| l.max(0.0)).collect();
    Ok((&e.q * numkern::diag_real(&d) * e.q.adjoint(), lmin))
}

/// Nearest point (approximately) of `{X ⪰ 0, Eq(X) = 0}` by alternating
/// projections.
pub fn project_feasible(aset: &AtomSet, x: &CMat) -> Result<CMat, NumError> {
    let mut y = herm_part(x);
    for _ in 0..20 {
        y = project_eq(aset, &y);
        let (z, lmin) = clip_psd(&y)?;
        let lmax = herm_eig(&y)?.lambda.first().copied().unwrap_or(0.0);
        if lmin >= -1e-11 * lmax.max(1e-300) {
            return Ok(y);
        }
        y = z;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy)]
pub struct DecompOptions {
    /// Relative eigenvalue threshold for the rank of `X`.
    pub rank_tol: f64,
    /// Relative tolerance for the PSD and LMI preconditions.
    pub hyp_tol: f64,
    /// Chordal distance under which parallel atoms are merged.
    pub merge_tol: f64,
}

impl Default for DecompOptions {
    fn default() -> Self {
        DecompOptions { rank_tol: 1e-9, hyp_tol: HYP_TOL, merge_tol: 1e-7 }
    }
}

pub fn decompose_psd(x: &CMat, aset: &AtomSet, tol: f64) -> Result<AtomicDecomposition, DecompError> {
    decompose_psd_with(x, aset, DecompOptions { rank_tol: tol, ..Default::default() })
}

pub fn decompose_psd_with(x: &CMat, aset: &AtomSet, opt: DecompOptions) -> Result<AtomicDecomposition, DecompError> {
    let n = aset.n();
    if x.shape() != (n, n) {
        return Err(DecompError::Dim(format!("X is {:?}, expected {n}x{n}", x.shape())));
    }
    if !numkern::all_finite(x) {
        return Err(NumError::NonFinite.into());
    }
    let xs = herm_part(x);
    let sc = 1.0 + frob(&xs);
    let e = herm_eig(&xs)?;
    let lmin = e.lambda.last().copied().unwrap_or(0.0);
    if lmin < -opt.hyp_tol * sc {
        return Err(DecompError::NotPsd { min_eig: lmin });
    }
    let (eq, ineq) = lmi_maps(&aset.pencil, &aset.curve, &xs)?;
    let eq_res = frob(&eq);
    let ineq_max = if aset.curve.inequality_active && aset.p() > 0 { herm_eig(&ineq)?.lambda[0] } else { 0.0 };
    if eq_res > opt.hyp_tol * sc || ineq_max > opt.hyp_tol * sc {
        return Err(DecompError::LmiInfeasible { eq: eq_res, ineq: ineq_max });
    }
    let xp = project_feasible(aset, &xs)?;
    let fac = psd_factor(&clip_psd(&xp)?.0, opt.rank_tol)?;
    if fac.rank == 0 {
        return Ok(AtomicDecomposition::empty(frob(&xs)));
    }
    let y = fac.y;
    let u = &aset.pencil.f * &y;
    let v = &aset.pencil.g * &y;
    let pf = pair_factorize_tol(&u, &v, &aset.curve, 1e-5)?;
    let a = &y * &pf.q;
    let pts = pf.points()?;
    let atoms: Vec<DVector<C64>> = (0..a.ncols()).map(|k| a.column(k).into_owned()).collect();
    Ok(finish_decomposition(aset, &xs, atoms, pts, opt.merge_tol))
}

fn finish_decomposition(
    aset: &AtomSet,
    x: &CMat,
    atoms: Vec<DVector<C64>>,
    pts: Vec<HomPoint>,
    merge_tol: f64,
) -> AtomicDecomposition {
    let n = x.nrows();
    let mut out_atoms: Vec<DVector<C64>> = Vec::new();
    let mut out_pts: Vec<HomPoint> = Vec::new();
    let mut merged = false;
    for (a, p) in atoms.into_iter().zip(pts) {
        let hit = out_pts.iter().position(|q| q.dist(&p) < merge_tol);
        if let Some(j) = hit {
            let b = &out_atoms[j];
            let cosang = (b.dotc(&a)).norm() / (b.norm() * a.norm()).max(1e-300);
            if cosang > 1.0 - 1e-6 {
                // Parallel atoms at one point: a aᴴ + b bᴴ = (‖a‖² + ‖b‖²) u uᴴ.
                let mut dir = b.clone();
                if dir.norm() < a.norm() {
                    dir = a.clone();
                }
                let u = &dir / c(dir.norm(), 0.0);
                let w = (a.norm_squared() + b.norm_squared()).sqrt();
                out_atoms[j] = u * c(w, 0.0);
                merged = true;
                continue;
            }
        }
        out_atoms.push(a);
        out_pts.push(p);
    }
    let mut idx: Vec<usize> = (0..out_atoms.len()).collect();
    idx.sort_by(|&i, &j| out_atoms[j].norm_squared().total_cmp(&out_atoms[i].norm_squared()).then(i.cmp(&j)));
    let atoms: Vec<DVector<C64>> = idx.iter().map(|&i| out_atoms[i].clone()).collect();
    let points: Vec<HomPoint> = idx.iter().map(|&i| out_pts[i]).collect();
    let weights = atoms.iter().map(|a| a.norm_squared()).collect();
    let mut d = AtomicDecomposition { atoms, points, weights, residual: 0.0, merged };
    d.residual = frob(&(x - d.reconstruct(n)));
    let _ = aset;
    d
}

/// Decomposition of a PSD Toeplitz matrix into unit-circle Vandermonde atoms.
pub fn caratheodory_toeplitz(x: &CMat) -> Result<AtomicDecomposition, DecompError> {
    caratheodory_toeplitz_tol(x, 1e-9)
}

pub fn caratheodory_toeplitz_tol(x: &CMat, rank_tol: f64) -> Result<AtomicDecomposition, DecompError> {
    let n = x.nrows();
    if x.ncols() != n || n < 2 {
        return Err(DecompError::Dim("square matrix of order >= 2 required".into()));
    }
    let aset = AtomSet::new(
        crate::pencil::standard_pencil(&crate::pencil::Family::Toeplitz { n })?,
        region::make_curve(region::CurveKind::UnitCircle)?,
    )?;
    let xs = herm_part(x);
    let sc = 1.0 + frob(&xs);
    let e = herm_eig(&xs)?;
    let lmin = e.lambda.last().copied().unwrap_or(0.0);
    if lmin < -HYP_TOL * sc {
        return Err(DecompError::NotPsd { min_eig: lmin });
    }
    let xp = project_feasible(&aset, &xs)?;
    let fac = psd_factor(&clip_psd(&xp)?.0, rank_tol)?;
    if fac.rank == 0 {
        return Ok(AtomicDecomposition::empty(frob(&xs)));
    }
    let y = fac.y;
    let r = fac.rank;
    let fy = y.rows(1, n - 1).into_owned();
    let gy = y.rows(0, n - 1).into_owned();
    let sg = svd(&gy)?;
    let lam = if rank_of(&sg.sigma) == r {
        // Shifted-row relation FY = GYΛ by least squares.
        let pinv = {
            let inv: Vec<f64> = sg.sigma.iter().map(|s| 1.0 / s).collect();
            sg.q.columns(0, r) * numkern::diag_real(&inv) * sg.p.columns(0, r).adjoint()
        };
        numkern::polar_unitary(&(pinv * &fy))?
    } else {
        connector_unitary_tol(&fy, &gy, 1e-5)?
    };
    let sch = schur_normal(&lam)?;
    let a = &y * &sch.q;
    let pts: Vec<HomPoint> = sch.lambda.iter().map(|z| HomPoint::on_circle(z.arg())).collect();
    let atoms: Vec<DVector<C64>> = (0..r).map(|k| a.column(k).into_owned()).collect();
    Ok(finish_decomposition(&aset, &xs, atoms, pts, DecompOptions::default().merge_tol))
}

/// `(1, e^{iω}, …, e^{i(n−1)ω})`.
pub fn vandermonde(n: usize, omega: f64) -> DVector<C64> {
    DVector::from_fn(n, |k, _| C64::from_polar(1.0, omega * k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkern::random;
    use crate::pencil::{standard_pencil, Family};
    use crate::region::{make_curve, CurveKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    fn circ_dist(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    fn toeplitz_set(n: usize) -> AtomSet {
        AtomSet::new(standard_pencil(&Family::Toeplitz { n }).unwrap(), make_curve(CurveKind::UnitCircle).unwrap()).unwrap()
    }

    #[test]
    fn unitary_connector_cases() {
        let mut r = rng(1);
        let v = random::gaussian(3, 5, &mut r);
        let l = connector_unitary(&v, &v).unwrap();
        assert!(frob(&(&v - &v * &l)) < 1e-10);
        let l0 = random::unitary(5, &mut r);
        let u = &v * &l0;
        let l = connector_unitary(&u, &v).unwrap();
        assert!(numkern::unitarity_defect(&l) < 1e-10);
        assert!(frob(&(&u - &v * &l)) < 1e-8);
        let v = random::gaussian(4, 2, &mut r) * random::gaussian(2, 6, &mut r);
        let u = &v * random::unitary(6, &mut r);
        let l = connector_unitary(&u, &v).unwrap();
        assert!(frob(&(&u - &v * &l)) < 1e-7 * (1.0 + frob(&v)));
        assert!(connector_unitary(&(&u * c(2.0, 0.0)), &v).is_err());
    }

    #[test]
    fn skew_connector_cases() {
        let mut r = rng(2);
        let u = CMat::zeros(4, 3);
        let v = random::gaussian(4, 3, &mut r);
        assert_eq!(connector_skew(&u, &v, SkewMode::Contraction).unwrap(), CMat::zeros(3, 3));
        let v = random::gaussian(3, 3, &mut r);
        let l = connector_skew(&(&v * c(0.0, 1.0)), &v, SkewMode::Equal).unwrap();
        assert!(frob(&(&l - eye(3) * c(0.0, 1.0))) < 1e-9);
        let v = random::gaussian(5, 4, &mut r);
        let h = random::hermitian(4, &mut r);
        let nrm = herm_eig(&h).unwrap().lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let l0 = &h * c(0.0, 0.9 / nrm);
        let u = &v * &l0;
        let l = connector_skew(&u, &v, SkewMode::Contraction).unwrap();
        assert!(frob(&(&l + l.adjoint())) < 1e-8);
        assert!(frob(&(&u - &v * &l)) < 1e-7 * (1.0 + frob(&v)));
        assert!(svd(&l).unwrap().sigma[0] <= 1.0 + 1e-8);
    }

    #[test]
    fn pair_factorize_toeplitz() {
        let n = 6;
        let aset = toeplitz_set(n);
        let oms = [0.4, 2.2, -1.9];
        let y = CMat::from_columns(&oms.iter().map(|&w| vandermonde(n, w)).collect::<Vec<_>>());
        let u = &aset.pencil.f * &y;
        let v = &aset.pencil.g * &y;
        let pf = pair_factorize(&u, &v, &aset.curve).unwrap();
        let (ru, rv) = pf.residuals(&u, &v);
        assert!(ru + rv < 1e-8);
        let mut got: Vec<f64> = pf.points().unwrap().iter().map(|p| p.omega()).collect();
        got.sort_by(f64::total_cmp);
        let mut want = oms.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!(circ_dist(*g, *w) < 1e-8);
        }
    }

    #[test]
    fn pair_factorize_zero_and_real_axis() {
        let cs = make_curve(CurveKind::UnitCircle).unwrap();
        let pf = pair_factorize(&CMat::zeros(3, 2), &CMat::zeros(3, 2), &cs).unwrap();
        assert_eq!(pf.w, CMat::zeros(3, 2));
        for p in pf.points().unwrap() {
            assert!(region::contains(&cs, &p, 1e-9));
        }
        let n = 5;
        let aset = AtomSet::new(standard_pencil(&Family::HankelPowers { n }).unwrap(), make_curve(CurveKind::RealAxis).unwrap()).unwrap();
        let cols: Vec<DVector<C64>> = [0.5, -1.3].iter().map(|&l: &f64| DVector::from_fn(n, |k, _| c(l.powi(k as i32), 0.0))).collect();
        let y = CMat::from_columns(&cols);
        let pf = pair_factorize(&(&aset.pencil.f * &y), &(&aset.pencil.g * &y), &aset.curve).unwrap();
        for p in pf.points().unwrap() {
            match p.lambda() {
                Some(l) => assert!(l.im.abs() < 1e-8),
                None => {}
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let n = 8;
        let aset = toeplitz_set(n);
        let a = vandermonde(n, 1.1);
        let d = decompose_psd(&(&a * a.adjoint()), &aset, 1e-9).unwrap();
        assert_eq!(d.len(), 1);
        assert!(circ_dist(d.points[0].omega(), 1.1) < 1e-7);
        let oms = [0.5, 2.0, 4.4];
        let th = [1.0, 2.0, 0.5];
        let mut x = CMat::zeros(n, n);
        for (w, t) in oms.iter().zip(&th) {
            let a = vandermonde(n, *w);
            x += &a * a.adjoint() * c(*t, 0.0);
        }
        let d = decompose_psd(&x, &aset, 1e-9).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.residual <= 1e-7 * (1.0 + frob(&x)));
        for (w, t) in oms.iter().zip(&th) {
            let k = (0..3).min_by(|&i, &j| circ_dist(d.points[i].omega(), *w).total_cmp(&circ_dist(d.points[j].omega(), *w))).unwrap();
            assert!(circ_dist(d.points[k].omega(), *w) < 1e-6);
            assert!((d.weights[k] - t * n as f64).abs() < 1e-6 * n as f64);
        }
        let d = decompose_psd(&eye(n), &aset, 1e-9).unwrap();
        assert_eq!(d.len(), n);
        assert!(d.residual < 1e-7);
    }

    #[test]
    fn caratheodory_examples() {
        let n = 6;
        let (w1, w2) = (0.3, 3.1);
        let a1 = vandermonde(n, w1);
        let a2 = vandermonde(n, w2) * c(2.0, 0.0);
        let x = &a1 * a1.adjoint() + &a2 * a2.adjoint();
        let d = caratheodory_toeplitz(&x).unwrap();
        assert_eq!(d.len(), 2);
        assert!(circ_dist(d.points[0].omega(), w2) < 1e-7 && (d.weights[0] - 4.0 * n as f64).abs() < 1e-7);
        assert!(circ_dist(d.points[1].omega(), w1) < 1e-7 && (d.weights[1] - n as f64).abs() < 1e-7);
        let ones = CMat::from_element(n, n, c(9.0, 0.0));
        let d = caratheodory_toeplitz(&ones).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.points[0].omega().abs() < 1e-9 && (d.weights[0] - 9.0 * n as f64).abs() < 1e-9);
        assert!(caratheodory_toeplitz(&CMat::zeros(n, n)).unwrap().is_empty());
        let d = caratheodory_toeplitz(&eye(n)).unwrap();
        assert_eq!(d.len(), n);
        assert!(d.residual < 1e-7);
    }

    #[test]
    fn decompose_rejects_bad_input() {
        let aset = toeplitz_set(4);
        assert!(matches!(decompose_psd(&numkern::diag_real(&[1.0, -1.0, 1.0, 1.0]), &aset, 1e-9), Err(DecompError::NotPsd { .. })));
        assert!(matches!(decompose_psd(&numkern::diag_real(&[1.0, 2.0, 3.0, 4.0]), &aset, 1e-9), Err(DecompError::LmiInfeasible { .. })));
    }

    #[test]
    fn decompose_on_segments() {
        let n = 7;
        let aset = AtomSet::new(
            standard_pencil(&Family::Toeplitz { n }).unwrap(),
            make_curve(CurveKind::UnitCircleArc { a: 0.25, b: 1.3 }).unwrap(),
        )
        .unwrap();
        let mut x = CMat::zeros(n, n);
        for (w, t) in [(-0.7, 1.0), (0.2, 3.0), (1.2, 0.5)] {
            let a = vandermonde(n, w);
            x += &a * a.adjoint() * c(t, 0.0);
        }
        let d = decompose_psd(&x, &aset, 1e-9).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.residual < 1e-7 * frob(&x));
        for p in &d.points {
            assert!(region::contains(&aset.curve, p, 1e-7));
        }
        let aset = AtomSet::new(
            standard_pencil(&Family::HankelPowers { n }).unwrap(),
            make_curve(CurveKind::RealInterval { a: -1.0, b: 2.0 }).unwrap(),
        )
        .unwrap();
        let mut x = CMat::zeros(n, n);
        for l in [-0.5f64, 0.3, 1.7] {
            let a = DVector::from_fn(n, |k, _| c(l.powi(k as i32), 0.0));
            x += &a * a.adjoint();
        }
        let d = decompose_psd(&x, &aset, 1e-11).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.residual < 1e-6 * frob(&x));
        let mut ls: Vec<f64> = d.points.iter().map(|p| p.lambda().unwrap().re).collect();
        ls.sort_by(f64::total_cmp);
        for (g, w) in ls.iter().zip([-0.5, 0.3, 1.7]) {
            assert!((g - w).abs() < 1e-5, "{ls:?}");
        }
    }

    #[test]
    fn json_entries() {
        let n = 4;
        let a = vandermonde(n, 0.5);
        let d = decompose_psd(&(&a * a.adjoint()), &toeplitz_set(n), 1e-9).unwrap();
        let v: serde_json::Value = serde_json::to_value(&d).unwrap();
        let e = &v[0];
        assert!((e["omega"].as_f64().unwrap() - 0.5).abs() < 1e-9);
        assert!((e["weight"].as_f64().unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(e["atom"].as_array().unwrap().len(), 4);
        assert!(e["point"]["mu"].is_array());
    }
}
