//! Signal-processing drivers: synthetic line spectra, covariance fitting,
//! robust line-spectrum denoising, direction-of-arrival estimation with
//! sector constraints and from multiple snapshots, and recovery scoring.

use crate::conic::{ConicSolution, Settings, Status};
use crate::decomp::{decompose_psd_with, vandermonde, DecompError, DecompOptions};
use crate::gauge::{
    build_nonsymmetric, build_nonsymmetric_groups, build_nonsymmetric_hankel, build_symmetric, dual_polynomial,
    extract_certificate, DualCertificate, GaugeError, LossSpec,
};
use crate::numkern::{c, eye, svd, CMat, C64};
use crate::pencil::{standard_pencil, AtomSet, Family, PencilError, PencilSpec};
use crate::region::{make_curve, CurveKind, RegionError};
use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("infeasible input: {0}")]
    Infeasible(String),
    #[error("solver finished with status {status:?} (residuals {residual:.3e})")]
    Solver { status: Status, residual: f64 },
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Pencil(#[from] PencilError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Input(msg.into())
}

/// `y(t) = Σ c_k e^{iω_k t} + v(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpectrumModel {
    pub omegas: Vec<f64>,
    pub coeffs: Vec<C64>,
    /// Noise standard deviation.
    #[serde(default)]
    pub sigma: f64,
}

impl LineSpectrumModel {
    fn validate(&self) -> Result<(), AppError> {
        if self.omegas.len() != self.coeffs.len() {
            return Err(bad("omegas and coeffs differ in length"));
        }
        if !(self.sigma >= 0.0) {
            return Err(bad("sigma must be nonnegative"));
        }
        if self.coeffs.iter().any(|z| z.norm() == 0.0) {
            return Err(bad("coefficients must be nonzero"));
        }
        for (i, a) in self.omegas.iter().enumerate() {
            if self.omegas[..i].iter().any(|b| wrap_dist(*a, *b) < 1e-12) {
                return Err(bad("frequencies must be distinct"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub count: usize,
    pub magnitude: f64,
}

fn cgauss<R: Rng>(rng: &mut R, std: f64) -> C64 {
    let s = std / 2f64.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(s * re, s * im)
}

/// Samples `t = 0..len−1`; complex Gaussian noise with variance `σ²` and
/// optional spikes of fixed magnitude and random phase at distinct positions.
pub fn synth_signal(model: &LineSpectrumModel, len: usize, corruption: Option<Corruption>, seed: u64) -> Result<Vec<C64>, AppError> {
    model.validate()?;
    if len == 0 {
        return Err(bad("signal length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<C64> = (0..len)
        .map(|t| model.omegas.iter().zip(&model.coeffs).map(|(w, ck)| ck * C64::from_polar(1.0, w * t as f64)).sum())
        .collect();
    if model.sigma > 0.0 {
        for v in y.iter_mut() {
            *v += cgauss(&mut rng, model.sigma);
        }
    }
    if let Some(cor) = corruption {
        if cor.count > len {
            return Err(bad(format!("corruption count {} exceeds length {len}", cor.count)));
        }
        let mut idx = sample(&mut rng, len, cor.count).into_vec();
        idx.sort_unstable();
        for i in idx {
            let ph: f64 = rng.random_range(-PI..PI);
            y[i] += C64::from_polar(cor.magnitude, ph);
        }
    }
    Ok(y)
}

/// `YY^H/(N−n+1)` for the `n×(N−n+1)` Hankel matrix `Y_ij = y_{i+j}`.
pub fn sample_covariance(y: &[C64], n: usize) -> Result<CMat, AppError> {
    if n == 0 || y.len() < n {
        return Err(bad(format!("need at least n = {n} samples, got {}", y.len())));
    }
    let cols = y.len() - n + 1;
    let h = CMat::from_fn(n, cols, |i, j| y[i + j]);
    let r = &h * h.adjoint() / c(cols as f64, 0.0);
    Ok((&r + r.adjoint()) * c(0.5, 0.0))
}

fn wrap(w: f64) -> f64 {
    (w + PI).rem_euclid(2.0 * PI) - PI
}

/// Distance on the circle.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub omegas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Angles `asin(ω/α)` for array problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    /// Sector index per atom for sector-constrained problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sectors: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub truth: usize,
    pub estimate: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub estimated: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_estimate: Option<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: Status,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DualCertificate>,
    /// Estimated signal (`y`, or the columns of `Y` stacked) where applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<Vec<C64>>,
    pub matched: Vec<MatchPair>,
    pub unmatched_mass: f64,
}

impl RecoveryResult {
    fn new(est: Estimate, sol: &ConicSolution) -> Self {
        RecoveryResult {
            estimated: est,
            noise_estimate: None,
            objective: sol.primal_obj,
            dual_objective: sol.dual_obj,
            status: sol.status,
            iterations: sol.iterations,
            certificate: None,
            signal: None,
            matched: vec![],
            unmatched_mass: 0.0,
        }
    }

    /// Fills `matched` and `unmatched_mass` against true frequencies.
    pub fn score(&mut self, truth: &[f64], gate: f64) {
        self.matched = match_atoms(truth, &self.estimated.omegas, gate);
        self.unmatched_mass = (0..self.estimated.omegas.len())
            .filter(|j| !self.matched.iter().any(|m| m.estimate == *j))
            .map(|j| self.estimated.magnitudes[j])
            .sum();
    }

    /// Indices of the `k` largest atoms.
    pub fn dominant(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.estimated.magnitudes.len()).collect();
        idx.sort_by(|&a, &b| self.estimated.magnitudes[b].total_cmp(&self.estimated.magnitudes[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Greedy nearest-neighbour matching on the circle, closest pairs first,
/// accepting pairs within `gate`.
pub fn match_atoms(truth: &[f64], est: &[f64], gate: f64) -> Vec<MatchPair> {
    let mut pairs: Vec<MatchPair> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in est.iter().enumerate() {
            let d = wrap_dist(*t, *e);
            if d <= gate {
                pairs.push(MatchPair { truth: i, estimate: j, error: d });
            }
        }
    }
    pairs.sort_by(|a, b| a.error.total_cmp(&b.error).then(a.truth.cmp(&b.truth)).then(a.estimate.cmp(&b.estimate)));
    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; est.len()];
    let mut out = Vec::new();
    for p in pairs {
        if !used_t[p.truth] && !used_e[p.estimate] {
            used_t[p.truth] = true;
            used_e[p.estimate] = true;
            out.push(p);
        }
    }
    out.sort_by_key(|p| p.truth);
    out
}

fn check_solution(sol: &ConicSolution) -> Result<(), AppError> {
    if sol.status == Status::Optimal {
        Ok(())
    } else {
        Err(AppError::Solver { status: sol.status, residual: sol.residuals.max() })
    }
}

fn scaled_eye(n: usize, s: f64) -> CMat {
    eye(n) * c(s, 0.0)
}

/// Toeplitz atom set `(1, z, …, z^{n−1})` on `curve` with `E = I/√n`.
pub fn toeplitz_aset(n: usize, curve: CurveKind) -> Result<AtomSet, AppError> {
    let p = standard_pencil(&Family::Toeplitz { n })?.with_e(scaled_eye(n, 1.0 / (n as f64).sqrt()))?;
    Ok(AtomSet::new(p, make_curve(curve)?)?)
}

/// Atoms `(v(z); w)` with `v` Vandermonde of length `n` and free `w ∈ C^m`;
/// `E₁ = I/√n`, `E₂ = I`.
pub fn line_aset(n: usize, m: usize, curve: CurveKind) -> Result<AtomSet, AppError> {
    let p = standard_pencil(&Family::Toeplitz { n })?;
    let pen = PencilSpec::two_block(
        (p.f, p.g, scaled_eye(n, 1.0 / (n as f64).sqrt())),
        (CMat::zeros(0, m), CMat::zeros(0, m), eye(m)),
    )?;
    Ok(AtomSet::new(pen, make_curve(curve)?)?)
}

fn arc_or_circle(omega_c: f64) -> CurveKind {
    if omega_c >= PI {
        CurveKind::UnitCircle
    } else {
        CurveKind::UnitCircleArc { a: 0.0, b: omega_c }
    }
}

const RANK_TOL: f64 = 1e-6;

fn decomp_options() -> DecompOptions {
    DecompOptions { rank_tol: RANK_TOL, hyp_tol: 1e-4, merge_tol: 1e-6 }
}

/// Frequencies and complex coefficients (rows of `C` with `Y ≈ Σ v(ω_k) c_k^T`)
/// from the big matrix of a column-structure program.
fn line_atoms(x: &CMat, aset: &AtomSet, n: usize) -> Result<(Vec<f64>, Vec<DVector<C64>>), AppError> {
    let d = decompose_psd_with(x, aset, decomp_options())?;
    let mut omegas = Vec::with_capacity(d.len());
    let mut coefs = Vec::with_capacity(d.len());
    for (atom, p) in d.atoms.iter().zip(&d.points) {
        let w = p.omega();
        let v = vandermonde(n, w);
        let a = atom.rows(0, n);
        let b = atom.rows(n, atom.len() - n);
        let alpha = v.dotc(&a) / c(n as f64, 0.0);
        // a b^H = α v b^H, so the row coefficients are α conj(b).
        let coef: DVector<C64> = b.map(|z| alpha * z.conj());
        omegas.push(w);
        coefs.push(coef);
    }
    Ok((omegas, coefs))
}

/// `min γ‖tI + X − R‖₂ + tr(X)/n` over PSD Toeplitz `X`, `t ≥ 0`.
pub fn covfit(r_m: &CMat, gamma: f64, settings: &Settings) -> Result<RecoveryResult, AppError> {
    let n = r_m.nrows();
    if r_m.ncols() != n || n < 2 {
        return Err(bad("R_m must be square of order >= 2"));
    }
    if (r_m - r_m.adjoint()).norm() > 1e-9 * (1.0 + r_m.norm()) {
        return Err(bad("R_m must be Hermitian"));
    }
    let aset = toeplitz_aset(n, CurveKind::UnitCircle)?;
    let loss = LossSpec::SpectralNormEpigraph { target: r_m.clone(), gamma };
    let prog = build_symmetric(&aset, &loss, true)?;
    let sol = prog.solve(settings)?;
    check_solution(&sol)?;
    let x = &prog.x_blocks(&sol)[0];
    let d = decompose_psd_with(x, &aset, decomp_options())?;
    // Atom a = √p v(ω) has ‖a‖² = n p.
    let est = Estimate {
        omegas: d.points.iter().map(|p| p.omega()).collect(),
        magnitudes: d.weights.iter().map(|w| (w / n as f64).sqrt()).collect(),
        thetas: None,
        sectors: None,
    };
    let mut res = RecoveryResult::new(est, &sol);
    res.noise_estimate = prog.noise(&sol);
    res.certificate = extract_certificate(&prog, &sol).ok();
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HuberVariant {
    Vector,
    HankelMatrix { n1: usize, n2: usize },
}

/// Huber-penalized line-spectrum fit with frequencies restricted to `|ω| ≤ ω_c`.
pub fn linespec_huber(
    y_m: &[C64],
    gamma: f64,
    delta: f64,
    omega_c: f64,
    variant: HuberVariant,
    settings: &Settings,
) -> Result<RecoveryResult, AppError> {
    let n = y_m.len();
    if n < 2 {
        return Err(bad("need at least two samples"));
    }
    if !(omega_c > 0.0 && omega_c <= PI) {
        return Err(bad("omega_c must lie in (0, pi]"));
    }
    let curve = arc_or_circle(omega_c);
    let (prog, aset, n1) = match variant {
        HuberVariant::Vector => {
            let aset = line_aset(n, 1, curve)?;
            let target = CMat::from_column_slice(n, 1, y_m);
            let prog = build_nonsymmetric(&aset, &LossSpec::Huber { target, gamma, delta })?;
            (prog, aset, n)
        }
        HuberVariant::HankelMatrix { n1, n2 } => {
            if n1 < 2 || n2 < 2 || n1 + n2 - 1 != n {
                return Err(bad(format!("Hankel sizes {n1} + {n2} - 1 must equal {n}")));
            }
            let pen = standard_pencil(&Family::HankelBlock { n1, n2 })?;
            let aset = AtomSet::new(pen, make_curve(curve)?)?;
            let prog = build_nonsymmetric_hankel(&aset, &LossSpec::Huber {
                target: CMat::from_column_slice(n, 1, y_m),
                gamma,
                delta,
            })?;
            (prog, aset, n1)
        }
    };
    let sol = prog.solve(settings)?;
    check_solution(&sol)?;
    let x = &prog.x_blocks(&sol)[0];
    let ymat = prog.y_sum(&sol)?;
    let signal: Vec<C64> = match variant {
        HuberVariant::Vector => ymat.column(0).iter().copied().collect(),
        HuberVariant::HankelMatrix { n1, n2 } => {
            debug_assert_eq!(n1 + n2 - 1, n);
            (0..n).map(|k| if k < n2 { ymat[(0, k)] } else { ymat[(k - n2 + 1, n2 - 1)] }).collect()
        }
    };
    let (omegas, magnitudes) = match variant {
        HuberVariant::Vector => {
            let (w, cs) = line_atoms(x, &aset, n1)?;
            (w, cs.iter().map(|v| v.norm()).collect())
        }
        HuberVariant::HankelMatrix { n1, n2 } => {
            let d = decompose_psd_with(x, &aset, decomp_options())?;
            let mut w = Vec::new();
            let mut mags = Vec::new();
            for (atom, p) in d.atoms.iter().zip(&d.points) {
                let om = p.omega();
                let va = vandermonde(n1, om);
                let vb = vandermonde(n2, -om);
                let alpha = va.dotc(&atom.rows(0, n1)) / c(n1 as f64, 0.0);
                let beta = vb.dotc(&atom.rows(n1, n2)) / c(n2 as f64, 0.0);
                w.push(om);
                mags.push((alpha * beta.conj()).norm());
            }
            (w, mags)
        }
    };
    let est = Estimate { omegas, magnitudes, thetas: None, sectors: None };
    let mut res = RecoveryResult::new(est, &sol);
    res.signal = Some(signal);
    res.certificate = extract_certificate(&prog, &sol).ok();
    Ok(res)
}

/// Three angular sectors `[−π/2, −π/6)`, `[−π/6, π/6]`, `(π/6, π/2]`; shared
/// endpoints belong to the middle sector.
pub fn sector_of(theta: f64) -> usize {
    if theta.abs() <= FRAC_PI_6 + 1e-12 {
        1
    } else if theta < 0.0 {
        0
    } else {
        2
    }
}

/// Unit-circle arc of `ω = α sin θ` over sector `k`.
pub fn sector_arc(k: usize, alpha: f64) -> CurveKind {
    let (lo, hi) = match k {
        0 => (-FRAC_PI_2, -FRAC_PI_6),
        1 => (-FRAC_PI_6, FRAC_PI_6),
        _ => (FRAC_PI_6, FRAC_PI_2),
    };
    let (w0, w1) = (alpha * lo.sin(), alpha * hi.sin());
    CurveKind::UnitCircleArc { a: 0.5 * (w0 + w1), b: (0.5 * (w1 - w0)).min(PI) }
}

pub fn theta_of(omega: f64, alpha: f64) -> f64 {
    (omega / alpha).clamp(-1.0, 1.0).asin()
}

/// Measurements of a two-group sensor array: group 1 sees sectors 0 and 1,
/// group 2 sees sectors 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaProblem {
    pub n: usize,
    pub alpha: f64,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub b1: Vec<C64>,
    pub b2: Vec<C64>,
    /// Restrict each component to its sector; otherwise all use the full circle.
    pub constrained: bool,
}

fn pins(idx: &[usize], vals: &[C64]) -> LossSpec {
    LossSpec::EqualityOnIndexSet { indices: idx.iter().map(|&i| (i, 0)).collect(), values: vals.to_vec() }
}

/// `min Σ_j ‖y_j‖` subject to `(y₁+y₂)_{I₁} = b₁`, `(y₂+y₃)_{I₂} = b₂`.
pub fn doa_intervals(prob: &DoaProblem, settings: &Settings) -> Result<RecoveryResult, AppError> {
    let n = prob.n;
    if prob.i1.len() != prob.b1.len() || prob.i2.len() != prob.b2.len() {
        return Err(bad("index sets and measurement vectors differ in length"));
    }
    if prob.i1.iter().chain(&prob.i2).any(|&i| i >= n) {
        return Err(bad("measurement index out of range"));
    }
    if !(prob.alpha > 0.0 && prob.alpha <= PI) {
        return Err(bad("alpha must lie in (0, pi]"));
    }
    let asets = (0..3)
        .map(|k| line_aset(n, 1, if prob.constrained { sector_arc(k, prob.alpha) } else { CurveKind::UnitCircle }))
        .collect::<Result<Vec<_>, _>>()?;
    let groups = vec![(vec![0, 1], pins(&prob.i1, &prob.b1)), (vec![1, 2], pins(&prob.i2, &prob.b2))];
    let prog = build_nonsymmetric_groups(&asets, &groups)?;
    let sol = prog.solve(settings)?;
    if sol.status == Status::Infeasible {
        return Err(AppError::Infeasible("measurement equations admit no solution".into()));
    }
    check_solution(&sol)?;
    let xs = prog.x_blocks(&sol);
    let mut omegas = Vec::new();
    let mut mags = Vec::new();
    let mut sectors = Vec::new();
    let mut signal = Vec::new();
    for (k, (x, aset)) in xs.iter().zip(&asets).enumerate() {
        let (w, cs) = line_atoms(x, aset, n)?;
        for (om, cf) in w.into_iter().zip(cs) {
            omegas.push(om);
            mags.push(cf.norm());
            sectors.push(if prob.constrained { k } else { sector_of(theta_of(om, prob.alpha)) });
        }
        signal.extend(prog.vyw(&sol, k)?.1.column(0).iter().copied());
    }
    let thetas = omegas.iter().map(|w| theta_of(*w, prob.alpha)).collect();
    let est = Estimate { omegas, magnitudes: mags, thetas: Some(thetas), sectors: Some(sectors) };
    let mut res = RecoveryResult::new(est, &sol);
    res.signal = Some(signal);
    Ok(res)
}

/// `min Σ‖c_k‖` subject to `Y_I = B`, `|θ_k| ≤ θ_c`, `Y = Σ v(α sin θ_k) c_k^T`.
pub fn doa_mmv(b: &CMat, idx: &[usize], theta_c: f64, alpha: f64, n: usize, settings: &Settings) -> Result<RecoveryResult, AppError> {
    let m = b.ncols();
    if b.nrows() != idx.len() || m == 0 {
        return Err(bad("B must have one row per index and at least one column"));
    }
    if idx.iter().any(|&i| i >= n) {
        return Err(bad("measurement index out of range"));
    }
    if !(theta_c.abs() < FRAC_PI_2) {
        return Err(bad("theta_c must satisfy |theta_c| < pi/2"));
    }
    // Right unitary invariance: solve on the column space of B.
    let (bq, qh, rank) = if b.norm() == 0.0 {
        (CMat::zeros(idx.len(), 1), CMat::zeros(1, m), 0)
    } else {
        let s = svd(b).map_err(GaugeError::from)?;
        let r = s.rank(1e-12).max(1);
        let q = s.q.columns(0, r).into_owned();
        (b * &q, q.adjoint(), r)
    };
    let mr = bq.ncols();
    let omega_c = alpha * theta_c.abs().sin();
    let aset = line_aset(n, mr, arc_or_circle(omega_c))?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (r, &i) in idx.iter().enumerate() {
        for j in 0..mr {
            indices.push((i, j));
            values.push(bq[(r, j)]);
        }
    }
    let prog = build_nonsymmetric(&aset, &LossSpec::EqualityOnIndexSet { indices, values })?;
    let sol = prog.solve(settings)?;
    if sol.status == Status::Infeasible {
        return Err(AppError::Infeasible("measurement equations admit no solution".into()));
    }
    check_solution(&sol)?;
    let x = &prog.x_blocks(&sol)[0];
    let (omegas, coefs) = if rank == 0 { (vec![], vec![]) } else { line_atoms(x, &aset, n)? };
    let sm = (m as f64).sqrt();
    let est = Estimate {
        thetas: Some(omegas.iter().map(|w| theta_of(*w, alpha)).collect()),
        magnitudes: coefs.iter().map(|cf| cf.norm() / sm).collect(),
        omegas,
        sectors: None,
    };
    let mut res = RecoveryResult::new(est, &sol);
    let y = prog.y_sum(&sol)? * &qh;
    res.signal = Some(y.iter().copied().collect());
    if let Ok(mut cert) = extract_certificate(&prog, &sol) {
        cert.z = &cert.z * &qh;
        res.certificate = Some(cert);
    }
    Ok(res)
}

/// Certificate functional `‖Z^H v(ω)‖/‖E₁v(ω)‖` of an MMV result on a grid.
pub fn mmv_dual_polynomial(res: &RecoveryResult, n: usize, omegas: &[f64]) -> Result<Vec<f64>, AppError> {
    let cert = res.certificate.as_ref().ok_or_else(|| bad("result carries no certificate"))?;
    let aset = line_aset(n, cert.z.ncols(), CurveKind::UnitCircle)?;
    Ok(dual_polynomial(cert, &aset, omegas)?)
}

/// Sensor-subset array with `sensors` of `n` grid positions and sources of
/// constant magnitude whose phases vary per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmvConfig {
    pub n: usize,
    pub sensors: usize,
    /// Source angles in radians.
    pub sources: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub alpha: f64,
    pub theta_c: f64,
    pub snapshots: Vec<usize>,
    pub trials: usize,
    /// Standard deviation of additive complex Gaussian noise on `B`.
    #[serde(default)]
    pub noise: f64,
}

impl MmvConfig {
    fn validate(&self) -> Result<(), AppError> {
        if self.sensors == 0 || self.sensors > self.n {
            return Err(bad("sensors must lie in 1..=n"));
        }
        if self.sources.len() != self.magnitudes.len() {
            return Err(bad("sources and magnitudes differ in length"));
        }
        if self.sources.iter().any(|t| t.abs() > self.theta_c.abs()) {
            return Err(bad("every source must satisfy |theta| <= theta_c"));
        }
        if self.snapshots.is_empty() || self.snapshots.contains(&0) {
            return Err(bad("snapshot counts must be positive"));
        }
        if !(self.noise >= 0.0) {
            return Err(bad("noise must be nonnegative"));
        }
        Ok(())
    }
}

/// Sensor indices and the first `m` measurement vectors of a seeded instance.
/// Instances with the same seed share sensors and leading snapshots.
pub fn mmv_instance(cfg: &MmvConfig, m: usize, seed: u64) -> Result<(Vec<usize>, CMat), AppError> {
    cfg.validate()?;
    if m == 0 {
        return Err(bad("need at least one snapshot"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, cfg.n, cfg.sensors).into_vec();
    idx.sort_unstable();
    let total = cfg.snapshots.iter().copied().max().unwrap_or(0).max(m);
    let phases: Vec<Vec<f64>> = (0..total).map(|_| cfg.sources.iter().map(|_| rng.random_range(-PI..PI)).collect()).collect();
    let noise: Vec<Vec<C64>> = (0..total).map(|_| idx.iter().map(|_| cgauss(&mut rng, cfg.noise)).collect()).collect();
    let b = CMat::from_fn(idx.len(), m, |r, t| {
        let pos = idx[r] as f64;
        let clean: C64 = cfg
            .sources
            .iter()
            .zip(&cfg.magnitudes)
            .zip(&phases[t])
            .map(|((th, mag), ph)| C64::from_polar(*mag, cfg.alpha * th.sin() * pos + ph))
            .sum();
        clean + noise[t][r]
    });
    Ok((idx, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmvRow {
    pub snapshots: usize,
    pub rate: f64,
}

/// Exact-recovery rate per snapshot count over seeded trials.
pub fn mmv_rate(cfg: &MmvConfig, seed: u64, settings: &Settings) -> Result<Vec<MmvRow>, AppError> {
    cfg.validate()?;
    if cfg.trials == 0 {
        return Err(bad("trials must be at least 1"));
    }
    let mut rows = Vec::new();
    for &m in &cfg.snapshots {
        let mut hits = 0usize;
        for t in 0..cfg.trials {
            let (idx, b) = mmv_instance(cfg, m, derive_seed(seed, 0, t as u64))?;
            if let Ok(r) = doa_mmv(&b, &idx, cfg.theta_c, cfg.alpha, cfg.n, settings) {
                if exact_recovery(&r, &cfg.sources, 1e-3) {
                    hits += 1;
                }
            }
        }
        rows.push(MmvRow { snapshots: m, rate: hits as f64 / cfg.trials as f64 });
    }
    Ok(rows)
}

/// Frequencies and coefficients by the matrix pencil method on an `l×(n−l+1)`
/// Hankel matrix truncated to rank `r`.
pub fn matrix_pencil(y: &[C64], l: usize, r: usize) -> Result<Vec<(f64, C64)>, AppError> {
    let n = y.len();
    if l < 2 || l >= n || r == 0 || r > l.min(n - l + 1) - 1 {
        return Err(bad("invalid pencil parameters"));
    }
    let h = CMat::from_fn(l, n - l + 1, |i, j| y[i + j]);
    let s = svd(&h).map_err(GaugeError::from)?;
    let u = s.p.columns(0, r).into_owned();
    let u1 = u.rows(0, l - 1).into_owned();
    let u2 = u.rows(1, l - 1).into_owned();
    let s1 = svd(&u1).map_err(GaugeError::from)?;
    let inv: Vec<f64> = s1.sigma.iter().map(|x| 1.0 / x).collect();
    let pinv = s1.q.columns(0, r) * crate::numkern::diag_real(&inv) * s1.p.columns(0, r).adjoint();
    let phi = pinv * u2;
    let (_, t) = nalgebra::Schur::new(phi).unpack();
    let mut omegas: Vec<f64> = t.diagonal().iter().map(|z| z.arg()).collect();
    omegas.sort_by(f64::total_cmp);
    let a = CMat::from_fn(n, r, |t, k| C64::from_polar(1.0, omegas[k] * t as f64));
    let yv = CMat::from_column_slice(n, 1, y);
    let coef = a.svd(true, true).solve(&yv, 1e-12).map_err(bad)?;
    Ok(omegas.into_iter().enumerate().map(|(k, w)| (w, coef[(k, 0)])).collect())
}

// ---------------------------------------------------------------------------
// Recovery-rate experiment.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub n: usize,
    /// Source angles in radians.
    pub sources: Vec<f64>,
    pub measurement_counts: Vec<usize>,
    pub trials: usize,
    /// Also run the sector-constrained program.
    #[serde(default = "yes")]
    pub with_intervals: bool,
    #[serde(default = "pi")]
    pub alpha: f64,
}

fn yes() -> bool {
    true
}

fn pi() -> f64 {
    PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub measurement_count: usize,
    pub rate_with: Option<f64>,
    pub rate_without: f64,
}

/// Independent seed for trial `t` of case `k`.
pub fn derive_seed(master: u64, k: u64, t: u64) -> u64 {
    let mut z = master ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ t.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One random instance: coefficients with magnitudes in `[1, 2]`, disjoint
/// random sensor groups of sizes `⌈count/2⌉` and `⌊count/2⌋`.
pub fn doa_instance(cfg: &RateConfig, count: usize, seed: u64) -> Result<(DoaProblem, Vec<f64>), AppError> {
    let n = cfg.n;
    if count > n || count < 2 {
        return Err(bad(format!("measurement count {count} must lie in 2..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<C64> =
        cfg.sources.iter().map(|_| C64::from_polar(rng.random_range(1.0..2.0), rng.random_range(-PI..PI))).collect();
    let comps: Vec<Vec<C64>> = (0..3)
        .map(|k| {
            (0..n)
                .map(|t| {
                    cfg.sources
                        .iter()
                        .zip(&coeffs)
                        .filter(|(th, _)| sector_of(**th) == k)
                        .map(|(th, ck)| ck * C64::from_polar(1.0, cfg.alpha * th.sin() * t as f64))
                        .sum()
                })
                .collect()
        })
        .collect();
    let idx = sample(&mut rng, n, count).into_vec();
    let h = count.div_ceil(2);
    let mut i1 = idx[..h].to_vec();
    let mut i2 = idx[h..].to_vec();
    i1.sort_unstable();
    i2.sort_unstable();
    let b1 = i1.iter().map(|&i| comps[0][i] + comps[1][i]).collect();
    let b2 = i2.iter().map(|&i| comps[1][i] + comps[2][i]).collect();
    let prob = DoaProblem { n, alpha: cfg.alpha, i1, i2, b1, b2, constrained: true };
    Ok((prob, cfg.sources.clone()))
}

/// Exact recovery: every true angle matched within `tol` and no other atom
/// (after merging coincident ones) with magnitude above `tol`.
pub fn exact_recovery(res: &RecoveryResult, truth_thetas: &[f64], tol: f64) -> bool {
    let thetas = res.estimated.thetas.clone().unwrap_or_else(|| res.estimated.omegas.clone());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (t, m) in thetas.iter().zip(&res.estimated.magnitudes) {
        match merged.iter_mut().find(|(u, _)| (u - t).abs() < 1e-6) {
            Some(e) => e.1 += m,
            None => merged.push((*t, *m)),
        }
    }
    let big: Vec<(f64, f64)> = merged.into_iter().filter(|(_, m)| *m > tol).collect();
    let est: Vec<f64> = big.iter().map(|(t, _)| *t).collect();
    let matched = match_atoms(truth_thetas, &est, tol);
    matched.len() == truth_thetas.len() && big.len() == truth_thetas.len()
}

/// Per measurement count, fraction of exact recoveries with and without
/// sector constraints.
pub fn recovery_rate(cfg: &RateConfig, seed: u64, settings: &Settings) -> Result<Vec<RateRow>, AppError> {
    if cfg.trials == 0 {
        return Err(bad("trials must be at least 1"));
    }
    let mut rows = Vec::with_capacity(cfg.measurement_counts.len());
    for (k, &count) in cfg.measurement_counts.iter().enumerate() {
        let mut hits_with = 0usize;
        let mut hits_without = 0usize;
        for t in 0..cfg.trials {
            let (mut prob, truth) = doa_instance(cfg, count, derive_seed(seed, k as u64, t as u64))?;
            let ok = |p: &DoaProblem| match doa_intervals(p, settings) {
                Ok(r) => exact_recovery(&r, &truth, 1e-3),
                Err(_) => false,
            };
            if cfg.with_intervals && ok(&prob) {
                hits_with += 1;
            }
            prob.constrained = false;
            if ok(&prob) {
                hits_without += 1;
            }
        }
        let tr = cfg.trials as f64;
        rows.push(RateRow {
            measurement_count: count,
            rate_with: cfg.with_intervals.then(|| hits_with as f64 / tr),
            rate_without: hits_without as f64 / tr,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_pencil_recovers_noiseless_lines() {
        let model = LineSpectrumModel { omegas: vec![-1.2, 0.4, 2.0], coeffs: vec![c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 1.5)], sigma: 0.0 };
        let y = synth_signal(&model, 24, None, 0).unwrap();
        let est = matrix_pencil(&y, 10, 3).unwrap();
        for (w, ck) in model.omegas.iter().zip(&model.coeffs) {
            let (we, ce) = est.iter().min_by(|a, b| wrap_dist(a.0, *w).total_cmp(&wrap_dist(b.0, *w))).unwrap();
            assert!(wrap_dist(*we, *w) < 1e-9);
            assert!((ce - ck).norm() < 1e-8);
        }
    }

    #[test]
    fn sectors_close_the_middle() {
        assert_eq!(sector_of(-FRAC_PI_6), 1);
        assert_eq!(sector_of(FRAC_PI_6), 1);
        assert_eq!(sector_of(-FRAC_PI_6 - 1e-6), 0);
        assert_eq!(sector_of(FRAC_PI_6 + 1e-6), 2);
        let CurveKind::UnitCircleArc { a, b } = sector_arc(1, PI) else { panic!("arc expected") };
        assert!(a.abs() < 1e-15 && (b - PI * 0.5).abs() < 1e-12);
    }

    #[test]
    fn seeds_and_instances_are_reproducible() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        let cfg = MmvConfig {
            n: 20,
            sensors: 6,
            sources: vec![-0.3, 0.4],
            magnitudes: vec![1.0, 1.0],
            alpha: 2.0,
            theta_c: 0.8,
            snapshots: vec![2, 5],
            trials: 1,
            noise: 0.1,
        };
        let (i2, b2) = mmv_instance(&cfg, 2, 7).unwrap();
        let (i5, b5) = mmv_instance(&cfg, 5, 7).unwrap();
        assert_eq!(i2, i5);
        assert_eq!(b2, b5.columns(0, 2).into_owned());
    }

    #[test]
    fn pure_tone_covariance_has_rank_one() {
        let model = LineSpectrumModel { omegas: vec![0.9], coeffs: vec![c(2.0, 0.0)], sigma: 0.0 };
        let y = synth_signal(&model, 30, None, 0).unwrap();
        let r = sample_covariance(&y, 8).unwrap();
        let v = vandermonde(8, 0.9);
        assert!((&r - &v * v.adjoint() * c(4.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn exact_recovery_rejects_spurious_mass() {
        let est = |w: Vec<f64>, m: Vec<f64>| {
            let sol = ConicSolution {
                x: vec![],
                y: vec![],
                s: vec![],
                status: Status::Optimal,
                primal_obj: 0.0,
                dual_obj: 0.0,
                residuals: Default::default(),
                iterations: 0,
            };
            RecoveryResult::new(Estimate { omegas: w, magnitudes: m, thetas: None, sectors: None }, &sol)
        };
        assert!(exact_recovery(&est(vec![0.1, 0.5], vec![1.0, 1.0]), &[0.1, 0.5], 1e-3));
        assert!(exact_recovery(&est(vec![0.1, 0.5, 1.0], vec![1.0, 1.0, 1e-4]), &[0.1, 0.5], 1e-3));
        assert!(!exact_recovery(&est(vec![0.1, 0.5, 1.0], vec![1.0, 1.0, 0.1]), &[0.1, 0.5], 1e-3));
        assert!(!exact_recovery(&est(vec![0.1, 0.502], vec![1.0, 1.0]), &[0.1, 0.5], 1e-3));
    }
}
