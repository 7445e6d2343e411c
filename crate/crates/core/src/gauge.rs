//! Gauge and atomic-norm programs over pencil-parameterized atom sets.
//!
//! A symmetric program minimizes `f(X [+ tI]) + tr(EXE^H)` over PSD `X`
//! satisfying `Eq(X) = 0`, `Ineq(X) ⪯ 0`. A non-symmetric program works on
//! `X = [V Y; Y^H W]` with a block pencil, the loss acting on `Y` and the
//! objective `(tr(E₁VE₁^H) + tr(E₂WE₂^H))/2`. Several non-symmetric
//! components can share one loss on the sum of their `Y` blocks.
//!
//! Dual certificates `(Z, P, Q)` satisfy
//! `Z − [F;G]^H(Φ⊗P + Ψ⊗Q)[F;G] ⪯ E^HE`, `Q ⪰ 0`.

use crate::conic::{self, hmat, hvec, hvec_entry, Cone, ConicProblem, ConicSolution, Settings, SparseMatrix, Status};
use crate::numkern::{self, c, cmat_serde, eye, frob, herm_eig, nullspace, svd, CMat, NumError, C64};
use crate::pencil::{apply_form_adjoint, atom_basis, lmi_maps, rank_condition, AtomSet, PencilError, PencilSpec, RankCheck};
use crate::region::{self, phi_u, sample_interior, CurveClass, CurveSpec, HForm2, HomPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("invalid loss: {0}")]
    BadLoss(String),
    #[error("pencil has no block structure")]
    MissingBlock,
    #[error("solver finished with status {0:?}")]
    NotOptimal(Status),
    #[error("certificate verification failed: LMI excess {lmi:.3e}, Q min eigenvalue {q_min:.3e}")]
    Certificate { lmi: f64, q_min: f64 },
    #[error("nullspace at omega = {omega} has dimension {dim}")]
    NullspaceDim { omega: f64, dim: usize },
    #[error("eigenvalue of A on the curve near lambda = {0}")]
    EigenOnCurve(C64),
    #[error(transparent)]
    Pencil(#[from] PencilError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error(transparent)]
    Num(#[from] NumError),
}

// ---------------------------------------------------------------------------
// Affine expressions over real decision variables.

#[derive(Debug, Clone, Default)]
struct CExpr {
    terms: Vec<(usize, C64)>,
    constant: C64,
}

#[derive(Debug, Clone, Default)]
struct Aff {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl CExpr {
    fn constant(z: C64) -> Self {
        CExpr { terms: vec![], constant: z }
    }

    fn from_terms(terms: Vec<(usize, C64)>) -> Self {
        CExpr { terms, constant: c(0.0, 0.0) }
    }

    fn add(&mut self, other: &CExpr, s: C64) {
        self.terms.extend(other.terms.iter().map(|&(k, a)| (k, a * s)));
        self.constant += other.constant * s;
    }

    fn scaled(&self, s: C64) -> CExpr {
        let mut e = CExpr::default();
        e.add(self, s);
        e
    }

    fn conj(&self) -> CExpr {
        CExpr { terms: self.terms.iter().map(|&(k, a)| (k, a.conj())).collect(), constant: self.constant.conj() }
    }

    fn tidy(mut self) -> CExpr {
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        for (k, a) in self.terms.drain(..) {
            *acc.entry(k).or_insert(c(0.0, 0.0)) += a;
        }
        self.terms = acc.into_iter().filter(|(_, a)| a.norm() > 0.0).collect();
        self
    }

    fn re(&self) -> Aff {
        aff(self.terms.iter().map(|&(k, a)| (k, a.re)), self.constant.re)
    }

    fn im(&self) -> Aff {
        aff(self.terms.iter().map(|&(k, a)| (k, a.im)), self.constant.im)
    }
}

fn aff(terms: impl Iterator<Item = (usize, f64)>, constant: f64) -> Aff {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, a) in terms {
        *acc.entry(k).or_insert(0.0) += a;
    }
    Aff { terms: acc.into_iter().filter(|(_, a)| *a != 0.0).collect(), constant }
}

impl Aff {
    fn var(k: usize) -> Aff {
        Aff { terms: vec![(k, 1.0)], constant: 0.0 }
    }

    fn is_trivial(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    fn plus(mut self, other: &Aff, s: f64) -> Aff {
        self.terms.extend(other.terms.iter().map(|&(k, a)| (k, a * s)));
        self.constant += other.constant * s;
        aff(self.terms.into_iter(), self.constant)
    }

    fn shift(mut self, d: f64) -> Aff {
        self.constant += d;
        self
    }

    fn scale(self, s: f64) -> Aff {
        Aff { terms: self.terms.into_iter().map(|(k, a)| (k, a * s)).collect(), constant: self.constant * s }
    }
}

/// Dense matrix of complex affine expressions, row-major.
#[derive(Debug, Clone)]
struct MatExpr {
    rows: usize,
    cols: usize,
    e: Vec<CExpr>,
}

impl MatExpr {
    fn zeros(rows: usize, cols: usize) -> Self {
        MatExpr { rows, cols, e: vec![CExpr::default(); rows * cols] }
    }

    fn get(&self, i: usize, j: usize) -> &CExpr {
        &self.e[i * self.cols + j]
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut CExpr {
        &mut self.e[i * self.cols + j]
    }
}

/// Hermitian matrix variable stored as [`hvec`] coordinates from `start`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct HermVar {
    start: usize,
    n: usize,
}

impl HermVar {
    fn entry(&self, i: usize, j: usize) -> CExpr {
        CExpr::from_terms(hvec_entry(self.n, i, j).into_iter().map(|(k, a)| (k + self.start, a)).collect())
    }

    fn matrix(&self) -> MatExpr {
        let mut m = MatExpr::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                *m.get_mut(i, j) = self.entry(i, j);
            }
        }
        m
    }
}

#[derive(Debug, Default)]
struct Model {
    c: Vec<f64>,
    trip: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl Model {
    fn nrows(&self) -> usize {
        self.b.len()
    }

    fn new_vars(&mut self, k: usize) -> usize {
        let s = self.c.len();
        self.c.resize(s + k, 0.0);
        s
    }

    fn herm(&mut self, n: usize) -> HermVar {
        HermVar { start: self.new_vars(n * n), n }
    }

    /// Rows `s = expr` constrained to `cone`.
    fn block(&mut self, cone: Cone, rows: Vec<Aff>) {
        debug_assert_eq!(cone.rows(), rows.len());
        for row in rows {
            let r = self.b.len();
            for (k, a) in row.terms {
                self.trip.push((r, k, -a));
            }
            self.b.push(row.constant);
        }
        self.cones.push(cone);
    }

    /// Hermitian expression matrix constrained PSD through its real embedding.
    fn psd(&mut self, m: &MatExpr) {
        let k = m.rows;
        let herm = |i: usize, j: usize| if i >= j { m.get(i, j).clone() } else { m.get(j, i).conj() };
        let nn = 2 * k;
        let mut rows = Vec::with_capacity(nn * (nn + 1) / 2);
        for j in 0..nn {
            for i in j..nn {
                let e = herm(i % k, j % k);
                let v = match (i / k, j / k) {
                    (0, 0) | (1, 1) => e.re(),
                    (1, 0) => e.im(),
                    _ => e.im().scale(-1.0),
                };
                rows.push(if i == j { v.scale(1.0 / SQRT_2) } else { v });
            }
        }
        self.block(Cone::Psd(nn), rows);
    }

    fn finish(self) -> ConicProblem {
        let (m, n) = (self.b.len(), self.c.len());
        ConicProblem {
            c: self.c,
            a: SparseMatrix { nrows: m, ncols: n, triplets: self.trip },
            b: self.b,
            cones: self.cones,
            objective_offset: 0.0,
        }
    }
}

fn sparse_cols(m: &CMat) -> Vec<Vec<(usize, C64)>> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).filter(|&i| m[(i, j)] != c(0.0, 0.0)).map(|i| (i, m[(i, j)])).collect())
        .collect()
}

/// Lower triangle of `Θ11 FXF^H + Θ21 FXG^H + Θ12 GXF^H + Θ22 GXG^H`.
fn form_expr(theta: &HForm2, f: &CMat, g: &CMat, x: &HermVar) -> MatExpr {
    let p = f.nrows();
    let n = x.n;
    let cols = [sparse_cols(f), sparse_cols(g)];
    let coef = [[theta.get(0, 0), theta.get(1, 0)], [theta.get(0, 1), theta.get(1, 1)]];
    let mut acc: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); p * p];
    for i in 0..n {
        for j in 0..n {
            let xij = hvec_entry(n, i, j);
            for (k, ck) in cols.iter().enumerate() {
                for (l, cl) in cols.iter().enumerate() {
                    let t = coef[k][l];
                    if t == c(0.0, 0.0) {
                        continue;
                    }
                    for &(a, ha) in &ck[i] {
                        for &(b, hb) in &cl[j] {
                            if a < b {
                                continue;
                            }
                            let w = t * ha * hb.conj();
                            let slot = &mut acc[a * p + b];
                            for &(v, cc) in &xij {
                                *slot.entry(v + x.start).or_insert(c(0.0, 0.0)) += w * cc;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut m = MatExpr::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            *m.get_mut(a, b) = CExpr::from_terms(std::mem::take(&mut acc[a * p + b]).into_iter().collect()).tidy();
        }
    }
    m
}

/// `hvec` coordinate rows of a Hermitian expression given by its lower triangle.
fn hvec_rows(m: &MatExpr) -> Vec<Aff> {
    let p = m.rows;
    let mut rows = Vec::with_capacity(p * p);
    for j in 0..p {
        rows.push(m.get(j, j).re());
        for i in j + 1..p {
            rows.push(m.get(i, j).re().scale(SQRT_2));
            rows.push(m.get(i, j).im().scale(SQRT_2));
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Losses.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    SquaredL2 {
        #[serde(with = "cmat_serde")]
        target: CMat,
        gamma: f64,
    },
    SquaredFrobenius {
        #[serde(with = "cmat_serde")]
        target: CMat,
        gamma: f64,
    },
    Huber {
        #[serde(with = "cmat_serde")]
        target: CMat,
        gamma: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    SpectralNormEpigraph {
        #[serde(with = "cmat_serde")]
        target: CMat,
        gamma: f64,
    },
    /// `M[i,j] = value` for each listed entry.
    EqualityOnIndexSet { indices: Vec<(usize, usize)>, values: Vec<C64> },
    None,
}

fn default_delta() -> f64 {
    1.0
}

impl LossSpec {
    fn validate(&self, rows: usize, cols: usize) -> Result<(), GaugeError> {
        let shape = |t: &CMat| {
            if t.shape() == (rows, cols) {
                Ok(())
            } else {
                Err(GaugeError::Dim(format!("loss target is {:?}, variable is {rows}x{cols}", t.shape())))
            }
        };
        let pos = |g: f64, name: &str| {
            if g > 0.0 && g.is_finite() {
                Ok(())
            } else {
                Err(GaugeError::BadLoss(format!("{name} must be positive, got {g}")))
            }
        };
        match self {
            LossSpec::SquaredL2 { target, gamma }
            | LossSpec::SquaredFrobenius { target, gamma }
            | LossSpec::SpectralNormEpigraph { target, gamma } => {
                shape(target)?;
                pos(*gamma, "gamma")
            }
            LossSpec::Huber { target, gamma, delta } => {
                shape(target)?;
                pos(*gamma, "gamma")?;
                pos(*delta, "delta")
            }
            LossSpec::EqualityOnIndexSet { indices, values } => {
                if indices.len() != values.len() {
                    return Err(GaugeError::BadLoss("indices and values differ in length".into()));
                }
                match indices.iter().find(|(i, j)| *i >= rows || *j >= cols) {
                    Some(ij) => Err(GaugeError::BadLoss(format!("index {ij:?} outside {rows}x{cols}"))),
                    None => Ok(()),
                }
            }
            LossSpec::None => Ok(()),
        }
    }
}

/// Emits the loss rows and objective terms for `m` (Hermitian when `herm`).
fn lower_loss(model: &mut Model, loss: &LossSpec, m: &MatExpr, herm: bool) {
    let diff = |target: &CMat| -> Vec<CExpr> {
        let mut out = Vec::with_capacity(m.rows * m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                let mut e = m.get(i, j).clone();
                e.constant -= target[(i, j)];
                out.push(e.tidy());
            }
        }
        out
    };
    match loss {
        LossSpec::SquaredL2 { target, gamma } | LossSpec::SquaredFrobenius { target, gamma } => {
            let u = model.new_vars(1);
            model.c[u] += gamma;
            let mut rows = vec![Aff::var(u).shift(1.0), Aff::var(u).shift(-1.0)];
            for d in diff(target) {
                for part in [d.re(), d.im()] {
                    if !part.is_trivial() {
                        rows.push(part.scale(2.0));
                    }
                }
            }
            let k = rows.len();
            model.block(Cone::Soc(k), rows);
        }
        LossSpec::SpectralNormEpigraph { target, gamma } => {
            let u = model.new_vars(1);
            model.c[u] += gamma;
            let d = diff(target);
            let uid = CExpr::from_terms(vec![(u, c(1.0, 0.0))]);
            if herm {
                for sgn in [1.0, -1.0] {
                    let mut blk = MatExpr::zeros(m.rows, m.rows);
                    for i in 0..m.rows {
                        for j in 0..=i {
                            let mut e = d[i * m.cols + j].scaled(c(-sgn, 0.0));
                            if i == j {
                                e.add(&uid, c(1.0, 0.0));
                            }
                            *blk.get_mut(i, j) = e.tidy();
                        }
                    }
                    model.psd(&blk);
                }
            } else {
                let k = m.rows + m.cols;
                let mut blk = MatExpr::zeros(k, k);
                for i in 0..k {
                    *blk.get_mut(i, i) = uid.clone();
                }
                for i in 0..m.rows {
                    for j in 0..m.cols {
                        *blk.get_mut(m.rows + j, i) = d[i * m.cols + j].conj();
                    }
                }
                model.psd(&blk);
            }
        }
        LossSpec::Huber { target, gamma, delta } => {
            // φ(|d|) = min over d = p + q of |p|² + 2δ|q|.
            for d in diff(target) {
                let v = model.new_vars(4);
                let (pr, pi, sp, tq) = (v, v + 1, v + 2, v + 3);
                model.c[sp] += gamma;
                model.c[tq] += 2.0 * gamma * delta;
                model.block(
                    Cone::Soc(4),
                    vec![
                        Aff::var(sp).shift(1.0),
                        Aff::var(sp).shift(-1.0),
                        Aff::var(pr).scale(2.0),
                        Aff::var(pi).scale(2.0),
                    ],
                );
                model.block(
                    Cone::Soc(3),
                    vec![Aff::var(tq), d.re().plus(&Aff::var(pr), -1.0), d.im().plus(&Aff::var(pi), -1.0)],
                );
            }
        }
        LossSpec::EqualityOnIndexSet { indices, values } => {
            let mut rows = Vec::new();
            for (&(i, j), &val) in indices.iter().zip(values) {
                let mut e = m.get(i, j).clone();
                e.constant -= val;
                let e = e.tidy();
                for part in [e.re(), e.im()] {
                    if !part.is_trivial() {
                        rows.push(part);
                    }
                }
            }
            if !rows.is_empty() {
                let k = rows.len();
                model.block(Cone::Zero(k), rows);
            }
        }
        LossSpec::None => {}
    }
}

// ---------------------------------------------------------------------------
// Programs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    Symmetric,
    NonSymmetric,
}

/// Where one matrix variable and its constraint duals live in the lowered problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMap {
    pub x_start: usize,
    pub n: usize,
    pub eq_rows: (usize, usize),
    pub ineq_rows: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMap {
    pub components: Vec<ComponentMap>,
    pub loss_rows: (usize, usize),
    pub t_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeProgram {
    pub kind: ProgramKind,
    /// One atom set per matrix variable.
    pub asets: Vec<AtomSet>,
    pub losses: Vec<LossTerm>,
    pub y_structure: YStructure,
    pub noise_term: bool,
    pub lowered: ConicProblem,
    pub recovery_map: RecoveryMap,
    /// Rank-condition advisories raised while building.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// A loss applied to the sum of the listed components' variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossTerm {
    pub components: Vec<usize>,
    pub loss: LossSpec,
}

/// How a non-symmetric loss sees `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YStructure {
    /// The loss acts on `Y` itself.
    Plain,
    /// `Y` is constrained Hankel and the loss acts on the vector
    /// `y_k = Y_{ij}`, `i + j = k`, of length `n₁ + n₂ − 1`.
    Hankel,
}

fn advisories(asets: &[AtomSet]) -> Vec<String> {
    asets
        .iter()
        .enumerate()
        .filter_map(|(k, a)| match rank_condition(a, 64, 0) {
            RankCheck::Pass => None,
            RankCheck::FailAt(p) => Some(format!("component {k}: pencil loses row rank near ({}, {})", p.mu, p.nu)),
        })
        .collect()
}

/// Equality, inequality and PSD constraints of one matrix variable.
fn lmi_constraints(model: &mut Model, aset: &AtomSet) -> (HermVar, ComponentMap) {
    let n = aset.n();
    let x = model.herm(n);
    let pencil = &aset.pencil;
    let eq0 = model.nrows();
    if aset.p() > 0 {
        let eq = form_expr(&aset.curve.phi, &pencil.f, &pencil.g, &x);
        let rows = hvec_rows(&eq);
        let k = rows.len();
        model.block(Cone::Zero(k), rows);
    }
    let eq_rows = (eq0, model.nrows());
    let ineq_rows = if aset.curve.inequality_active && aset.p() > 0 {
        let r0 = model.nrows();
        let mut m = form_expr(&aset.curve.psi, &pencil.f, &pencil.g, &x);
        for e in m.e.iter_mut() {
            *e = e.scaled(c(-1.0, 0.0));
        }
        model.psd(&m);
        Some((r0, model.nrows()))
    } else {
        None
    };
    model.psd(&x.matrix());
    (x, ComponentMap { x_start: x.start, n, eq_rows, ineq_rows })
}

/// `min f(X [+ tI]) + tr(EXE^H)` over the LMI-feasible PSD set.
pub fn build_symmetric(aset: &AtomSet, loss: &LossSpec, with_noise_term: bool) -> Result<GaugeProgram, GaugeError> {
    let n = aset.n();
    loss.validate(n, n)?;
    let mut model = Model::default();
    let (x, map) = lmi_constraints(&mut model, aset);
    let ehe = aset.pencil.e.adjoint() * &aset.pencil.e;
    for (k, v) in hvec(&numkern::herm_part(&ehe))?.into_iter().enumerate() {
        model.c[x.start + k] += v;
    }
    let t_index = with_noise_term.then(|| model.new_vars(1));
    let mut m = x.matrix();
    if let Some(t) = t_index {
        for i in 0..n {
            m.get_mut(i, i).terms.push((t, c(1.0, 0.0)));
        }
    }
    let l0 = model.nrows();
    lower_loss(&mut model, loss, &m, true);
    let loss_rows = (l0, model.nrows());
    if let Some(t) = t_index {
        model.block(Cone::NonNeg(1), vec![Aff::var(t)]);
    }
    Ok(GaugeProgram {
        kind: ProgramKind::Symmetric,
        asets: vec![aset.clone()],
        losses: vec![LossTerm { components: vec![0], loss: loss.clone() }],
        y_structure: YStructure::Plain,
        noise_term: with_noise_term,
        lowered: model.finish(),
        recovery_map: RecoveryMap { components: vec![map], loss_rows, t_index },
        warnings: advisories(std::slice::from_ref(aset)),
    })
}

/// Non-symmetric program with the loss on `Y`.
pub fn build_nonsymmetric(aset: &AtomSet, loss: &LossSpec) -> Result<GaugeProgram, GaugeError> {
    build_nonsymmetric_sum(std::slice::from_ref(aset), loss)
}

/// Non-symmetric program over several components with the loss on `Σ_k Y_k`.
pub fn build_nonsymmetric_sum(asets: &[AtomSet], loss: &LossSpec) -> Result<GaugeProgram, GaugeError> {
    build_nonsymmetric_groups(asets, &[((0..asets.len()).collect(), loss.clone())])
}

/// Non-symmetric program whose `Y` is Hankel; `loss` acts on the
/// `(n₁ + n₂ − 1)`-vector read along the first row and last column.
pub fn build_nonsymmetric_hankel(aset: &AtomSet, loss: &LossSpec) -> Result<GaugeProgram, GaugeError> {
    build_nonsymmetric_impl(std::slice::from_ref(aset), &[(vec![0], loss.clone())], YStructure::Hankel)
}

/// Non-symmetric program over several components; each group applies its
/// loss to the sum of the `Y` blocks of the listed components. All
/// components must share the block sizes `(n₁, n₂)`.
pub fn build_nonsymmetric_groups(asets: &[AtomSet], groups: &[(Vec<usize>, LossSpec)]) -> Result<GaugeProgram, GaugeError> {
    build_nonsymmetric_impl(asets, groups, YStructure::Plain)
}

fn build_nonsymmetric_impl(
    asets: &[AtomSet],
    groups: &[(Vec<usize>, LossSpec)],
    structure: YStructure,
) -> Result<GaugeProgram, GaugeError> {
    let first = asets.first().ok_or_else(|| GaugeError::Dim("no components".into()))?;
    let b0 = first.pencil.block.as_ref().ok_or(GaugeError::MissingBlock)?;
    let (n1, n2) = (b0.n1, b0.n2);
    for a in asets {
        let b = a.pencil.block.as_ref().ok_or(GaugeError::MissingBlock)?;
        if (b.n1, b.n2) != (n1, n2) {
            return Err(GaugeError::Dim(format!("component blocks {}x{} differ from {n1}x{n2}", b.n1, b.n2)));
        }
    }
    let (lr, lc) = match structure {
        YStructure::Plain => (n1, n2),
        YStructure::Hankel => (n1 + n2 - 1, 1),
    };
    for (comps, loss) in groups {
        loss.validate(lr, lc)?;
        if comps.is_empty() || comps.iter().any(|&k| k >= asets.len()) {
            return Err(GaugeError::Dim("loss group refers to a missing component".into()));
        }
    }
    let mut model = Model::default();
    let mut maps = Vec::with_capacity(asets.len());
    let mut xs = Vec::with_capacity(asets.len());
    for a in asets {
        let (x, map) = lmi_constraints(&mut model, a);
        let ehe = a.pencil.e.adjoint() * &a.pencil.e;
        for (k, v) in hvec(&numkern::herm_part(&ehe))?.into_iter().enumerate() {
            model.c[x.start + k] += 0.5 * v;
        }
        xs.push(x);
        maps.push(map);
    }
    let l0 = model.nrows();
    for (comps, loss) in groups {
        let mut y = MatExpr::zeros(n1, n2);
        for &k in comps {
            for i in 0..n1 {
                for j in 0..n2 {
                    let e = xs[k].entry(i, n1 + j);
                    y.get_mut(i, j).add(&e, c(1.0, 0.0));
                }
            }
        }
        for e in y.e.iter_mut() {
            *e = std::mem::take(e).tidy();
        }
        let y = match structure {
            YStructure::Plain => y,
            YStructure::Hankel => {
                let mut rows = Vec::new();
                for i in 0..n1.saturating_sub(1) {
                    for j in 1..n2 {
                        let mut d = y.get(i, j).clone();
                        d.add(y.get(i + 1, j - 1), c(-1.0, 0.0));
                        let d = d.tidy();
                        rows.push(d.re());
                        rows.push(d.im());
                    }
                }
                if !rows.is_empty() {
                    let k = rows.len();
                    model.block(Cone::Zero(k), rows);
                }
                let mut v = MatExpr::zeros(lr, 1);
                for k in 0..lr {
                    let (i, j) = if k < n2 { (0, k) } else { (k - n2 + 1, n2 - 1) };
                    *v.get_mut(k, 0) = y.get(i, j).clone();
                }
                v
            }
        };
        lower_loss(&mut model, loss, &y, false);
    }
    let loss_rows = (l0, model.nrows());
    Ok(GaugeProgram {
        kind: ProgramKind::NonSymmetric,
        asets: asets.to_vec(),
        losses: groups.iter().map(|(k, l)| LossTerm { components: k.clone(), loss: l.clone() }).collect(),
        y_structure: structure,
        noise_term: false,
        lowered: model.finish(),
        recovery_map: RecoveryMap { components: maps, loss_rows, t_index: None },
        warnings: advisories(asets),
    })
}

impl GaugeProgram {
    pub fn solve(&self, settings: &Settings) -> Result<ConicSolution, GaugeError> {
        Ok(conic::solve(&self.lowered, settings)?)
    }

    /// Optimal matrix variable of each component.
    pub fn x_blocks(&self, sol: &ConicSolution) -> Vec<CMat> {
        self.recovery_map
            .components
            .iter()
            .map(|m| numkern::herm_part(&hmat(&sol.x[m.x_start..m.x_start + m.n * m.n], m.n)))
            .collect()
    }

    /// `(V, Y, W)` blocks of a non-symmetric component.
    pub fn vyw(&self, sol: &ConicSolution, component: usize) -> Result<(CMat, CMat, CMat), GaugeError> {
        let b = self.asets[component].pencil.block.as_ref().ok_or(GaugeError::MissingBlock)?;
        let x = &self.x_blocks(sol)[component];
        let (n1, n2) = (b.n1, b.n2);
        Ok((
            x.view((0, 0), (n1, n1)).into_owned(),
            x.view((0, n1), (n1, n2)).into_owned(),
            x.view((n1, n1), (n2, n2)).into_owned(),
        ))
    }

    /// `Σ_k Y_k` for non-symmetric programs.
    pub fn y_sum(&self, sol: &ConicSolution) -> Result<CMat, GaugeError> {
        let mut acc: Option<CMat> = None;
        for k in 0..self.asets.len() {
            let y = self.vyw(sol, k)?.1;
            acc = Some(match acc {
                Some(a) => a + y,
                None => y,
            });
        }
        acc.ok_or_else(|| GaugeError::Dim("no components".into()))
    }

    pub fn noise(&self, sol: &ConicSolution) -> Option<f64> {
        self.recovery_map.t_index.map(|t| sol.x[t])
    }
}

// ---------------------------------------------------------------------------
// Gauge values and certificates.

/// `tr(EXE^H)` when `X` is PSD and satisfies the LMI within `tol`; `+∞` otherwise.
pub fn gauge_value(x: &CMat, aset: &AtomSet, tol: f64) -> f64 {
    let n = aset.n();
    if x.shape() != (n, n) || !numkern::all_finite(x) {
        return f64::INFINITY;
    }
    let xs = numkern::herm_part(x);
    let sc = 1.0 + frob(&xs);
    if frob(&(x - &xs)) > tol * sc {
        return f64::INFINITY;
    }
    let Ok(e) = herm_eig(&xs) else { return f64::INFINITY };
    if e.lambda.last().copied().unwrap_or(0.0) < -tol * sc {
        return f64::INFINITY;
    }
    let Ok((eq, ineq)) = lmi_maps(&aset.pencil, &aset.curve, &xs) else { return f64::INFINITY };
    if frob(&eq) > tol * sc {
        return f64::INFINITY;
    }
    if aset.curve.inequality_active && aset.p() > 0 {
        match herm_eig(&ineq) {
            Ok(ei) if ei.lambda[0] <= tol * sc => {}
            _ => return f64::INFINITY,
        }
    }
    let ex = &aset.pencil.e * &xs * aset.pencil.e.adjoint();
    ex.trace().re
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// `n×n` for symmetric programs; the `n₁×n₂` block for non-symmetric ones.
    #[serde(rename = "Z", with = "cmat_serde")]
    pub z: CMat,
    #[serde(rename = "P", with = "cmat_serde")]
    pub p: CMat,
    #[serde(rename = "Q", with = "cmat_serde")]
    pub q: CMat,
}

fn is_nonsymmetric(cert: &DualCertificate, aset: &AtomSet) -> bool {
    match &aset.pencil.block {
        Some(b) => cert.z.shape() == (b.n1, b.n2),
        None => false,
    }
}

/// `Z` as an `n×n` matrix: itself, or `[0 Z; Z^H 0]`.
fn z_full(cert: &DualCertificate, aset: &AtomSet) -> CMat {
    if is_nonsymmetric(cert, aset) {
        let (n1, n2) = cert.z.shape();
        let mut m = CMat::zeros(n1 + n2, n1 + n2);
        m.view_mut((0, n1), (n1, n2)).copy_from(&cert.z);
        m.view_mut((n1, 0), (n2, n1)).copy_from(&cert.z.adjoint());
        m
    } else {
        cert.z.clone()
    }
}

/// `Z − [F;G]^H(Φ⊗P + Ψ⊗Q)[F;G] − E^HE` and `λmin(Q)`.
pub fn certificate_lmi(cert: &DualCertificate, aset: &AtomSet) -> Result<(CMat, f64), GaugeError> {
    let n = aset.n();
    let p = aset.p();
    let zf = z_full(cert, aset);
    if zf.shape() != (n, n) || cert.p.shape() != (p, p) || cert.q.shape() != (p, p) {
        return Err(GaugeError::Dim("certificate blocks do not match the pencil".into()));
    }
    let pen = &aset.pencil;
    let mut m = zf - pen.e.adjoint() * &pen.e;
    if p > 0 {
        m -= apply_form_adjoint(&aset.curve.phi, &pen.f, &pen.g, &cert.p);
        if aset.curve.inequality_active {
            m -= apply_form_adjoint(&aset.curve.psi, &pen.f, &pen.g, &cert.q);
        }
    }
    let q_min = if p > 0 { herm_eig(&cert.q)?.lambda.last().copied().unwrap_or(0.0) } else { 0.0 };
    Ok((numkern::herm_part(&m), q_min))
}

/// Certificates of every component, verified.
pub fn extract_certificates(prog: &GaugeProgram, sol: &ConicSolution) -> Result<Vec<DualCertificate>, GaugeError> {
    if sol.status != Status::Optimal {
        return Err(GaugeError::NotOptimal(sol.status));
    }
    let (l0, l1) = prog.recovery_map.loss_rows;
    let sym = prog.kind == ProgramKind::Symmetric;
    let mut out = Vec::with_capacity(prog.asets.len());
    for (aset, map) in prog.asets.iter().zip(&prog.recovery_map.components) {
        let nn = map.n * map.n;
        let mut l = vec![0.0; nn];
        for &(r, col, v) in &prog.lowered.a.triplets {
            if r >= l0 && r < l1 && col >= map.x_start && col < map.x_start + nn {
                l[col - map.x_start] += v * sol.y[r];
            }
        }
        let p = aset.p();
        let pmat = if p > 0 { hmat(&sol.y[map.eq_rows.0..map.eq_rows.1], p) } else { CMat::zeros(0, 0) };
        let qmat = match map.ineq_rows {
            Some((a, b)) => conic::embed_adjoint(&sol.y[a..b], p),
            None => CMat::zeros(p, p),
        };
        let scale = if sym { 1.0 } else { 2.0 };
        let zbig = hmat(&l, map.n) * c(-scale, 0.0);
        let z = if sym {
            zbig
        } else {
            let b = aset.pencil.block.as_ref().ok_or(GaugeError::MissingBlock)?;
            zbig.view((0, b.n1), (b.n1, b.n2)).into_owned()
        };
        let cert = DualCertificate { z, p: pmat * c(-scale, 0.0), q: qmat * c(scale, 0.0) };
        let (m, q_min) = certificate_lmi(&cert, aset)?;
        let lmi = herm_eig(&m)?.lambda.first().copied().unwrap_or(0.0);
        let zn = frob(&z_full(&cert, aset));
        let qn = frob(&cert.q);
        if lmi > 1e-6 * (1.0 + zn) || q_min < -1e-8 * (1.0 + qn) {
            return Err(GaugeError::Certificate { lmi, q_min });
        }
        out.push(cert);
    }
    Ok(out)
}

/// Certificate of the first component.
pub fn extract_certificate(prog: &GaugeProgram, sol: &ConicSolution) -> Result<DualCertificate, GaugeError> {
    Ok(extract_certificates(prog, sol)?.swap_remove(0))
}

fn is_unit_circle(phi: &HForm2) -> bool {
    let s = phi.get(0, 0).re;
    s > 0.0 && (phi.0 - phi_u().0 * c(s, 0.0)).norm() <= 1e-12 * s
}

fn wrap(w: f64) -> f64 {
    let r = (w + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI + 1e-15 {
        PI
    } else {
        r
    }
}

/// Evaluation grid on the curve: uniform in `ω` on the unit circle and its
/// arcs (endpoints included, `k` points per full turn), otherwise uniform in
/// the canonical parameter.
pub fn curve_grid(curve: &CurveSpec, k: usize) -> Vec<HomPoint> {
    let k = k.max(2);
    let Ok(can) = region::canonicalize(curve) else { return vec![] };
    let class = can.class(curve.inequality_active);
    match class {
        CurveClass::Empty => vec![],
        CurveClass::Singleton => region::singleton_point(curve).into_iter().collect(),
        CurveClass::FullCurve if is_unit_circle(&curve.phi) => {
            (0..k).map(|j| HomPoint::on_circle(wrap(-PI + 2.0 * PI * j as f64 / k as f64))).collect()
        }
        CurveClass::FullCurve => sample_interior(curve, k, 0).unwrap_or_default(),
        CurveClass::Segment => {
            let rho = (-can.gamma / can.alpha).sqrt();
            let ends: Vec<HomPoint> =
                [-1.0, 0.0, 1.0].iter().filter_map(|&s| can.to_original(c(0.0, rho * s), c(1.0, 0.0)).ok()).collect();
            if ends.len() == 3 && is_unit_circle(&curve.phi) {
                let (w0, wm, w1) = (ends[0].omega(), ends[1].omega(), ends[2].omega());
                // Arc from w0 to w1 passing through wm.
                let ccw = (wm - w0).rem_euclid(2.0 * PI) <= (w1 - w0).rem_euclid(2.0 * PI);
                let len = if ccw { (w1 - w0).rem_euclid(2.0 * PI) } else { -(w0 - w1).rem_euclid(2.0 * PI) };
                let m = ((k as f64 * len.abs() / (2.0 * PI)).ceil() as usize).max(2) + 1;
                (0..m).map(|j| HomPoint::on_circle(wrap(w0 + len * j as f64 / (m - 1) as f64))).collect()
            } else {
                (0..k)
                    .filter_map(|j| {
                        let s = -1.0 + 2.0 * j as f64 / (k - 1) as f64;
                        can.to_original(c(0.0, rho * s), c(1.0, 0.0)).ok()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub max_violation: f64,
    pub active_points: Vec<HomPoint>,
    /// Grid point attaining `max_violation`.
    pub worst_point: Option<HomPoint>,
}

/// Largest value of `λmax(B^H (Z − E^HE) B)` over orthonormal atom bases `B`
/// on the grid (halved for non-symmetric certificates).
pub fn certificate_check(cert: &DualCertificate, aset: &AtomSet, grid_size: usize) -> Result<CertReport, GaugeError> {
    let n = aset.n();
    let zf = z_full(cert, aset);
    if zf.shape() != (n, n) {
        return Err(GaugeError::Dim(format!("Z does not match n = {n}")));
    }
    let ehe = aset.pencil.e.adjoint() * &aset.pencil.e;
    let half = if is_nonsymmetric(cert, aset) { 0.5 } else { 1.0 };
    let w = numkern::herm_part(&((zf - &ehe) * c(half, 0.0)));
    let act_tol = 1e-5 * herm_eig(&numkern::herm_part(&ehe))?.lambda.first().copied().unwrap_or(1.0).max(1e-300);
    let mut vals: Vec<(HomPoint, f64)> = Vec::new();
    for p in curve_grid(&aset.curve, grid_size) {
        let b = atom_basis(aset, &p, 1e-6)?;
        if b.ncols() == 0 {
            continue;
        }
        let v = herm_eig(&numkern::herm_part(&(b.adjoint() * &w * &b)))?.lambda[0];
        vals.push((p, v));
    }
    let (worst_point, max_violation) = vals
        .iter()
        .fold((None, f64::NEG_INFINITY), |(bp, bv), &(p, v)| if v > bv { (Some(p), v) } else { (bp, bv) });
    let active_points = vals.iter().filter(|(_, v)| *v >= -act_tol).map(|(p, _)| *p).collect();
    Ok(CertReport { max_violation, active_points, worst_point })
}

/// One-dimensional nullspace of a pencil at a unit-circle point.
fn circle_atom(f: &CMat, g: &CMat, omega: f64) -> Result<CMat, GaugeError> {
    let p = HomPoint::on_circle(omega);
    let pen = g * p.mu - f * p.nu;
    let b = if pen.nrows() == 0 { eye(f.ncols()) } else { nullspace(&pen, 1e-9)? };
    if b.ncols() != 1 {
        return Err(GaugeError::NullspaceDim { omega, dim: b.ncols() });
    }
    Ok(b)
}

/// Certificate functional on an `ω` grid: `a^HZa/‖Ea‖²` for symmetric
/// certificates, `‖Z^H v‖/‖E₁v‖` for non-symmetric ones.
pub fn dual_polynomial(cert: &DualCertificate, aset: &AtomSet, omega_grid: &[f64]) -> Result<Vec<f64>, GaugeError> {
    let pen = &aset.pencil;
    if is_nonsymmetric(cert, aset) {
        let b = pen.block.as_ref().ok_or(GaugeError::MissingBlock)?;
        let f1 = pen.f.view((0, 0), (b.p1, b.n1)).into_owned();
        let g1 = pen.g.view((0, 0), (b.p1, b.n1)).into_owned();
        omega_grid
            .iter()
            .map(|&w| {
                let v = circle_atom(&f1, &g1, w)?;
                let num = (cert.z.adjoint() * &v).norm();
                Ok(num / (&b.e1 * &v).norm())
            })
            .collect()
    } else {
        if cert.z.shape() != (aset.n(), aset.n()) {
            return Err(GaugeError::Dim("Z does not match the pencil".into()));
        }
        omega_grid
            .iter()
            .map(|&w| {
                let a = circle_atom(&pen.f, &pen.g, w)?;
                let num = (a.adjoint() * &cert.z * &a)[(0, 0)].re;
                Ok(num / (&pen.e * &a).norm_squared())
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Transfer-function bounds.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KypReport {
    pub holds: bool,
    /// Optimal `s` in `Z − Eq*(P) − Ineq*(Q) − E^HE ⪯ sI`; the bound holds iff `s ≤ 0`.
    pub margin: f64,
    pub worst: (HomPoint, f64),
}

fn transfer_norm(a: &CMat, b: &CMat, cm: &CMat, d: &CMat, p: &HomPoint) -> Result<f64, GaugeError> {
    let ns = a.nrows();
    let Some(lam) = p.lambda() else { return Ok(svd(d)?.sigma.first().copied().unwrap_or(0.0)) };
    let res = eye(ns) * lam - a;
    let sv = svd(&res)?;
    let smin = sv.sigma.last().copied().unwrap_or(1.0);
    if ns > 0 && smin <= 1e-10 * (1.0 + sv.sigma[0]) {
        return Err(GaugeError::EigenOnCurve(lam));
    }
    let x = res.lu().solve(b).ok_or(GaugeError::EigenOnCurve(lam))?;
    Ok(svd(&(d + cm * x))?.sigma.first().copied().unwrap_or(0.0))
}

/// `sup ‖D + C(λI − A)⁻¹B‖₂ ≤ 1` over the curve, via feasibility of the
/// non-symmetric dual LMI with `Z = [C D]`.
pub fn kyp_bound_check(
    a: &CMat,
    b: &CMat,
    cm: &CMat,
    d: &CMat,
    curve: &CurveSpec,
    grid: usize,
) -> Result<KypReport, GaugeError> {
    let ns = a.nrows();
    let m = b.ncols();
    let l = cm.nrows();
    if a.ncols() != ns || b.nrows() != ns || cm.ncols() != ns || d.shape() != (l, m) {
        return Err(GaugeError::Dim("A, B, C, D shapes are inconsistent".into()));
    }
    let mut worst = (HomPoint::infinity(), f64::NEG_INFINITY);
    for p in curve_grid(curve, grid) {
        let v = transfer_norm(a, b, cm, d, &p)?;
        if v > worst.1 {
            worst = (p, v);
        }
    }
    let mut f2 = CMat::zeros(ns, ns + m);
    f2.view_mut((0, 0), (ns, ns)).copy_from(a);
    f2.view_mut((0, ns), (ns, m)).copy_from(b);
    let mut g2 = CMat::zeros(ns, ns + m);
    g2.view_mut((0, 0), (ns, ns)).copy_from(&eye(ns));
    let mut e2 = CMat::zeros(m, ns + m);
    e2.view_mut((0, ns), (m, m)).copy_from(&eye(m));
    let pencil =
        PencilSpec::two_block((CMat::zeros(0, l), CMat::zeros(0, l), eye(l)), (f2, g2, e2))?;
    let aset = AtomSet::new(pencil, *curve)?;
    let nt = l + ns + m;
    let mut zc = CMat::zeros(l, ns + m);
    zc.view_mut((0, 0), (l, ns)).copy_from(cm);
    zc.view_mut((0, ns), (l, m)).copy_from(d);
    let zcert = DualCertificate { z: zc, p: CMat::zeros(ns, ns), q: CMat::zeros(ns, ns) };
    let base = z_full(&zcert, &aset) - aset.pencil.e.adjoint() * &aset.pencil.e;

    // sI − base + Eq*(P) + Ineq*(Q) ⪰ 0, Q ⪰ 0, minimize s.
    let mut model = Model::default();
    let s = model.new_vars(1);
    model.c[s] = 1.0;
    let pv = model.herm(ns);
    let qv = curve.inequality_active.then(|| model.herm(ns));
    let pen = &aset.pencil;
    let mut mexpr = MatExpr::zeros(nt, nt);
    for i in 0..nt {
        for j in 0..=i {
            let mut e = CExpr::constant(-base[(i, j)]);
            if i == j {
                e.terms.push((s, c(1.0, 0.0)));
            }
            *mexpr.get_mut(i, j) = e;
        }
    }
    let mut add_adjoint = |theta: &HForm2, v: &HermVar| {
        let h = [sparse_cols(&pen.f), sparse_cols(&pen.g)];
        let coef = [[theta.get(0, 0), theta.get(0, 1)], [theta.get(1, 0), theta.get(1, 1)]];
        for (k, hk) in h.iter().enumerate() {
            for (li, hl) in h.iter().enumerate() {
                let t = coef[k][li];
                if t == c(0.0, 0.0) {
                    continue;
                }
                for i in 0..nt {
                    for j in 0..=i {
                        for &(ra, fa) in &hk[i] {
                            for &(rb, fb) in &hl[j] {
                                let w = t * fa.conj() * fb;
                                let e = v.entry(ra, rb).scaled(w);
                                mexpr.get_mut(i, j).add(&e, c(1.0, 0.0));
                            }
                        }
                    }
                }
            }
        }
    };
    add_adjoint(&curve.phi, &pv);
    if let Some(q) = &qv {
        add_adjoint(&curve.psi, q);
    }
    for e in mexpr.e.iter_mut() {
        *e = std::mem::take(e).tidy();
    }
    model.psd(&mexpr);
    if let Some(q) = &qv {
        model.psd(&q.matrix());
    }
    let prob = model.finish();
    let sol = conic::solve(&prob, &Settings::default())?;
    if sol.status != Status::Optimal {
        return Err(GaugeError::NotOptimal(sol.status));
    }
    let margin = sol.x[s];
    Ok(KypReport { holds: margin <= 1e-6, margin, worst })
}
