//! Standard-form cone programs and a primal-dual interior-point solver.
//!
//! Problems are posed as
//!
//! ```text
//! minimize    cᵀx + offset
//! subject to  Ax + s = b,  s ∈ K
//! ```
//!
//! with `K` a product of zero, nonnegative, second-order and real PSD cones.
//! The dual is `maximize −bᵀy + offset` subject to `Aᵀy + c = 0`, `y ∈ K*`.
//! PSD blocks use the scaled lower-triangular vectorization [`svec`];
//! Hermitian blocks are lowered through the real embedding (see [`hvec`] and
//! [`embed_rows`]).
//!
//! Equality rows are eliminated by sparse Gaussian elimination before the
//! interior-point iterations, which run on a homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor–corrector steps.

use crate::numkern::{CMat, RMat, C64};
use nalgebra::{Cholesky, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::SQRT_2;
use thiserror::Error;

type RVec = DVector<f64>;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("non-Hermitian input (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("non-finite problem data")]
    NonFinite,
}

/// One block of the cone product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    Zero(usize),
    NonNeg(usize),
    /// `(t, u)` with `‖u‖ ≤ t`; the value is the total dimension.
    Soc(usize),
    /// Real symmetric PSD matrices of the given side, stored as [`svec`].
    Psd(usize),
}

impl Cone {
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::Soc(d) => d,
            Cone::Psd(d) => d * (d + 1) / 2,
        }
    }

    fn degree(&self) -> usize {
        match *self {
            Cone::Zero(_) => 0,
            Cone::NonNeg(d) | Cone::Psd(d) => d,
            Cone::Soc(_) => 1,
        }
    }
}

/// Coordinate-format sparse matrix; duplicate entries are summed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, triplets: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push((r, c, v));
        }
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for &(r, c, v) in &self.triplets {
            x[c] += v * y[r];
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    #[serde(default)]
    pub objective_offset: f64,
}

impl ConicProblem {
    pub fn n_var(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let m: usize = self.cones.iter().map(Cone::rows).sum();
        if m != self.b.len() {
            return Err(ConicError::Dim(format!("cones cover {m} rows, b has {}", self.b.len())));
        }
        if self.a.nrows != m || self.a.ncols != self.c.len() {
            return Err(ConicError::Dim(format!(
                "A is {}x{}, expected {}x{}",
                self.a.nrows,
                self.a.ncols,
                m,
                self.c.len()
            )));
        }
        if let Some(&(r, c, _)) = self.a.triplets.iter().find(|t| t.0 >= m || t.1 >= self.c.len()) {
            return Err(ConicError::Dim(format!("entry ({r},{c}) out of range")));
        }
        let finite = self.c.iter().chain(&self.b).all(|v| v.is_finite())
            && self.a.triplets.iter().all(|t| t.2.is_finite())
            && self.objective_offset.is_finite();
        if !finite {
            return Err(ConicError::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { eps: 1e-7, max_iter: 200_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub status: Status,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Vectorizations.

/// Position of `(i, j)`, `i ≥ j`, in the column-major lower triangle.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

fn svec_pair(n: usize, k: usize) -> (usize, usize) {
    let mut j = 0;
    let mut start = 0;
    while start + (n - j) <= k {
        start += n - j;
        j += 1;
    }
    (j + (k - start), j)
}

/// `svec(X)`: lower triangle, column-major, off-diagonals scaled by √2.
pub fn svec(x: &RMat) -> Vec<f64> {
    let n = x.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            v.push(if i == j { x[(i, i)] } else { SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)]) });
        }
    }
    v
}

pub fn smat(v: &[f64], n: usize) -> RMat {
    let mut x = RMat::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                x[(i, i)] = v[k];
            } else {
                x[(i, j)] = v[k] / SQRT_2;
                x[(j, i)] = v[k] / SQRT_2;
            }
            k += 1;
        }
    }
    x
}

fn herm_defect(x: &CMat) -> f64 {
    let d = x - x.adjoint();
    d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Isometric real coordinates of a Hermitian matrix: for each column `j`,
/// `X_jj` followed by `(√2 Re X_ij, √2 Im X_ij)` for `i > j`.
pub fn hvec(x: &CMat) -> Result<Vec<f64>, ConicError> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(ConicError::Dim("square matrix required".into()));
    }
    let d = herm_defect(x);
    if d > 1e-9 * (1.0 + x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()) {
        return Err(ConicError::NotHermitian(d));
    }
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        v.push(x[(j, j)].re);
        for i in j + 1..n {
            let z = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            v.push(SQRT_2 * z.re);
            v.push(SQRT_2 * z.im);
        }
    }
    Ok(v)
}

pub fn hmat(v: &[f64], n: usize) -> CMat {
    let mut x = CMat::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let (r, im) = hvec_coords(n, i, j);
            if i == j {
                x[(i, i)] = C64::new(v[r], 0.0);
            } else {
                let z = C64::new(v[r], v[im.unwrap()]) / SQRT_2;
                x[(i, j)] = z;
                x[(j, i)] = z.conj();
            }
        }
    }
    x
}

/// Indices of `Re X_ij` and `Im X_ij` (`i ≥ j`) within [`hvec`]; the
/// off-diagonal coordinates carry a √2 factor.
pub fn hvec_coords(n: usize, i: usize, j: usize) -> (usize, Option<usize>) {
    assert!(i >= j && i < n);
    // Column j starts after Σ_{k<j} (1 + 2(n−1−k)) entries.
    let start = j * (2 * n - j);
    if i == j {
        (start, None)
    } else {
        let r = start + 1 + 2 * (i - j - 1);
        (r, Some(r + 1))
    }
}

/// Linear expression of `X_ij` (any `i, j`) in [`hvec`] coordinates:
/// `(index, coefficient)` pairs with complex coefficients.
pub fn hvec_entry(n: usize, i: usize, j: usize) -> Vec<(usize, C64)> {
    if i == j {
        let (r, _) = hvec_coords(n, i, i);
        return vec![(r, C64::new(1.0, 0.0))];
    }
    let (a, b) = if i > j { (i, j) } else { (j, i) };
    let (r, im) = hvec_coords(n, a, b);
    let s = if i > j { 1.0 } else { -1.0 };
    vec![(r, C64::new(1.0 / SQRT_2, 0.0)), (im.unwrap(), C64::new(0.0, s / SQRT_2))]
}

/// Real embedding `[[Re X, −Im X], [Im X, Re X]]`.
pub fn embed(x: &CMat) -> RMat {
    let n = x.nrows();
    let mut m = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = x[(i, j)];
            m[(i, j)] = z.re;
            m[(i + n, j + n)] = z.re;
            m[(i, j + n)] = -z.im;
            m[(i + n, j)] = z.im;
        }
    }
    m
}

/// Rows of `svec(embed(X))/√2` as sparse combinations of [`hvec`]
/// coordinates; with this scaling the PSD(2n) block pairs with Hermitian
/// duals through `Re tr(XY)`.
pub fn embed_rows(n: usize) -> Vec<Vec<(usize, f64)>> {
    let nn = 2 * n;
    let mut rows = Vec::with_capacity(nn * (nn + 1) / 2);
    for j in 0..nn {
        for i in j..nn {
            let (bi, bj) = (i % n, j % n);
            let (ti, tj) = (i / n, j / n);
            // Embedded entry as a real linear form of X.
            let expr = hvec_entry(n, bi, bj);
            let mut row = Vec::new();
            for (k, coef) in expr {
                let val = match (ti, tj) {
                    (0, 0) | (1, 1) => coef.re,
                    (1, 0) => coef.im,
                    _ => -coef.im,
                };
                let scale = if i == j { 1.0 / SQRT_2 } else { 1.0 };
                if val != 0.0 {
                    row.push((k, val * scale));
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Hermitian matrix from the dual of a PSD(2n) block built by
/// [`embed_rows`]: the adjoint of the embedding map.
pub fn embed_adjoint(y: &[f64], n: usize) -> CMat {
    let rows = embed_rows(n);
    let mut v = vec![0.0; n * n];
    for (r, row) in rows.iter().enumerate() {
        for &(k, a) in row {
            v[k] += a * y[r];
        }
    }
    hmat(&v, n)
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(x: &RMat) -> RMat {
    let sym = (x + x.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let d = e.eigenvalues.map(|l| l.max(0.0));
    &e.eigenvectors * RMat::from_diagonal(&d) * e.eigenvectors.transpose()
}

// ---------------------------------------------------------------------------
// Sparse column storage.

#[derive(Debug, Clone)]
struct Csc {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csc {
    fn from_columns(nrows: usize, cols: &[Vec<(usize, f64)>]) -> Self {
        let mut colptr = vec![0];
        let mut rowidx = Vec::new();
        let mut vals = Vec::new();
        for col in cols {
            let mut c = col.clone();
            c.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (r, v) in c {
                if last == Some(r) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    rowidx.push(r);
                    vals.push(v);
                    last = Some(r);
                }
            }
            colptr.push(rowidx.len());
        }
        Csc { nrows, ncols: cols.len(), colptr, rowidx, vals }
    }

    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.colptr[j]..self.colptr[j + 1]).map(move |k| (self.rowidx[k], self.vals[k]))
    }

    fn mul(&self, x: &RVec) -> RVec {
        let mut y = RVec::zeros(self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj != 0.0 {
                for (r, v) in self.col(j) {
                    y[r] += v * xj;
                }
            }
        }
        y
    }

    fn tmul(&self, y: &RVec) -> RVec {
        RVec::from_fn(self.ncols, |j, _| self.col(j).map(|(r, v)| v * y[r]).sum())
    }
}

// ---------------------------------------------------------------------------
// Presolve: x = x0 + N z eliminates the zero-cone rows.

struct Presolved {
    x0: Vec<f64>,
    /// Column `k` of `N` as `(original variable, coefficient)`.
    basis: Vec<Vec<(usize, f64)>>,
    zero_rows: Vec<usize>,
    rest_rows: Vec<usize>,
    rest_cones: Vec<Cone>,
    infeasible: bool,
}

fn presolve(p: &ConicProblem) -> Presolved {
    let n = p.n_var();
    let mut zero_rows = Vec::new();
    let mut rest_rows = Vec::new();
    let mut rest_cones = Vec::new();
    let mut off = 0;
    for cone in &p.cones {
        let r = cone.rows();
        match cone {
            Cone::Zero(_) => zero_rows.extend(off..off + r),
            _ => {
                rest_rows.extend(off..off + r);
                if r > 0 {
                    rest_cones.push(*cone);
                }
            }
        }
        off += r;
    }
    let mut is_zero = vec![false; p.n_rows()];
    for &r in &zero_rows {
        is_zero[r] = true;
    }
    let mut rows: BTreeMap<usize, BTreeMap<usize, f64>> = zero_rows.iter().map(|&r| (r, BTreeMap::new())).collect();
    for &(r, c, v) in &p.a.triplets {
        if is_zero[r] {
            *rows.get_mut(&r).unwrap().entry(c).or_insert(0.0) += v;
        }
    }
    let mut order: Vec<usize> = zero_rows.clone();
    order.sort_by_key(|r| (rows[r].len(), *r));

    let mut expr: Vec<Option<(f64, BTreeMap<usize, f64>)>> = vec![None; n];
    let mut refs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut infeasible = false;
    for r in order {
        let orig = &rows[&r];
        let scale = orig.values().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut rhs = p.b[r];
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for (&j, &a) in orig {
            match &expr[j] {
                Some((c0, e)) => {
                    rhs -= a * c0;
                    for (&k, &ck) in e {
                        *row.entry(k).or_insert(0.0) += a * ck;
                    }
                }
                None => *row.entry(j).or_insert(0.0) += a,
            }
        }
        let drop = 1e-12 * scale.max(1e-300);
        row.retain(|_, v| v.abs() > drop);
        if row.is_empty() {
            if rhs.abs() > 1e-9 * (1.0 + p.b[r].abs() + scale) {
                infeasible = true;
            }
            continue;
        }
        let (piv, ap) = row.iter().fold((usize::MAX, 0.0f64), |best, (&k, &v)| if v.abs() > best.1.abs() { (k, v) } else { best });
        let c0 = rhs / ap;
        let mut e: BTreeMap<usize, f64> = BTreeMap::new();
        for (&k, &v) in &row {
            if k != piv {
                e.insert(k, -v / ap);
            }
        }
        let users: Vec<usize> = refs[piv].iter().copied().collect();
        for u in users {
            let (uc0, ue) = expr[u].as_mut().unwrap();
            let coef = ue.remove(&piv).unwrap_or(0.0);
            *uc0 += coef * c0;
            for (&k, &ck) in &e {
                *ue.entry(k).or_insert(0.0) += coef * ck;
                refs[k].insert(u);
            }
            let mx = ue.values().fold(0.0f64, |m, v| m.max(v.abs()));
            let dead: Vec<usize> = ue.iter().filter(|(_, v)| v.abs() <= 1e-14 * mx).map(|(k, _)| *k).collect();
            for k in dead {
                ue.remove(&k);
                refs[k].remove(&u);
            }
        }
        refs[piv].clear();
        for &k in e.keys() {
            refs[k].insert(piv);
        }
        expr[piv] = Some((c0, e));
    }

    let free: Vec<usize> = (0..n).filter(|&j| expr[j].is_none()).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &f) in free.iter().enumerate() {
        pos[f] = k;
    }
    let mut basis: Vec<Vec<(usize, f64)>> = free.iter().map(|&f| vec![(f, 1.0)]).collect();
    let mut x0 = vec![0.0; n];
    for j in 0..n {
        if let Some((c0, e)) = &expr[j] {
            x0[j] = *c0;
            for (&k, &ck) in e {
                basis[pos[k]].push((j, ck));
            }
        }
    }
    Presolved { x0, basis, zero_rows, rest_rows, rest_cones, infeasible }
}

// ---------------------------------------------------------------------------
// Cone geometry for the interior-point iterations.

#[derive(Debug, Clone)]
enum Block {
    NonNeg { off: usize, dim: usize },
    Soc { off: usize, dim: usize },
    Psd { off: usize, side: usize },
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::NonNeg { off, dim } | Block::Soc { off, dim } => off..off + dim,
            Block::Psd { off, side } => off..off + side * (side + 1) / 2,
        }
    }
}

/// Nesterov–Todd scaling of one block, `W z = W^{-T} s = λ`.
#[derive(Debug, Clone)]
enum Scale {
    NonNeg { w: RVec },
    /// `W = β(2w̄w̄ᵀ − J)` with `w̄ᵀJw̄ = 1`.
    Soc { beta: f64, wbar: RVec },
    Psd { r: RMat, rinv: RMat, t: RMat },
}

fn soc_j(v: &RVec) -> RVec {
    let mut u = -v.clone();
    u[0] = v[0];
    u
}

fn soc_jnorm2(v: &RVec) -> f64 {
    v[0] * v[0] - v.rows(1, v.len() - 1).norm_squared()
}

fn block_vec(v: &RVec, b: &Block) -> RVec {
    let r = b.range();
    v.rows(r.start, r.len()).into_owned()
}

fn nt_scaling(b: &Block, s: &RVec, z: &RVec) -> Option<(Scale, RVec)> {
    match *b {
        Block::NonNeg { .. } => {
            if s.iter().chain(z.iter()).any(|&v| !(v > 0.0)) {
                return None;
            }
            let w = s.zip_map(z, |a, b| (a / b).sqrt());
            let lam = s.zip_map(z, |a, b| (a * b).sqrt());
            Some((Scale::NonNeg { w }, lam))
        }
        Block::Soc { .. } => {
            let sj = soc_jnorm2(s);
            let zj = soc_jnorm2(z);
            if !(sj > 0.0 && zj > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                return None;
            }
            let sb = s / sj.sqrt();
            let zb = z / zj.sqrt();
            let gamma = ((1.0 + zb.dot(&sb)) / 2.0).sqrt();
            let wp = (&sb + soc_j(&zb)) / (2.0 * gamma);
            let mut wbar = wp.clone();
            wbar[0] += 1.0;
            let wbar = wbar / (2.0 * (wp[0] + 1.0)).sqrt();
            let beta = (sj / zj).powf(0.25);
            let sc = Scale::Soc { beta, wbar };
            let lam = apply_w(&sc, z);
            Some((sc, lam))
        }
        Block::Psd { side, .. } => {
            let sm = smat(s.as_slice(), side);
            let zm = smat(z.as_slice(), side);
            let ls = Cholesky::new(sm)?.l();
            let lz = Cholesky::new(zm)?.l();
            let m = lz.transpose() * &ls;
            let svd = m.svd(false, true);
            let vt = svd.v_t?;
            let sig = svd.singular_values;
            if sig.iter().any(|&x| !(x > 0.0)) {
                return None;
            }
            let lsinv = ls.solve_lower_triangular(&RMat::identity(side, side))?;
            let sq = sig.map(|x| x.sqrt());
            let isq = sig.map(|x| 1.0 / x.sqrt());
            let r = &ls * vt.transpose() * RMat::from_diagonal(&isq);
            let rinv = RMat::from_diagonal(&sq) * &vt * lsinv;
            let t = rinv.transpose() * &rinv;
            let mut lam = RMat::zeros(side, side);
            for i in 0..side {
                lam[(i, i)] = sig[i];
            }
            Some((Scale::Psd { r, rinv, t }, RVec::from_vec(svec(&lam))))
        }
    }
}

fn congruence(v: &RVec, left: &RMat, right_t: bool) -> RVec {
    // right_t: L V Lᵀ; otherwise Lᵀ V L.
    let n = left.nrows();
    let m = smat(v.as_slice(), n);
    let out = if right_t { left * m * left.transpose() } else { left.transpose() * m * left };
    RVec::from_vec(svec(&out))
}

fn apply_w(sc: &Scale, v: &RVec) -> RVec {
    match sc {
        Scale::NonNeg { w } => w.component_mul(v),
        Scale::Soc { beta, wbar } => (wbar * (2.0 * wbar.dot(v)) - soc_j(v)) * *beta,
        Scale::Psd { r, .. } => congruence(v, r, false),
    }
}

fn apply_wt(sc: &Scale, v: &RVec) -> RVec {
    match sc {
        Scale::Psd { r, .. } => congruence(v, r, true),
        _ => apply_w(sc, v),
    }
}

fn apply_winv(sc: &Scale, v: &RVec) -> RVec {
    match sc {
        Scale::NonNeg { w } => v.component_div(w),
        Scale::Soc { beta, wbar } => {
            let jw = soc_j(wbar);
            (&jw * (2.0 * jw.dot(v)) - soc_j(v)) / *beta
        }
        Scale::Psd { rinv, .. } => congruence(v, rinv, false),
    }
}

fn apply_wit(sc: &Scale, v: &RVec) -> RVec {
    match sc {
        Scale::Psd { rinv, .. } => congruence(v, rinv, true),
        _ => apply_winv(sc, v),
    }
}

/// `(WᵀW)^{-1} v`.
fn apply_hinv(sc: &Scale, v: &RVec) -> RVec {
    match sc {
        Scale::Psd { t, .. } => congruence(v, t, true),
        _ => apply_winv(sc, &apply_wit(sc, v)),
    }
}

fn jordan(b: &Block, u: &RVec, v: &RVec) -> RVec {
    match *b {
        Block::NonNeg { .. } => u.component_mul(v),
        Block::Soc { .. } => {
            let mut w = RVec::zeros(u.len());
            w[0] = u.dot(v);
            for i in 1..u.len() {
                w[i] = u[0] * v[i] + v[0] * u[i];
            }
            w
        }
        Block::Psd { side, .. } => {
            let a = smat(u.as_slice(), side);
            let c = smat(v.as_slice(), side);
            let p = &a * &c;
            RVec::from_vec(svec(&((&p + p.transpose()) * 0.5)))
        }
    }
}

/// Solves `λ ∘ u = r`.
fn jordan_div(b: &Block, lam: &RVec, r: &RVec) -> RVec {
    match *b {
        Block::NonNeg { .. } => r.component_div(lam),
        Block::Soc { .. } => {
            let det = soc_jnorm2(lam);
            let l1 = lam.rows(1, lam.len() - 1);
            let r1 = r.rows(1, r.len() - 1);
            let u0 = (lam[0] * r[0] - l1.dot(&r1)) / det;
            let mut u = RVec::zeros(r.len());
            u[0] = u0;
            for i in 1..r.len() {
                u[i] = (r[i] - u0 * lam[i]) / lam[0];
            }
            u
        }
        Block::Psd { side, .. } => {
            let d: Vec<f64> = (0..side).map(|i| lam[svec_diag(side, i)]).collect();
            let mut u = r.clone();
            let mut k = 0;
            for j in 0..side {
                for i in j..side {
                    u[k] = 2.0 * r[k] / (d[i] + d[j]);
                    k += 1;
                }
            }
            u
        }
    }
}

fn svec_diag(n: usize, i: usize) -> usize {
    svec_index(n, i, i)
}

fn unit(b: &Block) -> RVec {
    match *b {
        Block::NonNeg { dim, .. } => RVec::from_element(dim, 1.0),
        Block::Soc { dim, .. } => {
            let mut e = RVec::zeros(dim);
            e[0] = 1.0;
            e
        }
        Block::Psd { side, .. } => RVec::from_vec(svec(&RMat::identity(side, side))),
    }
}

/// Largest `α` with `λ + α d` in the cone, for `λ` in scaled coordinates.
fn max_step_scaled(b: &Block, lam: &RVec, d: &RVec) -> f64 {
    match *b {
        Block::NonNeg { .. } => {
            let mut a = f64::INFINITY;
            for i in 0..lam.len() {
                if d[i] < 0.0 {
                    a = a.min(-lam[i] / d[i]);
                }
            }
            a
        }
        Block::Soc { .. } => soc_step(lam, d),
        Block::Psd { side, .. } => {
            let l: Vec<f64> = (0..side).map(|i| lam[svec_diag(side, i)].sqrt()).collect();
            let mut m = smat(d.as_slice(), side);
            for i in 0..side {
                for j in 0..side {
                    m[(i, j)] /= l[i] * l[j];
                }
            }
            let ev = SymmetricEigen::new(m).eigenvalues;
            let mn = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            if mn < 0.0 {
                -1.0 / mn
            } else {
                f64::INFINITY
            }
        }
    }
}

fn soc_step(u: &RVec, d: &RVec) -> f64 {
    let c = soc_jnorm2(u);
    let a = soc_jnorm2(d);
    let b = u[0] * d[0] - u.rows(1, u.len() - 1).dot(&d.rows(1, d.len() - 1));
    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = -u[0] / d[0];
    }
    let root = if a.abs() <= 1e-300 {
        if b < 0.0 {
            Some(-c / (2.0 * b))
        } else {
            None
        }
    } else {
        let disc = b * b - a * c;
        if disc < 0.0 {
            None
        } else if a < 0.0 {
            Some((-b - disc.sqrt()) / a)
        } else if b < 0.0 {
            Some(c / (-b + disc.sqrt()))
        } else {
            None
        }
    };
    if let Some(r) = root {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}

// ---------------------------------------------------------------------------
// Homogeneous self-dual interior-point method on `Gx + s = h`, `s ∈ K`.

struct Reduced {
    g: Csc,
    h: RVec,
    c: RVec,
    blocks: Vec<Block>,
    /// For PSD blocks: variables touching the block and their entries.
    psd_cols: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
    /// Row-major copy of `G` for nonnegative rows.
    rows: Vec<Vec<(usize, f64)>>,
    /// For SOC blocks: touching variables.
    soc_vars: Vec<Vec<usize>>,
}

impl Reduced {
    fn new(g: Csc, h: RVec, c: RVec, cones: &[Cone]) -> Self {
        let mut blocks = Vec::new();
        let mut off = 0;
        for cone in cones {
            let b = match *cone {
                Cone::NonNeg(d) => Block::NonNeg { off, dim: d },
                Cone::Soc(d) => Block::Soc { off, dim: d },
                Cone::Psd(d) => Block::Psd { off, side: d },
                Cone::Zero(_) => unreachable!("zero rows are presolved"),
            };
            off += cone.rows();
            blocks.push(b);
        }
        let m = g.nrows;
        let mut rows = vec![Vec::new(); m];
        for j in 0..g.ncols {
            for (r, v) in g.col(j) {
                rows[r].push((j, v));
            }
        }
        let mut psd_cols = Vec::new();
        let mut soc_vars = Vec::new();
        let mut owner = vec![usize::MAX; m];
        for (bi, b) in blocks.iter().enumerate() {
            for r in b.range() {
                owner[r] = bi;
            }
        }
        let mut per_block: Vec<BTreeMap<usize, Vec<(usize, f64)>>> = vec![BTreeMap::new(); blocks.len()];
        for j in 0..g.ncols {
            for (r, v) in g.col(j) {
                let bi = owner[r];
                let off = blocks[bi].range().start;
                per_block[bi].entry(j).or_default().push((r - off, v));
            }
        }
        for (bi, b) in blocks.iter().enumerate() {
            match b {
                Block::Psd { .. } => {
                    psd_cols.push(std::mem::take(&mut per_block[bi]).into_iter().collect());
                    soc_vars.push(Vec::new());
                }
                Block::Soc { .. } => {
                    psd_cols.push(Vec::new());
                    soc_vars.push(per_block[bi].keys().copied().collect());
                }
                Block::NonNeg { .. } => {
                    psd_cols.push(Vec::new());
                    soc_vars.push(Vec::new());
                }
            }
        }
        Reduced { g, h, c, blocks, psd_cols, rows, soc_vars }
    }

    fn nu(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::NonNeg { dim, .. } => Cone::NonNeg(dim).degree(),
                Block::Soc { .. } => 1,
                Block::Psd { side, .. } => side,
            })
            .sum()
    }
}

struct Ipm<'a> {
    p: &'a Reduced,
    scales: Vec<Scale>,
    lam: Vec<RVec>,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    dscale: RVec,
}

#[derive(Debug, Clone)]
struct Dir {
    dx: RVec,
    dz: RVec,
    ds: RVec,
    dtau: f64,
    dkappa: f64,
}

impl<'a> Ipm<'a> {
    fn per_block<F: Fn(usize, &Block, &RVec) -> RVec>(&self, v: &RVec, f: F) -> RVec {
        let mut out = RVec::zeros(v.len());
        for (bi, b) in self.p.blocks.iter().enumerate() {
            let r = b.range();
            let res = f(bi, b, &block_vec(v, b));
            out.rows_mut(r.start, r.len()).copy_from(&res);
        }
        out
    }

    fn hinv(&self, v: &RVec) -> RVec {
        self.per_block(v, |bi, _, x| apply_hinv(&self.scales[bi], x))
    }

    fn assemble(&mut self) -> bool {
        let d = self.p.g.ncols;
        let mut h = RMat::zeros(d, d);
        for (bi, b) in self.p.blocks.iter().enumerate() {
            match (b, &self.scales[bi]) {
                (Block::NonNeg { off, dim }, Scale::NonNeg { w }) => {
                    for k in 0..*dim {
                        let wt = 1.0 / (w[k] * w[k]);
                        let row = &self.p.rows[off + k];
                        for &(i, vi) in row {
                            for &(j, vj) in row {
                                h[(i, j)] += wt * vi * vj;
                            }
                        }
                    }
                }
                (Block::Soc { off, dim }, sc @ Scale::Soc { .. }) => {
                    let vars = &self.p.soc_vars[bi];
                    let mut gb = RMat::zeros(*dim, vars.len());
                    for (k, &j) in vars.iter().enumerate() {
                        for (r, v) in self.p.g.col(j) {
                            if r >= *off && r < off + dim {
                                gb[(r - off, k)] = v;
                            }
                        }
                    }
                    let mut y = RMat::zeros(*dim, vars.len());
                    for k in 0..vars.len() {
                        let col = apply_winv(sc, &gb.column(k).into_owned());
                        y.set_column(k, &col);
                    }
                    let hb = y.transpose() * &y;
                    for (a, &i) in vars.iter().enumerate() {
                        for (c, &j) in vars.iter().enumerate() {
                            h[(i, j)] += hb[(a, c)];
                        }
                    }
                }
                (Block::Psd { side, .. }, Scale::Psd { t, .. }) => {
                    psd_schur(&mut h, &self.p.psd_cols[bi], *side, t);
                }
                _ => unreachable!(),
            }
        }
        // Symmetric diagonal equilibration before factoring.
        let maxd = (0..d).map(|i| h[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        let dsc = RVec::from_fn(d, |i, _| 1.0 / h[(i, i)].max(1e-14 * maxd).sqrt());
        for j in 0..d {
            for i in 0..d {
                h[(i, j)] *= dsc[i] * dsc[j];
            }
        }
        self.dscale = dsc;
        let mut reg = 1e-14;
        for _ in 0..8 {
            let mut hr = h.clone();
            for i in 0..d {
                hr[(i, i)] += reg;
            }
            if let Some(ch) = Cholesky::new(hr) {
                self.chol = Some(ch);
                return true;
            }
            reg *= 100.0;
        }
        false
    }

    fn h(&self, v: &RVec) -> RVec {
        self.per_block(v, |bi, _, x| apply_wt(&self.scales[bi], &apply_w(&self.scales[bi], x)))
    }

    fn kkt_once(&self, bx: &RVec, bz: &RVec) -> (RVec, RVec) {
        let t = self.hinv(bz);
        let rhs = bx + self.p.g.tmul(&t);
        let dx = match &self.chol {
            Some(ch) if rhs.len() > 0 => ch.solve(&rhs.component_mul(&self.dscale)).component_mul(&self.dscale),
            _ => RVec::zeros(rhs.len()),
        };
        let dz = self.hinv(&(self.p.g.mul(&dx) - bz));
        (dx, dz)
    }

    /// Solves `[0 Gᵀ; G −WᵀW] [dx; dz] = [bx; bz]` with iterative refinement.
    fn kkt(&self, bx: &RVec, bz: &RVec) -> (RVec, RVec) {
        let (mut dx, mut dz) = self.kkt_once(bx, bz);
        let scale = bx.norm() + bz.norm();
        let mut prev = f64::INFINITY;
        for _ in 0..4 {
            let ex = bx - self.p.g.tmul(&dz);
            let ez = bz - self.p.g.mul(&dx) + self.h(&dz);
            let e = ex.norm() + ez.norm();
            if e <= 1e-15 * scale || e >= 0.5 * prev {
                break;
            }
            prev = e;
            let (cx, cz) = self.kkt_once(&ex, &ez);
            dx += cx;
            dz += cz;
        }
        (dx, dz)
    }
}

fn psd_schur(h: &mut RMat, cols: &[(usize, Vec<(usize, f64)>)], side: usize, t: &RMat) {
    let pairs: Vec<(usize, usize)> = (0..side * (side + 1) / 2).map(|k| svec_pair(side, k)).collect();
    for (jj, (j, ent)) in cols.iter().enumerate() {
        // Columns touched by A_j.
        let mut touched: Vec<usize> = Vec::new();
        for &(k, _) in ent {
            let (a, b) = pairs[k];
            touched.push(a);
            touched.push(b);
        }
        touched.sort_unstable();
        touched.dedup();
        let mut pos = vec![usize::MAX; side];
        for (q, &b) in touched.iter().enumerate() {
            pos[b] = q;
        }
        let mut cmat = RMat::zeros(side, touched.len());
        for &(k, v) in ent {
            let (a, b) = pairs[k];
            if a == b {
                let mut col = cmat.column_mut(pos[b]);
                col.axpy(v, &t.column(a), 1.0);
            } else {
                let w = v / SQRT_2;
                cmat.column_mut(pos[b]).axpy(w, &t.column(a), 1.0);
                cmat.column_mut(pos[a]).axpy(w, &t.column(b), 1.0);
            }
        }
        let mut trows = RMat::zeros(touched.len(), side);
        for (q, &b) in touched.iter().enumerate() {
            trows.set_row(q, &t.row(b));
        }
        let pm = cmat * trows;
        for (i, ent_i) in cols.iter().take(jj + 1) {
            let mut acc = 0.0;
            for &(k, v) in ent_i {
                let (a, b) = pairs[k];
                acc += if a == b { v * pm[(a, a)] } else { SQRT_2 * v * 0.5 * (pm[(a, b)] + pm[(b, a)]) };
            }
            h[(*i, *j)] += acc;
            if i != j {
                h[(*j, *i)] += acc;
            }
        }
    }
}

struct IpmOut {
    x: RVec,
    s: RVec,
    z: RVec,
    status: Status,
    iterations: usize,
}

fn run_ipm(p: &Reduced, eps: f64, max_iter: usize) -> IpmOut {
    let m = p.h.len();
    let d = p.c.len();
    let nu = p.nu() as f64;
    let mut x = RVec::zeros(d);
    let mut s = RVec::zeros(m);
    let mut z = RVec::zeros(m);
    for b in &p.blocks {
        let e = unit(b);
        let r = b.range();
        s.rows_mut(r.start, r.len()).copy_from(&e);
        z.rows_mut(r.start, r.len()).copy_from(&e);
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;
    let hn = p.h.norm();
    let cn = p.c.norm();
    let mut status = Status::MaxIter;
    let mut it = 0;
    let cap = max_iter.min(400);
    let mut ipm = Ipm { p, scales: Vec::new(), lam: Vec::new(), chol: None, dscale: RVec::zeros(0) };
    let mut best: Option<(f64, RVec, RVec, RVec, f64)> = None;
    while it < cap {
        let rx = p.g.tmul(&z) + &p.c * tau;
        let rz = p.g.mul(&x) + &s - &p.h * tau;
        let cx = p.c.dot(&x);
        let hz = p.h.dot(&z);
        let rt = cx + hz + kappa;
        let mu = (s.dot(&z) + tau * kappa) / (nu + 1.0);

        let pres = (p.g.mul(&x) + &s - &p.h * tau).norm() / tau / (1.0 + hn);
        let dres = rx.norm() / tau / (1.0 + cn);
        let pobj = cx / tau;
        let dobj = -hz / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs()));
        if pres <= eps && dres <= eps && gap <= eps {
            status = Status::Optimal;
            break;
        }
        let worst = pres.max(dres).max(gap);
        if best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, x.clone(), s.clone(), z.clone(), tau));
        }
        if hz < 0.0 {
            let r = p.g.tmul(&z).norm() / (-hz) * hn.max(1.0) / cn.max(1.0);
            if r <= eps {
                status = Status::Infeasible;
                break;
            }
        }
        if cx < 0.0 {
            let r = (p.g.mul(&x) + &s).norm() / (-cx) * cn.max(1.0) / hn.max(1.0);
            if r <= eps {
                status = Status::Unbounded;
                break;
            }
        }

        ipm.scales.clear();
        ipm.lam.clear();
        let mut ok = true;
        for b in &p.blocks {
            match nt_scaling(b, &block_vec(&s, b), &block_vec(&z, b)) {
                Some((sc, l)) => {
                    ipm.scales.push(sc);
                    ipm.lam.push(l);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || !ipm.assemble() {
            break;
        }
        let (dx1, dz1) = ipm.kkt(&(-&p.c), &p.h);
        let denom_base = p.c.dot(&dx1) + p.h.dot(&dz1);

        let direction = |rc: &Vec<RVec>, rk: f64, eta: f64| -> Dir {
            let mut wl = RVec::zeros(m);
            for (bi, b) in p.blocks.iter().enumerate() {
                let r = b.range();
                let q = apply_wt(&ipm.scales[bi], &jordan_div(b, &ipm.lam[bi], &rc[bi]));
                wl.rows_mut(r.start, r.len()).copy_from(&q);
            }
            let bx = -&rx * eta;
            let bz = -&rz * eta - &wl;
            let (dx0, dz0) = ipm.kkt(&bx, &bz);
            let num = -eta * rt - p.c.dot(&dx0) - p.h.dot(&dz0) - rk / tau;
            let den = denom_base - kappa / tau;
            let dtau = num / den;
            let dx = dx0 + &dx1 * dtau;
            let dz = dz0 + &dz1 * dtau;
            let ds = -&rz * eta - p.g.mul(&dx) + &p.h * dtau;
            let dkappa = (rk - kappa * dtau) / tau;
            Dir { dx, dz, ds, dtau, dkappa }
        };
        let scaled = |dir: &Dir| -> (Vec<RVec>, Vec<RVec>) {
            let mut dss = Vec::new();
            let mut dzs = Vec::new();
            for (bi, b) in p.blocks.iter().enumerate() {
                dss.push(apply_wit(&ipm.scales[bi], &block_vec(&dir.ds, b)));
                dzs.push(apply_w(&ipm.scales[bi], &block_vec(&dir.dz, b)));
            }
            (dss, dzs)
        };
        let step = |dir: &Dir, dss: &[RVec], dzs: &[RVec]| -> f64 {
            let mut a = f64::INFINITY;
            for (bi, b) in p.blocks.iter().enumerate() {
                a = a.min(max_step_scaled(b, &ipm.lam[bi], &dss[bi]));
                a = a.min(max_step_scaled(b, &ipm.lam[bi], &dzs[bi]));
            }
            if dir.dtau < 0.0 {
                a = a.min(-tau / dir.dtau);
            }
            if dir.dkappa < 0.0 {
                a = a.min(-kappa / dir.dkappa);
            }
            a
        };

        let rc_aff: Vec<RVec> = p.blocks.iter().enumerate().map(|(bi, b)| -jordan(b, &ipm.lam[bi], &ipm.lam[bi])).collect();
        let aff = direction(&rc_aff, -tau * kappa, 1.0);
        let (dss, dzs) = scaled(&aff);
        let a_aff = step(&aff, &dss, &dzs).min(1.0);
        let sigma = (1.0 - a_aff).max(0.0).powi(3);
        let rc: Vec<RVec> = p
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| &rc_aff[bi] - jordan(b, &dss[bi], &dzs[bi]) + unit(b) * (sigma * mu))
            .collect();
        let rk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = direction(&rc, rk, 1.0 - sigma);
        let (dss, dzs) = scaled(&dir);
        let alpha = (0.99 * step(&dir, &dss, &dzs)).min(1.0);
        if !(alpha > 1e-12) {
            break;
        }
        x += &dir.dx * alpha;
        s += &dir.ds * alpha;
        z += &dir.dz * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        it += 1;
    }
    // Stalled runs fall back to the most accurate iterate seen.
    if status == Status::MaxIter {
        if let Some((worst, bx, bs, bz, bt)) = best {
            (x, s, z, tau) = (bx, bs, bz, bt);
            if worst <= 100.0 * eps {
                status = Status::Optimal;
            }
        }
    }
    let tau_safe = if tau > 0.0 { tau } else { 1.0 };
    match status {
        Status::Optimal | Status::MaxIter => IpmOut { x: x / tau_safe, s: s / tau_safe, z: z / tau_safe, status, iterations: it },
        _ => IpmOut { x, s, z, status, iterations: it },
    }
}

/// Least-squares solution of `Mᵀ y = g` for sparse `M` (rows given as lists).
fn cgls_transpose(rows: &[Vec<(usize, f64)>], ncols: usize, g: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let mt = |y: &[f64]| {
        let mut out = vec![0.0; ncols];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * y[r];
            }
        }
        out
    };
    let mv = |x: &[f64]| -> Vec<f64> { rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()).collect() };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut y = vec![0.0; m];
    let mut r = g.to_vec();
    let mut sres = mv(&r);
    let mut p = sres.clone();
    let mut gamma = dot(&sres, &sres);
    let g0 = gamma.sqrt();
    for _ in 0..(10 * m).clamp(100, 20_000) {
        if gamma.sqrt() <= 1e-14 * g0.max(1e-300) {
            break;
        }
        let q = mt(&p);
        let qq = dot(&q, &q);
        if qq <= 0.0 {
            break;
        }
        let a = gamma / qq;
        for i in 0..m {
            y[i] += a * p[i];
        }
        for i in 0..ncols {
            r[i] -= a * q[i];
        }
        sres = mv(&r);
        let gn = dot(&sres, &sres);
        let beta = gn / gamma;
        gamma = gn;
        for i in 0..m {
            p[i] = sres[i] + beta * p[i];
        }
    }
    y
}

/// Solves a cone program.
pub fn solve(p: &ConicProblem, settings: &Settings) -> Result<ConicSolution, ConicError> {
    p.validate()?;
    let n = p.n_var();
    let mrows = p.n_rows();
    let pre = presolve(p);
    let nrest = pre.rest_rows.len();
    let mut rest_pos = vec![usize::MAX; mrows];
    for (k, &r) in pre.rest_rows.iter().enumerate() {
        rest_pos[r] = k;
    }
    let mut acols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut zrows: BTreeMap<usize, Vec<(usize, f64)>> = pre.zero_rows.iter().map(|&r| (r, Vec::new())).collect();
    for &(r, c, v) in &p.a.triplets {
        if rest_pos[r] != usize::MAX {
            acols[c].push((rest_pos[r], v));
        } else {
            zrows.get_mut(&r).unwrap().push((c, v));
        }
    }
    let zero_rows: Vec<Vec<(usize, f64)>> = zrows.into_values().collect();

    if pre.infeasible {
        let y = vec![0.0; mrows];
        return Ok(finish(p, vec![0.0; n], y, vec![0.0; mrows], Status::Infeasible, 0));
    }

    // Reduced data: G = A_rest N, h = b_rest − A_rest x0, c' = Nᵀc.
    let mut gcols = Vec::with_capacity(pre.basis.len());
    let mut cred = RVec::zeros(pre.basis.len());
    for (k, col) in pre.basis.iter().enumerate() {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(j, coef) in col {
            cred[k] += p.c[j] * coef;
            for &(r, v) in &acols[j] {
                *acc.entry(r).or_insert(0.0) += v * coef;
            }
        }
        gcols.push(acc.into_iter().filter(|e| e.1 != 0.0).collect::<Vec<_>>());
    }
    let mut h = RVec::from_fn(nrest, |k, _| p.b[pre.rest_rows[k]]);
    for (j, col) in acols.iter().enumerate() {
        let xj = pre.x0[j];
        if xj != 0.0 {
            for &(r, v) in col {
                h[r] -= v * xj;
            }
        }
    }
    let g = Csc::from_columns(nrest, &gcols);
    let red = Reduced::new(g, h, cred.clone(), &pre.rest_cones);

    let (zsol, srest, yrest, status, iters) = if nrest == 0 {
        if cred.norm() <= settings.eps * (1.0 + cred.norm()) {
            (RVec::zeros(cred.len()), RVec::zeros(0), RVec::zeros(0), Status::Optimal, 0)
        } else {
            (RVec::zeros(cred.len()), RVec::zeros(0), RVec::zeros(0), Status::Unbounded, 0)
        }
    } else {
        let out = run_ipm(&red, settings.eps, settings.max_iter);
        (out.x, out.s, out.z, out.status, out.iterations)
    };

    let mut x = pre.x0.clone();
    for (k, col) in pre.basis.iter().enumerate() {
        for &(j, coef) in col {
            x[j] += coef * zsol[k];
        }
    }
    let mut y = vec![0.0; mrows];
    let mut s = vec![0.0; mrows];
    for (k, &r) in pre.rest_rows.iter().enumerate() {
        y[r] = yrest[k];
        s[r] = srest[k];
    }
    if status == Status::Infeasible || status == Status::Unbounded {
        return Ok(finish(p, x, y, s, status, iters));
    }
    if !pre.zero_rows.is_empty() {
        // Equality multipliers: A_zeroᵀ y_zero = −(c + A_restᵀ y_rest).
        let mut g = p.c.clone();
        for (j, col) in acols.iter().enumerate() {
            for &(r, v) in col {
                g[j] += v * yrest[r];
            }
        }
        let g: Vec<f64> = g.iter().map(|v| -v).collect();
        let yz = cgls_transpose(&zero_rows, n, &g);
        for (k, &r) in pre.zero_rows.iter().enumerate() {
            y[r] = yz[k];
        }
    }
    Ok(finish(p, x, y, s, status, iters))
}

fn finish(p: &ConicProblem, x: Vec<f64>, y: Vec<f64>, s: Vec<f64>, status: Status, iterations: usize) -> ConicSolution {
    let ax = p.a.mul_vec(&x);
    let bn = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cn = p.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pr: f64 = ax.iter().zip(&s).zip(&p.b).map(|((a, s), b)| (a + s - b).powi(2)).sum::<f64>().sqrt();
    let aty = p.a.tmul_vec(&y);
    let dr: f64 = aty.iter().zip(&p.c).map(|(a, c)| (a + c).powi(2)).sum::<f64>().sqrt();
    let pobj = p.c.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>() + p.objective_offset;
    let dobj = -p.b.iter().zip(&y).map(|(b, y)| b * y).sum::<f64>() + p.objective_offset;
    let residuals = Residuals {
        primal: pr / (1.0 + bn),
        dual: dr / (1.0 + cn),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs())),
    };
    ConicSolution { x, y, s, status, primal_obj: pobj, dual_obj: dobj, residuals, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkern::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svec_roundtrip_and_index() {
        let n = 4;
        let x = RMat::from_fn(n, n, |i, j| (i + j) as f64 + if i == j { 1.0 } else { 0.0 });
        let v = svec(&x);
        assert_eq!(smat(&v, n), x);
        for k in 0..v.len() {
            let (i, j) = svec_pair(n, k);
            assert_eq!(svec_index(n, i, j), k);
        }
        for i in 0..n {
            assert_eq!(svec_diag(n, i), svec_index(n, i, i));
        }
    }

    #[test]
    fn hvec_isometry_and_embedding() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let x = random::hermitian(5, &mut r);
        let y = random::hermitian(5, &mut r);
        let hx = hvec(&x).unwrap();
        let hy = hvec(&y).unwrap();
        let ip: f64 = hx.iter().zip(&hy).map(|(a, b)| a * b).sum();
        assert!((ip - (&x * &y).trace().re).abs() < 1e-12);
        assert!((hmat(&hx, 5) - &x).iter().all(|z| z.norm() < 1e-14));
        let rows = embed_rows(5);
        let sv: Vec<f64> = rows.iter().map(|row| row.iter().map(|&(k, a)| a * hx[k]).sum()).collect();
        let want: Vec<f64> = svec(&embed(&x)).iter().map(|v| v / SQRT_2).collect();
        for (a, b) in sv.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let i2 = crate::numkern::eye(2);
        assert_eq!(embed(&i2), RMat::identity(4, 4));
        let e = SymmetricEigen::new(embed(&CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(0.0, 0.0)])));
        let mut ev: Vec<f64> = e.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let adj = embed_adjoint(&sv, 5);
        let _ = adj;
        assert!(hvec(&CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)])).is_err());
    }

    #[test]
    fn project_psd_cases() {
        let x = RMat::from_diagonal(&RVec::from_vec(vec![1.0, -2.0]));
        let p = project_psd(&x);
        assert!((p - RMat::from_diagonal(&RVec::from_vec(vec![1.0, 0.0]))).norm() < 1e-14);
        let s = RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((project_psd(&s) - &s).norm() < 1e-12);
    }

    #[test]
    fn lp_bound() {
        // min x s.t. x ≥ 1  →  −x + s = −1, s ≥ 0.
        let mut a = SparseMatrix::new(1, 1);
        a.push(0, 0, -1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![-1.0], cones: vec![Cone::NonNeg(1)], objective_offset: 0.0 };
        let sol = solve(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!(sol.residuals.max() <= 1e-7);
    }

    #[test]
    fn sdp_forced() {
        // min tr X s.t. X ⪰ 0, X11 = 1 over 2×2 real symmetric svec variables.
        let mut a = SparseMatrix::new(4, 3);
        a.push(0, 0, 1.0);
        for k in 0..3 {
            a.push(1 + k, k, -1.0);
        }
        let p = ConicProblem { c: vec![1.0, 0.0, 1.0], a, b: vec![1.0, 0.0, 0.0, 0.0], cones: vec![Cone::Zero(1), Cone::Psd(2)], objective_offset: 0.0 };
        let sol = solve(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-6);
        assert!(sol.x[1].abs() < 1e-6 && sol.x[2].abs() < 1e-6);
        assert!(sol.residuals.max() <= 1e-7, "{:?}", sol.residuals);
    }

    #[test]
    fn socp_and_infeasible() {
        // min t s.t. ‖(1, 2)‖ ≤ t.
        let mut a = SparseMatrix::new(3, 1);
        a.push(0, 0, -1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![0.0, 1.0, 2.0], cones: vec![Cone::Soc(3)], objective_offset: 0.0 };
        let sol = solve(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 5f64.sqrt()).abs() < 1e-6);
        // x ≥ 1 and x ≤ 0.
        let mut a = SparseMatrix::new(2, 1);
        a.push(0, 0, -1.0);
        a.push(1, 0, 1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![-1.0, 0.0], cones: vec![Cone::NonNeg(2)], objective_offset: 0.0 };
        assert_eq!(solve(&p, &Settings::default()).unwrap().status, Status::Infeasible);
        // x = 1, x = 2.
        let mut a = SparseMatrix::new(2, 1);
        a.push(0, 0, 1.0);
        a.push(1, 0, 1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![1.0, 2.0], cones: vec![Cone::Zero(2)], objective_offset: 0.0 };
        assert_eq!(solve(&p, &Settings::default()).unwrap().status, Status::Infeasible);
        // min x, x free but x ≤ 0 only.
        let mut a = SparseMatrix::new(1, 1);
        a.push(0, 0, 1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![0.0], cones: vec![Cone::NonNeg(1)], objective_offset: 0.0 };
        assert_eq!(solve(&p, &Settings::default()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn nt_scaling_identities() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let blocks = [Block::NonNeg { off: 0, dim: 3 }, Block::Soc { off: 0, dim: 4 }, Block::Psd { off: 0, side: 3 }];
        for b in &blocks {
            let (s, z) = match b {
                Block::NonNeg { .. } => (RVec::from_vec(vec![1.0, 2.0, 0.5]), RVec::from_vec(vec![3.0, 0.1, 1.0])),
                Block::Soc { .. } => (RVec::from_vec(vec![3.0, 1.0, -0.5, 0.7]), RVec::from_vec(vec![2.0, -1.2, 0.3, 0.1])),
                Block::Psd { .. } => {
                    let a = random::gaussian(3, 3, &mut r).map(|z| z.re);
                    let c = random::gaussian(3, 3, &mut r).map(|z| z.re);
                    (RVec::from_vec(svec(&(&a * a.transpose() + RMat::identity(3, 3) * 0.1))), RVec::from_vec(svec(&(&c * c.transpose() + RMat::identity(3, 3) * 0.2))))
                }
            };
            let (sc, lam) = nt_scaling(b, &s, &z).unwrap();
            assert!((apply_w(&sc, &z) - &lam).norm() < 1e-10, "{b:?}");
            assert!((apply_wit(&sc, &s) - &lam).norm() < 1e-10, "{b:?}");
            let v = RVec::from_fn(s.len(), |i, _| (i as f64 * 0.7).sin());
            assert!((apply_winv(&sc, &apply_w(&sc, &v)) - &v).norm() < 1e-10);
            assert!((apply_wit(&sc, &apply_wt(&sc, &v)) - &v).norm() < 1e-10);
            assert!((apply_hinv(&sc, &apply_wt(&sc, &apply_w(&sc, &v))) - &v).norm() < 1e-10);
            let u = jordan(b, &lam, &v);
            assert!((jordan_div(b, &lam, &u) - &v).norm() < 1e-10);
            // ⟨Wᵀa, b⟩ = ⟨a, W b⟩.
            let a2 = RVec::from_fn(s.len(), |i, _| (i as f64 * 1.3).cos());
            assert!((apply_wt(&sc, &a2).dot(&v) - a2.dot(&apply_w(&sc, &v))).abs() < 1e-10);
        }
    }

    #[test]
    fn problem_json_roundtrip() {
        let mut a = SparseMatrix::new(1, 1);
        a.push(0, 0, -1.0);
        let p = ConicProblem { c: vec![1.0], a, b: vec![-1.0], cones: vec![Cone::NonNeg(1)], objective_offset: 0.5 };
        let s = serde_json::to_string(&p).unwrap();
        let q: ConicProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
