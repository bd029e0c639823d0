//! Lattice operators on Ω⁰ ⊕ Ω¹ over T³: the twisted de Rham pieces, the
//! odd signature operator, Hodge Laplacians, eigensolvers, spectral flow,
//! a discrete eta sum and holonomy perturbations.
//!
//! Coordinates are the algebra coordinates at each site. The pairing and
//! the L² weights are uniform multiples of the Euclidean inner product in
//! these coordinates, so formal adjoints are plain transposes.
//!
//! Central differences annihilate the staggered modes `(−1)^{x_j}`, which
//! would fill the kernel of `D_A` with lattice doublers. The assembled
//! operator therefore carries a Wilson term `(r h/2)·Γ·L_A`, with `L_A` the
//! forward-difference covariant Laplacian and `Γ = −1` on Ω⁰, `+1` on Ω¹.
//! It vanishes on covariantly constant fields and is O(h) on smooth ones.

use std::fmt::Write as _;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{multi_indices, AlgebraForm, TorusGrid};
use crate::holonomy::{holonomy, LoopPath};
use crate::lie::{ad_matrix, AlgebraElement, GroupElement};

/// Wilson parameter `r`.
pub const WILSON_R: f64 = 0.65;
/// Largest dimension accepted by the dense eigensolver.
pub const DENSE_LIMIT: usize = 20_000;
/// Relative residual required of every returned eigenpair.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

const CLUSTER: f64 = 1e-10;

/// Sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::InvalidInput(format!("entry ({r}, {c}) outside a {rows}×{cols} matrix")));
        }
        triplets.par_sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Stored entry at `(r, c)`, zero if absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, t).expect("in range")
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::InvalidInput("matrix shapes differ".into()));
        }
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.rows, self.cols, t)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput("inner matrix dimensions differ".into()));
        }
        let rows: Vec<Vec<(usize, usize, f64)>> = (0..self.rows)
            .into_par_iter()
            .map(|r| {
                let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert(0.0) += a * b;
                    }
                }
                acc.into_iter().map(|(c, v)| (r, c, v)).collect()
            })
            .collect();
        Self::from_triplets(self.rows, other.cols, rows.into_iter().flatten().collect())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).into_par_iter().map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `max |a_ij − a_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        (0..self.rows)
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// `(M + Mᵀ)/2`; exactly symmetric in floating point.
    pub fn symmetrized(&self) -> Self {
        let mut t = self.triplets();
        t.extend(self.transpose().triplets());
        Self::from_triplets(self.rows, self.cols, t).expect("square").scale(0.5)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest absolute row sum, an upper bound for the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Row label of an [`OperatorMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub degree: usize,
    pub mask: u8,
    pub site: usize,
    pub basis: usize,
}

/// A square operator on a direct sum of form spaces over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: TorusGrid,
    degrees: Vec<usize>,
    matrix: CsrMatrix,
}

impl OperatorMatrix {
    pub fn new(grid: TorusGrid, degrees: Vec<usize>, matrix: CsrMatrix) -> Result<Self> {
        let dim: usize = degrees.iter().map(|&k| block_size(&grid, k)).sum();
        if matrix.rows != dim || matrix.cols != dim {
            return Err(Error::InvalidInput(format!("matrix is not {dim}×{dim}")));
        }
        Ok(Self { grid, degrees, matrix })
    }

    /// Wraps a bare symmetric matrix, e.g. for tests and triplet imports.
    pub fn from_matrix(matrix: CsrMatrix) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::InvalidInput("operator must be square".into()));
        }
        let grid = TorusGrid::cube(2, 4)?;
        Ok(Self { grid, degrees: Vec::new(), matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn block_offset(&self, degree: usize) -> Option<usize> {
        let mut offset = 0;
        for &k in &self.degrees {
            if k == degree {
                return Some(offset);
            }
            offset += block_size(&self.grid, k);
        }
        None
    }

    /// Row of `(degree, mask, site, basis)`.
    pub fn index_of(&self, e: &IndexEntry) -> Option<usize> {
        let offset = self.block_offset(e.degree)?;
        let masks = multi_indices(self.grid.dim(), e.degree);
        let comp = masks.iter().position(|&m| m == e.mask)?;
        if e.site >= self.grid.sites() || e.basis >= 3 {
            return None;
        }
        Some(offset + (e.site * masks.len() + comp) * 3 + e.basis)
    }

    /// Label of `row`.
    pub fn entry(&self, row: usize) -> Option<IndexEntry> {
        let mut offset = 0;
        for &k in &self.degrees {
            let size = block_size(&self.grid, k);
            if row < offset + size {
                let masks = multi_indices(self.grid.dim(), k);
                let local = row - offset;
                let basis = local % 3;
                let comp = (local / 3) % masks.len();
                let site = local / 3 / masks.len();
                return Some(IndexEntry { degree: k, mask: masks[comp], site, basis });
            }
            offset += size;
        }
        None
    }

    /// Coordinate triplet text: a `rows cols nnz` header, then `i j value`
    /// per stored entry with 17 significant digits.
    pub fn to_triplet_text(&self) -> String {
        let m = &self.matrix;
        let mut out = format!("{} {} {}\n", m.rows, m.cols, m.nnz());
        for (r, c, v) in m.triplets() {
            let _ = writeln!(out, "{r} {c} {v:.16e}");
        }
        out
    }

    pub fn from_triplet_text(text: &str) -> Result<CsrMatrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::Format("empty triplet file".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols, nnz] = header[..] else {
            return Err(Error::Format("header must be `rows cols nnz`".into()));
        };
        let mut t = Vec::with_capacity(nnz);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Format(format!("bad triplet line {line:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            t.push((
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            ));
        }
        if t.len() != nnz {
            return Err(Error::Format(format!("expected {nnz} entries, found {}", t.len())));
        }
        CsrMatrix::from_triplets(rows, cols, t)
    }
}

fn block_size(grid: &TorusGrid, k: usize) -> usize {
    grid.sites() * multi_indices(grid.dim(), k).len() * 3
}

fn require_3d(a: &AlgebraForm) -> Result<()> {
    if a.grid().dim() != 3 {
        return Err(Error::DimMismatch { expected: 3, found: a.grid().dim() });
    }
    if !a.grid().is_periodic() {
        return Err(Error::InvalidGrid("operators need a fully periodic grid".into()));
    }
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    Ok(())
}

fn push_block(t: &mut Vec<(usize, usize, f64)>, r0: usize, c0: usize, m: &[[f64; 3]; 3], s: f64) {
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                t.push((r0 + i, c0 + j, s * v));
            }
        }
    }
}

fn push_identity(t: &mut Vec<(usize, usize, f64)>, r0: usize, c0: usize, s: f64) {
    for i in 0..3 {
        t.push((r0 + i, c0 + i, s));
    }
}

/// `d_A : Ω⁰ → Ω¹`, `(d_A α)_j = D_j α + [A_j, α]` with central `D_j`.
fn d0_matrix(a: &AlgebraForm) -> CsrMatrix {
    let g = a.grid();
    let n = g.sites();
    let t: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mut t = Vec::with_capacity(3 * 3 * 5);
            for j in 0..3 {
                let r0 = (x * 3 + j) * 3;
                let h = g.spacing(j);
                push_identity(&mut t, r0, g.shift(x, j, true) * 3, 0.5 / h);
                push_identity(&mut t, r0, g.shift(x, j, false) * 3, -0.5 / h);
                push_block(&mut t, r0, x * 3, &ad_matrix(&a.get(x, j)), 1.0);
            }
            t
        })
        .collect();
    CsrMatrix::from_triplets(9 * n, 3 * n, t).expect("in range")
}

/// `*d_A : Ω¹ → Ω¹`, `(*d_A β)_i = ε_ijk (D_j β_k + [A_j, β_k])`.
fn curl_matrix(a: &AlgebraForm) -> CsrMatrix {
    let g = a.grid();
    let n = g.sites();
    let t: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mut t = Vec::new();
            for i in 0..3 {
                let r0 = (x * 3 + i) * 3;
                for (j, k, sign) in [((i + 1) % 3, (i + 2) % 3, 1.0), ((i + 2) % 3, (i + 1) % 3, -1.0)] {
                    let h = g.spacing(j);
                    push_identity(&mut t, r0, (g.shift(x, j, true) * 3 + k) * 3, sign * 0.5 / h);
                    push_identity(&mut t, r0, (g.shift(x, j, false) * 3 + k) * 3, -sign * 0.5 / h);
                    push_block(&mut t, r0, (x * 3 + k) * 3, &ad_matrix(&a.get(x, j)), sign);
                }
            }
            t
        })
        .collect();
    CsrMatrix::from_triplets(9 * n, 9 * n, t).expect("in range")
}

/// Stacked forward covariant differences on `components` algebra-valued
/// fields per site:
/// `∇⁺_j f(x) = (f(x+e_j) − f(x))/h + [Ā_j, (f(x) + f(x+e_j))/2]`,
/// with `Ā_j` the link average of `A_j`.
fn forward_gradient(a: &AlgebraForm, components: usize) -> CsrMatrix {
    let g = a.grid();
    let n = g.sites();
    let t: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mut t = Vec::new();
            for j in 0..3 {
                let y = g.shift(x, j, true);
                let h = g.spacing(j);
                let abar = (a.get(x, j) + a.get(y, j)) * 0.5;
                let ad = ad_matrix(&abar);
                for c in 0..components {
                    let r0 = ((j * n + x) * components + c) * 3;
                    push_identity(&mut t, r0, (y * components + c) * 3, 1.0 / h);
                    push_identity(&mut t, r0, (x * components + c) * 3, -1.0 / h);
                    push_block(&mut t, r0, (y * components + c) * 3, &ad, 0.5);
                    push_block(&mut t, r0, (x * components + c) * 3, &ad, 0.5);
                }
            }
            t
        })
        .collect();
    CsrMatrix::from_triplets(3 * n * components * 3, n * components * 3, t).expect("in range")
}

/// `L_A = Σ_j (∇⁺_j)ᵀ ∇⁺_j` on `components` fields per site.
fn covariant_laplacian(a: &AlgebraForm, components: usize) -> CsrMatrix {
    let grad = forward_gradient(a, components);
    grad.transpose().matmul(&grad).expect("shapes agree")
}

fn wilson_weight(grid: &TorusGrid) -> f64 {
    let h = (0..grid.dim()).map(|j| grid.spacing(j)).fold(0.0, f64::max);
    0.5 * WILSON_R * h
}

struct Pieces {
    d0: CsrMatrix,
    curl: CsrMatrix,
    wilson0: CsrMatrix,
    wilson1: CsrMatrix,
}

fn pieces(a: &AlgebraForm) -> Pieces {
    let w = wilson_weight(a.grid());
    Pieces {
        d0: d0_matrix(a),
        curl: curl_matrix(a),
        wilson0: covariant_laplacian(a, 1).scale(w),
        wilson1: covariant_laplacian(a, 3).scale(w),
    }
}

/// `[[top_left, Bᵀ], [B, bottom_right]]` on Ω⁰ ⊕ Ω¹.
fn fold(n0: usize, top_left: Option<&CsrMatrix>, b: &CsrMatrix, bottom_right: Option<&CsrMatrix>) -> CsrMatrix {
    let n1 = b.rows();
    let mut t = Vec::new();
    if let Some(m) = top_left {
        t.extend(m.triplets());
    }
    for (r, c, v) in b.triplets() {
        t.push((n0 + r, c, v));
        t.push((c, n0 + r, v));
    }
    if let Some(m) = bottom_right {
        t.extend(m.triplets().into_iter().map(|(r, c, v)| (n0 + r, n0 + c, v)));
    }
    CsrMatrix::from_triplets(n0 + n1, n0 + n1, t).expect("in range").symmetrized()
}

/// The odd signature operator `(α, β) ↦ (d_A*β, d_Aα + *d_Aβ)`, with the
/// Wilson term, on Ω⁰ ⊕ Ω¹ over T³.
pub fn assemble_d(a: &AlgebraForm) -> Result<OperatorMatrix> {
    require_3d(a)?;
    let p = pieces(a);
    let n0 = 3 * a.grid().sites();
    let bottom = p.curl.add(&p.wilson1)?;
    let m = fold(n0, Some(&p.wilson0.scale(-1.0)), &p.d0, Some(&bottom));
    OperatorMatrix::new(*a.grid(), vec![0, 1], m)
}

/// `(α, β) ↦ (d_A*β, d_Aα)`: the twisted de Rham part alone.
pub fn assemble_de_rham(a: &AlgebraForm) -> Result<OperatorMatrix> {
    require_3d(a)?;
    let n0 = 3 * a.grid().sites();
    let m = fold(n0, None, &d0_matrix(a), None);
    OperatorMatrix::new(*a.grid(), vec![0, 1], m)
}

/// Hodge Laplacians as the diagonal blocks of `D²`:
/// `k = 0`: `d_A*d_A + W₀²`; `k = 1`: `d_A d_A* + (*d_A + W₁)²`.
pub fn assemble_laplacian(a: &AlgebraForm, k: usize) -> Result<OperatorMatrix> {
    require_3d(a)?;
    let p = pieces(a);
    let m = match k {
        0 => p.d0.transpose().matmul(&p.d0)?.add(&p.wilson0.matmul(&p.wilson0)?)?,
        1 => {
            let k1 = p.curl.add(&p.wilson1)?;
            p.d0.matmul(&p.d0.transpose())?.add(&k1.matmul(&k1)?)?
        }
        _ => return Err(Error::InvalidInput(format!("Laplacian degree must be 0 or 1, got {k}"))),
    };
    OperatorMatrix::new(*a.grid(), vec![k], m.symmetrized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenMode {
    /// Full spectrum.
    Dense,
    /// The `count` eigenvalues nearest `shift`.
    NearZero { count: usize, shift: f64 },
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` belongs to `values[i]`.
    pub vectors: Option<Mat<f64>>,
    /// Largest `‖Mv − λv‖` over returned pairs, when vectors were computed.
    pub max_residual: Option<f64>,
}

/// Estimate of `‖M‖₂` by power iteration.
pub fn operator_norm(m: &CsrMatrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x: Vec<f64> = (0..m.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut est = 0.0;
    for _ in 0..200 {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = m.matvec(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        if (ny - est).abs() <= 1e-6 * ny {
            return ny;
        }
        est = ny;
        x = y;
    }
    est
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn residuals(m: &CsrMatrix, values: &[f64], vectors: &Mat<f64>) -> Vec<f64> {
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let v: Vec<f64> = (0..vectors.nrows()).map(|r| vectors[(r, i)]).collect();
            let mv = m.matvec(&v);
            norm(&mv.iter().zip(&v).map(|(a, b)| a - values[i] * b).collect::<Vec<_>>())
        })
        .collect()
}

/// Eigenvalues (and optionally eigenvectors) of a symmetric operator.
pub fn eigen(op: &OperatorMatrix, mode: EigenMode, vectors: bool) -> Result<EigenResult> {
    eigen_matrix(&op.matrix, mode, vectors)
}

pub fn eigen_matrix(m: &CsrMatrix, mode: EigenMode, vectors: bool) -> Result<EigenResult> {
    match mode {
        EigenMode::Dense => dense_eigen(m, vectors),
        EigenMode::NearZero { count, shift } => near_zero_eigen(m, count, shift),
    }
}

fn dense_eigen(m: &CsrMatrix, want_vectors: bool) -> Result<EigenResult> {
    if m.rows() > DENSE_LIMIT {
        return Err(Error::InvalidInput(format!("dense eigensolve limited to dimension {DENSE_LIMIT}")));
    }
    let dense = m.to_dense();
    let fail = |e| Error::ConvergenceFailure(format!("dense eigensolver: {e:?}"));
    if !want_vectors {
        let values = dense.self_adjoint_eigenvalues(Side::Lower).map_err(fail)?;
        return Ok(EigenResult { values, vectors: None, max_residual: None });
    }
    let evd = dense.self_adjoint_eigen(Side::Lower).map_err(fail)?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let vectors = evd.U().to_owned();
    let max_residual = residuals(m, &values, &vectors).into_iter().fold(0.0, f64::max);
    Ok(EigenResult { values, vectors: Some(vectors), max_residual: Some(max_residual) })
}

/// MINRES for `(M − σ)x = b`, started from zero.
fn minres(m: &CsrMatrix, shift: f64, b: &[f64], tol: f64, max_iters: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return x;
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 0..max_iters {
        let v: Vec<f64> = y.iter().map(|e| e / beta).collect();
        y = m.matvec(&v);
        for i in 0..n {
            y[i] -= shift * v[i];
            if itn > 0 {
                y[i] -= (beta / oldb) * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        for i in 0..n {
            y[i] -= (alfa / beta) * r2[i];
        }
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&r2);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}

fn orthonormalize(x: &Mat<f64>) -> Mat<f64> {
    x.qr().compute_thin_Q()
}

/// Block shift-invert subspace iteration with MINRES inner solves and
/// Rayleigh–Ritz extraction.
fn near_zero_eigen(m: &CsrMatrix, count: usize, shift: f64) -> Result<EigenResult> {
    let n = m.rows();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!("cannot extract {count} eigenpairs from dimension {n}")));
    }
    let norm_m = operator_norm(m).max(f64::MIN_POSITIVE);
    // Exactly zero shifts make the solves singular on kernels.
    let sigma = if shift == 0.0 { 1e-5 * norm_m } else { shift };
    let block = (2 * count + 16).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = orthonormalize(&Mat::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0)));
    let target = EIGEN_RESIDUAL * norm_m;
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let cols: Vec<Vec<f64>> = (0..block)
            .into_par_iter()
            .map(|c| {
                let b: Vec<f64> = (0..n).map(|r| q[(r, c)]).collect();
                minres(m, sigma, &b, 1e-12, 4 * n)
            })
            .collect();
        let y = Mat::from_fn(n, block, |r, c| cols[c][r]);
        q = orthonormalize(&y);
        // Rayleigh–Ritz on M itself.
        let mq_cols: Vec<Vec<f64>> = (0..block)
            .into_par_iter()
            .map(|c| m.matvec(&(0..n).map(|r| q[(r, c)]).collect::<Vec<_>>()))
            .collect();
        let mq = Mat::from_fn(n, block, |r, c| mq_cols[c][r]);
        let h = q.transpose() * &mq;
        let h = Mat::from_fn(block, block, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::ConvergenceFailure(format!("Ritz problem: {e:?}")))?;
        let theta: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        let ritz = &q * evd.U();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| (theta[a] - sigma).abs().total_cmp(&(theta[b] - sigma).abs()));
        q = Mat::from_fn(n, block, |r, c| ritz[(r, order[c])]);
        let chosen: Vec<usize> = order[..count].to_vec();
        let vecs = Mat::from_fn(n, count, |r, c| ritz[(r, chosen[c])]);
        let vals: Vec<f64> = chosen.iter().map(|&i| theta[i]).collect();
        let res = residuals(m, &vals, &vecs);
        worst = res.iter().copied().fold(0.0, f64::max);
        if worst <= target {
            let mut idx: Vec<usize> = (0..count).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let values = idx.iter().map(|&i| vals[i]).collect();
            let vectors = Mat::from_fn(n, count, |r, c| vecs[(r, idx[c])]);
            return Ok(EigenResult { values, vectors: Some(vectors), max_residual: Some(worst) });
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "subspace iteration stalled with residual {worst:e} (target {target:e})"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFlowReport {
    pub sf: i64,
    pub epsilon: f64,
    /// Per sample, ascending eigenvalues.
    pub snapshots: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn negatives(values: &[f64], eps: f64) -> i64 {
    values.iter().filter(|&&l| l < -eps).count() as i64
}

/// Distance from `values[i]` to the nearest eigenvalue outside its cluster.
fn local_gap(values: &[f64], i: usize) -> f64 {
    let x = values[i];
    let below = values[..i].iter().rev().find(|&&v| x - v > CLUSTER).map(|v| x - v);
    let above = values[i + 1..].iter().find(|&&v| v - x > CLUSTER).map(|v| v - x);
    below.into_iter().chain(above).fold(f64::INFINITY, f64::min)
}

/// Flags eigenvalues that move more than half their local gap between
/// consecutive samples while near the counting threshold `−ε`, as
/// `(step, message)`.
fn motion_warnings(snapshots: &[Vec<f64>], eps: f64) -> Vec<(usize, String)> {
    let mut warnings = Vec::new();
    for (s, pair) in snapshots.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..a.len() {
            let motion = (b[i] - a[i]).abs();
            let gap = local_gap(a, i).min(local_gap(b, i));
            let (lo, hi) = (a[i].min(b[i]) - gap, a[i].max(b[i]) + gap);
            if motion > 0.5 * gap && lo <= -eps && -eps <= hi {
                warnings.push((
                    s,
                    format!("samples {s}→{}: eigenvalue {i} moved {motion:.3e} against local gap {gap:.3e} near −ε", s + 1),
                ));
            }
        }
    }
    warnings
}

fn resolve_epsilon(epsilon: Option<f64>, first: &OperatorMatrix) -> Result<f64> {
    match epsilon {
        Some(e) if e > 0.0 => Ok(e),
        Some(e) => Err(Error::InvalidInput(format!("epsilon must be positive, got {e}"))),
        None => Ok(1e-6 * operator_norm(first.matrix())),
    }
}

fn spectrum(a: &AlgebraForm) -> Result<Vec<f64>> {
    eigen(&assemble_d(a)?, EigenMode::Dense, false).map(|r| r.values)
}

/// Spectral flow of `D_{A_t}` along sampled connections: eigenvalues below
/// `−ε` at the start minus those at the end. `ε` defaults to `1e−6·‖D‖`.
pub fn spectral_flow(path: &[AlgebraForm], epsilon: Option<f64>) -> Result<SpectralFlowReport> {
    if path.len() < 2 {
        return Err(Error::InvalidInput("spectral flow needs at least 2 samples".into()));
    }
    let grid = path[0].grid();
    if path.iter().any(|a| a.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let eps = resolve_epsilon(epsilon, &assemble_d(&path[0])?)?;
    let snapshots: Vec<Vec<f64>> = path.par_iter().map(spectrum).collect::<Result<_>>()?;
    let sf = negatives(&snapshots[0], eps) - negatives(&snapshots[snapshots.len() - 1], eps);
    let warnings = motion_warnings(&snapshots, eps).into_iter().map(|(_, w)| w).collect();
    Ok(SpectralFlowReport { sf, epsilon: eps, snapshots, warnings })
}

/// Spectral flow along `(1 − t)·start + t·end` with refinement on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFlow {
    pub report: SpectralFlowReport,
    /// Sample parameters in `[0, 1]`, one per snapshot.
    pub times: Vec<f64>,
}

/// Starts from `samples` equal steps and bisects every flagged step until
/// no warnings remain or the path would exceed `max_samples`. Remaining
/// warnings are returned in the report.
pub fn segment_flow(
    start: &AlgebraForm,
    end: &AlgebraForm,
    samples: usize,
    max_samples: usize,
    epsilon: Option<f64>,
) -> Result<SegmentFlow> {
    if samples < 2 {
        return Err(Error::InvalidInput("spectral flow needs at least 2 samples".into()));
    }
    if start.grid() != end.grid() {
        return Err(Error::GridMismatch);
    }
    let at = |t: f64| start.scale(1.0 - t).axpy(t, end);
    let eps = resolve_epsilon(epsilon, &assemble_d(start)?)?;
    let mut times: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let mut snapshots: Vec<Vec<f64>> = times.par_iter().map(|&t| spectrum(&at(t)?)).collect::<Result<_>>()?;
    loop {
        let mut steps: Vec<usize> = motion_warnings(&snapshots, eps).into_iter().map(|(s, _)| s).collect();
        steps.dedup();
        if steps.is_empty() || times.len() + steps.len() > max_samples {
            break;
        }
        let mids: Vec<f64> = steps.iter().map(|&s| 0.5 * (times[s] + times[s + 1])).collect();
        let fresh: Vec<Vec<f64>> = mids.par_iter().map(|&t| spectrum(&at(t)?)).collect::<Result<_>>()?;
        // Inserting from the back keeps earlier step indices valid.
        for (&s, (t, values)) in steps.iter().zip(mids.into_iter().zip(fresh)).rev() {
            times.insert(s + 1, t);
            snapshots.insert(s + 1, values);
        }
    }
    let sf = negatives(&snapshots[0], eps) - negatives(&snapshots[snapshots.len() - 1], eps);
    let warnings = motion_warnings(&snapshots, eps).into_iter().map(|(_, w)| w).collect();
    Ok(SegmentFlow { report: SpectralFlowReport { sf, epsilon: eps, snapshots, warnings }, times })
}

/// Like [`spectral_flow`], but coarse steps are an error.
pub fn spectral_flow_strict(path: &[AlgebraForm], epsilon: Option<f64>) -> Result<SpectralFlowReport> {
    let report = spectral_flow(path, epsilon)?;
    if let Some(w) = report.warnings.first() {
        return Err(Error::StepTooCoarse(w.clone()));
    }
    Ok(report)
}

/// `Σ_{|λ| > ε} sgn λ` over the full spectrum.
pub fn discrete_eta(op: &OperatorMatrix, eps: f64) -> Result<i64> {
    let values = eigen(op, EigenMode::Dense, false)?.values;
    Ok(eta_of(&values, eps))
}

pub fn eta_of(values: &[f64], eps: f64) -> i64 {
    values.iter().filter(|l| l.abs() > eps).map(|&l| if l > 0.0 { 1 } else { -1 }).sum()
}

/// A polynomial in traces of powers of a holonomy `H`: each term is
/// `coeff · Π tr(H^p)` over its list of powers; an empty list is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePolynomial {
    pub terms: Vec<(f64, Vec<i32>)>,
}

impl TracePolynomial {
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![(c, Vec::new())] }
    }

    pub fn eval(&self, h: &GroupElement) -> f64 {
        self.terms.iter().map(|(c, powers)| c * powers.iter().map(|&p| h.powi(p).trace()).product::<f64>()).sum()
    }

    /// `tr H`, `(tr H)² − ½ tr H²` and `0.3 + tr H³ · tr H⁻¹`.
    pub fn specimens() -> Vec<(&'static str, Self)> {
        vec![
            ("trace", Self { terms: vec![(1.0, vec![1])] }),
            ("quadratic", Self { terms: vec![(1.0, vec![1, 1]), (-0.5, vec![2])] }),
            ("mixed", Self { terms: vec![(0.3, vec![]), (1.0, vec![3, -1])] }),
        ]
    }

    pub fn specimen(name: &str) -> Option<Self> {
        Self::specimens().into_iter().find(|(n, _)| *n == name).map(|(_, f)| f)
    }
}

/// Loops parallel to `axis` through the points of a disc in the transverse
/// plane, weighted by the smooth cutoff `exp(1 − 1/(1 − (r/R)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscFamily {
    pub axis: usize,
    pub centre: [f64; 3],
    pub radius: f64,
}

impl Default for DiscFamily {
    fn default() -> Self {
        Self { axis: 0, centre: [0.0, 0.5, 0.5], radius: 0.3 }
    }
}

impl DiscFamily {
    pub fn cutoff(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    /// Base points on the grid nodes of the transverse plane through the
    /// centre, with quadrature weight `h_u h_v η`.
    fn nodes(&self, grid: &TorusGrid) -> Vec<([f64; 3], f64)> {
        let (u, v) = ((self.axis + 1) % 3, (self.axis + 2) % 3);
        let (nu, nv) = (grid.shape()[u], grid.shape()[v]);
        let (hu, hv) = (grid.spacing(u), grid.spacing(v));
        let mut out = Vec::new();
        for i in 0..nu {
            for j in 0..nv {
                let mut p = self.centre;
                let du = wrap(i as f64 * hu - self.centre[u]);
                let dv = wrap(j as f64 * hv - self.centre[v]);
                p[u] = i as f64 * hu;
                p[v] = j as f64 * hv;
                let w = self.cutoff((du * du + dv * dv).sqrt());
                if w > 0.0 {
                    out.push((p, w * hu * hv));
                }
            }
        }
        out
    }

    /// `∫η` by the same quadrature.
    pub fn cutoff_integral(&self, grid: &TorusGrid) -> f64 {
        self.nodes(grid).iter().map(|(_, w)| w).sum()
    }
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// `h_f(A) = ∫_{D²} f(Hol_A(γ_x)) η(x) d²x`.
pub fn perturbation_hf(a: &AlgebraForm, family: &DiscFamily, f: &TracePolynomial) -> Result<f64> {
    require_3d(a)?;
    if family.axis >= 3 || !(family.radius > 0.0 && family.radius < 0.5) {
        return Err(Error::InvalidInput("disc family needs axis < 3 and radius in (0, 0.5)".into()));
    }
    let steps = 4 * a.grid().shape()[family.axis];
    family
        .nodes(a.grid())
        .par_iter()
        .map(|(p, w)| {
            let gamma = LoopPath::axis_loop(p, family.axis)?;
            Ok(w * f.eval(&holonomy(a, &gamma, steps)?))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().sum())
}

/// Applies the operator to a form pair, for cross-checks against the form
/// calculus.
pub fn apply(op: &OperatorMatrix, x: &[f64]) -> Vec<f64> {
    op.matrix.matvec(x)
}

/// Flattens a form into the coordinates of its block.
pub fn form_coordinates(omega: &AlgebraForm) -> Vec<f64> {
    omega.values().iter().flat_map(|v| v.0).collect()
}

/// Inverse of [`form_coordinates`].
pub fn form_from_coordinates(grid: TorusGrid, degree: usize, x: &[f64]) -> Result<AlgebraForm> {
    let values = x.chunks(3).map(|c| AlgebraElement([c[0], c[1], c[2]])).collect();
    AlgebraForm::from_values(grid, degree, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{smooth_random_form, SmoothSpec};
    use crate::forms::{codifferential, hodge_star};
    use crate::gauge::{constant_connection, covariant_d, gauge_act, GaugeMap};
    use crate::holonomy::holonomy_rep;
    use crate::rep::{stabilizer_dim, Presentation, Representation};

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::cube(3, n).unwrap()
    }

    fn zero(n: usize) -> AlgebraForm {
        AlgebraForm::zeros(grid(n), 1).unwrap()
    }

    fn random(n: usize, degree: usize, amp: f64, seed: u64) -> AlgebraForm {
        smooth_random_form(grid(n), degree, &SmoothSpec::new(amp, 1), seed).unwrap()
    }

    fn kernel_dim(values: &[f64]) -> usize {
        values.iter().filter(|l| l.abs() < 1e-8).count()
    }

    #[test]
    fn csr_basics() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 1, 2.0), (1, 0, -1.0), (0, 1, 0.5), (1, 2, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 2.5);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![5.0, 11.0]);
        let p = m.matmul(&m.transpose()).unwrap();
        assert_eq!(p.to_dense()[(0, 0)], 6.25);
        assert_eq!(p.get(1, 1), 17.0);
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn d_dimension_and_symmetry() {
        let d = assemble_d(&zero(6)).unwrap();
        assert_eq!(d.dim(), 2592);
        assert_eq!(d.matrix().symmetry_defect(), 0.0);
        let a = random(5, 1, 1.5, 3);
        let d = assemble_d(&a).unwrap();
        assert_eq!(d.matrix().symmetry_defect(), 0.0);
        for k in 0..2 {
            assert_eq!(assemble_laplacian(&a, k).unwrap().matrix().symmetry_defect(), 0.0);
        }
    }

    #[test]
    fn index_map_is_a_bijection() {
        let d = assemble_d(&zero(4)).unwrap();
        let mut seen = vec![false; d.dim()];
        for row in 0..d.dim() {
            let e = d.entry(row).unwrap();
            assert_eq!(d.index_of(&e), Some(row));
            assert!(!seen[row]);
            seen[row] = true;
        }
        assert!(d.entry(d.dim()).is_none());
        let e = IndexEntry { degree: 1, mask: 0b100, site: 5, basis: 2 };
        assert_eq!(d.entry(d.index_of(&e).unwrap()), Some(e));
    }

    #[test]
    fn blocks_match_form_calculus() {
        let a = random(6, 1, 1.2, 11);
        let alpha = random(6, 0, 1.0, 12);
        let beta = random(6, 1, 1.0, 13);
        let n0 = 3 * grid(6).sites();
        let rham = assemble_de_rham(&a).unwrap();
        let mut x = form_coordinates(&alpha);
        x.extend(vec![0.0; 3 * n0]);
        let y = apply(&rham, &x);
        let expected = form_coordinates(&covariant_d(&alpha, &a).unwrap());
        assert!(y[n0..].iter().zip(&expected).all(|(p, q)| (p - q).abs() <= 1e-12));
        let mut x = vec![0.0; n0];
        x.extend(form_coordinates(&beta));
        let y = apply(&rham, &x);
        let expected = form_coordinates(&codifferential(&beta, &a).unwrap());
        assert!(y[..n0].iter().zip(&expected).all(|(p, q)| (p - q).abs() <= 1e-12));
        let curl = curl_matrix(&a).matvec(&form_coordinates(&beta));
        let expected = form_coordinates(&hodge_star(&covariant_d(&beta, &a).unwrap()));
        assert!(curl.iter().zip(&expected).all(|(p, q)| (p - q).abs() <= 1e-12));
    }

    #[test]
    fn adjointness_at_matrix_level() {
        let a = random(5, 1, 1.0, 21);
        let b = d0_matrix(&a);
        let x: Vec<f64> = form_coordinates(&random(5, 0, 1.0, 22));
        let y: Vec<f64> = form_coordinates(&random(5, 1, 1.0, 23));
        let lhs = dot(&b.matvec(&x), &y);
        let rhs = dot(&x, &b.transpose().matvec(&y));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn kernel_at_zero_is_constants() {
        for n in [4, 6] {
            let d = assemble_d(&zero(n)).unwrap();
            let ev = eigen(&d, EigenMode::Dense, false).unwrap().values;
            assert_eq!(kernel_dim(&ev), 12, "n = {n}");
            // Explicit constant null vectors.
            for r in 0..12 {
                let x: Vec<f64> = (0..d.dim())
                    .map(|row| {
                        let e = d.entry(row).unwrap();
                        let slot = if e.degree == 0 { e.basis } else { 3 + 3 * e.mask.trailing_zeros() as usize + e.basis };
                        if slot == r { 1.0 } else { 0.0 }
                    })
                    .collect();
                assert!(apply(&d, &x).iter().all(|v| v.abs() <= 1e-12));
            }
        }
    }

    #[test]
    fn laplacian_cases() {
        let ev = eigen(&assemble_laplacian(&zero(4), 0).unwrap(), EigenMode::Dense, false).unwrap().values;
        assert_eq!(kernel_dim(&ev), 3);
        let a = random(4, 1, 2.0, 31);
        for k in 0..2 {
            let ev = eigen(&assemble_laplacian(&a, k).unwrap(), EigenMode::Dense, false).unwrap().values;
            assert!(ev[0] >= -1e-10);
        }
        // Flat abelian connection: stabilizer is the e₃ line.
        let l = AlgebraElement::new(0.0, 0.0, 2.3);
        let flat = constant_connection(grid(6), &[l, l * 0.4, l * -0.7]).unwrap();
        let p = Presentation::bundled("z3").unwrap();
        let rho = Representation::new(&p, holonomy_rep(&flat, 96).unwrap()).unwrap();
        assert_eq!(stabilizer_dim(&rho), 1);
        let ev = eigen(&assemble_laplacian(&flat, 0).unwrap(), EigenMode::Dense, false).unwrap().values;
        assert_eq!(kernel_dim(&ev), 1);
        assert!(ev[1] > 1e-3);
    }

    #[test]
    fn dense_diagonal_is_exact() {
        let m = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 2.0), (1, 1, -1.5), (2, 2, 0.25)]).unwrap();
        let r = eigen_matrix(&m, EigenMode::Dense, true).unwrap();
        assert_eq!(r.values, vec![-1.5, 0.25, 2.0]);
        assert!(r.max_residual.unwrap() <= 1e-15);
    }

    #[test]
    fn iterative_agrees_with_dense() {
        for a in [zero(4), random(4, 1, 1.5, 41)] {
            let d = assemble_d(&a).unwrap();
            let dense = eigen(&d, EigenMode::Dense, false).unwrap().values;
            let count = 16;
            let near = eigen(&d, EigenMode::NearZero { count, shift: 0.0 }, true).unwrap();
            let mut expected = dense.clone();
            expected.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
            let mut expected: Vec<f64> = expected[..count].to_vec();
            expected.sort_by(f64::total_cmp);
            for (x, y) in near.values.iter().zip(&expected) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
            let norm = operator_norm(d.matrix());
            assert!(near.max_residual.unwrap() <= EIGEN_RESIDUAL * norm);
        }
    }

    #[test]
    fn de_rham_part_has_symmetric_spectrum() {
        let ev = eigen(&assemble_de_rham(&zero(4)).unwrap(), EigenMode::Dense, false).unwrap().values;
        let n = ev.len();
        for i in 0..n {
            assert!((ev[i] + ev[n - 1 - i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn spectral_flow_structure() {
        let a0 = zero(4);
        let a1 = random(4, 1, 2.0, 51);
        let a2 = random(4, 1, 2.0, 52);
        let line = |p: &AlgebraForm, q: &AlgebraForm, k: usize| -> Vec<AlgebraForm> {
            (0..=k).map(|i| p.scale(1.0 - i as f64 / k as f64).axpy(i as f64 / k as f64, q).unwrap()).collect()
        };
        let constant = spectral_flow(&vec![a1.clone(); 3], Some(1e-6)).unwrap();
        assert_eq!(constant.sf, 0);
        assert!(constant.warnings.is_empty());
        let p1 = line(&a1, &a2, 6);
        let p2 = line(&a2, &a0, 6);
        let r1 = spectral_flow(&p1, Some(1e-6)).unwrap();
        let r2 = spectral_flow(&p2, Some(1e-6)).unwrap();
        let mut joined = p1.clone();
        joined.extend(p2[1..].iter().cloned());
        let r12 = spectral_flow(&joined, Some(1e-6)).unwrap();
        assert_eq!(r1.sf + r2.sf, r12.sf);
        let rev: Vec<AlgebraForm> = p1.iter().rev().cloned().collect();
        assert_eq!(spectral_flow(&rev, Some(1e-6)).unwrap().sf, -r1.sf);
        let mut closed = joined.clone();
        closed.extend(line(&a0, &a1, 6)[1..].iter().cloned());
        assert_eq!(spectral_flow(&closed, Some(1e-6)).unwrap().sf, 0);
    }

    #[test]
    fn coarse_steps_are_flagged() {
        let a0 = zero(4);
        let a1 = random(4, 1, 6.0, 61);
        let report = spectral_flow(&[a0.clone(), a1.clone()], Some(1e-6)).unwrap();
        assert!(!report.warnings.is_empty());
        assert!(matches!(spectral_flow_strict(&[a0, a1], Some(1e-6)), Err(Error::StepTooCoarse(_))));
    }

    #[test]
    fn segment_refinement_clears_warnings() {
        let (a, b) = (random(4, 1, 2.0, 53), random(4, 1, 2.0, 51));
        let coarse = segment_flow(&a, &b, 9, 9, None).unwrap();
        assert!(!coarse.report.warnings.is_empty());
        let fine = segment_flow(&a, &b, 9, 400, None).unwrap();
        assert!(fine.report.warnings.is_empty());
        assert_eq!(fine.report.sf, coarse.report.sf);
        assert!(fine.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!((fine.times[0], *fine.times.last().unwrap()), (0.0, 1.0));
        let path: Vec<AlgebraForm> = fine.times.iter().map(|&t| a.scale(1.0 - t).axpy(t, &b).unwrap()).collect();
        assert_eq!(spectral_flow_strict(&path, None).unwrap().sf, fine.report.sf);
    }

    #[test]
    fn eta_cases() {
        let m = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, -3.0)]).unwrap();
        let op = OperatorMatrix::from_matrix(m.clone()).unwrap();
        assert_eq!(discrete_eta(&op, 1e-9).unwrap(), 1);
        let sym = OperatorMatrix::from_matrix(
            CsrMatrix::from_triplets(4, 4, vec![(0, 1, 1.0), (1, 0, 1.0), (2, 2, 5.0), (3, 3, -5.0)]).unwrap(),
        )
        .unwrap();
        assert_eq!(discrete_eta(&sym, 1e-9).unwrap(), 0);
        // Orthogonal conjugation of an operator.
        let d = assemble_d(&random(4, 1, 1.5, 71)).unwrap();
        let dense = d.matrix().to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = Mat::from_fn(d.dim(), d.dim(), |_, _| rng.gen_range(-1.0..1.0)).qr().compute_Q();
        let conj = q.transpose() * &dense * &q;
        let t: Vec<(usize, usize, f64)> = (0..d.dim())
            .flat_map(|i| (0..d.dim()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, conj[(i, j)]))
            .collect();
        let c = OperatorMatrix::from_matrix(CsrMatrix::from_triplets(d.dim(), d.dim(), t).unwrap().symmetrized()).unwrap();
        let eps = 1e-6;
        assert_eq!(discrete_eta(&c, eps).unwrap(), discrete_eta(&d, eps).unwrap());
    }

    #[test]
    fn triplet_export_round_trips() {
        let d = assemble_d(&random(4, 1, 1.0, 81)).unwrap();
        let text = d.to_triplet_text();
        assert_eq!(OperatorMatrix::from_triplet_text(&text).unwrap(), *d.matrix());
    }

    #[test]
    fn hf_trivial_cases() {
        let fam = DiscFamily::default();
        let g = grid(8);
        let total = fam.cutoff_integral(&g);
        assert!(total > 0.0);
        let a = random(8, 1, 1.0, 91);
        let c = perturbation_hf(&a, &fam, &TracePolynomial::constant(2.5)).unwrap();
        assert!((c - 2.5 * total).abs() <= 1e-12);
        for (_, f) in TracePolynomial::specimens() {
            let v = perturbation_hf(&zero(8), &fam, &f).unwrap();
            assert!((v - f.eval(&GroupElement::IDENTITY) * total).abs() <= 1e-12);
        }
    }

    #[test]
    fn hf_gauge_invariance_converges() {
        let fam = DiscFamily::default();
        let f = TracePolynomial::specimen("quadratic").unwrap();
        let residual = |n: usize| {
            let a = random(n, 1, 1.0, 101);
            let u = GaugeMap::smooth_random(grid(n), &SmoothSpec::new(0.6, 1), 102).unwrap();
            (perturbation_hf(&gauge_act(&a, &u).unwrap(), &fam, &f).unwrap() - perturbation_hf(&a, &fam, &f).unwrap()).abs()
        };
        let (r16, r32) = (residual(16), residual(32));
        assert!(r16 / r32 > 3.3, "{r16} {r32}");
    }
}
