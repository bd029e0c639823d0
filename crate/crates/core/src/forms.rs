//! Discrete exterior calculus on flat tori.
//!
//! Forms are collocated: every component of every degree lives on the grid
//! sites, and `d` is assembled from second-order central differences. On a
//! periodic axis the central difference is an antisymmetric operator, so
//! `d∘d = 0` and summation by parts hold to rounding.
//!
//! A grid may additionally carry one open axis (`[0, 1]` with one-sided
//! second-order stencils at its ends). This is only used for product
//! manifolds `Σ × [0, 1]`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{bracket, pair, AlgebraElement};

pub const MAX_DIM: usize = 4;

/// Values that forms can carry.
pub trait FormValue:
    Copy
    + Default
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn max_abs(&self) -> f64;
}

impl FormValue for f64 {
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl FormValue for AlgebraElement {
    fn max_abs(&self) -> f64 {
        AlgebraElement::max_abs(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    shape: [usize; MAX_DIM],
    open: [bool; MAX_DIM],
}

impl TorusGrid {
    /// Periodic unit torus with the given per-axis site counts.
    pub fn new(shape: &[usize]) -> Result<Self> {
        let dim = shape.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 2..=4")));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidGrid(format!("axis with {n} sites; need at least 4")));
        }
        let mut s = [1; MAX_DIM];
        s[..dim].copy_from_slice(shape);
        Ok(Self { dim, shape: s, open: [false; MAX_DIM] })
    }

    pub fn cube(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim])
    }

    /// `self × [0, 1]` with `slices` nodes on the new axis, endpoints included.
    pub fn with_open_axis(&self, slices: usize) -> Result<Self> {
        if self.dim >= MAX_DIM {
            return Err(Error::InvalidGrid("no room for another axis".into()));
        }
        if slices < 3 {
            return Err(Error::InvalidGrid(format!("open axis needs at least 3 nodes, got {slices}")));
        }
        let mut g = *self;
        g.shape[g.dim] = slices;
        g.open[g.dim] = true;
        g.dim += 1;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn is_open(&self, axis: usize) -> bool {
        self.open[axis]
    }

    pub fn is_periodic(&self) -> bool {
        !self.open[..self.dim].iter().any(|&o| o)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.open[axis] {
            1.0 / (self.shape[axis] - 1) as f64
        } else {
            1.0 / self.shape[axis] as f64
        }
    }

    pub fn sites(&self) -> usize {
        self.shape().iter().product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..self.dim].iter().product()
    }

    pub fn coords(&self, site: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut rest = site;
        for axis in (0..self.dim).rev() {
            c[axis] = rest % self.shape[axis];
            rest /= self.shape[axis];
        }
        c
    }

    pub fn site_of(&self, coords: &[usize]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.shape[a] + coords[a] % self.shape[a])
    }

    /// Physical position of a site; periodic axes cover `[0, 1)`.
    pub fn position(&self, site: usize) -> [f64; MAX_DIM] {
        let c = self.coords(site);
        std::array::from_fn(|a| if a < self.dim { c[a] as f64 * self.spacing(a) } else { 0.0 })
    }

    /// Neighbor one step along a periodic axis.
    pub fn shift(&self, site: usize, axis: usize, forward: bool) -> usize {
        let n = self.shape[axis];
        let stride = self.stride(axis);
        let i = (site / stride) % n;
        let j = if forward { (i + 1) % n } else { (i + n - 1) % n };
        site + j * stride - i * stride
    }

    /// Quadrature weight of a site: cell volume, with trapezoid halves at
    /// the ends of open axes.
    pub fn weight(&self, site: usize) -> f64 {
        let c = self.coords(site);
        (0..self.dim)
            .map(|a| {
                let h = self.spacing(a);
                if self.open[a] && (c[a] == 0 || c[a] == self.shape[a] - 1) {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }

    /// Central difference of a site field along `axis`; one-sided second
    /// order at the ends of an open axis.
    pub fn partial<T: FormValue>(&self, site: usize, axis: usize, f: impl Fn(usize) -> T) -> T {
        let h = self.spacing(axis);
        if !self.open[axis] {
            return (f(self.shift(site, axis, true)) - f(self.shift(site, axis, false))) * (0.5 / h);
        }
        let n = self.shape[axis];
        let stride = self.stride(axis);
        let i = (site / stride) % n;
        let at = |j: usize| f(site + j * stride - i * stride);
        if i == 0 {
            (at(0) * -3.0 + at(1) * 4.0 - at(2)) * (0.5 / h)
        } else if i == n - 1 {
            (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h)
        } else {
            (at(i + 1) - at(i - 1)) * (0.5 / h)
        }
    }
}

/// Strictly increasing multi-indices of size `k` in `{0..dim}`, as bit
/// masks, in lexicographic order.
pub fn multi_indices(dim: usize, k: usize) -> &'static [u8] {
    static TABLE: OnceLock<Vec<Vec<Vec<u8>>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|d| {
                (0..=d)
                    .map(|k| {
                        let mut out = Vec::new();
                        combos(d, k, 0, 0, &mut out);
                        out
                    })
                    .collect()
            })
            .collect()
    });
    &table[dim][k]
}

fn combos(d: usize, k: usize, start: usize, mask: u8, out: &mut Vec<u8>) {
    if k == 0 {
        out.push(mask);
        return;
    }
    for i in start..d {
        combos(d, k - 1, i + 1, mask | (1 << i), out);
    }
}

fn component_index(dim: usize, mask: u8) -> usize {
    let k = mask.count_ones() as usize;
    multi_indices(dim, k).iter().position(|&m| m == mask).expect("mask in range")
}

/// Axes of a mask in increasing order.
pub fn mask_axes(mask: u8) -> impl Iterator<Item = usize> {
    (0..8).filter(move |i| mask & (1 << i) != 0)
}

/// Sign of the shuffle that sorts `I ++ J`.
fn shuffle_sign(i: u8, j: u8) -> f64 {
    let mut inversions = 0;
    for a in mask_axes(i) {
        inversions += (j & ((1u8 << a) - 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `dx_j ∧ dx_I = sign · dx_{I∪j}` for `j ∉ I`.
fn insert_sign(j: usize, i: u8) -> f64 {
    shuffle_sign(1 << j, i)
}

/// A differential form with values of type `T` on a grid: `degree`-form with
/// one value per increasing multi-index per site, stored site-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Form<T> {
    grid: TorusGrid,
    degree: usize,
    values: Vec<T>,
}

pub type AlgebraForm = Form<AlgebraElement>;
pub type ScalarForm = Form<f64>;

impl<T: FormValue> Form<T> {
    pub fn zeros(grid: TorusGrid, degree: usize) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeTooHigh { degree, dim: grid.dim() });
        }
        let n = grid.sites() * multi_indices(grid.dim(), degree).len();
        Ok(Self { grid, degree, values: vec![T::default(); n] })
    }

    /// Builds a form from `f(position, component mask)`.
    pub fn from_fn(grid: TorusGrid, degree: usize, f: impl Fn(&[f64], u8) -> T + Sync) -> Result<Self> {
        let mut form = Self::zeros(grid, degree)?;
        let masks = multi_indices(grid.dim(), degree);
        let nc = masks.len();
        if nc > 0 {
            form.values.par_chunks_mut(nc).enumerate().for_each(|(site, chunk)| {
                let x = grid.position(site);
                for (c, &m) in masks.iter().enumerate() {
                    chunk[c] = f(&x[..grid.dim()], m);
                }
            });
        }
        Ok(form)
    }

    pub fn from_values(grid: TorusGrid, degree: usize, values: Vec<T>) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeTooHigh { degree, dim: grid.dim() });
        }
        let expected = grid.sites() * multi_indices(grid.dim(), degree).len();
        if values.len() != expected {
            return Err(Error::Format(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(Self { grid, degree, values })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        multi_indices(self.grid.dim(), self.degree).len()
    }

    pub fn masks(&self) -> &'static [u8] {
        multi_indices(self.grid.dim(), self.degree)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, site: usize, comp: usize) -> T {
        self.values[site * self.components() + comp]
    }

    pub fn set(&mut self, site: usize, comp: usize, v: T) {
        let nc = self.components();
        self.values[site * nc + comp] = v;
    }

    /// Component by multi-index mask.
    pub fn get_mask(&self, site: usize, mask: u8) -> T {
        self.get(site, component_index(self.grid.dim(), mask))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    pub fn map<U: FormValue>(&self, f: impl Fn(T) -> U + Sync) -> Form<U> {
        Form { grid: self.grid, degree: self.degree, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T + Sync) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.par_iter().zip(other.values.par_iter()).map(|(&a, &b)| f(a, b)).collect();
        Ok(Form { grid: self.grid, degree: self.degree, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b * s)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        Ok(())
    }
}

/// Exterior derivative.
pub fn exterior_d<T: FormValue>(omega: &Form<T>) -> Result<Form<T>> {
    let grid = omega.grid;
    let d = grid.dim();
    if omega.degree >= d {
        return Err(Error::DegreeTooHigh { degree: omega.degree + 1, dim: d });
    }
    let in_masks = omega.masks();
    let nc_in = in_masks.len();
    let out_masks = multi_indices(d, omega.degree + 1);
    // (output comp, axis, input comp, sign)
    let mut terms = Vec::new();
    for (oc, &om) in out_masks.iter().enumerate() {
        for j in mask_axes(om) {
            let rest = om & !(1 << j);
            terms.push((oc, j, component_index(d, rest), insert_sign(j, rest)));
        }
    }
    let mut out = Form::zeros(grid, omega.degree + 1)?;
    let nc_out = out_masks.len();
    let vals = &omega.values;
    out.values.par_chunks_mut(nc_out).enumerate().for_each(|(site, chunk)| {
        for &(oc, axis, ic, sign) in &terms {
            let dv = grid.partial(site, axis, |s| vals[s * nc_in + ic]);
            chunk[oc] = chunk[oc] + dv * sign;
        }
    });
    Ok(out)
}

/// Pointwise wedge product with an arbitrary bilinear map on values.
pub fn wedge_with<A, B, C>(alpha: &Form<A>, beta: &Form<B>, f: impl Fn(&A, &B) -> C + Sync) -> Result<Form<C>>
where
    A: FormValue,
    B: FormValue,
    C: FormValue,
{
    if alpha.grid != beta.grid {
        return Err(Error::GridMismatch);
    }
    let grid = alpha.grid;
    let d = grid.dim();
    let (p, q) = (alpha.degree, beta.degree);
    if p + q > d {
        return Err(Error::DegreeTooHigh { degree: p + q, dim: d });
    }
    // Terms are grouped so that the summation order does not depend on the
    // operand order; this makes graded (anti)symmetry hold bit for bit.
    let mut terms = Vec::new();
    for (ia, &ma) in alpha.masks().iter().enumerate() {
        for (ib, &mb) in beta.masks().iter().enumerate() {
            if ma & mb == 0 {
                let key = match p.cmp(&q) {
                    std::cmp::Ordering::Less => ma,
                    std::cmp::Ordering::Greater => mb,
                    std::cmp::Ordering::Equal => ma.min(mb),
                };
                terms.push((component_index(d, ma | mb), key, ia, ib, shuffle_sign(ma, mb)));
            }
        }
    }
    terms.sort_by_key(|t| (t.0, t.1));
    let (na, nb) = (alpha.components(), beta.components());
    let mut out = Form::zeros(grid, p + q)?;
    let nc = out.components();
    out.values.par_chunks_mut(nc).enumerate().for_each(|(site, chunk)| {
        let term = |t: &(usize, u8, usize, usize, f64)| f(&alpha.values[site * na + t.2], &beta.values[site * nb + t.3]) * t.4;
        let mut i = 0;
        while i < terms.len() {
            let t = &terms[i];
            let mut v = term(t);
            if i + 1 < terms.len() && terms[i + 1].0 == t.0 && terms[i + 1].1 == t.1 {
                v = v + term(&terms[i + 1]);
                i += 1;
            }
            chunk[t.0] = chunk[t.0] + v;
            i += 1;
        }
    });
    Ok(out)
}

/// `[α ∧ β]`.
pub fn wedge_bracket(alpha: &AlgebraForm, beta: &AlgebraForm) -> Result<AlgebraForm> {
    wedge_with(alpha, beta, bracket)
}

/// `⟨α ∧ β⟩` with the invariant pairing.
pub fn wedge_pair(alpha: &AlgebraForm, beta: &AlgebraForm) -> Result<ScalarForm> {
    wedge_with(alpha, beta, pair)
}

/// Product of a scalar form with an algebra-valued form.
pub fn wedge_scalar(f: &ScalarForm, beta: &AlgebraForm) -> Result<AlgebraForm> {
    wedge_with(f, beta, |s, x| *x * *s)
}

/// Hodge star for the flat metric and orientation `dx₀ ∧ … ∧ dx_{d−1}`.
pub fn hodge_star<T: FormValue>(omega: &Form<T>) -> Form<T> {
    let grid = omega.grid;
    let d = grid.dim();
    let full: u8 = (1u8 << d) - 1;
    let k = omega.degree;
    let targets: Vec<(usize, f64)> = omega
        .masks()
        .iter()
        .map(|&m| (component_index(d, full & !m), shuffle_sign(m, full & !m)))
        .collect();
    let nc_in = omega.components();
    let mut out = Form::zeros(grid, d - k).expect("d − k ≤ d");
    let nc_out = out.components();
    out.values.par_chunks_mut(nc_out).enumerate().for_each(|(site, chunk)| {
        for (ic, &(oc, sign)) in targets.iter().enumerate() {
            chunk[oc] = omega.values[site * nc_in + ic] * sign;
        }
    });
    out
}

/// Riemann sum of a top-degree scalar form (trapezoid on open axes).
pub fn integrate(omega: &ScalarForm) -> Result<f64> {
    let d = omega.grid.dim();
    if omega.degree != d {
        return Err(Error::DegreeMismatch { expected: d, found: omega.degree });
    }
    let grid = omega.grid;
    if grid.is_periodic() {
        let w: f64 = (0..d).map(|a| grid.spacing(a)).product();
        Ok(w * omega.values.iter().sum::<f64>())
    } else {
        Ok(omega.values.iter().enumerate().map(|(s, v)| grid.weight(s) * v).sum())
    }
}

/// `⟨α, β⟩_{L²} = 2∫⟨α ∧ *β⟩`.
pub fn l2_inner(alpha: &AlgebraForm, beta: &AlgebraForm) -> Result<f64> {
    if alpha.degree != beta.degree {
        return Err(Error::DegreeMismatch { expected: alpha.degree, found: beta.degree });
    }
    Ok(2.0 * integrate(&wedge_pair(alpha, &hodge_star(beta))?)?)
}

/// L² norm squared, computed directly from the coordinates.
pub fn l2_norm_sq(alpha: &AlgebraForm) -> f64 {
    let grid = alpha.grid;
    let w: f64 = (0..grid.dim()).map(|a| grid.spacing(a)).product();
    2.0 * w * alpha.values.iter().map(|v| pair(v, v)).sum::<f64>()
}

/// `d_A*`: the L²-adjoint of `φ ↦ dφ + [A ∧ φ]`, from transposed stencils.
///
/// `(d_A* ω)_I = −Σ_{j∉I} s(j, I) (D_j ω_{I∪j} + [A_j, ω_{I∪j}])`.
pub fn codifferential(omega: &AlgebraForm, a: &AlgebraForm) -> Result<AlgebraForm> {
    if a.degree != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree });
    }
    if omega.degree == 0 {
        return Err(Error::DegreeMismatch { expected: 1, found: 0 });
    }
    if omega.grid != a.grid {
        return Err(Error::GridMismatch);
    }
    let grid = omega.grid;
    let d = grid.dim();
    let out_masks = multi_indices(d, omega.degree - 1);
    let mut terms = Vec::new();
    for (oc, &om) in out_masks.iter().enumerate() {
        for j in (0..d).filter(|j| om & (1 << j) == 0) {
            terms.push((oc, j, component_index(d, om | (1 << j)), insert_sign(j, om)));
        }
    }
    let nc_in = omega.components();
    let mut out = Form::zeros(grid, omega.degree - 1)?;
    let nc_out = out.components();
    let vals = &omega.values;
    out.values.par_chunks_mut(nc_out).enumerate().for_each(|(site, chunk)| {
        for &(oc, axis, ic, sign) in &terms {
            let dv = grid.partial(site, axis, |s| vals[s * nc_in + ic]);
            let adv = bracket(&a.values[site * d + axis], &vals[site * nc_in + ic]);
            chunk[oc] -= (dv + adv) * sign;
        }
    });
    Ok(out)
}
