//! Connections, gauge maps, curvature and the flat-connection search.
//!
//! A connection on the trivial bundle over a torus is an algebra-valued
//! 1-form. Gauge maps act on the right by `A·u = Ad_{u⁻¹}A + u*θ`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{smooth_random_form, SmoothSpec};
use crate::forms::{codifferential, exterior_d, l2_inner, l2_norm_sq, wedge_bracket, AlgebraForm, TorusGrid};
use crate::lie::{adjoint_group, exp_alg, AlgebraElement, GroupElement, Quaternion};

/// Per-link jump bound for gauge maps, in Frobenius norm.
pub const MAX_LINK_JUMP: f64 = 0.5;

/// A group-valued map on the grid sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeMap {
    grid: TorusGrid,
    values: Vec<GroupElement>,
}

impl GaugeMap {
    /// Validated constructor: rejects maps that jump by `≥ 0.5` across a link.
    pub fn new(grid: TorusGrid, values: Vec<GroupElement>) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::Format(format!("expected {} sites, found {}", grid.sites(), values.len())));
        }
        let map = Self { grid, values };
        map.check_smooth()?;
        Ok(map)
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> GroupElement + Sync) -> Result<Self> {
        let values = (0..grid.sites())
            .into_par_iter()
            .map(|s| f(&grid.position(s)[..grid.dim()]))
            .collect();
        Self::new(grid, values)
    }

    pub fn identity(grid: TorusGrid) -> Self {
        Self { grid, values: vec![GroupElement::IDENTITY; grid.sites()] }
    }

    pub fn constant(grid: TorusGrid, g: GroupElement) -> Self {
        Self { grid, values: vec![g; grid.sites()] }
    }

    /// `u = exp(ξ)` for an algebra-valued 0-form.
    pub fn exp_of(xi: &AlgebraForm) -> Result<Self> {
        if xi.degree() != 0 {
            return Err(Error::DegreeMismatch { expected: 0, found: xi.degree() });
        }
        Self::new(*xi.grid(), xi.values().par_iter().map(exp_alg).collect())
    }

    /// `exp` of a seeded smooth random 0-form.
    pub fn smooth_random(grid: TorusGrid, spec: &SmoothSpec, seed: u64) -> Result<Self> {
        Self::exp_of(&smooth_random_form(grid, 0, spec, seed)?)
    }

    /// Radial bump onto SU(2) ≅ S³: identity outside the ball `|x − c| ≥ r`
    /// (periodic distance), `−I` at the centre. It has degree +1.
    pub fn bump(grid: TorusGrid, centre: [f64; 3], radius: f64) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::DimMismatch { expected: 3, found: grid.dim() });
        }
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidInput(format!("bump radius {radius} must lie in (0, 0.5)")));
        }
        Self::from_fn(grid, |x| bump_value(x, &centre, radius))
    }

    /// The bundled degree-1 map: a bump of radius 0.4 at the torus centre.
    pub fn degree_one(grid: TorusGrid) -> Result<Self> {
        Self::bump(grid, [0.5; 3], 0.4)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[GroupElement] {
        &self.values
    }

    pub fn get(&self, site: usize) -> GroupElement {
        self.values[site]
    }

    pub fn inverse(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(GroupElement::inverse).collect() }
    }

    /// Pointwise product `(uv)(x) = u(x)v(x)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.par_iter().zip(&other.values).map(|(a, b)| a.compose(b)).collect();
        Self::new(self.grid, values)
    }

    /// Largest per-link jump `‖u(x+e_j) − u(x)‖_F` and the site where it occurs.
    pub fn max_link_jump(&self) -> (f64, usize) {
        let g = &self.grid;
        (0..g.sites())
            .into_par_iter()
            .map(|s| {
                let c = g.coords(s);
                let mut m = 0.0_f64;
                for axis in 0..g.dim() {
                    if g.is_open(axis) && c[axis] + 1 == g.shape()[axis] {
                        continue;
                    }
                    let t = g.shift(s, axis, true);
                    m = m.max(self.values[s].distance(&self.values[t]));
                }
                (m, s)
            })
            .reduce(|| (0.0, 0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    }

    fn check_smooth(&self) -> Result<()> {
        let (jump, site) = self.max_link_jump();
        if jump >= MAX_LINK_JUMP {
            return Err(Error::RoughGauge { site, jump });
        }
        Ok(())
    }
}

fn bump_value(x: &[f64], centre: &[f64; 3], radius: f64) -> GroupElement {
    let disp: [f64; 3] = std::array::from_fn(|a| {
        let d = x[a] - centre[a];
        d - d.round()
    });
    let r = disp.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r >= radius {
        return GroupElement::IDENTITY;
    }
    let psi = std::f64::consts::PI * (1.0 - bump_profile(r / radius));
    let (s, c) = psi.sin_cos();
    if r == 0.0 {
        return GroupElement::MINUS_IDENTITY;
    }
    GroupElement::from_quaternion([c, -s * disp[0] / r, -s * disp[1] / r, -s * disp[2] / r]).expect("unit quaternion")
}

/// Derivative of the radial profile (unnormalized). It is even in `t`, so the
/// bump is smooth at the centre, and has a double zero at `t = 1`. The
/// exponential tilt moves slope outwards, which lowers the third derivatives
/// of the map for a given link-jump budget.
fn bump_profile_slope(t: f64) -> f64 {
    (1.0 - t.powi(12)).powi(2) * (-1.6 * t * t + 3.5 * t.powi(4)).exp()
}

const PROFILE_CELLS: usize = 4096;

/// Radial profile `s(ρ) = ∫₀^ρ s'/∫₀¹ s'`, with `s(0) = 0` and `s(1) = 1`.
fn bump_profile(rho: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        // cumulative Simpson on each cell
        let dt = 1.0 / PROFILE_CELLS as f64;
        let mut acc = vec![0.0; PROFILE_CELLS + 1];
        for i in 0..PROFILE_CELLS {
            let t0 = i as f64 * dt;
            let cell = dt / 6.0 * (bump_profile_slope(t0) + 4.0 * bump_profile_slope(t0 + 0.5 * dt) + bump_profile_slope(t0 + dt));
            acc[i + 1] = acc[i] + cell;
        }
        let total = acc[PROFILE_CELLS];
        acc.iter().map(|v| v / total).collect()
    });
    let rho = rho.clamp(0.0, 1.0);
    let dt = 1.0 / PROFILE_CELLS as f64;
    let i = ((rho / dt) as usize).min(PROFILE_CELLS - 1);
    // cubic Hermite with exact slopes
    let norm = (table[1] - table[0]) / (dt / 6.0 * (bump_profile_slope(0.0) + 4.0 * bump_profile_slope(0.5 * dt) + bump_profile_slope(dt)));
    let (t0, t1) = (i as f64 * dt, (i + 1) as f64 * dt);
    let (y0, y1) = (table[i], table[i + 1]);
    let (m0, m1) = (bump_profile_slope(t0) * norm * dt, bump_profile_slope(t1) * norm * dt);
    let x = (rho - t0) / (t1 - t0);
    let (x2, x3) = (x * x, x * x * x);
    (2.0 * x3 - 3.0 * x2 + 1.0) * y0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * y1 + (x3 - x2) * m1
}

/// Curvature `F = dA + ½[A∧A]`.
pub fn curvature(a: &AlgebraForm) -> Result<AlgebraForm> {
    check_connection(a)?;
    exterior_d(a)?.axpy(0.5, &wedge_bracket(a, a)?)
}

/// Discrete `u⁻¹du`: per axis, the algebra part of `u⁻¹·D_j u`.
pub fn maurer_cartan_pullback(u: &GaugeMap) -> AlgebraForm {
    let g = u.grid;
    let d = g.dim();
    let mut out = AlgebraForm::zeros(g, 1).expect("degree 1");
    out.values_mut().par_chunks_mut(d).enumerate().for_each(|(site, chunk)| {
        let inv = u.values[site].as_quaternion().conj();
        for (axis, slot) in chunk.iter_mut().enumerate() {
            let du = g.partial_quaternion(site, axis, |s| u.values[s].as_quaternion());
            *slot = (inv * du).vector_part();
        }
    });
    out
}

/// `A·u = Ad_{u⁻¹}A + u*θ`.
pub fn gauge_act(a: &AlgebraForm, u: &GaugeMap) -> Result<AlgebraForm> {
    check_connection(a)?;
    if *a.grid() != u.grid {
        return Err(Error::GridMismatch);
    }
    let theta = maurer_cartan_pullback(u);
    let d = a.grid().dim();
    let mut out = theta;
    out.values_mut().par_chunks_mut(d).enumerate().for_each(|(site, chunk)| {
        let inv = u.values[site].inverse();
        for (axis, slot) in chunk.iter_mut().enumerate() {
            *slot += adjoint_group(&inv, &a.get(site, axis));
        }
    });
    Ok(out)
}

/// Pointwise `Ad_{u⁻¹}ω` for any form degree.
pub fn adjoint_form(u: &GaugeMap, omega: &AlgebraForm) -> Result<AlgebraForm> {
    if *omega.grid() != u.grid {
        return Err(Error::GridMismatch);
    }
    let nc = omega.components();
    let mut out = omega.clone();
    if nc > 0 {
        out.values_mut().par_chunks_mut(nc).enumerate().for_each(|(site, chunk)| {
            let inv = u.values[site].inverse();
            for v in chunk.iter_mut() {
                *v = adjoint_group(&inv, v);
            }
        });
    }
    Ok(out)
}

/// `d_A φ = dφ + [A∧φ]`.
pub fn covariant_d(phi: &AlgebraForm, a: &AlgebraForm) -> Result<AlgebraForm> {
    check_connection(a)?;
    exterior_d(phi)?.add(&wedge_bracket(a, phi)?)
}

/// `‖F_A‖²_{L²}`.
pub fn flatness_residual(a: &AlgebraForm) -> Result<f64> {
    Ok(l2_norm_sq(&curvature(a)?))
}

/// A constant connection `Σ Λ_j dx_j`.
pub fn constant_connection(grid: TorusGrid, values: &[AlgebraElement]) -> Result<AlgebraForm> {
    if values.len() != grid.dim() {
        return Err(Error::DimMismatch { expected: grid.dim(), found: values.len() });
    }
    AlgebraForm::from_fn(grid, 1, |_, m| values[m.trailing_zeros() as usize])
}

fn check_connection(a: &AlgebraForm) -> Result<()> {
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatSearchOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FlatSearchOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct FlatSearch {
    pub connection: AlgebraForm,
    pub residual: f64,
    pub iterations: usize,
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

/// Gradient descent on `E(A) = ‖F_A‖²` with Armijo backtracking.
///
/// The gradient is `2 d_A* F_A`, exact for the discrete energy.
pub fn find_flat(a0: &AlgebraForm, opts: &FlatSearchOptions) -> Result<FlatSearch> {
    check_connection(a0)?;
    let mut a = a0.clone();
    let mut f = curvature(&a)?;
    let mut energy = l2_norm_sq(&f);
    for iter in 0..opts.max_iters {
        if energy <= opts.tol {
            return Ok(FlatSearch { connection: a, residual: energy, iterations: iter });
        }
        let grad = codifferential(&f, &a)?.scale(2.0);
        let slope = l2_inner(&grad, &grad)?;
        let mut step = 1.0;
        loop {
            let trial = a.axpy(-step, &grad)?;
            let ft = curvature(&trial)?;
            let et = l2_norm_sq(&ft);
            if et <= energy - ARMIJO_C * step * slope {
                a = trial;
                f = ft;
                energy = et;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::FlatSearch { residual: energy, iterations: iter, iterate: Box::new(a) });
            }
        }
    }
    if energy <= opts.tol {
        return Ok(FlatSearch { connection: a, residual: energy, iterations: opts.max_iters });
    }
    Err(Error::FlatSearch { residual: energy, iterations: opts.max_iters, iterate: Box::new(a) })
}

impl TorusGrid {
    pub(crate) fn partial_quaternion(&self, site: usize, axis: usize, f: impl Fn(usize) -> Quaternion) -> Quaternion {
        let q = |s: usize| AlgebraQuat(f(s));
        self.partial(site, axis, q).0
    }
}

/// Quaternion arithmetic wrapper so quaternion fields reuse the form stencils.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct AlgebraQuat(Quaternion);

impl std::ops::Add for AlgebraQuat {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self(self.0 + o.0)
    }
}

impl std::ops::Sub for AlgebraQuat {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self(self.0 - o.0)
    }
}

impl std::ops::Neg for AlgebraQuat {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0 * -1.0)
    }
}

impl std::ops::Mul<f64> for AlgebraQuat {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

impl crate::forms::FormValue for AlgebraQuat {
    fn max_abs(&self) -> f64 {
        self.0 .0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}
