//! Holonomy along loops by Runge–Kutta integration of `ġ = −A(α̇)·g`.
//!
//! Composition convention: for `γ₁` followed by `γ₂`,
//! `hol(γ₁·γ₂) = hol(γ₂)·hol(γ₁)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{AlgebraForm, MAX_DIM};
use crate::gauge::flatness_residual;
use crate::lie::{AlgebraElement, GroupElement, Quaternion};

/// Flatness required by [`holonomy_rep`] and [`homotopy_invariance_check`].
pub const FLAT_TOLERANCE: f64 = 1e-6;

pub const MIN_STEPS: usize = 8;

const AXIS_SEGMENTS: usize = 4;

/// A closed loop on the torus: the polyline through samples in
/// universal-cover coordinates at uniform parameters `t_i = i/(N−1)`, both
/// endpoints included. RK4 steps that are a multiple of the segment count
/// never straddle a corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    dim: usize,
    samples: Vec<Vec<f64>>,
    winding: Vec<i64>,
}

/// Allowed rounding in the endpoint displacement of a loop.
const WINDING_TOLERANCE: f64 = 1e-9;

impl LoopPath {
    /// Validates that the endpoint displacement is the integer winding and
    /// that consecutive samples are closer than half a period per axis.
    pub fn new(samples: Vec<Vec<f64>>, winding: Vec<i64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("a loop needs at least 2 samples".into()));
        }
        let dim = winding.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidInput(format!("loop dimension {dim} not in 2..=4")));
        }
        if let Some(p) = samples.iter().find(|p| p.len() != dim) {
            return Err(Error::DimMismatch { expected: dim, found: p.len() });
        }
        let (first, last) = (&samples[0], &samples[samples.len() - 1]);
        for a in 0..dim {
            if (last[a] - first[a] - winding[a] as f64).abs() > WINDING_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "loop displacement {} on axis {a} differs from winding {}",
                    last[a] - first[a],
                    winding[a]
                )));
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            if (0..dim).any(|a| (w[1][a] - w[0][a]).abs() >= 0.5) {
                return Err(Error::InvalidInput(format!("samples {i} and {} are half a period apart", i + 1)));
            }
        }
        Ok(Self { dim, samples, winding })
    }

    /// Straight loop through `base` winding once around `axis`.
    pub fn axis_loop(base: &[f64], axis: usize) -> Result<Self> {
        let dim = base.len();
        if axis >= dim {
            return Err(Error::InvalidInput(format!("axis {axis} out of range for dimension {dim}")));
        }
        let mut end = base.to_vec();
        end[axis] += 1.0;
        let mut winding = vec![0; dim];
        winding[axis] = 1;
        let samples = (0..=AXIS_SEGMENTS)
            .map(|i| {
                let t = i as f64 / AXIS_SEGMENTS as f64;
                base.iter().zip(&end).map(|(a, b)| a + t * (b - a)).collect()
            })
            .collect();
        Self::new(samples, winding)
    }

    /// Samples `f(t)` at `count` uniform parameters; `f(1) − f(0)` must be
    /// the integer winding.
    pub fn from_fn(count: usize, winding: Vec<i64>, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let count = count.max(2);
        let samples = (0..count).map(|i| f(i as f64 / (count - 1) as f64)).collect();
        Self::new(samples, winding)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    pub fn start(&self) -> &[f64] {
        &self.samples[0]
    }

    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { dim: self.dim, samples, winding: self.winding.iter().map(|w| -w).collect() }
    }

    /// `self` followed by `other`, which must start where `self` started
    /// (modulo the lattice); `other` is translated to join up. Both pieces
    /// are refined to a common segment count so the polyline is unchanged.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch { expected: self.dim, found: other.dim });
        }
        let end = &self.samples[self.samples.len() - 1];
        let shift: Vec<f64> = (0..self.dim).map(|a| end[a] - other.samples[0][a]).collect();
        if shift.iter().any(|s| (s - s.round()).abs() > 1e-12) {
            return Err(Error::InvalidInput("loops do not share a base point".into()));
        }
        let (na, nb) = (self.samples.len() - 1, other.samples.len() - 1);
        let segs = lcm(na, nb);
        if segs > 1 << 20 {
            return Err(Error::InvalidInput("loops too finely sampled to concatenate".into()));
        }
        let mut samples: Vec<Vec<f64>> = (0..=segs).map(|i| self.position(i as f64 / segs as f64)).collect();
        samples.extend((1..=segs).map(|i| {
            other.position(i as f64 / segs as f64).iter().zip(&shift).map(|(x, s)| x + s.round()).collect()
        }));
        // exact endpoints
        let last = samples.len() - 1;
        samples[last] = self.samples[0].iter().zip(self.winding.iter().zip(&other.winding)).map(|(x, (a, b))| x + (a + b) as f64).collect();
        samples[segs] = end.clone();
        Self::new(samples, self.winding.iter().zip(&other.winding).map(|(a, b)| a + b).collect())
    }

    /// Position and velocity on segment `seg` of the polyline.
    fn eval_on(&self, t: f64, seg: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.samples.len() - 1;
        let s = t * m as f64 - seg as f64;
        let (p, q) = (&self.samples[seg], &self.samples[seg + 1]);
        let pos = (0..self.dim).map(|a| p[a] + s * (q[a] - p[a])).collect();
        let vel = (0..self.dim).map(|a| (q[a] - p[a]) * m as f64).collect();
        (pos, vel)
    }

    fn segment_of(&self, t: f64) -> usize {
        let m = self.samples.len() - 1;
        ((t.clamp(0.0, 1.0) * m as f64).floor() as usize).min(m - 1)
    }

    /// Interpolated position at parameter `t ∈ [0, 1]`.
    pub fn position(&self, t: f64) -> Vec<f64> {
        self.eval_on(t, self.segment_of(t)).0
    }
}

/// Multilinear interpolation of a 1-form at a point, periodic.
fn interpolate(a: &AlgebraForm, p: &[f64]) -> [AlgebraElement; MAX_DIM] {
    let g = a.grid();
    let d = g.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for ax in 0..d {
        let n = g.shape()[ax];
        let u = p[ax] * n as f64;
        let f = u.floor();
        frac[ax] = u - f;
        base[ax] = (f as i64).rem_euclid(n as i64) as usize;
    }
    let mut out = [AlgebraElement::ZERO; MAX_DIM];
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut c = [0usize; MAX_DIM];
        for ax in 0..d {
            let up = corner >> ax & 1 == 1;
            w *= if up { frac[ax] } else { 1.0 - frac[ax] };
            c[ax] = if up { (base[ax] + 1) % g.shape()[ax] } else { base[ax] };
        }
        if w == 0.0 {
            continue;
        }
        let site = g.site_of(&c[..d]);
        for (j, slot) in out.iter_mut().enumerate().take(d) {
            *slot += a.get(site, j) * w;
        }
    }
    out
}

/// `A(α̇)` as a quaternion at parameter `t` on segment `seg`.
fn generator(a: &AlgebraForm, gamma: &LoopPath, t: f64, seg: usize) -> Quaternion {
    let (p, v) = gamma.eval_on(t, seg);
    let vals = interpolate(a, &p);
    let x = (0..gamma.dim).fold(AlgebraElement::ZERO, |acc, j| acc + vals[j] * v[j]);
    x.quaternion()
}

/// Holonomy along `γ` by classical RK4 with `steps` uniform steps.
pub fn holonomy(a: &AlgebraForm, gamma: &LoopPath, steps: usize) -> Result<GroupElement> {
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    if a.grid().dim() != gamma.dim {
        return Err(Error::DimMismatch { expected: a.grid().dim(), found: gamma.dim });
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!("holonomy needs at least {MIN_STEPS} steps, got {steps}")));
    }
    let dt = 1.0 / steps as f64;
    let mut g = Quaternion::ONE;
    for k in 0..steps {
        let t = k as f64 * dt;
        // all stages of a step use the segment containing its midpoint
        let seg = gamma.segment_of(t + 0.5 * dt);
        let rhs = |t: f64, g: Quaternion| generator(a, gamma, t, seg) * g * -1.0;
        let k1 = rhs(t, g);
        let k2 = rhs(t + 0.5 * dt, g + k1 * (0.5 * dt));
        let k3 = rhs(t + 0.5 * dt, g + k2 * (0.5 * dt));
        let k4 = rhs(t + dt, g + k3 * dt);
        g = g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        g = g.to_group().as_quaternion();
    }
    Ok(g.to_group())
}

fn require_flat(a: &AlgebraForm) -> Result<()> {
    let residual = flatness_residual(a)?;
    if residual > FLAT_TOLERANCE {
        return Err(Error::NotFlat { residual, tolerance: FLAT_TOLERANCE });
    }
    Ok(())
}

/// Holonomies around the coordinate loops through the origin.
pub fn holonomy_rep(a: &AlgebraForm, steps: usize) -> Result<Vec<GroupElement>> {
    require_flat(a)?;
    let d = a.grid().dim();
    (0..d)
        .into_par_iter()
        .map(|axis| holonomy(a, &LoopPath::axis_loop(&vec![0.0; d], axis)?, steps))
        .collect()
}

const PERTURBED_SEGMENTS: usize = 128;

fn lcm(a: usize, b: usize) -> usize {
    let gcd = |mut x: usize, mut y: usize| {
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    };
    a / gcd(a, b) * b
}

/// Perturbed copies of `γ` with the same endpoints: each transverse axis
/// is displaced by `δ·φ(t)` for a few bump shapes `φ` vanishing at 0 and 1.
pub fn perturbed_family(gamma: &LoopPath, delta: f64) -> Result<Vec<LoopPath>> {
    let shapes: [fn(f64) -> f64; 3] = [
        |t| (std::f64::consts::PI * t).sin().powi(2),
        |t| (2.0 * std::f64::consts::PI * t).sin(),
        |t| (std::f64::consts::PI * t).sin() * (3.0 * std::f64::consts::PI * t).sin(),
    ];
    let count = PERTURBED_SEGMENTS + 1;
    let mut out = Vec::new();
    for axis in 0..gamma.dim {
        for shape in shapes {
            let last = count - 1;
            let samples = (0..count)
                .map(|i| {
                    if i == 0 || i == last {
                        return gamma.samples[if i == 0 { 0 } else { gamma.samples.len() - 1 }].clone();
                    }
                    let t = i as f64 / last as f64;
                    let mut p = gamma.position(t);
                    p[axis] += delta * shape(t);
                    p
                })
                .collect();
            let lp = LoopPath::new(samples, gamma.winding.clone())?;
            out.push(lp);
        }
    }
    Ok(out)
}

/// Largest `‖hol(γ') − hol(γ)‖_F` over [`perturbed_family`], without any
/// flatness precondition.
pub fn homotopy_deviation(a: &AlgebraForm, gamma: &LoopPath, delta: f64, steps: usize) -> Result<f64> {
    let reference = holonomy(a, gamma, steps)?;
    let family = perturbed_family(gamma, delta)?;
    let devs: Result<Vec<f64>> = family.par_iter().map(|g| Ok(holonomy(a, g, steps)?.distance(&reference))).collect();
    Ok(devs?.into_iter().fold(0.0, f64::max))
}

/// [`homotopy_deviation`] for a connection required to be flat.
pub fn homotopy_invariance_check(a: &AlgebraForm, gamma: &LoopPath, delta: f64, steps: usize) -> Result<f64> {
    require_flat(a)?;
    homotopy_deviation(a, gamma, delta, steps)
}
