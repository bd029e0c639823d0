//! The Chern–Simons line over connections on T²: the transition cocycle,
//! its connection form, parallel transport along paths of connections, the
//! cylinder identity `CS = PT`, and the symplectic structure with its
//! moment map.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cs::{cs_form, wzw, wzw_homotopy, WZW_SLICES};
use crate::error::{Error, Result};
use crate::forms::{integrate, wedge_pair, AlgebraForm, TorusGrid};
use crate::gauge::{adjoint_form, covariant_d, curvature, gauge_act, maurer_cartan_pullback, GaugeMap};

/// A unit complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineValue {
    pub re: f64,
    pub im: f64,
}

impl LineValue {
    pub const ONE: Self = Self { re: 1.0, im: 0.0 };

    /// `exp(2πi·x)`.
    pub fn from_phase(x: f64) -> Self {
        let (s, c) = (2.0 * PI * x).sin_cos();
        Self { re: c, im: s }
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    /// `|self − other|`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.complex() - other.complex()).norm()
    }
}

impl std::ops::Mul for LineValue {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let z = self.complex() * o.complex();
        Self { re: z.re, im: z.im }
    }
}

/// Connections on one T² grid sampled at uniform times `k/(N−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionPath {
    samples: Vec<AlgebraForm>,
}

impl ConnectionPath {
    pub fn new(samples: Vec<AlgebraForm>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least 2 samples".into()));
        }
        let grid = *samples[0].grid();
        require_surface(&grid)?;
        for a in &samples {
            if *a.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if a.degree() != 1 {
                return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
            }
        }
        Ok(Self { samples })
    }

    pub fn from_fn(count: usize, f: impl Fn(f64) -> Result<AlgebraForm>) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidInput("a path needs at least 2 samples".into()));
        }
        let samples = (0..count).map(|k| f(k as f64 / (count - 1) as f64)).collect::<Result<_>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[AlgebraForm] {
        &self.samples
    }

    pub fn grid(&self) -> &TorusGrid {
        self.samples[0].grid()
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.samples.len();
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    pub fn reversed(&self) -> Self {
        Self { samples: self.samples.iter().rev().cloned().collect() }
    }

    /// Runs `self` then `other`; the shared endpoint appears once.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.grid() != other.grid() {
            return Err(Error::GridMismatch);
        }
        let end = self.samples.last().expect("nonempty");
        if end.sub(&other.samples[0])?.max_abs() > 1e-12 {
            return Err(Error::InvalidInput("paths do not share an endpoint".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples[1..].iter().cloned());
        Self::new(samples)
    }

    /// `∂_t a` at every sample: centred differences inside, second-order
    /// one-sided stencils at the ends (first order with only two samples).
    fn velocities(&self) -> Result<Vec<AlgebraForm>> {
        let s = &self.samples;
        let n = s.len();
        let h = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|k| {
                if n == 2 {
                    return Ok(s[1].sub(&s[0])?.scale(1.0 / h));
                }
                let v = if k == 0 {
                    s[1].scale(4.0).sub(&s[0].scale(3.0))?.sub(&s[2])?
                } else if k == n - 1 {
                    s[n - 1].scale(3.0).sub(&s[n - 2].scale(4.0))?.add(&s[n - 3])?
                } else {
                    s[k + 1].sub(&s[k - 1])?
                };
                Ok(v.scale(0.5 / h))
            })
            .collect()
    }
}

fn require_surface(grid: &TorusGrid) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::DimMismatch { expected: 2, found: grid.dim() });
    }
    Ok(())
}

/// `c_Σ(a, g) = exp 2πi(∫⟨Ad_{g⁻¹}a ∧ g*θ⟩ + W)` for a gauge map `g` whose
/// WZW value `W` is supplied.
pub fn c_sigma_map(a: &AlgebraForm, g: &GaugeMap, w: f64) -> Result<LineValue> {
    require_surface(a.grid())?;
    let theta = maurer_cartan_pullback(g);
    let pairing = integrate(&wedge_pair(&adjoint_form(g, a)?, &theta)?)?;
    Ok(LineValue::from_phase(pairing + w))
}

/// `c_Σ(a, exp ξ)`.
pub fn c_sigma(a: &AlgebraForm, xi: &AlgebraForm) -> Result<LineValue> {
    require_surface(a.grid())?;
    let g = GaugeMap::exp_of(xi)?;
    c_sigma_map(a, &g, wzw(xi)?)
}

/// `|c(a·g₁, g₂)·c(a, g₁) − c(a, g₁g₂)|` for `g_i = exp ξ_i`. The product
/// `g₁g₂` gets its WZW value from the homotopy `exp(tξ₁)` followed by
/// `exp(ξ₁)exp(tξ₂)`.
pub fn cocycle_residual(a: &AlgebraForm, xi1: &AlgebraForm, xi2: &AlgebraForm) -> Result<f64> {
    let g1 = GaugeMap::exp_of(xi1)?;
    let g2 = GaugeMap::exp_of(xi2)?;
    let w1 = wzw(xi1)?;
    let w2 = wzw(xi2)?;
    let w12 = w1 + wzw_homotopy(Some(&g1), xi2, WZW_SLICES)?;
    let lhs = c_sigma_map(&gauge_act(a, &g1)?, &g2, w2)? * c_sigma_map(a, &g1, w1)?;
    let rhs = c_sigma_map(a, &g1.mul(&g2)?, w12)?;
    Ok(lhs.distance(&rhs))
}

/// `(B_s)_a(η) = 2πi∫⟨a∧η⟩`.
pub fn line_connection_form(a: &AlgebraForm, eta: &AlgebraForm) -> Result<Complex64> {
    require_surface(a.grid())?;
    Ok(Complex64::new(0.0, 2.0 * PI * integrate(&wedge_pair(a, eta)?)?))
}

/// `∫₀¹∫_Σ⟨a_t∧ȧ_t⟩dt` with the trapezoid rule in `t`.
fn transport_phase(path: &ConnectionPath) -> Result<f64> {
    let v = path.velocities()?;
    let n = path.samples.len();
    let h = 1.0 / (n - 1) as f64;
    let mut total = 0.0;
    for (k, (a, adot)) in path.samples.iter().zip(&v).enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        total += w * integrate(&wedge_pair(a, adot)?)?;
    }
    Ok(total * h)
}

/// `PT(a_t) = exp(−2πi∫₀¹∫_Σ⟨a_t∧ȧ_t⟩dt)`.
pub fn parallel_transport(path: &ConnectionPath) -> Result<LineValue> {
    Ok(LineValue::from_phase(-transport_phase(path)?))
}

/// The connection `A = a_t` on `Σ × [0, 1]` with no `dt` component, on the
/// product grid `(x, y, t)` with an open time axis.
pub fn cylinder_connection(path: &ConnectionPath) -> Result<AlgebraForm> {
    let grid = *path.grid();
    let slices = path.samples.len();
    if slices < 3 {
        return Err(Error::InvalidInput("the cylinder needs at least 3 time slices".into()));
    }
    let cylinder = grid.with_open_axis(slices)?;
    let mut out = AlgebraForm::zeros(cylinder, 1)?;
    for (k, a) in path.samples.iter().enumerate() {
        for s in 0..grid.sites() {
            let site = s * slices + k;
            out.set(site, 0, a.get(s, 0));
            out.set(site, 1, a.get(s, 1));
        }
    }
    Ok(out)
}

/// `exp(2πi·cs(A))` for the cylinder connection of the path.
pub fn cylinder_cs(path: &ConnectionPath) -> Result<LineValue> {
    let a = cylinder_connection(path)?;
    Ok(LineValue::from_phase(integrate(&cs_form(&a)?)?))
}

/// `ω(η₁, η₂) = −2∫⟨η₁∧η₂⟩`.
pub fn symplectic_form(eta1: &AlgebraForm, eta2: &AlgebraForm) -> Result<f64> {
    require_surface(eta1.grid())?;
    Ok(-2.0 * integrate(&wedge_pair(eta1, eta2)?)?)
}

/// `μ_ξ(a) = 2∫⟨F_a∧ξ⟩`.
pub fn moment_map(a: &AlgebraForm, xi: &AlgebraForm) -> Result<f64> {
    require_surface(a.grid())?;
    Ok(2.0 * integrate(&wedge_pair(&curvature(a)?, xi)?)?)
}

/// `ω(d_a ξ, η)`, the infinitesimal gauge action paired with `η`.
pub fn gauge_pairing(a: &AlgebraForm, xi: &AlgebraForm, eta: &AlgebraForm) -> Result<f64> {
    symplectic_form(&covariant_d(xi, a)?, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{smooth_random_form, SmoothSpec};
    use crate::gauge::constant_connection;
    use crate::lie::{pair, AlgebraElement};

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::cube(2, n).unwrap()
    }

    fn random(n: usize, degree: usize, amp: f64, seed: u64) -> AlgebraForm {
        smooth_random_form(grid(n), degree, &SmoothSpec::new(amp, 2), seed).unwrap()
    }

    fn unit(v: LineValue) -> f64 {
        (v.complex().norm() - 1.0).abs()
    }

    #[test]
    fn c_sigma_trivial_cases() {
        let a = random(16, 1, 0.8, 1);
        let zero = AlgebraForm::zeros(grid(16), 0).unwrap();
        assert!(c_sigma(&a, &zero).unwrap().distance(&LineValue::ONE) <= 1e-14);
        let lambda = AlgebraElement::new(0.3, -1.2, 0.7);
        let xi = AlgebraForm::from_fn(grid(16), 0, |_, _| lambda).unwrap();
        let a0 = AlgebraForm::zeros(grid(16), 1).unwrap();
        assert!(c_sigma(&a0, &xi).unwrap().distance(&LineValue::ONE) <= 1e-12);
    }

    #[test]
    fn cocycle_residual_converges() {
        let res: Vec<f64> = [24, 48]
            .iter()
            .map(|&n| {
                let a = random(n, 1, 1.0, 3);
                let spec = SmoothSpec::new(0.8, 1);
                let xi1 = smooth_random_form(grid(n), 0, &spec, 4).unwrap();
                let xi2 = smooth_random_form(grid(n), 0, &spec, 5).unwrap();
                cocycle_residual(&a, &xi1, &xi2).unwrap()
            })
            .collect();
        assert!(res[0] <= 1e-2, "{res:?}");
        let ratio = res[0] / res[1];
        assert!(ratio > 3.0, "{res:?}");
    }

    #[test]
    fn connection_form_cases() {
        let a = random(12, 1, 1.0, 7);
        let eta = random(12, 1, 1.0, 8);
        let zeta = random(12, 1, 1.0, 9);
        let zero = AlgebraForm::zeros(grid(12), 1).unwrap();
        assert_eq!(line_connection_form(&zero, &eta).unwrap(), Complex64::new(0.0, 0.0));
        assert!(line_connection_form(&a, &a).unwrap().norm() <= 1e-15);
        let b = line_connection_form(&a, &eta).unwrap();
        assert_eq!(b.re, 0.0);
        let mix = eta.scale(0.4).axpy(-2.5, &zeta).unwrap();
        let lin = line_connection_form(&a, &mix).unwrap() - (b * 0.4 - line_connection_form(&a, &zeta).unwrap() * 2.5);
        assert!(lin.norm() <= 1e-12);
    }

    fn rotating_path(n: usize, slices: usize) -> ConnectionPath {
        let a0 = random(n, 1, 6.0, 21);
        let a1 = random(n, 1, 6.0, 22);
        ConnectionPath::from_fn(slices, |t| {
            let (s, c) = (PI * t / 2.0).sin_cos();
            a0.scale(c).axpy(s, &a1)
        })
        .unwrap()
    }

    #[test]
    fn transport_trivial_paths() {
        let a = random(12, 1, 1.0, 2);
        let constant = ConnectionPath::new(vec![a.clone(); 5]).unwrap();
        assert!(parallel_transport(&constant).unwrap().distance(&LineValue::ONE) <= 1e-14);
        assert!(cylinder_cs(&constant).unwrap().distance(&LineValue::ONE) <= 1e-14);
        let ray = ConnectionPath::from_fn(9, |t| Ok(a.scale(t))).unwrap();
        assert!(parallel_transport(&ray).unwrap().distance(&LineValue::ONE) <= 1e-12);
    }

    #[test]
    fn transport_matches_cylinder() {
        let path = rotating_path(24, 64);
        let pt = parallel_transport(&path).unwrap();
        let cyl = cylinder_cs(&path).unwrap();
        assert!(unit(pt) <= 1e-10 && unit(cyl) <= 1e-10);
        assert!(pt.distance(&LineValue::ONE) > 1e-2, "path should carry phase");
        assert!(pt.distance(&cyl) <= 1e-3);
    }

    #[test]
    fn transport_reversal_and_concatenation() {
        let path = rotating_path(12, 17);
        let pt = parallel_transport(&path).unwrap();
        assert!(parallel_transport(&path.reversed()).unwrap().distance(&pt.conj()) <= 1e-10);
        // Affine pieces: every stencil is exact, so the trapezoid sums split.
        let a0 = random(12, 1, 1.0, 31);
        let a1 = random(12, 1, 1.0, 32);
        let a2 = random(12, 1, 1.0, 33);
        let leg = |p: &AlgebraForm, q: &AlgebraForm| {
            ConnectionPath::from_fn(9, |t| p.scale(1.0 - t).axpy(t, q)).unwrap()
        };
        let (first, second) = (leg(&a0, &a1), leg(&a1, &a2));
        let joined = parallel_transport(&first.concat(&second).unwrap()).unwrap();
        let product = parallel_transport(&first).unwrap() * parallel_transport(&second).unwrap();
        assert!(joined.distance(&product) <= 1e-8);
    }

    #[test]
    fn symplectic_form_cases() {
        let eta = random(10, 1, 1.0, 40);
        let zeta = random(10, 1, 1.0, 41);
        assert_eq!(symplectic_form(&eta, &eta).unwrap(), 0.0);
        assert_eq!(symplectic_form(&eta, &zeta).unwrap() + symplectic_form(&zeta, &eta).unwrap(), 0.0);
        let l = AlgebraElement::new(0.4, 1.1, -0.3);
        let dx = constant_connection(grid(10), &[l, AlgebraElement::ZERO]).unwrap();
        let dy = constant_connection(grid(10), &[AlgebraElement::ZERO, l]).unwrap();
        assert!((symplectic_form(&dx, &dy).unwrap() + 2.0 * pair(&l, &l)).abs() <= 1e-15);
    }

    #[test]
    fn symplectic_form_is_nondegenerate() {
        let g = grid(4);
        let dim = g.sites() * 2 * 3;
        let basis = |i: usize| {
            let mut f = AlgebraForm::zeros(g, 1).unwrap();
            let (site, rest) = (i / 6, i % 6);
            let mut v = AlgebraElement::ZERO;
            v.0[rest % 3] = 1.0;
            f.set(site, rest / 3, v);
            f
        };
        let forms: Vec<AlgebraForm> = (0..dim).map(basis).collect();
        let m = faer::Mat::from_fn(dim, dim, |i, j| symplectic_form(&forms[i], &forms[j]).unwrap());
        let s = m.singular_values().unwrap();
        assert!(s[dim - 1] > 1e-6 * s[0], "{}", s[dim - 1]);
    }

    #[test]
    fn moment_map_vanishes_at_flat() {
        let l = AlgebraElement::new(0.0, 0.0, 1.3);
        let a = constant_connection(grid(12), &[l, l * 0.5]).unwrap();
        for seed in 0..3 {
            assert!(moment_map(&a, &random(12, 0, 1.0, seed)).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn moment_map_analytic_oracle() {
        let l = AlgebraElement::new(0.6, -0.2, 0.9);
        let at = |n: usize, xi_cos: bool| {
            let a = AlgebraForm::from_fn(grid(n), 1, |x, m| if m == 0b01 { l * (2.0 * PI * x[1]).sin() } else { AlgebraElement::ZERO })
                .unwrap();
            let xi = AlgebraForm::from_fn(grid(n), 0, |x, _| if xi_cos { l * (2.0 * PI * x[1]).cos() } else { l }).unwrap();
            moment_map(&a, &xi).unwrap()
        };
        assert!(at(16, false).abs() <= 1e-12);
        // F = −2π cos(2πy) Λ dx∧dy, so μ = −4π·pair(Λ,Λ)·∫cos² = −2π·pair(Λ,Λ).
        let exact = -2.0 * PI * pair(&l, &l);
        let (e16, e32) = ((at(16, true) - exact).abs(), (at(32, true) - exact).abs());
        assert!(e16 <= 0.2 * exact.abs());
        assert!(e16 / e32 > 3.5, "{e16} {e32}");
    }

    #[test]
    fn moment_map_is_hamiltonian() {
        let a = random(12, 1, 1.0, 50);
        let xi = random(12, 0, 1.0, 51);
        let eta = random(12, 1, 1.0, 52);
        let s = 1e-3;
        let mu = |t: f64| moment_map(&a.axpy(t, &eta).unwrap(), &xi).unwrap();
        let derivative = (mu(s) - mu(-s)) / (2.0 * s);
        let omega = gauge_pairing(&a, &xi, &eta).unwrap();
        assert!((derivative - omega).abs() <= 1e-8, "{derivative} {omega}");
        let zeta = random(12, 0, 1.0, 53);
        let lin = moment_map(&a, &xi.axpy(2.0, &zeta).unwrap()).unwrap() - mu(0.0) - 2.0 * moment_map(&a, &zeta).unwrap();
        assert!(lin.abs() <= 1e-12);
    }
}
