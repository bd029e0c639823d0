//! The Chern–Simons form and action, gauge shifts, mapping degree, the WZW
//! functional and the Chern–Weil transgression check on T⁴.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{exterior_d, integrate, wedge_bracket, wedge_pair, AlgebraForm, ScalarForm, TorusGrid};
use crate::gauge::{curvature, gauge_act, maurer_cartan_pullback, GaugeMap};
use crate::lie::{exp_alg, AlgebraElement, GroupElement};

/// Distance from an integer above which a degree is rejected outright.
pub const NOT_INTEGER_LIMIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsReport {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge_shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nearest_integer: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl CsReport {
    pub fn value(value: f64) -> Self {
        Self { value, gauge_shift: None, nearest_integer: None, residual: None }
    }

    /// Report for a shift, rounding half away from zero.
    pub fn with_shift(value: f64, shift: f64) -> Self {
        let k = shift.round();
        Self { value, gauge_shift: Some(shift), nearest_integer: Some(k as i64), residual: Some((shift - k).abs()) }
    }
}

fn require_dim(grid: &TorusGrid, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, found: grid.dim() });
    }
    Ok(())
}

/// `⟨A∧F⟩ − (1/6)⟨A∧[A∧A]⟩` in any dimension ≥ 3.
fn transgression_form(a: &AlgebraForm) -> Result<ScalarForm> {
    let f = curvature(a)?;
    let aa = wedge_bracket(a, a)?;
    wedge_pair(a, &f)?.axpy(-1.0 / 6.0, &wedge_pair(a, &aa)?)
}

/// The Chern–Simons 3-form `α(A)`.
pub fn cs_form(a: &AlgebraForm) -> Result<ScalarForm> {
    require_dim(a.grid(), 3)?;
    transgression_form(a)
}

/// `cs(A) = ∫ α(A)`.
pub fn cs(a: &AlgebraForm) -> Result<f64> {
    integrate(&cs_form(a)?)
}

/// `d cs_A(η) = 2∫⟨F_A ∧ η⟩`.
pub fn dcs(a: &AlgebraForm, eta: &AlgebraForm) -> Result<f64> {
    require_dim(a.grid(), 3)?;
    if a.grid() != eta.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(2.0 * integrate(&wedge_pair(&curvature(a)?, eta)?)?)
}

/// `−(1/6)⟨θ∧[θ∧θ]⟩` for a 1-form θ.
fn wzw_density(theta: &AlgebraForm) -> Result<ScalarForm> {
    Ok(wedge_pair(theta, &wedge_bracket(theta, theta)?)?.scale(-1.0 / 6.0))
}

/// The unrounded degree integral `−∫(1/6)⟨u*θ∧[u*θ∧u*θ]⟩`.
pub fn degree_integral(u: &GaugeMap) -> Result<f64> {
    require_dim(u.grid(), 3)?;
    integrate(&wzw_density(&maurer_cartan_pullback(u))?)
}

/// Mapping degree of `u: T³ → SU(2)` as `(integral, nearest integer)`.
pub fn degree(u: &GaugeMap) -> Result<(f64, i64)> {
    let r = degree_integral(u)?;
    let k = r.round();
    let distance = (r - k).abs();
    if distance >= NOT_INTEGER_LIMIT {
        return Err(Error::NotInteger { value: r, distance });
    }
    Ok((r, k as i64))
}

/// `cs(A·u) − cs(A)`, which is an integer (the degree of `u`) up to
/// discretization error.
pub fn gauge_shift(a: &AlgebraForm, u: &GaugeMap) -> Result<CsReport> {
    require_dim(a.grid(), 3)?;
    let before = cs(a)?;
    let after = cs(&gauge_act(a, u)?)?;
    let shift = after - before;
    let report = CsReport::with_shift(before, shift);
    let distance = report.residual.unwrap_or(0.0);
    if distance >= NOT_INTEGER_LIMIT {
        return Err(Error::NotInteger { value: shift, distance });
    }
    Ok(report)
}

/// Default number of time slices for WZW extensions (odd, for Simpson).
pub const WZW_SLICES: usize = 33;

/// `W_Σ(exp ξ)` using the extension `g_t = exp(tξ)` over `Σ × [0, 1]`.
pub fn wzw(xi: &AlgebraForm) -> Result<f64> {
    wzw_homotopy(None, xi, WZW_SLICES)
}

/// WZW integral over `Σ × [0, 1]` of the homotopy `g_t = base·exp(tξ)`.
///
/// Since `g_t⁻¹ ∂_t g_t = ξ` exactly, only the surface directions are
/// differenced. The time integral uses Simpson's rule on `slices` nodes.
pub fn wzw_homotopy(base: Option<&GaugeMap>, xi: &AlgebraForm, slices: usize) -> Result<f64> {
    let grid = *xi.grid();
    require_dim(&grid, 2)?;
    if xi.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: xi.degree() });
    }
    if let Some(b) = base {
        if *b.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    if slices < 3 || slices % 2 == 0 {
        return Err(Error::InvalidInput(format!("WZW needs an odd number ≥ 3 of time slices, got {slices}")));
    }
    let cylinder = grid.with_open_axis(slices)?;
    let n_sigma = grid.sites();
    let ht = 1.0 / (slices - 1) as f64;
    let mut theta = AlgebraForm::zeros(cylinder, 1)?;
    // product-grid site index is (sigma site)·slices + k, axis order (x, y, t)
    let values: Vec<Vec<[AlgebraElement; 3]>> = (0..slices)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * ht;
            let g: Vec<GroupElement> = (0..n_sigma)
                .map(|s| {
                    let e = exp_alg(&(xi.get(s, 0) * t));
                    match base {
                        Some(b) => b.get(s).compose(&e),
                        None => e,
                    }
                })
                .collect();
            (0..n_sigma)
                .map(|s| {
                    let inv = g[s].as_quaternion().conj();
                    let tx = (inv * grid.partial_quaternion(s, 0, |p| g[p].as_quaternion())).vector_part();
                    let ty = (inv * grid.partial_quaternion(s, 1, |p| g[p].as_quaternion())).vector_part();
                    [tx, ty, xi.get(s, 0)]
                })
                .collect()
        })
        .collect();
    for (k, slice) in values.iter().enumerate() {
        for (s, th) in slice.iter().enumerate() {
            let site = s * slices + k;
            for (axis, v) in th.iter().enumerate() {
                theta.set(site, axis, *v);
            }
        }
    }
    let density = wzw_density(&theta)?;
    let hs: f64 = (0..2).map(|a| grid.spacing(a)).product();
    let total = (0..cylinder.sites())
        .map(|site| {
            let k = site % slices;
            let w = if k == 0 || k == slices - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * density.get(site, 0)
        })
        .sum::<f64>();
    Ok(total * hs * ht / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernWeilReport {
    /// `max |dα(A) − ⟨F∧F⟩|` over sites.
    pub max_residual: f64,
    /// `∫⟨F∧F⟩` (second Chern number up to sign).
    pub integral_ff: f64,
    /// `∫ dα(A)`, which telescopes to zero on the torus.
    pub integral_dalpha: f64,
}

/// Transgression identity `dα(A) = ⟨F_A∧F_A⟩` on T⁴.
pub fn chern_weil_check(a: &AlgebraForm) -> Result<ChernWeilReport> {
    require_dim(a.grid(), 4)?;
    let f = curvature(a)?;
    let dalpha = exterior_d(&transgression_form(a)?)?;
    let ff = wedge_pair(&f, &f)?;
    Ok(ChernWeilReport {
        max_residual: dalpha.sub(&ff)?.max_abs(),
        integral_ff: integrate(&ff)?,
        integral_dalpha: integrate(&dalpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{smooth_random_form, SmoothSpec};
    use crate::gauge::constant_connection;
    use crate::lie::{bracket, pair};

    fn t3(n: usize) -> TorusGrid {
        TorusGrid::cube(3, n).unwrap()
    }

    fn lams() -> [AlgebraElement; 3] {
        [AlgebraElement::new(0.3, -0.5, 0.8), AlgebraElement::new(1.0, 0.0, 0.3), AlgebraElement::new(0.0, -0.7, 0.2)]
    }

    #[test]
    fn cs_trivial_cases() {
        let g = t3(6);
        assert_eq!(cs(&AlgebraForm::zeros(g, 1).unwrap()).unwrap(), 0.0);
        let l = lams()[0];
        for t in [0.5, 1.0, 3.0] {
            let a = constant_connection(g, &[l * t, l * (2.0 * t), l * -t]).unwrap();
            assert_eq!(cs_form(&a).unwrap().max_abs(), 0.0);
        }
        assert!(matches!(cs(&AlgebraForm::zeros(TorusGrid::cube(2, 6).unwrap(), 1).unwrap()), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn cs_form_constant_symbolic() {
        // F_ij = [Λi,Λj]; ⟨A∧F⟩ = Σ_cyc ⟨Λi, F_jk⟩ = 3⟨Λ1,[Λ2,Λ3]⟩,
        // ⟨A∧[A∧A]⟩ = 6⟨Λ1,[Λ2,Λ3]⟩; α = 3c − c = 2c.
        let l = lams();
        let a = constant_connection(t3(4), &l).unwrap();
        let c = pair(&l[0], &bracket(&l[1], &l[2]));
        let form = cs_form(&a).unwrap();
        for v in form.values() {
            assert!((v - 2.0 * c).abs() < 1e-15);
        }
    }

    #[test]
    fn dcs_matches_finite_difference() {
        let g = t3(8);
        let a = smooth_random_form(g, 1, &SmoothSpec::new(1.5, 2), 1).unwrap();
        let eta = smooth_random_form(g, 1, &SmoothSpec::new(1.0, 2), 2).unwrap();
        let eps = 1e-5;
        let fd = (cs(&a.axpy(eps, &eta).unwrap()).unwrap() - cs(&a.axpy(-eps, &eta).unwrap()).unwrap()) / (2.0 * eps);
        let an = dcs(&a, &eta).unwrap();
        assert!((fd - an).abs() <= 1e-8 * an.abs().max(1e-3), "{fd} vs {an}");
    }

    #[test]
    fn dcs_vanishes_at_flat_connection() {
        let g = t3(6);
        let l = lams()[1];
        let a = constant_connection(g, &[l, l * 0.3, l * -2.0]).unwrap();
        let eta = smooth_random_form(g, 1, &SmoothSpec::new(1.0, 2), 3).unwrap();
        assert!(dcs(&a, &eta).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn degree_of_constant_map_is_zero() {
        let u = GaugeMap::constant(t3(8), exp_alg(&lams()[0]));
        assert_eq!(degree(&u).unwrap(), (0.0, 0));
    }

    #[test]
    fn orientation_reversal_negates_cs() {
        let g = t3(8);
        let a = smooth_random_form(g, 1, &SmoothSpec::new(1.5, 2), 4).unwrap();
        let swapped = AlgebraForm::from_fn(g, 1, |x, m| {
            let n = 8.0;
            let site = g.site_of(&[(x[1] * n).round() as usize, (x[0] * n).round() as usize, (x[2] * n).round() as usize]);
            match m {
                0b001 => a.get(site, 1),
                0b010 => a.get(site, 0),
                _ => a.get(site, 2),
            }
        })
        .unwrap();
        let (c1, c2) = (cs(&a).unwrap(), cs(&swapped).unwrap());
        assert!((c1 + c2).abs() <= 1e-14 * c1.abs().max(1.0), "{c1} {c2}");
    }

    #[test]
    fn wzw_trivial_cases() {
        let g = TorusGrid::cube(2, 8).unwrap();
        assert_eq!(wzw(&AlgebraForm::zeros(g, 0).unwrap()).unwrap(), 0.0);
        let c = AlgebraForm::from_fn(g, 0, |_, _| lams()[0]).unwrap();
        assert_eq!(wzw(&c).unwrap(), 0.0);
        assert!(wzw_homotopy(None, &c, 4).is_err());
    }

    #[test]
    fn chern_weil_constant_connection() {
        let g = TorusGrid::cube(4, 4).unwrap();
        let l = lams();
        let a = constant_connection(g, &[l[0], l[1], l[2], l[0] * -0.5 + l[1]]).unwrap();
        let r = chern_weil_check(&a).unwrap();
        assert!(r.max_residual <= 1e-10);
        assert!(r.integral_dalpha.abs() <= 1e-12);
        let zero = chern_weil_check(&AlgebraForm::zeros(g, 1).unwrap()).unwrap();
        assert_eq!(zero.max_residual, 0.0);
    }

    #[test]
    fn report_rounding() {
        let r = CsReport::with_shift(0.0, 0.999);
        assert_eq!(r.nearest_integer, Some(1));
        assert!((r.residual.unwrap() - 0.001).abs() < 1e-12);
    }
}
