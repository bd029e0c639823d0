//! SU(2) and su(2) at the level of single matrices.
//!
//! Group elements are stored as unit quaternions `(a, b, c, d)` with
//!
//!   U = a·I + b·(iσ₁) + c·(iσ₂) + d·(iσ₃),
//!
//! which is the same data as the 2×2 complex matrix but keeps unitarity and
//! `det = 1` down to a single normalization. Algebra elements are stored as
//! three real coordinates in the basis `e_k = (i/2)σ_k`, for which
//! `[e₁, e₂] = −e₃` (cyclically) and `[X, Y] = −X × Y` in coordinates.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2×2 complex matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

/// `1 / (8π²)`: scale of the invariant pairing `⟨X, Y⟩ = −tr(XY)/(8π²)`.
pub const PAIRING_SCALE: f64 = 1.0 / (8.0 * PI * PI);

const TRUNCATION_THRESHOLD: f64 = 1e-6;
const UNITARITY_DRIFT: f64 = 1e-12;

/// Element of su(2): anti-Hermitian traceless 2×2 matrix, as coordinates in
/// the basis `e_k = (i/2)σ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgebraElement(pub [f64; 3]);

/// Element of SU(2) as a unit quaternion in the `iσ_k` convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement(pub(crate) [f64; 4]);

/// Real linear combination of `I` and `iσ_k`. This algebra is closed under
/// sums and products, so Runge–Kutta stages and finite differences of group
/// elements stay inside it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion(pub [f64; 4]);

impl AlgebraElement {
    pub const ZERO: Self = Self([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    /// Basis vector `e_k`, `k ∈ {0, 1, 2}`.
    pub fn basis(k: usize) -> Self {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        Self(v)
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Operator norm of the matrix; equals `‖v‖/2`.
    pub fn operator_norm(&self) -> f64 {
        0.5 * self.norm()
    }

    pub fn matrix(&self) -> Matrix2 {
        self.quaternion().matrix()
    }

    pub fn quaternion(&self) -> Quaternion {
        Quaternion([0.0, 0.5 * self.0[0], 0.5 * self.0[1], 0.5 * self.0[2]])
    }

    fn cross(&self, other: &Self) -> Self {
        let a = &self.0;
        let b = &other.0;
        Self([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }
}

impl Add for AlgebraElement {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for AlgebraElement {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for AlgebraElement {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl SubAssign for AlgebraElement {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Neg for AlgebraElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for AlgebraElement {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<AlgebraElement> for f64 {
    type Output = AlgebraElement;
    fn mul(self, x: AlgebraElement) -> AlgebraElement {
        x * self
    }
}

impl Quaternion {
    pub const ZERO: Self = Self([0.0; 4]);
    pub const ONE: Self = Self([1.0, 0.0, 0.0, 0.0]);

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    /// Frobenius norm of the 2×2 matrix, `√2·|q|`.
    pub fn frobenius(&self) -> f64 {
        (2.0 * self.norm_sq()).sqrt()
    }

    pub fn conj(&self) -> Self {
        Self([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    pub fn matrix(&self) -> Matrix2 {
        let [a, b, c, d] = self.0;
        [
            [Complex64::new(a, d), Complex64::new(c, b)],
            [Complex64::new(-c, b), Complex64::new(a, -d)],
        ]
    }

    /// Anti-Hermitian traceless part as an algebra element.
    pub fn vector_part(&self) -> AlgebraElement {
        AlgebraElement([2.0 * self.0[1], 2.0 * self.0[2], 2.0 * self.0[3]])
    }

    /// Normalize onto SU(2). This is the polar factor of the matrix.
    pub fn to_group(&self) -> GroupElement {
        let n = self.norm_sq().sqrt();
        GroupElement([self.0[0] / n, self.0[1] / n, self.0[2] / n, self.0[3] / n])
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }
}

impl Mul for Quaternion {
    type Output = Self;
    /// Matrix product. With `(iσ_j)(iσ_k) = −δ_jk − ε_jkl iσ_l`, the vector
    /// part picks up `−u × v` instead of the Hamilton `+u × v`.
    fn mul(self, o: Self) -> Self {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = o.0;
        Self([
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 - (a2 * b3 - a3 * b2),
            a0 * b2 + a2 * b0 - (a3 * b1 - a1 * b3),
            a0 * b3 + a3 * b0 - (a1 * b2 - a2 * b1),
        ])
    }
}

impl GroupElement {
    pub const IDENTITY: Self = Self([1.0, 0.0, 0.0, 0.0]);
    pub const MINUS_IDENTITY: Self = Self([-1.0, 0.0, 0.0, 0.0]);

    /// Builds from quaternion components, normalizing. Fails on a zero vector.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::InvalidInput(format!("quaternion {q:?} cannot be normalized")));
        }
        Ok(Self(q.map(|x| x / n)))
    }

    /// Projects a 2×2 complex matrix that is close to SU(2).
    pub fn from_matrix(m: &Matrix2) -> Result<Self> {
        // Quaternion part: M ≈ aI + b iσ1 + c iσ2 + d iσ3.
        let a = 0.5 * (m[0][0].re + m[1][1].re);
        let d = 0.5 * (m[0][0].im - m[1][1].im);
        let b = 0.5 * (m[0][1].im + m[1][0].im);
        let c = 0.5 * (m[0][1].re - m[1][0].re);
        Self::from_quaternion([a, b, c, d])
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.0
    }

    pub fn as_quaternion(&self) -> Quaternion {
        Quaternion(self.0)
    }

    pub fn matrix(&self) -> Matrix2 {
        self.as_quaternion().matrix()
    }

    pub fn inverse(&self) -> Self {
        Self([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.0[0]
    }

    /// Group product; renormalizes when the unit-norm drift exceeds `1e−12`.
    pub fn compose(&self, other: &Self) -> Self {
        let q = self.as_quaternion() * other.as_quaternion();
        let drift = (q.norm_sq() - 1.0).abs();
        if drift > UNITARITY_DRIFT {
            q.to_group()
        } else {
            GroupElement(q.0)
        }
    }

    pub fn powi(&self, k: i32) -> Self {
        let base = if k < 0 { self.inverse() } else { *self };
        (0..k.unsigned_abs()).fold(Self::IDENTITY, |acc, _| acc.compose(&base))
    }

    /// `‖U − V‖_F`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.as_quaternion() - other.as_quaternion()).frobenius()
    }

    /// `‖U†U − I‖_F`, computed on the matrix.
    pub fn unitarity_residual(&self) -> f64 {
        let m = self.matrix();
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut e = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    e += m[k][i].conj() * m[k][j];
                }
                if i == j {
                    e -= 1.0;
                }
                s += e.norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_central(&self, tol: f64) -> bool {
        (self.0[1].powi(2) + self.0[2].powi(2) + self.0[3].powi(2)).sqrt() <= tol
    }
}

impl Mul for GroupElement {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.compose(&o)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a}, {b}, {c}, {d})")
    }
}

/// Exponential map su(2) → SU(2).
///
/// For `X = v·e`, `X² = −(|v|/2)²·I`, hence `exp X = cos(|v|/2)·I + sinc·X`.
pub fn exp_alg(x: &AlgebraElement) -> GroupElement {
    let theta = x.operator_norm();
    let sinc = if theta < TRUNCATION_THRESHOLD {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    };
    let h = x.quaternion();
    Quaternion([theta.cos(), sinc * h.0[1], sinc * h.0[2], sinc * h.0[3]]).to_group()
}

/// Principal logarithm SU(2) → su(2), with operator norm at most π.
pub fn log_group(u: &GroupElement) -> Result<AlgebraElement> {
    let [a, b, c, d] = u.0;
    let plus_identity = Quaternion([a + 1.0, b, c, d]).frobenius();
    if plus_identity < 1e-8 {
        return Err(Error::BranchPoint { distance: plus_identity });
    }
    let s = (b * b + c * c + d * d).sqrt();
    let theta = s.atan2(a);
    // θ/sin θ, with sin θ = s.
    let factor = if s < TRUNCATION_THRESHOLD && a > 0.0 {
        1.0 + theta * theta / 6.0
    } else {
        theta / s
    };
    Ok(AlgebraElement([2.0 * factor * b, 2.0 * factor * c, 2.0 * factor * d]))
}

/// Lie bracket `XY − YX`.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    -x.cross(y)
}

/// `Ad_g X = g X g⁻¹`.
pub fn adjoint_group(g: &GroupElement, x: &AlgebraElement) -> AlgebraElement {
    let q = g.as_quaternion();
    (q * x.quaternion() * q.conj()).vector_part()
}

/// `⟨X, Y⟩ = −tr(XY)/(8π²)`. In coordinates this is `v·w/(16π²)`.
pub fn pair(x: &AlgebraElement, y: &AlgebraElement) -> f64 {
    0.5 * PAIRING_SCALE * x.dot(y)
}

/// Anti-Hermitian traceless part of an arbitrary 2×2 complex matrix.
pub fn project_to_algebra(m: &Matrix2) -> AlgebraElement {
    let x1 = 0.5 * (m[0][1].im + m[1][0].im);
    let x2 = 0.5 * (m[0][1].re - m[1][0].re);
    let x3 = 0.5 * (m[0][0].im - m[1][1].im);
    // X = x1 iσ1 + x2 iσ2 + x3 iσ3 = 2x·e.
    AlgebraElement([2.0 * x1, 2.0 * x2, 2.0 * x3])
}

/// Matrix of `ad_X = [X, ·]` acting on coordinates.
pub fn ad_matrix(x: &AlgebraElement) -> [[f64; 3]; 3] {
    let [a, b, c] = x.0;
    // −X × v
    [[0.0, c, -b], [-c, 0.0, a], [b, -a, 0.0]]
}

/// Matrix of `Ad_g` acting on coordinates (a rotation).
pub fn adjoint_matrix(g: &GroupElement) -> [[f64; 3]; 3] {
    let cols: [AlgebraElement; 3] = std::array::from_fn(|k| adjoint_group(g, &AlgebraElement::basis(k)));
    std::array::from_fn(|i| std::array::from_fn(|j| cols[j].0[i]))
}
