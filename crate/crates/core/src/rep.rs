//! Finitely presented groups and their SU(2) representation varieties.
//!
//! A representation assigns a group element to each generator. Relator
//! residuals are driven to zero by Levenberg–Marquardt on the group, and
//! tangent data comes from the twisted cocycle extension
//!
//!   ξ(xy) = ξ(x) + Ad_{ρ(x)} ξ(y),   ξ(g⁻¹) = −Ad_{ρ(g)⁻¹} ξ(g),
//!
//! which doubles as the Jacobian of the relator map.

use std::fmt;

use faer::prelude::*;
use faer::linalg::solvers::Solve;
use faer::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{adjoint_group, adjoint_matrix, exp_alg, AlgebraElement, GroupElement, Quaternion};

/// Residual below which a representation counts as valid.
pub const VALID_RESIDUAL: f64 = 1e-8;
/// Singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;
/// Minimum ratio between the singular values on either side of the cutoff.
pub const MIN_GAP: f64 = 10.0;
/// Trace-vector clustering tolerance.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;

const CENTRAL_TOLERANCE: f64 = 1e-9;
const MAX_EXPONENT: i64 = 10_000;

/// Presentations shipped with the toolkit, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("trefoil", "<x,y | x^2 y^-3>"),
    ("poincare", "<x,y | x^2 y^-3, x^2 (x y)^-5>"),
    ("z2", "<a,b | [a,b]>"),
    ("z3", "<a,b,c | [a,b], [a,c], [b,c]>"),
    ("genus2", "<x1,x2,y1,y2 | [x1,y1][x2,y2]>"),
    ("free2", "<a,b>"),
];

/// A word: letters `(generator, ±1)`, read left to right.
pub type Word = Vec<(usize, i8)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    generators: Vec<String>,
    relators: Vec<Word>,
}

impl Presentation {
    pub fn new(generators: Vec<String>, relators: Vec<Word>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidInput("presentation needs at least one generator".into()));
        }
        for (i, name) in generators.iter().enumerate() {
            if !is_generator_name(name) {
                return Err(Error::InvalidInput(format!("bad generator name {name:?}")));
            }
            if generators[..i].contains(name) {
                return Err(Error::InvalidInput(format!("duplicate generator {name:?}")));
            }
        }
        for w in &relators {
            if w.is_empty() {
                return Err(Error::InvalidInput("empty relator".into()));
            }
            if let Some(&(g, e)) = w.iter().find(|&&(g, e)| g >= generators.len() || e.abs() != 1) {
                return Err(Error::InvalidInput(format!("bad letter ({g}, {e})")));
            }
        }
        Ok(Self { generators, relators })
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_presentation(text)
    }

    /// Looks up one of the [`BUNDLED`] presentations.
    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| parse_presentation(text).expect("bundled presentation"))
    }

    /// `<x1..xg, y1..yg | [x1,y1]···[xg,yg]>`.
    pub fn surface(genus: usize) -> Result<Self> {
        if genus == 0 {
            return Err(Error::InvalidInput("genus must be at least 1".into()));
        }
        let mut generators: Vec<String> = (1..=genus).map(|i| format!("x{i}")).collect();
        generators.extend((1..=genus).map(|i| format!("y{i}")));
        let relator = (0..genus).flat_map(|i| commutator(&[(i, 1)], &[(genus + i, 1)])).collect();
        Self::new(generators, vec![relator])
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == name)
    }
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}", self.generators.join(","))?;
        if !self.relators.is_empty() {
            let words: Vec<String> = self.relators.iter().map(|w| self.format_word(w)).collect();
            write!(f, " | {}", words.join(", "))?;
        }
        write!(f, ">")
    }
}

impl Presentation {
    /// Prints a word with runs of equal letters folded into powers.
    pub fn format_word(&self, w: &[(usize, i8)]) -> String {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < w.len() {
            let (g, e) = w[i];
            let mut run = 1;
            while i + run < w.len() && w[i + run] == (g, e) {
                run += 1;
            }
            let power = run as i64 * e as i64;
            let name = &self.generators[g];
            parts.push(if power == 1 { name.clone() } else { format!("{name}^{power}") });
            i += run;
        }
        parts.join(" ")
    }
}

fn is_generator_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_digit())
}

fn inverse_word(w: &[(usize, i8)]) -> Word {
    w.iter().rev().map(|&(g, e)| (g, -e)).collect()
}

fn commutator(u: &[(usize, i8)], v: &[(usize, i8)]) -> Word {
    let mut out = u.to_vec();
    out.extend_from_slice(v);
    out.extend(inverse_word(u));
    out.extend(inverse_word(v));
    out
}

fn power(w: &[(usize, i8)], k: i64) -> Word {
    let base = if k < 0 { inverse_word(w) } else { w.to_vec() };
    (0..k.unsigned_abs()).flat_map(|_| base.iter().copied()).collect()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    generators: Vec<String>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Parse { position: self.pos, expected: expected.iter().map(|s| s.to_string()).collect() })
    }

    fn expect(&mut self, c: u8, expected: &[&str]) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        if !matches!(self.src.get(self.pos), Some(c) if c.is_ascii_alphabetic()) {
            return None;
        }
        self.pos += 1;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return self.fail(&["integer exponent"]);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<i64>() {
            Ok(k) if k.abs() <= MAX_EXPONENT => Ok(k),
            _ => {
                self.pos = start;
                self.fail(&["exponent of magnitude at most 10000"])
            }
        }
    }

    fn word(&mut self) -> Result<Word> {
        let mut out = Word::new();
        let mut factors = 0;
        loop {
            let atom = match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    let w = self.word()?;
                    self.expect(b')', &["')'"])?;
                    w
                }
                Some(b'[') => {
                    self.pos += 1;
                    let u = self.word()?;
                    self.expect(b',', &["','"])?;
                    let v = self.word()?;
                    self.expect(b']', &["']'"])?;
                    commutator(&u, &v)
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    let at = self.pos;
                    let name = self.ident().unwrap_or_default();
                    match self.generators.iter().position(|g| *g == name) {
                        Some(g) => vec![(g, 1)],
                        None => {
                            self.pos = at;
                            let names: Vec<String> = self.generators.iter().map(|g| format!("'{g}'")).collect();
                            return Err(Error::Parse { position: at, expected: names });
                        }
                    }
                }
                _ if factors > 0 => return Ok(out),
                _ => return self.fail(&["generator", "'('", "'['"]),
            };
            factors += 1;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                let k = self.integer()?;
                out.extend(power(&atom, k));
            } else {
                out.extend(atom);
            }
        }
    }
}

/// Parses `<g1,...,gk | w1, ..., wm>`, or `<g1,...,gk>` for a free group.
///
/// Generator names are a letter followed by digits, so `xy` reads as `x y`.
/// Words are products of generators, parenthesized groups, commutators
/// `[u,v] = u v u⁻¹ v⁻¹` and integer powers `^k`.
pub fn parse_presentation(text: &str) -> Result<Presentation> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, generators: Vec::new() };
    p.expect(b'<', &["'<'"])?;
    loop {
        let at = p.pos;
        match p.ident() {
            Some(name) if !p.generators.contains(&name) => p.generators.push(name),
            Some(_) => {
                p.pos = at;
                p.skip_ws();
                return p.fail(&["new generator name"]);
            }
            None => return p.fail(&["generator name"]),
        }
        match p.peek() {
            Some(b',') => p.pos += 1,
            Some(b'|') | Some(b'>') => break,
            _ => return p.fail(&["','", "'|'", "'>'"]),
        }
    }
    let mut relators = Vec::new();
    if p.peek() == Some(b'|') {
        p.pos += 1;
        loop {
            let at = p.pos;
            let w = p.word()?;
            if w.is_empty() {
                p.pos = at;
                p.skip_ws();
                return p.fail(&["nonempty relator"]);
            }
            relators.push(w);
            match p.peek() {
                Some(b',') => p.pos += 1,
                Some(b'>') => break,
                _ => return p.fail(&["','", "'>'"]),
            }
        }
    }
    p.expect(b'>', &["'>'"])?;
    if p.peek().is_some() {
        return p.fail(&["end of input"]);
    }
    Presentation::new(p.generators, relators)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    images: Vec<GroupElement>,
    residuals: Vec<f64>,
}

impl Representation {
    pub fn new(p: &Presentation, images: Vec<GroupElement>) -> Result<Self> {
        if images.len() != p.rank() {
            return Err(Error::InvalidInput(format!(
                "{} images for {} generators",
                images.len(),
                p.rank()
            )));
        }
        let residuals = p.relators.iter().map(|w| relator_residual(&images, w)).collect();
        Ok(Self { images, residuals })
    }

    pub fn trivial(p: &Presentation) -> Self {
        Self::new(p, vec![GroupElement::IDENTITY; p.rank()]).expect("matching length")
    }

    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn is_valid(&self) -> bool {
        self.max_residual() <= VALID_RESIDUAL
    }

    /// `g⁻¹ρg`.
    pub fn conjugate(&self, g: &GroupElement) -> Self {
        let gi = g.inverse();
        let images = self.images.iter().map(|x| gi * *x * *g).collect();
        Self { images, residuals: self.residuals.clone() }
    }
}

fn relator_residual(images: &[GroupElement], w: &[(usize, i8)]) -> f64 {
    eval_images(images, w).distance(&GroupElement::IDENTITY)
}

fn eval_images(images: &[GroupElement], w: &[(usize, i8)]) -> GroupElement {
    w.iter().fold(GroupElement::IDENTITY, |acc, &(g, e)| {
        let x = if e < 0 { images[g].inverse() } else { images[g] };
        acc * x
    })
}

/// Ordered product of the images along `w`.
pub fn eval_word(rho: &Representation, w: &[(usize, i8)]) -> GroupElement {
    eval_images(&rho.images, w)
}

/// Algebra value per generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCocycle(pub Vec<AlgebraElement>);

impl GroupCocycle {
    pub fn zeros(rank: usize) -> Self {
        Self(vec![AlgebraElement::ZERO; rank])
    }

    /// The coboundary `x_i ↦ Ad_{ρ(x_i)} v − v`.
    pub fn coboundary(rho: &Representation, v: &AlgebraElement) -> Self {
        Self(rho.images.iter().map(|g| adjoint_group(g, v) - *v).collect())
    }

    fn flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|x| x.0).collect()
    }
}

/// Extends `ξ` from generators to `w` by the cocycle rule.
pub fn cocycle_of_word(rho: &Representation, xi: &GroupCocycle, w: &[(usize, i8)]) -> AlgebraElement {
    let mut value = AlgebraElement::ZERO;
    let mut prefix = GroupElement::IDENTITY;
    for &(g, e) in w {
        let x = rho.images[g];
        let letter = if e > 0 { xi.0[g] } else { -adjoint_group(&x.inverse(), &xi.0[g]) };
        value += adjoint_group(&prefix, &letter);
        prefix = prefix * if e > 0 { x } else { x.inverse() };
    }
    value
}

/// The linear map `ξ ↦ ξ(w)` as a 3 × 3k row-major matrix.
fn fox_matrix(images: &[GroupElement], w: &[(usize, i8)]) -> Vec<[f64; 3]> {
    let k = images.len();
    let mut m = vec![[0.0; 3]; 3 * k];
    let mut prefix = GroupElement::IDENTITY;
    for &(g, e) in w {
        let (sign, ad) = if e > 0 {
            let ad = adjoint_matrix(&prefix);
            prefix = prefix * images[g];
            (1.0, ad)
        } else {
            prefix = prefix * images[g].inverse();
            (-1.0, adjoint_matrix(&prefix))
        };
        for col in 0..3 {
            for row in 0..3 {
                m[3 * g + col][row] += sign * ad[row][col];
            }
        }
    }
    m
}

/// Stacked relator linearization: rows `3j..3j+3` belong to relator `j`.
fn relator_map(p: &Presentation, images: &[GroupElement]) -> Mat<f64> {
    let k = images.len();
    let mut m = Mat::zeros(3 * p.relators.len(), 3 * k);
    for (j, w) in p.relators.iter().enumerate() {
        let fox = fox_matrix(images, w);
        for (c, col) in fox.iter().enumerate() {
            for r in 0..3 {
                m[(3 * j + r, c)] = col[r];
            }
        }
    }
    m
}

/// `v ↦ (Ad_{ρ(x_i)} v − v)_i`.
fn coboundary_map(images: &[GroupElement]) -> Mat<f64> {
    let mut m = Mat::zeros(3 * images.len(), 3);
    for (i, g) in images.iter().enumerate() {
        let ad = adjoint_matrix(g);
        for r in 0..3 {
            for c in 0..3 {
                m[(3 * i + r, c)] = ad[r][c] - if r == c { 1.0 } else { 0.0 };
            }
        }
    }
    m
}

/// Numerical rank at [`RANK_CUTOFF`] and the gap diagnostic: how far, as a
/// ratio, the nearest singular values on either side sit from the cutoff.
fn rank_with_gap(m: &Mat<f64>) -> Result<(usize, f64)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok((0, f64::INFINITY));
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::ConvergenceFailure(format!("singular value decomposition: {e:?}")))?;
    let cutoff = RANK_CUTOFF * s[0].max(1.0);
    let rank = s.iter().filter(|&&x| x > cutoff).count();
    let above = s[..rank].last().map_or(f64::INFINITY, |a| a / cutoff);
    let below = s[rank..].first().map_or(f64::INFINITY, |&b| if b > 0.0 { cutoff / b } else { f64::INFINITY });
    Ok((rank, above.min(below)))
}

fn checked_rank(m: &Mat<f64>) -> Result<(usize, f64)> {
    let (rank, gap) = rank_with_gap(m)?;
    if gap < MIN_GAP {
        return Err(Error::IllConditioned { gap });
    }
    Ok((rank, gap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Target for the largest relator residual.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-10 }
    }
}

fn residual_vector(p: &Presentation, images: &[GroupElement]) -> Vec<f64> {
    p.relators
        .iter()
        .flat_map(|w| {
            let q = eval_images(images, w).quaternion();
            [q[0] - 1.0, q[1], q[2], q[3]]
        })
        .collect()
}

fn max_relator_residual(r: &[f64]) -> f64 {
    // ‖U − I‖_F = √2 |q − 1|
    r.chunks(4).map(|c| (2.0 * c.iter().map(|x| x * x).sum::<f64>()).sqrt()).fold(0.0, f64::max)
}

/// Jacobian of the residual vector under `ρ(x) ← ρ(x)·exp(v_x)`.
fn jacobian(p: &Presentation, images: &[GroupElement]) -> Mat<f64> {
    let k = images.len();
    let mut jac = Mat::zeros(4 * p.relators.len(), 3 * k);
    let ads: Vec<[[f64; 3]; 3]> = images.iter().map(adjoint_matrix).collect();
    for (j, w) in p.relators.iter().enumerate() {
        let fox = fox_matrix(images, w);
        let value = eval_images(images, w).as_quaternion();
        for x in 0..k {
            for c in 0..3 {
                // ξ_x = Ad_{ρ(x)} e_c, then δρ(w) = ξ(w)·ρ(w)
                let mut xi = [0.0; 3];
                for (m, col) in fox[3 * x..3 * x + 3].iter().enumerate() {
                    for r in 0..3 {
                        xi[r] += col[r] * ads[x][m][c];
                    }
                }
                let d = AlgebraElement(xi).quaternion() * value;
                for r in 0..4 {
                    jac[(4 * j + r, 3 * x + c)] = d.0[r];
                }
            }
        }
    }
    jac
}

/// Levenberg–Marquardt on `ρ ↦ (ρ(w_j) − I)_j` with right-multiplicative
/// updates `ρ(x) ← ρ(x)·exp(v_x)`.
pub fn solve_representation(p: &Presentation, seed: &Representation, opts: &SolveOptions) -> Result<Representation> {
    if seed.images.len() != p.rank() {
        return Err(Error::InvalidInput("seed does not match the presentation".into()));
    }
    let mut images = seed.images.clone();
    let mut r = residual_vector(p, &images);
    let mut residual = max_relator_residual(&r);
    if residual <= opts.tol {
        return Representation::new(p, images);
    }
    let target = opts.tol * 1e-2;
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let n = 3 * p.rank();
    for _ in 0..opts.max_iters {
        let jac = jacobian(p, &images);
        let rv = Mat::from_fn(r.len(), 1, |i, _| r[i]);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        let mut improved = false;
        for _ in 0..40 {
            let a = Mat::from_fn(n, n, |i, j| jtj[(i, j)] + if i == j { lambda * (1.0 + jtj[(i, i)]) } else { 0.0 });
            let Ok(llt) = a.llt(Side::Lower) else {
                lambda *= 4.0;
                continue;
            };
            let step = llt.solve(&g);
            let trial: Vec<GroupElement> = images
                .iter()
                .enumerate()
                .map(|(x, im)| {
                    let v = AlgebraElement([-step[(3 * x, 0)], -step[(3 * x + 1, 0)], -step[(3 * x + 2, 0)]]);
                    *im * exp_alg(&v)
                })
                .collect();
            let tr = residual_vector(p, &trial);
            let tc: f64 = tr.iter().map(|x| x * x).sum();
            if tc < cost {
                images = trial;
                r = tr;
                cost = tc;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        residual = max_relator_residual(&r);
        if residual <= target || !improved {
            break;
        }
    }
    if residual <= opts.tol {
        Representation::new(p, images)
    } else {
        Err(Error::NonConvergence { residual, iterations: opts.max_iters })
    }
}

/// Unit quaternion `k` with `Ad_k(from)` a positive multiple of `to`.
fn aligning_element(from: [f64; 3], to: [f64; 3], fallback_axis: [f64; 3]) -> GroupElement {
    let unit = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let (f, t) = (unit(from), unit(to));
    let dot = f[0] * t[0] + f[1] * t[1] + f[2] * t[2];
    if dot < -1.0 + 1e-12 {
        return GroupElement([0.0, fallback_axis[0], fallback_axis[1], fallback_axis[2]]);
    }
    let cross = [f[1] * t[2] - f[2] * t[1], f[2] * t[0] - f[0] * t[2], f[0] * t[1] - f[1] * t[0]];
    let candidates = [1.0, -1.0].map(|s| Quaternion([1.0 + dot, s * cross[0], s * cross[1], s * cross[2]]).to_group());
    let score = |k: &GroupElement| {
        let v = adjoint_group(k, &AlgebraElement(f)).0;
        v[0] * t[0] + v[1] * t[1] + v[2] * t[2]
    };
    if score(&candidates[0]) >= score(&candidates[1]) {
        candidates[0]
    } else {
        candidates[1]
    }
}

/// Conjugates so the first non-central image is diagonal with upper-left
/// entry `e^{iφ}`, `φ ∈ [0, π]`, and the next image not commuting with it
/// has a real nonnegative upper-right entry.
pub fn normalize_conjugacy(rho: &Representation) -> Representation {
    let vector = |g: &GroupElement| [g.0[1], g.0[2], g.0[3]];
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let Some(first) = rho.images.iter().position(|g| !g.is_central(CENTRAL_TOLERANCE)) else {
        return rho.clone();
    };
    // ρ·h = h⁻¹ρh; `k` plays the role of h⁻¹.
    let k1 = aligning_element(vector(&rho.images[first]), [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    let mut out = rho.conjugate(&k1.inverse());
    let transverse = |g: &GroupElement| (g.0[1] * g.0[1] + g.0[2] * g.0[2]).sqrt();
    if let Some(second) = out.images.iter().skip(first + 1).position(|g| transverse(g) > CENTRAL_TOLERANCE) {
        let g = out.images[first + 1 + second];
        // Upper-right entry is c + ib.
        let k2 = aligning_element([g.0[1], g.0[2], 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
        out = out.conjugate(&k2.inverse());
    }
    // Snap the components fixed by construction.
    let g = &mut out.images[first];
    if norm(vector(g)) > 0.0 {
        g.0[1] = 0.0;
        g.0[2] = 0.0;
    }
    if let Some(second) = out.images.iter().skip(first + 1).position(|g| transverse(g) > CENTRAL_TOLERANCE) {
        out.images[first + 1 + second].0[1] = 0.0;
    }
    out
}

/// Dimension of the subalgebra fixed by every `Ad_{ρ(x_i)}`.
pub fn stabilizer_dim(rho: &Representation) -> usize {
    let (rank, _) = rank_with_gap(&coboundary_map(&rho.images)).unwrap_or((0, f64::INFINITY));
    3 - rank
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohomologyDims {
    pub h0: usize,
    pub z1: usize,
    pub b1: usize,
    pub h1: usize,
    /// Smallest singular-value gap across the rank decisions.
    pub gap: f64,
}

/// Dimensions of `H⁰`, `Z¹`, `B¹` and `H¹` of `π` with coefficients in
/// `su(2)` twisted by `Ad ∘ ρ`.
pub fn cohomology_dims(p: &Presentation, rho: &Representation) -> Result<CohomologyDims> {
    if rho.images.len() != p.rank() {
        return Err(Error::InvalidInput("representation does not match the presentation".into()));
    }
    let (rel_rank, g1) = checked_rank(&relator_map(p, &rho.images))?;
    let (b1, g2) = checked_rank(&coboundary_map(&rho.images))?;
    let z1 = 3 * p.rank() - rel_rank;
    Ok(CohomologyDims { h0: 3 - b1, z1, b1, h1: z1 - b1, gap: g1.min(g2) })
}

/// Basis of `Z¹`, as cocycles.
fn cocycle_basis(p: &Presentation, rho: &Representation) -> Result<Vec<GroupCocycle>> {
    let m = relator_map(p, &rho.images);
    let n = 3 * p.rank();
    if m.nrows() == 0 {
        return Ok((0..n).map(|i| unit_cocycle(p.rank(), i)).collect());
    }
    let (rank, _) = rank_with_gap(&m)?;
    let svd = m.svd().map_err(|e| Error::ConvergenceFailure(format!("singular value decomposition: {e:?}")))?;
    let v = svd.V();
    Ok((rank..n)
        .map(|c| GroupCocycle((0..p.rank()).map(|x| AlgebraElement(std::array::from_fn(|r| v[(3 * x + r, c)]))).collect()))
        .collect())
}

fn unit_cocycle(rank: usize, i: usize) -> GroupCocycle {
    let mut xi = GroupCocycle::zeros(rank);
    xi.0[i / 3].0[i % 3] = 1.0;
    xi
}

/// Dimension of the image of `H¹(F_g) → H¹(π₁Σ_g)` under the handlebody
/// inclusion `x_i ↦ x_i`, `y_i ↦ 1`. `rho` is a representation of
/// [`Presentation::surface`] that sends every `y_i` to the identity.
pub fn restriction_image_dim(genus: usize, rho: &Representation) -> Result<usize> {
    let surface = Presentation::surface(genus)?;
    if rho.images.len() != surface.rank() {
        return Err(Error::InvalidInput(format!("expected {} images", 2 * genus)));
    }
    if let Some(i) = rho.images[genus..].iter().position(|y| y.distance(&GroupElement::IDENTITY) > VALID_RESIDUAL) {
        return Err(Error::InvalidInput(format!("ρ(y{}) is not the identity", i + 1)));
    }
    let handlebody: Vec<GroupElement> = rho.images[..genus].to_vec();
    let free = Presentation::new(surface.generators[..genus].to_vec(), Vec::new())?;
    let free_rho = Representation::new(&free, handlebody)?;
    // Z¹(F_g) is everything; restriction pulls a cocycle back along x_i ↦ x_i, y_i ↦ 1.
    let sources = cocycle_basis(&free, &free_rho)?;
    let rows = 6 * genus;
    let b = coboundary_map(&rho.images);
    let mut rb = Mat::zeros(rows, sources.len() + 3);
    for (c, xi) in sources.iter().enumerate() {
        let mut pulled = GroupCocycle::zeros(2 * genus);
        pulled.0[..genus].copy_from_slice(&xi.0);
        for (r, v) in pulled.flat().into_iter().enumerate() {
            rb[(r, c)] = v;
        }
    }
    for r in 0..rows {
        for c in 0..3 {
            rb[(r, sources.len() + c)] = b[(r, c)];
        }
    }
    let (full, _) = checked_rank(&rb)?;
    let (rank_b, _) = checked_rank(&b)?;
    Ok(full - rank_b)
}

/// One irreducible class, or a positive-dimensional family of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentClass {
    pub normal_form: Vec<GroupElement>,
    /// `(tr ρ(x_i))_i` followed by `(tr ρ(x_i x_j))_{i<j}`.
    pub trace_key: Vec<f64>,
    /// Trials that landed in this class.
    pub count: usize,
    pub h1: Option<usize>,
    pub stabilizer_dim: usize,
    /// Per trace coordinate, the smallest and largest value seen.
    pub trace_range: Vec<[f64; 2]>,
    /// Distinct points merged into this class.
    pub points: usize,
}

fn key_words(rank: usize) -> Vec<Word> {
    let mut words: Vec<Word> = (0..rank).map(|i| vec![(i, 1)]).collect();
    for i in 0..rank {
        for j in i + 1..rank {
            words.push(vec![(i, 1), (j, 1)]);
        }
    }
    words
}

fn haar_element(rng: &mut ChaCha8Rng) -> GroupElement {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|x| x * x).sum::<f64>();
        if n > 1e-2 && n <= 1.0 {
            return Quaternion(q).to_group();
        }
    }
}

struct Point {
    rho: Representation,
    key: Vec<f64>,
    h1: Option<usize>,
    stabilizer: usize,
    /// Key coordinates that move along some tangent direction.
    moving: Vec<bool>,
}

fn trace_derivatives(rho: &Representation, xi: &GroupCocycle, words: &[Word]) -> Vec<f64> {
    words
        .iter()
        .map(|w| {
            let d = cocycle_of_word(rho, xi, w).quaternion() * eval_word(rho, w).as_quaternion();
            2.0 * d.0[0]
        })
        .collect()
}

fn analyze(p: &Presentation, rho: Representation, words: &[Word]) -> Point {
    let rho = normalize_conjugacy(&rho);
    let key: Vec<f64> = words.iter().map(|w| eval_word(&rho, w).trace()).collect();
    let stabilizer = stabilizer_dim(&rho);
    let h1 = cohomology_dims(p, &rho).ok().map(|d| d.h1);
    let mut moving = vec![false; words.len()];
    if h1.is_some_and(|h| h > 0) {
        for xi in cocycle_basis(p, &rho).unwrap_or_default() {
            for (m, d) in moving.iter_mut().zip(trace_derivatives(&rho, &xi, words)) {
                *m |= d.abs() > CLUSTER_TOLERANCE;
            }
        }
    }
    Point { rho, key, h1, stabilizer, moving }
}

fn close(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> bool {
    a.iter()
        .zip(b)
        .enumerate()
        .all(|(i, (x, y))| mask.is_some_and(|m| m[i]) || (x - y).abs() <= CLUSTER_TOLERANCE)
}

/// Multi-start search for irreducible representations, clustered into
/// conjugacy classes by trace coordinates. Clusters on a positive-dimensional
/// family are merged when they agree on the coordinates that stay constant
/// along the family.
pub fn enumerate_components(p: &Presentation, trials: usize, seed: u64) -> Result<Vec<ComponentClass>> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let words = key_words(p.rank());
    let opts = SolveOptions::default();
    let found: Vec<Point> = (0..trials)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64));
            let images = (0..p.rank()).map(|_| haar_element(&mut rng)).collect();
            let start = Representation::new(p, images).ok()?;
            let rho = solve_representation(p, &start, &opts).ok()?;
            (stabilizer_dim(&rho) == 0).then(|| analyze(p, rho, &words))
        })
        .collect();

    // (representative, members)
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, pt) in found.iter().enumerate() {
        match clusters.iter_mut().find(|(r, _)| close(&found[*r].key, &pt.key, None)) {
            Some((_, members)) => members.push(i),
            None => clusters.push((i, vec![i])),
        }
    }

    let mut classes: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for (rep, members) in clusters {
        let pt = &found[rep];
        let family = pt.h1.is_some_and(|h| h > 0) && pt.moving.iter().any(|&m| m);
        let slot = family
            .then(|| {
                classes.iter_mut().find(|(r, _, _)| {
                    let q = &found[*r];
                    q.h1 == pt.h1 && q.moving == pt.moving && close(&q.key, &pt.key, Some(&pt.moving))
                })
            })
            .flatten();
        match slot {
            Some((_, all, points)) => {
                all.extend(members);
                *points += 1;
            }
            None => classes.push((rep, members, 1)),
        }
    }

    let mut out: Vec<ComponentClass> = classes
        .into_iter()
        .map(|(rep, members, points)| {
            let pt = &found[rep];
            let trace_range = (0..words.len())
                .map(|c| {
                    members.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], &m| {
                        let v = found[m].key[c];
                        [lo.min(v), hi.max(v)]
                    })
                })
                .collect();
            ComponentClass {
                normal_form: pt.rho.images.clone(),
                trace_key: pt.key.clone(),
                count: members.len(),
                h1: pt.h1,
                stabilizer_dim: pt.stabilizer,
                trace_range,
                points,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        let lo = |c: &ComponentClass| c.trace_range.iter().map(|r| r[0]).collect::<Vec<_>>();
        lo(a).partial_cmp(&lo(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// A representation with images drawn from Haar measure.
pub fn random_representation(p: &Presentation, seed: u64) -> Representation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..p.rank()).map(|_| haar_element(&mut rng)).collect();
    Representation::new(p, images).expect("matching length")
}
