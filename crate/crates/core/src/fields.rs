//! Seeded smooth random fields for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::{multi_indices, AlgebraForm, TorusGrid};
use crate::lie::AlgebraElement;

/// Trigonometric-polynomial field parameters: typical pointwise size and the
/// largest wavenumber per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub amplitude: f64,
    pub max_mode: u32,
    pub modes: usize,
}

impl SmoothSpec {
    pub fn new(amplitude: f64, max_mode: u32) -> Self {
        Self { amplitude, max_mode, modes: 4 }
    }
}

#[derive(Debug, Clone)]
struct Mode {
    coeff: f64,
    k: [f64; 4],
    phase: [f64; 4],
}

/// Smooth periodic algebra-valued `degree`-form; each coordinate function is
/// a sum of separable products of cosines.
pub fn smooth_random_form(grid: TorusGrid, degree: usize, spec: &SmoothSpec, seed: u64) -> Result<AlgebraForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let nc = multi_indices(d, degree.min(d)).len();
    let tau = std::f64::consts::TAU;
    let scale = spec.amplitude / (spec.modes as f64).sqrt();
    let table: Vec<[Vec<Mode>; 3]> = (0..nc)
        .map(|_| {
            std::array::from_fn(|_| {
                (0..spec.modes)
                    .map(|_| Mode {
                        coeff: scale * rng.gen_range(-1.0..1.0) * 3f64.sqrt(),
                        k: std::array::from_fn(|_| tau * rng.gen_range(0..=spec.max_mode) as f64),
                        phase: std::array::from_fn(|_| rng.gen_range(0.0..tau)),
                    })
                    .collect()
            })
        })
        .collect();
    let masks = multi_indices(d, degree.min(d));
    AlgebraForm::from_fn(grid, degree, |x, m| {
        let c = masks.iter().position(|&mm| mm == m).unwrap();
        let coord = |modes: &Vec<Mode>| -> f64 {
            modes
                .iter()
                .map(|md| md.coeff * (0..d).map(|a| (md.k[a] * x[a] + md.phase[a]).cos()).product::<f64>())
                .sum()
        };
        let [a, b, e] = &table[c];
        AlgebraElement::new(coord(a), coord(b), coord(e))
    })
}

/// A uniformly distributed random algebra element with coordinates in `[-r, r]`.
pub fn random_algebra<R: Rng>(rng: &mut R, r: f64) -> AlgebraElement {
    AlgebraElement::new(rng.gen_range(-r..=r), rng.gen_range(-r..=r), rng.gen_range(-r..=r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_dependent() {
        let g = TorusGrid::cube(3, 6).unwrap();
        let spec = SmoothSpec::new(1.0, 2);
        let a = smooth_random_form(g, 1, &spec, 5).unwrap();
        let b = smooth_random_form(g, 1, &spec, 5).unwrap();
        let c = smooth_random_form(g, 1, &spec, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.max_abs() > 0.05 && a.max_abs() < 5.0);
    }
}
