//! Property tests for the algebraic and discrete identities.

use proptest::prelude::*;

use cstk::cs::{cs, dcs, CsReport};
use cstk::fields::{smooth_random_form, SmoothSpec};
use cstk::forms::{exterior_d, hodge_star, integrate, l2_inner, wedge_pair};
use cstk::gauge::{curvature, gauge_act};
use cstk::holonomy::{holonomy, LoopPath};
use cstk::io::{loop_from_text, loop_to_text, read_field, representation_from_json, representation_to_json, write_field, Field};
use cstk::lie::{adjoint_group, bracket, exp_alg, log_group, pair};
use cstk::lines::{moment_map, parallel_transport, ConnectionPath};
use cstk::rep::{
    cocycle_of_word, cohomology_dims, parse_presentation, random_representation, solve_representation, GroupCocycle,
    Presentation, Representation, SolveOptions,
};
use cstk::spectral::{assemble_d, eta_of, spectral_flow, CsrMatrix};
use cstk::{AlgebraElement, AlgebraForm, GaugeMap, GroupElement, TorusGrid};

fn algebra(r: f64) -> impl Strategy<Value = AlgebraElement> {
    prop::array::uniform3(-r..r).prop_map(AlgebraElement)
}

fn group() -> impl Strategy<Value = GroupElement> {
    algebra(4.0).prop_map(|x| exp_alg(&x))
}

fn grid(dim: usize, n: usize) -> TorusGrid {
    TorusGrid::cube(dim, n).unwrap()
}

fn field(g: TorusGrid, degree: usize, amp: f64, seed: u64) -> AlgebraForm {
    smooth_random_form(g, degree, &SmoothSpec::new(amp, 2), seed).unwrap()
}

fn close(a: &AlgebraElement, b: &AlgebraElement, tol: f64) -> bool {
    (*a - *b).max_abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exp_of_negative_is_inverse(x in algebra(20.0)) {
        let p = exp_alg(&x).compose(&exp_alg(&-x));
        prop_assert!(p.distance(&GroupElement::IDENTITY) <= 1e-12);
    }

    #[test]
    fn exp_is_a_one_parameter_group(x in algebra(5.0), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let lhs = exp_alg(&(x * s)).compose(&exp_alg(&(x * t)));
        prop_assert!(lhs.distance(&exp_alg(&(x * (s + t)))) <= 1e-11);
    }

    #[test]
    fn pairing_is_ad_invariant(g in group(), x in algebra(3.0), y in algebra(3.0)) {
        let lhs = pair(&adjoint_group(&g, &x), &adjoint_group(&g, &y));
        prop_assert!((lhs - pair(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn bracket_is_a_lie_bracket(x in algebra(3.0), y in algebra(3.0), z in algebra(3.0)) {
        prop_assert!(close(&bracket(&x, &y), &-bracket(&y, &x), 1e-12));
        let jacobi = bracket(&x, &bracket(&y, &z)) + bracket(&y, &bracket(&z, &x)) + bracket(&z, &bracket(&x, &y));
        prop_assert!(jacobi.max_abs() <= 1e-12);
    }

    #[test]
    fn ad_differentiates_to_bracket(x in algebra(2.0), y in algebra(2.0)) {
        let h = 1e-5;
        let d = (adjoint_group(&exp_alg(&(x * h)), &y) - adjoint_group(&exp_alg(&(x * -h)), &y)) * (0.5 / h);
        prop_assert!(close(&d, &bracket(&x, &y), 1e-6));
    }

    #[test]
    fn log_inverts_exp_inside_the_injectivity_ball(x in algebra(1.0)) {
        // Operator norm of X is |v|/2·√3 at most, well inside π.
        prop_assert!(close(&log_group(&exp_alg(&x)).unwrap(), &x, 1e-12));
    }

    #[test]
    fn gauge_shift_residual_is_at_most_one_half(v in -10.0..10.0f64, s in -5.0..5.0f64) {
        let r = CsReport::with_shift(v, s);
        let residual = r.residual.unwrap();
        prop_assert!((0.0..=0.5).contains(&residual));
        prop_assert!((s - r.nearest_integer.unwrap() as f64).abs() == residual);
    }

    #[test]
    fn orthogonal_conjugation_preserves_eta(values in prop::collection::vec(-5.0..5.0f64, 2..8), angle in 0.0..6.28f64) {
        // Conjugate diag(values) by a plane rotation and recompute the spectrum.
        let n = values.len();
        let (s, c) = angle.sin_cos();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, values[i]));
        }
        let m = CsrMatrix::from_triplets(n, n, t).unwrap().to_dense();
        let q = faer::Mat::<f64>::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            (1, 0) => s,
            _ => if i == j { 1.0 } else { 0.0 },
        });
        let conj = &q * &m * q.transpose();
        let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (conj[(i, j)] + conj[(j, i)]));
        let ev = sym.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let eps = 1e-9;
        prop_assume!(values.iter().all(|v| v.abs() > 1e-6));
        prop_assert_eq!(eta_of(&ev, eps), eta_of(&values, eps));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_vanishes(seed in 0u64..1000, n in 4usize..9, dim in 2usize..5) {
        let g = grid(dim, n.min(if dim == 4 { 6 } else { 8 }));
        for k in 0..dim.saturating_sub(1) {
            let w = field(g, k, 1.0, seed);
            let dw = exterior_d(&w).unwrap();
            let ddw = exterior_d(&dw).unwrap();
            prop_assert!(ddw.max_abs() <= 1e-12 * dw.max_abs().max(1.0));
        }
    }

    #[test]
    fn integration_by_parts_is_exact(seed in 0u64..1000, n in 4usize..9) {
        let g = grid(3, n);
        for p in 0..3 {
            let q = 2 - p;
            let alpha = field(g, p, 1.0, seed);
            let beta = field(g, q, 1.0, seed + 1);
            let lhs = integrate(&wedge_pair(&exterior_d(&alpha).unwrap(), &beta).unwrap()).unwrap();
            let rhs = integrate(&wedge_pair(&alpha, &exterior_d(&beta).unwrap()).unwrap()).unwrap();
            let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
            prop_assert!((lhs - sign * rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "p = {p}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn dcs_is_the_l2_pairing_with_star_curvature(seed in 0u64..1000, n in 4usize..9) {
        let g = grid(3, n);
        let a = field(g, 1, 1.5, seed);
        let eta = field(g, 1, 1.0, seed + 7);
        let lhs = dcs(&a, &eta).unwrap();
        let rhs = l2_inner(&hodge_star(&curvature(&a).unwrap()), &eta).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn constant_gauge_maps_compose_exactly(seed in 0u64..1000, u in group(), v in group()) {
        let g = grid(3, 5);
        let a = field(g, 1, 1.0, seed);
        let (cu, cv) = (GaugeMap::constant(g, u), GaugeMap::constant(g, v));
        let lhs = gauge_act(&gauge_act(&a, &cu).unwrap(), &cv).unwrap();
        let rhs = gauge_act(&a, &cu.mul(&cv).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn cs_is_invariant_under_constant_gauge_maps(seed in 0u64..1000, u in group()) {
        let g = grid(3, 6);
        let a = field(g, 1, 1.0, seed);
        let c = cs(&a).unwrap();
        let cu = cs(&gauge_act(&a, &GaugeMap::constant(g, u)).unwrap()).unwrap();
        prop_assert!((c - cu).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn reversed_loops_invert_holonomy(seed in 0u64..1000, axis in 0usize..3, base in prop::array::uniform3(0.0..1.0f64)) {
        let g = grid(3, 8);
        let a = field(g, 1, 1.0, seed);
        let gamma = LoopPath::axis_loop(&base, axis).unwrap();
        let h = holonomy(&a, &gamma, 128).unwrap();
        let r = holonomy(&a, &gamma.reversed(), 128).unwrap();
        prop_assert!(r.compose(&h).distance(&GroupElement::IDENTITY) <= 1e-10);
    }

    #[test]
    fn transport_is_unit_and_reversal_conjugates(seed in 0u64..1000, amp in 0.5..4.0f64) {
        let g = grid(2, 8);
        let a0 = field(g, 1, amp, seed);
        let a1 = field(g, 1, amp, seed + 1);
        let path = ConnectionPath::from_fn(9, |t| a0.scale(1.0 - t * t).axpy(t, &a1)).unwrap();
        let pt = parallel_transport(&path).unwrap();
        prop_assert!((pt.complex().norm() - 1.0).abs() <= 1e-10);
        prop_assert!(parallel_transport(&path.reversed()).unwrap().distance(&pt.conj()) <= 1e-10);
    }

    #[test]
    fn moment_map_is_linear(seed in 0u64..1000, s in -3.0..3.0f64) {
        let g = grid(2, 8);
        let a = field(g, 1, 1.0, seed);
        let (x, y) = (field(g, 0, 1.0, seed + 1), field(g, 0, 1.0, seed + 2));
        let combined = moment_map(&a, &x.axpy(s, &y).unwrap()).unwrap();
        let split = moment_map(&a, &x).unwrap() + s * moment_map(&a, &y).unwrap();
        prop_assert!((combined - split).abs() <= 1e-12 * combined.abs().max(1.0));
    }

    #[test]
    fn assembled_operators_are_exactly_symmetric(seed in 0u64..1000, amp in 0.0..3.0f64) {
        let a = field(grid(3, 4), 1, amp, seed);
        prop_assert_eq!(assemble_d(&a).unwrap().matrix().symmetry_defect(), 0.0);
    }

    #[test]
    fn closed_paths_have_zero_flow_without_warnings(seed in 0u64..1000, amp in 0.1..3.0f64) {
        let g = grid(3, 4);
        let a = field(g, 1, amp, seed);
        let b = field(g, 1, amp, seed + 1);
        let path = vec![a.clone(), b, a];
        let r = spectral_flow(&path, None).unwrap();
        if r.warnings.is_empty() {
            prop_assert_eq!(r.sf, 0);
        }
    }

    #[test]
    fn coboundaries_are_cocycles(seed in 0u64..1000, v in algebra(2.0)) {
        let p = Presentation::bundled("trefoil").unwrap();
        let solved = solve_representation(&p, &random_representation(&p, seed), &SolveOptions::default());
        prop_assume!(solved.is_ok());
        let rho = solved.unwrap();
        let xi = GroupCocycle::coboundary(&rho, &v);
        for w in p.relators() {
            let value = cocycle_of_word(&rho, &xi, w);
            prop_assert!(value.max_abs() <= 1e-8 * w.len() as f64);
        }
    }

    #[test]
    fn cohomology_is_conjugation_invariant(seed in 0u64..1000, g in group()) {
        let p = Presentation::bundled("poincare").unwrap();
        let solved = solve_representation(&p, &random_representation(&p, seed), &SolveOptions::default());
        prop_assume!(solved.is_ok());
        let rho = solved.unwrap();
        let (a, b) = (cohomology_dims(&p, &rho), cohomology_dims(&p, &rho.conjugate(&g)));
        prop_assume!(a.is_ok());
        let (a, b) = (a.unwrap(), b.unwrap());
        prop_assert_eq!((a.h0, a.z1, a.b1, a.h1), (b.h0, b.z1, b.b1, b.h1));
        prop_assert_eq!(a.h0 + a.b1, 3);
    }

    #[test]
    fn field_files_round_trip(seed in 0u64..1000, n in 4usize..7, degree in 0usize..4) {
        let a = field(grid(3, n), degree, 1.0, seed);
        let mut bytes = Vec::new();
        write_field(&mut bytes, &Field::from(a.clone())).unwrap();
        let back = read_field(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, Field::from(a));
    }

    #[test]
    fn loop_files_round_trip(points in prop::collection::vec(prop::array::uniform2(0.0..1.0f64), 1..12)) {
        let mut samples: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        samples.push(samples[0].clone());
        let gamma = LoopPath::new(samples, vec![0, 0]);
        prop_assume!(gamma.is_ok());
        let gamma = gamma.unwrap();
        prop_assert_eq!(loop_from_text(&loop_to_text(&gamma)).unwrap(), gamma);
    }

    #[test]
    fn representation_json_round_trips(gs in prop::collection::vec(group(), 2)) {
        let p = parse_presentation("<x,y | x^2 y^-3>").unwrap();
        let rho = Representation::new(&p, gs).unwrap();
        let back = representation_from_json(&p, &representation_to_json(&p, &rho)).unwrap();
        prop_assert_eq!(back.images(), rho.images());
    }
}

#[test]
fn enumeration_is_seed_independent_at_500_trials() {
    for name in ["trefoil", "poincare"] {
        let p = Presentation::bundled(name).unwrap();
        let runs: Vec<_> = [1, 2, 3].iter().map(|&seed| cstk::rep::enumerate_components(&p, 500, seed).unwrap()).collect();
        for other in &runs[1..] {
            assert_eq!(other.len(), runs[0].len(), "{name}");
            for class in other {
                // Coordinates that stay fixed along a family must agree.
                let fixed: Vec<usize> = (0..class.trace_key.len())
                    .filter(|&i| class.trace_range[i][1] - class.trace_range[i][0] <= 1e-6)
                    .collect();
                assert!(
                    runs[0].iter().any(|c| c.h1 == class.h1
                        && fixed.iter().all(|&i| (c.trace_key[i] - class.trace_key[i]).abs() <= 1e-6)),
                    "{name}: {class:?}"
                );
            }
        }
    }
}
