use proptest::prelude::*;
use rand::Rng;

use polyosc::dynamics::{ergodic_average_quadrature, ergodic_average_spectral, TorusSystem, TrigPolynomial};
use polyosc::gluing::GluingData;
use polyosc::lattice::{MonomialMap, SampleFamily};
use polyosc::multipliers::{radon_multiplier, QuadratureSpec};
use polyosc::rademacher_menshov::{max_per_scale, rectangle_decomposition, reconstruct, rm_bound_1d, rm_bound_multi};
use polyosc::rng::{random_chain, random_dyadic, random_family, random_grid, seeded, SeededRng};
use polyosc::seminorms::{oscillation, pointwise_max_bound_check, variation, variation_bruteforce};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

fn family(rng: &mut SeededRng, shape: &[usize]) -> SampleFamily {
    let grid = random_grid(rng, shape).unwrap();
    random_family(rng, grid).unwrap()
}

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 1..=3)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn variation_agrees_with_enumeration(seed in any::<u64>(), shape in shape(), rho in 1.0f64..4.0) {
        let mut rng = seeded(seed, 0);
        let f = family(&mut rng, &shape);
        let cert = variation(&f, rho).unwrap();
        prop_assert_eq!(cert.value, variation_bruteforce(&f, rho).unwrap());
        prop_assert!((cert.reevaluate(&f).unwrap() - cert.value).abs() <= 1e-12);
    }

    #[test]
    fn variation_decreases_in_rho(seed in any::<u64>(), shape in shape(), r in 1.0f64..3.0, dr in 0.0f64..2.0) {
        let mut rng = seeded(seed, 0);
        let f = family(&mut rng, &shape);
        prop_assert!(variation(&f, r + dr).unwrap().value <= variation(&f, r).unwrap().value + 1e-12);
    }

    #[test]
    fn one_parameter_oscillation_is_dominated(seed in any::<u64>(), n in 2usize..=8, steps in 1usize..=3) {
        let mut rng = seeded(seed, 0);
        let f = family(&mut rng, &[n]);
        if let Some(chain) = random_chain(&mut rng, f.grid(), steps).unwrap() {
            prop_assert!(oscillation(&f, &chain).unwrap().value <= variation(&f, 2.0).unwrap().value + 1e-12);
        }
    }

    #[test]
    fn sup_is_bounded_by_anchor_and_oscillation(seed in any::<u64>(), shape in shape()) {
        let mut rng = seeded(seed, 0);
        let f = family(&mut rng, &shape);
        let r = pointwise_max_bound_check(&f).unwrap();
        prop_assert!(r.sup <= r.anchor_max + r.oscillation);
    }

    #[test]
    fn rademacher_menshov_bounds(seed in any::<u64>(), depth in 1u32..=5, k0 in 1usize..=3) {
        let mut rng = seeded(seed, 0);
        let data_depth = rng.random_range(1..=depth);
        let f = random_dyadic(&mut rng, depth.min(if k0 == 1 { 5 } else { 3 }), data_depth.min(3), k0, k0 > 1).unwrap();
        let b = if k0 == 1 { rm_bound_1d(&f).unwrap() } else { rm_bound_multi(&f).unwrap() };
        prop_assert!(b.lhs <= b.constant * b.rhs + 1e-9);
    }

    #[test]
    fn rectangles_reconstruct_increments(seed in any::<u64>(), l0 in 2u32..=4) {
        let mut rng = seeded(seed, 0);
        let f = random_dyadic(&mut rng, l0, l0, 2, true).unwrap();
        let n = 1usize << l0;
        let a = [rng.random_range(0..n), rng.random_range(0..n)];
        let b = [rng.random_range(a[0] + 1..=n), rng.random_range(a[1] + 1..=n)];
        let coord = |q: [usize; 2]| vec![1.0 + q[0] as f64 * f.spacing(), 1.0 + q[1] as f64 * f.spacing()];
        let rects = rectangle_decomposition(&f, &coord(a), &coord(b)).unwrap();
        prop_assert!((reconstruct(&f, &rects) - (f.at(&b) - f.at(&a))).norm() <= 1e-12);
        prop_assert!(max_per_scale(&rects) <= 4);
    }

    #[test]
    fn scale_selector_hits_dyadic_targets(a in 1u32..=3, b in 0u32..=3, c in 0u32..=3, n1 in -6i64..=6, n2 in -6i64..=6) {
        let map = MonomialMap::from_rows(vec![vec![a, b], vec![c, a + b]]).unwrap();
        let g = GluingData::new(&map).unwrap();
        let n: Vec<i64> = [n1, n2][..g.rank()].to_vec();
        let s = g.select_scale(&n).unwrap();
        let rows = [vec![a, b], vec![c, a + b]];
        for (&row, &ni) in g.basis_rows().iter().zip(&n) {
            let image: f64 = rows[row].iter().zip(s.coords()).map(|(&e, x)| x.powi(e as i32)).product();
            prop_assert!((image / (ni as f64).exp2() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn multiplier_is_an_average(seed in any::<u64>()) {
        let mut rng = seeded(seed, 0);
        let rows: Vec<Vec<u32>> = (0..2).map(|_| vec![rng.random_range(1..=2), rng.random_range(0..=2)]).collect();
        let map = MonomialMap::from_rows(rows).unwrap();
        let s = [rng.random_range(0.25..2.0), rng.random_range(0.25..2.0)];
        let xi = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let quad = QuadratureSpec::default();
        prop_assert!(radon_multiplier(&map, &s, &xi, &quad).unwrap().norm() <= 1.0 + 1e-12);
        prop_assert!((radon_multiplier(&map, &s, &[0.0, 0.0], &quad).unwrap() - 1.0).norm() <= 1e-12);
    }

    #[test]
    fn torus_averages_agree_across_routes(seed in any::<u64>()) {
        let mut rng = seeded(seed, 0);
        let map = MonomialMap::from_rows(vec![vec![1, 1], vec![2, 0]]).unwrap();
        let dirs = (0..2).map(|_| (0..2).map(|_| rng.random_range(-0.3..0.3)).collect()).collect();
        let sys = TorusSystem::new(dirs).unwrap();
        let f = TrigPolynomial::random(&mut rng, 2, 3, 2, false);
        let m = [rng.random_range(0.3..1.5), rng.random_range(0.3..1.5)];
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let quad = QuadratureSpec::default();
        let a = ergodic_average_quadrature(&sys, &f, &map, &m, &x, &quad).unwrap();
        let b = ergodic_average_spectral(&sys, &f, &map, &m, &quad).unwrap().eval(&x);
        prop_assert!((a - b).norm() <= 1e-6);
    }
}
