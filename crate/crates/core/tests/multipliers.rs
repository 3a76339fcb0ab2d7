use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use polyosc::error::Error;
use polyosc::gluing::GluingData;
use polyosc::lattice::{ExponentMatrix, MonomialMap};
use polyosc::multipliers::*;
use polyosc::rng::seeded;

fn map(rows: Vec<Vec<u32>>) -> MonomialMap {
    MonomialMap::from_rows(rows).unwrap()
}

fn linear_closed_form(x: f64) -> Complex64 {
    (e(x) - 1.0) / Complex64::new(0.0, 2.0 * PI * x)
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    for n in [2usize, 5, 16, 31] {
        let (x, w) = gauss_legendre(n);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for p in 0..(2 * n) as i32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / f64::from(p + 1)).abs() < 1e-13, "n {n} p {p}");
        }
    }
}

#[test]
fn bump_examples() {
    assert_eq!(bump_transform(0.0), 1.0);
    assert!((bump_transform(1.0) - 0.0432139).abs() < 1e-7);
    assert_eq!(bump_transform(0.7), bump_transform(-0.7));
    let (x, w) = gauss_legendre(120);
    let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * 12.0 * bump_profile(12.0 * x - 6.0)).sum();
    assert!((integral - 1.0).abs() < 1e-12);
}

#[test]
fn multiplier_at_zero_is_one() {
    let m = map(vec![vec![1, 2], vec![2, 0]]);
    assert_eq!(radon_multiplier(&m, &[1.5, 0.3], &[0.0, 0.0], &QuadratureSpec::default()).unwrap(), Complex64::new(1.0, 0.0));
}

#[test]
fn linear_multiplier_matches_closed_form() {
    let m = map(vec![vec![1]]);
    for q in [QuadratureSpec::default(), QuadratureSpec::default().without_analytic_axis()] {
        for &(s, xi) in &[(1.0, 0.3), (2.0, -1.7), (0.5, 40.0), (3.0, 1000.0), (1.0, 1e-6)] {
            let v = radon_multiplier(&m, &[s], &[xi], &q).unwrap();
            assert!((v - linear_closed_form(s * xi)).norm() < 1e-10, "{s} {xi}");
        }
    }
}

#[test]
fn multiplier_budget_guard() {
    let m = map(vec![vec![1]]);
    assert!(matches!(radon_multiplier(&m, &[1.0], &[2e5], &QuadratureSpec::default()), Err(Error::Budget(_))));
    let m3 = MonomialMap::new(ExponentMatrix::identity(3));
    assert!(matches!(radon_multiplier(&m3, &[1.0; 3], &[1e4; 3], &QuadratureSpec::default()), Err(Error::Budget(_))));
}

#[test]
fn multiplier_invariants() {
    let m = map(vec![vec![1, 1], vec![2, 0], vec![0, 3]]);
    let q = QuadratureSpec::default();
    let mut rng = seeded(41, 0);
    for _ in 0..40 {
        let s = [rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)];
        let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-6.0..6.0)).collect();
        let v = radon_multiplier(&m, &s, &xi, &q).unwrap();
        assert!(v.norm() <= 1.0 + 1e-12);
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        assert!((radon_multiplier(&m, &s, &neg, &q).unwrap() - v.conj()).norm() < 1e-12);
        let fine = radon_multiplier(&m, &s, &xi, &q.refined()).unwrap();
        assert!((fine - v).norm() < 1e-9);
        let plain = radon_multiplier(&m, &s, &xi, &q.without_analytic_axis()).unwrap();
        assert!((plain - v).norm() < 1e-10);
    }
}

#[test]
fn analytic_axis_matches_quadrature() {
    let q = QuadratureSpec::default();
    let mut rng = seeded(47, 0);
    for rows in [vec![vec![1, 1], vec![2, 0]], vec![vec![1, 1, 0], vec![0, 1, 2], vec![3, 0, 1]]] {
        let m = map(rows);
        for _ in 0..20 {
            let s: Vec<f64> = (0..m.k()).map(|_| rng.random_range(0.3..2.0)).collect();
            let xi: Vec<f64> = (0..m.d()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let a = radon_multiplier(&m, &s, &xi, &q).unwrap();
            let b = radon_multiplier(&m, &s, &xi, &q.without_analytic_axis()).unwrap();
            assert!((a - b).norm() < 1e-11);
        }
    }
    assert_eq!(linear_phase_average(0.0), Complex64::new(1.0, 0.0));
    // 1 + πib - (2/3)π²b² + O(b³)
    let b = 1e-5;
    let series = Complex64::new(1.0 - 2.0 / 3.0 * (PI * b).powi(2), PI * b);
    assert!((linear_phase_average(b) - series).norm() < 1e-11);
}

#[test]
fn product_structure_for_separate_variables() {
    // P(s ⊗ u) = (s1 u1, s2 u2) factorizes into two one-dimensional integrals
    let m = MonomialMap::new(ExponentMatrix::identity(2));
    let q = QuadratureSpec::default();
    let v = radon_multiplier(&m, &[1.3, 0.7], &[2.1, -3.4], &q).unwrap();
    let want = linear_closed_form(1.3 * 2.1) * linear_closed_form(0.7 * -3.4);
    assert!((v - want).norm() < 1e-12);
}

#[test]
fn projection_examples() {
    let m = map(vec![vec![1], vec![2]]);
    let q = QuadratureSpec::default();
    let (s, xi) = ([1.4], [0.8, -2.5]);
    let full = radon_multiplier(&m, &s, &xi, &q).unwrap();
    assert_eq!(projected_multiplier(&m, &s, &xi, &[], &q).unwrap(), full);
    assert_eq!(projected_multiplier(&m, &s, &[0.0, 0.0], &[0, 1], &q).unwrap(), Complex64::new(1.0, 0.0));
    // D = {first}: Υ(P_1(s)ξ_1) times ∫ e(ξ_2 s² u²) du, integrated independently
    let v = projected_multiplier(&m, &s, &xi, &[0], &q).unwrap();
    let (x, w) = gauss_legendre(200);
    let inner: Complex64 = x.iter().zip(&w).map(|(u, w)| w * e(xi[1] * (s[0] * u).powi(2))).sum();
    assert!((v - bump_transform(s[0] * xi[0]) * inner).norm() < 1e-12);
    assert!(projected_multiplier(&m, &s, &xi, &[2], &q).is_err());
    assert!(projected_multiplier(&m, &s, &xi, &[1, 1], &q).is_err());
}

#[test]
fn error_multiplier_examples() {
    let m = map(vec![vec![1]]);
    let q = QuadratureSpec::default();
    assert_eq!(error_multiplier(&m, &[2.0], &[0.0], &q).unwrap(), Complex64::default());
    for &(s, xi) in &[(1.0, 0.4), (0.3, -7.0), (5.0, 2.0)] {
        let v = error_multiplier(&m, &[s], &[xi], &q).unwrap();
        let want = linear_closed_form(s * xi) - bump_transform(s * xi);
        assert!((v - want).norm() < 1e-10);
    }
    let m2 = map(vec![vec![1, 0], vec![1, 2]]);
    let mut rng = seeded(42, 0);
    for _ in 0..100 {
        let s = [rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)];
        let xi = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let dec = error_decomposition(&m2, &s, &xi, &q).unwrap();
        assert!(dec.residual <= 1e-10);
        assert!(dec.error.norm() <= 4.0);
        assert!(dec.projected.iter().all(|v| v.norm() <= 1.0 + 1e-12));
    }
}

#[test]
fn error_multiplier_vanishes_near_zero_frequency() {
    let m = map(vec![vec![1, 1], vec![0, 2]]);
    let q = QuadratureSpec::default();
    for axis in 0..2 {
        let mut last = f64::INFINITY;
        for j in 0..6 {
            let mut xi = [1.7, -2.3];
            xi[axis] *= 10f64.powi(-j);
            let v = error_multiplier(&m, &[1.1, 0.9], &xi, &q).unwrap().norm();
            assert!(v <= last + 1e-14);
            last = v;
        }
        assert!(last < 1e-4);
    }
}

#[test]
fn box_difference_examples() {
    let m = map(vec![vec![1], vec![2], vec![3]]);
    let q = QuadratureSpec::default();
    let (s, xi) = ([0.9], [1.2, -0.4, 2.2]);
    assert_eq!(box_difference_multiplier(&m, &s, &xi, &[], &q).unwrap(), radon_multiplier(&m, &s, &xi, &q).unwrap());
    let zeroed = [1.2, 0.0, 2.2];
    assert!(box_difference_multiplier(&m, &s, &zeroed, &[1, 2], &q).unwrap().norm() < 1e-15);
    // |□^D 𝔪| <= 2^{|D|-1} min(2, 2π|P_i(s) ξ_i|) for each i in D
    let mut rng = seeded(43, 0);
    let p = |s: f64| [s, s * s, s * s * s];
    for _ in 0..100 {
        let s = rng.random_range(0.2..2.0);
        let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0) * 10f64.powi(rng.random_range(-3..1))).collect();
        for subset in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            let v = box_difference_multiplier(&m, &[s], &xi, &subset, &q).unwrap().norm();
            let half = (subset.len() as f64 - 1.0).exp2();
            for &i in &subset {
                let bound = half * (2.0f64).min(2.0 * PI * (p(s)[i] * xi[i]).abs());
                assert!(v <= bound + 1e-10, "{v} > {bound}");
            }
        }
    }
}

#[test]
fn decay_scan_linear() {
    let m = map(vec![vec![1]]);
    let scan = decay_scan(&m, &DecaySamples::default(), &QuadratureSpec::default()).unwrap();
    assert_eq!(scan.skipped, 0);
    let half = DecaySamples { deltas: vec![0.45], ..DecaySamples::default() };
    let fit = &decay_scan(&m, &half, &QuadratureSpec::default()).unwrap().fits[0];
    assert!(fit.constant.is_finite() && fit.constant < 2.0);
    // constants grow with δ on a fixed sample set
    for w in scan.fits.windows(2) {
        assert!(w[0].constant <= w[1].constant + 1e-12);
    }
    assert!(scan.selected.is_some());
    let bad = DecaySamples { deltas: vec![0.5], ..DecaySamples::default() };
    assert!(matches!(decay_scan(&m, &bad, &QuadratureSpec::default()), Err(Error::Domain(_))));
}

#[test]
fn dilation_homogeneity() {
    // 𝔪_{λ⊙s}(ξ) = 𝔪_s(P(λ) ⊙ ξ)
    let m = map(vec![vec![1, 2], vec![3, 1]]);
    let q = QuadratureSpec::default();
    let (s, lambda, xi) = ([0.8, 1.3], [2.0, 0.5], [1.1, -0.6]);
    let scaled: Vec<f64> = s.iter().zip(&lambda).map(|(a, b)| a * b).collect();
    let pl = m.evaluate(&lambda).unwrap();
    let xi2: Vec<f64> = xi.iter().zip(&pl).map(|(a, b)| a * b).collect();
    let a = error_multiplier(&m, &scaled, &xi, &q).unwrap();
    let b = error_multiplier(&m, &s, &xi2, &q).unwrap();
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn off_diagonal_decays() {
    let m = map(vec![vec![1], vec![2]]);
    let g = GluingData::new(&m).unwrap();
    let q = QuadratureSpec::default();
    let freq = FrequencySamples { per_box: 3, free_exponents: (-3, 3), n_budget: 1 };
    let scan: Vec<OffDiagonal> = (-5..=5).map(|h| off_diagonal_constant(&g, &[h], &freq, &q).unwrap()).collect();
    for o in &scan {
        assert!(o.normalized <= 1.0);
    }
    assert!(off_diagonal_slope(&scan).unwrap() < 0.0);
}

#[test]
fn cancellation_examples() {
    let q = QuadratureSpec::default();
    let r = cancellation_norm(&[2], &[1.5], &[0.3], &[], &q).unwrap();
    assert!((r.norm - 1.0).abs() < 1e-10);
    for a in 1..=3 {
        let r = cancellation_norm(&[a], &[2.0], &[2e-6], &[0], &q).unwrap();
        assert!((r.ratio - cancellation_limit_1d(a)).abs() < 1e-4 * cancellation_limit_1d(a), "{a}: {}", r.ratio);
    }
    assert!(cancellation_norm(&[1], &[1.0], &[2.0], &[0], &q).is_err());
}

#[test]
fn cancellation_ratio_is_bounded() {
    let q = QuadratureSpec::default();
    let monomials: [&[u32]; 3] = [&[1], &[1, 1], &[1, 1, 1]];
    for alpha in monomials {
        let k = alpha.len();
        let s: Vec<f64> = (0..k).map(|j| 1.0 + j as f64 * 0.5).collect();
        for mask in 0..1usize << k {
            let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            for frac in [0.125, 0.25, 0.5, 1.0] {
                let h: Vec<f64> = s.iter().map(|x| x * frac).collect();
                let r = cancellation_norm(alpha, &s, &h, &subset, &q).unwrap();
                assert!(r.ratio <= 20.0, "{alpha:?} {subset:?} {frac}: {}", r.ratio);
            }
        }
    }
}

fn sample_field(shape: Vec<usize>, seed: u64) -> PeriodicField {
    let mut rng = seeded(seed, 0);
    let n: usize = shape.iter().product();
    let samples = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    PeriodicField::new(shape.clone(), vec![4.0; shape.len()], samples).unwrap()
}

#[test]
fn periodic_field_roundtrip_and_identity() {
    for shape in [vec![16], vec![8, 6], vec![4, 5, 3]] {
        let f = sample_field(shape, 44);
        assert!(f.roundtrip_error() < 1e-12);
        let g = f.apply_multiplier(|_| Complex64::new(1.0, 0.0)).unwrap();
        for (a, b) in f.samples().iter().zip(g.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn periodic_field_multipliers_compose() {
    let f = sample_field(vec![12, 10], 45);
    let r1 = |x: &[f64]| e(0.3 * x[0]) * bump_transform(x[1]);
    let r2 = |x: &[f64]| Complex64::new(1.0 / (1.0 + x[0] * x[0]), x[1]);
    let a = f.apply_multiplier(r1).unwrap().apply_multiplier(r2).unwrap();
    let b = f.apply_multiplier(|x| r1(x) * r2(x)).unwrap();
    for (x, y) in a.samples().iter().zip(b.samples()) {
        assert!((x - y).norm() < 1e-12);
    }
    let smooth = f.apply_multiplier(|x| Complex64::new(bump_transform(100.0 * x.iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0)).unwrap();
    for v in smooth.samples() {
        assert!((v - f.mean()).norm() < 1e-10);
    }
}

#[test]
fn plane_wave_frequencies() {
    // e(m x / T) is reproduced with ξ = -m/T, so a translation multiplier
    // e(ξ y) shifts the field by y
    let t = 8.0;
    let f = PeriodicField::from_fn(vec![32], vec![t / 2.0], |x| e(3.0 * x[0] / t) + 0.5 * e(-5.0 * x[0] / t)).unwrap();
    let y = 0.37;
    let shifted = f.apply_multiplier(|xi| e(xi[0] * y)).unwrap();
    for (n, v) in shifted.samples().iter().enumerate() {
        let x = -t / 2.0 + t * n as f64 / 32.0 - y;
        let want = e(3.0 * x / t) + 0.5 * e(-5.0 * x / t);
        assert!((v - want).norm() < 1e-12);
    }
    let z = f.interpolate(&[1.234]).unwrap();
    let want = e(3.0 * 1.234 / t) + 0.5 * e(-5.0 * 1.234 / t);
    assert!((z - want).norm() < 1e-12);
}

#[test]
fn diagonal_operator_norm() {
    let f = sample_field(vec![16, 8], 46);
    let rule = |x: &[f64]| Complex64::new(bump_transform(x[0]) * (1.0 + x[1]).cos(), 0.0);
    let norm = f.operator_norm(rule);
    let g = f.apply_multiplier(rule).unwrap();
    assert!(g.l2_norm() <= norm * f.l2_norm() + 1e-12);
    // attained by the plane wave at the maximising frequency
    let best = (0..f.spectrum().len())
        .max_by(|&a, &b| rule(&f.frequency(a)).norm().total_cmp(&rule(&f.frequency(b)).norm()))
        .unwrap();
    let xi = f.frequency(best);
    let w = PeriodicField::from_fn(f.shape().to_vec(), f.extent().to_vec(), |x| {
        e(-x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>())
    })
    .unwrap();
    let tw = w.apply_multiplier(rule).unwrap();
    assert!((tw.l2_norm() - norm * w.l2_norm()).abs() < 1e-12);
}
