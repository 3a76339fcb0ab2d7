use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;

use polyosc::error::Error;
use polyosc::gluing::*;
use polyosc::lattice::{ExponentMatrix, MonomialMap, ParamGrid, SampleFamily};
use polyosc::rng::seeded;

fn m(rows: Vec<Vec<u32>>) -> ExponentMatrix {
    ExponentMatrix::new(rows).unwrap()
}


type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    (size - 1..n)
        .flat_map(|last| {
            subsets(last, size - 1).into_iter().map(move |mut s| {
                s.push(last);
                s
            })
        })
        .collect()
}

/// Exact solve by Gaussian elimination; `None` if singular.
fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = &a[r][col] / &a[col][col];
            for c in col..n {
                let t = &f * &a[col][c];
                a[r][c] -= t;
            }
            let t = &f * &b[col];
            b[r] -= t;
        }
    }
    let mut x = vec![Q::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i].clone(), |acc, j| acc - &a[i][j] * &x[j]);
        x[i] = s / &a[i][i];
    }
    Some(x)
}

/// Smallest `N` in `2..=16` with `M x = t`, `|x|_∞ <= N` solvable for every
/// vertex `t`, found by enumerating vertices of the box section.
fn n0_by_feasibility(rows: &[Vec<i64>]) -> Option<u32> {
    let r = rows.len();
    let k = rows[0].len();
    let feasible = |t: &[Q], bound: i64| {
        for fixed in subsets(k, k - r) {
            let rest: Vec<usize> = (0..k).filter(|j| !fixed.contains(j)).collect();
            for signs in 0..1u32 << fixed.len() {
                let vals: Vec<i64> = (0..fixed.len()).map(|n| if signs >> n & 1 == 1 { bound } else { -bound }).collect();
                let a: Vec<Vec<Q>> = rows.iter().map(|row| rest.iter().map(|&j| q(row[j])).collect()).collect();
                let b: Vec<Q> = rows
                    .iter()
                    .zip(t)
                    .map(|(row, ti)| ti - fixed.iter().zip(&vals).fold(Q::zero(), |acc, (&j, &v)| acc + q(row[j] * v)))
                    .collect();
                if let Some(x) = solve(a, b) {
                    if x.iter().all(|v| v.abs() <= q(bound)) {
                        return true;
                    }
                }
            }
        }
        false
    };
    (2..=16).find(|&n| {
        (0..1u32 << r).all(|v| {
            let t: Vec<Q> = (0..r).map(|i| q(i64::from(v >> i & 1))).collect();
            feasible(&t, i64::from(n))
        })
    })
}

#[test]
fn rank_examples() {
    assert_eq!(rank_and_basis_rows(&ExponentMatrix::identity(2)), (2, vec![0, 1]));
    assert_eq!(rank_and_basis_rows(&m(vec![vec![1, 1], vec![2, 2]])), (1, vec![0]));
    assert_eq!(rank_and_basis_rows(&m(vec![vec![1, 0], vec![1, 1], vec![0, 1]])), (2, vec![0, 1]));
    assert_eq!(rank_and_basis_rows(&m(vec![vec![1, 1], vec![2, 2], vec![0, 3]])), (2, vec![0, 2]));
}

#[test]
fn n0_examples() {
    assert_eq!(compute_n0(&m(vec![vec![1, 1]])).unwrap(), 2);
    assert_eq!(compute_n0(&ExponentMatrix::identity(3)).unwrap(), 2);
    assert_eq!(compute_n0(&m(vec![vec![1, 0], vec![3, 1]])).unwrap(), 3);
    assert!(matches!(compute_n0(&m(vec![vec![1, 1], vec![2, 2]])), Err(Error::Precondition(_))));
}

#[test]
fn n0_agrees_with_feasibility_scan() {
    let mut rng = seeded(31, 0);
    let mut checked = 0;
    while checked < 60 {
        let k = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let rows: Vec<Vec<u32>> = (0..d).map(|_| (0..k).map(|_| rng.random_range(0..=4)).collect()).collect();
        let norm = m(rows).normalize().matrix;
        if norm.is_empty() {
            continue;
        }
        let (_, basis) = rank_and_basis_rows(&norm);
        let mr = norm.select_rows(&basis);
        let n0 = compute_n0(&mr).unwrap();
        let ints: Vec<Vec<i64>> = (0..mr.rows()).map(|i| mr.row(i).iter().map(|&a| i64::from(a)).collect()).collect();
        if n0 <= 16 {
            assert_eq!(Some(n0), n0_by_feasibility(&ints), "{mr:?}");
            checked += 1;
        }
    }
}

#[test]
fn scale_selector_examples() {
    let g = GluingData::new(&MonomialMap::from_rows(vec![vec![1, 1]]).unwrap()).unwrap();
    assert_eq!(g.select_scale(&[0]).unwrap().coords(), &[1.0, 1.0]);
    assert_eq!(g.select_scale(&[2]).unwrap().coords(), &[2.0, 2.0]);
    let id = GluingData::new(&MonomialMap::new(ExponentMatrix::identity(3))).unwrap();
    assert_eq!(id.select_scale(&[-3, 0, 5]).unwrap().coords(), &[0.125, 1.0, 32.0]);
}

#[test]
fn selector_is_a_homomorphism() {
    let map = MonomialMap::from_rows(vec![vec![1, 2, 0], vec![0, 1, 3], vec![1, 3, 3]]).unwrap();
    let g = GluingData::new(&map).unwrap();
    assert_eq!(g.rank(), 2);
    for a in -4..=4i64 {
        for b in -4..=4i64 {
            let n = [a, b];
            let mm = [b - 1, 2 * a];
            let s = g.select_scale(&n).unwrap();
            let t = g.select_scale(&mm).unwrap();
            let prod: Vec<f64> = s.coords().iter().zip(t.coords()).map(|(x, y)| x * y).collect();
            let img = g.reduced_map().evaluate(&prod).unwrap();
            for (v, e) in img.iter().zip([n[0] + mm[0], n[1] + mm[1]]) {
                let want = (e as f64).exp2();
                assert!((v - want).abs() <= 1e-11 * want);
            }
            let img = g.reduced_map().evaluate(s.coords()).unwrap();
            for (v, e) in img.iter().zip(n) {
                assert!((v - (e as f64).exp2()).abs() <= 1e-12 * (e as f64).exp2());
            }
        }
    }
}

#[test]
fn cube_examples() {
    let g = GluingData::new(&MonomialMap::new(ExponentMatrix::identity(2))).unwrap();
    assert_eq!(g.n0(), 2);
    let c = g.cube(&[0, 0]).unwrap();
    assert_eq!(c.left.coords(), &[1.0 / 16.0, 1.0 / 16.0]);
    assert_eq!(c.right.coords(), &[257.0 / 16.0, 257.0 / 16.0]);
    let g = GluingData::new(&MonomialMap::from_rows(vec![vec![1, 0], vec![3, 1]]).unwrap()).unwrap();
    for a in -8..=8 {
        for b in -8..=8 {
            let c = g.cube(&[a, b]).unwrap();
            for (l, r) in c.left.coords().iter().zip(c.right.coords()) {
                assert!((r / l - (1.0 + f64::from(g.l()).exp2())).abs() < 1e-6);
            }
            assert!(c.contains(g.select_scale(&[a, b]).unwrap().coords()));
        }
    }
}

#[test]
fn locate_box_examples() {
    let g = GluingData::new(&MonomialMap::new(ExponentMatrix::identity(2))).unwrap();
    assert_eq!(g.locate_box(&[1.0, 1.0]).unwrap(), vec![0, 0]);
    assert_eq!(g.locate_box(&[3.0, 5.0]).unwrap(), vec![1, 2]);
    let g = GluingData::new(&MonomialMap::from_rows(vec![vec![1, 1], vec![0, 2]]).unwrap()).unwrap();
    let mut rng = seeded(32, 0);
    for _ in 0..500 {
        let s: Vec<f64> = (0..2).map(|_| rng.random_range(0.01..50.0)).collect();
        let t: Vec<f64> = s.iter().map(|x| x * rng.random_range(1.0..4.0)).collect();
        let (a, b) = (g.locate_box(&s).unwrap(), g.locate_box(&t).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }
}

#[test]
fn compatibility_examples() {
    let grid = ParamGrid::new(vec![vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]]).unwrap();
    let map = MonomialMap::from_rows(vec![vec![1, 1]]).unwrap();
    let distinct = SampleFamily::from_real(grid.clone(), &(0..9).map(f64::from).collect::<Vec<_>>()).unwrap();
    assert!(!compatibility_check(&distinct, &map, 1e-12).unwrap());
    let through = SampleFamily::from_fn(grid.clone(), |s| Complex64::new((s[0] * s[1]).ln().sin(), 0.0)).unwrap();
    assert!(compatibility_check(&through, &map, 1e-12).unwrap());
    let injective = MonomialMap::new(ExponentMatrix::identity(2));
    assert!(compatibility_check(&distinct, &injective, 1e-12).unwrap());
    let g = GluingData::new(&map).unwrap();
    assert!(matches!(split_variation_multi(&distinct, &g), Err(Error::Precondition(_))));
}

fn dyadic_grid(k: usize) -> ParamGrid {
    ParamGrid::new(vec![(-6..=6).map(|i| f64::from(i).exp2()).collect(); k]).unwrap()
}

#[test]
fn every_grid_point_is_covered() {
    for rows in [vec![vec![1, 1]], vec![vec![1, 0], vec![0, 1]], vec![vec![1, 2], vec![2, 1]], vec![vec![2, 1]]] {
        let g = GluingData::new(&MonomialMap::from_rows(rows).unwrap()).unwrap();
        let full_rank = g.rank() == 2;
        for s in dyadic_grid(2).points() {
            let n = g.locate_box(&s).unwrap();
            let centre = g.select_scale(&n).unwrap();
            let near = s.iter().zip(centre.coords()).all(|(a, c)| (a / c).log2().abs() <= f64::from(g.n0()));
            if full_rank || near {
                assert!(g.cube(&n).unwrap().contains(&s), "{s:?} outside Q_{n:?}");
            }
        }
    }
}

#[test]
fn split_multi_examples() {
    let g = GluingData::new(&MonomialMap::from_rows(vec![vec![1, 1]]).unwrap()).unwrap();
    let constant = SampleFamily::from_fn(dyadic_grid(2), |_| Complex64::new(1.5, 0.0)).unwrap();
    let r = split_variation_multi(&constant, &g).unwrap();
    assert_eq!((r.split.long, r.split.short_l2), (0.0, 0.0));
    assert!(!r.active.is_empty());

    // a grid inside a single cube with nothing else around it
    let small = ParamGrid::new(vec![vec![1.0, 1.5, 2.0], vec![1.0, 1.25]]).unwrap();
    let g2 = GluingData::new(&MonomialMap::new(ExponentMatrix::identity(2))).unwrap();
    let f = SampleFamily::from_fn(small, |s| Complex64::new(s[0] * s[1], 0.0)).unwrap();
    let r = split_variation_multi(&f, &g2).unwrap();
    assert_eq!(r.active, vec![vec![0, 0], vec![1, 0]]);
    assert!(r.split.short_l2 >= r.split.full - 1e-12);
}

#[test]
fn split_multi_constant_is_moderate() {
    let mut rng = seeded(33, 0);
    let maps = [vec![vec![1, 1]], vec![vec![1, 0], vec![0, 1]], vec![vec![1, 2], vec![2, 1]]];
    let mut worst: f64 = 0.0;
    for t in 0..30 {
        let g = GluingData::new(&MonomialMap::from_rows(maps[t % 3].clone()).unwrap()).unwrap();
        let freqs: Vec<(f64, f64)> = (0..3).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.0..6.3))).collect();
        let map = g.map().clone();
        let f = SampleFamily::from_fn(dyadic_grid(2), |s| {
            let y = map.evaluate(s).unwrap();
            let u: f64 = y.iter().map(|v| v.log2()).sum();
            freqs.iter().map(|&(w, p)| Complex64::from_polar(1.0, w * u + p)).sum()
        })
        .unwrap();
        let r = split_variation_multi(&f, &g).unwrap();
        worst = worst.max(r.split.ratio);
    }
    assert!(worst <= 16.0, "{worst}");
}
