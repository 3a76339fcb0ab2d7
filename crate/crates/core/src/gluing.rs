//! Gluing of multiparameter families along the rank-`r` part of a monomial map.
//!
//! All linear algebra on exponent matrices is exact over the rationals;
//! conversion to floating point happens only when scale selectors are
//! exponentiated.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lattice::{floor_log2, weakly_below, ExponentMatrix, MonomialMap, ParamVector, SampleFamily};
use crate::seminorms::{variation, variation_over_points, SplitReport};

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Solve the square system `a x = b` exactly; `None` if `a` is singular.
fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Rank of an exponent matrix together with the lexicographically first set
/// of independent rows (0-based, increasing).
pub fn rank_and_basis_rows(m: &ExponentMatrix) -> (usize, Vec<usize>) {
    // reduced rows kept in echelon form, each tagged with its pivot column
    let mut basis: Vec<(usize, Vec<Q>)> = Vec::new();
    let mut rows = Vec::new();
    for i in 0..m.rows() {
        let mut v: Vec<Q> = m.row(i).iter().map(|&a| q(a.into())).collect();
        for (p, b) in &basis {
            if !v[*p].is_zero() {
                let f = &v[*p] / &b[*p];
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= &f * y;
                }
            }
        }
        if let Some(p) = v.iter().position(|x| !x.is_zero()) {
            basis.push((p, v));
            rows.push(i);
        }
    }
    (rows.len(), rows)
}

/// Smallest `z` with `m x = t` and `|x|_∞ <= z`, by enumerating the vertices
/// of the linear program in `(x, z)`.
fn min_sup_norm(m: &[Vec<i64>], t: &[Q]) -> Option<Q> {
    let r = m.len();
    let k = m[0].len();
    if t.iter().all(Zero::is_zero) {
        return Some(Q::zero());
    }
    // a vertex has k + 1 independent active constraints: the r equalities and
    // k + 1 - r bounds x_j = ±z
    let free = k + 1 - r;
    let mut best: Option<Q> = None;
    for set in subsets(k, free) {
        for signs in 0..1u32 << free {
            let mut a: Vec<Vec<Q>> = m
                .iter()
                .map(|row| row.iter().map(|&v| q(v)).chain(std::iter::once(Q::zero())).collect())
                .collect();
            let mut b: Vec<Q> = t.to_vec();
            for (n, &j) in set.iter().enumerate() {
                let mut row = vec![Q::zero(); k + 1];
                row[j] = Q::one();
                row[k] = if signs >> n & 1 == 1 { q(1) } else { q(-1) };
                a.push(row);
                b.push(Q::zero());
            }
            let Some(sol) = solve(a, b) else { continue };
            let z = &sol[k];
            if z.is_negative() || sol[..k].iter().any(|x| x.abs() > *z) {
                continue;
            }
            if best.as_ref().is_none_or(|b| z < b) {
                best = Some(z.clone());
            }
        }
    }
    best
}

/// All `size`-element subsets of `0..n` in lexicographic order.
pub(crate) fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

fn ceil_to_u32(x: &Q) -> u32 {
    x.ceil().to_integer().to_u32().unwrap_or(u32::MAX)
}

/// Integer exponent rows of the selected basis.
fn reduced_rows(m: &ExponentMatrix, rows: &[usize]) -> Vec<Vec<i64>> {
    rows.iter().map(|&i| m.row(i).iter().map(|&a| a as i64).collect()).collect()
}

/// `N0 = max(2, ceil(max_t min{|x|_∞ : M_r x = t}))` over the vertices `t` of
/// `[0,1]^r`, so that `[1,2]^r ⊆ P^r([2^{-N0}, 2^{N0}]^k)`.
pub fn compute_n0(m_r: &ExponentMatrix) -> Result<u32> {
    let rows = reduced_rows(m_r, &(0..m_r.rows()).collect::<Vec<_>>());
    let (rank, _) = rank_and_basis_rows(m_r);
    if rank != m_r.rows() || rank == 0 {
        return Err(Error::Precondition(format!("reduced matrix has rank {rank} but {} rows", m_r.rows())));
    }
    if m_r.has_zero_column() {
        return Err(Error::Precondition("reduced matrix has a zero column".into()));
    }
    let r = rank;
    let mut worst = Q::zero();
    for v in 0..1u32 << r {
        let t: Vec<Q> = (0..r).map(|i| q(i64::from(v >> i & 1))).collect();
        let z = min_sup_norm(&rows, &t).ok_or_else(|| Error::Precondition("infeasible log-linear system".into()))?;
        if z > worst {
            worst = z;
        }
    }
    Ok(ceil_to_u32(&worst).max(2))
}

/// Exact data attached to a normalized monomial map.
#[derive(Debug, Clone, PartialEq)]
pub struct GluingData {
    map: MonomialMap,
    rank: usize,
    basis_rows: Vec<usize>,
    n0: u32,
    reduced: MonomialMap,
    /// `M_r^T (M_r M_r^T)^{-1}`, `k × r`.
    pseudo_inverse: Vec<Vec<Q>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingSummary {
    pub rank: usize,
    pub basis_rows: Vec<usize>,
    pub n0: u32,
    pub l: u32,
    /// Floating-point image of the exact pseudo-inverse, row per parameter.
    pub selector: Vec<Vec<f64>>,
}

impl GluingData {
    pub fn new(map: &MonomialMap) -> Result<Self> {
        let m = map.matrix();
        if m.is_empty() || m.has_zero_row() || m.has_zero_column() {
            return Err(Error::Precondition("exponent matrix must be normalized (no zero rows or columns)".into()));
        }
        let (rank, basis_rows) = rank_and_basis_rows(m);
        let reduced_matrix = m.select_rows(&basis_rows);
        if reduced_matrix.has_zero_column() {
            return Err(Error::Precondition("reduced matrix inherited a zero column".into()));
        }
        let n0 = compute_n0(&reduced_matrix)?;
        let rows = reduced_rows(m, &basis_rows);
        let k = m.cols();
        let gram: Vec<Vec<Q>> = (0..rank)
            .map(|a| (0..rank).map(|b| q((0..k).map(|j| rows[a][j] * rows[b][j]).sum())).collect())
            .collect();
        // columns of the Gram inverse, one solve per unit vector
        let mut gram_inv = vec![vec![Q::zero(); rank]; rank];
        for c in 0..rank {
            let e: Vec<Q> = (0..rank).map(|i| if i == c { Q::one() } else { Q::zero() }).collect();
            let col = solve(gram.clone(), e).ok_or_else(|| Error::Precondition("singular Gram matrix".into()))?;
            for (i, v) in col.into_iter().enumerate() {
                gram_inv[i][c] = v;
            }
        }
        let pseudo_inverse = (0..k)
            .map(|j| {
                (0..rank)
                    .map(|c| (0..rank).fold(Q::zero(), |acc, i| acc + q(rows[i][j]) * &gram_inv[i][c]))
                    .collect()
            })
            .collect();
        Ok(Self { map: map.clone(), rank, basis_rows, n0, reduced: MonomialMap::new(reduced_matrix), pseudo_inverse })
    }

    pub fn map(&self) -> &MonomialMap {
        &self.map
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis_rows(&self) -> &[usize] {
        &self.basis_rows
    }

    pub fn n0(&self) -> u32 {
        self.n0
    }

    /// Dyadic depth `L = 4 N0` of every cube.
    pub fn l(&self) -> u32 {
        4 * self.n0
    }

    /// The monomials `P^r` selected by the basis rows.
    pub fn reduced_map(&self) -> &MonomialMap {
        &self.reduced
    }

    pub fn summary(&self) -> GluingSummary {
        GluingSummary {
            rank: self.rank,
            basis_rows: self.basis_rows.clone(),
            n0: self.n0,
            l: self.l(),
            selector: self.pseudo_inverse.iter().map(|r| r.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()).collect(),
        }
    }

    /// Exact minimum-norm solution `x` of `M_r x = n`.
    pub fn log_scale(&self, n: &[i64]) -> Result<Vec<Q>> {
        check_dim(self.rank, n.len())?;
        Ok(self
            .pseudo_inverse
            .iter()
            .map(|row| row.iter().zip(n).fold(Q::zero(), |acc, (p, &v)| acc + p * q(v)))
            .collect())
    }

    /// `s(n) = 2^x` with `x` the minimum-norm solution of `M_r x = n`, so
    /// that `P^r(s(n)) = 2^n`.
    pub fn select_scale(&self, n: &[i64]) -> Result<ParamVector> {
        let x = self.log_scale(n)?;
        ParamVector::new(x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN).exp2()).collect())
    }

    pub fn cube(&self, n: &[i64]) -> Result<Cube> {
        let s = self.select_scale(n)?;
        let shrink = (-2.0 * f64::from(self.n0)).exp2();
        let grow = shrink * (1.0 + f64::from(self.l()).exp2());
        Ok(Cube {
            left: ParamVector::new(s.coords().iter().map(|x| shrink * x).collect())?,
            right: ParamVector::new(s.coords().iter().map(|x| grow * x).collect())?,
        })
    }

    /// The `n` with `P^r(s) ∈ [2^n, 2^{n+1})` componentwise.
    pub fn locate_box(&self, s: &[f64]) -> Result<Vec<i64>> {
        Ok(self.reduced.evaluate(s)?.into_iter().map(|v| i64::from(floor_log2(v))).collect())
    }
}

/// `Q_n = [left, right]`, a closed box with `right = (1 + 2^L) left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub left: ParamVector,
    pub right: ParamVector,
}

impl Cube {
    pub fn contains(&self, s: &[f64]) -> bool {
        weakly_below(self.left.coords(), s) && weakly_below(s, self.right.coords())
    }
}

/// True when `a_s` and `a_{s'}` agree within `tol` whenever `P(s)` and
/// `P(s')` agree within `tol` relative to `|P(s)|_∞`.
pub fn compatibility_check(family: &SampleFamily, map: &MonomialMap, tol: f64) -> Result<bool> {
    check_dim(map.k(), family.grid().k())?;
    let images = family.grid().points().map(|p| map.evaluate(&p)).collect::<Result<Vec<_>>>()?;
    for (i, pi) in images.iter().enumerate() {
        let scale = pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (j, pj) in images.iter().enumerate().skip(i + 1) {
            let dist = pi.iter().zip(pj).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if dist <= tol * scale && (family.value(i) - family.value(j)).norm() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSplitReport {
    #[serde(flatten)]
    pub split: SplitReport,
    /// Active `n`, in lexicographic order.
    pub active: Vec<Vec<i64>>,
}

/// Default agreement tolerance for [`split_variation_multi`].
pub const COMPATIBILITY_TOL: f64 = 1e-12;

/// Long/short splitting of `V^2` along the cubes `Q_n`.
///
/// The long family takes, for every active `n`, the value at the grid point
/// of `Q_n` closest to `s(n)` in the `log_2`-sup metric and orders these by
/// `n`. The short part is the ℓ² sum over `n` of `V^2` restricted to `Q_n`.
pub fn split_variation_multi(family: &SampleFamily, gluing: &GluingData) -> Result<MultiSplitReport> {
    if !compatibility_check(family, gluing.map(), COMPATIBILITY_TOL)? {
        return Err(Error::Precondition("family is not a function of P(s) on the grid".into()));
    }
    let grid = family.grid();
    let points: Vec<Vec<f64>> = grid.points().collect();
    let located = points.iter().map(|p| gluing.locate_box(p)).collect::<Result<Vec<_>>>()?;
    let r = gluing.rank();
    let lo: Vec<i64> = (0..r).map(|i| located.iter().map(|n| n[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..r).map(|i| located.iter().map(|n| n[i]).max().unwrap()).collect();

    let mut active = Vec::new();
    let mut long_pts = Vec::new();
    let mut long_vals = Vec::new();
    let mut short_sq = 0.0;
    let mut n = lo.clone();
    loop {
        let cube = gluing.cube(&n)?;
        let inside: Vec<usize> = (0..points.len()).filter(|&f| cube.contains(&points[f])).collect();
        if !inside.is_empty() {
            let centre: Vec<f64> = gluing.log_scale(&n)?.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
            let dist = |f: usize| {
                points[f].iter().zip(&centre).fold(0.0f64, |m, (s, c)| m.max((s.log2() - c).abs()))
            };
            let nearest = inside.iter().copied().fold(inside[0], |b, f| if dist(f) < dist(b) { f } else { b });
            long_pts.push(n.iter().map(|&v| (v as f64).exp2()).collect::<Vec<_>>());
            long_vals.push(family.value(nearest));
            let pts: Vec<Vec<f64>> = inside.iter().map(|&f| points[f].clone()).collect();
            let vals: Vec<Complex64> = inside.iter().map(|&f| family.value(f)).collect();
            let (v, _) = variation_over_points(&pts, &vals, 2.0)?;
            short_sq += v * v;
            active.push(n.clone());
        }
        // odometer over the bounding box, last coordinate fastest
        let mut i = r;
        loop {
            if i == 0 {
                let (long, _) = variation_over_points(&long_pts, &long_vals, 2.0)?;
                let full = variation(family, 2.0)?.value;
                return Ok(MultiSplitReport { split: SplitReport::new(full, long, short_sq.sqrt()), active });
            }
            i -= 1;
            n[i] += 1;
            if n[i] <= hi[i] {
                break;
            }
            n[i] = lo[i];
        }
    }
}
