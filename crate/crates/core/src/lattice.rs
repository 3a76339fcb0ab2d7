//! Multi-index arithmetic on `R^k_+`, monomial maps and finite sample families.
//!
//! Everything downstream (seminorms, gluing, multipliers) is phrased in terms of
//! the types here: scale vectors, the coordinatewise order, exponent matrices
//! of monomial maps, product grids and complex-valued families sampled on them.
//!
//! Axis indices are zero-based throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Smallest and largest magnitudes a monomial value may take.
pub const MONOMIAL_RANGE: (f64, f64) = (1e-300, 1e300);

/// A point of `R^k_+`: `k >= 1` strictly positive finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("parameter vector must have k >= 1 coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("coordinate {c} is not a positive finite number")));
        }
        Ok(Self(coords))
    }

    /// The vector `(1, ..., 1)`.
    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Componentwise product `s ⊗ u`.
pub fn tensor_scale(s: &ParamVector, u: &ParamVector) -> Result<ParamVector> {
    check_dim(s.len(), u.len())?;
    Ok(ParamVector(s.0.iter().zip(&u.0).map(|(a, b)| a * b).collect()))
}

/// Scalar dilation `λ ⊙ s`.
pub fn scalar_dilate(lambda: f64, s: &ParamVector) -> Result<ParamVector> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("dilation factor {lambda} must be positive")));
    }
    Ok(ParamVector(s.0.iter().map(|c| lambda * c).collect()))
}

/// Coordinatewise order: `x ⪯ y` (or `x ≺ y` when `strict`).
pub fn precedes(x: &[f64], y: &[f64], strict: bool) -> Result<bool> {
    check_dim(x.len(), y.len())?;
    Ok(if strict { strictly_below(x, y) } else { weakly_below(x, y) })
}

#[inline]
pub(crate) fn strictly_below(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a < b)
}

#[inline]
pub(crate) fn weakly_below(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a <= b)
}

/// `x^n` by repeated squaring.
pub(crate) fn pow_by_squaring(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}

/// `floor(log2 x)` for a positive normal float, read off the exponent bits so
/// that exact powers of two land in the right dyadic block.
pub fn floor_log2(x: f64) -> i32 {
    debug_assert!(x.is_normal() && x > 0.0);
    ((x.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

/// A `d × k` matrix of nonnegative integer exponents; row `i` holds the
/// exponents of the `i`-th monomial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

/// Result of [`ExponentMatrix::normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedMatrix {
    pub matrix: ExponentMatrix,
    /// Indices of the original rows that survived (nonzero rows).
    pub kept_rows: Vec<usize>,
    /// Indices of the original columns that survived (parameters actually used).
    pub kept_cols: Vec<usize>,
}

impl ExponentMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension { expected: cols, got: bad.len() });
        }
        Ok(Self { rows: rows.len(), cols, entries: rows.into_iter().flatten().collect() })
    }

    pub fn identity(k: usize) -> Self {
        let mut entries = vec![0; k * k];
        for i in 0..k {
            entries[i * k + i] = 1;
        }
        Self { rows: k, cols: k, entries }
    }

    /// Number of monomials `d`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of parameters `k`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Maximal total degree of a row.
    pub fn degree(&self) -> u32 {
        (0..self.rows).map(|i| self.row(i).iter().sum()).max().unwrap_or(0)
    }

    pub fn has_zero_row(&self) -> bool {
        (0..self.rows).any(|i| self.row(i).iter().all(|&a| a == 0))
    }

    pub fn has_zero_column(&self) -> bool {
        (0..self.cols).any(|j| (0..self.rows).all(|i| self.get(i, j) == 0))
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let rows: Vec<Vec<u32>> = rows.iter().map(|&i| self.row(i).to_vec()).collect();
        Self { rows: rows.len(), cols: self.cols, entries: rows.into_iter().flatten().collect() }
    }

    /// Drop zero columns (unused parameters) and zero rows (constant
    /// monomials). Neither removal can create a new zero row or column, so a
    /// single pass suffices.
    pub fn normalize(&self) -> NormalizedMatrix {
        let kept_cols: Vec<usize> =
            (0..self.cols).filter(|&j| (0..self.rows).any(|i| self.get(i, j) != 0)).collect();
        let kept_rows: Vec<usize> =
            (0..self.rows).filter(|&i| self.row(i).iter().any(|&a| a != 0)).collect();
        let entries = kept_rows
            .iter()
            .flat_map(|&i| kept_cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        let matrix = Self { rows: kept_rows.len(), cols: kept_cols.len(), entries };
        NormalizedMatrix { matrix, kept_rows, kept_cols }
    }
}

/// Free-function form of [`ExponentMatrix::normalize`].
pub fn normalize_exponent_matrix(raw: &ExponentMatrix) -> NormalizedMatrix {
    raw.normalize()
}

/// The monomial map `s ↦ (P_1(s), ..., P_d(s))` with `P_i(s) = ∏_j s_j^{α_ij}`
/// and all coefficients equal to one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialMap {
    matrix: ExponentMatrix,
}

impl MonomialMap {
    pub fn new(matrix: ExponentMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        Ok(Self::new(ExponentMatrix::new(rows)?))
    }

    pub fn matrix(&self) -> &ExponentMatrix {
        &self.matrix
    }

    pub fn d(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn degree(&self) -> u32 {
        self.matrix.degree()
    }

    /// Value of the `i`-th monomial at `s`, without range checks.
    pub(crate) fn monomial_unchecked(&self, i: usize, s: &[f64]) -> f64 {
        self.matrix.row(i).iter().zip(s).map(|(&a, &x)| pow_by_squaring(x, a)).product()
    }

    /// `P(s)` for an arbitrary point of `R^k_+` given as a slice.
    pub fn evaluate(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.k(), s.len())?;
        (0..self.d())
            .map(|i| {
                let v = self.monomial_unchecked(i, s);
                if (MONOMIAL_RANGE.0..=MONOMIAL_RANGE.1).contains(&v) {
                    Ok(v)
                } else {
                    Err(Error::Domain(format!("monomial {i} evaluates to {v:e}, outside the representable range")))
                }
            })
            .collect()
    }
}

/// `P(s)` for a parameter vector.
pub fn evaluate_monomials(map: &MonomialMap, s: &ParamVector) -> Result<Vec<f64>> {
    map.evaluate(s.coords())
}

/// Finite product grid `A_1 × ... × A_k` of strictly increasing positive axes.
///
/// Points are enumerated in row-major order (last axis fastest), which is
/// lexicographic in the coordinates and therefore a linear extension of `≺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    axes: Vec<Vec<f64>>,
}

impl ParamGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        for (i, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::Domain(format!("axis {i} is empty")));
            }
            if axis.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(Error::Domain(format!("axis {i} has a non-positive coordinate")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(format!("axis {i} is not strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    /// Grid with every axis equal to `{start + j * step : j < points_per_axis}`.
    pub fn uniform(k: usize, points_per_axis: usize, start: f64, step: f64) -> Result<Self> {
        let axis: Vec<f64> = (0..points_per_axis).map(|j| start + step * j as f64).collect();
        Self::new(vec![axis; k])
    }

    pub fn k(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.k()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            idx[i] = flat % axis.len();
            flat /= axis.len();
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, axis)| axis[i]).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|f| self.point(f))
    }

    /// Flat index of a point, matched exactly coordinate by coordinate.
    pub fn locate(&self, s: &[f64]) -> Option<usize> {
        if s.len() != self.k() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.k());
        for (axis, &c) in self.axes.iter().zip(s) {
            idx.push(axis.binary_search_by(|x| x.total_cmp(&c)).ok()?);
        }
        Some(self.flat_index(&idx))
    }

    /// Smallest positive gap between consecutive coordinates over all axes,
    /// or 1 when every axis is a singleton.
    pub fn min_gap(&self) -> f64 {
        let gap = self
            .axes
            .iter()
            .flat_map(|a| a.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min);
        if gap.is_finite() {
            gap
        } else {
            1.0
        }
    }
}

/// A complex family `{a_s}` indexed by the points of a [`ParamGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFamily {
    grid: ParamGrid,
    values: Vec<Complex64>,
}

impl SampleFamily {
    pub fn new(grid: ParamGrid, values: Vec<Complex64>) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Domain("family values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: ParamGrid, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let values = grid.points().map(|p| f(&p)).collect();
        Self::new(grid, values)
    }

    pub fn from_real(grid: ParamGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, flat: usize) -> Complex64 {
        self.values[flat]
    }

    pub fn value_at(&self, s: &[f64]) -> Option<Complex64> {
        self.grid.locate(s).map(|f| self.values[f])
    }

    /// Same grid, values mapped pointwise.
    pub fn map_values(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// A strictly increasing sequence `I_0 ≺ I_1 ≺ ... ≺ I_J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSequence {
    points: Vec<ParamVector>,
}

impl ChainSequence {
    pub fn new(points: Vec<ParamVector>) -> Result<Self> {
        if let Some(first) = points.first() {
            for p in &points[1..] {
                check_dim(first.len(), p.len())?;
            }
        }
        if let Some(j) = points.windows(2).position(|w| !strictly_below(w[0].coords(), w[1].coords())) {
            return Err(Error::Order(format!("chain is not strictly increasing at step {}", j + 1)));
        }
        Ok(Self { points })
    }

    pub fn from_coords(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points.into_iter().map(ParamVector::new).collect::<Result<_>>()?)
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    /// Number of increments `J`.
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// Half-open box `[I_{j-1}, I_j)` for `j` in `1..=J`.
    pub fn box_bounds(&self, j: usize) -> (&[f64], &[f64]) {
        (self.points[j - 1].coords(), self.points[j].coords())
    }
}

fn validate_axes(k: usize, axes: &[usize]) -> Result<()> {
    for (n, &j) in axes.iter().enumerate() {
        if j >= k {
            return Err(Error::Index(format!("axis {j} out of range for k = {k}")));
        }
        if axes[..n].contains(&j) {
            return Err(Error::Domain(format!("axis {j} repeated in difference set")));
        }
    }
    Ok(())
}

fn shifted(s: &[f64], h: &[f64], axes: &[usize]) -> Vec<f64> {
    let mut p = s.to_vec();
    for &j in axes {
        p[j] += h[j];
    }
    p
}

fn sample(family: &SampleFamily, p: &[f64]) -> Result<Complex64> {
    family.value_at(p).ok_or_else(|| Error::Index(format!("point {p:?} is not on the grid")))
}

/// Mixed difference `Δ^K_h a_s`, composed one axis at a time.
pub fn mixed_difference(
    family: &SampleFamily,
    axes: &[usize],
    h: &ParamVector,
    s: &ParamVector,
) -> Result<Complex64> {
    let k = family.grid().k();
    check_dim(k, h.len())?;
    check_dim(k, s.len())?;
    validate_axes(k, axes)?;
    fn go(family: &SampleFamily, axes: &[usize], h: &[f64], s: Vec<f64>) -> Result<Complex64> {
        match axes.split_first() {
            None => sample(family, &s),
            Some((&j, rest)) => {
                let upper = go(family, rest, h, shifted(&s, h, &[j]))?;
                let lower = go(family, rest, h, s)?;
                Ok(upper - lower)
            }
        }
    }
    go(family, axes, h.coords(), s.coords().to_vec())
}

/// Shift `T^K_h a_s = a_{s + Σ_{j∈K} e_j ⊗ h}`.
pub fn shift(family: &SampleFamily, axes: &[usize], h: &ParamVector, s: &ParamVector) -> Result<Complex64> {
    let k = family.grid().k();
    check_dim(k, h.len())?;
    check_dim(k, s.len())?;
    validate_axes(k, axes)?;
    sample(family, &shifted(s.coords(), h.coords(), axes))
}
