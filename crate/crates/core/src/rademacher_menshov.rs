//! Dyadic Rademacher–Menshov bounds and the rectangle decomposition of
//! two-parameter increments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ParamGrid, SampleFamily};
use crate::seminorms::variation;

/// Values on the dyadic lattice `{1 + j 2^{L-L0} : 0 <= j <= 2^{L0}}^{k0}`,
/// stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlockFamily {
    depth: u32,
    data_depth: u32,
    k0: usize,
    values: Vec<Complex64>,
}

/// Largest supported `L`; lattice coordinates stay exact integers in `f64`.
pub const MAX_DEPTH: u32 = 40;

impl DyadicBlockFamily {
    pub fn new(depth: u32, data_depth: u32, k0: usize, values: Vec<Complex64>) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::Format(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        if data_depth == 0 || data_depth > depth {
            return Err(Error::Format(format!("data depth {data_depth} must lie in 1..={depth}")));
        }
        if k0 == 0 {
            return Err(Error::Format("at least one axis is required".into()));
        }
        let side = (1usize << data_depth) + 1;
        let expected = side
            .checked_pow(k0 as u32)
            .ok_or_else(|| Error::Guard("lattice too large".into()))?;
        crate::error::check_dim(expected, values.len())?;
        Ok(Self { depth, data_depth, k0, values })
    }

    pub fn from_fn(depth: u32, data_depth: u32, k0: usize, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let grid = lattice_grid(depth, data_depth, k0)?;
        let values = grid.points().map(|p| f(&p)).collect();
        Self::new(depth, data_depth, k0, values)
    }

    /// Read a family whose grid must be exactly the dyadic lattice.
    pub fn from_family(family: &SampleFamily, depth: u32, data_depth: u32) -> Result<Self> {
        let k0 = family.grid().k();
        let expected = lattice_grid(depth, data_depth, k0)?;
        if family.grid() != &expected {
            return Err(Error::Format(format!(
                "grid is not the dyadic lattice of [1, 1 + 2^{depth}]^{k0} at resolution {data_depth}"
            )));
        }
        Self::new(depth, data_depth, k0, family.values().to_vec())
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn data_depth(&self) -> u32 {
        self.data_depth
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Points per axis, `2^{L0} + 1`.
    pub fn side(&self) -> usize {
        (1usize << self.data_depth) + 1
    }

    /// Lattice spacing `2^{L-L0}`.
    pub fn spacing(&self) -> f64 {
        (1u64 << (self.depth - self.data_depth)) as f64
    }

    pub fn grid(&self) -> ParamGrid {
        lattice_grid(self.depth, self.data_depth, self.k0).expect("validated at construction")
    }

    pub fn to_family(&self) -> SampleFamily {
        SampleFamily::new(self.grid(), self.values.clone()).expect("validated at construction")
    }

    /// Value at lattice index `idx` (each entry in `0..=2^{L0}`).
    pub fn at(&self, idx: &[usize]) -> Complex64 {
        let side = self.side();
        self.values[idx.iter().fold(0, |acc, &i| acc * side + i)]
    }

    /// True when the family vanishes on every face `{s_i = 1}`.
    pub fn vanishes_on_faces(&self) -> bool {
        let side = self.side();
        self.values.iter().enumerate().all(|(flat, v)| {
            let mut f = flat;
            let mut on_face = false;
            for _ in 0..self.k0 {
                on_face |= f % side == 0;
                f /= side;
            }
            !on_face || *v == Complex64::default()
        })
    }

    /// Mixed difference over every axis of the lattice box with lower index
    /// corner `lo` and index widths `width`.
    pub fn box_difference(&self, lo: &[usize], width: &[usize]) -> Complex64 {
        let mut sum = Complex64::default();
        let mut idx = vec![0; self.k0];
        for eps in 0..1usize << self.k0 {
            let mut ones = 0;
            for i in 0..self.k0 {
                let bit = (eps >> i) & 1;
                ones += bit;
                idx[i] = lo[i] + bit * width[i];
            }
            let v = self.at(&idx);
            if (self.k0 - ones) % 2 == 0 {
                sum += v;
            } else {
                sum -= v;
            }
        }
        sum
    }
}

/// The dyadic lattice of `[1, 1 + 2^L]^{k0}` at resolution `L0`.
pub fn lattice_grid(depth: u32, data_depth: u32, k0: usize) -> Result<ParamGrid> {
    if data_depth > depth || depth > MAX_DEPTH {
        return Err(Error::Format(format!("invalid depths L = {depth}, L0 = {data_depth}")));
    }
    let h = (1u64 << (depth - data_depth)) as f64;
    let axis: Vec<f64> = (0..=(1u64 << data_depth)).map(|j| 1.0 + j as f64 * h).collect();
    ParamGrid::new(vec![axis; k0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Constant the inequality `lhs <= constant * rhs` is claimed with.
    pub constant: f64,
}

impl RmBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.constant * self.rhs + tol
    }

    /// `lhs / rhs`, zero when both vanish and infinite when only `rhs` does.
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// One-parameter bound: `V^2` against the sum over scales `l = 1..=L0` of the
/// ℓ² norms of the increments at spacing `2^{L-l}`. Constant `√2`.
pub fn rm_bound_1d(family: &DyadicBlockFamily) -> Result<RmBound> {
    if family.k0 != 1 {
        return Err(Error::Dimension { expected: 1, got: family.k0 });
    }
    let lhs = variation(&family.to_family(), 2.0)?.value;
    let rhs = (1..=family.data_depth)
        .map(|l| {
            let step = 1usize << (family.data_depth - l);
            (1..=1usize << l)
                .map(|j| (family.values[j * step] - family.values[(j - 1) * step]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(RmBound { lhs, rhs, constant: std::f64::consts::SQRT_2 })
}

/// Multiparameter bound for families vanishing on the faces `{s_i = 1}`:
/// `V^2` against the sum over `l ∈ [L0]^{k0}` of the ℓ² norms of the full
/// mixed differences over the dyadic boxes of side `2^{L-l_i}`. Constant
/// `2^{k0/2}`.
pub fn rm_bound_multi(family: &DyadicBlockFamily) -> Result<RmBound> {
    if family.k0 < 2 {
        return Err(Error::Precondition(format!("k0 = {} but at least two axes are required", family.k0)));
    }
    if !family.vanishes_on_faces() {
        return Err(Error::Precondition("family does not vanish where some s_i = 1".into()));
    }
    let k0 = family.k0;
    let l0 = family.data_depth as usize;
    let lhs = variation(&family.to_family(), 2.0)?.value;
    let mut rhs = 0.0;
    let mut levels = vec![1usize; k0];
    loop {
        let width: Vec<usize> = levels.iter().map(|&l| 1usize << (l0 - l)).collect();
        let mut j = vec![0usize; k0];
        let mut sq = 0.0;
        loop {
            let lo: Vec<usize> = j.iter().zip(&width).map(|(&j, &w)| j * w).collect();
            sq += family.box_difference(&lo, &width).norm_sqr();
            if !odometer(&mut j, |i| 1usize << levels[i]) {
                break;
            }
        }
        rhs += sq.sqrt();
        if !odometer_from(&mut levels, 1, |_| l0 + 1) {
            break;
        }
    }
    Ok(RmBound { lhs, rhs, constant: 2f64.powf(k0 as f64 / 2.0) })
}

/// Advance a mixed-radix counter starting at zero; false after the last state.
fn odometer(idx: &mut [usize], bound: impl Fn(usize) -> usize) -> bool {
    odometer_from(idx, 0, bound)
}

fn odometer_from(idx: &mut [usize], start: usize, bound: impl Fn(usize) -> usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < bound(i) {
            return true;
        }
        idx[i] = start;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RectangleSource {
    /// `[s_1, s'_1) × [s_2, s'_2)`
    Core,
    /// `[1, s_1) × [s_2, s'_2)`
    Left,
    /// `[s_1, s'_1) × [1, s_2)`
    Bottom,
}

/// A dyadic rectangle `[1 + (j_i - 1) 2^{L-l_i}, 1 + j_i 2^{L-l_i})` on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicRectangle {
    pub levels: [u32; 2],
    /// 1-based position along each axis.
    pub j: [usize; 2],
    pub sign: i8,
    pub source: RectangleSource,
}

impl DyadicRectangle {
    /// Half-open index interval `[lo, hi)` along `axis` on a lattice of
    /// resolution `data_depth`.
    pub fn index_range(&self, axis: usize, data_depth: u32) -> (usize, usize) {
        let w = 1usize << (data_depth - self.levels[axis]);
        ((self.j[axis] - 1) * w, self.j[axis] * w)
    }

    /// Half-open coordinate interval along `axis`.
    pub fn bounds(&self, axis: usize, depth: u32) -> (f64, f64) {
        let w = (1u64 << (depth - self.levels[axis])) as f64;
        (1.0 + (self.j[axis] - 1) as f64 * w, 1.0 + self.j[axis] as f64 * w)
    }

    pub fn intersects(&self, other: &Self, data_depth: u32) -> bool {
        (0..2).all(|a| {
            let (lo1, hi1) = self.index_range(a, data_depth);
            let (lo2, hi2) = other.index_range(a, data_depth);
            lo1 < hi2 && lo2 < hi1
        })
    }
}

/// Split the index interval `[a, b)` into maximal aligned dyadic pieces of
/// length at most `2^{L0-1}`, returned as `(level, j)`.
pub fn dyadic_pieces(mut a: usize, b: usize, data_depth: u32) -> Vec<(u32, usize)> {
    let mut out = Vec::new();
    while a < b {
        let mut m = data_depth - 1;
        while m > 0 && (a % (1 << m) != 0 || a + (1 << m) > b) {
            m -= 1;
        }
        out.push((data_depth - m, a / (1 << m) + 1));
        a += 1 << m;
    }
    out
}

fn lattice_index(family: &DyadicBlockFamily, s: &[f64]) -> Result<[usize; 2]> {
    let h = family.spacing();
    let max = (1usize << family.data_depth) as f64;
    let mut out = [0; 2];
    for (o, &x) in out.iter_mut().zip(s) {
        let j = (x - 1.0) / h;
        if !(j >= 0.0 && j <= max && j.fract() == 0.0) {
            return Err(Error::Precondition(format!("{s:?} is not a lattice point")));
        }
        *o = j as usize;
    }
    Ok(out)
}

/// Signed dyadic rectangles whose mixed differences sum to `a_{s'} - a_s`
/// for every two-parameter family vanishing on the faces.
///
/// Requires `(1,1) ⪯ s ≺ s'` on the lattice of `family`.
pub fn rectangle_decomposition(family: &DyadicBlockFamily, s: &[f64], s_prime: &[f64]) -> Result<Vec<DyadicRectangle>> {
    if family.k0 != 2 || s.len() != 2 || s_prime.len() != 2 {
        return Err(Error::Precondition("the rectangle decomposition is two-parameter".into()));
    }
    let a = lattice_index(family, s)?;
    let b = lattice_index(family, s_prime)?;
    if !(a[0] < b[0] && a[1] < b[1]) {
        return Err(Error::Precondition(format!("{s:?} does not strictly precede {s_prime:?}")));
    }
    let l0 = family.data_depth;
    let rects = [
        (RectangleSource::Core, (a[0], b[0]), (a[1], b[1])),
        (RectangleSource::Left, (0, a[0]), (a[1], b[1])),
        (RectangleSource::Bottom, (a[0], b[0]), (0, a[1])),
    ];
    let mut out = Vec::new();
    for (source, x, y) in rects {
        let xs = dyadic_pieces(x.0, x.1, l0);
        let ys = dyadic_pieces(y.0, y.1, l0);
        for &(lx, jx) in &xs {
            for &(ly, jy) in &ys {
                out.push(DyadicRectangle { levels: [lx, ly], j: [jx, jy], sign: 1, source });
            }
        }
    }
    Ok(out)
}

/// Signed sum of the mixed differences over `rects`.
pub fn reconstruct(family: &DyadicBlockFamily, rects: &[DyadicRectangle]) -> Complex64 {
    rects
        .iter()
        .map(|r| {
            let (x0, x1) = r.index_range(0, family.data_depth);
            let (y0, y1) = r.index_range(1, family.data_depth);
            f64::from(r.sign) * family.box_difference(&[x0, y0], &[x1 - x0, y1 - y0])
        })
        .sum()
}

/// Largest number of rectangles sharing a scale pair `(l_1, l_2)` within a
/// single source rectangle.
pub fn max_per_scale(rects: &[DyadicRectangle]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for r in rects {
        *counts.entry((r.source as u8, r.levels)).or_insert(0usize) += 1;
    }
    counts.into_values().max().unwrap_or(0)
}
