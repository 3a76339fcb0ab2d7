//! Variation and oscillation seminorms of finite sample families.
//!
//! `variation` is an exact maximum-weight-chain computation over the DAG of
//! strictly comparable grid points: with `w(u, v) = |a_v - a_u|^ρ`,
//!
//! ```text
//! best[u] = max(0, max_{u ≺ v} w(u, v) + best[v]),   V^ρ = (max_u best[u])^{1/ρ}
//! ```
//!
//! Vertices are visited in reverse lexicographic order, which is a reverse
//! linear extension of `≺`, so the result is bitwise deterministic.
//! `variation_bruteforce` enumerates every chain and accumulates the same
//! right-nested sums; rounding is monotone, so both agree exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    floor_log2, strictly_below, weakly_below, ChainSequence, ParamGrid, ParamVector,
    SampleFamily,
};

/// Largest point count accepted by [`variation`] unless `force` is set.
pub const DP_POINT_GUARD: usize = 50_000;
/// Largest point count accepted by [`variation_bruteforce`].
pub const BRUTEFORCE_POINT_GUARD: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationCertificate {
    pub value: f64,
    pub rho: f64,
    /// Chain realising `value`; a single point when the value is zero and
    /// empty only for an empty point set.
    pub chain: Vec<Vec<f64>>,
}

impl VariationCertificate {
    /// Recompute `(Σ |a_{I_j} - a_{I_{j-1}}|^ρ)^{1/ρ}` along the stored chain.
    pub fn reevaluate(&self, family: &SampleFamily) -> Result<f64> {
        let values = self
            .chain
            .iter()
            .map(|p| family.value_at(p).ok_or_else(|| Error::Index(format!("{p:?} not on grid"))))
            .collect::<Result<Vec<_>>>()?;
        for w in self.chain.windows(2) {
            if !strictly_below(&w[0], &w[1]) {
                return Err(Error::Order("certificate chain is not strictly increasing".into()));
            }
        }
        let sum: f64 = values.windows(2).map(|w| increment(w[0], w[1], self.rho)).sum();
        Ok(root(sum, self.rho))
    }
}

#[inline]
fn increment(a: Complex64, b: Complex64, rho: f64) -> f64 {
    let d = b - a;
    if rho == 2.0 {
        d.norm_sqr()
    } else {
        d.norm().powf(rho)
    }
}

#[inline]
fn root(sum: f64, rho: f64) -> f64 {
    if rho == 2.0 {
        sum.sqrt()
    } else {
        sum.powf(1.0 / rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho = {rho} must be a finite number >= 1")))
    }
}

/// Maximum-weight chain over an arbitrary point set. `points` must be listed
/// in an order compatible with `≺` (lexicographic order works).
///
/// Returns the value and the indices of the lexicographically smallest
/// optimal chain.
pub fn variation_over_points(points: &[Vec<f64>], values: &[Complex64], rho: f64) -> Result<(f64, Vec<usize>)> {
    check_rho(rho)?;
    if points.len() != values.len() {
        return Err(Error::Dimension { expected: points.len(), got: values.len() });
    }
    let n = points.len();
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let mut best = vec![0.0f64; n];
    let mut next = vec![usize::MAX; n];
    for u in (0..n).rev() {
        let (mut b, mut arg) = (0.0, usize::MAX);
        for v in u + 1..n {
            if strictly_below(&points[u], &points[v]) {
                let cand = increment(values[u], values[v], rho) + best[v];
                // strict comparison keeps the smallest successor on ties and
                // prefers stopping over zero-weight continuations
                if cand > b {
                    b = cand;
                    arg = v;
                }
            }
        }
        best[u] = b;
        next[u] = arg;
    }
    let mut start = 0;
    for u in 1..n {
        if best[u] > best[start] {
            start = u;
        }
    }
    let mut chain = vec![start];
    while next[*chain.last().unwrap()] != usize::MAX {
        chain.push(next[*chain.last().unwrap()]);
    }
    Ok((root(best[start], rho), chain))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VariationOptions {
    /// Skip the [`DP_POINT_GUARD`] size check.
    pub force: bool,
}

/// Exact `V^ρ` of a grid family over strictly increasing chains of grid points.
pub fn variation(family: &SampleFamily, rho: f64) -> Result<VariationCertificate> {
    variation_with(family, rho, VariationOptions::default())
}

pub fn variation_with(family: &SampleFamily, rho: f64, opts: VariationOptions) -> Result<VariationCertificate> {
    check_rho(rho)?;
    let grid = family.grid();
    if grid.len() > DP_POINT_GUARD && !opts.force {
        return Err(Error::Guard(format!(
            "{} grid points exceed the {DP_POINT_GUARD}-point guard",
            grid.len()
        )));
    }
    let points: Vec<Vec<f64>> = grid.points().collect();
    let (value, idx) = variation_over_points(&points, family.values(), rho)?;
    Ok(VariationCertificate { value, rho, chain: idx.into_iter().map(|i| points[i].clone()).collect() })
}

/// Oracle: `V^ρ` by explicit enumeration of every strictly increasing chain.
pub fn variation_bruteforce(family: &SampleFamily, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let grid = family.grid();
    if grid.len() > BRUTEFORCE_POINT_GUARD {
        return Err(Error::Guard(format!(
            "{} grid points exceed the brute-force guard of {BRUTEFORCE_POINT_GUARD}",
            grid.len()
        )));
    }
    let points: Vec<Vec<f64>> = grid.points().collect();
    let values = family.values();
    let preds: Vec<Vec<usize>> =
        (0..points.len()).map(|v| (0..v).filter(|&u| strictly_below(&points[u], &points[v])).collect()).collect();
    // Every chain is walked from its last point backwards, so each chain sum
    // accumulates right to left, one increment per step.
    fn walk(first: usize, sum: f64, preds: &[Vec<usize>], values: &[Complex64], rho: f64, best: &mut f64) {
        if sum > *best {
            *best = sum;
        }
        for &u in &preds[first] {
            walk(u, increment(values[u], values[first], rho) + sum, preds, values, rho, best);
        }
    }
    let mut best = 0.0f64;
    for last in 0..points.len() {
        walk(last, 0.0, &preds, values, rho, &mut best);
    }
    Ok(root(best, rho))
}

/// One summand of an oscillation seminorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxTerm {
    /// Box index `j`, starting at 1.
    pub j: usize,
    /// Grid point realising the box supremum; `None` for an empty box.
    pub witness: Option<Vec<f64>>,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub value: f64,
    pub terms: Vec<BoxTerm>,
}

/// Flat indices of the grid points inside the half-open box `[lo, hi)`.
fn box_points(grid: &ParamGrid, lo: &[f64], hi: &[f64]) -> Vec<usize> {
    let ranges: Vec<(usize, usize)> = grid
        .axes()
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(axis, (&a, &b))| (axis.partition_point(|&x| x < a), axis.partition_point(|&x| x < b)))
        .collect();
    if ranges.iter().any(|(a, b)| a >= b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(grid.flat_index(&idx));
        let mut axis = idx.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < ranges[axis].1 {
                break;
            }
            idx[axis] = ranges[axis].0;
        }
    }
}

fn box_term(family: &SampleFamily, lo: &[f64], hi: &[f64]) -> Result<(f64, Option<usize>)> {
    let members = box_points(family.grid(), lo, hi);
    if members.is_empty() {
        return Ok((0.0, None));
    }
    let anchor = family
        .value_at(lo)
        .ok_or_else(|| Error::Index(format!("anchor {lo:?} of a nonempty box is not a grid point")))?;
    let mut best = (-1.0, members[0]);
    for f in members {
        let t = (family.value(f) - anchor).norm();
        if t > best.0 {
            best = (t, f);
        }
    }
    Ok((best.0, Some(best.1)))
}

/// `O^2_{I,J}` with boxes `[I_{j-1}, I_j)` intersected with the grid.
///
/// Empty boxes contribute zero. A nonempty box needs its lower corner
/// `I_{j-1}` on the grid; the final point `I_J` may lie anywhere.
pub fn oscillation(family: &SampleFamily, chain: &ChainSequence) -> Result<OscillationReport> {
    if let Some(p) = chain.points().first() {
        crate::error::check_dim(family.grid().k(), p.len())?;
    }
    let mut terms = Vec::with_capacity(chain.steps());
    let mut sum = 0.0;
    for j in 1..=chain.steps() {
        let (lo, hi) = chain.box_bounds(j);
        let (term, witness) = box_term(family, lo, hi)?;
        sum += term * term;
        terms.push(BoxTerm { j, witness: witness.map(|f| family.grid().point(f)), term });
    }
    Ok(OscillationReport { value: sum.sqrt(), terms })
}

/// Each axis extended by one virtual coordinate past its maximum, so that a
/// final box can contain the top corner of the grid.
pub fn extended_axes(grid: &ParamGrid) -> Vec<Vec<f64>> {
    let gap = grid.min_gap();
    grid.axes()
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.push(a[a.len() - 1] + gap);
            a
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupOscillation {
    pub value: f64,
    /// Maximising chain, or `None` when the grid holds no chain of `J + 1` points.
    pub chain: Option<Vec<Vec<f64>>>,
    pub steps: usize,
    /// Pairwise box terms evaluated by the search.
    pub evaluated: usize,
}

/// Largest number of `(anchor, corner)` pairs the exact search will tabulate.
pub const SUP_OSCILLATION_PAIR_GUARD: usize = 4_000_000;

/// `sup_I O^2_{I,J}` over chains whose first `J` points are grid points and
/// whose last point lives on the extended grid.
///
/// Box terms depend only on consecutive pairs, so the supremum of the sum of
/// squares is a longest-path problem with exactly `J` edges; it is solved
/// exactly by dynamic programming over the number of remaining steps.
pub fn sup_oscillation(family: &SampleFamily, steps: usize) -> Result<SupOscillation> {
    if steps == 0 {
        return Err(Error::Domain("J must be at least 1".into()));
    }
    let grid = family.grid();
    let ext = ParamGrid::new(extended_axes(grid))?;
    let n = grid.len();
    let m = ext.len();
    if n.saturating_mul(m) > SUP_OSCILLATION_PAIR_GUARD {
        return Err(Error::Guard(format!("{n} x {m} anchor/corner pairs exceed the search guard")));
    }
    let gpts: Vec<Vec<f64>> = grid.points().collect();
    let epts: Vec<Vec<f64>> = ext.points().collect();
    let mut evaluated = 0;
    // term²(u, v) for grid anchor u and extended corner v ≻ u
    let mut sq = vec![f64::NAN; n * m];
    for u in 0..n {
        for v in 0..m {
            if strictly_below(&gpts[u], &epts[v]) {
                let (t, _) = box_term(family, &gpts[u], &epts[v])?;
                sq[u * m + v] = t * t;
                evaluated += 1;
            }
        }
    }
    // grid point index -> extended index
    let to_ext: Vec<usize> = gpts.iter().map(|p| ext.locate(p).unwrap()).collect();

    const NONE: f64 = f64::NEG_INFINITY;
    // f[r][u]: best sum of squares using r more boxes starting at anchor u
    let mut f = vec![vec![NONE; n]; steps + 1];
    let mut choice = vec![vec![usize::MAX; n]; steps + 1];
    for u in 0..n {
        for v in 0..m {
            let t = sq[u * m + v];
            if !t.is_nan() && t > f[1][u] {
                f[1][u] = t;
                choice[1][u] = v;
            }
        }
    }
    for r in 2..=steps {
        for u in 0..n {
            for v in u + 1..n {
                let t = sq[u * m + to_ext[v]];
                if t.is_nan() || f[r - 1][v] == NONE {
                    continue;
                }
                let cand = t + f[r - 1][v];
                if cand > f[r][u] {
                    f[r][u] = cand;
                    choice[r][u] = v;
                }
            }
        }
    }
    let start = (0..n).filter(|&u| f[steps][u] != NONE).fold(None, |acc: Option<usize>, u| match acc {
        Some(b) if f[steps][b] >= f[steps][u] => Some(b),
        _ => Some(u),
    });
    let Some(start) = start else {
        return Ok(SupOscillation { value: 0.0, chain: None, steps, evaluated });
    };
    let mut chain = vec![gpts[start].clone()];
    let mut u = start;
    for r in (2..=steps).rev() {
        u = choice[r][u];
        chain.push(gpts[u].clone());
    }
    chain.push(epts[choice[1][u]].clone());
    Ok(SupOscillation { value: f[steps][start].sqrt(), chain: Some(chain), steps, evaluated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxBoundReport {
    /// `sup_s |a_s|` over the grid.
    pub sup: f64,
    /// `max_j |a_{I_{j-1}}|`.
    pub anchor_max: f64,
    pub oscillation: f64,
    pub chain: Vec<Vec<f64>>,
    pub slack: f64,
    pub holds: bool,
}

/// Pointwise maximal bound `sup |a_s| <= max_j |a_{I_{j-1}}| + O^2_I(a)` for a
/// chain whose boxes cover the grid: the bottom corner followed by the
/// virtual top corner.
pub fn pointwise_max_bound_check(family: &SampleFamily) -> Result<MaxBoundReport> {
    let grid = family.grid();
    let bottom: Vec<f64> = grid.axes().iter().map(|a| a[0]).collect();
    let top: Vec<f64> = extended_axes(grid).iter().map(|a| a[a.len() - 1]).collect();
    let chain = ChainSequence::from_coords(vec![bottom.clone(), top])?;
    let osc = oscillation(family, &chain)?;
    let sup = family.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let anchor_max = family.value_at(&bottom).map(|v| v.norm()).unwrap_or(0.0);
    let rhs = anchor_max + osc.value;
    Ok(MaxBoundReport {
        sup,
        anchor_max,
        oscillation: osc.value,
        chain: chain.points().iter().map(|p| p.coords().to_vec()).collect(),
        slack: rhs - sup,
        holds: sup <= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// `V^2` of the whole family.
    pub full: f64,
    pub long: f64,
    pub short_l2: f64,
    /// `full / (long + short_l2)`, zero when both sides vanish.
    pub ratio: f64,
}

impl SplitReport {
    pub(crate) fn new(full: f64, long: f64, short_l2: f64) -> Self {
        let denom = long + short_l2;
        let ratio = if denom > 0.0 { full / denom } else { 0.0 };
        Self { full, long, short_l2, ratio }
    }
}

/// Long/short splitting of `V^2` for a one-parameter family along the dyadic
/// blocks `[2^n, 2^{n+1})`.
///
/// The long part is `V^2` over the smallest grid point together with the
/// largest grid point of every nonempty block; the short part is the ℓ² sum of
/// the per-block variations.
pub fn split_variation_1d(family: &SampleFamily) -> Result<SplitReport> {
    let grid = family.grid();
    if grid.k() != 1 {
        return Err(Error::Dimension { expected: 1, got: grid.k() });
    }
    let axis = grid.axis(0);
    let values = family.values();
    let blocks: Vec<i32> = axis.iter().map(|&s| floor_log2(s)).collect();

    let mut long_idx = vec![0usize];
    let mut short_sq = 0.0;
    let mut start = 0;
    while start < axis.len() {
        let mut end = start;
        while end + 1 < axis.len() && blocks[end + 1] == blocks[start] {
            end += 1;
        }
        if end != 0 {
            long_idx.push(end);
        }
        let pts: Vec<Vec<f64>> = axis[start..=end].iter().map(|&s| vec![s]).collect();
        let (v, _) = variation_over_points(&pts, &values[start..=end], 2.0)?;
        short_sq += v * v;
        start = end + 1;
    }
    let long_pts: Vec<Vec<f64>> = long_idx.iter().map(|&i| vec![axis[i]]).collect();
    let long_vals: Vec<Complex64> = long_idx.iter().map(|&i| values[i]).collect();
    let (long, _) = variation_over_points(&long_pts, &long_vals, 2.0)?;
    let full = variation(family, 2.0)?.value;
    Ok(SplitReport::new(full, long, short_sq.sqrt()))
}

/// `V^ρ` over weakly increasing chains of distinct grid points, i.e. the
/// variation of the piecewise-constant extension of the family to `R^k_+`.
/// Used only as a diagnostic next to the strict-chain [`variation`].
pub fn weak_chain_variation(family: &SampleFamily, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let points: Vec<Vec<f64>> = family.grid().points().collect();
    let values = family.values();
    let n = points.len();
    let mut best = vec![0.0f64; n];
    for u in (0..n).rev() {
        for v in u + 1..n {
            if weakly_below(&points[u], &points[v]) {
                best[u] = best[u].max(increment(values[u], values[v], rho) + best[v]);
            }
        }
    }
    Ok(root(best.iter().cloned().fold(0.0, f64::max), rho))
}

/// Build a chain from raw coordinates (convenience for callers holding
/// plain vectors).
pub fn chain_from(points: &[Vec<f64>]) -> Result<ChainSequence> {
    ChainSequence::new(points.iter().cloned().map(ParamVector::new).collect::<Result<_>>()?)
}
