//! Radon-type Fourier multipliers, their bump-smoothed projections, and
//! periodic multiplier application.
//!
//! Conventions: `e(z) = exp(2πiz)`; the Fourier transform of a measure is
//! `μ̂(ξ) = ∫ e(x·ξ) dμ(x)`, so an average `f ↦ ∫ f(x - y) dν(y)` acts on the
//! plane wave `e(-ξ·x)` by multiplication with `ν̂(ξ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gluing::GluingData;
use crate::lattice::{pow_by_squaring, MonomialMap};

/// `e(z) = exp(2πiz)`, with `z` reduced modulo 1 first.
#[inline]
pub fn e(z: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * (z - z.floor())).sin_cos();
    Complex64::new(c, s)
}

/// Profile `Φ(x) = e^{-πx²}`.
pub fn bump_profile(x: f64) -> f64 {
    (-PI * x * x).exp()
}

/// `Υ(ξ) = e^{-πξ²}`, the transform of [`bump_profile`].
pub fn bump_transform(xi: f64) -> f64 {
    (-PI * xi * xi).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Extra multiplier on the panel count of every axis.
    pub panel_factor: usize,
    /// Largest accepted phase bound `Σ_i α_ij |ξ_i| P_i(s)` on any axis.
    pub phase_cap: f64,
    /// Largest accepted tensor node count.
    pub max_nodes: usize,
    pub tolerance: f64,
    /// Integrate one axis in closed form when every exponent on it is at
    /// most one, so the phase is affine in that variable.
    pub analytic_linear_axis: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { order: 16, panel_factor: 1, phase_cap: 1e5, max_nodes: 20_000_000, tolerance: 1e-10, analytic_linear_axis: true }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.panel_factor < 1 {
            return Err(Error::Domain("quadrature needs order >= 2 and at least one panel".into()));
        }
        Ok(())
    }

    /// Same rule with every panel count doubled.
    pub fn refined(&self) -> Self {
        Self { panel_factor: self.panel_factor * 2, ..*self }
    }

    /// Same rule with plain quadrature on every axis.
    pub fn without_analytic_axis(&self) -> Self {
        Self { analytic_linear_axis: false, ..*self }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn check_positive(s: &[f64]) -> Result<()> {
    if s.iter().all(|&x| x.is_finite() && x > 0.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{s:?} is not a point of R^k_+")))
    }
}

/// Per-axis bound on `|∂_{u_j} phase| / 2π`, namely `Σ_i α_ij |ξ_i P_i(s)|`.
pub fn phase_bounds(map: &MonomialMap, s: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    check_dim(map.k(), s.len())?;
    check_dim(map.d(), xi.len())?;
    let p = map.evaluate(s)?;
    Ok((0..map.k())
        .map(|j| (0..map.d()).map(|i| f64::from(map.matrix().get(i, j)) * (xi[i] * p[i]).abs()).sum())
        .collect())
}

/// `∫_0^1 e(b u) du = e(b/2) sin(πb) / (πb)`.
pub fn linear_phase_average(b: f64) -> Complex64 {
    let x = PI * b;
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    e(0.5 * b) * sinc
}

/// `𝔪_s(ξ) = ∫_{(0,1)^k} e(Σ_i ξ_i P_i(s ⊗ u)) du` by tensor Gauss–Legendre
/// with one panel per unit of phase per axis. When enabled, one axis on
/// which the phase is affine is integrated exactly instead.
pub fn radon_multiplier(map: &MonomialMap, s: &[f64], xi: &[f64], quad: &QuadratureSpec) -> Result<Complex64> {
    quad.validate()?;
    check_positive(s)?;
    let bounds = phase_bounds(map, s, xi)?;
    if xi.iter().all(|&x| x == 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if let Some(b) = bounds.iter().find(|&&b| !(b <= quad.phase_cap)) {
        return Err(Error::Budget(format!("phase bound {b:e} exceeds the cap {:e}", quad.phase_cap)));
    }
    let (k, d) = (map.k(), map.d());
    let linear_axis = if quad.analytic_linear_axis {
        (0..k)
            .filter(|&j| (0..d).all(|i| map.matrix().get(i, j) <= 1))
            .max_by(|&a, &b| bounds[a].total_cmp(&bounds[b]).then(b.cmp(&a)))
    } else {
        None
    };
    let quad_axes: Vec<usize> = (0..k).filter(|&j| Some(j) != linear_axis).collect();
    let (gl_x, gl_w) = gauss_legendre(quad.order);
    let mut total_nodes: usize = 1;
    let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(k);
    for &b in quad_axes.iter().map(|&j| &bounds[j]) {
        let panels = (1.0 + b).ceil() as usize * quad.panel_factor;
        total_nodes = total_nodes.saturating_mul(panels * quad.order);
        if total_nodes > quad.max_nodes {
            return Err(Error::Budget(format!("more than {} quadrature nodes required", quad.max_nodes)));
        }
        let h = 1.0 / panels as f64;
        let mut u = Vec::with_capacity(panels * quad.order);
        let mut w = Vec::with_capacity(panels * quad.order);
        for p in 0..panels {
            for (x, wt) in gl_x.iter().zip(&gl_w) {
                u.push((p as f64 + x) * h);
                w.push(wt * h);
            }
        }
        axes.push((u, w));
    }
    let p = map.evaluate(s)?;
    let coef: Vec<f64> = (0..d).map(|i| xi[i] * p[i]).collect();
    // powers[n][a * d + i] = u_{a}^{α_ij} on the n-th quadrature axis j
    let powers: Vec<Vec<f64>> = quad_axes
        .iter()
        .enumerate()
        .map(|(n, &j)| {
            let mut out = Vec::with_capacity(axes[n].0.len() * d);
            for &u in &axes[n].0 {
                for i in 0..d {
                    out.push(pow_by_squaring(u, map.matrix().get(i, j)));
                }
            }
            out
        })
        .collect();
    let linear: Vec<bool> = (0..d).map(|i| linear_axis.is_some_and(|j| map.matrix().get(i, j) == 1)).collect();
    let leaf = |part: &[f64]| {
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..d {
            if linear[i] {
                b += coef[i] * part[i];
            } else {
                a += coef[i] * part[i];
            }
        }
        if linear_axis.is_some() { e(a) * linear_phase_average(b) } else { e(a) }
    };
    if axes.is_empty() {
        return Ok(leaf(&vec![1.0; d]));
    }
    let m = axes.len();
    let mut partial = vec![vec![1.0; d]; m + 1];
    let mut weight = vec![1.0; m + 1];
    let mut sum = Complex64::default();
    accumulate(0, &axes, &powers, &leaf, &mut partial, &mut weight, &mut sum);
    Ok(sum)
}

fn accumulate(
    j: usize,
    axes: &[(Vec<f64>, Vec<f64>)],
    powers: &[Vec<f64>],
    leaf: &impl Fn(&[f64]) -> Complex64,
    partial: &mut [Vec<f64>],
    weight: &mut [f64],
    sum: &mut Complex64,
) {
    let d = partial[0].len();
    let k = axes.len();
    for (a, &w) in axes[j].1.iter().enumerate() {
        let pw = &powers[j][a * d..(a + 1) * d];
        let (head, tail) = partial.split_at_mut(j + 1);
        for i in 0..d {
            tail[0][i] = head[j][i] * pw[i];
        }
        weight[j + 1] = weight[j] * w;
        if j + 1 == k {
            *sum += weight[k] * leaf(&partial[k]);
        } else {
            accumulate(j + 1, axes, powers, leaf, partial, weight, sum);
        }
    }
}

/// `∫_{(0,1)^k} f(u) du` by tensor Gauss–Legendre with `panels[j]` equal
/// panels on axis `j`.
pub fn tensor_gauss_legendre(panels: &[usize], order: usize, mut f: impl FnMut(&[f64]) -> Complex64) -> Complex64 {
    let (gx, gw) = gauss_legendre(order);
    let axes: Vec<(Vec<f64>, Vec<f64>)> = panels
        .iter()
        .map(|&p| {
            let h = 1.0 / p as f64;
            (0..p)
                .flat_map(|i| gx.iter().zip(&gw).map(move |(x, w)| ((i as f64 + x) * h, w * h)))
                .unzip()
        })
        .collect();
    let k = panels.len();
    let mut idx = vec![0usize; k];
    let mut u = vec![0.0; k];
    let mut sum = Complex64::default();
    if axes.iter().any(|a| a.0.is_empty()) {
        return sum;
    }
    loop {
        let mut w = 1.0;
        for j in 0..k {
            u[j] = axes[j].0[idx[j]];
            w *= axes[j].1[idx[j]];
        }
        sum += w * f(&u);
        let mut j = k;
        loop {
            if j == 0 {
                return sum;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < axes[j].0.len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// `π^D(ξ)`: zero the coordinates listed in `subset`.
pub fn project(xi: &[f64], subset: &[usize]) -> Vec<f64> {
    let mut out = xi.to_vec();
    for &i in subset {
        out[i] = 0.0;
    }
    out
}

fn check_subset(subset: &[usize], d: usize) -> Result<()> {
    for (n, &i) in subset.iter().enumerate() {
        if i >= d || subset[..n].contains(&i) {
            return Err(Error::Index(format!("{subset:?} is not a subset of 0..{d}")));
        }
    }
    Ok(())
}

/// Subsets of `0..d` encoded as bitmasks, decoded to index lists.
fn members(mask: usize, d: usize) -> Vec<usize> {
    (0..d).filter(|i| mask >> i & 1 == 1).collect()
}

/// `𝔪^D_s(ξ) = ∏_{i∈D} Υ(P_i(s) ξ_i) · 𝔪_s(π^D ξ)`.
pub fn projected_multiplier(
    map: &MonomialMap,
    s: &[f64],
    xi: &[f64],
    subset: &[usize],
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    check_dim(map.d(), xi.len())?;
    check_subset(subset, map.d())?;
    let p = map.evaluate(s)?;
    let damp: f64 = subset.iter().map(|&i| bump_transform(p[i] * xi[i])).product();
    Ok(damp * radon_multiplier(map, s, &project(xi, subset), quad)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// `𝔪_s(ξ)`.
    pub full: Complex64,
    /// `𝔪̃_s(ξ) = Σ_D (-1)^{|D|} 𝔪^D_s(ξ)`.
    pub error: Complex64,
    /// `𝔪^D_s(ξ)` for every `D`, indexed by bitmask.
    pub projected: Vec<Complex64>,
    /// `|𝔪 - Σ_{D≠∅} (-1)^{|D|+1} 𝔪^D - 𝔪̃|`.
    pub residual: f64,
}

pub fn error_decomposition(map: &MonomialMap, s: &[f64], xi: &[f64], quad: &QuadratureSpec) -> Result<ErrorDecomposition> {
    let d = map.d();
    if d > 16 {
        return Err(Error::Guard(format!("2^{d} projections requested")));
    }
    let projected = (0..1usize << d)
        .map(|mask| projected_multiplier(map, s, xi, &members(mask, d), quad))
        .collect::<Result<Vec<_>>>()?;
    let sign = |mask: usize| if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let error: Complex64 = projected.iter().enumerate().map(|(m, v)| sign(m) * v).sum();
    let main: Complex64 = projected.iter().enumerate().skip(1).map(|(m, v)| -sign(m) * v).sum();
    let full = projected[0];
    Ok(ErrorDecomposition { full, error, residual: (full - main - error).norm(), projected })
}

/// `𝔪̃_s(ξ)`.
pub fn error_multiplier(map: &MonomialMap, s: &[f64], xi: &[f64], quad: &QuadratureSpec) -> Result<Complex64> {
    Ok(error_decomposition(map, s, xi, quad)?.error)
}

/// `□^D 𝔪_s(ξ) = Σ_{D' ⊆ D} (-1)^{|D'|} 𝔪_s(π^{D'} ξ)`.
pub fn box_difference_multiplier(
    map: &MonomialMap,
    s: &[f64],
    xi: &[f64],
    subset: &[usize],
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    check_dim(map.d(), xi.len())?;
    check_subset(subset, map.d())?;
    let mut sum = Complex64::default();
    for mask in 0..1usize << subset.len() {
        let chosen: Vec<usize> = members(mask, subset.len()).into_iter().map(|b| subset[b]).collect();
        let v = radon_multiplier(map, s, &project(xi, &chosen), quad)?;
        if chosen.len() % 2 == 0 {
            sum += v;
        } else {
            sum -= v;
        }
    }
    Ok(sum)
}

/// Dyadic sample set for [`decay_scan`]: `s_j = 2^a` and `ξ_i = ±2^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySamples {
    pub s_exponents: (i32, i32),
    pub xi_exponents: (i32, i32),
    pub deltas: Vec<f64>,
    /// Largest constant a `δ` may need to count as supported.
    pub ceiling: f64,
}

impl Default for DecaySamples {
    fn default() -> Self {
        Self {
            s_exponents: (-2, 2),
            xi_exponents: (-8, 8),
            deltas: (1..=9).map(|i| f64::from(i) * 0.05).collect(),
            ceiling: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub delta: f64,
    /// `max |𝔪̃_s(ξ)| / ∏_i min(|P_i(s)ξ_i|^δ, |P_i(s)ξ_i|^{-δ})` over the samples.
    pub constant: f64,
    pub samples: usize,
    pub witness_s: Vec<f64>,
    pub witness_xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    pub fits: Vec<DecayFit>,
    /// Largest `δ` whose constant stays below the ceiling.
    pub selected: Option<DecayFit>,
    /// Samples refused by the quadrature budget.
    pub skipped: usize,
}

/// `∏_i min(|x_i|^δ, |x_i|^{-δ})` for `x_i = P_i(s) ξ_i`.
pub fn decay_weight(p: &[f64], xi: &[f64], delta: f64) -> f64 {
    p.iter()
        .zip(xi)
        .map(|(a, b)| {
            let x = (a * b).abs();
            x.powf(delta).min(x.powf(-delta))
        })
        .product()
}

fn dyadic_points(dim: usize, lo: i32, hi: i32, signed: bool) -> Vec<Vec<f64>> {
    let mut values: Vec<f64> = (lo..=hi).map(|a| f64::from(a).exp2()).collect();
    if signed {
        values.extend((lo..=hi).map(|a| -f64::from(a).exp2()));
    }
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Empirical decay constants of `𝔪̃` for each `δ` of the sample grid.
pub fn decay_scan(map: &MonomialMap, samples: &DecaySamples, quad: &QuadratureSpec) -> Result<DecayScan> {
    for &delta in &samples.deltas {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1/2)")));
        }
    }
    let mut evaluated = Vec::new();
    let mut skipped = 0;
    for s in dyadic_points(map.k(), samples.s_exponents.0, samples.s_exponents.1, false) {
        let p = map.evaluate(&s)?;
        for xi in dyadic_points(map.d(), samples.xi_exponents.0, samples.xi_exponents.1, true) {
            match error_multiplier(map, &s, &xi, quad) {
                Ok(v) => evaluated.push((s.clone(), xi, p.clone(), v.norm())),
                Err(Error::Budget(_)) => skipped += 1,
                Err(err) => return Err(err),
            }
        }
    }
    let fits: Vec<DecayFit> = samples
        .deltas
        .iter()
        .map(|&delta| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (n, (_, xi, p, m)) in evaluated.iter().enumerate() {
                let r = m / decay_weight(p, xi, delta);
                if r > best.0 {
                    best = (r, n);
                }
            }
            let (s, xi) = evaluated.get(best.1).map(|e| (e.0.clone(), e.1.clone())).unwrap_or_default();
            DecayFit { delta, constant: best.0.max(0.0), samples: evaluated.len(), witness_s: s, witness_xi: xi }
        })
        .collect();
    let selected = fits
        .iter()
        .filter(|f| f.constant <= samples.ceiling)
        .max_by(|a, b| a.delta.total_cmp(&b.delta))
        .cloned();
    Ok(DecayScan { fits, selected, skipped })
}

/// Frequency sampling inside the boxes `R(-n-h)` for [`off_diagonal_constant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySamples {
    /// Points per dyadic box along each selected coordinate (corners included).
    pub per_box: usize,
    /// Exponent range for coordinates outside the basis rows, sampled on
    /// `{0} ∪ {±2^j}`.
    pub free_exponents: (i32, i32),
    /// Sampled `n` satisfy `|n|_∞ <= n_budget`.
    pub n_budget: i64,
}

impl Default for FrequencySamples {
    fn default() -> Self {
        Self { per_box: 3, free_exponents: (-4, 4), n_budget: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonal {
    pub h: Vec<i64>,
    /// Raw supremum of `|𝔪̃|`.
    pub sup: f64,
    /// `sup / 2^d`.
    pub normalized: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Supremum of `|𝔪̃_{s(n)}(ξ)|` with the basis-row coordinates of `ξ` in the
/// Littlewood–Paley box `|ξ_{i_m}| ∈ [2^{-n_m-h_m}, 2^{-n_m-h_m+1}]`, over
/// sampled `n` and frequencies.
pub fn off_diagonal_constant(
    gluing: &GluingData,
    h: &[i64],
    freq: &FrequencySamples,
    quad: &QuadratureSpec,
) -> Result<OffDiagonal> {
    let map = gluing.map();
    let r = gluing.rank();
    check_dim(r, h.len())?;
    let d = map.d();
    let basis = gluing.basis_rows();
    let free: Vec<usize> = (0..d).filter(|i| !basis.contains(i)).collect();
    let mut free_values = vec![0.0];
    for j in freq.free_exponents.0..=freq.free_exponents.1 {
        free_values.push(f64::from(j).exp2());
        free_values.push(-f64::from(j).exp2());
    }
    let per_box = freq.per_box.max(2);
    let (mut sup, mut samples, mut skipped) = (0.0f64, 0, 0);
    let mut n = vec![-freq.n_budget; r];
    loop {
        let s = gluing.select_scale(&n)?;
        // magnitudes along each basis coordinate
        let boxes: Vec<Vec<f64>> = (0..r)
            .map(|m| {
                let lo = ((-n[m] - h[m]) as f64).exp2();
                (0..per_box).map(|t| lo * (1.0 + t as f64 / (per_box - 1) as f64)).collect()
            })
            .collect();
        let mut pick = vec![0usize; r + free.len()];
        let radix: Vec<usize> = (0..r).map(|_| 2 * per_box).chain(free.iter().map(|_| free_values.len())).collect();
        loop {
            let mut xi = vec![0.0; d];
            for m in 0..r {
                let mag = boxes[m][pick[m] % per_box];
                xi[basis[m]] = if pick[m] >= per_box { -mag } else { mag };
            }
            for (f, &i) in free.iter().enumerate() {
                xi[i] = free_values[pick[r + f]];
            }
            match error_multiplier(map, s.coords(), &xi, quad) {
                Ok(v) => {
                    sup = sup.max(v.norm());
                    samples += 1;
                }
                Err(Error::Budget(_)) => skipped += 1,
                Err(err) => return Err(err),
            }
            if !advance(&mut pick, &radix) {
                break;
            }
        }
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(OffDiagonal {
                    h: h.to_vec(),
                    sup,
                    normalized: sup / (d as f64).exp2(),
                    samples,
                    skipped,
                });
            }
            i -= 1;
            n[i] += 1;
            if n[i] <= freq.n_budget {
                break;
            }
            n[i] = -freq.n_budget;
        }
    }
}

fn advance(idx: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < radix[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Least-squares slope of `log2 c_h` against `|h|_1`, ignoring vanishing `c_h`.
pub fn off_diagonal_slope(scan: &[OffDiagonal]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = scan
        .iter()
        .filter(|o| o.sup > 0.0)
        .map(|o| (o.h.iter().map(|v| v.abs()).sum::<i64>() as f64, o.sup.log2()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    /// `∫ |Δ^K_h ρ_s(x)| dx`.
    pub norm: f64,
    /// `norm / ∏_{i∈K} (h_i / s_i)`.
    pub ratio: f64,
}

/// `L¹` norm of the mixed difference `Δ^K_h ρ_s`, `ρ_s(x) = P(s)^{-1} Φ(x / P(s))`,
/// for the single monomial with exponents `alpha`.
pub fn cancellation_norm(alpha: &[u32], s: &[f64], h: &[f64], subset: &[usize], quad: &QuadratureSpec) -> Result<CancellationReport> {
    quad.validate()?;
    let k = alpha.len();
    check_dim(k, s.len())?;
    check_dim(k, h.len())?;
    check_subset(subset, k)?;
    check_positive(s)?;
    for &i in subset {
        if !(h[i] > 0.0 && h[i] <= s[i]) {
            return Err(Error::Domain(format!("step h_{i} = {} must lie in (0, s_{i}]", h[i])));
        }
    }
    let m = MonomialMap::from_rows(vec![alpha.to_vec()])?;
    // scales and signs of the 2^{|K|} terms
    let terms: Vec<(f64, f64)> = (0..1usize << subset.len())
        .map(|mask| {
            let mut t = s.to_vec();
            for (b, &i) in subset.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    t[i] += h[i];
                }
            }
            let sign = if (subset.len() - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            m.evaluate(&t).map(|p| (p[0], sign))
        })
        .collect::<Result<_>>()?;
    let f = |x: f64| terms.iter().map(|&(p, sg)| sg * bump_profile(x / p) / p).sum::<f64>();
    let x_max = 12.0 * terms.iter().map(|t| t.0).fold(0.0, f64::max);
    // the integrand is even; split [0, x_max] at its sign changes
    let scan = 4096;
    let mut cuts = vec![0.0];
    let mut prev = f(0.0);
    for i in 1..=scan {
        let x = x_max * i as f64 / scan as f64;
        let v = f(x);
        if v != 0.0 && prev != 0.0 && v.signum() != prev.signum() {
            let (mut a, mut b) = (x_max * (i - 1) as f64 / scan as f64, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if f(mid).signum() == prev.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            cuts.push(0.5 * (a + b));
        }
        if v != 0.0 {
            prev = v;
        }
    }
    cuts.push(x_max);
    let (gx, gw) = gauss_legendre(quad.order);
    let panels = 64 * quad.panel_factor;
    let mut norm = 0.0;
    for w in cuts.windows(2) {
        let len = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let a = w[0] + p as f64 * len;
            norm += gx.iter().zip(&gw).map(|(x, wt)| wt * f(a + x * len).abs()).sum::<f64>() * len;
        }
    }
    norm *= 2.0;
    let scale: f64 = subset.iter().map(|&i| h[i] / s[i]).product();
    Ok(CancellationReport { norm, ratio: norm / scale })
}

/// `lim_{h→0} ratio` for `k = 1`, `K = {1}` and `P(t) = t^a`:
/// `a ∫ |Φ(y) + yΦ'(y)| dy = 4a e^{-1/2} / √(2π)`.
pub fn cancellation_limit_1d(a: u32) -> f64 {
    4.0 * f64::from(a) * (-0.5f64).exp() / (2.0 * PI).sqrt()
}

/// Samples of a function on the torus `∏_j [-extent_j, extent_j)` with its
/// cached discrete spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    shape: Vec<usize>,
    extent: Vec<f64>,
    samples: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

/// In-place multidimensional FFT, unnormalized in both directions.
fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    let total: usize = shape.iter().product();
    let mut stride = total;
    for &n in shape {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex64::default(); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[outer + inner + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[outer + inner + t * stride] = *v;
                }
            }
        }
    }
}

/// Signed mode `m ∈ [-n/2, n/2)` of DFT index `t`.
fn signed_mode(t: usize, n: usize) -> i64 {
    if t < n.div_ceil(2) { t as i64 } else { t as i64 - n as i64 }
}

impl PeriodicField {
    pub fn new(shape: Vec<usize>, extent: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        check_dim(shape.len(), extent.len())?;
        if shape.is_empty() || shape.contains(&0) || extent.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Domain("field needs positive sizes and extents".into()));
        }
        check_dim(shape.iter().product(), samples.len())?;
        let mut spectrum = samples.clone();
        fft_nd(&mut spectrum, &shape, false);
        Ok(Self { shape, extent, samples, spectrum })
    }

    pub fn from_fn(shape: Vec<usize>, extent: Vec<f64>, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        check_dim(shape.len(), extent.len())?;
        let total: usize = shape.iter().product();
        let mut samples = Vec::with_capacity(total);
        let mut x = vec![0.0; shape.len()];
        for flat in 0..total {
            let mut rem = flat;
            for j in (0..shape.len()).rev() {
                let t = rem % shape[j];
                rem /= shape[j];
                x[j] = -extent[j] + 2.0 * extent[j] * t as f64 / shape[j] as f64;
            }
            samples.push(f(&x));
        }
        Self::new(shape, extent, samples)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn mean(&self) -> Complex64 {
        self.spectrum[0] / self.samples.len() as f64
    }

    /// Frequency `ξ` of spectral index `flat`: mode `m` on period `T` is the
    /// plane wave `e(m x / T) = e(-ξ x)` with `ξ = -m / T`.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut out = vec![0.0; self.shape.len()];
        for j in (0..self.shape.len()).rev() {
            let t = rem % self.shape[j];
            rem /= self.shape[j];
            out[j] = -(signed_mode(t, self.shape[j]) as f64) / (2.0 * self.extent[j]);
        }
        out
    }

    /// Largest `|samples - ifft(fft(samples))|` relative to the largest sample.
    pub fn roundtrip_error(&self) -> f64 {
        let mut back = self.spectrum.clone();
        fft_nd(&mut back, &self.shape, true);
        let n = self.samples.len() as f64;
        let scale = self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.samples.iter().zip(&back).map(|(a, b)| (a - b / n).norm()).fold(0.0, f64::max) / scale
    }

    /// `T[rule]`: multiply each mode by `rule(ξ)` and transform back.
    pub fn apply_multiplier(&self, mut rule: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let weights: Vec<Complex64> = (0..self.spectrum.len()).map(|f| rule(&self.frequency(f))).collect();
        self.apply_weights(&weights)
    }

    /// Multiply the spectrum by precomputed weights, one per spectral index.
    pub fn apply_weights(&self, weights: &[Complex64]) -> Result<Self> {
        check_dim(self.spectrum.len(), weights.len())?;
        let mut spec: Vec<Complex64> = self.spectrum.iter().zip(weights).map(|(v, w)| v * w).collect();
        let spectrum = spec.clone();
        fft_nd(&mut spec, &self.shape, true);
        let n = spec.len() as f64;
        let samples = spec.into_iter().map(|v| v / n).collect();
        Ok(Self { shape: self.shape.clone(), extent: self.extent.clone(), samples, spectrum })
    }

    /// `ℓ²` operator norm of `T[rule]` on this grid: the largest modulus of the
    /// rule over the lattice frequencies.
    pub fn operator_norm(&self, mut rule: impl FnMut(&[f64]) -> Complex64) -> f64 {
        (0..self.spectrum.len()).map(|f| rule(&self.frequency(f)).norm()).fold(0.0, f64::max)
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn interpolate(&self, x: &[f64]) -> Result<Complex64> {
        check_dim(self.shape.len(), x.len())?;
        let n = self.samples.len() as f64;
        let mut sum = Complex64::default();
        for (f, v) in self.spectrum.iter().enumerate() {
            let xi = self.frequency(f);
            let phase: f64 = xi.iter().zip(x).zip(&self.extent).map(|((k, y), ext)| -k * (y + ext)).sum();
            sum += v * e(phase);
        }
        Ok(sum / n)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}
