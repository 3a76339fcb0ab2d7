//! Commuting translation flows on tori and their polynomial averages.
//!
//! For a trigonometric polynomial `f = Σ_m c_m e(m·x)` the continuous average
//! along `t ↦ T_1^{P_1(t)} ⋯ T_d^{P_d(t)} x` over `∏ [0, M_j]` is
//!
//! ```text
//! A_M f(x) = Σ_m c_m e(m·x) 𝔪_M(θ_m),   θ_m = (m·α_1, ..., m·α_d)
//! ```
//!
//! which is the spectral route; the quadrature route integrates `f` along the
//! orbit directly.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lattice::{MonomialMap, ParamGrid, SampleFamily};
use crate::multipliers::{e, phase_bounds, radon_multiplier, tensor_gauss_legendre, PeriodicField, QuadratureSpec};
use crate::rng::SeededRng;
use crate::seminorms::{chain_from, oscillation};

/// `d` commuting translation flows `T_j^t x = x + t α_j (mod 1)` on `T^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSystem {
    dim: usize,
    directions: Vec<Vec<f64>>,
}

impl TorusSystem {
    pub fn new(directions: Vec<Vec<f64>>) -> Result<Self> {
        let dim = directions.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Domain("a torus system needs at least one flow on a torus of positive dimension".into()));
        }
        for a in &directions {
            check_dim(dim, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("flow directions must be finite".into()));
            }
        }
        Ok(Self { dim, directions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flows(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// `T_j^t x`.
    pub fn flow(&self, j: usize, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.directions[j]).map(|(a, b)| (a + t * b).rem_euclid(1.0)).collect()
    }

    /// `T_1^{t_1} ⋯ T_d^{t_d} x`.
    pub fn act(&self, times: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|c| {
                let shift: f64 = times.iter().zip(&self.directions).map(|(t, a)| t * a[c]).sum();
                (x[c] + shift).rem_euclid(1.0)
            })
            .collect()
    }

    /// `θ_m = (m·α_1, ..., m·α_d)`.
    pub fn frequencies(&self, m: &[i64]) -> Vec<f64> {
        self.directions.iter().map(|a| a.iter().zip(m).map(|(x, &k)| x * k as f64).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    pub coef: Complex64,
}

/// Finite sum `Σ_m c_m e(m·x)` on `T^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    /// Terms sharing a frequency are merged; zero coefficients are dropped.
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        let mut merged: Vec<TrigTerm> = Vec::new();
        for t in terms {
            check_dim(dim, t.freq.len())?;
            match merged.iter_mut().find(|m| m.freq == t.freq) {
                Some(m) => m.coef += t.coef,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != Complex64::default());
        Ok(Self { dim, terms: merged })
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::new(dim, vec![TrigTerm { freq: vec![0; dim], coef: c }]).expect("dimensions agree")
    }

    /// `n` terms with frequencies in `[-max_freq, max_freq]^D` and unit-scale
    /// coefficients; the zero frequency is excluded when `zero_mean` is set.
    pub fn random(rng: &mut SeededRng, dim: usize, n: usize, max_freq: i64, zero_mean: bool) -> Self {
        let mut terms = Vec::with_capacity(n);
        while terms.len() < n {
            let freq: Vec<i64> = (0..dim).map(|_| rng.random_range(-max_freq..=max_freq)).collect();
            if zero_mean && freq.iter().all(|&v| v == 0) {
                continue;
            }
            let coef = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            terms.push(TrigTerm { freq, coef });
        }
        Self::new(dim, terms).expect("dimensions agree")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coef * e(t.freq.iter().zip(x).map(|(&m, y)| m as f64 * y).sum()))
            .sum()
    }

    /// `c_0`.
    pub fn mean(&self) -> Complex64 {
        self.terms.iter().find(|t| t.freq.iter().all(|&v| v == 0)).map(|t| t.coef).unwrap_or_default()
    }

    /// `Σ |c_m|`, an upper bound for `sup |f|`.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm()).sum()
    }

    /// `(Σ |c_m|²)^{1/2} = ‖f‖_{L²(T^D)}`.
    pub fn l2_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.dim, self.terms.iter().map(|t| TrigTerm { freq: t.freq.clone(), coef: c * t.coef }).collect())
            .expect("dimensions agree")
    }

    /// Values on the uniform grid `{i / n}^D`, row-major.
    pub fn sample_grid(&self, n: usize) -> Vec<Complex64> {
        torus_grid(self.dim, n).iter().map(|x| self.eval(x)).collect()
    }
}

/// The uniform grid `{i / n}^D`, row-major.
pub fn torus_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; dim];
            for c in (0..dim).rev() {
                x[c] = (flat % n) as f64 / n as f64;
                flat /= n;
            }
            x
        })
        .collect()
}

fn check_setup(system: &TorusSystem, f: &TrigPolynomial, map: &MonomialMap, m: usize) -> Result<()> {
    check_dim(system.flows(), map.d())?;
    check_dim(system.dim(), f.dim())?;
    check_dim(map.k(), m)
}

/// `A_M f(x)` by tensor Gauss–Legendre over `u ∈ (0,1)^k`, `t = M ⊗ u`,
/// evaluating `f` along the orbit.
pub fn ergodic_average_quadrature(
    system: &TorusSystem,
    f: &TrigPolynomial,
    map: &MonomialMap,
    m: &[f64],
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    check_setup(system, f, map, m.len())?;
    check_dim(system.dim(), x.len())?;
    quad.validate()?;
    let mut bounds = vec![0.0f64; map.k()];
    for t in f.terms() {
        for (b, v) in bounds.iter_mut().zip(phase_bounds(map, m, &system.frequencies(&t.freq))?) {
            *b = b.max(v);
        }
    }
    if let Some(b) = bounds.iter().find(|&&b| !(b <= quad.phase_cap)) {
        return Err(Error::Budget(format!("phase bound {b:e} exceeds the cap {:e}", quad.phase_cap)));
    }
    let panels: Vec<usize> = bounds.iter().map(|b| (1.0 + b).ceil() as usize * quad.panel_factor).collect();
    let nodes = panels.iter().fold(1usize, |acc, p| acc.saturating_mul(p * quad.order));
    if nodes > quad.max_nodes {
        return Err(Error::Budget(format!("more than {} quadrature nodes required", quad.max_nodes)));
    }
    let mut t = vec![0.0; m.len()];
    Ok(tensor_gauss_legendre(&panels, quad.order, |u| {
        for j in 0..m.len() {
            t[j] = m[j] * u[j];
        }
        let p: Vec<f64> = (0..map.d()).map(|i| map.monomial_unchecked(i, &t)).collect();
        f.eval(&system.act(&p, x))
    }))
}

/// `A_M f` as a trigonometric polynomial: each coefficient is multiplied by
/// `𝔪_M(θ_m)`.
pub fn ergodic_average_spectral(
    system: &TorusSystem,
    f: &TrigPolynomial,
    map: &MonomialMap,
    m: &[f64],
    quad: &QuadratureSpec,
) -> Result<TrigPolynomial> {
    check_setup(system, f, map, m.len())?;
    let terms = f
        .terms()
        .iter()
        .map(|t| {
            let w = radon_multiplier(map, m, &system.frequencies(&t.freq), quad)?;
            Ok(TrigTerm { freq: t.freq.clone(), coef: t.coef * w })
        })
        .collect::<Result<Vec<_>>>()?;
    TrigPolynomial::new(f.dim(), terms)
}

/// Largest `∏ M_j` accepted by [`ergodic_average_discrete`].
pub const DISCRETE_BUDGET: u64 = 10_000_000;

/// `(∏ M_j)^{-1} Σ_{n ∈ ∏[1, M_j]} f(T_1^{P_1(n)} ⋯ T_d^{P_d(n)} x)`.
pub fn ergodic_average_discrete(
    system: &TorusSystem,
    f: &TrigPolynomial,
    map: &MonomialMap,
    m: &[u64],
    x: &[f64],
    budget: u64,
) -> Result<Complex64> {
    check_setup(system, f, map, m.len())?;
    check_dim(system.dim(), x.len())?;
    if m.contains(&0) {
        return Err(Error::Domain("every M_j must be at least 1".into()));
    }
    let total = m.iter().try_fold(1u64, |acc, &v| acc.checked_mul(v)).filter(|&t| t <= budget);
    let Some(total) = total else {
        return Err(Error::Budget(format!("{m:?} exceeds the summation budget {budget}")));
    };
    // e(m·T^{P(n)} x) = e(m·x) e(Σ_j P_j(n) θ_j), accumulated per term
    let thetas: Vec<Vec<f64>> = f.terms().iter().map(|t| system.frequencies(&t.freq)).collect();
    let mut sums = vec![Complex64::default(); f.terms().len()];
    let mut n = vec![1u64; m.len()];
    let mut t = vec![0.0; m.len()];
    loop {
        for j in 0..m.len() {
            t[j] = n[j] as f64;
        }
        let p: Vec<f64> = (0..map.d()).map(|i| map.monomial_unchecked(i, &t)).collect();
        for (s, th) in sums.iter_mut().zip(&thetas) {
            let phase: f64 = p.iter().zip(th).map(|(a, b)| (a * b).rem_euclid(1.0)).sum();
            *s += e(phase);
        }
        let mut j = m.len();
        loop {
            if j == 0 {
                let avg: Complex64 = f
                    .terms()
                    .iter()
                    .zip(&sums)
                    .map(|(term, s)| term.coef * e(term.freq.iter().zip(x).map(|(&k, y)| k as f64 * y).sum()) * s)
                    .sum();
                return Ok(avg / total as f64);
            }
            j -= 1;
            n[j] += 1;
            if n[j] <= m[j] {
                break;
            }
            n[j] = 1;
        }
    }
}

/// Multiplier weights `𝔪_M(ξ)` at every spectral index of `field`.
fn radon_weights(field: &PeriodicField, map: &MonomialMap, m: &[f64], quad: &QuadratureSpec) -> Result<Vec<Complex64>> {
    check_dim(map.d(), field.shape().len())?;
    (0..field.spectrum().len()).map(|f| radon_multiplier(map, m, &field.frequency(f), quad)).collect()
}

/// `ℳ_M f(x) = ∫_{(0,1)^k} f(x - P(M ⊗ u)) du` on a periodic grid, computed
/// spectrally.
pub fn radon_average_grid(field: &PeriodicField, map: &MonomialMap, m: &[f64], quad: &QuadratureSpec) -> Result<PeriodicField> {
    field.apply_weights(&radon_weights(field, map, m, quad)?)
}

/// `ℳ_M f(x)` at one point by direct quadrature of the trigonometric
/// interpolant of `field`.
pub fn radon_average_direct(
    field: &PeriodicField,
    map: &MonomialMap,
    m: &[f64],
    x: &[f64],
    panels: usize,
    order: usize,
) -> Result<Complex64> {
    check_dim(map.d(), field.shape().len())?;
    check_dim(map.k(), m.len())?;
    let mut t = vec![0.0; m.len()];
    let mut err = None;
    let v = tensor_gauss_legendre(&vec![panels; m.len()], order, |u| {
        for j in 0..m.len() {
            t[j] = m[j] * u[j];
        }
        let y: Vec<f64> = (0..map.d()).map(|i| x[i] - map.monomial_unchecked(i, &t)).collect();
        field.interpolate(&y).unwrap_or_else(|e| {
            err = Some(e);
            Complex64::default()
        })
    });
    err.map_or(Ok(v), Err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m: Vec<f64>,
    pub min_m: f64,
    /// `max_x |A_M f(x) - mean f|` over the sampled torus grid.
    pub deviation: f64,
}

/// `2^j (1, ..., 1)` for `j` in `lo..=hi`.
pub fn diagonal_schedule(k: usize, lo: i32, hi: i32) -> Vec<Vec<f64>> {
    (lo..=hi).map(|j| vec![f64::from(j).exp2(); k]).collect()
}

/// `M_axis = 2^j` for `j` in `lo..=hi` with every other side fixed at `2^fixed`.
pub fn staircase_schedule(k: usize, axis: usize, fixed: i32, lo: i32, hi: i32) -> Vec<Vec<f64>> {
    (lo..=hi)
        .map(|j| {
            let mut m = vec![f64::from(fixed).exp2(); k];
            m[axis] = f64::from(j).exp2();
            m
        })
        .collect()
}

pub fn convergence_experiment(
    system: &TorusSystem,
    f: &TrigPolynomial,
    map: &MonomialMap,
    schedule: &[Vec<f64>],
    points_per_axis: usize,
    quad: &QuadratureSpec,
) -> Result<Vec<ConvergencePoint>> {
    let xs = torus_grid(system.dim(), points_per_axis);
    let mean = f.mean();
    schedule
        .iter()
        .map(|m| {
            let avg = ergodic_average_spectral(system, f, map, m, quad)?;
            let deviation = xs.iter().map(|x| (avg.eval(x) - mean).norm()).fold(0.0, f64::max);
            Ok(ConvergencePoint { m: m.clone(), min_m: m.iter().cloned().fold(f64::INFINITY, f64::min), deviation })
        })
        .collect()
}

/// Least-squares `C` in `deviation ≈ C / min(M)`.
pub fn fit_inverse_min(series: &[ConvergencePoint]) -> f64 {
    let num: f64 = series.iter().map(|p| p.deviation / p.min_m).sum();
    let den: f64 = series.iter().map(|p| 1.0 / (p.min_m * p.min_m)).sum();
    if den > 0.0 { num / den } else { 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscStatsConfig {
    /// The `M` grid is `{2^{q/4} : lo <= q <= hi}` on every axis.
    pub quarter_range: (i32, i32),
    /// Torus points per axis for the `L^p` norm.
    pub points_per_axis: usize,
    pub steps: Vec<usize>,
    pub chains: usize,
    pub exponents: Vec<f64>,
}

impl Default for OscStatsConfig {
    fn default() -> Self {
        Self { quarter_range: (-16, 20), points_per_axis: 12, steps: vec![2, 4, 8], chains: 20, exponents: vec![1.5, 2.0, 3.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscStepStats {
    pub p: f64,
    pub steps: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Quarter exponents of the chain realising `max_ratio`, per point and axis.
    pub worst_chain: Vec<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscStats {
    pub per_steps: Vec<OscStepStats>,
    pub per_exponent: Vec<OscExponentStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscExponentStats {
    pub p: f64,
    pub norm_f: f64,
    pub max_ratio: f64,
    /// Least-squares slope of `log max_ratio` against `log J`.
    pub trend: Option<f64>,
    /// Same slope between the two largest `J` only.
    pub tail_trend: Option<f64>,
}

impl OscStats {
    pub fn for_exponent(&self, p: f64) -> Option<&OscExponentStats> {
        self.per_exponent.iter().find(|s| s.p == p)
    }
}

/// Random lacunary chain with `steps + 1` points whose quarter exponents are
/// `4 (o_i + j) + σ_{j,i}` with `σ ∈ {0, 1, 2, 3}` and a random start `o_i`.
pub fn lacunary_chain(rng: &mut SeededRng, k: usize, steps: usize, quarter_range: (i32, i32)) -> Result<Vec<Vec<i32>>> {
    let span = 4 * steps as i32 + 3;
    if quarter_range.1 - quarter_range.0 < span {
        return Err(Error::Domain(format!("quarter range {quarter_range:?} cannot hold {steps} lacunary steps")));
    }
    let starts: Vec<i32> = (0..k).map(|_| rng.random_range(quarter_range.0..=quarter_range.1 - span)).collect();
    Ok((0..=steps)
        .map(|j| starts.iter().map(|&o| o + 4 * j as i32 + rng.random_range(0..4)).collect())
        .collect())
}

fn quarter_pow(q: i32) -> f64 {
    (f64::from(q) / 4.0).exp2()
}

fn discrete_lp(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v.powf(p);
        n += 1;
    }
    if n == 0 { 0.0 } else { (sum / n as f64).powf(1.0 / p) }
}

/// `max_I ‖O^2_{I,J}(A_M f)‖_p / ‖f‖_p` over random lacunary chains, for each
/// requested `J`; the averages are evaluated spectrally on the `M` grid.
pub fn oscillation_statistics(
    system: &TorusSystem,
    f: &TrigPolynomial,
    map: &MonomialMap,
    config: &OscStatsConfig,
    rng: &mut SeededRng,
    quad: &QuadratureSpec,
) -> Result<OscStats> {
    check_setup(system, f, map, map.k())?;
    if config.exponents.is_empty() || config.exponents.iter().any(|p| !(*p >= 1.0)) || config.points_per_axis == 0 {
        return Err(Error::Domain("need exponents p >= 1 and a nonempty torus grid".into()));
    }
    let k = map.k();
    let axis: Vec<f64> = (config.quarter_range.0..=config.quarter_range.1).map(quarter_pow).collect();
    let grid = ParamGrid::new(vec![axis; k])?;
    let weights: Vec<Vec<Complex64>> = grid
        .points()
        .map(|m| f.terms().iter().map(|t| radon_multiplier(map, &m, &system.frequencies(&t.freq), quad)).collect())
        .collect::<Result<_>>()?;
    let xs = torus_grid(system.dim(), config.points_per_axis);
    let norms: Vec<f64> = config.exponents.iter().map(|&p| discrete_lp(xs.iter().map(|x| f.eval(x).norm()), p)).collect();
    let families: Vec<SampleFamily> = xs
        .iter()
        .map(|x| {
            let waves: Vec<Complex64> = f
                .terms()
                .iter()
                .map(|t| t.coef * e(t.freq.iter().zip(x).map(|(&m, y)| m as f64 * y).sum()))
                .collect();
            let values = weights.iter().map(|w| w.iter().zip(&waves).map(|(a, b)| a * b).sum()).collect();
            SampleFamily::new(grid.clone(), values)
        })
        .collect::<Result<_>>()?;
    let np = config.exponents.len();
    let mut per_steps = Vec::new();
    for &steps in &config.steps {
        let mut acc: Vec<(f64, f64, Vec<Vec<i32>>)> = vec![(0.0, 0.0, Vec::new()); np];
        for _ in 0..config.chains {
            let q = lacunary_chain(rng, k, steps, config.quarter_range)?;
            let pts: Vec<Vec<f64>> = q.iter().map(|p| p.iter().map(|&v| quarter_pow(v)).collect()).collect();
            let chain = chain_from(&pts)?;
            let osc = families.iter().map(|fam| oscillation(fam, &chain).map(|r| r.value)).collect::<Result<Vec<_>>>()?;
            for ((&p, &norm), (max, total, worst)) in config.exponents.iter().zip(&norms).zip(acc.iter_mut()) {
                let ratio = if norm > 0.0 { discrete_lp(osc.iter().copied(), p) / norm } else { 0.0 };
                *total += ratio;
                if ratio > *max || worst.is_empty() {
                    *max = max.max(ratio);
                    *worst = q.clone();
                }
            }
        }
        for (&p, (max_ratio, total, worst)) in config.exponents.iter().zip(acc) {
            per_steps.push(OscStepStats {
                p,
                steps,
                max_ratio,
                mean_ratio: if config.chains > 0 { total / config.chains as f64 } else { 0.0 },
                worst_chain: worst,
            });
        }
    }
    let per_exponent = config
        .exponents
        .iter()
        .zip(&norms)
        .map(|(&p, &norm_f)| {
            let rows: Vec<&OscStepStats> = per_steps.iter().filter(|s| s.p == p).collect();
            OscExponentStats {
                p,
                norm_f,
                max_ratio: rows.iter().map(|s| s.max_ratio).fold(0.0, f64::max),
                trend: log_log_slope(&rows),
                tail_trend: {
                    let mut sorted = rows.clone();
                    sorted.sort_by_key(|s| s.steps);
                    log_log_slope(&sorted[sorted.len().saturating_sub(2)..])
                },
            }
        })
        .collect();
    Ok(OscStats { per_steps, per_exponent })
}

fn log_log_slope(stats: &[&OscStepStats]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = stats
        .iter()
        .filter(|s| s.max_ratio > 0.0)
        .map(|s| ((s.steps as f64).ln(), s.max_ratio.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}
