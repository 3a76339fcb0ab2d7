//! Seeded, stream-splittable random numbers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::{ChainSequence, MonomialMap, ParamGrid, SampleFamily};
use crate::multipliers::e;
use crate::rademacher_menshov::DyadicBlockFamily;
use crate::seminorms::extended_axes;

pub type SeededRng = ChaCha8Rng;

/// Generator for `seed`, positioned on independent stream `stream`.
pub fn seeded(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Grid with the given shape; each axis starts in `(0.25, 2)` and grows by
/// gaps drawn from `(0.25, 2)`.
pub fn random_grid(rng: &mut SeededRng, shape: &[usize]) -> Result<ParamGrid> {
    let axes = shape
        .iter()
        .map(|&n| {
            let mut x = 0.0;
            (0..n)
                .map(|_| {
                    x += rng.random_range(0.25..2.0);
                    x
                })
                .collect()
        })
        .collect();
    ParamGrid::new(axes)
}

/// Complex value with real and imaginary parts uniform in `(-1, 1)`.
pub fn random_unit(rng: &mut SeededRng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_family(rng: &mut SeededRng, grid: ParamGrid) -> Result<SampleFamily> {
    let values = (0..grid.len()).map(|_| random_unit(rng)).collect();
    SampleFamily::new(grid, values)
}

/// Strictly increasing chain with at most `steps + 1` points drawn from the
/// grid axes extended by one virtual coordinate; `None` when some axis is
/// too short for even one step.
pub fn random_chain(rng: &mut SeededRng, grid: &ParamGrid, steps: usize) -> Result<Option<ChainSequence>> {
    let axes = extended_axes(grid);
    let len = axes.iter().map(Vec::len).min().unwrap_or(0).min(steps + 1);
    if len < 2 {
        return Ok(None);
    }
    let picks: Vec<Vec<f64>> = axes
        .iter()
        .map(|axis| {
            let mut idx = rand::seq::index::sample(rng, axis.len(), len).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| axis[i]).collect()
        })
        .collect();
    let points = (0..len).map(|j| picks.iter().map(|p| p[j]).collect()).collect();
    ChainSequence::from_coords(points).map(Some)
}

/// Dyadic lattice family with random values, zero on the faces `s_i = 1`
/// when `vanishing` is set.
pub fn random_dyadic(rng: &mut SeededRng, depth: u32, data_depth: u32, k0: usize, vanishing: bool) -> Result<DyadicBlockFamily> {
    DyadicBlockFamily::from_fn(depth, data_depth, k0, |s| {
        if vanishing && s.contains(&1.0) {
            Complex64::default()
        } else {
            random_unit(rng)
        }
    })
}

/// `a_s = g(P(s))` with `g(y) = Σ_t c_t e(ω_t · log_2 y)` for `terms` random
/// frequencies `ω_t ∈ (-1, 1)^d`, so the family is compatible with `map`.
pub fn random_compatible_family(rng: &mut SeededRng, map: &MonomialMap, grid: ParamGrid, terms: usize) -> Result<SampleFamily> {
    let waves: Vec<(Vec<f64>, Complex64)> = (0..terms)
        .map(|_| ((0..map.d()).map(|_| rng.random_range(-1.0..1.0)).collect(), random_unit(rng)))
        .collect();
    let values = grid
        .points()
        .map(|s| {
            let y = map.evaluate(&s)?;
            Ok(waves
                .iter()
                .map(|(w, c)| c * e(w.iter().zip(&y).map(|(a, b)| a * b.log2()).sum()))
                .sum())
        })
        .collect::<Result<Vec<_>>>()?;
    SampleFamily::new(grid, values)
}
