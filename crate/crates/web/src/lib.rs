//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers or JSON text and returns JSON text, so the
//! page needs no bundler. The `*_json` functions are the same operations
//! without the wasm boundary and are what the native tests call.

use polyosc::dynamics::{convergence_experiment, diagonal_schedule, fit_inverse_min, TorusSystem, TrigPolynomial};
use polyosc::lattice::{MonomialMap, ParamGrid, SampleFamily};
use polyosc::multipliers::{radon_multiplier, QuadratureSpec};
use polyosc::rng::seeded;
use polyosc::seminorms::variation;
use polyosc::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Guard on curve resolution so a typo in the page cannot freeze the tab.
pub const MAX_POINTS: usize = 2001;

#[derive(Serialize)]
struct Certificate {
    rho: f64,
    value: f64,
    chain: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CurvePoint {
    t: f64,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct Convergence {
    series: Vec<polyosc::dynamics::ConvergencePoint>,
    fitted_c: f64,
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Exact `ρ`-variation of a real family on a product grid, with the chain
/// attaining it. `values` is row-major with the last axis fastest.
pub fn variation_json(axes: &str, values: &str, rho: f64) -> Result<String, String> {
    let axes: Vec<Vec<f64>> = parse("axes", axes)?;
    let values: Vec<f64> = parse("values", values)?;
    let grid = ParamGrid::new(axes).map_err(|e| e.to_string())?;
    let family = SampleFamily::new(grid, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
        .map_err(|e| e.to_string())?;
    let cert = variation(&family, rho).map_err(|e| e.to_string())?;
    Ok(json(&Certificate { rho, value: cert.value, chain: cert.chain }))
}

/// `t ↦ m_s(t·direction)` sampled at `points` evenly spaced `t`.
pub fn multiplier_json(rows: &str, s: &str, direction: &str, t_min: f64, t_max: f64, points: usize) -> Result<String, String> {
    let rows: Vec<Vec<u32>> = parse("rows", rows)?;
    let s: Vec<f64> = parse("s", s)?;
    let direction: Vec<f64> = parse("direction", direction)?;
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must lie in 2..={MAX_POINTS}"));
    }
    let map = MonomialMap::from_rows(rows).map_err(|e| e.to_string())?;
    let quad = QuadratureSpec::default();
    let curve = (0..points)
        .map(|i| {
            let t = t_min + (t_max - t_min) * i as f64 / (points - 1) as f64;
            let xi: Vec<f64> = direction.iter().map(|d| t * d).collect();
            let m = radon_multiplier(&map, &s, &xi, &quad).map_err(|e| e.to_string())?;
            Ok(CurvePoint { t, re: m.re, im: m.im, abs: m.norm() })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json(&curve))
}

/// Deviation of the two-parameter torus average from the mean of a random
/// trigonometric polynomial, along `M = (2^j, 2^j)` for `j` in `lo..=hi`.
/// The flows are `alpha · e_1` and `alpha · e_2`.
pub fn convergence_json(alpha: f64, lo: i32, hi: i32, seed: u64) -> Result<String, String> {
    if lo > hi || hi > 30 {
        return Err("need lo <= hi <= 30".into());
    }
    let system = TorusSystem::new(vec![vec![alpha, 0.0], vec![0.0, alpha]]).map_err(|e| e.to_string())?;
    let map = MonomialMap::from_rows(vec![vec![1, 0], vec![0, 1]]).map_err(|e| e.to_string())?;
    let f = TrigPolynomial::random(&mut seeded(seed, 0), 2, 5, 3, true);
    let series = convergence_experiment(&system, &f, &map, &diagonal_schedule(2, lo, hi), 16, &QuadratureSpec::default())
        .map_err(|e| e.to_string())?;
    let fitted_c = fit_inverse_min(&series);
    Ok(json(&Convergence { series, fitted_c }))
}

#[wasm_bindgen]
pub fn variation_certificate(axes: &str, values: &str, rho: f64) -> Result<String, JsValue> {
    variation_json(axes, values, rho).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn multiplier_curve(rows: &str, s: &str, direction: &str, t_min: f64, t_max: f64, points: usize) -> Result<String, JsValue> {
    multiplier_json(rows, s, direction, t_min, t_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ergodic_convergence(alpha: f64, lo: i32, hi: i32, seed: u64) -> Result<String, JsValue> {
    convergence_json(alpha, lo, hi, seed).map_err(|e| JsValue::from_str(&e))
}
