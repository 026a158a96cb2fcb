//! Browser bindings. Every export takes a model as JSON text (the same
//! layout the command-line configs use) and returns JSON text.

use mvsde::critical::phase_diagram;
use mvsde::model::{Model, ModelSpec};
use mvsde::quadrature::build_context;
use mvsde::selfconsistency::{f_value, find_roots};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_model(model_json: &str, theta: f64) -> Result<Model, String> {
    let spec: ModelSpec = serde_json::from_str(model_json).map_err(|e| format!("model: {e}"))?;
    Model::new(spec.with_theta(theta)).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    m: Vec<f64>,
    f: Vec<f64>,
    roots: Vec<f64>,
    slopes: Vec<f64>,
}

/// `F(m)` on `points` values of `m` in `[-half_width, half_width]`, plus the
/// roots found by the full scan.
pub fn f_curve_json(model_json: &str, theta: f64, sigma: f64, half_width: f64, points: usize) -> Result<String, String> {
    let model = parse_model(model_json, theta)?;
    let n = points.max(2);
    let m: Vec<f64> = (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect();
    let f = m
        .iter()
        .map(|&x| f_value(&model, sigma, x).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = find_roots(&model, sigma).map_err(|e| e.to_string())?;
    to_json(&Curve {
        m,
        f,
        roots: report.roots.iter().map(|r| r.m).collect(),
        slopes: report.roots.iter().map(|r| r.slope).collect(),
    })
}

#[derive(Serialize)]
struct Density {
    x: Vec<f64>,
    rho: Vec<f64>,
    mean_p: f64,
}

/// Normalized stationary density at mean-field value `m` on the quadrature
/// window.
pub fn density_json(model_json: &str, theta: f64, sigma: f64, m: f64, points: usize) -> Result<String, String> {
    let model = parse_model(model_json, theta)?;
    let ctx = build_context(&model, sigma, m).map_err(|e| e.to_string())?;
    let (lo, hi) = ctx.truncation();
    let n = points.max(2);
    let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let rho = x.iter().map(|&v| ctx.density_at(v)).collect();
    to_json(&Density {
        x,
        rho,
        mean_p: ctx.expectation(|s| s.p_prime),
    })
}

#[derive(Serialize)]
struct Diagram {
    sigma: Vec<f64>,
    roots: Vec<Vec<f64>>,
    transitions: Vec<f64>,
}

/// Roots on a linear σ-grid with located changes of the root count.
pub fn phase_diagram_json(
    model_json: &str,
    theta: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    points: usize,
) -> Result<String, String> {
    let model = parse_model(model_json, theta)?;
    let n = points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|i| sigma_lo + (sigma_hi - sigma_lo) * i as f64 / (n - 1) as f64)
        .collect();
    let d = phase_diagram(&model, &grid).map_err(|e| e.to_string())?;
    to_json(&Diagram {
        roots: d
            .roots_per_sigma
            .iter()
            .map(|r| r.as_ref().map(|r| r.locations()).unwrap_or_default())
            .collect(),
        sigma: d.sigmas,
        transitions: d.transition_estimates,
    })
}

#[wasm_bindgen]
pub fn f_curve(model_json: &str, theta: f64, sigma: f64, half_width: f64, points: usize) -> Result<String, JsValue> {
    f_curve_json(model_json, theta, sigma, half_width, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn density(model_json: &str, theta: f64, sigma: f64, m: f64, points: usize) -> Result<String, JsValue> {
    density_json(model_json, theta, sigma, m, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phase_diagram_scan(
    model_json: &str,
    theta: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    points: usize,
) -> Result<String, JsValue> {
    phase_diagram_json(model_json, theta, sigma_lo, sigma_hi, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn library_version() -> String {
    mvsde::VERSION.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BISTABLE: &str = r#"{"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 2}"#;

    #[test]
    fn curve_has_three_roots_at_low_noise() {
        let v: serde_json::Value = serde_json::from_str(&f_curve_json(BISTABLE, 2.0, 0.6, 1.5, 31).unwrap()).unwrap();
        assert_eq!(v["m"].as_array().unwrap().len(), 31);
        assert_eq!(v["roots"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn density_mean_matches_gaussian() {
        let gauss = r#"{"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 1}"#;
        let v: serde_json::Value = serde_json::from_str(&density_json(gauss, 1.0, 1.0, 0.8, 50).unwrap()).unwrap();
        assert!((v["mean_p"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn diagram_locates_one_transition() {
        let v: serde_json::Value =
            serde_json::from_str(&phase_diagram_json(BISTABLE, 2.0, 0.5, 2.0, 7).unwrap()).unwrap();
        assert_eq!(v["transitions"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn bad_model_is_reported() {
        assert!(f_curve_json("{}", 2.0, 0.5, 1.0, 5).unwrap_err().starts_with("model"));
    }
}
