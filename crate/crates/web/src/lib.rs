//! WebAssembly bindings for a small in-browser demo: the adaptive penalty
//! curve, a synthetic fit explorer and a one-column nonparanormal transform.
//!
//! Each JS export wraps a plain Rust function of the same name.

use priorglasso::graph::{export_edges, Edge, LayerSelector};
use priorglasso::synth::{compare_methods, BenchmarkSettings};
use priorglasso::{
    adaptive_weights, generate_scenario, nonparanormal_transform, DMatrix, ObservationMatrix, PriorMatrix,
    ScenarioSpec, SolverConfig,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Penalty multiplier `w̃(W)` sampled at `points` evenly spaced prior values in [0, 1].
pub fn weight_curve(k: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    let grid = DMatrix::from_fn(points, points, |i, j| if i == j { i as f64 / (points - 1) as f64 } else { 0.5 });
    let prior = PriorMatrix::from_values(grid, 1).map_err(|e| e.to_string())?;
    let weights = adaptive_weights(&prior, k).map_err(|e| e.to_string())?;
    Ok(weights.w_tilde().diagonal().iter().copied().collect())
}

#[derive(Debug, Serialize)]
pub struct Exploration {
    pub spec: ScenarioSpec,
    pub iterations: usize,
    pub converged: bool,
    pub joint_f1: f64,
    pub independent_f1: f64,
    pub csr_estimated: f64,
    pub csr_target: f64,
    pub true_edges: Vec<Edge>,
    pub estimated_edges: Vec<Edge>,
}

/// Generates a scenario, fits it jointly and independently, and reports
/// recovery plus both edge lists.
pub fn explore(spec: ScenarioSpec, rho: f64, gamma_s: f64) -> Result<Exploration, String> {
    let scenario = generate_scenario(spec).map_err(|e| e.to_string())?;
    let settings = BenchmarkSettings {
        config: SolverConfig { rho, gamma_s, ..SolverConfig::default() },
        ..BenchmarkSettings::default()
    };
    let cmp = compare_methods(&scenario, &settings).map_err(|e| e.to_string())?;
    let truth = priorglasso::JointModel::from_independent(
        (0..scenario.n_classes()).map(|c| scenario.theta_true[c].clone()).collect(),
        &scenario.class_covariances().map_err(|e| e.to_string())?,
        &settings.config,
    );
    let true_edges = export_edges(&truth, LayerSelector::All, settings.edge_tol).map_err(|e| e.to_string())?;
    let estimated_edges =
        export_edges(&cmp.joint_model, LayerSelector::All, settings.edge_tol).map_err(|e| e.to_string())?;
    Ok(Exploration {
        spec,
        iterations: cmp.joint_model.iterations,
        converged: cmp.joint_model.converged,
        joint_f1: cmp.joint.combined.f1,
        independent_f1: cmp.independent.combined.f1,
        csr_estimated: cmp.joint.csr_estimated,
        csr_target: cmp.joint.csr_target,
        true_edges,
        estimated_edges,
    })
}

pub fn gaussianize_values(values: &[f64]) -> Result<Vec<f64>, String> {
    let obs = ObservationMatrix::new(DMatrix::from_column_slice(values.len(), 1, values), 1)
        .map_err(|e| e.to_string())?;
    let out = nonparanormal_transform(&obs).map_err(|e| e.to_string())?;
    Ok(out.matrix.data().iter().copied().collect())
}

#[wasm_bindgen(js_name = weightCurve)]
pub fn weight_curve_js(k: f64, points: usize) -> Result<Vec<f64>, JsError> {
    weight_curve(k, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = explore)]
#[allow(clippy::too_many_arguments)]
pub fn explore_js(
    p: usize,
    n_classes: usize,
    n_per_class: usize,
    common_ratio: f64,
    edge_density: f64,
    seed: u64,
    rho: f64,
    gamma_s: f64,
) -> Result<String, JsError> {
    let spec = ScenarioSpec { p, n_classes, n_per_class, common_ratio, edge_density, seed };
    let result = explore(spec, rho, gamma_s).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&result).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gaussianize)]
pub fn gaussianize_js(values: Vec<f64>) -> Result<Vec<f64>, JsError> {
    gaussianize_values(&values).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_is_half_at_midpoint_and_decreasing() {
        let curve = weight_curve(10.0, 11).unwrap();
        assert_eq!(curve.len(), 11);
        assert_eq!(curve[5], 0.5);
        assert!(curve.windows(2).all(|w| w[1] < w[0]));
        assert!(weight_curve(1.0, 1).is_err());
        assert!(weight_curve(-1.0, 5).is_err());
    }

    #[test]
    fn flat_curve_at_zero_sharpness() {
        assert!(weight_curve(0.0, 7).unwrap().iter().all(|&w| w == 0.5));
    }

    #[test]
    fn explorer_reports_consistent_edges() {
        let spec = ScenarioSpec { p: 8, n_classes: 2, n_per_class: 100, common_ratio: 0.5, edge_density: 0.3, seed: 3 };
        let out = explore(spec, 0.1, 0.1).unwrap();
        assert!(out.iterations >= 1);
        assert!((0.0..=1.0).contains(&out.joint_f1));
        assert!(!out.true_edges.is_empty());
        assert!(out.estimated_edges.iter().all(|e| e.i < e.j && e.j < 8));
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["spec"]["p"], 8);
    }

    #[test]
    fn gaussianize_preserves_order() {
        let z = gaussianize_values(&[3.0, -1.0, 10.0, 0.5]).unwrap();
        assert!(z[1] < z[3] && z[3] < z[0] && z[0] < z[2]);
        assert!((z.iter().sum::<f64>()).abs() < 1e-12);
        assert!(gaussianize_values(&[1.0]).is_err());
    }
}
