//! Browser bindings: each export runs one laboratory operation on a line
//! grid and returns its result as a JSON string for the demo page to plot.
//! The JSON builders are plain Rust so they test on the host; the
//! `#[wasm_bindgen]` wrappers only translate errors.

use serde_json::json;
use wasm_bindgen::prelude::*;

use quasiwave::ground_state::{scaling_probe, solve, SolverOptions};
use quasiwave::stability::{
    stability_experiment, Perturbation, PerturbationMode, StabilityOptions,
};
use quasiwave::{build_line_grid, Error, ModelParams, PotentialSpec, Problem};

fn line_problem(grid: &quasiwave::Grid, k: f64, theta: f64, p: f64, lambda: f64) -> Result<Problem<'_>, Error> {
    Problem::new(
        grid,
        ModelParams { dim: 1, k, theta, p, lambda, potential: PotentialSpec::Zero },
    )
}

/// Clamp browser-supplied sizes so a misclick cannot hang the tab.
fn checked_grid(extent: f64, n: usize) -> Result<quasiwave::Grid, Error> {
    if !(3.0..=40.0).contains(&extent) {
        return Err(Error::invalid_argument(format!("extent must lie in [3, 40], got {extent}")));
    }
    if !(101..=4001).contains(&n) {
        return Err(Error::invalid_argument(format!("node count must lie in [101, 4001], got {n}")));
    }
    build_line_grid(extent, n)
}

pub fn ground_state_json(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    max_iter: u64,
) -> Result<String, Error> {
    let grid = checked_grid(extent, n)?;
    let problem = line_problem(&grid, k, theta, p, lambda)?;
    let h = grid.spacing();
    let opts = SolverOptions {
        tau: Some(0.45 * h * h),
        max_iter: max_iter.clamp(1_000, 20_000_000),
        eps_residual: 1e-6,
        ..SolverOptions::default()
    };
    let gs = solve(&problem, &opts)?;
    Ok(json!({
        "x": grid.coords(),
        "u": gs.u.values(),
        "energy": gs.energy,
        "gamma": gs.gamma,
        "mu": gs.mu,
        "residual": gs.residual,
        "iterations": gs.iterations,
        "regime": gs.regime.name(),
    })
    .to_string())
}

pub fn scaling_probe_json(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    xis: &[f64],
) -> Result<String, Error> {
    let grid = checked_grid(extent, n)?;
    let problem = line_problem(&grid, k, theta, p, lambda)?;
    let raw = grid.sample(|x| (-x * x / 2.0).exp());
    let mass = grid.inner(&raw, &raw);
    let s = (2.0 * lambda / mass).sqrt();
    let psi = grid.real_field(raw.values().iter().map(|&v| s * v).collect());
    let probe = scaling_probe(&problem, &psi, xis)?;
    Ok(json!({
        "a": probe.a,
        "b": probe.b,
        "c": probe.c,
        "first_negative_xi": probe.first_negative_xi,
        "samples": probe.samples.iter().map(|smpl| json!({
            "xi": smpl.xi,
            "numeric": smpl.numeric,
            "analytic": smpl.analytic,
        })).collect::<Vec<_>>(),
    })
    .to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn stability_json(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    delta: f64,
    t_final: f64,
    dt: f64,
) -> Result<String, Error> {
    let grid = checked_grid(extent, n)?;
    let problem = line_problem(&grid, k, theta, p, lambda)?;
    let h = grid.spacing();
    let solver = SolverOptions {
        tau: Some(0.45 * h * h),
        max_iter: 4_000_000,
        eps_residual: 1e-6,
        ..SolverOptions::default()
    };
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid_argument(format!("delta must lie in [0, 1], got {delta}")));
    }
    if !(t_final > 0.0) || t_final > 20.0 {
        return Err(Error::invalid_argument(format!("horizon must lie in (0, 20], got {t_final}")));
    }
    let steps = (t_final / dt).round();
    let opts = StabilityOptions {
        perturbation: Perturbation { delta, mode: PerturbationMode::Bump },
        t_final,
        dt,
        sample_every: ((steps / 200.0).ceil() as u64).max(1),
        ..StabilityOptions::default()
    };
    let (gs, report) = stability_experiment(&problem, &solver, &opts)?;
    Ok(json!({
        "regime": report.regime.name(),
        "covered": report.covered,
        "delta0": report.delta0,
        "max_distance": report.max_distance,
        "stable": report.stable,
        "truncated": report.truncated,
        "verdict": report.verdict,
        "energy": gs.energy,
        "mu": gs.mu,
        "t": report.series.iter().map(|s| s.t).collect::<Vec<_>>(),
        "d": report.series.iter().map(|s| s.distance).collect::<Vec<_>>(),
        "mass": report.series.iter().map(|s| s.mass).collect::<Vec<_>>(),
    })
    .to_string())
}

fn to_js<T>(r: Result<T, Error>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn ground_state(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    max_iter: u64,
) -> Result<String, JsValue> {
    to_js(ground_state_json(k, theta, p, lambda, extent, n, max_iter))
}

#[wasm_bindgen]
pub fn scaling_probe_rows(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    xis: Vec<f64>,
) -> Result<String, JsValue> {
    to_js(scaling_probe_json(k, theta, p, lambda, extent, n, &xis))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn stability_run(
    k: f64,
    theta: f64,
    p: f64,
    lambda: f64,
    extent: f64,
    n: usize,
    delta: f64,
    t_final: f64,
    dt: f64,
) -> Result<String, JsValue> {
    to_js(stability_json(k, theta, p, lambda, extent, n, delta, t_final, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_state_payload_is_well_formed() {
        let out = ground_state_json(1.0, 1.0, 4.0, 0.5, 10.0, 301, 2_000_000).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["x"].as_array().unwrap().len(), 301);
        assert_eq!(v["u"].as_array().unwrap().len(), 301);
        assert!(v["energy"].as_f64().unwrap() < 0.0);
        assert_eq!(v["regime"], "stable-1d");
    }

    #[test]
    fn scaling_probe_payload_certifies_negativity() {
        let out = scaling_probe_json(1.0, 1.0, 4.0, 0.5, 12.0, 801, &[0.25, 1.0, 4.0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["samples"].as_array().unwrap().len(), 3);
        assert_eq!(v["first_negative_xi"].as_f64().unwrap(), 0.25);
    }

    #[test]
    fn stability_payload_reports_a_verdict() {
        let out = stability_json(1.0, 1.0, 4.0, 0.5, 10.0, 301, 1e-2, 1.0, 2e-3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["stable"].as_bool().unwrap());
        assert_eq!(v["t"].as_array().unwrap().len(), v["d"].as_array().unwrap().len());
    }

    #[test]
    fn browser_inputs_are_clamped() {
        assert!(ground_state_json(1.0, 1.0, 4.0, 0.5, 100.0, 301, 1000).is_err());
        assert!(ground_state_json(1.0, 1.0, 4.0, 0.5, 10.0, 50, 1000).is_err());
        assert!(stability_json(1.0, 1.0, 4.0, 0.5, 10.0, 301, 2.0, 1.0, 1e-3).is_err());
    }
}
