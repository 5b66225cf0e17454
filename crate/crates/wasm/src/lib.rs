//! Browser bindings used by the static demo page in `www/`.
//!
//! The exported functions are thin wrappers; the work happens in plain
//! functions that are also tested natively.

use exclusion_clouds::law::geometric_pmf;
use exclusion_clouds::report::{report_text, report_value, to_canonical_json, Meta};
use exclusion_clouds::simulate::{empirical_gap_law, RNG_ID};
use exclusion_clouds::{analyze_with, simulate, MergePolicy, RateSystem, SimConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Longest horizon the page may request; keeps the tab responsive.
pub const MAX_HORIZON: f64 = 1e6;
pub const MAX_SAMPLES: usize = 4000;

fn rates(a: &[f64], b: &[f64]) -> Result<RateSystem, String> {
    RateSystem::new(a.to_vec(), b.to_vec()).map_err(|e| e.to_string())
}

fn check_horizon(horizon: f64) -> Result<(), String> {
    if horizon.is_finite() && horizon > 0.0 && horizon <= MAX_HORIZON {
        Ok(())
    } else {
        Err(format!("horizon must lie in (0, {MAX_HORIZON}], got {horizon}"))
    }
}

/// Canonical report JSON with the text rendering and merge trace attached.
pub fn analyze_json(a: &[f64], b: &[f64]) -> Result<String, String> {
    let r = rates(a, b)?;
    let (report, trace) = analyze_with(&r, MergePolicy::All).map_err(|e| e.to_string())?;
    let mut value = report_value(&report, &Meta::none());
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("text".into(), report_text(&report).into());
    obj.insert("merge_trace".into(), trace.to_string().into());
    Ok(to_canonical_json(&value))
}

/// Positions at `samples + 1` equally spaced times, row-major with one row
/// per time: `[t, x_1, ..., x_{N+1}]`.
pub fn sample_paths(a: &[f64], b: &[f64], horizon: f64, seed: u64, samples: usize) -> Result<Vec<f64>, String> {
    let r = rates(a, b)?;
    check_horizon(horizon)?;
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must lie in 1..={MAX_SAMPLES}"));
    }
    let times = (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
    let cfg = SimConfig::new(horizon, seed).with_sample_times(times).without_occupation();
    let run = simulate(&r, &cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(run.snapshots.len() * (r.particles() + 1));
    for snap in &run.snapshots {
        out.push(snap.time);
        out.extend(snap.positions.iter().map(|&x| x as f64));
    }
    Ok(out)
}

/// Empirical occupation of each gap value `0..=max_gap` after a 10% burn-in,
/// next to the geometric law where the gap is inside a stable cloud.
pub fn gap_histogram_json(a: &[f64], b: &[f64], horizon: f64, seed: u64, max_gap: u32) -> Result<String, String> {
    let r = rates(a, b)?;
    check_horizon(horizon)?;
    let (report, _) = analyze_with(&r, MergePolicy::All).map_err(|e| e.to_string())?;
    let run = simulate(&r, &SimConfig::new(horizon, seed)).map_err(|e| e.to_string())?;
    let occ = run.occupation.as_ref().expect("occupation is tracked by default");
    let mut gaps = Vec::new();
    for g in 1..=r.gaps() {
        let law = empirical_gap_law(occ, &[g]).map_err(|e| e.to_string())?;
        let pmf = law.marginal(0);
        let empirical: Vec<f64> = (0..=max_gap as usize).map(|k| pmf.get(k).copied().unwrap_or(0.0)).collect();
        let rho = report.rho[g - 1];
        let inside = report.partition.part_of(g) == report.partition.part_of(g + 1);
        let analytical = (inside && rho < 1.0)
            .then(|| (0..=max_gap as u64).map(|k| geometric_pmf(rho, k)).collect::<Vec<_>>());
        gaps.push(json!({ "gap": g, "rho": rho, "empirical": empirical, "analytical": analytical }));
    }
    let value = json!({ "gaps": gaps, "horizon": horizon, "seed": seed, "rng": RNG_ID });
    Ok(to_canonical_json(&value))
}

#[wasm_bindgen]
pub fn analyze(a: &[f64], b: &[f64]) -> Result<String, JsError> {
    analyze_json(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_paths(a: &[f64], b: &[f64], horizon: f64, seed: u32, samples: u32) -> Result<Vec<f64>, JsError> {
    sample_paths(a, b, horizon, seed as u64, samples as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gap_histogram(a: &[f64], b: &[f64], horizon: f64, seed: u32, max_gap: u32) -> Result<String, JsError> {
    gap_histogram_json(a, b, horizon, seed as u64, max_gap).map_err(|e| JsError::new(&e))
}
