//! JavaScript bindings for the demo page in `www/`. Every function returns a
//! JSON string; errors come back as JavaScript exceptions.

use fgmc::dual::duality_check;
use fgmc::estimate::EstimatorId;
use fgmc::harness::{run_experiment, BinSelection, ExperimentConfig};
use fgmc::{exact::exact_summary, Error, ExactCaps, GridModel, PairwiseKernel, PhaseBin};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Exact grids stay small in the browser.
const CAPS: ExactCaps = ExactCaps {
    brute_max_n: 20,
    transfer_max_cols: 10,
};
const MAX_DRAWS: u64 = 2_000_000;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn model(preset: &str, size: usize) -> Result<GridModel, Error> {
    GridModel::square(size, PairwiseKernel::preset(preset)?)
}

/// Exact per-bin summary, in the same JSON layout as `fgmc exact --json`.
pub fn exact_json(preset: &str, size: usize) -> Result<String, Error> {
    let s = exact_summary(&model(preset, size)?, &CAPS)?;
    Ok(serde_json::to_string(&s.to_json())?)
}

#[derive(Serialize)]
struct Traces {
    n: usize,
    /// Per chain, `[k, y]` pairs: `log2(estimate) / N` for Z, `log2` for counts.
    chains: Vec<Vec<[f64; 2]>>,
    exact: Option<f64>,
    label: String,
}

pub fn traces_json(
    preset: &str,
    size: usize,
    estimator: &str,
    bin: &str,
    k: u64,
    chains: u64,
    seed: u64,
) -> Result<String, Error> {
    let est: EstimatorId = estimator.parse()?;
    let mut cfg = ExperimentConfig::new(size, size, PairwiseKernel::preset(preset)?, est);
    cfg.bin = bin.parse()?;
    if cfg.bin == BinSelection::All {
        return Err(Error::Config("the demo plots one bin at a time".into()));
    }
    cfg.k = k;
    cfg.chains = chains;
    cfg.seed = seed;
    cfg.max_points = 400;
    cfg.max_draws_per_accept = MAX_DRAWS;
    let res = run_experiment(&cfg, 1, &CAPS)?;
    let scale = if est.estimates_z() { res.n as f64 } else { 1.0 };
    let primary = &res.chains[0].traces[0];
    let out = Traces {
        n: res.n,
        chains: res
            .chains
            .iter()
            .map(|c| {
                c.traces[0]
                    .points
                    .iter()
                    .filter(|p| p.estimate.log2_abs.is_finite())
                    .map(|p| [p.k as f64, p.estimate.log2_abs / scale])
                    .collect()
            })
            .collect(),
        exact: res.exact_log2(primary).map(|e| e / scale),
        label: format!(
            "{} {} {}",
            est,
            primary.quantity,
            primary.bin.map_or(String::new(), |b: PhaseBin| b.name())
        ),
    };
    Ok(serde_json::to_string(&out)?)
}

/// Primal against dual partition function, as `fgmc dual-check`.
pub fn dual_json(preset: &str, size: usize) -> Result<String, Error> {
    Ok(serde_json::to_string(&duality_check(&model(preset, size)?, 16)?)?)
}

#[wasm_bindgen(js_name = exactSummary)]
pub fn exact_summary_js(preset: &str, size: usize) -> Result<String, JsError> {
    exact_json(preset, size).map_err(js)
}

#[wasm_bindgen(js_name = runTraces)]
pub fn run_traces_js(
    preset: &str,
    size: usize,
    estimator: &str,
    bin: &str,
    k: u32,
    chains: u32,
    seed: u32,
) -> Result<String, JsError> {
    traces_json(preset, size, estimator, bin, k as u64, chains as u64, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = dualCheck)]
pub fn dual_check_js(preset: &str, size: usize) -> Result<String, JsError> {
    dual_json(preset, size).map_err(js)
}
