//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes a synthetic field description and returns JSON. The
//! plain `*_json` functions hold the logic so they can be tested natively.

use driftloc::{
    sample_trajectory, synthesize_field, viterbi, CellIndex, Direction, FlowModel, ObservationHistory, PriorMode,
    Region, SyntheticField,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_CELLS: usize = 80 * 80;

#[derive(Serialize)]
struct GridView {
    rows: usize,
    cols: usize,
    dt: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    /// Image of each cell under the deterministic map.
    images: Vec<usize>,
    /// Index into `labels` for each cell.
    region: Vec<usize>,
    labels: Vec<String>,
    persistent: usize,
}

#[derive(Serialize)]
struct Track {
    start: usize,
    observations: String,
    truth: Vec<CellIndex>,
    decoded: Vec<CellIndex>,
    log_prob: f64,
    final_error: f64,
    trajectory_error: f64,
}

#[derive(Serialize)]
struct Decode {
    observations: String,
    decoded: Vec<CellIndex>,
    log_prob: f64,
}

fn model(spec: &str, rows: usize, cols: usize, r: f64) -> Result<FlowModel, String> {
    if rows.saturating_mul(cols) > MAX_CELLS {
        return Err(format!("grid too large for the demo ({rows}x{cols})"));
    }
    let spec: SyntheticField = serde_json::from_str(spec).map_err(|e| format!("bad field spec: {e}"))?;
    let (w, f) = synthesize_field(&spec, rows, cols).map_err(|e| e.to_string())?;
    FlowModel::build(w, f, None, r).map_err(|e| e.to_string())
}

fn prior(probabilistic: bool) -> PriorMode {
    if probabilistic {
        PriorMode::Probabilistic
    } else {
        PriorMode::Deterministic
    }
}

/// Cell map and attractor decomposition. Regions come from the `r = 1`
/// chain; lower `r` merges every water body into one class.
pub fn classify_json(spec: &str, rows: usize, cols: usize) -> Result<String, String> {
    let m = model(spec, rows, cols, 1.0)?;
    let d = m.decompose().map_err(|e| e.to_string())?;
    let regions = d.regions();
    let region = (0..m.workspace.num_cells())
        .map(|z| {
            let r = d.region_of(CellIndex(z)).unwrap_or(Region::Persistent(usize::MAX));
            regions.iter().position(|x| *x == r).unwrap_or(usize::MAX)
        })
        .collect();
    let view = GridView {
        rows,
        cols,
        dt: m.dt.get(),
        u: m.field.u().to_vec(),
        v: m.field.v().to_vec(),
        images: m.cell_map.images().iter().enumerate().map(|(z, i)| i.map_or(z, |c| c.0)).collect(),
        region,
        labels: regions.iter().map(Region::label).collect(),
        persistent: d.persistent_groups.len(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Samples a drifter from `start`, then decodes its compass history.
#[allow(clippy::too_many_arguments)]
pub fn track_json(
    spec: &str,
    rows: usize,
    cols: usize,
    r: f64,
    start: usize,
    steps: usize,
    seed: u64,
    probabilistic: bool,
) -> Result<String, String> {
    if steps == 0 || steps > 500 {
        return Err("steps must lie in 1..=500".into());
    }
    let m = model(spec, rows, cols, r)?;
    let hmm = m.hmm(CellIndex(start), prior(probabilistic)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (truth, obs) =
        sample_trajectory(&m.workspace, &m.transitions, hmm.initial(), steps, &mut rng).map_err(|e| e.to_string())?;
    let dec = viterbi(&hmm, &obs).map_err(|e| e.to_string())?;
    let err = driftloc::error_report(&m.workspace, &truth, &dec.path).map_err(|e| e.to_string())?;
    let track = Track {
        start,
        observations: obs.to_string(),
        truth,
        decoded: dec.path,
        log_prob: dec.log_prob,
        final_error: err.final_error,
        trajectory_error: err.trajectory_error,
    };
    serde_json::to_string(&track).map_err(|e| e.to_string())
}

/// Decodes a typed compass history such as `"N NE E I"`.
pub fn decode_json(
    spec: &str,
    rows: usize,
    cols: usize,
    r: f64,
    start: usize,
    probabilistic: bool,
    observations: &str,
) -> Result<String, String> {
    let obs: ObservationHistory = observations.parse().map_err(|e: driftloc::Error| e.to_string())?;
    let m = model(spec, rows, cols, r)?;
    let hmm = m.hmm(CellIndex(start), prior(probabilistic)).map_err(|e| e.to_string())?;
    let dec = viterbi(&hmm, &obs).map_err(|e| e.to_string())?;
    serde_json::to_string(&Decode { observations: obs.to_string(), decoded: dec.path, log_prob: dec.log_prob })
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn classify(spec: &str, rows: usize, cols: usize) -> Result<String, JsValue> {
    classify_json(spec, rows, cols).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn track(
    spec: &str,
    rows: usize,
    cols: usize,
    r: f64,
    start: usize,
    steps: usize,
    seed: u32,
    probabilistic: bool,
) -> Result<String, JsValue> {
    track_json(spec, rows, cols, r, start, steps, u64::from(seed), probabilistic).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn decode(
    spec: &str,
    rows: usize,
    cols: usize,
    r: f64,
    start: usize,
    probabilistic: bool,
    observations: &str,
) -> Result<String, JsValue> {
    decode_json(spec, rows, cols, r, start, probabilistic, observations).map_err(|e| JsValue::from_str(&e))
}

/// Compass symbols in index order, for the page legend.
#[wasm_bindgen]
pub fn symbols() -> String {
    Direction::ALL.iter().map(|d| d.symbol()).collect::<Vec<_>>().join(" ")
}
